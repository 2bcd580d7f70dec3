#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vrs/bernoulli.hpp"
#include "vrs/experiment.hpp"

namespace vrs {

/// STVD scores arranged as methods x phrasings, with a per-method mean
/// over the phrasing entries. CSV output keeps full precision; the text
/// rendering rounds to two decimals.
struct StvdTable {
    std::vector<std::string> phrasings;  // column order
    std::vector<std::string> methods;    // row order
    std::map<std::string, std::map<std::string, double>> cells;  // method -> phrasing -> stvd
    std::map<std::string, double> means;

    std::string to_csv(const std::string& spec_sha256) const;
    std::string to_text() const;
};

/// Builds the table from curves keyed by (method, phrasing). All curves
/// must share one grid.
StvdTable build_stvd_table(
    const std::map<std::pair<std::string, std::string>, CalibrationCurve>& curves);

/// Worst-case-bias interval around one grid point: VRS beats direct
/// sampling in worst-case TV iff the empirical direct frequency stays
/// inside [lo, hi]. At p = q there is no biased event and the box is
/// drawn at the feasibility limit instead, flagged by `at_proposal`.
struct ErrorBox {
    double p = 0.0;
    double c = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool at_proposal = false;
};

std::vector<ErrorBox> build_error_boxes(Probability q, const std::vector<double>& p_grid);

/// Static SVG calibration plot (diagonal reference, optional error
/// boxes, one polyline per curve) plus a CSV sidecar carrying every
/// rendered point. Output bytes are a pure function of the inputs.
void emit_calibration_plot(const std::map<std::string, CalibrationCurve>& curves,
                           const std::vector<ErrorBox>& boxes,
                           const std::filesystem::path& svg_path,
                           const std::string& spec_sha256);

struct RecognitionSummary {
    int size = 0;
    double diagonal_mean = 0.0;
    double upper_mean = 0.0;  // j > i
    double lower_mean = 0.0;  // j < i
    double asymmetry = 0.0;   // upper_mean - lower_mean
    double far_mean = 0.0;    // |i - j| >= 2
};

/// Summary statistics of one accuracy matrix (entries for `matrix`
/// taken from the aggregated recognition cells). The matrix must be
/// complete and square.
RecognitionSummary summarize_recognition(const std::vector<RecognitionCell>& cells,
                                         const std::string& matrix);

std::string recognition_summary_csv(const std::vector<RecognitionSummary>& summaries,
                                    const std::vector<std::string>& labels,
                                    const std::string& spec_sha256);

}  // namespace vrs
