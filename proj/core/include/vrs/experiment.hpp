#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vrs/backend.hpp"
#include "vrs/bernoulli.hpp"
#include "vrs/prompts.hpp"
#include "vrs/simulated.hpp"

namespace vrs {

enum class ExperimentKind {
    DirectSweep,
    VrsSweep,
    VrsSimpleSweep,
    RecognitionMatrix,
    CotSweep,
};

std::string_view kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(std::string_view name);

enum class BackendKind { Live, Simulated, Replay };

std::string_view backend_kind_name(BackendKind kind);
BackendKind backend_kind_from_name(std::string_view name);

/// Declarative description of the simulated backend's bias, as it
/// appears in spec files.
struct SimBiasSpec {
    std::string direct_kind = "none";  // none | offset
    double direct_value = 0.0;
    std::string accept_kind = "none";  // none | half_offset | offset
    double accept_value = 0.0;
    std::string judge = "concentration";  // concentration | random
    double judge_tol = 0.05;
    double malformed_rate = 0.0;

    SimulatedBias materialize(std::uint64_t seed) const;
};

struct RecognitionSettings {
    int grid_count = 11;  // hypotheses 0.0, 0.1, ..., 1.0
    int repeats = 5;
    int samples_per_set = 100;
    std::string source = "rng";  // dataset source for the second matrix: rng | direct | vrs
};

/// One declarative experiment: the standard protocol by default
/// (101-point grid, 100 samples per point, q = 1/2).
struct ExperimentSpec {
    std::string id;
    ExperimentKind kind = ExperimentKind::DirectSweep;
    std::vector<double> p_grid = default_p_grid();
    int samples_per_point = 100;
    double q = 0.5;
    std::vector<Phrasing> phrasings{Phrasing::P1};
    bool with_m_instruction = false;
    CotDirective cot = CotDirective::auto_mode();
    std::vector<CotDirective> cot_grid = default_cot_grid();
    RecognitionSettings recognition;
    BackendConfig live;
    SimBiasSpec sim;
    std::uint64_t seed = 1;
    int parallelism = 1;

    static std::vector<double> default_p_grid();    // 101 values, step 0.01
    static std::vector<double> default_a_grid();    // same grid, for A(1) targets
    static std::vector<CotDirective> default_cot_grid();  // none, 50..500, auto

    static ExperimentSpec from_json_text(const std::string& text);
    std::string to_json_text() const;

    /// Method label for result tables: direct, vrs, vrs-m, vrs-simple,
    /// vrs-simple-m.
    std::string method_label() const;
};

/// One backend call: prompt, response, parse outcome. Exactly one of
/// these is appended to the run log per call, including failed parses.
struct QueryRecord {
    std::string experiment_id;
    double p = 0.0;
    std::string phrasing;
    std::string variant;
    int x = -1;  // proposed sample; -1 when not applicable
    std::int64_t sample_index = 0;
    std::string prompt_sha256;
    std::string raw_response;
    std::optional<std::string> parsed_value;
    int retry_count = 0;
    std::string timestamp;

    /// Cell identity: variant | phrasing | p.
    std::string cell_key() const;

    std::string to_json_line() const;
    static QueryRecord from_json_line(const std::string& line);
};

/// First line of every run log.
struct RunLogHeader {
    std::string experiment_id;
    std::string spec_sha256;
    std::uint64_t seed = 0;
    std::string backend;
    std::string created_at;

    std::string to_json_line() const;
    static RunLogHeader from_json_line(const std::string& line);
};

struct RunLogContents {
    RunLogHeader header;
    std::vector<QueryRecord> records;
    bool truncated_corrupt_tail = false;
};

/// Parse a run log. A corrupt trailing line (torn write from a killed
/// run) is dropped with a note; corruption anywhere else is an error.
RunLogContents read_run_log(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Aggregation: records -> experiment outputs. Pure and deterministic;
// used both by the runner after a run and by `report` on stored logs,
// so the two can never drift apart.
// ---------------------------------------------------------------------------

struct AcceptanceRow {
    double p = 0.0;
    int x = 0;
    std::int64_t proposed = 0;
    std::int64_t accepted = 0;
    std::string phrasing;
    std::string variant;
};

struct RecognitionCell {
    int i = 0;
    int j = 0;
    double accuracy = 0.0;
    std::string matrix;  // "ref" (harness RNG data) or "test" (sampler under test)
};

struct SweepOutputs {
    /// Calibration curves keyed by (variant, phrasing). For vrs-simple
    /// sweeps the abscissa is the target acceptance probability a.
    std::map<std::pair<std::string, std::string>, CalibrationCurve> curves;
    std::vector<AcceptanceRow> acceptance;
    std::vector<RecognitionCell> recognition;
    std::vector<std::string> failed_cells;  // cells with incomplete data
};

SweepOutputs aggregate_records(const ExperimentSpec& spec,
                               const std::vector<QueryRecord>& records);

/// Result CSV writers. Every file starts with a comment line carrying
/// the run-spec sha256, then a header row.
std::string curves_csv(const SweepOutputs& outputs, const std::string& spec_sha256);
std::string stvd_csv(const SweepOutputs& outputs, const std::string& method,
                     const std::string& spec_sha256);
std::string acceptance_csv(const SweepOutputs& outputs, const std::string& spec_sha256);
std::string recognition_csv(const SweepOutputs& outputs, const std::string& spec_sha256);

}  // namespace vrs
