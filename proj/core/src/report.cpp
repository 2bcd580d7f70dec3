#include "vrs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vrs/bias.hpp"
#include "vrs/util.hpp"

namespace vrs {

namespace {

std::string fixed2(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

}  // namespace

StvdTable build_stvd_table(
    const std::map<std::pair<std::string, std::string>, CalibrationCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("no curves to tabulate");

    // All curves must live on one grid.
    const CalibrationCurve& reference = curves.begin()->second;
    for (const auto& [key, curve] : curves) {
        if (curve.size() != reference.size()) {
            throw std::invalid_argument("curve grids differ in size for " + key.first + "/" +
                                        key.second);
        }
        for (std::size_t i = 0; i < curve.size(); ++i) {
            if (curve.points()[i].p_true != reference.points()[i].p_true) {
                throw std::invalid_argument("curve grids differ at point " + std::to_string(i));
            }
        }
    }

    StvdTable table;
    std::set<std::string> phrasing_set;
    std::set<std::string> method_set;
    for (const auto& [key, curve] : curves) {
        method_set.insert(key.first);
        phrasing_set.insert(key.second);
        table.cells[key.first][key.second] = stvd(curve);
    }
    // Stable column order: P1, P0, P10, P01 first when present.
    for (const char* name : {"P1", "P0", "P10", "P01"}) {
        if (phrasing_set.count(name)) {
            table.phrasings.push_back(name);
            phrasing_set.erase(name);
        }
    }
    table.phrasings.insert(table.phrasings.end(), phrasing_set.begin(), phrasing_set.end());
    table.methods.assign(method_set.begin(), method_set.end());

    for (const std::string& method : table.methods) {
        const auto& row = table.cells.at(method);
        double sum = 0.0;
        for (const std::string& phrasing : table.phrasings) {
            const auto it = row.find(phrasing);
            if (it == row.end()) {
                throw std::invalid_argument("method " + method + " lacks phrasing " + phrasing);
            }
            sum += it->second;
        }
        table.means[method] = sum / static_cast<double>(table.phrasings.size());
    }
    return table;
}

std::string StvdTable::to_csv(const std::string& spec_sha256) const {
    std::ostringstream out;
    out << "# spec_sha256=" << spec_sha256 << "\n";
    out << "method";
    for (const std::string& phrasing : phrasings) out << ',' << phrasing;
    out << ",mean\n";
    for (const std::string& method : methods) {
        out << method;
        for (const std::string& phrasing : phrasings) {
            out << ',' << format_double(cells.at(method).at(phrasing));
        }
        out << ',' << format_double(means.at(method)) << "\n";
    }
    return out.str();
}

std::string StvdTable::to_text() const {
    std::ostringstream out;
    out << "method";
    for (const std::string& phrasing : phrasings) out << '\t' << phrasing;
    out << "\tmean\n";
    for (const std::string& method : methods) {
        out << method;
        for (const std::string& phrasing : phrasings) {
            out << '\t' << fixed2(cells.at(method).at(phrasing));
        }
        out << '\t' << fixed2(means.at(method)) << "\n";
    }
    return out.str();
}

std::vector<ErrorBox> build_error_boxes(Probability q, const std::vector<double>& p_grid) {
    const double qv = q.value();
    if (qv <= 0.0 || qv >= 1.0) {
        throw std::invalid_argument("error boxes need a proposal strictly inside (0, 1)");
    }
    std::vector<ErrorBox> boxes;
    boxes.reserve(p_grid.size());
    for (double p : p_grid) {
        ErrorBox box;
        box.p = p;
        if (p == qv) {
            // No biased event at p = q; the threshold approaches its
            // one-sided limits, so draw the feasibility-limit box.
            box.c = std::max(qv / (1.0 - qv), (1.0 - qv) / qv);
            box.at_proposal = true;
        } else {
            const ProposalPair pair(p, qv);
            const int xhat = *nontrivial_event(pair);
            box.c = crossover_threshold(Probability(pair.proposal().mass(xhat)),
                                        m_constant(pair));
        }
        const double extent = std::max(box.c, 0.0);
        box.lo = std::clamp(p - extent, 0.0, 1.0);
        box.hi = std::clamp(p + extent, 0.0, 1.0);
        boxes.push_back(box);
    }
    return boxes;
}

namespace {

// Plot geometry: fixed outer size with a square data area.
constexpr double kSize = 640.0;
constexpr double kMargin = 60.0;
constexpr double kArea = kSize - 2.0 * kMargin;

double sx(double p) { return kMargin + p * kArea; }
double sy(double v) { return kSize - kMargin - v * kArea; }

std::string coord(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void emit_calibration_plot(const std::map<std::string, CalibrationCurve>& curves,
                           const std::vector<ErrorBox>& boxes,
                           const std::filesystem::path& svg_path,
                           const std::string& spec_sha256) {
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
        << kSize << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
    svg << "<rect width=\"" << kSize << "\" height=\"" << kSize << "\" fill=\"white\"/>\n";

    // Error boxes sit below everything else.
    for (const ErrorBox& box : boxes) {
        const double half = kArea / 200.0;  // grid-step / 2 in screen units
        const double x0 = sx(box.p) - half;
        const double y0 = sy(box.hi);
        const double height = sy(box.lo) - sy(box.hi);
        svg << "<rect x=\"" << coord(x0) << "\" y=\"" << coord(y0) << "\" width=\""
            << coord(2.0 * half) << "\" height=\"" << coord(height)
            << "\" fill=\"#000000\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }

    // Axes with ticks at 0, 1/2, 1.
    svg << "<rect x=\"" << coord(kMargin) << "\" y=\"" << coord(kMargin) << "\" width=\""
        << coord(kArea) << "\" height=\"" << coord(kArea)
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (double tick : {0.0, 0.5, 1.0}) {
        svg << "<text x=\"" << coord(sx(tick)) << "\" y=\"" << coord(kSize - kMargin + 24.0)
            << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">"
            << format_probability(tick) << "</text>\n";
        svg << "<text x=\"" << coord(kMargin - 10.0) << "\" y=\"" << coord(sy(tick) + 5.0)
            << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"end\">"
            << format_probability(tick) << "</text>\n";
    }
    svg << "<text x=\"" << coord(kSize / 2.0) << "\" y=\"" << coord(kSize - 16.0)
        << "\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">"
        << "target probability p</text>\n";
    svg << "<text x=\"18\" y=\"" << coord(kSize / 2.0)
        << "\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\" "
        << "transform=\"rotate(-90 18 " << coord(kSize / 2.0) << ")\">"
        << "empirical frequency of 1</text>\n";

    // Diagonal reference.
    svg << "<line x1=\"" << coord(sx(0.0)) << "\" y1=\"" << coord(sy(0.0)) << "\" x2=\""
        << coord(sx(1.0)) << "\" y2=\"" << coord(sy(1.0))
        << "\" stroke=\"#444444\" stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n";

    std::size_t color = 0;
    for (const auto& [label, curve] : curves) {
        const char* stroke = kPalette[color % (sizeof kPalette / sizeof kPalette[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << stroke
            << "\" stroke-width=\"1.5\" points=\"";
        for (const CurvePoint& point : curve.points()) {
            svg << coord(sx(point.p_true)) << ',' << coord(sy(point.p_hat)) << ' ';
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << coord(kMargin + 12.0)
            << "\" y=\"" << coord(kMargin + 20.0 + 18.0 * static_cast<double>(color))
            << "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"" << stroke << "\">"
            << label << "</text>\n";
        ++color;
    }
    svg << "</svg>\n";
    write_text_file(svg_path, svg.str());

    // Sidecar: every rendered point and box, in plot order.
    std::ostringstream sidecar;
    sidecar << "# spec_sha256=" << spec_sha256 << "\n";
    sidecar << "series,p,value,extra\n";
    for (const auto& [label, curve] : curves) {
        for (const CurvePoint& point : curve.points()) {
            sidecar << label << ',' << format_double(point.p_true) << ','
                    << format_double(point.p_hat) << ',' << point.n_samples << "\n";
        }
    }
    for (const ErrorBox& box : boxes) {
        sidecar << "box_lo," << format_double(box.p) << ',' << format_double(box.lo) << ','
                << (box.at_proposal ? "at_proposal" : "") << "\n";
        sidecar << "box_hi," << format_double(box.p) << ',' << format_double(box.hi) << ','
                << (box.at_proposal ? "at_proposal" : "") << "\n";
    }
    write_text_file(svg_path.string() + ".csv", sidecar.str());
}

RecognitionSummary summarize_recognition(const std::vector<RecognitionCell>& cells,
                                         const std::string& matrix) {
    int size = 0;
    for (const RecognitionCell& cell : cells) {
        if (cell.matrix != matrix) continue;
        size = std::max(size, std::max(cell.i, cell.j) + 1);
    }
    if (size == 0) throw std::invalid_argument("no cells for matrix " + matrix);

    std::vector<std::vector<double>> grid(static_cast<std::size_t>(size),
                                          std::vector<double>(static_cast<std::size_t>(size),
                                                              -1.0));
    for (const RecognitionCell& cell : cells) {
        if (cell.matrix != matrix) continue;
        grid[static_cast<std::size_t>(cell.i)][static_cast<std::size_t>(cell.j)] =
            cell.accuracy;
    }

    RecognitionSummary summary;
    summary.size = size;
    double diag_sum = 0.0;
    double upper_sum = 0.0;
    double lower_sum = 0.0;
    double far_sum = 0.0;
    int upper_n = 0;
    int lower_n = 0;
    int far_n = 0;
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double value = grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (value < 0.0) {
                throw std::invalid_argument("matrix " + matrix + " is not square/complete");
            }
            if (i == j) diag_sum += value;
            if (j > i) {
                upper_sum += value;
                upper_n += 1;
            }
            if (j < i) {
                lower_sum += value;
                lower_n += 1;
            }
            if (std::abs(i - j) >= 2) {
                far_sum += value;
                far_n += 1;
            }
        }
    }
    summary.diagonal_mean = diag_sum / size;
    summary.upper_mean = upper_n > 0 ? upper_sum / upper_n : 0.0;
    summary.lower_mean = lower_n > 0 ? lower_sum / lower_n : 0.0;
    summary.asymmetry = summary.upper_mean - summary.lower_mean;
    summary.far_mean = far_n > 0 ? far_sum / far_n : 0.0;
    return summary;
}

std::string recognition_summary_csv(const std::vector<RecognitionSummary>& summaries,
                                    const std::vector<std::string>& labels,
                                    const std::string& spec_sha256) {
    if (summaries.size() != labels.size()) {
        throw std::invalid_argument("one label per summary required");
    }
    std::ostringstream out;
    out << "# spec_sha256=" << spec_sha256 << "\n";
    out << "matrix,size,diagonal_mean,upper_mean,lower_mean,asymmetry,far_mean\n";
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const RecognitionSummary& s = summaries[i];
        out << labels[i] << ',' << s.size << ',' << format_double(s.diagonal_mean) << ','
            << format_double(s.upper_mean) << ',' << format_double(s.lower_mean) << ','
            << format_double(s.asymmetry) << ',' << format_double(s.far_mean) << "\n";
    }
    return out.str();
}

}  // namespace vrs
