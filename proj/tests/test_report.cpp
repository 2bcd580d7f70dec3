#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <sstream>

#include "doctest.h"
#include "vrs/report.hpp"
#include "vrs/util.hpp"

using namespace vrs;
namespace fs = std::filesystem;

namespace {

// Curve over the 101-point grid whose STVD equals `target` up to
// rounding: every point is offset toward the interior by target/101.
CalibrationCurve curve_with_stvd(double target) {
    const double delta = target / 101.0;
    std::vector<CurvePoint> points;
    for (int i = 0; i <= 100; ++i) {
        const double p = i / 100.0;
        const double hat = p <= 0.5 ? p + delta : p - delta;
        points.push_back({p, hat, 100});
    }
    return CalibrationCurve(points);
}

CalibrationCurve identity_curve(int n = 101) {
    std::vector<CurvePoint> points;
    for (int i = 0; i < n; ++i) {
        const double p = static_cast<double>(i) / (n - 1);
        points.push_back({p, p, 100});
    }
    return CalibrationCurve(points);
}

}  // namespace

TEST_CASE("stvd table means are exact row averages") {
    // Shapes mirror the published direct-vs-vrs comparison.
    std::map<std::pair<std::string, std::string>, CalibrationCurve> curves;
    curves.emplace(std::make_pair("direct", "P1"), curve_with_stvd(21.80));
    curves.emplace(std::make_pair("direct", "P0"), curve_with_stvd(17.95));
    curves.emplace(std::make_pair("direct", "P10"), curve_with_stvd(12.10));
    curves.emplace(std::make_pair("direct", "P01"), curve_with_stvd(11.08));
    curves.emplace(std::make_pair("vrs", "P1"), curve_with_stvd(5.91));
    curves.emplace(std::make_pair("vrs", "P0"), curve_with_stvd(7.63));
    curves.emplace(std::make_pair("vrs", "P10"), curve_with_stvd(5.52));
    curves.emplace(std::make_pair("vrs", "P01"), curve_with_stvd(5.56));

    const StvdTable table = build_stvd_table(curves);
    CHECK(table.phrasings == std::vector<std::string>{"P1", "P0", "P10", "P01"});

    const double direct_mean = (table.cells.at("direct").at("P1") +
                                table.cells.at("direct").at("P0") +
                                table.cells.at("direct").at("P10") +
                                table.cells.at("direct").at("P01")) /
                               4.0;
    CHECK(std::abs(table.means.at("direct") - direct_mean) <= 1e-12);
    CHECK(table.means.at("direct") == doctest::Approx(15.7325).epsilon(1e-9));

    // The mean is reported unrounded: 6.155, not a re-rounded 6.20.
    CHECK(table.means.at("vrs") == doctest::Approx(6.155).epsilon(1e-9));

    const std::string csv = table.to_csv("feedcafe");
    CHECK(csv.find("# spec_sha256=feedcafe") == 0);
    CHECK(csv.find("method,P1,P0,P10,P01,mean") != std::string::npos);

    // Rendered text rounds to two decimals.
    const std::string text = table.to_text();
    CHECK(text.find("15.73") != std::string::npos);
}

TEST_CASE("stvd table rejects mismatched grids and is all-zero on identity") {
    std::map<std::pair<std::string, std::string>, CalibrationCurve> curves;
    curves.emplace(std::make_pair("direct", "P1"), identity_curve(101));
    curves.emplace(std::make_pair("direct", "P0"), identity_curve(51));
    CHECK_THROWS_AS(build_stvd_table(curves), std::invalid_argument);

    curves.clear();
    curves.emplace(std::make_pair("direct", "P1"), identity_curve());
    curves.emplace(std::make_pair("vrs", "P1"), identity_curve());
    const StvdTable table = build_stvd_table(curves);
    CHECK(table.cells.at("direct").at("P1") == 0.0);
    CHECK(table.cells.at("vrs").at("P1") == 0.0);
    CHECK(table.means.at("direct") == 0.0);
}

TEST_CASE("error boxes follow the crossover threshold") {
    const std::vector<double> grid{0.2, 0.5, 0.8, 0.99};
    const std::vector<ErrorBox> boxes = build_error_boxes(Probability(0.5), grid);
    REQUIRE(boxes.size() == 4);

    // p = 0.8: M = 1.6, Q(xhat) = 0.5 -> c = 0.25, box [0.55, 1.0].
    CHECK(boxes[2].c == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(boxes[2].lo == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(boxes[2].hi == 1.0);
    CHECK_FALSE(boxes[2].at_proposal);

    // p = q: feasibility-limit box, the widest one.
    CHECK(boxes[1].at_proposal);
    CHECK(boxes[1].lo == 0.0);
    CHECK(boxes[1].hi == 1.0);

    // p = 0.99: c = 1/(0.5 * 1.98) - 1, a narrow box.
    CHECK(boxes[3].c == doctest::Approx(1.0 / 0.99 - 1.0).epsilon(1e-12));
    CHECK(boxes[3].hi - boxes[3].lo < 0.05);
}

TEST_CASE("error box width peaks at p = q and shrinks monotonically") {
    std::vector<double> grid;
    for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
    const std::vector<ErrorBox> boxes = build_error_boxes(Probability(0.5), grid);
    // Clipping saturates the width at 1, so the maximum is attained
    // (not uniquely) at p = q, and widths never grow moving outward.
    double peak = 0.0;
    double width_at_half = 0.0;
    for (const ErrorBox& box : boxes) {
        peak = std::max(peak, box.hi - box.lo);
        if (box.p == 0.5) width_at_half = box.hi - box.lo;
    }
    CHECK(width_at_half == peak);
    for (std::size_t i = 0; i + 1 < boxes.size(); ++i) {
        const double w_left = boxes[i].hi - boxes[i].lo;
        const double w_right = boxes[i + 1].hi - boxes[i + 1].lo;
        if (boxes[i + 1].p <= 0.5) CHECK(w_left <= w_right + 1e-12);
        if (boxes[i].p >= 0.5) CHECK(w_left >= w_right - 1e-12);
    }
    // The unclipped threshold c is strictly monotone on each side.
    for (std::size_t i = 0; i + 1 < boxes.size(); ++i) {
        if (boxes[i + 1].p <= 0.5) CHECK(boxes[i].c <= boxes[i + 1].c + 1e-12);
        if (boxes[i].p >= 0.5) CHECK(boxes[i].c >= boxes[i + 1].c - 1e-12);
    }
}

TEST_CASE("calibration plots are deterministic and sidecar-complete") {
    const fs::path dir = fs::temp_directory_path() / "vrs_plot_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::map<std::string, CalibrationCurve> curves;
    curves.emplace("identity", identity_curve(21));
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    const std::vector<ErrorBox> boxes = build_error_boxes(Probability(0.5), grid);

    emit_calibration_plot(curves, boxes, dir / "a.svg", "cafe");
    emit_calibration_plot(curves, boxes, dir / "b.svg", "cafe");
    CHECK(read_text_file(dir / "a.svg") == read_text_file(dir / "b.svg"));
    CHECK(read_text_file(dir / "a.svg.csv") == read_text_file(dir / "b.svg.csv"));

    const std::string svg = read_text_file(dir / "a.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("<rect") != std::string::npos);

    // Every curve point appears in the sidecar; box extents in the
    // sidecar match the generator output.
    const std::string sidecar = read_text_file(dir / "a.svg.csv");
    std::istringstream lines(sidecar);
    std::string line;
    int curve_rows = 0;
    std::map<double, std::pair<double, double>> sidecar_boxes;
    while (std::getline(lines, line)) {
        if (line.rfind("identity,", 0) == 0) ++curve_rows;
        if (line.rfind("box_lo,", 0) == 0 || line.rfind("box_hi,", 0) == 0) {
            std::istringstream fields(line);
            std::string kind, p_text, value_text;
            std::getline(fields, kind, ',');
            std::getline(fields, p_text, ',');
            std::getline(fields, value_text, ',');
            auto& entry = sidecar_boxes[std::strtod(p_text.c_str(), nullptr)];
            (kind == "box_lo" ? entry.first : entry.second) =
                std::strtod(value_text.c_str(), nullptr);
        }
    }
    CHECK(curve_rows == 21);
    REQUIRE(sidecar_boxes.size() == boxes.size());
    for (const ErrorBox& box : boxes) {
        REQUIRE(sidecar_boxes.count(box.p) == 1);
        CHECK(sidecar_boxes.at(box.p).first == box.lo);
        CHECK(sidecar_boxes.at(box.p).second == box.hi);
    }
    fs::remove_all(dir);
}

TEST_CASE("recognition summaries expose the triangle asymmetry") {
    std::vector<RecognitionCell> cells;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            RecognitionCell cell;
            cell.i = i;
            cell.j = j;
            cell.matrix = "ref";
            cell.accuracy = i == j ? 1.0 : (j > i ? 0.9 : 0.6);
            cells.push_back(cell);
        }
    }
    const RecognitionSummary summary = summarize_recognition(cells, "ref");
    CHECK(summary.size == 5);
    CHECK(summary.diagonal_mean == 1.0);
    CHECK(summary.upper_mean == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(summary.lower_mean == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(summary.asymmetry == doctest::Approx(0.3).epsilon(1e-12));

    // Identity-accurate matrix: zero asymmetry.
    for (RecognitionCell& cell : cells) cell.accuracy = cell.i == cell.j ? 1.0 : 1.0;
    const RecognitionSummary flat = summarize_recognition(cells, "ref");
    CHECK(flat.asymmetry == 0.0);

    // Incomplete matrices are rejected.
    cells.pop_back();
    CHECK_THROWS_AS(summarize_recognition(cells, "ref"), std::invalid_argument);
    CHECK_THROWS_AS(summarize_recognition(cells, "nope"), std::invalid_argument);

    const std::string csv =
        recognition_summary_csv({summary}, {"ref"}, "beef");
    CHECK(csv.find("# spec_sha256=beef") == 0);
    CHECK(csv.find("matrix,size,diagonal_mean") != std::string::npos);
}
