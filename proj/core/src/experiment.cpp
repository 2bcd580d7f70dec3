#include "vrs/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

#include "vrs/util.hpp"

namespace vrs {

using nlohmann::json;

std::string_view kind_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::DirectSweep: return "direct_sweep";
        case ExperimentKind::VrsSweep: return "vrs_sweep";
        case ExperimentKind::VrsSimpleSweep: return "vrs_simple_sweep";
        case ExperimentKind::RecognitionMatrix: return "recognition_matrix";
        case ExperimentKind::CotSweep: return "cot_sweep";
    }
    throw std::logic_error("unreachable experiment kind");
}

ExperimentKind kind_from_name(std::string_view name) {
    if (name == "direct_sweep") return ExperimentKind::DirectSweep;
    if (name == "vrs_sweep") return ExperimentKind::VrsSweep;
    if (name == "vrs_simple_sweep") return ExperimentKind::VrsSimpleSweep;
    if (name == "recognition_matrix") return ExperimentKind::RecognitionMatrix;
    if (name == "cot_sweep") return ExperimentKind::CotSweep;
    throw std::invalid_argument("unknown experiment kind: " + std::string(name));
}

std::string_view backend_kind_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::Live: return "live";
        case BackendKind::Simulated: return "sim";
        case BackendKind::Replay: return "replay";
    }
    throw std::logic_error("unreachable backend kind");
}

BackendKind backend_kind_from_name(std::string_view name) {
    if (name == "live") return BackendKind::Live;
    if (name == "sim") return BackendKind::Simulated;
    if (name == "replay") return BackendKind::Replay;
    throw std::invalid_argument("unknown backend kind: " + std::string(name));
}

SimulatedBias SimBiasSpec::materialize(std::uint64_t seed) const {
    SimulatedBias bias;
    bias.seed = seed;
    if (direct_kind == "offset") {
        const double e = direct_value;
        bias.direct_error = [e](double) { return e; };
    } else if (direct_kind != "none") {
        throw std::invalid_argument("unknown direct_error kind: " + direct_kind);
    }
    if (accept_kind == "offset") {
        const double e = accept_value;
        bias.accept_error = [e](double, int) { return e; };
    } else if (accept_kind == "half_offset") {
        const double e = accept_value;
        bias.accept_error = [e](double a, int) { return a < 1.0 ? e : 0.0; };
    } else if (accept_kind != "none") {
        throw std::invalid_argument("unknown accept_error kind: " + accept_kind);
    }
    if (judge == "random") {
        bias.judge = SimulatedBias::Judge::Random;
    } else if (judge != "concentration") {
        throw std::invalid_argument("unknown judge kind: " + judge);
    }
    bias.judge_tol = judge_tol;
    bias.malformed_rate = malformed_rate;
    return bias;
}

std::vector<double> ExperimentSpec::default_p_grid() {
    std::vector<double> grid;
    grid.reserve(101);
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    return grid;
}

std::vector<double> ExperimentSpec::default_a_grid() { return default_p_grid(); }

std::vector<CotDirective> ExperimentSpec::default_cot_grid() {
    std::vector<CotDirective> grid;
    grid.push_back(CotDirective::no_reasoning());
    for (int words = 50; words <= 500; words += 50) {
        grid.push_back(CotDirective::exact_words(words));
    }
    grid.push_back(CotDirective::auto_mode());
    return grid;
}

namespace {

json cot_to_json(const CotDirective& cot) {
    switch (cot.mode) {
        case CotDirective::Mode::Auto: return "auto";
        case CotDirective::Mode::NoReasoning: return "none";
        case CotDirective::Mode::ExactWords: return cot.words;
    }
    throw std::logic_error("unreachable cot mode");
}

CotDirective cot_from_json(const json& value) {
    if (value.is_number_integer()) return CotDirective::exact_words(value.get<int>());
    const std::string text = value.get<std::string>();
    if (text == "auto") return CotDirective::auto_mode();
    if (text == "none") return CotDirective::no_reasoning();
    throw std::invalid_argument("cot must be \"auto\", \"none\" or a word count");
}

std::vector<double> grid_from_json(const json& value) {
    if (value.is_object()) {
        const int count = value.at("count").get<int>();
        if (count < 2) throw std::invalid_argument("grid count must be at least 2");
        std::vector<double> grid;
        grid.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            grid.push_back(static_cast<double>(i) / static_cast<double>(count - 1));
        }
        return grid;
    }
    std::vector<double> grid = value.get<std::vector<double>>();
    if (grid.empty()) throw std::invalid_argument("p_grid must not be empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        (void)Probability(grid[i]);
        if (i > 0 && !(grid[i - 1] < grid[i])) {
            throw std::invalid_argument("p_grid must be strictly increasing");
        }
    }
    return grid;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& err) {
        throw std::invalid_argument(std::string("spec is not valid JSON: ") + err.what());
    }

    ExperimentSpec spec;
    spec.id = doc.at("id").get<std::string>();
    spec.kind = kind_from_name(doc.at("kind").get<std::string>());
    if (doc.contains("p_grid")) spec.p_grid = grid_from_json(doc.at("p_grid"));
    if (doc.contains("samples_per_point")) {
        spec.samples_per_point = doc.at("samples_per_point").get<int>();
        if (spec.samples_per_point <= 0) {
            throw std::invalid_argument("samples_per_point must be positive");
        }
    }
    if (doc.contains("q")) {
        spec.q = doc.at("q").get<double>();
        if (spec.q <= 0.0 || spec.q >= 1.0) {
            throw std::invalid_argument("q must lie strictly in (0, 1)");
        }
    }
    if (doc.contains("phrasings")) {
        spec.phrasings.clear();
        for (const auto& name : doc.at("phrasings")) {
            spec.phrasings.push_back(phrasing_from_name(name.get<std::string>()));
        }
        if (spec.phrasings.empty()) throw std::invalid_argument("phrasings must not be empty");
    }
    if (doc.contains("with_m_instruction")) {
        spec.with_m_instruction = doc.at("with_m_instruction").get<bool>();
    }
    if (doc.contains("cot")) spec.cot = cot_from_json(doc.at("cot"));
    if (doc.contains("cot_grid")) {
        spec.cot_grid.clear();
        for (const auto& value : doc.at("cot_grid")) spec.cot_grid.push_back(cot_from_json(value));
        if (spec.cot_grid.empty()) throw std::invalid_argument("cot_grid must not be empty");
    }
    if (doc.contains("recognition")) {
        const json& rec = doc.at("recognition");
        if (rec.contains("grid_count")) spec.recognition.grid_count = rec.at("grid_count");
        if (rec.contains("repeats")) spec.recognition.repeats = rec.at("repeats");
        if (rec.contains("samples_per_set")) {
            spec.recognition.samples_per_set = rec.at("samples_per_set");
        }
        if (rec.contains("source")) spec.recognition.source = rec.at("source");
        if (spec.recognition.grid_count < 2 || spec.recognition.repeats < 1 ||
            spec.recognition.samples_per_set < 1) {
            throw std::invalid_argument("recognition settings out of range");
        }
        if (spec.recognition.source != "rng" && spec.recognition.source != "direct" &&
            spec.recognition.source != "vrs") {
            throw std::invalid_argument("recognition source must be rng, direct or vrs");
        }
    }
    if (doc.contains("backend")) {
        const json& backend = doc.at("backend");
        if (backend.contains("live")) {
            const json& live = backend.at("live");
            spec.live.endpoint_url = live.value("endpoint_url", std::string{});
            spec.live.model_name = live.value("model_name", std::string{});
            spec.live.api_key_env = live.value("api_key_env", std::string{});
            spec.live.timeout = std::chrono::milliseconds(live.value("timeout_ms", 60'000));
            spec.live.max_retries = live.value("max_retries", 3);
            spec.live.backoff_base =
                std::chrono::milliseconds(live.value("backoff_base_ms", 1'000));
            spec.live.max_in_flight = live.value("max_in_flight", 8);
        }
        if (backend.contains("sim")) {
            const json& sim = backend.at("sim");
            if (sim.contains("direct_error")) {
                spec.sim.direct_kind = sim.at("direct_error").value("kind", "none");
                spec.sim.direct_value = sim.at("direct_error").value("value", 0.0);
            }
            if (sim.contains("accept_error")) {
                spec.sim.accept_kind = sim.at("accept_error").value("kind", "none");
                spec.sim.accept_value = sim.at("accept_error").value("value", 0.0);
            }
            if (sim.contains("judge")) {
                spec.sim.judge = sim.at("judge").value("kind", "concentration");
                spec.sim.judge_tol = sim.at("judge").value("tol", 0.05);
            }
            spec.sim.malformed_rate = sim.value("malformed_rate", 0.0);
        }
    }
    if (doc.contains("seed")) spec.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("parallelism")) {
        spec.parallelism = doc.at("parallelism").get<int>();
        if (spec.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    }
    return spec;
}

std::string ExperimentSpec::to_json_text() const {
    json doc;
    doc["id"] = id;
    doc["kind"] = std::string(kind_name(kind));
    doc["p_grid"] = p_grid;
    doc["samples_per_point"] = samples_per_point;
    doc["q"] = q;
    json phr = json::array();
    for (Phrasing ph : phrasings) phr.push_back(std::string(phrasing_name(ph)));
    doc["phrasings"] = phr;
    doc["with_m_instruction"] = with_m_instruction;
    doc["cot"] = cot_to_json(cot);
    json cots = json::array();
    for (const CotDirective& c : cot_grid) cots.push_back(cot_to_json(c));
    doc["cot_grid"] = cots;
    doc["recognition"] = {
        {"grid_count", recognition.grid_count},
        {"repeats", recognition.repeats},
        {"samples_per_set", recognition.samples_per_set},
        {"source", recognition.source},
    };
    doc["backend"] = {
        {"live",
         {{"endpoint_url", live.endpoint_url},
          {"model_name", live.model_name},
          {"api_key_env", live.api_key_env},
          {"timeout_ms", static_cast<int>(live.timeout.count())},
          {"max_retries", live.max_retries},
          {"backoff_base_ms", static_cast<int>(live.backoff_base.count())},
          {"max_in_flight", live.max_in_flight}}},
        {"sim",
         {{"direct_error", {{"kind", sim.direct_kind}, {"value", sim.direct_value}}},
          {"accept_error", {{"kind", sim.accept_kind}, {"value", sim.accept_value}}},
          {"judge", {{"kind", sim.judge}, {"tol", sim.judge_tol}}},
          {"malformed_rate", sim.malformed_rate}}},
    };
    doc["seed"] = seed;
    doc["parallelism"] = parallelism;
    return doc.dump(2) + "\n";
}

std::string ExperimentSpec::method_label() const {
    switch (kind) {
        case ExperimentKind::DirectSweep:
        case ExperimentKind::CotSweep:
            return "direct";
        case ExperimentKind::VrsSweep:
            return with_m_instruction ? "vrs-m" : "vrs";
        case ExperimentKind::VrsSimpleSweep:
            return with_m_instruction ? "vrs-simple-m" : "vrs-simple";
        case ExperimentKind::RecognitionMatrix:
            return "recognition";
    }
    throw std::logic_error("unreachable experiment kind");
}

std::string QueryRecord::cell_key() const {
    return variant + "|" + phrasing + "|" + format_double(p);
}

std::string QueryRecord::to_json_line() const {
    json doc;
    doc["experiment_id"] = experiment_id;
    doc["p"] = p;
    doc["phrasing"] = phrasing;
    doc["variant"] = variant;
    if (x >= 0) doc["x"] = x;
    doc["sample_index"] = sample_index;
    doc["prompt_sha256"] = prompt_sha256;
    doc["raw_response"] = raw_response;
    if (parsed_value) {
        doc["parsed_value"] = *parsed_value;
    } else {
        doc["parsed_value"] = nullptr;
    }
    doc["retry_count"] = retry_count;
    doc["timestamp"] = timestamp;
    return doc.dump();
}

QueryRecord QueryRecord::from_json_line(const std::string& line) {
    const json doc = json::parse(line);
    QueryRecord record;
    record.experiment_id = doc.at("experiment_id").get<std::string>();
    record.p = doc.at("p").get<double>();
    record.phrasing = doc.at("phrasing").get<std::string>();
    record.variant = doc.at("variant").get<std::string>();
    record.x = doc.value("x", -1);
    record.sample_index = doc.at("sample_index").get<std::int64_t>();
    record.prompt_sha256 = doc.at("prompt_sha256").get<std::string>();
    record.raw_response = doc.at("raw_response").get<std::string>();
    if (!doc.at("parsed_value").is_null()) {
        record.parsed_value = doc.at("parsed_value").get<std::string>();
    }
    record.retry_count = doc.at("retry_count").get<int>();
    record.timestamp = doc.at("timestamp").get<std::string>();
    return record;
}

std::string RunLogHeader::to_json_line() const {
    json doc;
    doc["type"] = "header";
    doc["experiment_id"] = experiment_id;
    doc["spec_sha256"] = spec_sha256;
    doc["seed"] = seed;
    doc["backend"] = backend;
    doc["created_at"] = created_at;
    return doc.dump();
}

RunLogHeader RunLogHeader::from_json_line(const std::string& line) {
    const json doc = json::parse(line);
    if (doc.value("type", "") != "header") {
        throw std::invalid_argument("run log does not start with a header line");
    }
    RunLogHeader header;
    header.experiment_id = doc.at("experiment_id").get<std::string>();
    header.spec_sha256 = doc.at("spec_sha256").get<std::string>();
    header.seed = doc.at("seed").get<std::uint64_t>();
    header.backend = doc.at("backend").get<std::string>();
    header.created_at = doc.at("created_at").get<std::string>();
    return header;
}

RunLogContents read_run_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read run log " + path.string());

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw std::runtime_error("run log " + path.string() + " is empty");

    RunLogContents contents;
    contents.header = RunLogHeader::from_json_line(lines.front());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        try {
            contents.records.push_back(QueryRecord::from_json_line(lines[i]));
        } catch (const json::exception& err) {
            if (i + 1 == lines.size()) {
                contents.truncated_corrupt_tail = true;
                break;
            }
            throw std::runtime_error("corrupt run log line " + std::to_string(i + 1) + " in " +
                                     path.string() + ": " + err.what());
        }
    }
    return contents;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

namespace {

struct CellRecords {
    // Last record per sample index; retries overwrite earlier attempts.
    std::map<std::int64_t, const QueryRecord*> by_index;
    const QueryRecord* any = nullptr;
};

std::map<std::string, CellRecords> group_by_cell(const std::vector<QueryRecord>& records) {
    std::map<std::string, CellRecords> cells;
    for (const QueryRecord& record : records) {
        CellRecords& cell = cells[record.cell_key()];
        cell.by_index[record.sample_index] = &record;
        cell.any = &record;
    }
    return cells;
}

double parse_variant_field(const std::string& variant, const std::string& field) {
    const std::string token = field + "=";
    const std::size_t at = variant.find(token);
    if (at == std::string::npos) {
        throw std::runtime_error("variant \"" + variant + "\" lacks field " + field);
    }
    return std::strtod(variant.c_str() + at + token.size(), nullptr);
}

bool starts_with(const std::string& text, std::string_view prefix) {
    return text.rfind(prefix, 0) == 0;
}

}  // namespace

SweepOutputs aggregate_records(const ExperimentSpec& spec,
                               const std::vector<QueryRecord>& records) {
    SweepOutputs outputs;
    const auto cells = group_by_cell(records);

    // Points gathered per curve key, ordered by abscissa.
    std::map<std::pair<std::string, std::string>, std::map<double, CurvePoint>> points;

    // Recognition tallies: (matrix, i, j) -> (correct, total).
    std::map<std::tuple<std::string, int, int>, std::pair<int, int>> recog;

    for (const auto& [key, cell] : cells) {
        const QueryRecord& probe = *cell.any;
        const std::string& variant = probe.variant;

        if (starts_with(variant, "recog-data:")) {
            continue;  // dataset-generation traffic, not judged cells
        }

        if (starts_with(variant, "recog:")) {
            const int i = static_cast<int>(parse_variant_field(variant, "i"));
            const int j = static_cast<int>(parse_variant_field(variant, "j"));
            const std::string matrix =
                variant.find("m=ref") != std::string::npos ? "ref" : "test";
            auto& [correct, total] = recog[{matrix, i, j}];
            total += 1;
            const QueryRecord* judged = cell.by_index.count(0) ? cell.by_index.at(0) : nullptr;
            if (judged != nullptr && judged->parsed_value) {
                const bool said_yes = *judged->parsed_value == "Yes";
                if (said_yes == (i == j)) correct += 1;
            }
            // Malformed judgments after retries count as incorrect.
            continue;
        }

        if (starts_with(variant, "direct:")) {
            std::int64_t ones = 0;
            std::int64_t have = 0;
            for (std::int64_t idx = 0; idx < spec.samples_per_point; ++idx) {
                const auto it = cell.by_index.find(idx);
                if (it == cell.by_index.end() || !it->second->parsed_value) continue;
                have += 1;
                ones += *it->second->parsed_value == "1" ? 1 : 0;
            }
            if (have != spec.samples_per_point) {
                outputs.failed_cells.push_back(key);
                continue;
            }
            points[{variant, probe.phrasing}][probe.p] = CurvePoint{
                probe.p, static_cast<double>(ones) / static_cast<double>(have), have};
            continue;
        }

        if (starts_with(variant, "vrs-simple")) {
            const double a = parse_variant_field(variant, "a");
            const std::string base = variant.substr(0, variant.find(':'));
            std::int64_t accepts = 0;
            std::int64_t have = 0;
            for (std::int64_t idx = 0; idx < spec.samples_per_point; ++idx) {
                const auto it = cell.by_index.find(idx);
                if (it == cell.by_index.end() || !it->second->parsed_value) continue;
                have += 1;
                accepts += *it->second->parsed_value == "T" ? 1 : 0;
            }
            if (have != spec.samples_per_point) {
                outputs.failed_cells.push_back(key);
                continue;
            }
            points[{base, probe.phrasing}][a] = CurvePoint{
                a, static_cast<double>(accepts) / static_cast<double>(have), have};
            AcceptanceRow row;
            row.p = probe.p;
            row.x = 1;
            row.proposed = have;
            row.accepted = accepts;
            row.phrasing = probe.phrasing;
            row.variant = variant;
            outputs.acceptance.push_back(row);
            continue;
        }

        if (variant == "vrs" || variant == "vrs-m") {
            // Walk proposals in order until the accept target is met.
            std::array<std::int64_t, 2> proposed{0, 0};
            std::array<std::int64_t, 2> accepted{0, 0};
            std::int64_t n_accepted = 0;
            for (const auto& [idx, record] : cell.by_index) {
                if (!record->parsed_value) continue;  // malformed tail or lost decision
                if (record->x != 0 && record->x != 1) continue;
                const auto xi = static_cast<std::size_t>(record->x);
                proposed[xi] += 1;
                if (*record->parsed_value == "T") {
                    accepted[xi] += 1;
                    n_accepted += 1;
                }
                if (n_accepted == spec.samples_per_point) break;
            }
            if (n_accepted != spec.samples_per_point) {
                outputs.failed_cells.push_back(key);
                continue;
            }
            points[{variant, probe.phrasing}][probe.p] = CurvePoint{
                probe.p,
                static_cast<double>(accepted[1]) / static_cast<double>(n_accepted),
                n_accepted};
            for (int x = 0; x < 2; ++x) {
                if (proposed[static_cast<std::size_t>(x)] == 0) continue;
                AcceptanceRow row;
                row.p = probe.p;
                row.x = x;
                row.proposed = proposed[static_cast<std::size_t>(x)];
                row.accepted = accepted[static_cast<std::size_t>(x)];
                row.phrasing = probe.phrasing;
                row.variant = variant;
                outputs.acceptance.push_back(row);
            }
            continue;
        }

        throw std::runtime_error("aggregation cannot classify variant \"" + variant + "\"");
    }

    for (auto& [key, by_p] : points) {
        std::vector<CurvePoint> ordered;
        ordered.reserve(by_p.size());
        for (auto& [p, point] : by_p) ordered.push_back(point);
        outputs.curves.emplace(key, CalibrationCurve(std::move(ordered)));
    }

    for (const auto& [key, tally] : recog) {
        RecognitionCell cell;
        cell.matrix = std::get<0>(key);
        cell.i = std::get<1>(key);
        cell.j = std::get<2>(key);
        cell.accuracy = tally.second > 0
                            ? static_cast<double>(tally.first) / static_cast<double>(tally.second)
                            : 0.0;
        outputs.recognition.push_back(cell);
    }
    std::sort(outputs.recognition.begin(), outputs.recognition.end(),
              [](const RecognitionCell& a, const RecognitionCell& b) {
                  return std::tie(a.matrix, a.i, a.j) < std::tie(b.matrix, b.i, b.j);
              });
    std::sort(outputs.acceptance.begin(), outputs.acceptance.end(),
              [](const AcceptanceRow& a, const AcceptanceRow& b) {
                  return std::tie(a.variant, a.phrasing, a.p, a.x) <
                         std::tie(b.variant, b.phrasing, b.p, b.x);
              });
    std::sort(outputs.failed_cells.begin(), outputs.failed_cells.end());
    return outputs;
}

std::string curves_csv(const SweepOutputs& outputs, const std::string& spec_sha256) {
    std::ostringstream out;
    out << "# spec_sha256=" << spec_sha256 << "\n";
    out << "p_true,p_hat,n,phrasing,variant\n";
    for (const auto& [key, curve] : outputs.curves) {
        for (const CurvePoint& point : curve.points()) {
            out << format_double(point.p_true) << ',' << format_double(point.p_hat) << ','
                << point.n_samples << ',' << key.second << ',' << key.first << "\n";
        }
    }
    return out.str();
}

std::string stvd_csv(const SweepOutputs& outputs, const std::string& method,
                     const std::string& spec_sha256) {
    std::ostringstream out;
    out << "# spec_sha256=" << spec_sha256 << "\n";
    out << "method,phrasing,variant,stvd\n";
    for (const auto& [key, curve] : outputs.curves) {
        if (curve.empty()) continue;
        out << method << ',' << key.second << ',' << key.first << ','
            << format_double(stvd(curve)) << "\n";
    }
    return out.str();
}

std::string acceptance_csv(const SweepOutputs& outputs, const std::string& spec_sha256) {
    std::ostringstream out;
    out << "# spec_sha256=" << spec_sha256 << "\n";
    out << "p,x,proposed,accepted,phrasing,variant\n";
    for (const AcceptanceRow& row : outputs.acceptance) {
        out << format_double(row.p) << ',' << row.x << ',' << row.proposed << ','
            << row.accepted << ',' << row.phrasing << ',' << row.variant << "\n";
    }
    return out.str();
}

std::string recognition_csv(const SweepOutputs& outputs, const std::string& spec_sha256) {
    std::ostringstream out;
    out << "# spec_sha256=" << spec_sha256 << "\n";
    out << "i,j,accuracy,matrix\n";
    for (const RecognitionCell& cell : outputs.recognition) {
        out << cell.i << ',' << cell.j << ',' << format_double(cell.accuracy) << ','
            << cell.matrix << "\n";
    }
    return out.str();
}

}  // namespace vrs
