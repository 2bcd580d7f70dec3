#include "vrs/runner.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "vrs/engine.hpp"
#include "vrs/replay.hpp"
#include "vrs/rng.hpp"
#include "vrs/sha256.hpp"
#include "vrs/util.hpp"

namespace vrs {

namespace {

namespace fs = std::filesystem;

constexpr const char* kRecordsFile = "records.jsonl";
constexpr const char* kSpecFile = "spec.json";
constexpr const char* kLockFile = "lock";

std::uint64_t string_seed(const std::string& text) {
    // First 16 hex digits of the sha256, as a platform-stable hash.
    const std::string hex = sha256_hex(text).substr(0, 16);
    return std::strtoull(hex.c_str(), nullptr, 16);
}

// ---------------------------------------------------------------------------
// Run-directory lock. A stale lock left by a killed process (the PID is
// gone) is stolen; a live PID refuses the run.
// ---------------------------------------------------------------------------

class RunLock {
public:
    explicit RunLock(fs::path path) : path_(std::move(path)) {
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::FILE* file = std::fopen(path_.c_str(), "wx");
            if (file != nullptr) {
                std::fprintf(file, "%d\n", static_cast<int>(::getpid()));
                std::fclose(file);
                held_ = true;
                return;
            }
            const std::string contents = fs::exists(path_) ? read_text_file(path_) : "";
            const int pid = std::atoi(contents.c_str());
            if (pid > 0 && fs::exists("/proc/" + std::to_string(pid))) {
                throw RunnerLocked("run directory is locked by live pid " +
                                   std::to_string(pid));
            }
            std::error_code ec;
            fs::remove(path_, ec);  // stale lock from a dead process
        }
        throw RunnerLocked("could not acquire run lock at " + path_.string());
    }

    ~RunLock() {
        if (held_) {
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }

    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
    bool held_ = false;
};

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

struct Cell {
    std::string variant;
    Phrasing phrasing = Phrasing::P1;
    double p = 0.0;
    CotDirective cot = CotDirective::auto_mode();
    double a = -1.0;  // vrs-simple target acceptance
    int rec_i = -1;
    int rec_j = -1;
    int rec_repeat = -1;
    bool rec_ref = false;
    bool is_data_cell = false;

    std::string key() const {
        return variant + "|" + std::string(phrasing_name(phrasing)) + "|" + format_double(p);
    }
};

// Recognition hypothesis grid: grid_count equally spaced values on [0, 1].
std::vector<double> recognition_grid(int count) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        grid.push_back(static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return grid;
}

std::string recog_variant(bool ref, int i, int j, int repeat) {
    return "recog:m=" + std::string(ref ? "ref" : "test") + ";i=" + std::to_string(i) +
           ";j=" + std::to_string(j) + ";r=" + std::to_string(repeat);
}

std::string recog_data_variant(int i, int repeat) {
    return "recog-data:m=test;i=" + std::to_string(i) + ";r=" + std::to_string(repeat);
}

// Phase 1 cells must be complete before phase 2 starts (recognition
// judge cells consume phase-1 datasets).
struct CellPlan {
    std::vector<Cell> phase1;
    std::vector<Cell> phase2;

    std::size_t total() const { return phase1.size() + phase2.size(); }
};

CellPlan enumerate_cells(const ExperimentSpec& spec) {
    CellPlan plan;
    switch (spec.kind) {
        case ExperimentKind::DirectSweep: {
            for (Phrasing ph : spec.phrasings) {
                for (double p : spec.p_grid) {
                    Cell cell;
                    cell.variant = "direct:cot=" + spec.cot.tag();
                    cell.phrasing = ph;
                    cell.p = p;
                    cell.cot = spec.cot;
                    plan.phase2.push_back(cell);
                }
            }
            break;
        }
        case ExperimentKind::CotSweep: {
            for (const CotDirective& cot : spec.cot_grid) {
                for (Phrasing ph : spec.phrasings) {
                    for (double p : spec.p_grid) {
                        Cell cell;
                        cell.variant = "direct:cot=" + cot.tag();
                        cell.phrasing = ph;
                        cell.p = p;
                        cell.cot = cot;
                        plan.phase2.push_back(cell);
                    }
                }
            }
            break;
        }
        case ExperimentKind::VrsSweep: {
            for (Phrasing ph : spec.phrasings) {
                for (double p : spec.p_grid) {
                    Cell cell;
                    cell.variant = spec.with_m_instruction ? "vrs-m" : "vrs";
                    cell.phrasing = ph;
                    cell.p = p;
                    plan.phase2.push_back(cell);
                }
            }
            break;
        }
        case ExperimentKind::VrsSimpleSweep: {
            const std::vector<double> a_grid = spec.p_grid;
            for (Phrasing ph : spec.phrasings) {
                for (double a : a_grid) {
                    Cell cell;
                    const std::string base =
                        spec.with_m_instruction ? "vrs-simple-m" : "vrs-simple";
                    cell.variant = base + ":a=" + format_double(a);
                    cell.phrasing = ph;
                    cell.a = a;
                    cell.p =
                        invert_acceptance_for_one(Probability(a), Probability(spec.q)).value();
                    plan.phase2.push_back(cell);
                }
            }
            break;
        }
        case ExperimentKind::RecognitionMatrix: {
            const std::vector<double> grid = recognition_grid(spec.recognition.grid_count);
            if (spec.recognition.source != "rng") {
                for (int r = 0; r < spec.recognition.repeats; ++r) {
                    for (int i = 0; i < spec.recognition.grid_count; ++i) {
                        Cell cell;
                        cell.variant = recog_data_variant(i, r);
                        cell.phrasing = Phrasing::P1;
                        cell.p = grid[static_cast<std::size_t>(i)];
                        cell.rec_i = i;
                        cell.rec_repeat = r;
                        cell.is_data_cell = true;
                        plan.phase1.push_back(cell);
                    }
                }
            }
            for (const bool ref : {true, false}) {
                for (int r = 0; r < spec.recognition.repeats; ++r) {
                    for (int i = 0; i < spec.recognition.grid_count; ++i) {
                        for (int j = 0; j < spec.recognition.grid_count; ++j) {
                            Cell cell;
                            cell.variant = recog_variant(ref, i, j, r);
                            cell.phrasing = Phrasing::P1;
                            cell.p = grid[static_cast<std::size_t>(j)];
                            cell.rec_i = i;
                            cell.rec_j = j;
                            cell.rec_repeat = r;
                            cell.rec_ref = ref;
                            plan.phase2.push_back(cell);
                        }
                    }
                }
            }
            break;
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Cell execution
// ---------------------------------------------------------------------------

using PriorIndex = std::map<std::string, std::map<std::int64_t, QueryRecord>>;

struct CellResult {
    std::vector<QueryRecord> records;
    bool failed = false;
    std::string failure;
};

class CellExecutor {
public:
    CellExecutor(const ExperimentSpec& spec, TextBackend& backend,
                 const PromptTemplates& templates, std::uint64_t run_seed, int throttle_ms,
                 const PriorIndex& prior)
        : spec_(spec),
          backend_(backend),
          templates_(templates),
          run_seed_(run_seed),
          throttle_ms_(throttle_ms),
          prior_(prior) {}

    /// Samples per test-matrix dataset, filled by phase-1 cells (or on
    /// resume, recovered from the log before phase 2 runs).
    std::map<std::pair<int, int>, std::vector<std::uint8_t>> test_datasets;

    bool cell_complete(const Cell& cell) const {
        const auto prior_cell = prior_.find(cell.key());
        const auto* by_index =
            prior_cell == prior_.end() ? nullptr : &prior_cell->second;
        const auto parsed_at = [&](std::int64_t idx) -> const QueryRecord* {
            if (by_index == nullptr) return nullptr;
            const auto it = by_index->find(idx);
            if (it == by_index->end() || !it->second.parsed_value) return nullptr;
            return &it->second;
        };

        if (cell.variant.rfind("recog:", 0) == 0) {
            if (by_index == nullptr) return false;
            const auto it = by_index->find(0);
            if (it == by_index->end()) return false;
            // Judged, or judged malformed through the whole retry budget.
            return it->second.parsed_value.has_value() ||
                   it->second.retry_count >= kOracleRetryBudget - 1;
        }
        if (cell.variant == "vrs" || cell.variant == "vrs-m") {
            if (by_index == nullptr) return false;
            std::int64_t accepted = 0;
            for (const auto& [idx, record] : *by_index) {
                if (!record.parsed_value) return false;  // undecided proposal
                if (*record.parsed_value == "T") accepted += 1;
                if (accepted == spec_.samples_per_point) return true;
            }
            return false;
        }
        // Fixed-size cells: direct, cot, vrs-simple, recog-data.
        for (std::int64_t idx = 0; idx < expected_samples(cell); ++idx) {
            if (parsed_at(idx) == nullptr) return false;
        }
        return true;
    }

    CellResult run_cell(const Cell& cell) {
        if (cell.variant.rfind("direct:", 0) == 0) return run_fixed(cell, /*binary=*/true);
        if (cell.variant.rfind("vrs-simple", 0) == 0) return run_fixed(cell, /*binary=*/false);
        if (cell.variant == "vrs" || cell.variant == "vrs-m") return run_vrs(cell);
        if (cell.variant.rfind("recog-data:", 0) == 0) return run_recog_data(cell);
        if (cell.variant.rfind("recog:", 0) == 0) return run_recog_judge(cell);
        throw std::logic_error("no executor for cell variant " + cell.variant);
    }

    /// Rebuild phase-1 datasets for cells that are being skipped on
    /// resume (their samples live only in the log).
    void recover_dataset(const Cell& cell) {
        const auto prior_cell = prior_.find(cell.key());
        if (prior_cell == prior_.end()) return;
        std::vector<std::uint8_t>& samples = test_datasets[{cell.rec_repeat, cell.rec_i}];
        samples.clear();
        if (spec_.recognition.source == "direct") {
            for (std::int64_t idx = 0; idx < spec_.recognition.samples_per_set; ++idx) {
                const auto it = prior_cell->second.find(idx);
                if (it == prior_cell->second.end() || !it->second.parsed_value) return;
                samples.push_back(*it->second.parsed_value == "1" ? 1 : 0);
            }
        } else {  // vrs
            for (const auto& [idx, record] : prior_cell->second) {
                if (!record.parsed_value) return;
                if (*record.parsed_value == "T") {
                    samples.push_back(static_cast<std::uint8_t>(record.x));
                }
                if (static_cast<int>(samples.size()) == spec_.recognition.samples_per_set) {
                    return;
                }
            }
        }
    }

private:
    std::int64_t expected_samples(const Cell& cell) const {
        if (cell.is_data_cell) return spec_.recognition.samples_per_set;
        return spec_.samples_per_point;
    }

    std::uint64_t query_seed(const Cell& cell, std::int64_t index) const {
        return mix_seed({run_seed_, string_seed(cell.key()),
                         static_cast<std::uint64_t>(index)});
    }

    const QueryRecord* prior_parsed(const Cell& cell, std::int64_t index) const {
        const auto prior_cell = prior_.find(cell.key());
        if (prior_cell == prior_.end()) return nullptr;
        const auto it = prior_cell->second.find(index);
        if (it == prior_cell->second.end() || !it->second.parsed_value) return nullptr;
        return &it->second;
    }

    QueryRecord base_record(const Cell& cell, std::int64_t index) const {
        QueryRecord record;
        record.experiment_id = spec_.id;
        record.p = cell.p;
        record.phrasing = std::string(phrasing_name(cell.phrasing));
        record.variant = cell.variant;
        record.sample_index = index;
        return record;
    }

    std::string call_backend(PromptBundle& bundle, const Cell& cell, std::int64_t index,
                             int attempt) {
        bundle.meta.query_seed = query_seed(cell, index);
        bundle.meta.attempt = attempt;
        if (throttle_ms_ > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(throttle_ms_));
        }
        return backend_.complete(bundle);
    }

    /// One logical sample with the malformed-retry budget. Returns the
    /// parsed value, or nullopt after exhausting retries. Appends one
    /// record per backend call.
    template <typename Render, typename Parse>
    std::optional<std::string> issue(const Cell& cell, std::int64_t index, Render render,
                                     Parse parse, std::vector<QueryRecord>& out) {
        for (int attempt = 0; attempt < kOracleRetryBudget; ++attempt) {
            PromptBundle bundle = render();
            QueryRecord record = base_record(cell, index);
            if (bundle.meta.x == 0 || bundle.meta.x == 1) record.x = bundle.meta.x;
            record.retry_count = attempt;
            record.prompt_sha256 = sha256_hex(bundle.text);
            record.raw_response = call_backend(bundle, cell, index, attempt);
            record.timestamp = iso8601_now();
            try {
                record.parsed_value = parse(record.raw_response);
                out.push_back(record);
                return record.parsed_value;
            } catch (const MalformedResponse&) {
                out.push_back(record);
            }
        }
        return std::nullopt;
    }

    // Fixed-count cells: direct sampling (binary) and vrs-simple
    // acceptance probes (T/F on a pinned x = 1).
    CellResult run_fixed(const Cell& cell, bool binary) {
        CellResult result;
        const std::int64_t n = expected_samples(cell);
        for (std::int64_t idx = 0; idx < n; ++idx) {
            if (prior_parsed(cell, idx) != nullptr) continue;
            const auto render = [&]() -> PromptBundle {
                if (binary) {
                    return render_direct_prompt(Probability(cell.p), cell.phrasing, cell.cot,
                                                templates_);
                }
                return render_vrs_prompt(
                    ProposalPair(cell.p, spec_.q), 1,
                    spec_.with_m_instruction ? VrsVariant::WithMInstruction
                                             : VrsVariant::Standard,
                    cell.phrasing, templates_);
            };
            const auto parse = [&](const std::string& text) -> std::string {
                if (binary) return parse_binary_sample(text) == 1 ? "1" : "0";
                return parse_accept_decision(text) == Decision::Accept ? "T" : "F";
            };
            if (!issue(cell, idx, render, parse, result.records)) {
                result.failed = true;
                result.failure = "retry budget exhausted at sample " + std::to_string(idx);
                return result;
            }
        }
        return result;
    }

    // Oracle adapter: accept/reject decisions come from the backend,
    // prior log entries are replayed without new calls.
    class LlmOracle final : public DecisionOracle {
    public:
        LlmOracle(CellExecutor& owner, const Cell& cell, const ProposalPair& pair,
                  std::vector<QueryRecord>& out)
            : owner_(owner), cell_(cell), pair_(pair), out_(out) {}

        bool decide(int x, std::uint64_t proposal_index, int attempt) override {
            const auto index = static_cast<std::int64_t>(proposal_index);
            if (const QueryRecord* prior = owner_.prior_parsed(cell_, index)) {
                if (prior->x != x) {
                    throw Error("logged proposal " + std::to_string(index) + " has x=" +
                                std::to_string(prior->x) + " but the seeded draw gives " +
                                std::to_string(x) + "; run log does not match this seed");
                }
                return *prior->parsed_value == "T";
            }
            PromptBundle bundle = render_vrs_prompt(
                pair_, x,
                cell_.variant == "vrs-m" ? VrsVariant::WithMInstruction : VrsVariant::Standard,
                cell_.phrasing, owner_.templates_);
            QueryRecord record = owner_.base_record(cell_, index);
            record.x = x;
            record.retry_count = attempt;
            record.prompt_sha256 = sha256_hex(bundle.text);
            record.raw_response = owner_.call_backend(bundle, cell_, index, attempt);
            record.timestamp = iso8601_now();
            try {
                const Decision decision = parse_accept_decision(record.raw_response);
                record.parsed_value = decision == Decision::Accept ? "T" : "F";
                out_.push_back(record);
                return decision == Decision::Accept;
            } catch (const MalformedResponse&) {
                out_.push_back(record);
                throw;
            }
        }

    private:
        CellExecutor& owner_;
        const Cell& cell_;
        ProposalPair pair_;
        std::vector<QueryRecord>& out_;
    };

    CellResult run_vrs(const Cell& cell) {
        CellResult result;
        const ProposalPair pair(cell.p, spec_.q);
        LlmOracle oracle(*this, cell, pair, result.records);
        const std::uint64_t engine_seed = mix_seed({run_seed_, string_seed(cell.key())});
        try {
            (void)run_rejection(pair, spec_.samples_per_point, oracle, engine_seed,
                                default_max_proposals(pair, spec_.samples_per_point));
        } catch (const BudgetExhausted& err) {
            result.failed = true;
            result.failure = err.what();
        } catch (const OracleFailure& err) {
            result.failed = true;
            result.failure = err.what();
        }
        return result;
    }

    CellResult run_recog_data(const Cell& cell) {
        CellResult result;
        std::vector<std::uint8_t> samples;
        if (spec_.recognition.source == "direct") {
            const std::int64_t n = spec_.recognition.samples_per_set;
            for (std::int64_t idx = 0; idx < n; ++idx) {
                if (const QueryRecord* prior = prior_parsed(cell, idx)) {
                    samples.push_back(*prior->parsed_value == "1" ? 1 : 0);
                    continue;
                }
                const auto render = [&] {
                    return render_direct_prompt(Probability(cell.p), Phrasing::P1, spec_.cot,
                                                templates_);
                };
                const auto parse = [&](const std::string& text) -> std::string {
                    return parse_binary_sample(text) == 1 ? "1" : "0";
                };
                const auto value = issue(cell, idx, render, parse, result.records);
                if (!value) {
                    result.failed = true;
                    result.failure = "retry budget exhausted generating dataset";
                    return result;
                }
                samples.push_back(*value == "1" ? 1 : 0);
            }
        } else {  // vrs-sampled dataset
            const ProposalPair pair(cell.p, spec_.q);
            LlmOracle oracle(*this, cell, pair, result.records);
            const std::uint64_t engine_seed = mix_seed({run_seed_, string_seed(cell.key())});
            try {
                const RunResult run =
                    run_rejection(pair, spec_.recognition.samples_per_set, oracle, engine_seed,
                                  default_max_proposals(pair,
                                                        spec_.recognition.samples_per_set));
                samples = run.samples;
            } catch (const Error& err) {
                result.failed = true;
                result.failure = err.what();
                return result;
            }
        }
        std::lock_guard<std::mutex> lock(datasets_mutex_);
        test_datasets[{cell.rec_repeat, cell.rec_i}] = std::move(samples);
        return result;
    }

    std::vector<std::uint8_t> reference_dataset(int repeat, int i, bool ref_matrix) const {
        const std::vector<double> grid = recognition_grid(spec_.recognition.grid_count);
        const std::uint64_t stream = ref_matrix ? 0x726566ULL : 0x74657374ULL;  // ref / test
        Rng rng(mix_seed({run_seed_, stream, static_cast<std::uint64_t>(repeat),
                          static_cast<std::uint64_t>(i)}));
        std::vector<std::uint8_t> samples;
        samples.reserve(static_cast<std::size_t>(spec_.recognition.samples_per_set));
        const double p = grid[static_cast<std::size_t>(i)];
        for (int k = 0; k < spec_.recognition.samples_per_set; ++k) {
            samples.push_back(rng.next_bernoulli(p) ? 1 : 0);
        }
        return samples;
    }

    CellResult run_recog_judge(const Cell& cell) {
        CellResult result;
        if (prior_parsed(cell, 0) != nullptr) return result;

        std::vector<std::uint8_t> samples;
        if (cell.rec_ref || spec_.recognition.source == "rng") {
            samples = reference_dataset(cell.rec_repeat, cell.rec_i, cell.rec_ref);
        } else {
            std::lock_guard<std::mutex> lock(datasets_mutex_);
            const auto it = test_datasets.find({cell.rec_repeat, cell.rec_i});
            if (it == test_datasets.end() || it->second.empty()) {
                result.failed = true;
                result.failure = "missing test dataset for i=" + std::to_string(cell.rec_i);
                return result;
            }
            samples = it->second;
        }

        const auto render = [&] {
            return render_recognition_prompt(samples, Probability(cell.p), templates_);
        };
        const auto parse = [&](const std::string& text) -> std::string {
            return parse_yes_no(text) == YesNo::Yes ? "Yes" : "No";
        };
        // Malformed judgments after the retry budget are kept in the log
        // and scored as incorrect; the cell itself is not a failure.
        (void)issue(cell, 0, render, parse, result.records);
        return result;
    }

    const ExperimentSpec& spec_;
    TextBackend& backend_;
    const PromptTemplates& templates_;
    std::uint64_t run_seed_;
    int throttle_ms_;
    const PriorIndex& prior_;
    std::mutex datasets_mutex_;
};

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

std::shared_ptr<TextBackend> build_backend(const ExperimentSpec& spec, BackendKind kind,
                                           std::uint64_t seed, const RunnerOptions& options) {
    std::shared_ptr<TextBackend> inner;
    switch (kind) {
        case BackendKind::Live:
            if (spec.live.endpoint_url.empty() || spec.live.model_name.empty()) {
                throw std::invalid_argument(
                    "live backend requires endpoint_url and model_name in the spec");
            }
            inner = std::make_shared<HttpBackend>(spec.live);
            break;
        case BackendKind::Simulated:
            inner = std::make_shared<SimulatedBackend>(spec.sim.materialize(seed));
            break;
        case BackendKind::Replay: {
            if (!options.replay_store) {
                throw std::invalid_argument("replay backend requires a cache store path");
            }
            const std::string label = spec.live.model_name.empty() ? std::string("simulated")
                                                                   : spec.live.model_name;
            return std::make_shared<ReplayCache>(CacheMode::Replay, *options.replay_store,
                                                 nullptr, label);
        }
    }
    if (options.record_store) {
        return std::make_shared<ReplayCache>(CacheMode::Record, *options.record_store, inner);
    }
    return inner;
}

struct LogWriter {
    explicit LogWriter(const fs::path& path)
        : out(path, std::ios::binary | std::ios::app) {
        if (!out) throw std::runtime_error("cannot open run log " + path.string());
    }

    void line(const std::string& text) {
        out << text << '\n';
        out.flush();
    }

    std::ofstream out;
};

RunSummary execute(const ExperimentSpec& spec, const fs::path& out_dir,
                   const std::string& spec_sha, std::uint64_t seed, BackendKind backend_kind,
                   const RunnerOptions& options, const PriorIndex& prior) {
    RunSummary summary;
    summary.run_dir = out_dir;
    summary.spec_sha256 = spec_sha;

    const PromptTemplates templates = options.templates_dir
                                          ? PromptTemplates::load_dir(*options.templates_dir)
                                          : PromptTemplates::defaults();
    const std::shared_ptr<TextBackend> backend =
        build_backend(spec, backend_kind, seed, options);

    CellExecutor executor(spec, *backend, templates, seed, options.throttle_ms, prior);
    CellPlan plan = enumerate_cells(spec);
    summary.cells_total = static_cast<int>(plan.total());

    int parallelism = options.parallelism_override.value_or(spec.parallelism);
    // Recognition cells can render byte-identical prompts across cells
    // (degenerate datasets repeat), so replay-store occurrence indices
    // must not depend on worker scheduling.
    const bool store_active = options.record_store.has_value() ||
                              backend_kind == BackendKind::Replay;
    if (spec.kind == ExperimentKind::RecognitionMatrix && store_active) {
        parallelism = 1;
    }
    LogWriter log(out_dir / kRecordsFile);

    const auto run_phase = [&](std::vector<Cell>& cells) {
        // Skip cells already complete in the log; recover their
        // side-effects (phase-1 datasets) without backend calls.
        std::vector<Cell> todo;
        for (Cell& cell : cells) {
            if (executor.cell_complete(cell)) {
                summary.cells_skipped += 1;
                if (cell.is_data_cell) executor.recover_dataset(cell);
            } else {
                todo.push_back(cell);
            }
        }
        if (todo.empty()) return;

        std::vector<std::optional<CellResult>> done(todo.size());
        std::atomic<std::size_t> next{0};
        std::mutex mutex;
        std::condition_variable ready;
        std::exception_ptr failure;

        const auto worker = [&] {
            while (true) {
                const std::size_t index = next.fetch_add(1);
                if (index >= todo.size()) return;
                CellResult result;
                try {
                    result = executor.run_cell(todo[index]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(todo.size());
                    ready.notify_all();
                    return;
                }
                std::lock_guard<std::mutex> lock(mutex);
                done[index] = std::move(result);
                ready.notify_all();
            }
        };

        const int n_workers =
            std::max(1, std::min<int>(parallelism, static_cast<int>(todo.size())));
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) workers.emplace_back(worker);

        // Commit results in cell order regardless of completion order,
        // so the log is identical for any parallelism level.
        {
            std::unique_lock<std::mutex> lock(mutex);
            for (std::size_t index = 0; index < todo.size(); ++index) {
                ready.wait(lock, [&] { return done[index].has_value() || failure; });
                if (failure) break;
                for (const QueryRecord& record : done[index]->records) {
                    log.line(record.to_json_line());
                }
                if (done[index]->failed) {
                    summary.cells_failed += 1;
                    std::cerr << "cell " << todo[index].key() << " failed: "
                              << done[index]->failure << "\n";
                }
            }
        }
        for (std::thread& thread : workers) thread.join();
        if (failure) std::rethrow_exception(failure);
    };

    run_phase(plan.phase1);
    run_phase(plan.phase2);

    // Aggregate from the durable log, not from in-memory state: the
    // report command must reproduce these outputs byte for byte.
    const RunLogContents contents = read_run_log(out_dir / kRecordsFile);
    summary.outputs = aggregate_records(spec, contents.records);

    const std::string method = spec.method_label();
    write_text_file(out_dir / "curves.csv", curves_csv(summary.outputs, spec_sha));
    write_text_file(out_dir / "stvd.csv", stvd_csv(summary.outputs, method, spec_sha));
    if (spec.kind == ExperimentKind::VrsSweep || spec.kind == ExperimentKind::VrsSimpleSweep) {
        write_text_file(out_dir / "acceptance.csv",
                        acceptance_csv(summary.outputs, spec_sha));
    }
    if (spec.kind == ExperimentKind::RecognitionMatrix) {
        write_text_file(out_dir / "recognition.csv",
                        recognition_csv(summary.outputs, spec_sha));
    }
    return summary;
}

PriorIndex index_records(const std::vector<QueryRecord>& records) {
    PriorIndex prior;
    for (const QueryRecord& record : records) {
        prior[record.cell_key()][record.sample_index] = record;
    }
    return prior;
}

}  // namespace

std::int64_t estimate_query_count(const ExperimentSpec& spec) {
    const auto cells = static_cast<std::int64_t>(spec.p_grid.size()) *
                       static_cast<std::int64_t>(spec.phrasings.size());
    switch (spec.kind) {
        case ExperimentKind::DirectSweep:
            return cells * spec.samples_per_point;
        case ExperimentKind::CotSweep:
            return cells * spec.samples_per_point *
                   static_cast<std::int64_t>(spec.cot_grid.size());
        case ExperimentKind::VrsSweep:
            return 2 * cells * spec.samples_per_point;  // expected proposals <= M <= 2 at q=1/2
        case ExperimentKind::VrsSimpleSweep:
            return cells * spec.samples_per_point;
        case ExperimentKind::RecognitionMatrix: {
            const std::int64_t g = spec.recognition.grid_count;
            const std::int64_t judges = 2 * g * g * spec.recognition.repeats;
            const std::int64_t data =
                spec.recognition.source == "rng"
                    ? 0
                    : 2 * g * spec.recognition.repeats * spec.recognition.samples_per_set;
            return judges + data;
        }
    }
    throw std::logic_error("unreachable experiment kind");
}

RunSummary Runner::run(const ExperimentSpec& spec, const std::string& spec_text,
                       const fs::path& out_dir, const RunnerOptions& options) {
    fs::create_directories(out_dir);
    if (fs::exists(out_dir / kRecordsFile)) {
        throw std::invalid_argument("run directory already contains " +
                                    std::string(kRecordsFile) + "; use resume");
    }
    RunLock lock(out_dir / kLockFile);

    const std::string spec_sha = sha256_hex(spec_text);
    write_text_file(out_dir / kSpecFile, spec_text);

    const std::uint64_t seed = options.seed_override.value_or(spec.seed);
    const BackendKind backend_kind = options.backend.value_or(BackendKind::Simulated);

    RunLogHeader header;
    header.experiment_id = spec.id;
    header.spec_sha256 = spec_sha;
    header.seed = seed;
    header.backend = std::string(backend_kind_name(backend_kind));
    header.created_at = iso8601_now();
    {
        LogWriter log(out_dir / kRecordsFile);
        log.line(header.to_json_line());
    }

    const PriorIndex prior;  // fresh run: nothing to reuse
    return execute(spec, out_dir, spec_sha, seed, backend_kind, options, prior);
}

RunSummary Runner::resume(const fs::path& out_dir, const RunnerOptions& options) {
    const std::string spec_text = read_text_file(out_dir / kSpecFile);
    const ExperimentSpec spec = ExperimentSpec::from_json_text(spec_text);
    const std::string spec_sha = sha256_hex(spec_text);

    RunLock lock(out_dir / kLockFile);

    RunLogContents contents = read_run_log(out_dir / kRecordsFile);
    if (contents.header.spec_sha256 != spec_sha) {
        throw SpecHashMismatch("spec.json sha256 " + spec_sha +
                               " does not match run log header " +
                               contents.header.spec_sha256);
    }
    if (contents.truncated_corrupt_tail) {
        std::cerr << "warning: dropping corrupt trailing log line (interrupted write)\n";
        std::string rebuilt = contents.header.to_json_line() + "\n";
        for (const QueryRecord& record : contents.records) {
            rebuilt += record.to_json_line() + "\n";
        }
        write_text_file(out_dir / kRecordsFile, rebuilt);
    }

    const BackendKind backend_kind =
        options.backend.value_or(backend_kind_from_name(contents.header.backend));
    const PriorIndex prior = index_records(contents.records);
    return execute(spec, out_dir, spec_sha, contents.header.seed, backend_kind, options, prior);
}

}  // namespace vrs
