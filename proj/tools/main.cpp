#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vrs/bernoulli.hpp"
#include "vrs/bias.hpp"
#include "vrs/errors.hpp"
#include "vrs/report.hpp"
#include "vrs/rng.hpp"
#include "vrs/runner.hpp"
#include "vrs/sha256.hpp"
#include "vrs/util.hpp"

namespace fs = std::filesystem;
using namespace vrs;

namespace {

// Exit codes: 0 ok, 2 configuration error, 3 partial completion or
// runtime failure, 4 verification failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;
constexpr int kExitVerification = 4;

constexpr std::int64_t kLiveCostThreshold = 1'000;

struct RunFlags {
    std::string spec_path;
    std::string out_dir;
    std::string backend = "sim";
    std::string record_store;
    std::string cache_store;
    std::string templates_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallel;
    int throttle_ms = 0;
    bool i_understand_cost = false;
};

RunnerOptions to_options(const RunFlags& flags) {
    RunnerOptions options;
    options.backend = backend_kind_from_name(flags.backend);
    if (!flags.record_store.empty()) options.record_store = fs::path(flags.record_store);
    if (!flags.cache_store.empty()) options.replay_store = fs::path(flags.cache_store);
    options.seed_override = flags.seed;
    options.parallelism_override = flags.parallel;
    options.throttle_ms = flags.throttle_ms;
    if (!flags.templates_dir.empty()) options.templates_dir = fs::path(flags.templates_dir);
    return options;
}

int finish_run(const RunSummary& summary) {
    std::cout << "run " << summary.run_dir.string() << ": " << summary.cells_total
              << " cells, " << summary.cells_skipped << " reused, " << summary.cells_failed
              << " failed\n";
    if (!summary.complete()) {
        for (const std::string& cell : summary.outputs.failed_cells) {
            std::cerr << "incomplete cell: " << cell << "\n";
        }
        return kExitPartial;
    }
    return kExitOk;
}

int do_run(const RunFlags& flags) {
    const std::string spec_text = read_text_file(flags.spec_path);
    const ExperimentSpec spec = ExperimentSpec::from_json_text(spec_text);
    const RunnerOptions options = to_options(flags);

    if (options.backend == BackendKind::Live) {
        if (spec.live.api_key_env.empty() ||
            std::getenv(spec.live.api_key_env.c_str()) == nullptr) {
            std::cerr << "error: live backend needs the API key environment variable "
                      << (spec.live.api_key_env.empty() ? "(unset in spec)"
                                                        : spec.live.api_key_env)
                      << " before any network call\n";
            return kExitConfig;
        }
        const std::int64_t estimate = estimate_query_count(spec);
        if (estimate > kLiveCostThreshold && !flags.i_understand_cost) {
            std::cerr << "error: this live run issues about " << estimate
                      << " paid queries; pass --i-understand-cost to proceed\n";
            return kExitConfig;
        }
    }
    if (options.backend == BackendKind::Replay && !options.replay_store) {
        std::cerr << "error: --backend replay requires --cache\n";
        return kExitConfig;
    }

    return finish_run(Runner::run(spec, spec_text, flags.out_dir, options));
}

int do_resume(const RunFlags& flags) {
    RunnerOptions options;
    if (!flags.backend.empty()) options.backend = backend_kind_from_name(flags.backend);
    if (!flags.record_store.empty()) options.record_store = fs::path(flags.record_store);
    if (!flags.cache_store.empty()) options.replay_store = fs::path(flags.cache_store);
    options.parallelism_override = flags.parallel;
    options.throttle_ms = flags.throttle_ms;
    if (!flags.templates_dir.empty()) options.templates_dir = fs::path(flags.templates_dir);
    return finish_run(Runner::resume(flags.out_dir, options));
}

int do_report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
              bool plots, bool boxes) {
    if (run_dirs.empty()) {
        std::cerr << "error: report needs at least one --run directory\n";
        return kExitConfig;
    }
    const fs::path out = out_dir.empty() ? fs::path(run_dirs.front()) : fs::path(out_dir);

    std::map<std::pair<std::string, std::string>, CalibrationCurve> table_curves;
    std::string table_sha;

    for (const std::string& dir_text : run_dirs) {
        const fs::path dir(dir_text);
        const std::string spec_text = read_text_file(dir / "spec.json");
        const ExperimentSpec spec = ExperimentSpec::from_json_text(spec_text);
        const std::string sha = sha256_hex(spec_text);
        table_sha = table_sha.empty() ? sha : table_sha + "+" + sha;

        const RunLogContents contents = read_run_log(dir / "records.jsonl");
        const SweepOutputs outputs = aggregate_records(spec, contents.records);
        const std::string method = spec.method_label();

        write_text_file(dir / "curves.csv", curves_csv(outputs, sha));
        write_text_file(dir / "stvd.csv", stvd_csv(outputs, method, sha));
        if (spec.kind == ExperimentKind::VrsSweep ||
            spec.kind == ExperimentKind::VrsSimpleSweep) {
            write_text_file(dir / "acceptance.csv", acceptance_csv(outputs, sha));
        }
        if (spec.kind == ExperimentKind::RecognitionMatrix) {
            write_text_file(dir / "recognition.csv", recognition_csv(outputs, sha));
            const RecognitionSummary ref = summarize_recognition(outputs.recognition, "ref");
            const RecognitionSummary test = summarize_recognition(outputs.recognition, "test");
            write_text_file(dir / "recognition_summary.csv",
                            recognition_summary_csv({ref, test}, {"ref", "test"}, sha));
        }

        for (const auto& [key, curve] : outputs.curves) {
            table_curves.emplace(std::make_pair(key.first, key.second), curve);
        }

        if (plots && !outputs.curves.empty()) {
            std::map<std::string, CalibrationCurve> by_label;
            for (const auto& [key, curve] : outputs.curves) {
                by_label.emplace(key.first + "/" + key.second, curve);
            }
            std::vector<ErrorBox> box_list;
            if (boxes && spec.kind != ExperimentKind::RecognitionMatrix &&
                spec.kind != ExperimentKind::VrsSimpleSweep) {
                box_list = build_error_boxes(Probability(spec.q), spec.p_grid);
            }
            emit_calibration_plot(by_label, box_list, dir / "plots" / "calibration.svg", sha);
        }
    }

    if (!table_curves.empty()) {
        const StvdTable table = build_stvd_table(table_curves);
        write_text_file(out / "stvd_table.csv", table.to_csv(table_sha));
        write_text_file(out / "stvd_table.txt", table.to_text());
        std::cout << table.to_text();
    }
    return kExitOk;
}

std::vector<double> parse_c_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) values.push_back(std::strtod(item.c_str(), nullptr));
    }
    if (values.empty()) throw std::invalid_argument("empty --c-list");
    return values;
}

// Theory gate: exact accepted laws vs the worst-case bounds, plus the
// bound-level crossover equivalence, over a deterministic grid search
// and random feasible biases.
int do_verify_bounds(double q, const std::string& c_list_text, double grid_step,
                     std::int64_t samples, std::int64_t search_steps, std::uint64_t seed) {
    if (q <= 0.0 || q >= 1.0 || grid_step <= 0.0 || grid_step >= 1.0) {
        std::cerr << "error: --q and --grid-step must lie strictly inside (0, 1)\n";
        return kExitConfig;
    }
    const std::vector<double> c_list = parse_c_list(c_list_text);

    std::vector<double> p_grid;
    for (int i = 1; i * grid_step < 1.0 - grid_step / 2.0; ++i) {
        p_grid.push_back(i * grid_step);
    }

    Rng rng(seed);
    std::int64_t violations = 0;
    std::cout << "p,q,c,mode,tv_exact_max,bound,threshold,vrs_beats_direct\n";

    for (double p : p_grid) {
        // Skip p = q (no biased event; the crossover is undefined there),
        // tolerating grid rounding.
        if (std::abs(p - q) < grid_step * 1e-6) continue;
        const ProposalPair pair(p, q);
        const double m = m_constant(pair);
        const int xhat = *nontrivial_event(pair);
        const Probability q_hat(pair.proposal().mass(xhat));
        const double threshold = crossover_threshold(q_hat, m);

        for (double c : c_list) {
            for (BiasMode mode : {BiasMode::FullBiased, BiasMode::HalfBiased}) {
                const char* mode_name = mode == BiasMode::FullBiased ? "full" : "half";
                const bool vacuous = mode == BiasMode::FullBiased
                                         ? m * c >= 1.0
                                         : q_hat.value() * m * c >= 1.0;

                double tv_max = worst_case_tv_search(pair, mode, c, search_steps);
                for (std::int64_t s = 0; s < samples; ++s) {
                    const BiasFunction bias = sample_feasible_bias(pair, mode, c, rng);
                    tv_max = std::max(tv_max,
                                      exact_accepted_law(pair, bias, mode).tv_exact);
                }

                std::string bound_text = "vacuous";
                std::string beats_text;
                if (!vacuous) {
                    const double bound = mode == BiasMode::FullBiased
                                             ? full_bias_bound(m, c)
                                             : half_bias_bound(q_hat, m, c);
                    bound_text = format_double(bound);
                    if (tv_max > bound + 1e-12) {
                        violations += 1;
                        std::cerr << "violation: p=" << p << " c=" << c << " mode="
                                  << mode_name << " tv=" << tv_max << " bound=" << bound
                                  << "\n";
                    }
                    if (mode == BiasMode::HalfBiased) {
                        const bool bound_wins = bound < c;
                        const bool below_threshold = c < threshold;
                        beats_text = below_threshold ? "yes" : "no";
                        if (bound_wins != below_threshold) {
                            violations += 1;
                            std::cerr << "crossover mismatch: p=" << p << " c=" << c
                                      << " bound=" << bound << " threshold=" << threshold
                                      << "\n";
                        }
                    }
                }

                std::cout << format_double(p) << ',' << format_double(q) << ','
                          << format_double(c) << ',' << mode_name << ','
                          << format_double(tv_max) << ',' << bound_text << ','
                          << (mode == BiasMode::HalfBiased ? format_double(threshold)
                                                           : std::string{})
                          << ',' << beats_text << "\n";
            }
        }
    }

    if (violations > 0) {
        std::cerr << violations << " violating cells\n";
        return kExitVerification;
    }
    return kExitOk;
}

int do_gen_prompts(const std::string& kind, double p, double q, int x,
                   const std::string& phrasing_text, const std::string& cot_text, bool with_m,
                   double p_hyp, int n_samples, std::uint64_t seed,
                   const std::string& templates_dir) {
    const PromptTemplates templates = templates_dir.empty()
                                          ? PromptTemplates::defaults()
                                          : PromptTemplates::load_dir(templates_dir);
    const Phrasing phrasing = phrasing_from_name(phrasing_text);

    if (kind == "direct") {
        CotDirective cot = CotDirective::auto_mode();
        if (cot_text == "none") {
            cot = CotDirective::no_reasoning();
        } else if (cot_text != "auto") {
            cot = CotDirective::exact_words(std::atoi(cot_text.c_str()));
        }
        std::cout << render_direct_prompt(Probability(p), phrasing, cot, templates).text;
        return kExitOk;
    }
    if (kind == "vrs") {
        if (x != 0 && x != 1) {
            std::cerr << "error: --x must be 0 or 1\n";
            return kExitConfig;
        }
        const VrsVariant variant =
            with_m ? VrsVariant::WithMInstruction : VrsVariant::Standard;
        std::cout << render_vrs_prompt(ProposalPair(p, q), x, variant, phrasing, templates)
                         .text;
        return kExitOk;
    }
    if (kind == "recognition") {
        Rng rng(seed);
        std::vector<std::uint8_t> samples;
        for (int i = 0; i < n_samples; ++i) samples.push_back(rng.next_bernoulli(p) ? 1 : 0);
        std::cout << render_recognition_prompt(samples, Probability(p_hyp), templates).text;
        return kExitOk;
    }
    std::cerr << "error: --kind must be direct, vrs or recognition\n";
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bernoulli sampling-bias experiments: direct sampling, verbalized rejection "
                 "sampling, bias bounds and replayable runs"};
    app.require_subcommand(1);

    RunFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "Execute an experiment spec");
    run->add_option("--spec", run_flags.spec_path, "Experiment spec JSON file")->required();
    run->add_option("--out", run_flags.out_dir, "Run directory to create")->required();
    run->add_option("--backend", run_flags.backend, "Backend: live, sim or replay")
        ->check(CLI::IsMember({"live", "sim", "replay"}));
    run->add_option("--record", run_flags.record_store,
                    "Record every response into this cache store");
    run->add_option("--cache", run_flags.cache_store, "Replay source store");
    run->add_option("--seed", run_flags.seed, "Override the spec seed");
    run->add_option("--parallel", run_flags.parallel, "In-flight cell limit");
    run->add_option("--throttle-ms", run_flags.throttle_ms,
                    "Sleep this long before each backend call");
    run->add_option("--templates", run_flags.templates_dir, "Prompt template override dir");
    run->add_flag("--i-understand-cost", run_flags.i_understand_cost,
                  "Acknowledge a large paid query volume");

    RunFlags replay_flags;
    CLI::App* replay = app.add_subcommand("replay", "Execute a spec against a recorded cache");
    replay->add_option("--spec", replay_flags.spec_path, "Experiment spec JSON file")
        ->required();
    replay->add_option("--out", replay_flags.out_dir, "Run directory to create")->required();
    replay->add_option("--cache", replay_flags.cache_store, "Recorded cache store")
        ->required();
    replay->add_option("--seed", replay_flags.seed, "Override the spec seed");
    replay->add_option("--parallel", replay_flags.parallel, "In-flight cell limit");
    replay->add_option("--throttle-ms", replay_flags.throttle_ms,
                       "Sleep this long before each backend call");
    replay->add_option("--templates", replay_flags.templates_dir,
                       "Prompt template override dir");

    RunFlags resume_flags;
    resume_flags.backend.clear();
    CLI::App* resume = app.add_subcommand("resume", "Continue an interrupted run directory");
    resume->add_option("--out", resume_flags.out_dir, "Run directory to continue")->required();
    resume->add_option("--backend", resume_flags.backend,
                       "Override the backend recorded in the log header")
        ->check(CLI::IsMember({"live", "sim", "replay"}));
    resume->add_option("--record", resume_flags.record_store, "Record store");
    resume->add_option("--cache", resume_flags.cache_store, "Replay source store");
    resume->add_option("--parallel", resume_flags.parallel, "In-flight cell limit");
    resume->add_option("--throttle-ms", resume_flags.throttle_ms,
                       "Sleep this long before each backend call");
    resume->add_option("--templates", resume_flags.templates_dir,
                       "Prompt template override dir");

    std::vector<std::string> report_runs;
    std::string report_out;
    bool report_plots = false;
    bool report_boxes = false;
    CLI::App* report = app.add_subcommand("report", "Rebuild tables and plots from run logs");
    report->add_option("--run", report_runs, "Run directory (repeatable)")->required();
    report->add_option("--out", report_out, "Directory for combined tables");
    report->add_flag("--plots", report_plots, "Emit SVG calibration plots");
    report->add_flag("--boxes", report_boxes, "Overlay worst-case error boxes");

    double vb_q = 0.5;
    std::string vb_c_list = "0.01,0.05,0.1,0.2";
    double vb_grid_step = 0.01;
    std::int64_t vb_samples = 200;
    std::int64_t vb_search_steps = 201;
    std::uint64_t vb_seed = 1;
    CLI::App* verify = app.add_subcommand(
        "verify-bounds", "Check exact accepted laws against the worst-case bounds");
    verify->add_option("--q", vb_q, "Proposal parameter");
    verify->add_option("--c-list", vb_c_list, "Comma-separated bias bounds");
    verify->add_option("--grid-step", vb_grid_step, "Target-parameter grid step");
    verify->add_option("--samples", vb_samples, "Random feasible biases per cell");
    verify->add_option("--search-steps", vb_search_steps,
                       "Grid points per error coordinate in the worst-case search");
    verify->add_option("--seed", vb_seed, "Seed for the random bias draws");

    std::string gp_kind;
    double gp_p = 0.75;
    double gp_q = 0.5;
    int gp_x = 1;
    std::string gp_phrasing = "P1";
    std::string gp_cot = "auto";
    bool gp_with_m = false;
    double gp_p_hyp = 0.5;
    int gp_n_samples = 100;
    std::uint64_t gp_seed = 1;
    std::string gp_templates;
    CLI::App* gen = app.add_subcommand("gen-prompts", "Render a prompt to stdout");
    gen->add_option("--kind", gp_kind, "direct, vrs or recognition")->required();
    gen->add_option("--p", gp_p, "Target parameter");
    gen->add_option("--q", gp_q, "Proposal parameter");
    gen->add_option("--x", gp_x, "Proposed sample (vrs)");
    gen->add_option("--phrasing", gp_phrasing, "P1, P0, P10 or P01");
    gen->add_option("--cot", gp_cot, "auto, none or a word count (direct)");
    gen->add_flag("--with-m", gp_with_m, "Add the M-computation instruction (vrs)");
    gen->add_option("--p-hyp", gp_p_hyp, "Hypothesis parameter (recognition)");
    gen->add_option("--n-samples", gp_n_samples, "Dataset size (recognition)");
    gen->add_option("--seed", gp_seed, "Dataset seed (recognition)");
    gen->add_option("--templates", gp_templates, "Prompt template override dir");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return do_run(run_flags);
        if (replay->parsed()) {
            replay_flags.backend = "replay";
            return do_run(replay_flags);
        }
        if (resume->parsed()) return do_resume(resume_flags);
        if (report->parsed()) {
            return do_report(report_runs, report_out, report_plots, report_boxes);
        }
        if (verify->parsed()) {
            return do_verify_bounds(vb_q, vb_c_list, vb_grid_step, vb_samples,
                                    vb_search_steps, vb_seed);
        }
        if (gen->parsed()) {
            return do_gen_prompts(gp_kind, gp_p, gp_q, gp_x, gp_phrasing, gp_cot, gp_with_m,
                                  gp_p_hyp, gp_n_samples, gp_seed, gp_templates);
        }
    } catch (const ReplayMiss& err) {
        std::cerr << "ReplayMiss: " << err.what() << "\n";
        return kExitPartial;
    } catch (const SpecHashMismatch& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const RunnerLocked& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitPartial;
    }
    return kExitConfig;
}
