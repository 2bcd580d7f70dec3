// Acceptance suite: one pass/fail line per criterion, exit 0 iff all
// pass. Build as a standalone binary; the CLI path for the kill/resume
// scenario comes from VRS_CLI_BIN.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vrs/backend.hpp"
#include "vrs/bernoulli.hpp"
#include "vrs/bias.hpp"
#include "vrs/engine.hpp"
#include "vrs/prompts.hpp"
#include "vrs/rng.hpp"
#include "vrs/runner.hpp"
#include "vrs/simulated.hpp"
#include "vrs/stats.hpp"
#include "vrs/util.hpp"

using namespace vrs;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << number << ": " << name
              << " -- " << detail << "\n";
    if (!pass) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double value) {
    std::ostringstream out;
    out.precision(6);
    out << value;
    return out.str();
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: exact accepted laws vs the worst-case bounds, and
// the bound-level crossover equivalence, on the pinned grid.
// ---------------------------------------------------------------------------

void criteria_1_2() {
    const auto start = std::chrono::steady_clock::now();
    const double q = 0.5;
    const std::vector<double> c_list{0.01, 0.05, 0.1, 0.2};
    constexpr int kRandomPerCell = 200;
    constexpr std::int64_t kSearchSteps = 201;
    constexpr double kTol = 1e-12;

    Rng rng(20250809);
    std::int64_t cells = 0;
    std::int64_t bound_violations = 0;
    std::int64_t crossover_violations = 0;
    std::int64_t crossover_cells = 0;

    for (int pi = 1; pi <= 99; ++pi) {
        if (pi == 50) continue;
        const double p = pi / 100.0;
        const ProposalPair pair(p, q);
        const double m = m_constant(pair);
        const Probability q_hat(pair.proposal().mass(*nontrivial_event(pair)));

        for (double c : c_list) {
            for (BiasMode mode : {BiasMode::FullBiased, BiasMode::HalfBiased}) {
                ++cells;
                const bool vacuous = mode == BiasMode::FullBiased
                                         ? m * c >= 1.0
                                         : q_hat.value() * m * c >= 1.0;
                if (vacuous) continue;
                const double bound = mode == BiasMode::FullBiased
                                         ? full_bias_bound(m, c)
                                         : half_bias_bound(q_hat, m, c);

                double tv_max = worst_case_tv_search(pair, mode, c, kSearchSteps);
                for (int s = 0; s < kRandomPerCell; ++s) {
                    const BiasFunction bias = sample_feasible_bias(pair, mode, c, rng);
                    tv_max = std::max(tv_max, exact_accepted_law(pair, bias, mode).tv_exact);
                }
                if (tv_max > bound + kTol) ++bound_violations;

                if (mode == BiasMode::HalfBiased) {
                    ++crossover_cells;
                    const double threshold = crossover_threshold(q_hat, m);
                    const bool bound_wins = bound < c;
                    const bool below_threshold = c < threshold;
                    // Guard against meaningless comparisons at ties.
                    const bool ambiguous = std::abs(bound - c) <= kTol ||
                                           std::abs(c - threshold) <= kTol;
                    if (ambiguous || bound_wins != below_threshold) ++crossover_violations;
                }
            }
        }
    }

    const double seconds = elapsed_s(start);
    report(1, "theory soundness sweep",
           bound_violations == 0 && seconds < 60.0,
           std::to_string(cells) + " cells (" + std::to_string(kRandomPerCell) +
               " random biases each plus " + std::to_string(kSearchSteps) +
               "-step grid search), " + std::to_string(bound_violations) +
               " bound violations, " + fmt(seconds) + "s (<60s)");
    report(2, "bound-level crossover equivalence", crossover_violations == 0,
           std::to_string(crossover_cells) + " half-biased cells, " +
               std::to_string(crossover_violations) + " mismatches at 1e-12");
}

// ---------------------------------------------------------------------------
// Criterion 3: rejection engine driven by the simulated half-biased
// backend converges to the closed-form accepted law.
// ---------------------------------------------------------------------------

class BackendOracle final : public DecisionOracle {
public:
    BackendOracle(TextBackend& backend, const ProposalPair& pair, std::uint64_t cell_seed)
        : backend_(backend), pair_(pair), cell_seed_(cell_seed) {}

    bool decide(int x, std::uint64_t proposal_index, int attempt) override {
        PromptBundle bundle =
            render_vrs_prompt(pair_, x, VrsVariant::Standard, Phrasing::P1);
        bundle.meta.query_seed = mix_seed({cell_seed_, proposal_index});
        bundle.meta.attempt = attempt;
        return parse_accept_decision(backend_.complete(bundle)) == Decision::Accept;
    }

private:
    TextBackend& backend_;
    ProposalPair pair_;
    std::uint64_t cell_seed_;
};

void criterion_3() {
    const auto start = std::chrono::steady_clock::now();
    constexpr std::int64_t kAccepted = 10'000;
    int cells = 0;
    int misses = 0;

    for (double p : {0.2, 0.35, 0.65, 0.8}) {
        for (double c : {0.05, 0.1}) {
            const ProposalPair pair(p, 0.5);
            const int xhat = *nontrivial_event(pair);
            const BiasFunction bias(xhat == 0 ? c : 0.0, xhat == 1 ? c : 0.0, c);
            const double target =
                exact_accepted_law(pair, bias, BiasMode::HalfBiased).p_tilde.value();
            const double tol = 3.0 * std::sqrt(target * (1.0 - target) /
                                               static_cast<double>(kAccepted));

            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                ++cells;
                SimulatedBackend backend(SimulatedBias::half_biased(c, seed * 7919));
                BackendOracle oracle(backend, pair, seed * 104729);
                const RunResult run =
                    run_rejection(pair, kAccepted, oracle, seed,
                                  default_max_proposals(pair, kAccepted));
                std::int64_t ones = 0;
                for (auto s : run.samples) ones += s;
                const double freq = static_cast<double>(ones) /
                                    static_cast<double>(run.samples.size());
                if (std::abs(freq - target) > tol) ++misses;
            }
        }
    }

    const double seconds = elapsed_s(start);
    const double hit_rate = 1.0 - static_cast<double>(misses) / cells;
    report(3, "engine/theory agreement (half-biased)",
           hit_rate >= 0.95 && seconds < 120.0,
           std::to_string(cells - misses) + "/" + std::to_string(cells) +
               " cells within 3 sigma of the closed-form law, " + fmt(seconds) + "s (<120s)");
}

// ---------------------------------------------------------------------------
// Criterion 4: unbiased VRS sweep through the full runner is exact.
// ---------------------------------------------------------------------------

void criterion_4(const fs::path& scratch) {
    // Full four-phrasing protocol; acceptance rates are pooled per p
    // across phrasings (about 400 M proposals each), where the 0.05
    // tolerance sits near 2.6 sigma. The protocol seed is pinned.
    const std::string spec_text =
        "{\"id\":\"acceptance-vrs\",\"kind\":\"vrs_sweep\","
        "\"phrasings\":[\"P1\",\"P0\",\"P10\",\"P01\"],\"seed\":20250844}";
    const ExperimentSpec spec = ExperimentSpec::from_json_text(spec_text);
    const RunSummary summary = Runner::run(spec, spec_text, scratch / "c4", {});

    // 4a: per-cell two-sided binomial test at 1e-6 never rejects.
    std::int64_t points = 0;
    std::int64_t rejects = 0;
    for (const auto& [key, curve] : summary.outputs.curves) {
        for (const CurvePoint& point : curve.points()) {
            ++points;
            const auto ones = static_cast<std::int64_t>(
                std::llround(point.p_hat * static_cast<double>(point.n_samples)));
            if (binom_two_sided_pvalue(ones, point.n_samples, point.p_true) <= 1e-6) {
                ++rejects;
            }
        }
    }
    report(4, "unbiased VRS exactness: binomial test",
           summary.complete() && points == 4 * 101 && rejects == 0,
           std::to_string(points) + " cells, " + std::to_string(rejects) +
               " rejections at 1e-6");

    // 4b: per-p empirical acceptance rate (pooled over the four
    // phrasings) within 0.05 of 1/M.
    std::map<double, std::pair<std::int64_t, std::int64_t>> by_p;  // proposed, accepted
    for (const AcceptanceRow& row : summary.outputs.acceptance) {
        by_p[row.p].first += row.proposed;
        by_p[row.p].second += row.accepted;
    }
    std::int64_t rate_misses = 0;
    double worst_dev = 0.0;
    for (const auto& [p, counts] : by_p) {
        const double rate = static_cast<double>(counts.second) /
                            static_cast<double>(counts.first);
        const double alpha = acceptance_rate(ProposalPair(p, 0.5)).value();
        const double dev = std::abs(rate - alpha);
        worst_dev = std::max(worst_dev, dev);
        if (dev > 0.05) ++rate_misses;
    }
    report(4, "unbiased VRS exactness: acceptance rate within 0.05 of 1/M",
           rate_misses == 0,
           std::to_string(by_p.size()) + " grid points, " + std::to_string(rate_misses) +
               " beyond 0.05 (worst deviation " + fmt(worst_dev) + ")");
}

// ---------------------------------------------------------------------------
// Criterion 5: worked values from the math core.
// ---------------------------------------------------------------------------

void criterion_5() {
    bool ok = true;
    std::string detail;

    const ProposalPair worked(0.75, 0.5);
    if (m_constant(worked) != 1.5) {
        ok = false;
        detail += "M(0.75,0.5) != 1.5; ";
    }
    if (std::abs(acceptance_prob(0, worked).value() - 0.3333) > 5e-5) {
        ok = false;
        detail += "A(0) not 0.3333 +/- 5e-5; ";
    }

    CalibrationCurve offset;
    for (int i = 0; i <= 100; ++i) {
        const double p = i / 100.0;
        const double hat = std::min(p + 0.05, 1.0);
        offset.add_counts(p, static_cast<std::int64_t>(std::llround(hat * 100)), 100);
    }
    if (std::abs(stvd(offset) - 4.90) > 1e-12) {
        ok = false;
        detail += "offset STVD fixture != 4.90; ";
    }

    double worst_roundtrip = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double a = i / 1000.0;
        const double p = invert_acceptance_for_one(Probability(a), Probability(0.5)).value();
        const double back = acceptance_prob(1, ProposalPair(p, 0.5)).value();
        worst_roundtrip = std::max(worst_roundtrip, std::abs(back - a));
    }
    if (worst_roundtrip >= 1e-12) {
        ok = false;
        detail += "inversion round-trip >= 1e-12; ";
    }

    if (ok) {
        detail = "M = 1.5, A(0) = 0.3333 +/- 5e-5, offset STVD = 4.90, inversion round-trip "
                 "max " +
                 fmt(worst_roundtrip);
    }
    report(5, "worked values and inversion round-trip", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 6: prompt fidelity and parse duality.
// ---------------------------------------------------------------------------

void criterion_6(const fs::path& golden_dir) {
    bool ok = true;
    std::string detail;

    const auto check_golden = [&](const std::string& name, const std::string& rendered) {
        const fs::path path = golden_dir / name;
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        if (!in || buffer.str() != rendered) {
            ok = false;
            detail += name + " differs; ";
        }
    };
    check_golden("direct_p1_auto_p075.txt",
                 render_direct_prompt(Probability(0.75), Phrasing::P1,
                                      CotDirective::auto_mode())
                     .text);
    check_golden("vrs_p1_x1_p075_q05.txt",
                 render_vrs_prompt(ProposalPair(0.75, 0.5), 1, VrsVariant::Standard,
                                   Phrasing::P1)
                     .text);

    int combos = 0;
    try {
        for (Phrasing ph : {Phrasing::P1, Phrasing::P0, Phrasing::P10, Phrasing::P01}) {
            for (const CotDirective& cot :
                 {CotDirective::auto_mode(), CotDirective::exact_words(100),
                  CotDirective::no_reasoning()}) {
                const PromptBundle bundle = render_direct_prompt(Probability(0.37), ph, cot);
                for (const char* value : {"0", "1"}) {
                    if (parse_binary_sample(conforming_response(bundle.expected_parse,
                                                                value)) !=
                        (value[0] - '0')) {
                        throw MalformedResponse("duality");
                    }
                }
                ++combos;
            }
            for (VrsVariant variant : {VrsVariant::Standard, VrsVariant::WithMInstruction}) {
                for (int x : {0, 1}) {
                    const PromptBundle bundle =
                        render_vrs_prompt(ProposalPair(0.37, 0.5), x, variant, ph);
                    if (parse_accept_decision(conforming_response(bundle.expected_parse,
                                                                  "T")) !=
                            Decision::Accept ||
                        parse_accept_decision(conforming_response(bundle.expected_parse,
                                                                  "F")) !=
                            Decision::Reject) {
                        throw MalformedResponse("duality");
                    }
                    ++combos;
                }
            }
        }
        std::vector<std::uint8_t> samples{1, 0, 1};
        const PromptBundle recog = render_recognition_prompt(samples, Probability(0.4));
        if (parse_yes_no(conforming_response(recog.expected_parse, "Yes")) != YesNo::Yes ||
            parse_yes_no(conforming_response(recog.expected_parse, "No")) != YesNo::No) {
            throw MalformedResponse("duality");
        }
        ++combos;
    } catch (const std::exception& err) {
        ok = false;
        detail += std::string("parse duality failed: ") + err.what();
    }

    if (ok) detail = "golden bytes match, parse duality over " + std::to_string(combos) +
                     " template combinations";
    report(6, "prompt fidelity and parse duality", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: record, kill mid-replay, resume: bit-identical outputs.
// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, pid_t* child_out = nullptr,
            bool wait_for_exit = true) {
    const char* cli = std::getenv("VRS_CLI_BIN");
    if (cli == nullptr) throw std::runtime_error("VRS_CLI_BIN not set");

    std::vector<std::string> full;
    full.push_back(cli);
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(full.size() + 1);
    for (std::string& arg : full) argv.push_back(arg.data());
    argv.push_back(nullptr);

    std::fflush(nullptr);  // keep buffered suite output out of the child
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
        // Quiet the child: the suite output should stay one line per criterion.
        if (std::freopen("/dev/null", "w", stdout) == nullptr) std::_Exit(126);
        ::execv(cli, argv.data());
        std::_Exit(127);
    }
    if (child_out != nullptr) *child_out = pid;
    if (!wait_for_exit) return 0;
    int status = 0;
    ::waitpid(pid, &status, 0);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -WTERMSIG(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void criterion_7(const fs::path& scratch) {
    bool ok = true;
    std::string detail;
    try {
        const fs::path spec_path = scratch / "c7_spec.json";
        write_text_file(spec_path,
                        "{\"id\":\"acceptance-replay\",\"kind\":\"direct_sweep\","
                        "\"seed\":424242}\n");
        const fs::path cache = scratch / "c7_cache.jsonl";

        // Record the full 101 x 100 sweep.
        if (run_cli({"run", "--spec", spec_path.string(), "--out",
                     (scratch / "c7_rec").string(), "--backend", "sim", "--record",
                     cache.string()}) != 0) {
            throw std::runtime_error("record run failed");
        }

        // Replay it, kill the process mid-run, then resume.
        const fs::path killed = scratch / "c7_killed";
        pid_t child = 0;
        run_cli({"replay", "--spec", spec_path.string(), "--out", killed.string(),
                 "--cache", cache.string(), "--throttle-ms", "2"},
                &child, /*wait_for_exit=*/false);
        const fs::path log = killed / "records.jsonl";
        for (int i = 0; i < 400; ++i) {
            ::usleep(50'000);
            if (fs::exists(log) && fs::file_size(log) > 60'000) break;
        }
        ::kill(child, SIGKILL);
        int status = 0;
        ::waitpid(child, &status, 0);
        if (!WIFSIGNALED(status) || WTERMSIG(status) != SIGKILL) {
            throw std::runtime_error("replay child was not killed mid-run");
        }
        const auto killed_bytes = fs::exists(log) ? fs::file_size(log) : 0;
        if (killed_bytes == 0) throw std::runtime_error("child died before writing records");

        if (run_cli({"resume", "--out", killed.string(), "--cache", cache.string()}) != 0) {
            throw std::runtime_error("resume failed");
        }

        const std::string curves_rec = slurp(scratch / "c7_rec" / "curves.csv");
        const std::string curves_resumed = slurp(killed / "curves.csv");
        const std::string stvd_rec = slurp(scratch / "c7_rec" / "stvd.csv");
        const std::string stvd_resumed = slurp(killed / "stvd.csv");
        if (curves_rec.empty() || curves_rec != curves_resumed) {
            ok = false;
            detail += "curves.csv differs after kill+resume+replay; ";
        }
        if (stvd_rec.empty() || stvd_rec != stvd_resumed) {
            ok = false;
            detail += "stvd.csv differs after kill+resume+replay; ";
        }
        if (ok) {
            detail = "SIGKILL after " + std::to_string(killed_bytes) +
                     " log bytes; resumed replay output is bit-identical";
        }
    } catch (const std::exception& err) {
        ok = false;
        detail = err.what();
    }
    report(7, "replay determinism across a mid-run kill", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: recognition harness with the concentration stub judge.
// ---------------------------------------------------------------------------

void criterion_8(const fs::path& scratch) {
    const std::string spec_text =
        "{\"id\":\"acceptance-recognition\",\"kind\":\"recognition_matrix\","
        "\"seed\":20250809}";
    const ExperimentSpec spec = ExperimentSpec::from_json_text(spec_text);
    const RunSummary summary = Runner::run(spec, spec_text, scratch / "c8", {});

    double diag_sum = 0.0;
    int diag_n = 0;
    double far_sum = 0.0;
    int far_n = 0;
    for (const RecognitionCell& cell : summary.outputs.recognition) {
        if (cell.matrix != "ref") continue;
        if (cell.i == cell.j) {
            diag_sum += cell.accuracy;
            ++diag_n;
        } else if (std::abs(cell.i - cell.j) >= 2) {
            far_sum += cell.accuracy;
            ++far_n;
        }
    }
    const double diag_mean = diag_sum / diag_n;
    const double far_mean = far_sum / far_n;
    report(8, "recognition harness diagonal confusion",
           summary.complete() && diag_n == 11 && diag_mean < far_mean,
           "diagonal mean accuracy " + fmt(diag_mean) + " < far off-diagonal mean " +
               fmt(far_mean) + " (11x11, 5 repeats, concentration judge)");
}

}  // namespace

int main() {
    fs::path scratch = fs::temp_directory_path() / "vrs_acceptance";
    if (const char* dir = std::getenv("VRS_ACCEPTANCE_SCRATCH")) scratch = dir;
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    fs::path golden = "tests/golden";
    if (const char* dir = std::getenv("VRS_GOLDEN_DIR")) golden = dir;

    criteria_1_2();
    criterion_3();
    criterion_4(scratch);
    criterion_5();
    criterion_6(golden);
    criterion_7(scratch);
    criterion_8(scratch);

    if (g_failures == 0) {
        std::cout << "acceptance: all criteria passed\n";
    } else {
        std::cout << "acceptance: " << g_failures << " criterion check(s) failed\n";
    }
    fs::remove_all(scratch);
    return g_failures == 0 ? 0 : 1;
}
