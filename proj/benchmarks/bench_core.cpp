#include <benchmark/benchmark.h>

#include <vector>

#include "vrs/bernoulli.hpp"
#include "vrs/bias.hpp"
#include "vrs/engine.hpp"
#include "vrs/prompts.hpp"
#include "vrs/rng.hpp"
#include "vrs/sha256.hpp"

using namespace vrs;

static void BM_ExactAcceptedLaw(benchmark::State& state) {
    const ProposalPair pair(0.8, 0.5);
    const BiasFunction bias(0.1, 0.0, 0.1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_accepted_law(pair, bias, BiasMode::HalfBiased));
    }
}
BENCHMARK(BM_ExactAcceptedLaw);

static void BM_WorstCaseSearch(benchmark::State& state) {
    const ProposalPair pair(0.8, 0.5);
    const auto steps = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            worst_case_tv_search(pair, BiasMode::FullBiased, 0.1, steps));
    }
    state.SetItemsProcessed(state.iterations() * steps * steps);
}
BENCHMARK(BM_WorstCaseSearch)->Arg(51)->Arg(201);

static void BM_RejectionRun(benchmark::State& state) {
    const ProposalPair pair(0.75, 0.5);
    const auto n = state.range(0);
    std::uint64_t seed = 1;
    for (auto _ : state) {
        ExactOracle oracle(pair, seed);
        benchmark::DoNotOptimize(
            run_rejection(pair, n, oracle, seed, default_max_proposals(pair, n)));
        ++seed;
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RejectionRun)->Arg(100)->Arg(10000);

static void BM_RenderVrsPrompt(benchmark::State& state) {
    const ProposalPair pair(0.37, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            render_vrs_prompt(pair, 1, VrsVariant::Standard, Phrasing::P10));
    }
}
BENCHMARK(BM_RenderVrsPrompt);

static void BM_ParseAcceptDecision(benchmark::State& state) {
    const std::string response =
        "Explanations: \nThe acceptance probability is 1, so accept.\n\nOutput: \nT\n";
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_accept_decision(response));
    }
}
BENCHMARK(BM_ParseAcceptDecision);

static void BM_Stvd(benchmark::State& state) {
    CalibrationCurve curve;
    Rng rng(7);
    for (int i = 0; i <= 100; ++i) {
        curve.add_counts(i / 100.0, static_cast<std::int64_t>(rng.next_u64() % 101), 100);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(stvd(curve));
    }
}
BENCHMARK(BM_Stvd);

static void BM_Sha256Prompt(benchmark::State& state) {
    const std::string prompt =
        render_direct_prompt(Probability(0.42), Phrasing::P1, CotDirective::auto_mode()).text;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sha256_hex(prompt));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(prompt.size()));
}
BENCHMARK(BM_Sha256Prompt);

BENCHMARK_MAIN();
