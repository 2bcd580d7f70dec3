#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "vrs/bernoulli.hpp"
#include "vrs/errors.hpp"

namespace vrs {

/// Accept/reject decision source consulted once per proposal. The
/// engine treats every call as an independent trial; implementations
/// must not carry state between proposals beyond their own seeding.
class DecisionOracle {
public:
    virtual ~DecisionOracle() = default;

    /// Decide whether to accept the proposed outcome `x`.
    /// `proposal_index` is the 0-based proposal counter within the run;
    /// `attempt` counts retries after MalformedResponse. Throwing
    /// MalformedResponse requests a retry; any other exception aborts.
    virtual bool decide(int x, std::uint64_t proposal_index, int attempt) = 0;
};

/// Full accounting for one rejection-sampling run.
struct RunStats {
    std::int64_t n_proposed = 0;
    std::int64_t n_accepted = 0;
    std::array<std::int64_t, 2> proposed_per_outcome{0, 0};
    std::array<std::int64_t, 2> accepted_per_outcome{0, 0};
};

struct RunResult {
    std::vector<std::uint8_t> samples;  // accepted outcomes, in order
    RunStats stats;
    bool completed = false;
};

/// Proposal budget ran out before enough samples were accepted. Carries
/// whatever was collected so far.
struct BudgetExhausted : Error {
    BudgetExhausted(const std::string& msg, RunResult partial_)
        : Error(msg), partial(std::move(partial_)) {}

    RunResult partial;
};

/// The oracle kept returning malformed decisions past the retry budget.
struct OracleFailure : Error {
    using Error::Error;
};

/// Retries per decision before the run is failed.
inline constexpr int kOracleRetryBudget = 3;

/// Default proposal budget: 100 * n_accept_target * M, i.e. two orders
/// of magnitude beyond the expected 1/alpha = M proposals per accept.
std::int64_t default_max_proposals(const ProposalPair& pair, std::int64_t n_accept_target);

/// Draw proposals i.i.d. from Bern(q) with a seeded deterministic
/// generator, consult the oracle per proposal, and collect accepted
/// samples until `n_accept_target` of them (or the budget) is reached.
RunResult run_rejection(const ProposalPair& pair, std::int64_t n_accept_target,
                        DecisionOracle& oracle, std::uint64_t seed,
                        std::int64_t max_proposals);

/// Oracle that accepts with probability exactly A(x), drawn from its
/// own per-proposal seeded generator.
class ExactOracle final : public DecisionOracle {
public:
    ExactOracle(const ProposalPair& pair, std::uint64_t seed);

    bool decide(int x, std::uint64_t proposal_index, int attempt) override;

private:
    double a0_;
    double a1_;
    std::uint64_t seed_;
};

/// Per-outcome empirical acceptance frequencies. Outcomes never
/// proposed are reported as absent rather than zero.
std::array<std::optional<double>, 2> empirical_acceptance(const RunStats& stats);

}  // namespace vrs
