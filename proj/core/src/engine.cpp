#include "vrs/engine.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vrs/rng.hpp"

namespace vrs {

namespace {

// Domain separators so proposal draws and oracle draws derived from
// the same user seed never collide.
constexpr std::uint64_t kProposalStream = 0x70726f70ULL;  // "prop"
constexpr std::uint64_t kOracleStream = 0x6f72636cULL;    // "orcl"

int draw_proposal(double q, std::uint64_t seed, std::uint64_t index) {
    Rng rng(mix_seed({seed, kProposalStream, index}));
    return rng.next_bernoulli(q) ? 1 : 0;
}

}  // namespace

std::int64_t default_max_proposals(const ProposalPair& pair, std::int64_t n_accept_target) {
    const double budget = 100.0 * static_cast<double>(n_accept_target) * m_constant(pair);
    return static_cast<std::int64_t>(std::ceil(budget));
}

RunResult run_rejection(const ProposalPair& pair, std::int64_t n_accept_target,
                        DecisionOracle& oracle, std::uint64_t seed,
                        std::int64_t max_proposals) {
    if (n_accept_target <= 0) {
        throw std::invalid_argument("n_accept_target must be positive");
    }
    if (max_proposals < n_accept_target) {
        throw std::invalid_argument("max_proposals must be at least n_accept_target");
    }

    RunResult result;
    result.samples.reserve(static_cast<std::size_t>(n_accept_target));
    const double q = pair.q();

    for (std::uint64_t index = 0; result.stats.n_accepted < n_accept_target; ++index) {
        if (static_cast<std::int64_t>(index) >= max_proposals) {
            throw BudgetExhausted("proposal budget of " + std::to_string(max_proposals) +
                                      " exhausted with " +
                                      std::to_string(result.stats.n_accepted) + " of " +
                                      std::to_string(n_accept_target) + " samples accepted",
                                  std::move(result));
        }

        const int x = draw_proposal(q, seed, index);
        result.stats.n_proposed += 1;
        result.stats.proposed_per_outcome[static_cast<std::size_t>(x)] += 1;

        bool accept = false;
        for (int attempt = 0;; ++attempt) {
            try {
                accept = oracle.decide(x, index, attempt);
                break;
            } catch (const MalformedResponse& err) {
                if (attempt + 1 >= kOracleRetryBudget) {
                    throw OracleFailure("oracle failed " + std::to_string(kOracleRetryBudget) +
                                        " times at proposal " + std::to_string(index) + " (x=" +
                                        std::to_string(x) + "): " + err.what());
                }
            }
        }

        if (accept) {
            result.samples.push_back(static_cast<std::uint8_t>(x));
            result.stats.n_accepted += 1;
            result.stats.accepted_per_outcome[static_cast<std::size_t>(x)] += 1;
        }
    }

    result.completed = true;
    return result;
}

ExactOracle::ExactOracle(const ProposalPair& pair, std::uint64_t seed)
    : a0_(acceptance_prob(0, pair).value()),
      a1_(acceptance_prob(1, pair).value()),
      seed_(seed) {}

bool ExactOracle::decide(int x, std::uint64_t proposal_index, int attempt) {
    Rng rng(mix_seed({seed_, kOracleStream, proposal_index, static_cast<std::uint64_t>(attempt)}));
    return rng.next_bernoulli(x == 1 ? a1_ : a0_);
}

std::array<std::optional<double>, 2> empirical_acceptance(const RunStats& stats) {
    std::array<std::optional<double>, 2> freq;
    for (std::size_t x = 0; x < 2; ++x) {
        if (stats.proposed_per_outcome[x] > 0) {
            freq[x] = static_cast<double>(stats.accepted_per_outcome[x]) /
                      static_cast<double>(stats.proposed_per_outcome[x]);
        }
    }
    return freq;
}

}  // namespace vrs
