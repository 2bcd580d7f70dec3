#pragma once

#include <cstdint>
#include <optional>

#include "vrs/bernoulli.hpp"

namespace vrs {

/// Where the additive acceptance error is allowed to act.
/// HalfBiased zeroes the error on every outcome whose acceptance
/// probability is exactly 1 (only the non-trivial branch is perturbed).
enum class BiasMode {
    FullBiased,
    HalfBiased,
};

/// Additive per-outcome acceptance error with a declared bound c:
/// Atilde(x) = A(x) + e(x), |e(x)| <= c. Feasibility against a concrete
/// pair (0 <= Atilde <= 1) is checked at application time.
class BiasFunction {
public:
    BiasFunction(double e0, double e1, double c);

    static BiasFunction zero() { return BiasFunction(0.0, 0.0, 0.0); }

    double e(int x) const { return x == 1 ? e1_ : e0_; }
    double e0() const { return e0_; }
    double e1() const { return e1_; }
    double c() const { return c_; }

private:
    double e0_;
    double e1_;
    double c_;
};

enum class BoundKind {
    FullBias,  // worst case under errors on both branches, Mc / (1 - Mc)
    HalfBias,  // worst case under a non-trivial-branch error, Q(xhat) Mc / (1 - Q(xhat) Mc)
    Exact,  // tv_exact is itself exact (direct sampling law)
};

/// Closed-form description of the law of accepted samples under a
/// biased accept/reject step. `bound` is empty when the matching
/// worst-case bound is vacuous for these constants.
struct BiasedLawReport {
    Probability p_tilde;      // accepted-law mass on outcome 1
    Probability alpha_tilde;  // biased acceptance rate
    double tv_exact = 0.0;    // |p_tilde - p|
    std::optional<double> bound;
    BoundKind bound_kind = BoundKind::Exact;
};

/// Law of accepted samples Ptilde(x) = Q(x) Atilde(x) / alpha_tilde,
/// computed in closed form, with the applicable worst-case bound
/// attached (half-bias bound for HalfBiased, full-bias bound for
/// FullBiased).
BiasedLawReport exact_accepted_law(const ProposalPair& pair, const BiasFunction& bias,
                                   BiasMode mode);

/// Worst-case TV bound Mc / (1 - Mc) when both branches may carry
/// error. Requires Mc < 1;
/// beyond that the bound is vacuous and the call throws.
double full_bias_bound(double m, double c);

/// Half-biased worst-case TV bound Q(xhat) Mc / (1 - Q(xhat) Mc).
/// Requires q_hat * M * c < 1. Never exceeds full_bias_bound where both
/// are defined.
double half_bias_bound(Probability q_hat, double m, double c);

/// Law of direct sampling under the same additive error:
/// Pbar(x) = P(x) + e(x), so the TV error is exactly |e|.
BiasedLawReport direct_biased_law(Probability p, double e);

/// Critical bias level 1 / (q_hat * M) - 1. VRS's worst-case bound
/// beats direct sampling's worst case iff c is strictly below this
/// value. Positive iff q_hat * M < 1 (always true for q = 1/2).
double crossover_threshold(Probability q_hat, double m);

/// Deterministic grid search for the largest exact TV error over all
/// feasible bias functions with bound c (grid_steps points per error
/// coordinate). Serves as an independent tightness oracle for the
/// worst-case bounds.
double worst_case_tv_search(const ProposalPair& pair, BiasMode mode, double c,
                            std::int64_t grid_steps);

class Rng;

/// Uniform draw from the feasible bias set for (pair, mode, c):
/// |e(x)| <= c, 0 <= A(x) + e(x) <= 1, and e forced to zero on trivial
/// branches under HalfBiased.
BiasFunction sample_feasible_bias(const ProposalPair& pair, BiasMode mode, double c, Rng& rng);

}  // namespace vrs
