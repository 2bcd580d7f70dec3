#include "vrs/bias.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vrs/rng.hpp"

namespace vrs {

BiasFunction::BiasFunction(double e0, double e1, double c) : e0_(e0), e1_(e1), c_(c) {
    if (!(c >= 0.0) || std::isnan(e0) || std::isnan(e1)) {
        throw std::invalid_argument("bias bound c must be nonnegative and errors finite");
    }
    if (std::abs(e0) > c || std::abs(e1) > c) {
        throw std::invalid_argument("bias errors must satisfy |e(x)| <= c");
    }
}

namespace {

double effective_error(const ProposalPair& pair, const BiasFunction& bias, BiasMode mode, int x) {
    if (mode == BiasMode::HalfBiased && acceptance_prob(x, pair).value() == 1.0) {
        return 0.0;
    }
    return bias.e(x);
}

std::optional<double> applicable_bound(const ProposalPair& pair, double c, BiasMode mode) {
    const double m = m_constant(pair);
    if (mode == BiasMode::FullBiased) {
        if (m * c >= 1.0) return std::nullopt;
        return full_bias_bound(m, c);
    }
    const std::optional<int> xhat = nontrivial_event(pair);
    if (!xhat) return std::nullopt;  // p = q: no biased event, Prop2 undefined
    const Probability q_hat(pair.proposal().mass(*xhat));
    if (q_hat.value() * m * c >= 1.0) return std::nullopt;
    return half_bias_bound(q_hat, m, c);
}

}  // namespace

BiasedLawReport exact_accepted_law(const ProposalPair& pair, const BiasFunction& bias,
                                   BiasMode mode) {
    const double q = pair.q();
    const double a1 = acceptance_prob(1, pair).value() + effective_error(pair, bias, mode, 1);
    const double a0 = acceptance_prob(0, pair).value() + effective_error(pair, bias, mode, 0);
    if (a1 < 0.0 || a1 > 1.0 || a0 < 0.0 || a0 > 1.0) {
        throw std::domain_error("biased acceptance probability leaves [0, 1]");
    }
    const double alpha_tilde = q * a1 + (1.0 - q) * a0;
    if (alpha_tilde <= 0.0) {
        throw std::domain_error("biased acceptance rate is zero: every proposal rejected");
    }

    BiasedLawReport report;
    report.p_tilde = Probability(std::clamp(q * a1 / alpha_tilde, 0.0, 1.0));
    report.alpha_tilde = Probability(std::min(alpha_tilde, 1.0));
    report.tv_exact = std::abs(report.p_tilde.value() - pair.p());
    report.bound = applicable_bound(pair, bias.c(), mode);
    report.bound_kind = mode == BiasMode::FullBiased ? BoundKind::FullBias : BoundKind::HalfBias;
    return report;
}

double full_bias_bound(double m, double c) {
    if (m < 1.0 || c < 0.0) {
        throw std::invalid_argument("full_bias_bound requires M >= 1 and c >= 0");
    }
    if (m * c >= 1.0) {
        throw std::domain_error("full_bias_bound is vacuous for Mc >= 1");
    }
    return m * c / (1.0 - m * c);
}

double half_bias_bound(Probability q_hat, double m, double c) {
    if (m < 1.0 || c < 0.0) {
        throw std::invalid_argument("half_bias_bound requires M >= 1 and c >= 0");
    }
    const double qmc = q_hat.value() * m * c;
    if (qmc >= 1.0) {
        throw std::domain_error("half_bias_bound is vacuous for Q(xhat) Mc >= 1");
    }
    return qmc / (1.0 - qmc);
}

BiasedLawReport direct_biased_law(Probability p, double e) {
    const double mass = p.value() + e;
    if (mass < 0.0 || mass > 1.0) {
        throw std::domain_error("direct bias infeasible: p + e leaves [0, 1]");
    }
    BiasedLawReport report;
    report.p_tilde = Probability(mass);
    report.alpha_tilde = Probability(1.0);
    report.tv_exact = std::abs(e);
    report.bound = report.tv_exact;
    report.bound_kind = BoundKind::Exact;
    return report;
}

double crossover_threshold(Probability q_hat, double m) {
    if (q_hat.value() <= 0.0) {
        throw std::invalid_argument("crossover threshold undefined for Q(xhat) = 0");
    }
    if (m < 1.0) {
        throw std::invalid_argument("crossover threshold requires M >= 1");
    }
    return 1.0 / (q_hat.value() * m) - 1.0;
}

namespace {

struct ErrorInterval {
    double lo;
    double hi;
};

// Feasible error range for one outcome: |e| <= c and 0 <= A + e <= 1.
ErrorInterval feasible_range(double a, double c) {
    return {std::max(-c, -a), std::min(c, 1.0 - a)};
}

}  // namespace

double worst_case_tv_search(const ProposalPair& pair, BiasMode mode, double c,
                            std::int64_t grid_steps) {
    if (c < 0.0) throw std::invalid_argument("bias bound c must be nonnegative");
    if (grid_steps < 1) throw std::invalid_argument("grid_steps must be positive");
    if (c == 0.0) return 0.0;

    const auto grid = [&](const ErrorInterval& iv, std::int64_t i) {
        if (grid_steps == 1) return iv.lo;
        const double value = iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) /
                                         static_cast<double>(grid_steps - 1);
        return std::clamp(value, iv.lo, iv.hi);  // interpolation can overshoot by 1 ulp
    };

    double worst = 0.0;
    if (mode == BiasMode::HalfBiased) {
        const std::optional<int> xhat = nontrivial_event(pair);
        if (!xhat) return 0.0;  // p = q: error forced to zero everywhere
        const ErrorInterval iv = feasible_range(acceptance_prob(*xhat, pair).value(), c);
        for (std::int64_t i = 0; i < grid_steps; ++i) {
            const double e = grid(iv, i);
            const BiasFunction bias(*xhat == 0 ? e : 0.0, *xhat == 1 ? e : 0.0, c);
            worst = std::max(worst, exact_accepted_law(pair, bias, mode).tv_exact);
        }
        return worst;
    }

    const ErrorInterval iv0 = feasible_range(acceptance_prob(0, pair).value(), c);
    const ErrorInterval iv1 = feasible_range(acceptance_prob(1, pair).value(), c);
    for (std::int64_t i = 0; i < grid_steps; ++i) {
        const double e0 = grid(iv0, i);
        for (std::int64_t j = 0; j < grid_steps; ++j) {
            const double e1 = grid(iv1, j);
            const BiasFunction bias(e0, e1, c);
            const double alpha_tilde =
                pair.q() * (acceptance_prob(1, pair).value() + e1) +
                (1.0 - pair.q()) * (acceptance_prob(0, pair).value() + e0);
            if (alpha_tilde <= 0.0) continue;  // degenerate corner, skip
            worst = std::max(worst, exact_accepted_law(pair, bias, mode).tv_exact);
        }
    }
    return worst;
}

BiasFunction sample_feasible_bias(const ProposalPair& pair, BiasMode mode, double c, Rng& rng) {
    const auto draw = [&](int x) {
        const double a = acceptance_prob(x, pair).value();
        if (mode == BiasMode::HalfBiased && a == 1.0) return 0.0;
        const ErrorInterval iv = feasible_range(a, c);
        return std::clamp(iv.lo + (iv.hi - iv.lo) * rng.next_double(), iv.lo, iv.hi);
    };
    const double e0 = draw(0);
    const double e1 = draw(1);
    return BiasFunction(e0, e1, c);
}

}  // namespace vrs
