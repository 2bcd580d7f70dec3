#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace vrs {

/// A validated probability value. Construction rejects NaN and anything
/// outside [0, 1], so downstream arithmetic never has to re-check.
class Probability {
public:
    Probability() : value_(0.0) {}
    explicit Probability(double value);

    double value() const { return value_; }
    operator double() const { return value_; }

private:
    double value_;
};

/// Bernoulli distribution over {0, 1}: mass(1) = p, mass(0) = 1 - p.
class BernoulliSpec {
public:
    BernoulliSpec() = default;
    explicit BernoulliSpec(Probability p) : p_(p) {}
    explicit BernoulliSpec(double p) : p_(Probability(p)) {}

    Probability p() const { return p_; }
    double mass(int x) const;

private:
    Probability p_;
};

/// Target/proposal pair for rejection sampling. The proposal parameter
/// must lie strictly inside (0, 1) so that it covers both outcomes and
/// the envelope constant stays finite.
class ProposalPair {
public:
    ProposalPair(BernoulliSpec target, BernoulliSpec proposal);
    ProposalPair(double p, double q) : ProposalPair(BernoulliSpec(p), BernoulliSpec(q)) {}

    const BernoulliSpec& target() const { return target_; }
    const BernoulliSpec& proposal() const { return proposal_; }
    double p() const { return target_.p(); }
    double q() const { return proposal_.p(); }

private:
    BernoulliSpec target_;
    BernoulliSpec proposal_;
};

/// One grid point of an empirical calibration curve.
struct CurvePoint {
    double p_true = 0.0;
    double p_hat = 0.0;
    std::int64_t n_samples = 0;
};

/// Empirical frequencies of outcome 1 over a strictly increasing grid
/// of true parameters. The substrate for STVD and calibration plots.
class CalibrationCurve {
public:
    CalibrationCurve() = default;
    explicit CalibrationCurve(std::vector<CurvePoint> points);

    /// Appends a point from raw counts; p_hat = ones / n_samples.
    void add_counts(double p_true, std::int64_t ones, std::int64_t n_samples);

    const std::vector<CurvePoint>& points() const { return points_; }
    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }

private:
    static void validate(const std::vector<CurvePoint>& points);

    std::vector<CurvePoint> points_;
};

/// Total variation distance between Bern(p1) and Bern(p2): |p1 - p2|.
double tv_distance(Probability p1, Probability p2);

/// Envelope constant M = max{p/q, (1-p)/(1-q)}. M >= 1 with equality
/// iff p = q.
double m_constant(const ProposalPair& pair);

/// Per-outcome acceptance probability A(x) = P(x) / (M Q(x)). The
/// ratios are normalized by their own maximum, so the trivial branch
/// evaluates to exactly 1.0.
Probability acceptance_prob(int x, const ProposalPair& pair);

/// Overall acceptance rate alpha = 1/M, cross-checked internally
/// against sum_x Q(x) A(x) at 1e-12.
Probability acceptance_rate(const ProposalPair& pair);

/// The unique outcome with A(x) < 1, or nullopt when p = q (both
/// acceptance probabilities are 1 and no biased event exists).
std::optional<int> nontrivial_event(const ProposalPair& pair);

/// Inverse of A(1) on the branch p <= q: returns the p solving
/// p(1-q) / (q(1-p)) = a. By convention a = 1 maps to p = q.
Probability invert_acceptance_for_one(Probability a, Probability q);

/// Sum of TV distances over the curve's grid: sum_i |p_hat_i - p_i|.
double stvd(const CalibrationCurve& curve);

}  // namespace vrs
