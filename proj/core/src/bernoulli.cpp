#include "vrs/bernoulli.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vrs {

Probability::Probability(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {  // NaN fails both comparisons
        throw std::invalid_argument("probability must lie in [0, 1], got " +
                                    std::to_string(value));
    }
}

double BernoulliSpec::mass(int x) const {
    if (x != 0 && x != 1) {
        throw std::invalid_argument("Bernoulli outcome must be 0 or 1");
    }
    return x == 1 ? p_.value() : 1.0 - p_.value();
}

ProposalPair::ProposalPair(BernoulliSpec target, BernoulliSpec proposal)
    : target_(target), proposal_(proposal) {
    const double q = proposal_.p();
    if (q <= 0.0 || q >= 1.0) {
        throw std::invalid_argument("proposal parameter must lie strictly in (0, 1), got " +
                                    std::to_string(q));
    }
}

CalibrationCurve::CalibrationCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
    validate(points_);
}

void CalibrationCurve::add_counts(double p_true, std::int64_t ones, std::int64_t n_samples) {
    if (n_samples <= 0 || ones < 0 || ones > n_samples) {
        throw std::invalid_argument("curve counts must satisfy 0 <= ones <= n_samples, n > 0");
    }
    CurvePoint pt{p_true, static_cast<double>(ones) / static_cast<double>(n_samples), n_samples};
    points_.push_back(pt);
    validate(points_);
}

void CalibrationCurve::validate(const std::vector<CurvePoint>& points) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        (void)Probability(points[i].p_true);
        (void)Probability(points[i].p_hat);
        if (points[i].n_samples <= 0) {
            throw std::invalid_argument("curve point needs a positive sample count");
        }
        if (i > 0 && !(points[i - 1].p_true < points[i].p_true)) {
            throw std::invalid_argument("curve grid must be strictly increasing in p_true");
        }
    }
}

double tv_distance(Probability p1, Probability p2) {
    return std::abs(p1.value() - p2.value());
}

namespace {

struct Ratios {
    double r1;  // p / q
    double r0;  // (1-p) / (1-q)
    double m;   // max of the two
};

Ratios density_ratios(const ProposalPair& pair) {
    const double p = pair.p();
    const double q = pair.q();
    Ratios r;
    r.r1 = p / q;
    r.r0 = (1.0 - p) / (1.0 - q);
    r.m = std::max(r.r1, r.r0);
    return r;
}

}  // namespace

double m_constant(const ProposalPair& pair) {
    return density_ratios(pair).m;
}

Probability acceptance_prob(int x, const ProposalPair& pair) {
    if (x != 0 && x != 1) {
        throw std::invalid_argument("Bernoulli outcome must be 0 or 1");
    }
    const Ratios r = density_ratios(pair);
    // Dividing each ratio by their max keeps the trivial branch at
    // exactly 1.0 and the other in [0, 1] without rounding excursions.
    return Probability(x == 1 ? r.r1 / r.m : r.r0 / r.m);
}

Probability acceptance_rate(const ProposalPair& pair) {
    const Ratios r = density_ratios(pair);
    const double alpha = 1.0 / r.m;
    const double by_sum =
        pair.q() * (r.r1 / r.m) + (1.0 - pair.q()) * (r.r0 / r.m);
    if (std::abs(alpha - by_sum) > 1e-12) {
        throw std::logic_error("acceptance rate identity sum Q(x)A(x) = 1/M violated");
    }
    return Probability(alpha);
}

std::optional<int> nontrivial_event(const ProposalPair& pair) {
    const Ratios r = density_ratios(pair);
    const double a1 = r.r1 / r.m;
    const double a0 = r.r0 / r.m;
    if (a0 < 1.0) return 0;
    if (a1 < 1.0) return 1;
    return std::nullopt;
}

Probability invert_acceptance_for_one(Probability a, Probability q) {
    const double qv = q.value();
    if (qv <= 0.0 || qv >= 1.0) {
        throw std::invalid_argument("proposal parameter must lie strictly in (0, 1)");
    }
    if (a.value() == 1.0) {
        return Probability(qv);  // smallest p with A(1) = 1
    }
    const double av = a.value();
    return Probability(av * qv / ((1.0 - qv) + av * qv));
}

double stvd(const CalibrationCurve& curve) {
    if (curve.empty()) {
        throw std::invalid_argument("STVD of an empty calibration curve is undefined");
    }
    double sum = 0.0;
    for (const CurvePoint& pt : curve.points()) {
        sum += std::abs(pt.p_hat - pt.p_true);
    }
    return sum;
}

}  // namespace vrs
