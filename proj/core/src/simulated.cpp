#include "vrs/simulated.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vrs/bernoulli.hpp"
#include "vrs/rng.hpp"

namespace vrs {

SimulatedBias SimulatedBias::unbiased(std::uint64_t seed) {
    SimulatedBias bias;
    bias.seed = seed;
    return bias;
}

SimulatedBias SimulatedBias::direct_offset(double e, std::uint64_t seed) {
    SimulatedBias bias;
    bias.direct_error = [e](double) { return e; };
    bias.seed = seed;
    return bias;
}

SimulatedBias SimulatedBias::half_biased(double e, std::uint64_t seed) {
    SimulatedBias bias;
    bias.accept_error = [e](double a, int) { return a < 1.0 ? e : 0.0; };
    bias.seed = seed;
    return bias;
}

SimulatedBias SimulatedBias::full_biased(double e, std::uint64_t seed) {
    SimulatedBias bias;
    bias.accept_error = [e](double, int) { return e; };
    bias.seed = seed;
    return bias;
}

SimulatedBackend::SimulatedBackend(SimulatedBias bias) : bias_(std::move(bias)) {}

std::string SimulatedBackend::complete(const PromptBundle& bundle) {
    const BundleMeta& meta = bundle.meta;

    std::uint64_t draw_seed = 0;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (meta.query_seed) {
            draw_seed = mix_seed({bias_.seed, *meta.query_seed,
                                  static_cast<std::uint64_t>(meta.attempt)});
        } else {
            draw_seed = mix_seed({bias_.seed, counter_++});
        }
    }
    Rng rng(draw_seed);

    if (bias_.malformed_rate > 0.0 && rng.next_bernoulli(bias_.malformed_rate)) {
        return "Output:\nthis is not a valid answer";
    }

    switch (meta.kind) {
        case ParseKind::Binary01: {
            if (meta.p < 0.0 || meta.p > 1.0) {
                throw std::invalid_argument("simulated Binary01 bundle lacks target p");
            }
            const double p_eff =
                std::clamp(meta.p + bias_.direct_error(meta.p), 0.0, 1.0);
            return conforming_response(meta.kind, rng.next_bernoulli(p_eff) ? "1" : "0");
        }
        case ParseKind::AcceptTF: {
            if (meta.p < 0.0 || meta.q <= 0.0 || meta.q >= 1.0 || (meta.x != 0 && meta.x != 1)) {
                throw std::invalid_argument("simulated AcceptTF bundle lacks (p, q, x)");
            }
            const double a = acceptance_prob(meta.x, ProposalPair(meta.p, meta.q)).value();
            const double a_eff = std::clamp(a + bias_.accept_error(a, meta.x), 0.0, 1.0);
            return conforming_response(meta.kind, rng.next_bernoulli(a_eff) ? "T" : "F");
        }
        case ParseKind::YesNo: {
            if (meta.n_samples <= 0 || meta.ones < 0 || meta.p < 0.0) {
                throw std::invalid_argument("simulated YesNo bundle lacks dataset provenance");
            }
            if (bias_.judge == SimulatedBias::Judge::Random) {
                return conforming_response(meta.kind, rng.next_bernoulli(0.5) ? "Yes" : "No");
            }
            const double freq = static_cast<double>(meta.ones) /
                                static_cast<double>(meta.n_samples);
            const bool accept = std::abs(freq - meta.p) <= bias_.judge_tol;
            return conforming_response(meta.kind, accept ? "Yes" : "No");
        }
    }
    throw std::logic_error("unreachable parse kind");
}

}  // namespace vrs
