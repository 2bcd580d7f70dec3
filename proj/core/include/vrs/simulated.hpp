#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>

#include "vrs/backend.hpp"
#include "vrs/prompts.hpp"

namespace vrs {

/// Deterministic biased-sampler model used in place of a live LLM.
/// Direct queries sample Bern(clip(p + direct_error(p))); accept/reject
/// queries sample Bern(clip(A(x) + accept_error(A(x), x))); recognition
/// queries are judged by binomial concentration or at random.
struct SimulatedBias {
    enum class Judge { Concentration, Random };

    std::function<double(double)> direct_error = [](double) { return 0.0; };
    std::function<double(double, int)> accept_error = [](double, int) { return 0.0; };
    Judge judge = Judge::Concentration;
    double judge_tol = 0.05;
    /// Fraction of responses replaced by non-conforming text, for
    /// exercising retry paths.
    double malformed_rate = 0.0;
    std::uint64_t seed = 0;

    static SimulatedBias unbiased(std::uint64_t seed);
    /// Constant additive error on direct sampling.
    static SimulatedBias direct_offset(double e, std::uint64_t seed);
    /// Additive error on the acceptance probability, non-trivial branch
    /// only (A(x) < 1).
    static SimulatedBias half_biased(double e, std::uint64_t seed);
    /// Additive error on the acceptance probability, both branches.
    static SimulatedBias full_biased(double e, std::uint64_t seed);
};

/// TextBackend that answers prompt bundles from their provenance
/// metadata. Responses are a pure function of (bias, seed, call order)
/// or, when the bundle carries a query seed, of the bundle alone --
/// which is what makes parallel runs order-free.
class SimulatedBackend final : public TextBackend {
public:
    explicit SimulatedBackend(SimulatedBias bias);

    std::string complete(const PromptBundle& bundle) override;
    std::string model_label() const override { return "simulated"; }

private:
    SimulatedBias bias_;
    std::uint64_t counter_ = 0;
    std::mutex mutex_;
};

}  // namespace vrs
