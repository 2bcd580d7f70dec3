#pragma once

#include <cstdint>

namespace vrs {

/// log of the Binomial(n, p) pmf at k, via lgamma.
double binom_log_pmf(std::int64_t k, std::int64_t n, double p);

/// P(X <= k) for X ~ Binomial(n, p), summed over the smaller tail.
double binom_cdf(std::int64_t k, std::int64_t n, double p);

/// Exact two-sided binomial test p-value: 2 * min(P(X <= k), P(X >= k)),
/// capped at 1. Degenerate p in {0, 1} yields 1 when k matches the only
/// possible outcome and 0 otherwise.
double binom_two_sided_pvalue(std::int64_t k, std::int64_t n, double p);

}  // namespace vrs
