#include "vrs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrs {

double binom_log_pmf(std::int64_t k, std::int64_t n, double p) {
    if (n < 0 || k < 0 || k > n) {
        throw std::invalid_argument("binom_log_pmf requires 0 <= k <= n");
    }
    if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("binom_log_pmf requires p in [0, 1]");
    }
    if (p == 0.0) return k == 0 ? 0.0 : -HUGE_VAL;
    if (p == 1.0) return k == n ? 0.0 : -HUGE_VAL;
    const double dk = static_cast<double>(k);
    const double dn = static_cast<double>(n);
    return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0) +
           dk * std::log(p) + (dn - dk) * std::log1p(-p);
}

double binom_cdf(std::int64_t k, std::int64_t n, double p) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    // Sum whichever tail is shorter and complement if needed.
    if (k + 1 <= n - k) {
        double sum = 0.0;
        for (std::int64_t i = 0; i <= k; ++i) sum += std::exp(binom_log_pmf(i, n, p));
        return std::min(sum, 1.0);
    }
    double sum = 0.0;
    for (std::int64_t i = k + 1; i <= n; ++i) sum += std::exp(binom_log_pmf(i, n, p));
    return std::max(1.0 - sum, 0.0);
}

double binom_two_sided_pvalue(std::int64_t k, std::int64_t n, double p) {
    if (n <= 0 || k < 0 || k > n) {
        throw std::invalid_argument("binom_two_sided_pvalue requires 0 <= k <= n, n > 0");
    }
    if (p == 0.0) return k == 0 ? 1.0 : 0.0;
    if (p == 1.0) return k == n ? 1.0 : 0.0;
    const double lower = binom_cdf(k, n, p);
    const double upper = 1.0 - binom_cdf(k - 1, n, p);
    return std::min(1.0, 2.0 * std::min(lower, upper));
}

}  // namespace vrs
