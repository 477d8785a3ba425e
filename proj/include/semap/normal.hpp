#pragma once

#include <cmath>

// Standard normal pdf/cdf helpers used by the probit likelihood. The log-cdf
// and the ratio phi/Phi must stay finite deep in the lower tail, where erfc
// underflows; an asymptotic Mills-ratio expansion covers that regime.

namespace semap {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double norm_pdf(double z) {
    return std::exp(-0.5 * z * z - 0.5 * kLog2Pi);
}

inline double norm_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

namespace detail {

// 1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - 945/z^10, the Mills-ratio series.
inline double mills_series(double z) {
    const double w = 1.0 / (z * z);
    return 1.0 + w * (-1.0 + w * (3.0 + w * (-15.0 + w * (105.0 - 945.0 * w))));
}

}  // namespace detail

/// log Phi(z), stable for arbitrarily negative z.
inline double norm_log_cdf(double z) {
    if (z > -30.0) {
        return std::log(norm_cdf(z));
    }
    // Phi(z) = phi(z)/(-z) * mills_series(z) for z -> -inf
    return -0.5 * z * z - 0.5 * kLog2Pi - std::log(-z) + std::log(detail::mills_series(z));
}

/// phi(z)/Phi(z), the inverse Mills ratio; ~ -z in the lower tail.
inline double norm_pdf_over_cdf(double z) {
    if (z > -30.0) {
        return norm_pdf(z) / norm_cdf(z);
    }
    return -z / detail::mills_series(z);
}

}  // namespace semap
