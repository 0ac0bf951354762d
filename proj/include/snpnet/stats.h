#pragma once

#include <algorithm>
#include <cmath>

namespace snpnet::stats
{

inline constexpr double kMinP = 1e-300;

/// Upper tail of chi-square with 1 df, floored at kMinP.
inline double chi2_1df_sf(double x)
{
    if (!(x > 0.0))
    {
        return 1.0;
    }
    return std::max(kMinP, std::erfc(std::sqrt(0.5 * x)));
}

/// Upper tail of chi-square with 2 df.
inline double chi2_2df_sf(double x)
{
    if (!(x > 0.0))
    {
        return 1.0;
    }
    return std::max(kMinP, std::exp(-0.5 * x));
}

/// 2 * (1 - Phi(|z|)) through erfc so the tail does not cancel to 0.
inline double two_sided_normal_p(double z)
{
    return std::max(kMinP, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

}  // namespace snpnet::stats
