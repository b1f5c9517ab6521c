#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace posverify {

/// Standard normal CDF. Uses erfc on both tails so that small tail
/// probabilities keep full relative precision.
template <typename Scalar>
inline Scalar normal_cdf(Scalar x)
{
    using std::erfc;
    return Scalar(0.5) * erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

/// P(lo <= Z <= hi) for Z ~ N(0, 1), computed on the tail that avoids
/// catastrophic cancellation.
template <typename Scalar>
inline Scalar normal_interval_probability(Scalar lo, Scalar hi)
{
    if (!(hi > lo)) {
        return Scalar(0);
    }
    Scalar p;
    if (lo >= Scalar(0)) {
        p = normal_cdf(-lo) - normal_cdf(-hi);
    } else if (hi <= Scalar(0)) {
        p = normal_cdf(hi) - normal_cdf(lo);
    } else {
        p = Scalar(1) - normal_cdf(lo) - normal_cdf(-hi);
    }
    return std::clamp(p, Scalar(0), Scalar(1));
}

} // namespace posverify
