#pragma once

#include <cstdint>
#include <random>

#include "posverify/geometry.hpp"

namespace posverify {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream domains; every random stream in the library is keyed by one.
enum class StreamTag : std::uint64_t {
    CalibrationX0 = 1,
    CalibrationGenuine = 2,
    Trial = 3,
    Deployment = 4,
    Channel = 5,
    Calibration = 6,
};

/// Derives an independent seed from (master, domain, index). The result does
/// not depend on the order in which streams are requested.
inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index = 0)
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return splitmix64(h ^ index);
}

inline Rng make_rng(std::uint64_t master, StreamTag tag, std::uint64_t index = 0)
{
    return Rng(derive_seed(master, tag, index));
}

template <typename Scalar>
Point<Scalar> uniform_point(const Region<Scalar>& region, Rng& rng)
{
    std::uniform_real_distribution<Scalar> ux(region.x_min, region.x_max);
    std::uniform_real_distribution<Scalar> uy(region.y_min, region.y_max);
    const Scalar x = ux(rng);
    const Scalar y = uy(rng);
    return {x, y};
}

template <typename Scalar>
PointSet<Scalar> uniform_points(const Region<Scalar>& region, Eigen::Index count, Rng& rng)
{
    PointSet<Scalar> pts(2, count);
    for (Eigen::Index j = 0; j < count; ++j) {
        pts.col(j) = uniform_point(region, rng);
    }
    return pts;
}

} // namespace posverify
