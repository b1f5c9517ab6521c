#pragma once

// Faking-position strategy of a malicious node: pick the claimed position
// that maximizes the expected number of genuine receivers whose 3-sigma link
// test it passes.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "posverify/geometry.hpp"
#include "posverify/rss_channel.hpp"

namespace posverify {

template <typename Scalar>
struct FakingSearchConfig {
    Scalar exclusion_radius = Scalar(1);
    Scalar grid_step = Scalar(1);
    int refine_iters = 30;

    void validate() const
    {
        if (!(exclusion_radius > Scalar(0))) {
            throw std::invalid_argument("FakingSearchConfig: exclusion_radius must be positive");
        }
        if (!(grid_step > Scalar(0))) {
            throw std::invalid_argument("FakingSearchConfig: grid_step must be positive");
        }
        if (refine_iters < 1) {
            throw std::invalid_argument("FakingSearchConfig: refine_iters must be >= 1");
        }
    }

    /// Exclusion ball of 15% of the region diagonal, grid of 40 cells along
    /// the longer side.
    static FakingSearchConfig defaults_for(const Region<Scalar>& region)
    {
        FakingSearchConfig c;
        c.exclusion_radius = Scalar(0.15) * region.diagonal();
        c.grid_step = std::max(region.width(), region.height()) / Scalar(40);
        c.refine_iters = 30;
        return c;
    }
};

using FakingSearchConfigd = FakingSearchConfig<double>;

template <typename Scalar>
struct FakingOutcome {
    Point<Scalar> fake_position;
    Scalar expected_deceived = Scalar(0);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> per_node_probs;
    // Best value after the candidate sweep, then after each refinement move.
    std::vector<Scalar> refinement_trace;
};

using FakingOutcomed = FakingOutcome<double>;

/// Expected number of deceived genuine nodes as a function of the claimed
/// position, for a fixed true position and genuine layout.
template <typename Scalar>
class DeceptionObjective {
public:
    DeceptionObjective(const SignalParams<Scalar>& params, const Point<Scalar>& true_position,
                       const PointSet<Scalar>& genuine)
        : params_(params), genuine_(genuine)
    {
        if (genuine.cols() == 0) {
            throw std::domain_error("DeceptionObjective: genuine set is empty");
        }
        true_power_.resize(genuine.cols());
        for (Eigen::Index j = 0; j < genuine.cols(); ++j) {
            true_power_(j) = ideal_received_power(params_, (genuine.col(j) - true_position).norm());
        }
    }

    Scalar probability(Eigen::Index j, const Point<Scalar>& fake) const
    {
        const Scalar claimed = (genuine_.col(j) - fake).norm();
        if (!(claimed > Scalar(0))) {
            // claiming a receiver's own position is never approved
            return Scalar(0);
        }
        return detail::deception_probability_for_powers(params_, true_power_(j),
                                                         detail::power_at(params_, claimed));
    }

    Scalar operator()(const Point<Scalar>& fake) const
    {
        Scalar sum(0);
        for (Eigen::Index j = 0; j < genuine_.cols(); ++j) {
            sum += probability(j, fake);
        }
        return sum;
    }

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> per_node(const Point<Scalar>& fake) const
    {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(genuine_.cols());
        for (Eigen::Index j = 0; j < genuine_.cols(); ++j) {
            out(j) = probability(j, fake);
        }
        return out;
    }

private:
    SignalParams<Scalar> params_;
    const PointSet<Scalar>& genuine_;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> true_power_;
};

/// Expected number of genuine nodes deceived when the node at true_position
/// claims fake_position.
template <typename Scalar>
Scalar theta_for_fake(const SignalParams<Scalar>& params, const Point<Scalar>& true_position,
                      const Point<Scalar>& fake_position, const PointSet<Scalar>& genuine)
{
    if (genuine.cols() == 0) {
        throw std::domain_error("theta_for_fake: genuine set is empty");
    }
    Scalar sum(0);
    for (Eigen::Index j = 0; j < genuine.cols(); ++j) {
        const Scalar d_true = (genuine.col(j) - true_position).norm();
        const Scalar d_claim = (genuine.col(j) - fake_position).norm();
        sum += d_claim > Scalar(0) ? deception_probability(params, d_true, d_claim) : Scalar(0);
    }
    return sum;
}

namespace detail {

// Strict ordering used for every comparison of candidate positions: higher
// value first, ties broken by lower x, then lower y.
template <typename Scalar>
struct ScoredPoint {
    Point<Scalar> p;
    Scalar value;

    bool better_than(const ScoredPoint& o) const
    {
        if (value != o.value) {
            return value > o.value;
        }
        if (p.x() != o.p.x()) {
            return p.x() < o.p.x();
        }
        return p.y() < o.p.y();
    }
};

inline constexpr int kRefineStarts = 8;
inline constexpr int kCirclePointsPerNode = 16;
inline constexpr int kStartSeparationSteps = 4;
inline constexpr int kExclusionRingPoints = 64;

} // namespace detail

/// Searches the region minus the open exclusion disc around true_position for
/// the claimed position with the largest expected deception.
///
/// Candidates are a regular grid, the second intersection of every pair of
/// "distance-consistent" circles (the reflection of the true position across
/// the line through two genuine nodes) and a ring of points on each such
/// circle, plus a ring on the exclusion boundary. The best few well-separated
/// candidates are then refined by pattern search.
template <typename Scalar>
FakingOutcome<Scalar> optimize_fake_position(const SignalParams<Scalar>& params, const Region<Scalar>& region,
                                             const Point<Scalar>& true_position, const PointSet<Scalar>& genuine,
                                             const FakingSearchConfig<Scalar>& config)
{
    using Scored = detail::ScoredPoint<Scalar>;

    region.validate();
    config.validate();
    if (!region.contains(true_position)) {
        throw std::domain_error("optimize_fake_position: true position outside region");
    }
    if (region.farthest_distance(true_position) < config.exclusion_radius) {
        throw std::domain_error("optimize_fake_position: region lies inside the exclusion ball");
    }
    const DeceptionObjective<Scalar> objective(params, true_position, genuine);

    const auto feasible = [&](const Point<Scalar>& p) {
        return region.contains(p) && (p - true_position).norm() >= config.exclusion_radius;
    };

    // Steps into the exclusion disc are pushed radially onto its boundary, where
    // the optimum often lies.
    const auto project = [&](Point<Scalar> p) {
        p.x() = std::clamp(p.x(), region.x_min, region.x_max);
        p.y() = std::clamp(p.y(), region.y_min, region.y_max);
        const Point<Scalar> rel = p - true_position;
        const Scalar r = rel.norm();
        if (r < config.exclusion_radius && r > Scalar(0)) {
            p = true_position + rel * (config.exclusion_radius / r);
        }
        return p;
    };

    std::vector<Point<Scalar>> candidates;

    const auto nx = std::max<long>(1, static_cast<long>(std::ceil(region.width() / config.grid_step)));
    const auto ny = std::max<long>(1, static_cast<long>(std::ceil(region.height() / config.grid_step)));
    candidates.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (long i = 0; i <= nx; ++i) {
        const Scalar x = i == nx ? region.x_max : region.x_min + region.width() * Scalar(i) / Scalar(nx);
        for (long k = 0; k <= ny; ++k) {
            const Scalar y = k == ny ? region.y_max : region.y_min + region.height() * Scalar(k) / Scalar(ny);
            candidates.emplace_back(x, y);
        }
    }

    const Eigen::Index n0 = genuine.cols();
    for (Eigen::Index j = 0; j < n0; ++j) {
        const Point<Scalar> g = genuine.col(j);
        for (Eigen::Index k = j + 1; k < n0; ++k) {
            const Point<Scalar> dir = genuine.col(k) - g;
            const Scalar len2 = dir.squaredNorm();
            if (!(len2 > Scalar(0))) {
                continue;
            }
            const Point<Scalar> foot = g + dir * (dir.dot(true_position - g) / len2);
            candidates.push_back(Scalar(2) * foot - true_position);
        }
        const Point<Scalar> rel = true_position - g;
        const Scalar radius = rel.norm();
        const Scalar base = std::atan2(rel.y(), rel.x());
        for (int s = 1; s < detail::kCirclePointsPerNode; ++s) {
            const Scalar a = base + Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(s) / Scalar(detail::kCirclePointsPerNode);
            candidates.emplace_back(g.x() + radius * std::cos(a), g.y() + radius * std::sin(a));
        }
    }

    for (int s = 0; s < detail::kExclusionRingPoints; ++s) {
        const Scalar a = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(s) / Scalar(detail::kExclusionRingPoints);
        candidates.emplace_back(true_position.x() + config.exclusion_radius * std::cos(a),
                                true_position.y() + config.exclusion_radius * std::sin(a));
    }

    // Corners guarantee a feasible candidate when the grid is coarse.
    candidates.emplace_back(region.x_min, region.y_min);
    candidates.emplace_back(region.x_min, region.y_max);
    candidates.emplace_back(region.x_max, region.y_min);
    candidates.emplace_back(region.x_max, region.y_max);

    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (feasible(c)) {
            scored.push_back({c, objective(c)});
        }
    }
    const auto order = [](const Scored& a, const Scored& b) { return a.better_than(b); };
    std::sort(scored.begin(), scored.end(), order);

    // Starts are taken best-first but kept apart so that separate basins each
    // get refined.
    const Scalar separation = Scalar(detail::kStartSeparationSteps) * config.grid_step;
    std::vector<Scored> seeds;
    for (const auto& c : scored) {
        if (seeds.size() == static_cast<std::size_t>(detail::kRefineStarts)) {
            break;
        }
        const bool distinct = std::all_of(seeds.begin(), seeds.end(),
                                          [&](const Scored& s) { return (s.p - c.p).norm() >= separation; });
        if (distinct) {
            seeds.push_back(c);
        }
    }
    const std::size_t starts = seeds.size();

    FakingOutcome<Scalar> out;
    Scored best = scored.front();
    out.refinement_trace.push_back(best.value);

    static const int dirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (std::size_t s = 0; s < starts; ++s) {
        Scored cur = seeds[s];
        Scalar step = config.grid_step / Scalar(2);
        for (int it = 0; it < config.refine_iters; ++it) {
            Scored move = cur;
            for (const auto& d : dirs) {
                const Point<Scalar> q = project(cur.p + step * Point<Scalar>(Scalar(d[0]), Scalar(d[1])));
                if (!feasible(q)) {
                    continue;
                }
                const Scored cand{q, objective(q)};
                if (cand.value > move.value) {
                    move = cand;
                }
            }
            if (move.value > cur.value) {
                cur = move;
            } else {
                step /= Scalar(2);
            }
            if (cur.better_than(best)) {
                best = cur;
            }
            out.refinement_trace.push_back(best.value);
        }
    }

    out.fake_position = best.p;
    out.per_node_probs = objective.per_node(best.p);
    out.expected_deceived = out.per_node_probs.sum();
    return out;
}

} // namespace posverify
