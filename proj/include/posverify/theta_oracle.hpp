#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "posverify/adversary.hpp"
#include "posverify/geometry.hpp"
#include "posverify/rss_channel.hpp"

namespace posverify {

/// Everything needed to recompute a ThetaTable bit for bit.
struct CalibrationMeta {
    SignalParamsd signal;
    Regiond region;
    FakingSearchConfigd faking;
    int num_x0 = 25;
    int num_X_per_x0 = 20;
    std::uint64_t seed = 0;
};

bool operator==(const CalibrationMeta& a, const CalibrationMeta& b);

/// Calibrated deception budget for a network of n nodes, computed against
/// ceil(n/2) genuine nodes.
struct ThetaTable {
    int n = 0;
    int theta_star = 0;
    std::array<double, 9> quantiles{}; // q = 0.1 ... 0.9
    std::vector<double> samples;       // index = x0_index * num_X_per_x0 + X_index
    CalibrationMeta calibration_meta;

    /// q = decile / 10, decile in [1, 9].
    double quantile(int decile) const;

    /// Mean of the samples belonging to each x0 draw.
    std::vector<double> per_x0_means() const;
};

bool operator==(const ThetaTable& a, const ThetaTable& b);

/// Nearest-rank quantile of an unsorted sample, q = decile / 10.
double nearest_rank_quantile(std::span<const double> samples, int decile);

/// Monte-Carlo calibration. For each of num_x0 uniform malicious positions
/// and num_X_per_x0 uniform layouts of ceil(n/2) genuine nodes, records the
/// optimized expected deception. Cells draw from streams keyed by (seed, cell)
/// so the table does not depend on the worker count.
ThetaTable estimate_theta_table(const SignalParamsd& params, const Regiond& region, int n, int num_x0,
                                int num_X_per_x0, const FakingSearchConfigd& config, std::uint64_t seed,
                                unsigned workers = 0);

/// Upper bound on the expected acceptance count of a malicious node when at
/// least half the network is genuine: floor(n/2) + theta.
double theorem1_bound(int n, double theta_ceil_half);

/// Normal approximation to P(approvals of a genuine node >= (n + theta)/2)
/// under the worst-case adversary.
double genuine_acceptance_prob(int n, int n0, double theta_star, double p);

/// (active_count + theta) / 2.
double threshold(int active_count, double theta);

/// Approval probability of a truthful sender: 2 Phi(3) - 1.
double truthful_acceptance_probability();

} // namespace posverify
