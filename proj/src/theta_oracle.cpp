#include "posverify/theta_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "posverify/gaussian.hpp"
#include "posverify/parallel.hpp"
#include "posverify/random.hpp"

namespace posverify {

bool operator==(const CalibrationMeta& a, const CalibrationMeta& b)
{
    const auto sig = [](const SignalParamsd& s) {
        return std::tie(s.transmit_power, s.wavelength, s.alpha, s.noise_sigma, s.path_loss_exponent);
    };
    const auto reg = [](const Regiond& r) { return std::tie(r.x_min, r.x_max, r.y_min, r.y_max); };
    const auto fk = [](const FakingSearchConfigd& f) {
        return std::tie(f.exclusion_radius, f.grid_step, f.refine_iters);
    };
    return sig(a.signal) == sig(b.signal) && reg(a.region) == reg(b.region) && fk(a.faking) == fk(b.faking) &&
           a.num_x0 == b.num_x0 && a.num_X_per_x0 == b.num_X_per_x0 && a.seed == b.seed;
}

bool operator==(const ThetaTable& a, const ThetaTable& b)
{
    return a.n == b.n && a.theta_star == b.theta_star && a.quantiles == b.quantiles && a.samples == b.samples &&
           a.calibration_meta == b.calibration_meta;
}

double nearest_rank_quantile(std::span<const double> samples, int decile)
{
    if (samples.empty()) {
        throw std::invalid_argument("nearest_rank_quantile: empty sample");
    }
    if (decile < 1 || decile > 9) {
        throw std::invalid_argument("nearest_rank_quantile: decile must be in [1, 9]");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    // rank = ceil(q N), in integer arithmetic
    const std::size_t rank = std::max<std::size_t>(1, (static_cast<std::size_t>(decile) * sorted.size() + 9) / 10);
    return sorted[rank - 1];
}

double ThetaTable::quantile(int decile) const
{
    if (decile < 1 || decile > 9) {
        throw std::out_of_range("ThetaTable::quantile: decile must be in [1, 9]");
    }
    return quantiles[static_cast<std::size_t>(decile - 1)];
}

std::vector<double> ThetaTable::per_x0_means() const
{
    const auto per = static_cast<std::size_t>(calibration_meta.num_X_per_x0);
    std::vector<double> means(static_cast<std::size_t>(calibration_meta.num_x0), 0.0);
    for (std::size_t a = 0; a < means.size(); ++a) {
        double sum = 0.0;
        for (std::size_t b = 0; b < per; ++b) {
            sum += samples[a * per + b];
        }
        means[a] = sum / static_cast<double>(per);
    }
    return means;
}

ThetaTable estimate_theta_table(const SignalParamsd& params, const Regiond& region, int n, int num_x0,
                                int num_X_per_x0, const FakingSearchConfigd& config, std::uint64_t seed,
                                unsigned workers)
{
    region.validate();
    config.validate();
    if (n < 4) {
        throw std::invalid_argument("estimate_theta_table: n must be >= 4");
    }
    if (num_x0 < 1 || num_X_per_x0 < 1) {
        throw std::invalid_argument("estimate_theta_table: sample counts must be >= 1");
    }
    if (region.diagonal() <= config.exclusion_radius) {
        throw std::domain_error("estimate_theta_table: region too small for the exclusion ball");
    }

    const int half = (n + 1) / 2;
    std::vector<Point2d> x0s(static_cast<std::size_t>(num_x0));
    for (int a = 0; a < num_x0; ++a) {
        // Rejection keeps only positions with a non-empty faking region.
        Rng rng = make_rng(seed, StreamTag::CalibrationX0, static_cast<std::uint64_t>(a));
        Point2d x0;
        do {
            x0 = uniform_point(region, rng);
        } while (region.farthest_distance(x0) < config.exclusion_radius);
        x0s[static_cast<std::size_t>(a)] = x0;
    }

    const std::size_t cells = static_cast<std::size_t>(num_x0) * static_cast<std::size_t>(num_X_per_x0);
    ThetaTable table;
    table.n = n;
    table.samples.assign(cells, 0.0);
    parallel_for(cells, workers, [&](std::size_t cell) {
        const std::size_t a = cell / static_cast<std::size_t>(num_X_per_x0);
        Rng rng = make_rng(seed, StreamTag::CalibrationGenuine, cell);
        const PointSet2d genuine = uniform_points(region, half, rng);
        table.samples[cell] = optimize_fake_position(params, region, x0s[a], genuine, config).expected_deceived;
    });

    table.calibration_meta = CalibrationMeta{params, region, config, num_x0, num_X_per_x0, seed};
    const auto means = table.per_x0_means();
    table.theta_star = static_cast<int>(std::ceil(*std::max_element(means.begin(), means.end())));
    for (int d = 1; d <= 9; ++d) {
        table.quantiles[static_cast<std::size_t>(d - 1)] = nearest_rank_quantile(table.samples, d);
    }
    return table;
}

double theorem1_bound(int n, double theta_ceil_half)
{
    return static_cast<double>(n / 2) + theta_ceil_half;
}

double genuine_acceptance_prob(int n, int n0, double theta_star, double p)
{
    if (n0 < 2 || n0 > n) {
        throw std::invalid_argument("genuine_acceptance_prob: need 2 <= n0 <= n");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("genuine_acceptance_prob: p must lie strictly inside (0, 1)");
    }
    const double tau = (n + theta_star - 2.0 * n0 * p) / (2.0 * std::sqrt(p * (1.0 - p) * (n0 - 1)));
    return normal_cdf(-tau);
}

double threshold(int active_count, double theta)
{
    return (active_count + theta) / 2.0;
}

double truthful_acceptance_probability()
{
    return normal_interval_probability(-kAcceptanceSigmas, kAcceptanceSigmas);
}

} // namespace posverify
