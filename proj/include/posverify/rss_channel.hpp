#pragma once

// Received-signal-strength channel: generalized Friis path loss with additive
// Gaussian noise on the received power, distance estimation from a reading,
// and the 3-sigma acceptance test applied to every link.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "posverify/gaussian.hpp"

namespace posverify {

/// Half-width of the acceptance band on received power, in units of sigma.
inline constexpr double kAcceptanceSigmas = 3.0;

template <typename Scalar>
struct SignalParams {
    Scalar transmit_power = Scalar(1);
    Scalar wavelength = Scalar(0.125);
    Scalar alpha = Scalar(0.125) / (Scalar(4) * std::numbers::pi_v<Scalar>);
    Scalar noise_sigma = Scalar(0);
    Scalar path_loss_exponent = Scalar(2);

    /// Builds a validated parameter set; alpha is derived from the wavelength.
    static SignalParams make(Scalar transmit_power, Scalar wavelength, Scalar noise_sigma,
                             Scalar path_loss_exponent = Scalar(2))
    {
        if (!(transmit_power > Scalar(0))) {
            throw std::invalid_argument("SignalParams: transmit_power must be positive");
        }
        if (!(wavelength > Scalar(0))) {
            throw std::invalid_argument("SignalParams: wavelength must be positive");
        }
        if (!(noise_sigma >= Scalar(0))) {
            throw std::invalid_argument("SignalParams: noise_sigma must be non-negative");
        }
        if (!(path_loss_exponent >= Scalar(2) && path_loss_exponent <= Scalar(4))) {
            throw std::invalid_argument("SignalParams: path_loss_exponent must lie in [2, 4]");
        }
        SignalParams p;
        p.transmit_power = transmit_power;
        p.wavelength = wavelength;
        p.alpha = wavelength / (Scalar(4) * std::numbers::pi_v<Scalar>);
        p.noise_sigma = noise_sigma;
        p.path_loss_exponent = path_loss_exponent;
        return p;
    }

    SignalParams with_noise(Scalar sigma) const
    {
        return make(transmit_power, wavelength, sigma, path_loss_exponent);
    }
};

using SignalParamsd = SignalParams<double>;

template <typename Scalar>
struct AcceptanceInterval {
    Scalar lower;
    Scalar upper; // +infinity when the -3 sigma power bound is non-positive

    bool contains(Scalar d) const { return lower <= d && d <= upper; }
    bool bounded() const { return std::isfinite(upper); }
};

enum class Verdict { Approve, Accuse };

namespace detail {

template <typename Scalar>
inline void require_positive_distance(Scalar d, const char* what)
{
    if (!(d > Scalar(0))) {
        throw std::domain_error(std::string(what) + ": distance must be positive");
    }
}

// Inverse of the path-loss law for a strictly positive power.
template <typename Scalar>
inline Scalar distance_for_power(const SignalParams<Scalar>& p, Scalar power)
{
    using std::pow;
    using std::sqrt;
    const Scalar ratio = p.transmit_power / power;
    if (p.path_loss_exponent == Scalar(2)) {
        return p.alpha * sqrt(ratio);
    }
    return p.alpha * pow(ratio, Scalar(1) / p.path_loss_exponent);
}

template <typename Scalar>
inline Scalar power_at(const SignalParams<Scalar>& p, Scalar d)
{
    using std::pow;
    const Scalar r = p.alpha / d;
    if (p.path_loss_exponent == Scalar(2)) {
        return p.transmit_power * r * r;
    }
    return p.transmit_power * pow(r, p.path_loss_exponent);
}

} // namespace detail

/// S^s (alpha / d)^m.
template <typename Scalar>
inline Scalar ideal_received_power(const SignalParams<Scalar>& p, Scalar distance)
{
    detail::require_positive_distance(distance, "ideal_received_power");
    return detail::power_at(p, distance);
}

/// Ideal power plus a caller-supplied noise sample. May be non-positive.
template <typename Scalar>
inline Scalar noisy_received_power(const SignalParams<Scalar>& p, Scalar distance, Scalar noise_draw)
{
    return ideal_received_power(p, distance) + noise_draw;
}

/// Inverts the path-loss law. A non-positive reading has no distance.
template <typename Scalar>
inline std::optional<Scalar> estimate_distance(const SignalParams<Scalar>& p, Scalar received_power)
{
    if (!(received_power > Scalar(0))) {
        return std::nullopt;
    }
    return detail::distance_for_power(p, received_power);
}

/// Range of estimated distances consistent with a claimed distance: the
/// distances whose ideal power lies within 3 sigma of the claimed distance's
/// ideal power. For m = 2 this is d~ {1 +- 3 sigma d~^2 / (alpha^2 S^s)}^(-1/2).
template <typename Scalar>
inline AcceptanceInterval<Scalar> acceptance_interval(const SignalParams<Scalar>& p, Scalar claimed_distance)
{
    detail::require_positive_distance(claimed_distance, "acceptance_interval");
    const Scalar claimed_power = detail::power_at(p, claimed_distance);
    const Scalar band = Scalar(kAcceptanceSigmas) * p.noise_sigma;
    if (band == Scalar(0)) {
        return {claimed_distance, claimed_distance};
    }
    const Scalar lower = detail::distance_for_power(p, claimed_power + band);
    const Scalar weakest = claimed_power - band;
    const Scalar upper = weakest > Scalar(0) ? detail::distance_for_power(p, weakest)
                                             : std::numeric_limits<Scalar>::infinity();
    return {lower, upper};
}

/// Per-link test run by a receiver. Every reading yields a verdict; readings
/// with no distance estimate are accused.
template <typename Scalar>
inline Verdict link_verdict(const SignalParams<Scalar>& p, Scalar claimed_distance, Scalar received_power)
{
    detail::require_positive_distance(claimed_distance, "link_verdict");
    if (!(received_power > Scalar(0))) {
        return Verdict::Accuse;
    }
    // The distance estimate is monotone in the reading, so the interval test is
    // done on powers, which keeps exact claims exact when sigma is zero.
    const Scalar expected = detail::power_at(p, claimed_distance);
    const Scalar band = Scalar(kAcceptanceSigmas) * p.noise_sigma;
    return received_power >= expected - band && received_power <= expected + band ? Verdict::Approve
                                                                                  : Verdict::Accuse;
}

/// Noise interval [lo, hi] (in watts) for which a sender at true_distance
/// claiming claimed_distance passes link_verdict.
template <typename Scalar>
struct NoiseWindow {
    Scalar lo;
    Scalar hi;
};

namespace detail {

template <typename Scalar>
inline NoiseWindow<Scalar> noise_window_for_powers(const SignalParams<Scalar>& p, Scalar true_power,
                                                   Scalar claimed_power)
{
    const Scalar band = Scalar(kAcceptanceSigmas) * p.noise_sigma;
    // d^ >= lower  <=>  S^r <= claimed + band
    // d^ <= upper  <=>  S^r >= claimed - band; S^r > 0 is always required
    const Scalar weakest = claimed_power - band;
    const Scalar lo = (weakest > Scalar(0) ? weakest : Scalar(0)) - true_power;
    const Scalar hi = claimed_power + band - true_power;
    return {lo, hi};
}

// Beyond this many sigmas the normal tail underflows to zero in double.
inline constexpr double kNegligibleTail = 38.5;

template <typename Scalar>
inline Scalar deception_probability_for_powers(const SignalParams<Scalar>& p, Scalar true_power,
                                               Scalar claimed_power)
{
    if (p.noise_sigma == Scalar(0)) {
        return true_power == claimed_power ? Scalar(1) : Scalar(0);
    }
    // Work in sigma units so the band edges do not cancel against the powers.
    const Scalar offset = (claimed_power - true_power) / p.noise_sigma;
    const Scalar k = Scalar(kAcceptanceSigmas);
    const Scalar lo = claimed_power > k * p.noise_sigma ? offset - k : -true_power / p.noise_sigma;
    const Scalar hi = offset + k;
    if (lo > Scalar(kNegligibleTail) || hi < Scalar(-kNegligibleTail)) {
        return Scalar(0);
    }
    return normal_interval_probability(lo, hi);
}

} // namespace detail

template <typename Scalar>
inline NoiseWindow<Scalar> accepting_noise_window(const SignalParams<Scalar>& p, Scalar true_distance,
                                                  Scalar claimed_distance)
{
    detail::require_positive_distance(true_distance, "accepting_noise_window");
    detail::require_positive_distance(claimed_distance, "accepting_noise_window");
    return detail::noise_window_for_powers(p, detail::power_at(p, true_distance),
                                           detail::power_at(p, claimed_distance));
}

/// Probability that a sender located at true_distance and claiming
/// claimed_distance is approved by the receiver.
template <typename Scalar>
inline Scalar deception_probability(const SignalParams<Scalar>& p, Scalar true_distance, Scalar claimed_distance)
{
    detail::require_positive_distance(true_distance, "deception_probability");
    detail::require_positive_distance(claimed_distance, "deception_probability");
    if (p.noise_sigma == Scalar(0)) {
        return true_distance == claimed_distance ? Scalar(1) : Scalar(0);
    }
    return detail::deception_probability_for_powers(p, detail::power_at(p, true_distance),
                                                    detail::power_at(p, claimed_distance));
}

} // namespace posverify
