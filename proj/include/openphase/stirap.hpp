#pragma once

#include "openphase/lindblad.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace openphase {

struct PulseParams {
    double g01 = 15.0;
    double g02 = 15.0;
    double t0 = 4.0 / 3.0;
    double tau = 1.0;
    double phi = std::numbers::pi / 4.0;

    void validate() const {
        if (!(tau > 0.0)) throw std::invalid_argument("pulse width must be positive");
        if (!(g01 > 0.0 && g02 > 0.0)) throw std::invalid_argument("pulse amplitudes must be positive");
        if (!std::isfinite(t0) || !std::isfinite(phi)) throw std::invalid_argument("pulse delay and mixing angle must be finite");
    }
};

struct DegenerateDelay : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// (g1, g2): the second pulse g2 peaks at t = 0, g1 peaks at t = t0.
inline std::pair<double, double> pulses(double t, const PulseParams& p) {
    const double a = (t - p.t0) / p.tau, b = t / p.tau;
    return {p.g01 * std::exp(-a * a), p.g02 * std::exp(-b * b)};
}

/// d(g1, g2)/dt.
inline std::pair<double, double> pulse_rates(double t, const PulseParams& p) {
    const auto [g1, g2] = pulses(t, p);
    const double t2 = p.tau * p.tau;
    return {-2.0 * (t - p.t0) / t2 * g1, -2.0 * t / t2 * g2};
}

/// tan(theta) = g1 / g2, evaluated in log form so the tails do not underflow.
inline double theta_of_t(double t, const PulseParams& p) {
    const double logTan = std::log(p.g01 / p.g02) + (2.0 * t * p.t0 - p.t0 * p.t0) / (p.tau * p.tau);
    if (logTan > 0) return std::numbers::pi / 2.0 - std::atan(std::exp(-logTan));
    return std::atan(std::exp(logTan));
}

inline double t_of_theta(double theta, const PulseParams& p) {
    if (p.t0 == 0.0) throw DegenerateDelay("t0 = 0 leaves theta constant");
    if (!(theta > 0.0 && theta < std::numbers::pi / 2.0)) throw std::domain_error("theta outside (0, pi/2)");
    return (p.tau * p.tau * std::log(p.g02 / p.g01 * std::tan(theta)) + p.t0 * p.t0) / (2.0 * p.t0);
}

inline double dtheta_dt(double t, const PulseParams& p) {
    return p.t0 / (p.tau * p.tau) * std::sin(2.0 * theta_of_t(t, p));
}

/// |dtheta/dt| / sqrt(g1^2 + g2^2); +infinity once both pulses have underflowed.
inline double adiabaticity_lhs(double t, const PulseParams& p) {
    const auto [g1, g2] = pulses(t, p);
    const double peak = std::max(p.g01, p.g02);
    if (g1 < 1e-300 * peak && g2 < 1e-300 * peak) return std::numeric_limits<double>::infinity();
    return std::abs(dtheta_dt(t, p)) / std::hypot(g1, g2);
}

enum class Dressed { Zero = 0, Plus = 1, Minus = 2 };

struct ClosedEigenSystem {
    double theta = 0.0;
    std::array<double, 3> energies{};  // E0, E+, E- per unit field strength
    std::array<Eigen::Vector3d, 3> states;

    const Eigen::Vector3d& state(Dressed n) const { return states[static_cast<int>(n)]; }
};

/// Dressed states of the unit-strength Hamiltonian at angle theta.
inline ClosedEigenSystem closed_eigensystem(double theta, double phi = std::numbers::pi / 4.0) {
    const double s = std::sin(theta), c = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    ClosedEigenSystem ces;
    ces.theta = theta;
    ces.energies = {0.0, 1.0, -1.0};
    ces.states[0] = {c, -s, 0.0};
    ces.states[1] = {s * sp, c * sp, cp};
    ces.states[2] = {s * cp, c * cp, -sp};
    return ces;
}

/// <n| d/dtheta |n> from the analytic derivative of the real dressed states.
inline cd closed_berry_integrand(Dressed n, double theta, double phi = std::numbers::pi / 4.0) {
    const double s = std::sin(theta), c = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const auto st = closed_eigensystem(theta, phi).state(n);
    Eigen::Vector3d d;
    switch (n) {
        case Dressed::Zero: d = {-s, -c, 0.0}; break;
        case Dressed::Plus: d = {c * sp, -s * sp, 0.0}; break;
        case Dressed::Minus: d = {c * cp, -s * cp, 0.0}; break;
    }
    return st.dot(d);
}

}  // namespace openphase
