/**
 * Copyright 2026 The lophoton Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "lophoton/error.hpp"
#include "lophoton/least_squares.hpp"
#include "lophoton/quadrature.hpp"

namespace lophoton::emitter {

// CODATA 2018 exact/recommended values, SI.
namespace si {
inline constexpr double epsilon0 = 8.8541878128e-12;
inline constexpr double electron_mass = 9.1093837015e-31;
inline constexpr double speed_of_light = 299792458.0;
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double hbar_ev_s = 6.582119569e-16;
}  // namespace si

// Phonon angular frequencies are in 1/ps; k_B T / hbar in 1/ps per kelvin.
inline constexpr double kb_over_hbar_inv_ps_per_k = 0.13093;

inline constexpr double ueV_to_inv_ps(double ueV) {
    return ueV * 1e-6 / si::hbar_ev_s * 1e-12;
}

inline constexpr double inv_ps_to_ueV(double rate) {
    return rate * 1e12 * si::hbar_ev_s * 1e6;
}

// ---------------------------------------------------------------------------
// Time-resolved photoluminescence with fine-structure beating.

struct DecayParams {
    double T1_ps{350.0};
    double delta_inv_ps{0.0};  // fine-structure splitting as angular frequency

    void validate() const {
        if (!(T1_ps > 0.0) || !(delta_inv_ps >= 0.0) || !std::isfinite(T1_ps) || !std::isfinite(delta_inv_ps))
            throw error(errc::invalid_argument, "DecayParams need T1 > 0 and delta >= 0");
    }
};

// Unnormalized |exp(-i delta t - t/2T1) - exp(-t/2T1)|^2.
inline double trpl_raw(double t_ps, const DecayParams& p) {
    return std::exp(-t_ps / p.T1_ps) * 2.0 * (1.0 - std::cos(p.delta_inv_ps * t_ps));
}

// Time of the global maximum of trpl_raw: tan(delta t / 2) = delta T1.
inline double trpl_peak_time(const DecayParams& p) {
    p.validate();
    const double u = p.delta_inv_ps * p.T1_ps;
    return u > 0.0 ? 2.0 * std::atan(u) / p.delta_inv_ps : 2.0 * p.T1_ps;
}

namespace detail {
inline double sinc(double x) {
    return std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
}
}  // namespace detail

// trpl_raw scaled to a peak of 1. Written through sinc so that delta -> 0
// has the smooth limit (t / 2T1)^2 exp(2 - t/T1).
inline double trpl_intensity(double t_ps, const DecayParams& p) {
    p.validate();
    if (!(t_ps >= 0.0)) throw error(errc::invalid_argument, "trpl_intensity needs t >= 0");
    const double u = p.delta_inv_ps * p.T1_ps;
    const double ratio = t_ps / (2.0 * p.T1_ps) * detail::sinc(0.5 * p.delta_inv_ps * t_ps) * std::sqrt(1.0 + u * u);
    return ratio * ratio * std::exp(-(t_ps - trpl_peak_time(p)) / p.T1_ps);
}

inline double trpl_period_ps(const DecayParams& p) {
    if (!(p.delta_inv_ps > 0.0)) throw error(errc::invalid_argument, "period undefined for zero splitting");
    return 2.0 * std::numbers::pi / p.delta_inv_ps;
}

// Peak-normalized TRPL convolved with a unit-area Gaussian of standard
// deviation irf_ps (zero means no instrument response).
inline double trpl_convolved(double t_ps, const DecayParams& p, double irf_ps) {
    if (irf_ps <= 0.0) return t_ps < 0.0 ? 0.0 : trpl_intensity(t_ps, p);
    constexpr int n = 240;
    const double lo = -6.0 * irf_ps, h = 12.0 * irf_ps / n;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double s = lo + k * h;
        const double arg = t_ps - s;
        if (arg < 0.0) continue;
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        sum += w * trpl_intensity(arg, p) * std::exp(-0.5 * s * s / (irf_ps * irf_ps));
    }
    return sum * h / (irf_ps * std::sqrt(2.0 * std::numbers::pi));
}

inline constexpr double default_irf_ps = 75.0;

struct TrplFitOptions {
    DecayParams initial{350.0, ueV_to_inv_ps(6.4)};
    double initial_amplitude{-1.0};  // negative: use the data maximum
    least_squares::Options solver{};
};

struct TrplFit {
    DecayParams params;
    double amplitude{0.0};
    double rms_residual{0.0};
    int iterations{0};
};

struct Sample {
    double x{0.0};
    double y{0.0};
};

inline TrplFit fit_trpl(const std::vector<Sample>& samples, double irf_ps, const TrplFitOptions& opt = {}) {
    opt.initial.validate();
    if (samples.size() < 20) throw error(errc::insufficient_data, "fit_trpl needs at least 20 samples");
    auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                        [](const Sample& a, const Sample& b) { return a.x < b.x; });
    if (hi->x - lo->x < 2.0 * opt.initial.T1_ps)
        throw error(errc::insufficient_data, "samples must span at least 2*T1");
    if (irf_ps < 0.0) throw error(errc::invalid_argument, "IRF width must be >= 0");

    double amplitude = opt.initial_amplitude;
    if (amplitude < 0.0)
        for (const auto& s : samples) amplitude = std::max(amplitude, s.y);

    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    auto residuals = [&](const Eigen::VectorXd& x) {
        const DecayParams p{x(0), x(1)};
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = samples[static_cast<std::size_t>(i)];
            r(i) = x(2) * trpl_convolved(s.x, p, irf_ps) - s.y;
        }
        return r;
    };

    Eigen::VectorXd x0(3), lower(3), upper(3);
    x0 << opt.initial.T1_ps, opt.initial.delta_inv_ps, amplitude;
    lower << 1.0, 0.0, 0.0;
    upper << 1e6, 1.0, std::numeric_limits<double>::max();
    const auto res = least_squares::minimize(residuals, x0, lower, upper, opt.solver);
    return {{res.params(0), res.params(1)}, res.params(2), res.rms, res.iterations};
}

// ---------------------------------------------------------------------------
// Oscillator strength f = 6 pi eps0 m0 c^3 / (n T1 Fp omega^2 e^2).

struct OscillatorInputs {
    double T1_ps{350.0};
    double omega_rad_per_s{0.0};
    double refractive_index{3.5};
    double purcell{1.0};
};

inline double omega_from_wavelength_nm(double wavelength_nm) {
    return 2.0 * std::numbers::pi * si::speed_of_light / (wavelength_nm * 1e-9);
}

inline double oscillator_strength(const OscillatorInputs& in) {
    if (!(in.T1_ps > 0.0 && in.omega_rad_per_s > 0.0 && in.refractive_index > 0.0 && in.purcell > 0.0))
        throw error(errc::invalid_argument, "oscillator strength inputs must be positive");
    const double c = si::speed_of_light, e = si::elementary_charge;
    return 6.0 * std::numbers::pi * si::epsilon0 * si::electron_mass * c * c * c /
           (in.refractive_index * in.T1_ps * 1e-12 * in.purcell * in.omega_rad_per_s * in.omega_rad_per_s * e * e);
}

// Emission wavelength at which the given lifetime corresponds to strength f.
inline double wavelength_for_strength_nm(double f, double T1_ps, double refractive_index = 3.5, double purcell = 1.0) {
    const double at_one_micron =
        oscillator_strength({T1_ps, omega_from_wavelength_nm(1000.0), refractive_index, purcell});
    return 1000.0 * std::sqrt(f / at_one_micron);
}

// ---------------------------------------------------------------------------
// Two-photon interference visibility under phonon dephasing and spectral
// diffusion.

struct DephasingParams {
    double alpha_ps2{0.0055};
    double v_c_inv_ps{4.9};
    double mu_ps2{2.2e-3};
    double F{0.3};
    double T1_ps{350.0};
    double Gamma_sd_inv_ps{0.0};
    double tau_c_ns{350.0};

    void validate() const {
        const bool ok = alpha_ps2 >= 0.0 && v_c_inv_ps > 0.0 && mu_ps2 >= 0.0 && F >= 0.0 && F <= 1.0 &&
                        T1_ps > 0.0 && Gamma_sd_inv_ps >= 0.0 && tau_c_ns > 0.0;
        if (!ok) throw error(errc::invalid_argument, "DephasingParams out of range");
    }
};

inline constexpr quadrature::Options default_quadrature{1e-8, 0.0, 4000};

namespace detail {

inline double thermal_rate(double temperature_k) {
    if (!(temperature_k >= 0.0)) throw error(errc::invalid_argument, "temperature must be >= 0");
    return kb_over_hbar_inv_ps_per_k * temperature_k;
}

}  // namespace detail

// The *_thermal variants take k_B T / hbar directly, in the same inverse time
// unit as v_c; the temperature overloads convert with kb_over_hbar.

inline double phonon_upper_limit(double thermal, const DephasingParams& p) {
    return 8.0 * p.v_c_inv_ps * std::max(1.0, std::sqrt(thermal / p.v_c_inv_ps));
}

// Integral of v exp(-v^2/v_c^2) coth(v / 2 thermal) over v >= 0.
inline quadrature::Result franck_condon_integral_thermal(double thermal, const DephasingParams& p,
                                                         const quadrature::Options& q = default_quadrature) {
    const double vc2 = p.v_c_inv_ps * p.v_c_inv_ps;
    auto f = [&](double v) {
        const double gauss = v * std::exp(-v * v / vc2);
        if (thermal == 0.0) return gauss;
        // coth(x) = 1 + 2 / expm1(2x); v / expm1 stays finite as v -> 0.
        return v == 0.0 ? 2.0 * thermal : gauss * (1.0 + 2.0 / std::expm1(v / thermal));
    };
    return quadrature::integrate(f, 0.0, phonon_upper_limit(thermal, p), q);
}

inline quadrature::Result franck_condon_integral(double temperature_k, const DephasingParams& p,
                                                 const quadrature::Options& q = default_quadrature) {
    return franck_condon_integral_thermal(detail::thermal_rate(temperature_k), p, q);
}

inline double franck_condon_B_thermal(double thermal, const DephasingParams& p,
                                      const quadrature::Options& q = default_quadrature) {
    p.validate();
    if (p.alpha_ps2 == 0.0) return 1.0;
    return std::exp(-0.5 * p.alpha_ps2 * franck_condon_integral_thermal(thermal, p, q).value);
}

inline double franck_condon_B(double temperature_k, const DephasingParams& p,
                              const quadrature::Options& q = default_quadrature) {
    return franck_condon_B_thermal(detail::thermal_rate(temperature_k), p, q);
}

// Integral of v^10 exp(-v^2/v_c^2) n(v)(n(v)+1), n the Bose occupation.
inline quadrature::Result virtual_phonon_integral_thermal(double thermal, const DephasingParams& p,
                                                          const quadrature::Options& q = default_quadrature) {
    if (!(thermal > 0.0)) throw error(errc::invalid_argument, "temperature must be > 0");
    const double vc2 = p.v_c_inv_ps * p.v_c_inv_ps;
    auto f = [&](double v) {
        if (v == 0.0) return 0.0;
        const double x = v / thermal;
        // n(n+1) = e^-x / (1 - e^-x)^2, stable for large x
        const double em = -std::expm1(-x);
        const double occupation = std::exp(-x) / (em * em);
        const double v2 = v * v;
        const double v10 = v2 * v2 * v2 * v2 * v2;
        return v10 * std::exp(-v2 / vc2) * occupation;
    };
    return quadrature::integrate(f, 0.0, phonon_upper_limit(thermal, p), q);
}

inline quadrature::Result virtual_phonon_integral(double temperature_k, const DephasingParams& p,
                                                  const quadrature::Options& q = default_quadrature) {
    return virtual_phonon_integral_thermal(detail::thermal_rate(temperature_k), p, q);
}

inline double gamma_ph_thermal(double thermal, const DephasingParams& p,
                               const quadrature::Options& q = default_quadrature) {
    p.validate();
    if (thermal == 0.0 || p.alpha_ps2 == 0.0 || p.mu_ps2 == 0.0) return 0.0;
    const double vc4 = std::pow(p.v_c_inv_ps, 4);
    return p.alpha_ps2 * p.alpha_ps2 * p.mu_ps2 / vc4 * virtual_phonon_integral_thermal(thermal, p, q).value;
}

inline double gamma_ph(double temperature_k, const DephasingParams& p,
                       const quadrature::Options& q = default_quadrature) {
    return gamma_ph_thermal(detail::thermal_rate(temperature_k), p, q);
}

inline double gamma_sd(double delay_ns, const DephasingParams& p) {
    if (!(delay_ns >= 0.0)) throw error(errc::invalid_argument, "delay must be >= 0");
    const double r = delay_ns / p.tau_c_ns;
    return p.Gamma_sd_inv_ps * -std::expm1(-r * r);
}

struct VisibilityTerms {
    double B{1.0};
    double gamma_ph{0.0};
    double gamma_sd{0.0};
    double rate_factor{1.0};      // (Gamma/2) / (Gamma/2 + gamma_ph + gamma_sd)
    double sideband_factor{1.0};  // [B^2 / (B^2 + F (1 - B^2))]^2
    double visibility{1.0};
};

inline VisibilityTerms visibility_terms_thermal(double thermal, double delay_ns, const DephasingParams& p,
                                                const quadrature::Options& q = default_quadrature) {
    p.validate();
    VisibilityTerms t;
    t.B = franck_condon_B_thermal(thermal, p, q);
    t.gamma_ph = gamma_ph_thermal(thermal, p, q);
    t.gamma_sd = gamma_sd(delay_ns, p);
    const double half_gamma = 0.5 / p.T1_ps;
    t.rate_factor = half_gamma / (half_gamma + t.gamma_ph + t.gamma_sd);
    const double b2 = t.B * t.B;
    const double zpl = b2 / (b2 + p.F * (1.0 - b2));
    t.sideband_factor = zpl * zpl;
    t.visibility = t.rate_factor * t.sideband_factor;
    return t;
}

inline VisibilityTerms visibility_terms(double temperature_k, double delay_ns, const DephasingParams& p,
                                        const quadrature::Options& q = default_quadrature) {
    return visibility_terms_thermal(detail::thermal_rate(temperature_k), delay_ns, p, q);
}

inline double tpi_visibility(double temperature_k, double delay_ns, const DephasingParams& p,
                             const quadrature::Options& q = default_quadrature) {
    return visibility_terms(temperature_k, delay_ns, p, q).visibility;
}

// Spectral-diffusion ceiling that makes the model return v_long at
// (temperature, delay). p.Gamma_sd_inv_ps is ignored.
inline double solve_gamma_sd(double v_long, double delay_ns, double temperature_k, DephasingParams p) {
    p.Gamma_sd_inv_ps = 0.0;
    const auto terms = visibility_terms(temperature_k, delay_ns, p);
    if (!(v_long > 0.0) || v_long > terms.visibility * (1.0 + 1e-12))
        throw error(errc::infeasible, "target visibility must lie in (0, V(Gamma_sd = 0)]");
    const double half_gamma = 0.5 / p.T1_ps;
    const double needed = std::max(0.0, half_gamma * terms.sideband_factor / v_long - half_gamma - terms.gamma_ph);
    if (needed == 0.0) return 0.0;
    const double r = delay_ns / p.tau_c_ns;
    const double growth = -std::expm1(-r * r);
    if (growth <= 0.0) throw error(errc::infeasible, "spectral diffusion vanishes at zero delay");
    return needed / growth;
}

enum class curve_kind { vs_temperature, vs_delay };

struct VisibilityFitOptions {
    double fixed_delay_ns{2.0};        // vs_temperature
    double fixed_temperature_k{4.0};   // vs_delay
    least_squares::Options solver{};
    quadrature::Options quadrature{1e-11, 0.0, 4000};
};

struct VisibilityFit {
    DephasingParams params;
    double rms_residual{0.0};
    int iterations{0};
};

// vs_temperature frees (alpha, v_c, mu, F) with spectral diffusion switched
// off; vs_delay frees (Gamma_sd, tau_c). Everything else comes from `start`.
inline VisibilityFit fit_visibility_curve(const std::vector<Sample>& data, curve_kind which,
                                          const DephasingParams& start, const VisibilityFitOptions& opt = {}) {
    start.validate();
    if (data.size() < 4) throw error(errc::insufficient_data, "visibility fit needs at least 4 points");
    const Eigen::Index n = static_cast<Eigen::Index>(data.size());

    if (which == curve_kind::vs_temperature) {
        auto unpack = [&](const Eigen::VectorXd& x) {
            DephasingParams p = start;
            p.alpha_ps2 = x(0);
            p.v_c_inv_ps = x(1);
            p.mu_ps2 = x(2);
            p.F = x(3);
            p.Gamma_sd_inv_ps = 0.0;
            return p;
        };
        auto residuals = [&](const Eigen::VectorXd& x) {
            const auto p = unpack(x);
            Eigen::VectorXd r(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& s = data[static_cast<std::size_t>(i)];
                r(i) = tpi_visibility(s.x, opt.fixed_delay_ns, p, opt.quadrature) - s.y;
            }
            return r;
        };
        Eigen::VectorXd x0(4), lo(4), hi(4);
        x0 << start.alpha_ps2, start.v_c_inv_ps, start.mu_ps2, start.F;
        lo << 0.0, 0.05, 0.0, 0.0;
        hi << 1.0, 50.0, 1.0, 1.0;
        const auto res = least_squares::minimize(residuals, x0, lo, hi, opt.solver);
        return {unpack(res.params), res.rms, res.iterations};
    }

    auto unpack = [&](const Eigen::VectorXd& x) {
        DephasingParams p = start;
        p.Gamma_sd_inv_ps = x(0);
        p.tau_c_ns = x(1);
        return p;
    };
    auto residuals = [&](const Eigen::VectorXd& x) {
        const auto p = unpack(x);
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = data[static_cast<std::size_t>(i)];
            r(i) = tpi_visibility(opt.fixed_temperature_k, s.x, p, opt.quadrature) - s.y;
        }
        return r;
    };
    Eigen::VectorXd x0(2), lo(2), hi(2);
    x0 << std::max(start.Gamma_sd_inv_ps, 1e-6), start.tau_c_ns;
    lo << 0.0, 1e-3;
    hi << 1.0, 1e7;
    const auto res = least_squares::minimize(residuals, x0, lo, hi, opt.solver);
    return {unpack(res.params), res.rms, res.iterations};
}

// ---------------------------------------------------------------------------
// Resonant Rabi oscillation: pulse area grows linearly with sqrt(power).

inline std::vector<double> rabi_curve(const std::vector<double>& sqrt_power, double sqrt_power_pi) {
    if (!(sqrt_power_pi > 0.0)) throw error(errc::invalid_argument, "pi-pulse calibration must be > 0");
    std::vector<double> out;
    out.reserve(sqrt_power.size());
    for (double s : sqrt_power) {
        const double area = std::numbers::pi * s / sqrt_power_pi;
        const double half = std::sin(0.5 * area);
        out.push_back(half * half);
    }
    return out;
}

}  // namespace lophoton::emitter
