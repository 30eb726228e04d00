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
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "lophoton/error.hpp"
#include "lophoton/numeric.hpp"
#include "lophoton/polarization.hpp"
#include "lophoton/random.hpp"

namespace lophoton::tomography {

using Matrix4 = Eigen::Matrix4cd;
using Vector4 = Eigen::Vector4cd;

// Basis order is HH, HV, VH, VV (first qubit = control path).
inline void validate_density(const ComplexMatrix& rho, double tol = hermitian_tolerance) {
    if (rho.rows() != 4 || rho.cols() != 4) throw error(errc::bad_dimension, "two-qubit density matrix must be 4x4");
    if (!all_finite(rho)) throw error(errc::invalid_argument, "density matrix has non-finite entries");
    if (!is_hermitian(rho, tol)) throw error(errc::not_hermitian, "density matrix is not Hermitian");
    const complex tr = rho.trace();
    if (std::abs(tr.real() - 1.0) > tol || std::abs(tr.imag()) > tol)
        throw error(errc::invalid_argument, "density matrix trace differs from 1");
    const auto eig = hermitian_eigen(rho);
    if (eig.values.back() < -tol) throw error(errc::negative_eigenvalue, "density matrix is not positive semidefinite");
}

enum class meas_basis { Z, X, Y };

inline constexpr std::array<meas_basis, 3> all_bases{meas_basis::Z, meas_basis::X, meas_basis::Y};

constexpr char to_char(meas_basis b) noexcept { return "ZXY"[static_cast<int>(b)]; }

inline meas_basis parse_basis(std::string_view s) {
    if (s == "Z" || s == "z") return meas_basis::Z;
    if (s == "X" || s == "x") return meas_basis::X;
    if (s == "Y" || s == "y") return meas_basis::Y;
    throw error(errc::unknown_label, "unknown measurement basis '" + std::string(s) + "'");
}

// The two outcomes of a basis: Z -> (H, V), X -> (D, A), Y -> (R, L).
constexpr std::array<pol, 2> basis_outcomes(meas_basis b) noexcept {
    switch (b) {
    case meas_basis::Z: return {pol::H, pol::V};
    case meas_basis::X: return {pol::D, pol::A};
    case meas_basis::Y: return {pol::R, pol::L};
    }
    return {pol::H, pol::V};
}

inline int outcome_index(meas_basis b, pol p) {
    const auto o = basis_outcomes(b);
    if (p == o[0]) return 0;
    if (p == o[1]) return 1;
    throw error(errc::invalid_argument, std::string("outcome ") + to_char(p) + " does not belong to basis " + to_char(b));
}

constexpr int pauli_index(meas_basis b) noexcept {
    switch (b) {
    case meas_basis::Z: return 3;
    case meas_basis::X: return 1;
    case meas_basis::Y: return 2;
    }
    return 3;
}

struct Setting {
    meas_basis first{meas_basis::Z};
    meas_basis second{meas_basis::Z};

    friend bool operator==(const Setting&, const Setting&) = default;
    int index() const noexcept { return 3 * static_cast<int>(first) + static_cast<int>(second); }
};

inline std::array<Setting, 9> all_settings() {
    std::array<Setting, 9> out{};
    for (int i = 0; i < 9; ++i) out[static_cast<std::size_t>(i)] = {all_bases[static_cast<std::size_t>(i / 3)], all_bases[static_cast<std::size_t>(i % 3)]};
    return out;
}

// counts[2*o1 + o2] with o = 0 for the first outcome of each basis.
// Counts are real so that exact probabilities can be fed in directly.
struct MeasurementRecord {
    Setting setting;
    std::array<double, 4> counts{};
    double integration_s{0.0};

    double total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

inline Vector4 outcome_state(const Setting& s, int k) {
    const auto a = basis_outcomes(s.first)[static_cast<std::size_t>(k / 2)];
    const auto b = basis_outcomes(s.second)[static_cast<std::size_t>(k % 2)];
    const JonesVector va = basis_state(a), vb = basis_state(b);
    Vector4 v;
    v << va(0) * vb(0), va(0) * vb(1), va(1) * vb(0), va(1) * vb(1);
    return v;
}

inline std::array<Matrix4, 4> projectors_for_setting(const Setting& s) {
    std::array<Matrix4, 4> out;
    for (int k = 0; k < 4; ++k) {
        const Vector4 v = outcome_state(s, k);
        out[static_cast<std::size_t>(k)] = v * v.adjoint();
    }
    return out;
}

inline std::array<double, 4> setting_probabilities(const Matrix4& rho, const Setting& s) {
    std::array<double, 4> p{};
    for (int k = 0; k < 4; ++k) {
        const Vector4 v = outcome_state(s, k);
        p[static_cast<std::size_t>(k)] = std::max(0.0, (v.adjoint() * rho * v)(0, 0).real());
    }
    return p;
}

// Exact expectation values scaled by n: the infinite-statistics limit.
inline std::vector<MeasurementRecord> exact_records(const Matrix4& rho, double n_per_setting = 1.0) {
    validate_density(rho);
    std::vector<MeasurementRecord> out;
    for (const auto& s : all_settings()) {
        MeasurementRecord r{s, {}, 0.0};
        const auto p = setting_probabilities(rho, s);
        for (int k = 0; k < 4; ++k) r.counts[static_cast<std::size_t>(k)] = n_per_setting * p[static_cast<std::size_t>(k)];
        out.push_back(r);
    }
    return out;
}

inline std::vector<MeasurementRecord> simulate_counts(const Matrix4& rho, std::int64_t n_per_setting, std::uint64_t seed) {
    validate_density(rho);
    if (n_per_setting < 0) throw error(errc::invalid_argument, "counts per setting must be >= 0");
    std::vector<MeasurementRecord> out;
    for (const auto& s : all_settings()) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s.index())));
        auto p = setting_probabilities(rho, s);
        const double norm = p[0] + p[1] + p[2] + p[3];
        MeasurementRecord r{s, {}, 0.0};
        std::int64_t left = n_per_setting;
        double mass = 1.0;
        for (int k = 0; k < 3; ++k) {
            const double q = mass > 0.0 ? std::clamp(p[static_cast<std::size_t>(k)] / norm / mass, 0.0, 1.0) : 0.0;
            const std::int64_t draw = left > 0 ? std::binomial_distribution<std::int64_t>(left, q)(rng) : 0;
            r.counts[static_cast<std::size_t>(k)] = static_cast<double>(draw);
            left -= draw;
            mass -= p[static_cast<std::size_t>(k)] / norm;
        }
        r.counts[3] = static_cast<double>(left);
        out.push_back(r);
    }
    return out;
}

namespace detail {

// One record per setting, indexed by Setting::index().
inline std::array<const MeasurementRecord*, 9> index_records(std::span<const MeasurementRecord> records) {
    std::array<const MeasurementRecord*, 9> by{};
    for (const auto& r : records) {
        for (double c : r.counts)
            if (!(c >= 0.0) || !std::isfinite(c)) throw error(errc::invalid_argument, "counts must be finite and >= 0");
        auto& slot = by[static_cast<std::size_t>(r.setting.index())];
        if (slot) throw error(errc::invalid_argument, "duplicate measurement setting");
        slot = &r;
    }
    for (std::size_t i = 0; i < 9; ++i) {
        const auto s = all_settings()[i];
        if (!by[i]) throw error(errc::missing_setting, std::string("setting ") + to_char(s.first) + to_char(s.second) + " is missing");
        if (!(by[i]->total() > 0.0))
            throw error(errc::missing_setting, std::string("setting ") + to_char(s.first) + to_char(s.second) + " has no counts");
    }
    return by;
}

// Eigenvalue of the basis Pauli operator on each outcome: tr(sigma |o><o|).
inline std::array<double, 2> outcome_signs(meas_basis b) {
    const auto o = basis_outcomes(b);
    const ComplexMatrix s = pauli(pauli_index(b));
    return {(s * projector(o[0])).trace().real(), (s * projector(o[1])).trace().real()};
}

}  // namespace detail

// Stokes reconstruction: rho = sum_ij S_ij sigma_i (x) sigma_j / 4. Single-
// qubit Stokes parameters are averaged over the three settings that share
// the basis on that qubit.
inline Matrix4 linear_inversion(std::span<const MeasurementRecord> records) {
    const auto by = detail::index_records(records);
    Eigen::Matrix4d stokes = Eigen::Matrix4d::Zero();
    stokes(0, 0) = 1.0;
    for (const auto* r : by) {
        const auto ea = detail::outcome_signs(r->setting.first);
        const auto eb = detail::outcome_signs(r->setting.second);
        const int i = pauli_index(r->setting.first), j = pauli_index(r->setting.second);
        const double n = r->total();
        for (int k = 0; k < 4; ++k) {
            const double p = r->counts[static_cast<std::size_t>(k)] / n;
            const double a = ea[static_cast<std::size_t>(k / 2)], b = eb[static_cast<std::size_t>(k % 2)];
            stokes(i, j) += a * b * p;
            stokes(i, 0) += a * p / 3.0;
            stokes(0, j) += b * p / 3.0;
        }
    }
    Matrix4 rho = Matrix4::Zero();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) rho += stokes(i, j) * Matrix4(kron(pauli(i), pauli(j)));
    rho /= 4.0;
    return 0.5 * (rho + rho.adjoint());
}

// Clamp negative eigenvalues to zero and renormalize the trace.
inline Matrix4 project_psd(const Matrix4& m) {
    Eigen::SelfAdjointEigenSolver<Matrix4> solver(0.5 * (m + m.adjoint()));
    Eigen::Vector4d lambda = solver.eigenvalues().cwiseMax(0.0);
    const double sum = lambda.sum();
    if (!(sum > 0.0)) return Matrix4::Identity() / 4.0;
    lambda /= sum;
    Matrix4 out = solver.eigenvectors() * lambda.asDiagonal() * solver.eigenvectors().adjoint();
    return 0.5 * (out + out.adjoint());
}

// Multinomial log-likelihood sum n_k ln p_k without the constant term.
inline double log_likelihood(const Matrix4& rho, std::span<const MeasurementRecord> records) {
    double sum = 0.0;
    for (const auto& r : records) {
        const auto p = setting_probabilities(rho, r.setting);
        const double norm = p[0] + p[1] + p[2] + p[3];
        for (int k = 0; k < 4; ++k) {
            const double n = r.counts[static_cast<std::size_t>(k)];
            if (n == 0.0) continue;
            const double q = p[static_cast<std::size_t>(k)] / norm;
            if (!(q > 0.0)) return -std::numeric_limits<double>::infinity();
            sum += n * std::log(q);
        }
    }
    return sum;
}

// Largest attainable log-likelihood: every p_k equal to its observed frequency.
inline double likelihood_bound(std::span<const MeasurementRecord> records) {
    double sum = 0.0;
    for (const auto& r : records) {
        const double n = r.total();
        for (double c : r.counts)
            if (c > 0.0) sum += c * std::log(c / n);
    }
    return sum;
}

struct MleOptions {
    int max_iterations{10000};
    double rel_tol{1e-10};   // relative change of the log-likelihood
    double step_tol{1e-9};   // parameter step (infinity norm)
    // Certified remaining gain, relative to |L|. The ascent stops only once
    // this also holds; saddle plateaus satisfy the two tests above.
    // Float resolution of L puts a floor near N * sqrt(eps) on it.
    double gap_tol{1e-7};
    double init_mixing{1e-4};  // weight of I/4 mixed into the initializer
};

struct MleResult {
    Matrix4 rho;
    double log_likelihood{0.0};
    double initial_log_likelihood{0.0};  // of the PSD-projected linear inversion
    double gap_bound{0.0};  // certified upper bound on max L - L(rho)
    int iterations{0};
    bool converged{false};
};

namespace detail {

using Params = Eigen::Matrix<double, 16, 1>;

inline constexpr std::array<std::pair<int, int>, 6> lower_entries{{{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};

inline Matrix4 unpack(const Params& x) {
    Matrix4 t = Matrix4::Zero();
    for (int i = 0; i < 4; ++i) t(i, i) = x(i);
    for (std::size_t e = 0; e < lower_entries.size(); ++e) {
        const auto [i, j] = lower_entries[e];
        t(i, j) = complex(x(4 + 2 * static_cast<int>(e)), x(5 + 2 * static_cast<int>(e)));
    }
    return t;
}

// Lower-triangular T with T^dagger T = rho, via Cholesky of the index-
// reversed matrix.
inline Params pack(const Matrix4& rho) {
    Matrix4 rev;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) rev(i, j) = rho(3 - i, 3 - j);
    const Eigen::LLT<Matrix4> llt(rev);
    if (llt.info() != Eigen::Success) throw error(errc::negative_eigenvalue, "initializer is not positive definite");
    const Matrix4 l = llt.matrixL();
    // J L J is upper triangular and equals T^dagger.
    Matrix4 t;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) t(i, j) = std::conj(l(3 - j, 3 - i));
    Params x;
    for (int i = 0; i < 4; ++i) x(i) = t(i, i).real();
    for (std::size_t e = 0; e < lower_entries.size(); ++e) {
        const auto [i, j] = lower_entries[e];
        x(4 + 2 * static_cast<int>(e)) = t(i, j).real();
        x(5 + 2 * static_cast<int>(e)) = t(i, j).imag();
    }
    return x;
}

class Likelihood {
public:
    explicit Likelihood(std::span<const MeasurementRecord> records) {
        for (const auto& r : records) {
            const double setting_total = r.total();
            for (int k = 0; k < 4; ++k) {
                const double n = r.counts[static_cast<std::size_t>(k)];
                total_ += n;
                if (n > 0.0) terms_.push_back({outcome_state(r.setting, k), n, n / setting_total});
            }
        }
        offset_ = likelihood_bound(records);
    }

    // The value returned by operator() is L - offset() <= 0.
    double offset() const { return offset_; }

    // By concavity, max L - L(rho) <= N (lambda_max(R) - 1) with
    // R = sum (n_k / p_k) Pi_k / N; zero exactly at the optimum.
    double gap_bound(const Matrix4& rho, Vector4* direction = nullptr) const {
        Matrix4 r = Matrix4::Zero();
        for (const auto& term : terms_) {
            const double p = (term.v.adjoint() * rho * term.v)(0, 0).real();
            if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
            r.noalias() += (term.n / p) * term.v * term.v.adjoint();
        }
        const Eigen::SelfAdjointEigenSolver<Matrix4> solver(0.5 * (r + r.adjoint()));
        if (direction) *direction = solver.eigenvectors().col(3);
        return std::max(0.0, solver.eigenvalues()(3) - total_);
    }

    // Same shifted value as operator(), for a unit-trace rho.
    double at(const Matrix4& rho) const {
        double value = 0.0;
        for (const auto& term : terms_) {
            const double p = (term.v.adjoint() * rho * term.v)(0, 0).real();
            if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
            value += term.n * std::log(p / term.freq);
        }
        return value;
    }

    // Value and gradient of sum n ln(v^dag A v / (tr A f)), A = T^dag T,
    // f the observed frequency. Kept relative to the bound so that small
    // improvements stay resolvable at large count numbers.
    double operator()(const Params& x, Params* grad) const {
        const Matrix4 t = unpack(x);
        const double tr = t.squaredNorm();
        if (!(tr > 0.0)) return -std::numeric_limits<double>::infinity();
        double value = 0.0;
        Matrix4 tr_grad = -(total_ / tr) * t;  // T * dL/dA
        for (const auto& term : terms_) {
            const Vector4 w = t * term.v;
            const double q = w.squaredNorm();
            if (!(q > 0.0)) return -std::numeric_limits<double>::infinity();
            value += term.n * std::log(q / (tr * term.freq));
            if (grad) tr_grad.noalias() += (term.n / q) * w * term.v.adjoint();
        }
        if (grad) {
            for (int i = 0; i < 4; ++i) (*grad)(i) = 2.0 * tr_grad(i, i).real();
            for (std::size_t e = 0; e < lower_entries.size(); ++e) {
                const auto [i, j] = lower_entries[e];
                (*grad)(4 + 2 * static_cast<int>(e)) = 2.0 * tr_grad(i, j).real();
                (*grad)(5 + 2 * static_cast<int>(e)) = 2.0 * tr_grad(i, j).imag();
            }
        }
        return value;
    }

private:
    struct Term {
        Vector4 v;
        double n;
        double freq;
    };
    std::vector<Term> terms_;
    double total_{0.0};
    double offset_{0.0};
};

inline Matrix4 to_density(const Params& x) {
    const Matrix4 t = unpack(x);
    Matrix4 rho = t.adjoint() * t;
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

}  // namespace detail

// Maximum-likelihood state over rho = T^dag T / tr, maximized with BFGS
// and a backtracking line search from the PSD-projected linear inversion.
inline MleResult mle_reconstruct(std::span<const MeasurementRecord> records, const MleOptions& opt = {}) {
    const Matrix4 start = project_psd(linear_inversion(records));
    const detail::Likelihood like(records);
    MleResult out;
    out.initial_log_likelihood = log_likelihood(start, records);

    const Matrix4 mixed = (1.0 - opt.init_mixing) * start + opt.init_mixing * Matrix4::Identity() / 4.0;
    detail::Params x = detail::pack(mixed);
    detail::Params g;
    double f = like(x, &g);
    using Hessian = Eigen::Matrix<double, 16, 16>;
    Hessian h = Hessian::Identity() / std::max(1.0, g.norm());

    auto gap_limit = [&](double value) { return std::max(1e-9, opt.gap_tol * std::abs(value + like.offset())); };
    // When the ascent stalls with a large certified gap, the missing gain
    // lies along a direction outside the range of rho, where the Cholesky
    // gradient vanishes. Step there directly: rho -> (1-t) rho + t |phi><phi|,
    // phi the top eigenvector of R; L is concave in t.
    int quiet = 0;
    // Returns true after a move. Sets `flat` when the step along phi gains
    // nothing resolvable, which certifies the stall as the optimum.
    int escapes = 0;
    bool flat = false;
    auto escape = [&]() {
        flat = false;
        const Matrix4 rho = detail::to_density(x);
        Vector4 phi;
        if (like.gap_bound(rho, &phi) <= gap_limit(f)) {
            flat = true;
            return false;
        }
        if (escapes >= 100) return false;
        const Matrix4 target = phi * phi.adjoint();
        auto value = [&](double t) { return like.at((1.0 - t) * rho + t * target); };
        constexpr double golden = 0.6180339887498949;
        double lo = 0.0, hi = 1.0;
        double a = hi - golden * (hi - lo), b = lo + golden * (hi - lo);
        double fa = value(a), fb = value(b);
        for (int k = 0; k < 80; ++k) {
            if (fa < fb) {
                lo = a;
                a = b;
                fa = fb;
                b = lo + golden * (hi - lo);
                fb = value(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - golden * (hi - lo);
                fa = value(a);
            }
        }
        const double t = 0.5 * (lo + hi);
        const double here = like.at(rho);
        if (std::max(fa, fb) - here <= opt.rel_tol * std::max(1.0, std::abs(here + like.offset()))) {
            flat = true;
            return false;
        }
        const Matrix4 next = (1.0 - 1e-12) * ((1.0 - t) * rho + t * target) + 1e-12 * Matrix4::Identity() / 4.0;
        detail::Params xn;
        try {
            xn = detail::pack(0.5 * (next + next.adjoint()));
        } catch (const error&) {
            return false;
        }
        detail::Params gn;
        const double fn = like(xn, &gn);
        if (!(fn > f)) return false;
        x = xn;
        f = fn;
        g = gn;
        h = Hessian::Identity() / std::max(1.0, g.norm());
        quiet = 0;
        ++escapes;
        return true;
    };

    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        detail::Params dir = h * g;  // ascent direction
        double slope = dir.dot(g);
        if (!(slope > 0.0)) {
            h = Hessian::Identity() / std::max(1.0, g.norm());
            dir = h * g;
            slope = dir.dot(g);
            if (!(slope > 0.0)) {
                if (escape()) continue;
                break;
            }
        }
        double step = 1.0;
        detail::Params xn, gn;
        double fn = -std::numeric_limits<double>::infinity();
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + step * dir;
            fn = like(xn, &gn);
            if (std::isfinite(fn) && fn >= f + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        if (!std::isfinite(fn) || fn < f) {
            if (h.isApprox(Hessian::Identity() / std::max(1.0, g.norm()))) {
                if (escape()) continue;
                break;  // no resolvable ascent left
            }
            h = Hessian::Identity() / std::max(1.0, g.norm());
            continue;
        }
        const detail::Params s = xn - x;
        const detail::Params y = g - gn;  // gradient of -L changes by -(gn - g)
        const double rel = std::abs(fn - f) / std::max(1.0, std::abs(f + like.offset()));
        const double step_size = s.lpNorm<Eigen::Infinity>();
        x = xn;
        f = fn;
        g = gn;
        const double sy = s.dot(y);
        if (sy > 1e-300) {
            if (it == 0) h = Hessian::Identity() * (sy / y.squaredNorm());
            const double rho_k = 1.0 / sy;
            const Hessian left = Hessian::Identity() - rho_k * s * y.transpose();
            h = left * h * left.transpose() + rho_k * s * s.transpose();
        }
        // Renormalize T; the likelihood is invariant under scaling.
        const double scale = std::sqrt(detail::unpack(x).squaredNorm());
        x /= scale;
        g *= scale;
        h /= scale * scale;
        quiet = (rel < opt.rel_tol || step_size < opt.step_tol) ? quiet + 1 : 0;
        // A stalled step can also mean a saddle plateau at the boundary of
        // the PSD cone, so stopping additionally needs a small certified gap.
        if (quiet >= 2) {
            if (like.gap_bound(detail::to_density(x)) <= gap_limit(f)) {
                out.converged = true;
                ++it;
                break;
            }
            // Keep iterating when the escape finds nothing: the ascent is
            // still making (small) progress in the range of rho.
            escape();
        }
    }
    out.iterations = it;
    if (!out.converged) out.converged = it < opt.max_iterations && (flat || like.gap_bound(detail::to_density(x)) <= gap_limit(f));
    out.rho = detail::to_density(x);
    out.log_likelihood = log_likelihood(out.rho, records);
    if (out.log_likelihood < out.initial_log_likelihood) {
        out.rho = start;
        out.log_likelihood = out.initial_log_likelihood;
    }
    out.gap_bound = like.gap_bound(out.rho);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics.

inline Matrix4 pure_density(const Vector4& psi) {
    const Vector4 v = psi / psi.norm();
    return v * v.adjoint();
}

inline Vector4 psi_minus() { return Vector4(0.0, M_SQRT1_2, -M_SQRT1_2, 0.0); }

namespace detail {

// Square root with eigenvalues at the round-off level set to zero, so a
// pure state keeps rank one.
inline Matrix4 sqrt_numerical_rank(const Matrix4& m) {
    const double floor = 64.0 * std::numeric_limits<double>::epsilon();
    return psd_function(m, [floor](double x) { return x > floor ? std::sqrt(x) : 0.0; });
}

}  // namespace detail

// Uhlmann fidelity (tr sqrt(sqrt(target) rho sqrt(target)))^2, evaluated as
// the squared trace norm of sqrt(rho) sqrt(target).
inline double fidelity(const Matrix4& rho, const Matrix4& target) {
    validate_density(rho);
    validate_density(target);
    const Matrix4 m = detail::sqrt_numerical_rank(rho) * detail::sqrt_numerical_rank(target);
    const double root = Eigen::JacobiSVD<Matrix4>(m).singularValues().sum();
    return std::clamp(root * root, 0.0, 1.0);
}

inline double fidelity(const Matrix4& rho, const Vector4& target) {
    validate_density(rho);
    const Vector4 v = target / target.norm();
    return std::clamp((v.adjoint() * rho * v)(0, 0).real(), 0.0, 1.0);
}

inline double concurrence(const Matrix4& rho) {
    validate_density(rho);
    const ComplexMatrix yy = kron(pauli(2), pauli(2));
    const ComplexMatrix tilde = yy * rho.conjugate() * yy;
    const ComplexMatrix root = psd_sqrt(rho);
    ComplexMatrix r = root * tilde * root;
    r = 0.5 * (r + r.adjoint());
    const auto eig = hermitian_eigen(r);
    std::array<double, 4> l{};
    for (std::size_t k = 0; k < 4; ++k) l[k] = std::sqrt(std::max(0.0, eig.values[k]));
    return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

inline double von_neumann_bits(const ComplexMatrix& rho) {
    const auto eig = hermitian_eigen(rho);
    double s = 0.0;
    for (double l : eig.values)
        if (l > 0.0) s -= l * std::log2(l);
    return std::max(0.0, s);
}

struct Entropies {
    double full{0.0};     // bits, in [0, 2]
    double reduced{0.0};  // bits of the first-qubit marginal, in [0, 1]
};

inline Entropies entropies(const Matrix4& rho) {
    validate_density(rho);
    return {von_neumann_bits(rho), von_neumann_bits(partial_trace(rho, subsystem::first))};
}

inline double purity(const Matrix4& rho) { return std::clamp((rho * rho).trace().real(), 0.0, 1.0); }

struct HofmannBounds {
    double lower{0.0};
    double upper{0.0};
};

inline HofmannBounds hofmann_bounds(double f_zz, double f_xx) {
    if (!(f_zz >= 0.0 && f_zz <= 1.0) || !(f_xx >= 0.0 && f_xx <= 1.0))
        throw error(errc::invalid_argument, "classical fidelities must lie in [0, 1]");
    return {std::max(0.0, f_zz + f_xx - 1.0), std::min(f_zz, f_xx)};
}

struct StateMetrics {
    double fidelity{0.0};
    double concurrence{0.0};
    double entropy_full{0.0};
    double entropy_reduced{0.0};
    double purity{0.0};
};

inline StateMetrics state_metrics(const Matrix4& rho, const Matrix4& target) {
    const auto s = entropies(rho);
    return {fidelity(rho, target), concurrence(rho), s.full, s.reduced, purity(rho)};
}

struct MonteCarloMetrics {
    StateMetrics mean;
    StateMetrics std;
    int resamples{0};
    int not_converged{0};
};

// Per replicate k: every count is redrawn from Poisson(count) with a
// generator seeded by derive_seed(seed, k), then reconstructed by MLE.
// Replicates run on up to `threads` workers; results do not depend on it.
inline MonteCarloMetrics monte_carlo_metrics(std::span<const MeasurementRecord> records, const Matrix4& target,
                                             int n_resamples, std::uint64_t seed, int threads = 1,
                                             const MleOptions& opt = {}) {
    if (n_resamples < 100) throw error(errc::invalid_argument, "need at least 100 resamples");
    validate_density(target);
    detail::index_records(records);

    std::vector<StateMetrics> results(static_cast<std::size_t>(n_resamples));
    std::vector<char> flags(static_cast<std::size_t>(n_resamples), 0);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int k = next++; k < n_resamples; k = next++) {
            try {
                Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
                std::vector<MeasurementRecord> copy(records.begin(), records.end());
                for (auto& r : copy)
                    for (auto& c : r.counts) c = static_cast<double>(poisson_draw(rng, c));
                const auto mle = mle_reconstruct(copy, opt);
                results[static_cast<std::size_t>(k)] = state_metrics(mle.rho, target);
                flags[static_cast<std::size_t>(k)] = mle.converged ? 0 : 1;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_resamples;
            }
        }
    };
    const int n_threads = std::clamp(threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads, 1, n_resamples);
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    MonteCarloMetrics out;
    out.resamples = n_resamples;
    for (char f : flags) out.not_converged += f;
    constexpr std::array fields{&StateMetrics::fidelity, &StateMetrics::concurrence, &StateMetrics::entropy_full,
                                &StateMetrics::entropy_reduced, &StateMetrics::purity};
    const double n = static_cast<double>(n_resamples);
    for (auto field : fields) {
        double mean = 0.0;
        for (const auto& r : results) mean += r.*field;
        mean /= n;
        double var = 0.0;
        for (const auto& r : results) var += (r.*field - mean) * (r.*field - mean);
        out.mean.*field = mean;
        out.std.*field = std::sqrt(var / (n - 1.0));
    }
    return out;
}

}  // namespace lophoton::tomography
