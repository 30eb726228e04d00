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
#include <functional>
#include <limits>

#include "lophoton/error.hpp"

namespace lophoton::least_squares {

using Residuals = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct Options {
    int max_iterations{300};
    double cost_tol{1e-15};       // relative decrease of 0.5*|r|^2
    double step_tol{1e-12};       // relative parameter step
    double gradient_tol{1e-14};   // infinity norm of J^T r, scaled by cost
    double jacobian_step{1e-6};   // relative central-difference step
    double initial_damping{1e-3};
};

struct Result {
    Eigen::VectorXd params;
    double cost{0.0};        // 0.5 * sum r^2
    double rms{0.0};
    int iterations{0};
    bool converged{false};
};

namespace detail {

inline Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline Eigen::MatrixXd jacobian(const Residuals& f, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                                const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double rel_step) {
    Eigen::MatrixXd j(r0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = rel_step * std::max(std::abs(x(k)), 1e-3);
        Eigen::VectorXd up = x, down = x;
        up(k) = std::min(x(k) + h, hi(k));
        down(k) = std::max(x(k) - h, lo(k));
        const double span = up(k) - down(k);
        if (span <= 0.0) {
            j.col(k).setZero();
            continue;
        }
        const Eigen::VectorXd rup = up(k) == x(k) ? r0 : f(up);
        const Eigen::VectorXd rdown = down(k) == x(k) ? r0 : f(down);
        j.col(k) = (rup - rdown) / span;
    }
    return j;
}

}  // namespace detail

// Levenberg-Marquardt with Marquardt diagonal scaling and box constraints
// enforced by projection. Throws fit_diverged when the residuals become
// non-finite or when the iteration budget runs out without any reduction.
inline Result minimize(const Residuals& f, Eigen::VectorXd x, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper, const Options& opt = {}) {
    x = detail::clamp(x, lower, upper);
    Eigen::VectorXd r = f(x);
    if (!r.allFinite()) throw error(errc::fit_diverged, "residuals are not finite at the initial guess");
    const double initial_cost = 0.5 * r.squaredNorm();
    if (!std::isfinite(initial_cost)) throw error(errc::fit_diverged, "cost overflows at the initial guess");
    double cost = initial_cost;
    double damping = opt.initial_damping;

    Result out;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        const Eigen::MatrixXd j = detail::jacobian(f, x, r, lower, upper, opt.jacobian_step);
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * r;
        if (!jtj.allFinite() || !g.allFinite()) throw error(errc::fit_diverged, "jacobian is not finite");
        if (g.lpNorm<Eigen::Infinity>() <= opt.gradient_tol * std::max(cost, 1e-300)) {
            out.converged = true;
            break;
        }
        Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300));

        bool accepted = false;
        while (damping < 1e16) {
            Eigen::MatrixXd lhs = jtj;
            lhs.diagonal() += damping * scale;
            const Eigen::VectorXd step = lhs.ldlt().solve(-g);
            if (!step.allFinite()) throw error(errc::fit_diverged, "step is not finite");
            const Eigen::VectorXd trial = detail::clamp(x + step, lower, upper);
            const Eigen::VectorXd r_trial = f(trial);
            const double trial_cost = r_trial.allFinite() ? 0.5 * r_trial.squaredNorm()
                                                          : std::numeric_limits<double>::infinity();
            if (trial_cost < cost) {
                const double decrease = (cost - trial_cost) / std::max(cost, 1e-300);
                const double moved = (trial - x).norm() / (x.norm() + opt.step_tol);
                x = trial;
                r = r_trial;
                cost = trial_cost;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (decrease < opt.cost_tol || moved < opt.step_tol) out.converged = true;
                break;
            }
            damping *= 4.0;
        }
        if (!accepted) {
            // No descent direction left at any damping: a local minimum.
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }

    if (!out.converged && !(cost < initial_cost))
        throw error(errc::fit_diverged, "residual not reduced after the iteration budget");

    out.params = x;
    out.cost = cost;
    out.rms = std::sqrt(2.0 * cost / static_cast<double>(std::max<Eigen::Index>(r.size(), 1)));
    out.iterations = it;
    return out;
}

}  // namespace lophoton::least_squares
