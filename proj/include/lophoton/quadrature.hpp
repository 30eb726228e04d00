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

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "lophoton/error.hpp"

namespace lophoton::quadrature {

struct Result {
    double value{0.0};
    double error{0.0};  // estimated absolute error
    int evaluations{0};
    int intervals{0};
};

struct Options {
    double rel_tol{1e-8};
    double abs_tol{0.0};
    int max_intervals{4000};
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for kronrod_nodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> gauss_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename F>
Segment gauss_kronrod15(F& f, double a, double b) {
    const double center = 0.5 * (a + b), half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kronrod_weights[7];
    double gauss = fc * gauss_weights[3];
    for (int k = 0; k < 7; ++k) {
        const double dx = half * kronrod_nodes[static_cast<std::size_t>(k)];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += kronrod_weights[static_cast<std::size_t>(k)] * sum;
        if (k % 2 == 1) gauss += gauss_weights[static_cast<std::size_t>(k / 2)] * sum;
    }
    return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod (7/15) on the finite interval [a, b]. The
// interval with the largest error estimate is bisected until the summed
// estimate meets max(abs_tol, rel_tol * |I|).
template <typename F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
    int evaluations = 0;
    auto counted = [&](double x) {
        ++evaluations;
        return f(x);
    };

    std::priority_queue<detail::Segment> heap;
    auto first = detail::gauss_kronrod15(counted, a, b);
    double total = first.value, total_error = first.error;
    heap.push(first);

    auto converged = [&] {
        return total_error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    };

    while (!converged()) {
        if (static_cast<int>(heap.size()) >= opt.max_intervals)
            throw error(errc::quadrature_failure, "interval budget exhausted before tolerance was met");
        const auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const auto left = detail::gauss_kronrod15(counted, worst.a, mid);
        const auto right = detail::gauss_kronrod15(counted, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    if (!std::isfinite(total))
        throw error(errc::quadrature_failure, "integrand produced a non-finite value");

    // Recompute sums from the leaves to avoid drift from the running updates.
    Result r{0.0, 0.0, evaluations, static_cast<int>(heap.size())};
    while (!heap.empty()) {
        r.value += heap.top().value;
        r.error += heap.top().error;
        heap.pop();
    }
    return r;
}

}  // namespace lophoton::quadrature
