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
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "lophoton/emitter.hpp"
#include "lophoton/error.hpp"
#include "lophoton/random.hpp"

namespace lophoton::counting {

inline constexpr double default_rep_period_ns = 1000.0 / 76.0;  // 76 MHz laser
inline constexpr double default_window_ps = 2000.0;

struct Bin {
    double tau_ps{0.0};  // bin center
    std::int64_t counts{0};
};

struct CoincidenceHistogram {
    double bin_width_ps{16.0};
    std::vector<Bin> bins;
    double rep_period_ns{default_rep_period_ns};
    std::optional<double> pulse_pair_sep_ns;  // set for HOM pulse-pair data

    void validate() const {
        if (!(bin_width_ps > 0.0)) throw error(errc::invalid_argument, "bin width must be > 0");
        if (!(rep_period_ns > 0.0)) throw error(errc::invalid_argument, "repetition period must be > 0");
        if (pulse_pair_sep_ns && !(*pulse_pair_sep_ns > 0.0))
            throw error(errc::invalid_argument, "pulse pair separation must be > 0");
        for (std::size_t i = 0; i < bins.size(); ++i) {
            if (bins[i].counts < 0) throw error(errc::invalid_argument, "negative bin count");
            if (i > 0 && !(bins[i].tau_ps > bins[i - 1].tau_ps))
                throw error(errc::invalid_argument, "bins must be sorted by tau");
        }
    }

    std::int64_t total() const {
        std::int64_t sum = 0;
        for (const auto& b : bins) sum += b.counts;
        return sum;
    }
};

// One expected coincidence peak. rep_index counts laser periods; offset is
// the position inside a pulse-pair cluster in units of the pair separation
// (always 0 for HBT data).
struct PeakIntegral {
    double center_ps{0.0};
    double window_ps{0.0};  // half-width: bins with center in [c - w, c + w)
    double area{0.0};       // background subtracted
    double raw_counts{0.0};
    double variance{0.0};   // Poisson variance of area
    int n_bins{0};
    int rep_index{0};
    int offset{0};
    bool is_central{false};
};

struct PeakOptions {
    bool subtract_background{true};
    // Constant extra rate per bin removed on top of the estimated background,
    // a stand-in for laser-leakage correction.
    double leakage_per_bin{0.0};
};

struct PeakSet {
    std::vector<PeakIntegral> peaks;
    double background_per_bin{0.0};
    int background_bins{0};

    const PeakIntegral* find(int rep_index, int offset) const {
        for (const auto& p : peaks)
            if (p.rep_index == rep_index && p.offset == offset) return &p;
        return nullptr;
    }
};

namespace detail {

struct Center {
    double tau_ps;
    int rep_index;
    int offset;
};

inline std::vector<Center> expected_centers(const CoincidenceHistogram& h, double window_ps) {
    std::vector<Center> centers;
    if (h.bins.empty()) return centers;
    const double lo = h.bins.front().tau_ps - 0.5 * h.bin_width_ps;
    const double hi = h.bins.back().tau_ps + 0.5 * h.bin_width_ps;
    const double rep = h.rep_period_ns * 1000.0;
    const double sep = h.pulse_pair_sep_ns ? *h.pulse_pair_sep_ns * 1000.0 : 0.0;
    const int max_offset = h.pulse_pair_sep_ns ? 2 : 0;
    const int k_lo = static_cast<int>(std::floor(lo / rep)) - 1;
    const int k_hi = static_cast<int>(std::ceil(hi / rep)) + 1;
    for (int k = k_lo; k <= k_hi; ++k)
        for (int m = -max_offset; m <= max_offset; ++m) {
            const double c = k * rep + m * sep;
            if (c - window_ps >= lo - 1e-9 && c + window_ps <= hi + 1e-9) centers.push_back({c, k, m});
        }
    std::sort(centers.begin(), centers.end(), [](const Center& a, const Center& b) { return a.tau_ps < b.tau_ps; });
    return centers;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace detail

inline PeakSet integrate_peaks(const CoincidenceHistogram& h, double window_ps = default_window_ps,
                               const PeakOptions& opt = {}) {
    h.validate();
    if (!(window_ps > 0.0)) throw error(errc::invalid_argument, "window must be > 0");
    if (!(window_ps < 0.5 * h.rep_period_ns * 1000.0))
        throw error(errc::window_overlap, "window must be shorter than half the repetition period");
    const auto centers = detail::expected_centers(h, window_ps);
    for (std::size_t i = 1; i < centers.size(); ++i)
        if (centers[i].tau_ps - centers[i - 1].tau_ps < 2.0 * window_ps - 1e-9)
            throw error(errc::window_overlap, "integration windows of neighbouring peaks collide");

    PeakSet out;
    std::vector<double> background;
    for (const auto& b : h.bins) {
        bool far = true;
        for (const auto& c : centers)
            if (std::abs(b.tau_ps - c.tau_ps) <= window_ps) {
                far = false;
                break;
            }
        if (far) background.push_back(static_cast<double>(b.counts));
    }
    out.background_bins = static_cast<int>(background.size());
    out.background_per_bin = opt.subtract_background ? detail::median(background) : 0.0;
    const double per_bin = out.background_per_bin + opt.leakage_per_bin;

    for (const auto& c : centers) {
        PeakIntegral p{c.tau_ps, window_ps, 0.0, 0.0, 0.0, 0, c.rep_index, c.offset, c.rep_index == 0 && c.offset == 0};
        for (const auto& b : h.bins)
            if (b.tau_ps >= c.tau_ps - window_ps && b.tau_ps < c.tau_ps + window_ps) {
                p.raw_counts += static_cast<double>(b.counts);
                ++p.n_bins;
            }
        p.area = std::max(0.0, p.raw_counts - per_bin * p.n_bins);
        p.variance = p.raw_counts;
        out.peaks.push_back(p);
    }
    return out;
}

struct Estimate {
    double value{0.0};
    double error{0.0};
};

inline Estimate g2_zero(const CoincidenceHistogram& h, double window_ps = default_window_ps,
                        const PeakOptions& opt = {}) {
    const auto set = integrate_peaks(h, window_ps, opt);
    const PeakIntegral* central = set.find(0, 0);
    std::vector<const PeakIntegral*> side;
    for (const auto& p : set.peaks)
        if (p.offset == 0 && p.rep_index != 0) side.push_back(&p);
    if (side.size() < 3 || central == nullptr)
        throw error(errc::no_side_peaks, "need the central peak and at least 3 side peaks");

    double side_area = 0.0, side_var = 0.0;
    for (const auto* p : side) {
        side_area += p->area;
        side_var += p->variance;
    }
    const double n = static_cast<double>(side.size());
    const double mean = side_area / n;
    if (!(mean > 0.0)) throw error(errc::no_side_peaks, "side peaks are empty");
    const double mean_var = side_var / (n * n);
    const double g2 = central->area / mean;
    const double err = std::sqrt(central->variance / (mean * mean) +
                                 central->area * central->area * mean_var / (mean * mean * mean * mean));
    return {g2, err};
}

// Reference area for fully distinguishable photons, given integrated peaks.
// For pulse-pair excitation with a balanced interferometer the same-cycle
// cluster has areas 1:2:2:2:1, so the central peak of distinguishable
// photons equals each tau = +-dt satellite.
struct HomEstimator {
    std::function<Estimate(const PeakSet&)> reference;
    // When set, peak areas are obtained by a linear least-squares fit of
    // known peak profiles instead of window integration. This removes the
    // crosstalk between neighbouring peaks that overlap at short delays.
    std::optional<emitter::DecayParams> profile;
};

inline Estimate satellite_reference(const PeakSet& set, double scale = 1.0) {
    const PeakIntegral* left = set.find(0, -1);
    const PeakIntegral* right = set.find(0, 1);
    if (!left || !right) throw error(errc::unresolved_cluster, "tau = +-dt satellites are outside the histogram");
    const double mean = 0.5 * (left->area + right->area);
    const double var = 0.25 * (left->variance + right->variance);
    return {scale * mean, scale * std::sqrt(var)};
}

inline HomEstimator default_hom_estimator() {
    return {[](const PeakSet& s) { return satellite_reference(s); }, std::nullopt};
}

// Unit-area peak profile at offset dtau from the peak center: the
// self-interference TRPL trace mirrored in tau, or a two-sided exponential
// when there is no fine-structure splitting.
inline double peak_profile(double dtau_ps, const emitter::DecayParams& p) {
    const double d = std::abs(dtau_ps);
    if (p.delta_inv_ps > 0.0) return emitter::trpl_intensity(d, p);
    return std::exp(-d / p.T1_ps);
}

namespace detail {

// Least-squares areas of every expected peak plus a flat background, with
// the covariance of the areas estimated from Poisson counts.
inline PeakSet fit_peak_areas(const CoincidenceHistogram& h, double window_ps, const emitter::DecayParams& shape) {
    const auto centers = expected_centers(h, window_ps);
    const Eigen::Index nb = static_cast<Eigen::Index>(h.bins.size());
    const Eigen::Index np = static_cast<Eigen::Index>(centers.size());
    Eigen::MatrixXd x(nb, np + 1);
    Eigen::VectorXd y(nb);
    for (Eigen::Index i = 0; i < nb; ++i) y(i) = static_cast<double>(h.bins[static_cast<std::size_t>(i)].counts);
    for (Eigen::Index j = 0; j < np; ++j) {
        for (Eigen::Index i = 0; i < nb; ++i)
            x(i, j) = peak_profile(h.bins[static_cast<std::size_t>(i)].tau_ps - centers[static_cast<std::size_t>(j)].tau_ps, shape);
        const double norm = x.col(j).sum();
        if (norm > 0.0) x.col(j) /= norm;
    }
    x.col(np).setOnes();
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::LDLT<Eigen::MatrixXd> solver(xtx);
    const Eigen::VectorXd coef = solver.solve(x.transpose() * y);
    // Sandwich covariance with Poisson variance = counts (floored at 1).
    const Eigen::MatrixXd bread = solver.solve(Eigen::MatrixXd::Identity(np + 1, np + 1));
    const Eigen::MatrixXd meat = x.transpose() * y.cwiseMax(1.0).asDiagonal() * x;
    const Eigen::MatrixXd cov = bread * meat * bread;

    PeakSet out;
    out.background_per_bin = coef(np);
    out.background_bins = static_cast<int>(nb);
    for (Eigen::Index j = 0; j < np; ++j) {
        const auto& c = centers[static_cast<std::size_t>(j)];
        PeakIntegral p{c.tau_ps, window_ps, coef(j), coef(j), cov(j, j), 0, c.rep_index, c.offset,
                       c.rep_index == 0 && c.offset == 0};
        out.peaks.push_back(p);
    }
    return out;
}

}  // namespace detail

inline Estimate hom_visibility(const CoincidenceHistogram& h, double window_ps,
                               const HomEstimator& estimator = default_hom_estimator(),
                               const PeakOptions& opt = {}) {
    h.validate();
    if (!h.pulse_pair_sep_ns) throw error(errc::invalid_argument, "HOM analysis needs pulse_pair_sep");
    if (*h.pulse_pair_sep_ns * 1000.0 < 3.0 * h.bin_width_ps)
        throw error(errc::unresolved_cluster, "pulse separation below three bins");

    const PeakSet set = estimator.profile ? detail::fit_peak_areas(h, window_ps, *estimator.profile)
                                          : integrate_peaks(h, window_ps, opt);
    const PeakIntegral* central = set.find(0, 0);
    if (!central) throw error(errc::unresolved_cluster, "central peak is outside the histogram");
    const Estimate ref = estimator.reference(set);
    if (!(ref.value > 0.0)) throw error(errc::unresolved_cluster, "reference area is not positive");
    const double v = 1.0 - central->area / ref.value;
    const double err = std::sqrt(central->variance / (ref.value * ref.value) +
                                 central->area * central->area * ref.error * ref.error /
                                     std::pow(ref.value, 4));
    return {v, err};
}

// ---------------------------------------------------------------------------
// Synthetic histograms.

struct HbtModel {
    double g2{0.0};
};

struct HomModel {
    double visibility{1.0};
    double delay_ns{2.0};
};

using HistogramModel = std::variant<HbtModel, HomModel>;

struct SynthOptions {
    double bin_width_ps{16.0};
    double rep_period_ns{default_rep_period_ns};
    int side_periods{4};            // laser periods on each side of tau = 0
    double background_per_bin{0.0};  // flat accidental rate, added before sampling
};

struct PeakWeight {
    double center_ps;
    double weight;
};

// Relative peak weights. HBT: one peak per laser period, the central one
// scaled by g2. HOM pulse pairs: same-cycle cluster 1:2:2(1-V):2:1, other
// cycles 1:4:6:4:1 (no interference between photons of different cycles).
inline std::vector<PeakWeight> model_peaks(const HistogramModel& model, const SynthOptions& opt) {
    std::vector<PeakWeight> peaks;
    const double rep = opt.rep_period_ns * 1000.0;
    if (const auto* hbt = std::get_if<HbtModel>(&model)) {
        for (int k = -opt.side_periods; k <= opt.side_periods; ++k)
            peaks.push_back({k * rep, k == 0 ? hbt->g2 : 1.0});
        return peaks;
    }
    const auto& hom = std::get<HomModel>(model);
    const double sep = hom.delay_ns * 1000.0;
    constexpr std::array<double, 5> same{0.5, 1.0, 1.0, 1.0, 0.5};
    constexpr std::array<double, 5> other{1.0, 4.0, 6.0, 4.0, 1.0};
    for (int k = -opt.side_periods; k <= opt.side_periods; ++k)
        for (int m = -2; m <= 2; ++m) {
            double w = (k == 0 ? same : other)[static_cast<std::size_t>(m + 2)];
            if (k == 0 && m == 0) w *= 1.0 - hom.visibility;
            peaks.push_back({k * rep + m * sep, w});
        }
    return peaks;
}

struct ExpectedHistogram {
    std::vector<double> tau_ps;
    std::vector<double> mean_counts;
};

inline ExpectedHistogram expected_histogram(const HistogramModel& model, const emitter::DecayParams& p,
                                            double total_counts, const SynthOptions& opt = {}) {
    p.validate();
    if (!(total_counts > 0.0)) throw error(errc::invalid_argument, "total_counts must be > 0");
    if (const auto* hom = std::get_if<HomModel>(&model))
        if (!(hom->visibility >= 0.0 && hom->visibility <= 1.0) || !(hom->delay_ns > 0.0))
            throw error(errc::invalid_argument, "HOM model needs V in [0,1] and delay > 0");
    if (const auto* hbt = std::get_if<HbtModel>(&model))
        if (!(hbt->g2 >= 0.0)) throw error(errc::invalid_argument, "g2 must be >= 0");

    const double rep = opt.rep_period_ns * 1000.0;
    const double half_range = (opt.side_periods + 0.5) * rep;
    const int n = static_cast<int>(std::floor(2.0 * half_range / opt.bin_width_ps));
    ExpectedHistogram out;
    out.tau_ps.resize(static_cast<std::size_t>(n));
    out.mean_counts.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) out.tau_ps[static_cast<std::size_t>(i)] = -half_range + (i + 0.5) * opt.bin_width_ps;

    const auto peaks = model_peaks(model, opt);
    double weight_sum = 0.0;
    for (const auto& pk : peaks) weight_sum += pk.weight;
    std::vector<double> shape(static_cast<std::size_t>(n));
    for (const auto& pk : peaks) {
        if (pk.weight == 0.0) continue;
        double norm = 0.0;
        for (int i = 0; i < n; ++i) {
            shape[static_cast<std::size_t>(i)] = peak_profile(out.tau_ps[static_cast<std::size_t>(i)] - pk.center_ps, p);
            norm += shape[static_cast<std::size_t>(i)];
        }
        const double scale = total_counts * pk.weight / weight_sum / norm;
        for (int i = 0; i < n; ++i) out.mean_counts[static_cast<std::size_t>(i)] += scale * shape[static_cast<std::size_t>(i)];
    }
    for (auto& m : out.mean_counts) m += opt.background_per_bin;
    return out;
}

inline CoincidenceHistogram synth_histogram(const HistogramModel& model, const emitter::DecayParams& p,
                                            double total_counts, std::uint64_t seed, const SynthOptions& opt = {}) {
    const auto expected = expected_histogram(model, p, total_counts, opt);
    Rng rng(seed);
    CoincidenceHistogram h;
    h.bin_width_ps = opt.bin_width_ps;
    h.rep_period_ns = opt.rep_period_ns;
    if (const auto* hom = std::get_if<HomModel>(&model)) h.pulse_pair_sep_ns = hom->delay_ns;
    h.bins.reserve(expected.tau_ps.size());
    for (std::size_t i = 0; i < expected.tau_ps.size(); ++i)
        h.bins.push_back({expected.tau_ps[i], poisson_draw(rng, expected.mean_counts[i])});
    return h;
}

inline std::vector<CoincidenceHistogram> poisson_resample(const CoincidenceHistogram& h, int n, std::uint64_t seed) {
    if (n < 1) throw error(errc::invalid_argument, "need at least one resample");
    h.validate();
    std::vector<CoincidenceHistogram> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        CoincidenceHistogram r = h;
        for (auto& b : r.bins) b.counts = poisson_draw(rng, static_cast<double>(b.counts));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace lophoton::counting
