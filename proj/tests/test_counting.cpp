#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "lophoton/counting.hpp"

using namespace lophoton;
using namespace lophoton::counting;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const emitter::DecayParams plain_decay{350.0, 0.0};
const emitter::DecayParams split_decay{350.0, emitter::ueV_to_inv_ps(6.4)};

// Empty histogram spanning +-periods laser periods with one delta peak
// (single bin) per expected center.
CoincidenceHistogram delta_histogram(int periods, double bin = 16.0) {
    CoincidenceHistogram h;
    h.bin_width_ps = bin;
    const double half = (periods + 0.5) * h.rep_period_ns * 1000.0;
    const int n = static_cast<int>(std::floor(2.0 * half / bin));
    for (int i = 0; i < n; ++i) h.bins.push_back({-half + (i + 0.5) * bin, 0});
    return h;
}

void put(CoincidenceHistogram& h, double tau, std::int64_t counts) {
    auto it = std::min_element(h.bins.begin(), h.bins.end(), [tau](const Bin& a, const Bin& b) {
        return std::abs(a.tau_ps - tau) < std::abs(b.tau_ps - tau);
    });
    it->counts += counts;
}

CoincidenceHistogram rounded(const ExpectedHistogram& e, double bin = 16.0) {
    CoincidenceHistogram h;
    h.bin_width_ps = bin;
    for (std::size_t i = 0; i < e.tau_ps.size(); ++i)
        h.bins.push_back({e.tau_ps[i], static_cast<std::int64_t>(std::llround(e.mean_counts[i]))});
    return h;
}

// Long repetition period so that pulse-pair clusters at 8 ns stay apart.
SynthOptions slow_laser() {
    SynthOptions opt;
    opt.rep_period_ns = 50.0;
    return opt;
}

CoincidenceHistogram scaled(CoincidenceHistogram h, std::int64_t k) {
    for (auto& b : h.bins) b.counts *= k;
    return h;
}

}  // namespace

TEST_CASE("delta peaks integrate to their exact areas", "[counting]") {
    auto h = delta_histogram(3);
    const double rep = h.rep_period_ns * 1000.0;
    for (int k = -3; k <= 3; ++k) put(h, k * rep, 100 + 10 * k);
    const auto set = integrate_peaks(h, 2000.0);
    REQUIRE(set.peaks.size() == 7);
    for (const auto& p : set.peaks) {
        CHECK(p.area == 100.0 + 10.0 * p.rep_index);
        CHECK(p.is_central == (p.rep_index == 0));
    }
    CHECK(set.background_per_bin == 0.0);
}

TEST_CASE("2 ns window captures exponential peak mass", "[counting]") {
    const double total = 9.0e6;
    const auto e = expected_histogram(HbtModel{1.0}, plain_decay, total);
    const auto set = integrate_peaks(rounded(e), 2000.0, {false, 0.0});
    REQUIRE(set.peaks.size() == 9);
    const double captured_bound = 1.0 - std::exp(-2000.0 / 350.0);
    for (const auto& p : set.peaks) CHECK(p.area / (total / 9.0) >= captured_bound - 1e-3);
    for (const auto& p : set.peaks) CHECK(p.area / (total / 9.0) >= 0.996);
}

TEST_CASE("flat background is removed", "[counting]") {
    SynthOptions opt;
    const auto clean = integrate_peaks(rounded(expected_histogram(HbtModel{0.5}, plain_decay, 1e6, opt)), 2000.0);
    opt.background_per_bin = 10.0;
    const auto noisy = integrate_peaks(rounded(expected_histogram(HbtModel{0.5}, plain_decay, 1e6, opt)), 2000.0);
    CHECK_THAT(noisy.background_per_bin, WithinAbs(10.0, 0.5));
    REQUIRE(clean.peaks.size() == noisy.peaks.size());
    for (std::size_t i = 0; i < clean.peaks.size(); ++i)
        CHECK(std::abs(noisy.peaks[i].area - clean.peaks[i].area) <= 0.005 * clean.peaks[i].area);
}

TEST_CASE("leakage correction subtracts a constant per bin", "[counting]") {
    auto h = delta_histogram(2);
    for (auto& b : h.bins) b.counts = 4;
    put(h, 0.0, 100);
    const auto set = integrate_peaks(h, 800.0, {true, 1.0});
    const auto* c = set.find(0, 0);
    REQUIRE(c);
    CHECK_THAT(c->area, WithinAbs(100.0 - c->n_bins, 1e-9));
}

TEST_CASE("areas plus background account for all counts", "[counting]") {
    SynthOptions opt;
    opt.background_per_bin = 3.0;
    const auto h = synth_histogram(HbtModel{0.2}, plain_decay, 2e5, 17, opt);
    const auto set = integrate_peaks(h, 2000.0);
    double sum = set.background_per_bin * static_cast<double>(h.bins.size());
    for (const auto& p : set.peaks) sum += p.area;
    CHECK(std::abs(sum - static_cast<double>(h.total())) <= 0.01 * static_cast<double>(h.total()));
}

TEST_CASE("window validation", "[counting]") {
    const auto h = delta_histogram(2);
    CHECK_THROWS_MATCHES(integrate_peaks(h, 0.5 * h.rep_period_ns * 1000.0), error,
                         Catch::Matchers::Predicate<error>([](const error& e) { return e.code() == errc::window_overlap; }));
    auto hom = h;
    hom.pulse_pair_sep_ns = 2.0;
    CHECK_THROWS_AS(integrate_peaks(hom, 1500.0), error);
    CHECK_NOTHROW(integrate_peaks(hom, 1000.0));
    CHECK_THROWS_AS(integrate_peaks(h, -1.0), error);
    auto bad = h;
    bad.bins[3].counts = -1;
    CHECK_THROWS_AS(integrate_peaks(bad, 1000.0), error);
    bad = h;
    std::swap(bad.bins[3], bad.bins[4]);
    CHECK_THROWS_AS(integrate_peaks(bad, 1000.0), error);
}

TEST_CASE("g2 from peak areas", "[counting]") {
    auto h = delta_histogram(3);
    const double rep = h.rep_period_ns * 1000.0;
    for (int k = -3; k <= 3; ++k)
        if (k != 0) put(h, k * rep, 200);
    CHECK(g2_zero(h).value == 0.0);
    put(h, 0.0, 1);
    const auto g = g2_zero(h);
    CHECK_THAT(g.value, WithinRel(0.005, 1e-12));
    CHECK(g.error > 0.0);
    CHECK(g.value < 0.01);

    auto narrow = delta_histogram(1);
    put(narrow, 0.0, 1);
    CHECK_THROWS_MATCHES(g2_zero(narrow), error,
                         Catch::Matchers::Predicate<error>([](const error& e) { return e.code() == errc::no_side_peaks; }));
}

TEST_CASE("g2 estimator is unbiased on resampled synthetic data", "[counting]") {
    const double g_true = 0.008;
    std::vector<double> values;
    double sigma = 0.0;
    for (int k = 0; k < 500; ++k) {
        const auto h = synth_histogram(HbtModel{g_true}, split_decay, 1e5, derive_seed(99, k));
        const auto g = g2_zero(h);
        values.push_back(g.value);
        sigma += g.error;
    }
    sigma /= 500.0;
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / 500.0;
    CHECK(std::abs(mean - g_true) <= sigma);
}

TEST_CASE("HOM visibility limits", "[counting]") {
    auto h = delta_histogram(2);
    h.pulse_pair_sep_ns = 2.0;
    put(h, -2000.0, 300);
    put(h, 2000.0, 300);
    CHECK(hom_visibility(h, 1000.0).value == 1.0);
    put(h, 0.0, 300);
    CHECK_THAT(hom_visibility(h, 1000.0).value, WithinAbs(0.0, 1e-15));

    const HomEstimator half{[](const PeakSet& s) { return satellite_reference(s, 0.5); }, std::nullopt};
    auto h2 = h;
    for (auto& b : h2.bins)
        if (std::abs(b.tau_ps) < 8.0) b.counts = 150;
    CHECK_THAT(hom_visibility(h2, 1000.0, half).value, WithinAbs(0.0, 1e-15));

    auto tight = h;
    tight.pulse_pair_sep_ns = 0.04;
    CHECK_THROWS_MATCHES(hom_visibility(tight, 10.0), error,
                         Catch::Matchers::Predicate<error>([](const error& e) { return e.code() == errc::unresolved_cluster; }));
    auto none = h;
    none.pulse_pair_sep_ns.reset();
    CHECK_THROWS_AS(hom_visibility(none, 1000.0), error);
}

TEST_CASE("HOM round trip at a resolved delay", "[counting]") {
    int inside = 0;
    for (int k = 0; k < 20; ++k) {
        const auto h = synth_histogram(HomModel{0.947, 8.0}, split_decay, 1e5, derive_seed(5, k), slow_laser());
        const auto v = hom_visibility(h, 3000.0);
        if (std::abs(v.value - 0.947) <= 3.0 * v.error) ++inside;
    }
    CHECK(inside >= 19);
}

TEST_CASE("HOM round trip at 2 ns with the profile estimator", "[counting]") {
    HomEstimator est = default_hom_estimator();
    est.profile = split_decay;
    int inside = 0;
    for (int k = 0; k < 20; ++k) {
        const auto h = synth_histogram(HomModel{0.947, 2.0}, split_decay, 1e5, derive_seed(7, k));
        const auto v = hom_visibility(h, 1000.0, est);
        if (std::abs(v.value - 0.947) <= 3.0 * v.error) ++inside;
    }
    CHECK(inside >= 19);
}

TEST_CASE("ratio estimators are invariant under integer rescaling", "[counting]") {
    SynthOptions opt;
    opt.background_per_bin = 0.5;
    const auto hbt = synth_histogram(HbtModel{0.05}, split_decay, 5e4, 3, opt);
    CHECK_THAT(g2_zero(scaled(hbt, 7)).value, WithinAbs(g2_zero(hbt).value, 1e-12));
    const auto hom = synth_histogram(HomModel{0.9, 2.0}, split_decay, 5e4, 4, opt);
    CHECK_THAT(hom_visibility(scaled(hom, 3), 1000.0).value, WithinAbs(hom_visibility(hom, 1000.0).value, 1e-12));
    HomEstimator est = default_hom_estimator();
    est.profile = split_decay;
    CHECK_THAT(hom_visibility(scaled(hom, 3), 1000.0, est).value,
               WithinAbs(hom_visibility(hom, 1000.0, est).value, 1e-9));
}

TEST_CASE("synthesis suppresses the central peak", "[counting]") {
    SynthOptions opt;
    for (const auto& pk : model_peaks(HbtModel{0.0}, opt))
        if (pk.center_ps == 0.0) CHECK(pk.weight == 0.0);
    for (const auto& pk : model_peaks(HomModel{1.0, 2.0}, opt))
        if (pk.center_ps == 0.0) CHECK(pk.weight == 0.0);
    const auto e = expected_histogram(HomModel{1.0, 8.0}, split_decay, 1e5, slow_laser());
    double central = 0.0;
    for (std::size_t i = 0; i < e.tau_ps.size(); ++i)
        if (std::abs(e.tau_ps[i]) < 2000.0) central += e.mean_counts[i];
    CHECK(central < 1e-3);
    CHECK_THROWS_AS(expected_histogram(HbtModel{0.0}, plain_decay, 0.0), error);
    CHECK_THROWS_AS(expected_histogram(HomModel{1.5, 2.0}, plain_decay, 1.0), error);
}

TEST_CASE("synthesis is deterministic per seed", "[counting]") {
    const auto a = synth_histogram(HbtModel{0.1}, split_decay, 1e4, 11);
    const auto b = synth_histogram(HbtModel{0.1}, split_decay, 1e4, 11);
    const auto c = synth_histogram(HbtModel{0.1}, split_decay, 1e4, 12);
    REQUIRE(a.bins.size() == b.bins.size());
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.bins.size(); ++i) {
        same = same && a.bins[i].counts == b.bins[i].counts;
        differs = differs || a.bins[i].counts != c.bins[i].counts;
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("fine-structure beats put satellite lobes about 0.65 ns out", "[counting]") {
    const double period = emitter::trpl_period_ps(split_decay);
    CHECK_THAT(period, WithinAbs(646.2, 0.5));
    CHECK(peak_profile(period, split_decay) < 1e-20);
    // position of the strongest lobe beyond the first beat node
    double best = 0.0, at = 0.0;
    for (double t = period; t < 2.0 * period; t += 0.5) {
        const double v = peak_profile(t, split_decay);
        if (v > best) {
            best = v;
            at = t;
        }
    }
    CHECK_THAT(at - emitter::trpl_peak_time(split_decay), WithinAbs(650.0, 50.0));
    CHECK(best > 0.0);
    CHECK(peak_profile(-300.0, split_decay) == peak_profile(300.0, split_decay));
}

TEST_CASE("Poisson resampling", "[counting]") {
    auto zero = delta_histogram(1);
    for (const auto& r : poisson_resample(zero, 5, 1))
        for (const auto& b : r.bins) CHECK(b.counts == 0);

    CoincidenceHistogram h;
    h.bins = {{0.0, 100}, {16.0, 25}};
    const auto rs = poisson_resample(h, 10000, 42);
    double m0 = 0.0, m1 = 0.0, v1 = 0.0;
    for (const auto& r : rs) {
        m0 += static_cast<double>(r.bins[0].counts);
        m1 += static_cast<double>(r.bins[1].counts);
    }
    m0 /= 1e4;
    m1 /= 1e4;
    for (const auto& r : rs) v1 += std::pow(static_cast<double>(r.bins[1].counts) - m1, 2);
    v1 /= 9999.0;
    CHECK_THAT(m0, WithinAbs(100.0, 1.0));
    CHECK_THAT(v1, WithinRel(m1, 0.05));

    const auto again = poisson_resample(h, 3, 42);
    for (int k = 0; k < 3; ++k) CHECK(again[k].bins[0].counts == rs[k].bins[0].counts);
    CHECK_THROWS_AS(poisson_resample(h, 0, 1), error);
}
