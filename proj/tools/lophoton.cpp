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

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lophoton/circuit.hpp"
#include "lophoton/counting.hpp"
#include "lophoton/emitter.hpp"
#include "lophoton/io.hpp"
#include "lophoton/random.hpp"
#include "lophoton/tomography.hpp"

namespace {

using lophoton::errc;
using lophoton::io::json;

enum exit_code : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_invalid_input = 2,
    exit_reconstruction = 3,
    exit_fit_diverged = 4,
};

// Raised for any failure inside the tomography stage of bell/reconstruct.
struct reconstruction_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::uint64_t seed{lophoton::default_seed};
    int threads{1};
    std::string out;
};

void emit(const Global& g, const std::string& text) {
    if (g.out.empty())
        std::cout << text << std::flush;
    else
        lophoton::io::write_atomic(g.out, text);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json header(const char* command) { return {{"schema_version", lophoton::io::schema_version}, {"command", command}}; }

template <typename F>
auto reconstruction_stage(F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw reconstruction_failure(e.what());
    }
}

// Grid syntax: "a:b:n" (linear), "log:a:b:n" (geometric) or "x1,x2,...".
std::vector<double> parse_grid(const std::string& text) {
    using lophoton::io::parse_double;
    using lophoton::io::parse_int;
    std::vector<std::string> parts;
    std::string token;
    const bool colon = text.find(':') != std::string::npos;
    std::istringstream ss(text);
    while (std::getline(ss, token, colon ? ':' : ',')) parts.push_back(token);
    if (!colon) {
        std::vector<double> out;
        for (const auto& p : parts) out.push_back(parse_double(p, "grid"));
        if (out.empty()) throw lophoton::error(errc::parse_error, "empty grid");
        return out;
    }
    const bool geometric = !parts.empty() && parts.front() == "log";
    if (geometric) parts.erase(parts.begin());
    if (parts.size() != 3) throw lophoton::error(errc::parse_error, "grid must be a:b:n, log:a:b:n or a list");
    const double a = parse_double(parts[0], "grid"), b = parse_double(parts[1], "grid");
    const auto n = parse_int(parts[2], "grid");
    if (n < 1 || n > 100000) throw lophoton::error(errc::parse_error, "grid count must be in 1..100000");
    if (geometric && !(a > 0.0 && b > 0.0)) throw lophoton::error(errc::parse_error, "log grid needs positive ends");
    std::vector<double> out;
    for (std::int64_t k = 0; k < n; ++k) {
        const double u = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
        out.push_back(geometric ? a * std::pow(b / a, u) : a + (b - a) * u);
    }
    return out;
}

json load_json_file(const std::string& path, const char* what) {
    return lophoton::io::parse_json(lophoton::io::read_file(path), what);
}

lophoton::tomography::Matrix4 bell_target(const std::string& name) {
    using lophoton::tomography::Vector4;
    const double s = M_SQRT1_2;
    Vector4 v;
    if (name == "psi_minus")
        v << 0, s, -s, 0;
    else if (name == "psi_plus")
        v << 0, s, s, 0;
    else if (name == "phi_minus")
        v << s, 0, 0, -s;
    else if (name == "phi_plus")
        v << s, 0, 0, s;
    else
        throw lophoton::error(errc::unknown_label, "unknown target state '" + name + "'");
    return v * v.adjoint();
}

json metrics_json(const lophoton::tomography::StateMetrics& m) {
    return {{"fidelity", m.fidelity}, {"concurrence", m.concurrence}, {"entropy_full", m.entropy_full},
            {"entropy_reduced", m.entropy_reduced}, {"purity", m.purity}};
}

// Point estimates from the MLE state with Monte Carlo mean and spread.
json tomography_json(const std::vector<lophoton::tomography::MeasurementRecord>& records,
                     const lophoton::tomography::Matrix4& target, int resamples, std::uint64_t seed, int threads) {
    using namespace lophoton::tomography;
    const auto mle = reconstruction_stage([&] { return mle_reconstruct(records); });
    const auto point = reconstruction_stage([&] { return state_metrics(mle.rho, target); });
    json out;
    out["rho"] = lophoton::io::matrix_to_json(mle.rho);
    out["mle"] = {{"log_likelihood", mle.log_likelihood}, {"iterations", mle.iterations},
                  {"converged", mle.converged}, {"gap_bound", mle.gap_bound}};
    json metrics = json::object();
    const json values = metrics_json(point);
    for (const auto& [key, value] : values.items()) metrics[key]["value"] = value;
    if (resamples > 0) {
        const auto mc = reconstruction_stage([&] { return monte_carlo_metrics(records, target, resamples, seed, threads); });
        const json mean = metrics_json(mc.mean), spread = metrics_json(mc.std);
        for (const auto& [key, value] : mean.items()) {
            metrics[key]["mc_mean"] = value;
            metrics[key]["std"] = spread[key];
        }
        out["monte_carlo"] = {{"resamples", mc.resamples}, {"not_converged", mc.not_converged}};
    } else {
        out["monte_carlo"] = {{"resamples", 0}, {"not_converged", 0}};
    }
    out["metrics"] = metrics;
    return out;
}

// ---------------------------------------------------------------------------

struct TruthTableArgs {
    double overlap{1.0};
    std::string basis{"ZZ"};
    std::string gate_file;
    std::optional<double> measured_fzz, measured_fxx;
};

void run_truth_table(const Global& g, const TruthTableArgs& a) {
    using namespace lophoton;
    const Gate gate = a.gate_file.empty() ? build_cnot() : io::gate_from_json(load_json_file(a.gate_file, "gate"));
    const gate_basis basis = a.basis == "XX" ? gate_basis::XX : gate_basis::ZZ;
    const auto table = truth_table(gate, basis, a.overlap);
    const double f_zz = basis_fidelity(basis == gate_basis::ZZ ? table : truth_table(gate, gate_basis::ZZ, a.overlap));
    const double f_xx = basis_fidelity(basis == gate_basis::XX ? table : truth_table(gate, gate_basis::XX, a.overlap));

    json j = header("truth-table");
    j["gate"] = gate.name;
    j["overlap"] = a.overlap;
    j["basis"] = a.basis;
    json labels = json::array();
    for (int k = 0; k < 4; ++k) labels.push_back(basis_label(basis, k));
    j["inputs"] = labels;
    j["outputs"] = labels;
    json rows = json::array();
    for (const auto& row : table.prob) rows.push_back(json(std::vector<double>(row.begin(), row.end())));
    j["table"] = rows;
    j["fidelity"] = basis_fidelity(table);
    double mean = 0.0;
    for (double s : table.success_prob) mean += s / 4.0;
    j["success_prob"] = mean;
    j["success_prob_per_input"] = std::vector<double>(table.success_prob.begin(), table.success_prob.end());
    const auto predicted = tomography::hofmann_bounds(f_zz, f_xx);
    j["hofmann"]["predicted"] = {{"f_zz", f_zz}, {"f_xx", f_xx}, {"lower", predicted.lower}, {"upper", predicted.upper}};
    if (a.measured_fzz || a.measured_fxx) {
        if (!a.measured_fzz || !a.measured_fxx)
            throw error(errc::invalid_argument, "--measured-fzz and --measured-fxx go together");
        const auto measured = tomography::hofmann_bounds(*a.measured_fzz, *a.measured_fxx);
        j["hofmann"]["measured"] = {{"f_zz", *a.measured_fzz}, {"f_xx", *a.measured_fxx},
                                    {"lower", measured.lower}, {"upper", measured.upper}};
    }
    emit(g, dump(j));
}

struct BellArgs {
    double overlap{1.0};
    std::int64_t counts{100000};
    int resamples{1000};
    std::string records_out;
};

void run_bell(const Global& g, const BellArgs& a) {
    using namespace lophoton;
    if (a.counts < 1) throw error(errc::invalid_argument, "--counts-per-setting must be >= 1");
    if (a.resamples != 0 && a.resamples < 100) throw error(errc::invalid_argument, "--resamples must be 0 or >= 100");
    const Gate cnot = build_cnot();
    const auto state = coincidence_evolve(cnot, {basis_state(pol::A), basis_state(pol::V), a.overlap});
    const tomography::Matrix4 target = bell_target("psi_minus");
    const tomography::Matrix4 rho = state.rho;
    const auto records = tomography::simulate_counts(rho, a.counts, derive_seed(g.seed, 0));
    if (!a.records_out.empty()) io::write_atomic(a.records_out, io::records_csv(records));

    json j = header("bell");
    j["seed"] = g.seed;
    j["overlap"] = a.overlap;
    j["counts_per_setting"] = a.counts;
    j["target"] = "psi_minus";
    j.update(tomography_json(records, target, a.resamples, derive_seed(g.seed, 1), g.threads));
    json prediction = metrics_json(tomography::state_metrics(rho, target));
    prediction["success_prob"] = state.success_prob;
    j["prediction"] = prediction;
    const double f_zz = basis_fidelity(truth_table(cnot, gate_basis::ZZ, a.overlap));
    const double f_xx = basis_fidelity(truth_table(cnot, gate_basis::XX, a.overlap));
    const auto bounds = tomography::hofmann_bounds(f_zz, f_xx);
    j["hofmann"] = {{"f_zz", f_zz}, {"f_xx", f_xx}, {"lower", bounds.lower}, {"upper", bounds.upper}};
    j["experiment"] = {{"fidelity", 0.825}, {"fidelity_std", 0.010}, {"concurrence", 0.745},
                       {"concurrence_std", 0.021}, {"entropy", 0.797}, {"entropy_std", 0.036},
                       {"chsh_fidelity_threshold", 0.78}, {"f_zz", 0.902}, {"f_xx", 0.874}};
    emit(g, dump(j));
}

struct ReconstructArgs {
    std::string data;
    std::string target{"psi_minus"};
    int resamples{1000};
};

void run_reconstruct(const Global& g, const ReconstructArgs& a) {
    using namespace lophoton;
    if (a.resamples != 0 && a.resamples < 100) throw error(errc::invalid_argument, "--resamples must be 0 or >= 100");
    std::ifstream in(a.data);
    if (!in) throw error(errc::parse_error, "cannot open '" + a.data + "'");
    const auto records = io::read_records(in);
    const auto target = bell_target(a.target);
    tomography::linear_inversion(records);  // rejects incomplete data as invalid input
    json j = header("reconstruct");
    j["seed"] = g.seed;
    j["target"] = a.target;
    j.update(tomography_json(records, target, a.resamples, derive_seed(g.seed, 1), g.threads));
    emit(g, dump(j));
}

struct VisibilityArgs {
    std::string mode{"vs_T"};
    std::string params;
    std::string grid;
    double delay_ns{2.0};
    double temperature_k{4.0};
    std::optional<double> long_visibility;
    double long_delay_ns{1000.0};
};

void run_visibility(const Global& g, const VisibilityArgs& a) {
    using namespace lophoton;
    emitter::DephasingParams p =
        a.params.empty() ? emitter::DephasingParams{} : io::dephasing_from_json(load_json_file(a.params, "params"));
    const bool vs_t = a.mode == "vs_T";
    const auto grid = parse_grid(a.grid.empty() ? (vs_t ? std::string("4:40:37") : std::string("log:1:2000:50")) : a.grid);
    std::string csv;
    if (a.long_visibility) {
        p.Gamma_sd_inv_ps = emitter::solve_gamma_sd(*a.long_visibility, a.long_delay_ns, a.temperature_k, p);
        csv += "# Gamma_sd_inv_ps=" + io::format_double(p.Gamma_sd_inv_ps) + "\n";
    }
    csv += vs_t ? "temperature_k,visibility\n" : "delay_ns,visibility\n";
    for (double x : grid) {
        const double v = vs_t ? emitter::tpi_visibility(x, a.delay_ns, p) : emitter::tpi_visibility(a.temperature_k, x, p);
        csv += io::format_double(x) + "," + io::format_double(v) + "\n";
    }
    emit(g, csv);
}

struct FitArgs {
    std::string kind{"trpl"};
    std::string data;
    std::string init;
    double irf_ps{lophoton::emitter::default_irf_ps};
    double delay_ns{2.0};
    double temperature_k{4.0};
};

void run_fit(const Global& g, const FitArgs& a) {
    using namespace lophoton;
    std::ifstream in(a.data);
    if (!in) throw error(errc::parse_error, "cannot open '" + a.data + "'");
    const auto data = io::read_samples(in);
    json j = header("fit");
    j["kind"] = a.kind;
    if (a.kind == "trpl") {
        emitter::TrplFitOptions opt;
        if (!a.init.empty()) opt.initial = io::decay_from_json(load_json_file(a.init, "init"));
        const auto fit = emitter::fit_trpl(data, a.irf_ps, opt);
        j["params"] = io::to_json(fit.params);
        j["amplitude"] = fit.amplitude;
        j["rms_residual"] = fit.rms_residual;
        j["iterations"] = fit.iterations;
    } else {
        const emitter::DephasingParams start =
            a.init.empty() ? emitter::DephasingParams{} : io::dephasing_from_json(load_json_file(a.init, "init"));
        emitter::VisibilityFitOptions opt;
        opt.fixed_delay_ns = a.delay_ns;
        opt.fixed_temperature_k = a.temperature_k;
        const auto which = a.kind == "vis_T" ? emitter::curve_kind::vs_temperature : emitter::curve_kind::vs_delay;
        const auto fit = emitter::fit_visibility_curve(data, which, start, opt);
        j["params"] = io::to_json(fit.params);
        j["rms_residual"] = fit.rms_residual;
        j["iterations"] = fit.iterations;
    }
    emit(g, dump(j));
}

struct DecayArgs {
    double t1_ps{350.0};
    double delta_ueV{6.4};

    lophoton::emitter::DecayParams params() const {
        lophoton::emitter::DecayParams p{t1_ps, lophoton::emitter::ueV_to_inv_ps(delta_ueV)};
        p.validate();
        return p;
    }
};

struct AnalyzeArgs {
    std::string kind{"g2"};
    std::string histogram;
    std::string meta;
    std::optional<double> window_ps;
    std::string estimator{"auto"};
    double reference_scale{1.0};
    double leakage_per_bin{0.0};
    DecayArgs decay;
};

void run_analyze(const Global& g, const AnalyzeArgs& a) {
    using namespace lophoton;
    std::ifstream in(a.histogram);
    if (!in) throw error(errc::parse_error, "cannot open '" + a.histogram + "'");
    const auto h = io::read_histogram(in, load_json_file(a.meta, "meta"));
    const counting::PeakOptions peaks{true, a.leakage_per_bin};
    json j = header("analyze");
    j["kind"] = a.kind;
    if (a.kind == "g2") {
        const double w = a.window_ps.value_or(counting::default_window_ps);
        const auto r = counting::g2_zero(h, w, peaks);
        j["window_ps"] = w;
        j["estimator"] = "window";
        j["value"] = r.value;
        j["error"] = r.error;
    } else {
        if (!h.pulse_pair_sep_ns) throw error(errc::invalid_argument, "HOM analysis needs pulse_pair_sep_ns in the metadata");
        const double sep_ps = *h.pulse_pair_sep_ns * 1000.0;
        const double w = a.window_ps.value_or(std::min(counting::default_window_ps, 0.5 * sep_ps));
        // Peaks within one default window of each other overlap; fit profiles there.
        const bool profile = a.estimator == "profile" || (a.estimator == "auto" && sep_ps < 2.0 * counting::default_window_ps);
        const double scale = a.reference_scale;
        counting::HomEstimator est{[scale](const counting::PeakSet& s) { return counting::satellite_reference(s, scale); },
                                   std::nullopt};
        if (profile) est.profile = a.decay.params();
        const auto r = counting::hom_visibility(h, w, est, peaks);
        j["window_ps"] = w;
        j["estimator"] = profile ? "profile" : "window";
        j["reference_scale"] = scale;
        j["value"] = r.value;
        j["error"] = r.error;
    }
    emit(g, dump(j));
}

struct SynthArgs {
    std::string kind{"g2"};
    double g2{0.008};
    double visibility{0.947};
    double delay_ns{2.0};
    double total_counts{1e5};
    double background{0.0};
    std::string histogram_out;
    std::string meta_out;
    DecayArgs decay;
};

void run_synth(const Global& g, const SynthArgs& a) {
    using namespace lophoton;
    const counting::HistogramModel model = a.kind == "g2" ? counting::HistogramModel{counting::HbtModel{a.g2}}
                                                           : counting::HistogramModel{counting::HomModel{a.visibility, a.delay_ns}};
    counting::SynthOptions opt;
    opt.background_per_bin = a.background;
    const auto h = counting::synth_histogram(model, a.decay.params(), a.total_counts, g.seed, opt);
    io::write_atomic(a.histogram_out, io::histogram_csv(h));
    io::write_atomic(a.meta_out, io::histogram_meta(h).dump(2) + "\n");
    json j = header("synth");
    j["kind"] = a.kind;
    j["seed"] = g.seed;
    j["bins"] = h.bins.size();
    j["total"] = h.total();
    emit(g, dump(j));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear-optics CNOT, emitter and tomography toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--seed", g.seed, "master seed (default 20240517)")->envname("LOPHOTON_SEED");
    app.add_option("--threads", g.threads, "worker threads for Monte Carlo resampling")->check(CLI::Range(1, 256));
    app.add_option("--out", g.out, "output file (default stdout), written atomically");

    TruthTableArgs tt;
    auto* cmd_tt = app.add_subcommand("truth-table", "CNOT truth table and basis fidelity");
    cmd_tt->add_option("--overlap", tt.overlap, "photon overlap M in [0,1]");
    cmd_tt->add_option("--basis", tt.basis)->check(CLI::IsMember({"ZZ", "XX"}));
    cmd_tt->add_option("--gate", tt.gate_file, "gate JSON (default: built-in CNOT)");
    cmd_tt->add_option("--measured-fzz", tt.measured_fzz, "measured ZZ fidelity for process bounds");
    cmd_tt->add_option("--measured-fxx", tt.measured_fxx, "measured XX fidelity for process bounds");

    BellArgs bell;
    auto* cmd_bell = app.add_subcommand("bell", "simulate and reconstruct the CNOT Bell state");
    cmd_bell->add_option("--overlap", bell.overlap);
    cmd_bell->add_option("--counts-per-setting", bell.counts);
    cmd_bell->add_option("--resamples", bell.resamples, "Monte Carlo resamples (0 to skip)");
    cmd_bell->add_option("--records-out", bell.records_out, "also write the simulated counts CSV");

    ReconstructArgs rec;
    auto* cmd_rec = app.add_subcommand("reconstruct", "tomography from a counts CSV");
    cmd_rec->add_option("--data", rec.data)->required();
    cmd_rec->add_option("--target", rec.target)->check(CLI::IsMember({"psi_minus", "psi_plus", "phi_minus", "phi_plus"}));
    cmd_rec->add_option("--resamples", rec.resamples);

    VisibilityArgs vis;
    auto* cmd_vis = app.add_subcommand("visibility", "two-photon visibility curve as CSV");
    cmd_vis->add_option("--mode", vis.mode)->check(CLI::IsMember({"vs_T", "vs_dt"}));
    cmd_vis->add_option("--params", vis.params, "dephasing parameter JSON");
    cmd_vis->add_option("--grid", vis.grid, "a:b:n, log:a:b:n or comma list");
    cmd_vis->add_option("--delay-ns", vis.delay_ns, "pulse separation for vs_T");
    cmd_vis->add_option("--temperature-k", vis.temperature_k, "temperature for vs_dt and the Gamma_sd inversion");
    cmd_vis->add_option("--long-visibility", vis.long_visibility, "solve Gamma_sd so that V(long delay) equals this");
    cmd_vis->add_option("--long-delay-ns", vis.long_delay_ns);

    FitArgs fit;
    auto* cmd_fit = app.add_subcommand("fit", "fit TRPL or visibility data");
    cmd_fit->add_option("--kind", fit.kind)->check(CLI::IsMember({"trpl", "vis_T", "vis_dt"}));
    cmd_fit->add_option("--data", fit.data)->required();
    cmd_fit->add_option("--init", fit.init, "initial parameter JSON");
    cmd_fit->add_option("--irf-ps", fit.irf_ps);
    cmd_fit->add_option("--delay-ns", fit.delay_ns);
    cmd_fit->add_option("--temperature-k", fit.temperature_k);

    AnalyzeArgs an;
    auto* cmd_an = app.add_subcommand("analyze", "g2(0) or HOM visibility from a histogram");
    cmd_an->add_option("--kind", an.kind)->check(CLI::IsMember({"g2", "hom"}));
    cmd_an->add_option("--histogram", an.histogram)->required();
    cmd_an->add_option("--meta", an.meta)->required();
    cmd_an->add_option("--window-ps", an.window_ps, "integration half-width");
    cmd_an->add_option("--estimator", an.estimator)->check(CLI::IsMember({"auto", "window", "profile"}));
    cmd_an->add_option("--reference-scale", an.reference_scale, "A_ref = scale * mean(+-dt satellites)");
    cmd_an->add_option("--leakage-per-bin", an.leakage_per_bin);
    cmd_an->add_option("--t1-ps", an.decay.t1_ps);
    cmd_an->add_option("--delta-ueV", an.decay.delta_ueV);

    SynthArgs sy;
    auto* cmd_sy = app.add_subcommand("synth", "write a synthetic coincidence histogram");
    cmd_sy->add_option("--kind", sy.kind)->check(CLI::IsMember({"g2", "hom"}));
    cmd_sy->add_option("--g2", sy.g2);
    cmd_sy->add_option("--visibility", sy.visibility);
    cmd_sy->add_option("--delay-ns", sy.delay_ns);
    cmd_sy->add_option("--total-counts", sy.total_counts);
    cmd_sy->add_option("--background", sy.background);
    cmd_sy->add_option("--histogram-out", sy.histogram_out)->required();
    cmd_sy->add_option("--meta-out", sy.meta_out)->required();
    cmd_sy->add_option("--t1-ps", sy.decay.t1_ps);
    cmd_sy->add_option("--delta-ueV", sy.decay.delta_ueV);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_invalid_input;
    }

    try {
        if (cmd_tt->parsed()) run_truth_table(g, tt);
        if (cmd_bell->parsed()) run_bell(g, bell);
        if (cmd_rec->parsed()) run_reconstruct(g, rec);
        if (cmd_vis->parsed()) run_visibility(g, vis);
        if (cmd_fit->parsed()) run_fit(g, fit);
        if (cmd_an->parsed()) run_analyze(g, an);
        if (cmd_sy->parsed()) run_synth(g, sy);
    } catch (const reconstruction_failure& e) {
        std::cerr << "reconstruction failed: " << e.what() << "\n";
        return exit_reconstruction;
    } catch (const lophoton::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == errc::fit_diverged ? exit_fit_diverged : exit_invalid_input;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid_input;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
    return exit_ok;
}
