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

#include <array>
#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lophoton/error.hpp"
#include "lophoton/numeric.hpp"
#include "lophoton/polarization.hpp"

// Two photons in two spatial paths (control, target), each carrying a
// polarization qubit. Mode order is (control,H), (control,V), (target,H),
// (target,V). A transfer matrix U maps input creation operators to outputs:
// a_j^dagger -> sum_i U(i, j) a_i^dagger.

namespace lophoton {

using ModeMatrix = Eigen::Matrix4cd;
using TwoQubitMatrix = Eigen::Matrix4cd;
using TwoQubitVector = Eigen::Vector4cd;

enum class path { control, target };

constexpr int mode_index(path p, pol polarization) {
    return 2 * static_cast<int>(p) + (polarization == pol::V ? 1 : 0);
}

constexpr std::string_view to_string(path p) noexcept {
    return p == path::control ? "control" : "target";
}

inline constexpr double transmission_v_central = 1.0 / 3.0;
inline constexpr double transmission_h_attenuator = 1.0 / 3.0;

enum class element_kind { ppbs_central, ppbs_attenuator, hwp };

struct LinearElement {
    element_kind kind{};
    path where{path::control};  // unused for ppbs_central
    double angle_deg{0.0};      // hwp only
    ModeMatrix transfer{ModeMatrix::Identity()};
};

// Central PPBS: H passes both paths untouched; V modes of the two paths mix
// through the real rotation [[t, -r], [r, t]] with t^2 = 1/3, r^2 = 2/3.
// With this sign choice the |VV> coincidence amplitude is t^2 - r^2 = -1/3.
inline LinearElement ppbs_central() {
    const double t = std::sqrt(transmission_v_central);
    const double r = std::sqrt(1.0 - transmission_v_central);
    LinearElement e{element_kind::ppbs_central, path::control, 0.0, ModeMatrix::Identity()};
    const int cv = mode_index(path::control, pol::V);
    const int tv = mode_index(path::target, pol::V);
    e.transfer(cv, cv) = t;
    e.transfer(tv, cv) = r;
    e.transfer(cv, tv) = -r;
    e.transfer(tv, tv) = t;
    return e;
}

// PPBS rotated by 90 degrees: H keeps amplitude sqrt(1/3) on the given path,
// the reflected part is lost.
inline LinearElement ppbs_attenuator(path where) {
    LinearElement e{element_kind::ppbs_attenuator, where, 0.0, ModeMatrix::Identity()};
    const int h = mode_index(where, pol::H);
    e.transfer(h, h) = std::sqrt(transmission_h_attenuator);
    return e;
}

inline LinearElement hwp_on(path where, double angle_deg) {
    LinearElement e{element_kind::hwp, where, angle_deg, ModeMatrix::Identity()};
    const int base = 2 * static_cast<int>(where);
    e.transfer.block<2, 2>(base, base) = hwp(degrees(angle_deg));
    return e;
}

inline std::string element_label(const LinearElement& e) {
    switch (e.kind) {
    case element_kind::ppbs_central: return "ppbs_central";
    case element_kind::ppbs_attenuator:
        return "ppbs_attenuator:" + std::string(to_string(e.where));
    case element_kind::hwp: {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), e.angle_deg);
        return "hwp:" + std::string(to_string(e.where)) + ":" + std::string(buf, res.ptr) + "deg";
    }
    }
    return {};
}

namespace detail {

inline path parse_path(std::string_view s) {
    if (s == "control") return path::control;
    if (s == "target") return path::target;
    throw error(errc::parse_error, "unknown path '" + std::string(s) + "'");
}

}  // namespace detail

inline LinearElement parse_element(std::string_view label) {
    if (label == "ppbs_central") return ppbs_central();
    constexpr std::string_view att = "ppbs_attenuator:";
    if (label.starts_with(att)) return ppbs_attenuator(detail::parse_path(label.substr(att.size())));
    constexpr std::string_view plate = "hwp:";
    if (label.starts_with(plate) && label.ends_with("deg")) {
        auto rest = label.substr(plate.size(), label.size() - plate.size() - 3);
        auto colon = rest.find(':');
        if (colon != std::string_view::npos) {
            double angle = 0.0;
            auto num = rest.substr(colon + 1);
            auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), angle);
            if (ec == std::errc{} && ptr == num.data() + num.size())
                return hwp_on(detail::parse_path(rest.substr(0, colon)), angle);
        }
    }
    throw error(errc::parse_error, "unknown element '" + std::string(label) + "'");
}

struct Gate {
    std::string name;
    std::vector<LinearElement> elements;

    // Elements act in list order, so the composed transfer is U_n ... U_1.
    ModeMatrix transfer() const {
        ModeMatrix u = ModeMatrix::Identity();
        for (const auto& e : elements) u = e.transfer * u;
        return u;
    }
};

inline Gate build_cz() {
    return {"cz", {ppbs_central(), ppbs_attenuator(path::control), ppbs_attenuator(path::target)}};
}

inline Gate build_cnot() {
    Gate g{"cnot", {hwp_on(path::target, 22.5)}};
    for (auto& e : build_cz().elements) g.elements.push_back(e);
    g.elements.push_back(hwp_on(path::target, 22.5));
    return g;
}

struct TwoPhotonInput {
    JonesVector control;
    JonesVector target;
    double overlap{1.0};  // squared wavepacket overlap M
};

struct PostSelectedState {
    TwoQubitMatrix rho;  // basis HH, HV, VH, VV (control x target)
    double success_prob{0.0};
};

namespace detail {

inline void validate(const TwoPhotonInput& in) {
    if (!(in.overlap >= 0.0 && in.overlap <= 1.0))
        throw error(errc::invalid_argument, "overlap M must lie in [0, 1]");
    for (const auto* v : {&in.control, &in.target})
        if (std::abs(v->squaredNorm() - 1.0) > 1e-12)
            throw error(errc::invalid_argument, "input Jones vectors must be normalized");
}

inline Eigen::Vector4cd place(const JonesVector& j, path p) {
    Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
    v.segment<2>(2 * static_cast<int>(p)) = j;
    return v;
}

}  // namespace detail

// 2x2 permanent of [[a, b], [c, d]].
constexpr complex permanent(complex a, complex b, complex c, complex d) {
    return a * d + b * c;
}

// Conditional (unnormalized) coincidence map for perfectly indistinguishable
// photons: K(2a+b, 2p+q) is the amplitude for input |p>_c|q>_t to leave as
// |a>_c|b>_t, given as the permanent of U restricted to the input modes
// (control p, target q) and output modes (control a, target b).
inline TwoQubitMatrix coincidence_kraus(const ModeMatrix& u) {
    TwoQubitMatrix k;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) {
                    const int oa = a, ob = 2 + b, ip = p, iq = 2 + q;
                    k(2 * a + b, 2 * p + q) = permanent(u(oa, ip), u(oa, iq), u(ob, ip), u(ob, iq));
                }
    return k;
}

inline PostSelectedState coincidence_evolve(std::span<const LinearElement> elements,
                                            const TwoPhotonInput& in) {
    if (elements.empty()) throw error(errc::invalid_argument, "element list is empty");
    detail::validate(in);

    ModeMatrix u = ModeMatrix::Identity();
    for (const auto& e : elements) u = e.transfer * u;

    // Indistinguishable part: one coherent two-photon amplitude per
    // coincidence outcome.
    TwoQubitVector amp_in;
    for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) amp_in(2 * p + q) = in.control(p) * in.target(q);
    const TwoQubitVector amp = coincidence_kraus(u) * amp_in;
    const TwoQubitMatrix rho_ind = amp * amp.adjoint();

    // Distinguishable part: the two photon-to-path assignments add
    // incoherently.
    const Eigen::Vector4cd psi1 = u * detail::place(in.control, path::control);
    const Eigen::Vector4cd psi2 = u * detail::place(in.target, path::target);
    auto product = [](const Eigen::Vector4cd& in_control, const Eigen::Vector4cd& in_target) {
        TwoQubitVector v;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) v(2 * a + b) = in_control(a) * in_target(2 + b);
        return v;
    };
    const TwoQubitVector first = product(psi1, psi2);
    const TwoQubitVector second = product(psi2, psi1);
    const TwoQubitMatrix rho_dist = first * first.adjoint() + second * second.adjoint();

    const double m = in.overlap;
    const TwoQubitMatrix mixed = m * rho_ind + (1.0 - m) * rho_dist;
    const double success = mixed.trace().real();
    if (success < 1e-15)
        throw error(errc::zero_success_probability, "no coincidence events for this input");

    TwoQubitMatrix rho = mixed / success;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return {rho, success};
}

inline PostSelectedState coincidence_evolve(const Gate& gate, const TwoPhotonInput& in) {
    return coincidence_evolve(std::span<const LinearElement>(gate.elements), in);
}

// Full two-photon output distribution, including bunched events, as an upper
// triangular table P(i, j), i <= j over the four modes. Bunched amplitudes
// carry the bosonic sqrt(2). Lossless circuits sum to 1.
inline Eigen::Matrix4d two_photon_distribution(const ModeMatrix& u, const TwoPhotonInput& in) {
    detail::validate(in);
    const Eigen::Vector4cd psi1 = u * detail::place(in.control, path::control);
    const Eigen::Vector4cd psi2 = u * detail::place(in.target, path::target);
    Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) {
            double ind, dist;
            if (i == j) {
                ind = std::norm(std::sqrt(2.0) * psi1(i) * psi2(i));
                dist = std::norm(psi1(i)) * std::norm(psi2(i));
            } else {
                ind = std::norm(psi1(i) * psi2(j) + psi1(j) * psi2(i));
                dist = std::norm(psi1(i)) * std::norm(psi2(j)) + std::norm(psi1(j)) * std::norm(psi2(i));
            }
            p(i, j) = in.overlap * ind + (1.0 - in.overlap) * dist;
        }
    return p;
}

enum class gate_basis { ZZ, XX };

inline std::array<pol, 2> basis_pols(gate_basis b) {
    return b == gate_basis::ZZ ? std::array<pol, 2>{pol::H, pol::V} : std::array<pol, 2>{pol::D, pol::A};
}

inline std::string basis_label(gate_basis b, int index) {
    const auto pols = basis_pols(b);
    return {to_char(pols[static_cast<std::size_t>(index >> 1)]),
            to_char(pols[static_cast<std::size_t>(index & 1)])};
}

// Row = input (e.g. HH, HV, VH, VV), column = detected output, conditional
// on a coincidence.
struct TruthTable {
    gate_basis basis{gate_basis::ZZ};
    std::array<std::array<double, 4>, 4> prob{};
    std::array<double, 4> success_prob{};
};

inline TruthTable truth_table(const Gate& gate, gate_basis basis, double overlap) {
    if (!(overlap >= 0.0 && overlap <= 1.0))
        throw error(errc::invalid_argument, "overlap M must lie in [0, 1]");
    const auto pols = basis_pols(basis);
    TruthTable table{basis, {}, {}};
    for (int in = 0; in < 4; ++in) {
        TwoPhotonInput input{basis_state(pols[static_cast<std::size_t>(in >> 1)]),
                             basis_state(pols[static_cast<std::size_t>(in & 1)]), overlap};
        const auto out = coincidence_evolve(gate, input);
        table.success_prob[static_cast<std::size_t>(in)] = out.success_prob;
        for (int o = 0; o < 4; ++o) {
            TwoQubitVector probe;
            const JonesVector c = basis_state(pols[static_cast<std::size_t>(o >> 1)]);
            const JonesVector t = basis_state(pols[static_cast<std::size_t>(o & 1)]);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) probe(2 * a + b) = c(a) * t(b);
            table.prob[static_cast<std::size_t>(in)][static_cast<std::size_t>(o)] =
                (probe.adjoint() * out.rho * probe)(0, 0).real();
        }
    }
    return table;
}

// Index of the correct CNOT output for each input row. In the X basis the
// roles of control and target swap: |x>|y> -> |x xor y>|y> with D=0, A=1.
inline std::array<int, 4> ideal_cnot_outputs(gate_basis basis) {
    return basis == gate_basis::ZZ ? std::array<int, 4>{0, 1, 3, 2} : std::array<int, 4>{0, 3, 2, 1};
}

inline double basis_fidelity(const std::array<std::array<double, 4>, 4>& prob, gate_basis basis) {
    const auto ideal = ideal_cnot_outputs(basis);
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) sum += prob[i][static_cast<std::size_t>(ideal[i])];
    return std::clamp(sum / 4.0, 0.0, 1.0);
}

inline double basis_fidelity(const TruthTable& table) {
    return basis_fidelity(table.prob, table.basis);
}

}  // namespace lophoton
