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
#include <cmath>
#include <numbers>
#include <string_view>

#include "lophoton/error.hpp"
#include "lophoton/numeric.hpp"

namespace lophoton {

using JonesVector = Eigen::Vector2cd;
using JonesMatrix = Eigen::Matrix2cd;

// Six tomography polarizations. Circular handedness is fixed as
// R = (H - iV)/sqrt2 and L = (H + iV)/sqrt2 everywhere in the library and in
// every file format.
enum class pol { H, V, D, A, R, L };

inline constexpr std::array<pol, 6> all_pols{pol::H, pol::V, pol::D, pol::A, pol::R, pol::L};

constexpr char to_char(pol p) noexcept {
    constexpr char names[] = {'H', 'V', 'D', 'A', 'R', 'L'};
    return names[static_cast<int>(p)];
}

inline pol parse_pol(std::string_view label) {
    if (label.size() == 1) {
        switch (label[0]) {
        case 'H': return pol::H;
        case 'V': return pol::V;
        case 'D': return pol::D;
        case 'A': return pol::A;
        case 'R': return pol::R;
        case 'L': return pol::L;
        default: break;
        }
    }
    throw error(errc::unknown_label, "polarization label '" + std::string(label) + "'");
}

inline JonesVector basis_state(pol label) {
    const double s = std::numbers::sqrt2 / 2.0;
    const complex i{0.0, 1.0};
    switch (label) {
    case pol::H: return JonesVector(1.0, 0.0);
    case pol::V: return JonesVector(0.0, 1.0);
    case pol::D: return JonesVector(s, s);
    case pol::A: return JonesVector(s, -s);
    case pol::R: return JonesVector(s, -i * s);
    case pol::L: return JonesVector(s, i * s);
    }
    throw error(errc::unknown_label, "polarization label");
}

inline JonesVector basis_state(std::string_view label) {
    return basis_state(parse_pol(label));
}

inline double degrees(double deg) {
    return deg * std::numbers::pi / 180.0;
}

// Half-wave plate with fast axis at theta (radians), global phase dropped.
inline JonesMatrix hwp(double theta) {
    const double c = std::cos(2.0 * theta), s = std::sin(2.0 * theta);
    JonesMatrix m;
    m << c, s, s, -c;
    return m;
}

// Quarter-wave plate with fast axis at theta; qwp(0) = diag(1, i).
inline JonesMatrix qwp(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    JonesMatrix rot;
    rot << c, -s, s, c;
    JonesMatrix retarder;
    retarder << 1.0, 0.0, 0.0, complex{0.0, 1.0};
    return rot * retarder * rot.transpose();
}

inline JonesMatrix projector(const JonesVector& state) {
    return state * state.adjoint();
}

inline JonesMatrix projector(pol label) {
    return projector(basis_state(label));
}

}  // namespace lophoton
