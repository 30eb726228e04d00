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

#include <stdexcept>
#include <string>
#include <string_view>

namespace lophoton {

enum class errc {
    not_hermitian,
    negative_eigenvalue,
    bad_dimension,
    unknown_label,
    invalid_argument,
    zero_success_probability,
    quadrature_failure,
    fit_diverged,
    insufficient_data,
    infeasible,
    window_overlap,
    no_side_peaks,
    unresolved_cluster,
    missing_setting,
    not_converged,
    parse_error,
};

constexpr std::string_view to_string(errc code) noexcept {
    switch (code) {
    case errc::not_hermitian: return "NotHermitian";
    case errc::negative_eigenvalue: return "NegativeEigenvalue";
    case errc::bad_dimension: return "BadDimension";
    case errc::unknown_label: return "UnknownLabel";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::zero_success_probability: return "ZeroSuccessProbability";
    case errc::quadrature_failure: return "QuadratureFailure";
    case errc::fit_diverged: return "FitDiverged";
    case errc::insufficient_data: return "InsufficientData";
    case errc::infeasible: return "Infeasible";
    case errc::window_overlap: return "WindowOverlap";
    case errc::no_side_peaks: return "NoSidePeaks";
    case errc::unresolved_cluster: return "UnresolvedCluster";
    case errc::missing_setting: return "MissingSetting";
    case errc::not_converged: return "NotConverged";
    case errc::parse_error: return "ParseError";
    }
    return "Unknown";
}

// All library failures are reported through this one exception type; callers
// that need to branch (the CLI maps codes to exit statuses) inspect code().
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

}  // namespace lophoton
