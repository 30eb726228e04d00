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

#include <nlohmann/json.hpp>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "lophoton/circuit.hpp"
#include "lophoton/counting.hpp"
#include "lophoton/emitter.hpp"
#include "lophoton/error.hpp"
#include "lophoton/tomography.hpp"

namespace lophoton::io {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

// Shortest decimal that round-trips, '.' separator regardless of locale.
inline std::string format_double(double v) {
    if (!std::isfinite(v)) throw error(errc::invalid_argument, "cannot format a non-finite number");
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view s, const std::string& where) {
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw error(errc::parse_error, where + ": expected a number, got '" + std::string(s) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view s, const std::string& where) {
    s = trim(s);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw error(errc::parse_error, where + ": expected an integer, got '" + std::string(s) + "'");
    return v;
}

struct CsvRow {
    int line{0};
    std::vector<std::string> cells;
};

// Comma separated, one header row, '#' comment lines and blank lines
// skipped. With `columns` non-empty the header must match it exactly.
inline std::vector<CsvRow> read_csv(std::istream& in, const std::vector<std::string>& columns,
                                    std::vector<std::string>* header_out = nullptr) {
    std::vector<CsvRow> rows;
    std::string line;
    int number = 0;
    bool have_header = false;
    std::size_t width = columns.size();
    while (std::getline(in, line)) {
        ++number;
        const auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = view.find(',', start);
            cells.emplace_back(trim(view.substr(start, comma == std::string_view::npos ? view.npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!have_header) {
            if (!columns.empty() && cells != columns) {
                std::string expected;
                for (const auto& c : columns) expected += (expected.empty() ? "" : ",") + c;
                throw error(errc::parse_error, "line " + std::to_string(number) + ": header must be '" + expected + "'");
            }
            width = cells.size();
            if (header_out) *header_out = cells;
            have_header = true;
            continue;
        }
        if (cells.size() != width)
            throw error(errc::parse_error, "line " + std::to_string(number) + ": expected " + std::to_string(width) +
                                               " columns, got " + std::to_string(cells.size()));
        rows.push_back({number, std::move(cells)});
    }
    if (!have_header) throw error(errc::parse_error, "empty CSV input");
    return rows;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw error(errc::parse_error, "cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw error(errc::parse_error, what + ": " + e.what());
    }
}

// Writes to a temporary sibling and renames it over the target, so readers
// never observe a partial file.
inline void write_atomic(const std::filesystem::path& target, const std::string& content) {
    const auto dir = target.has_parent_path() ? target.parent_path() : std::filesystem::path(".");
    const auto tmp = dir / ("." + target.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw error(errc::invalid_argument, "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw error(errc::invalid_argument, "write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw error(errc::invalid_argument, "cannot replace '" + target.string() + "'");
    }
}

// ---------------------------------------------------------------------------
// JSON helpers.

namespace detail {

inline double number_field(const json& j, const char* key, double fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) throw error(errc::parse_error, std::string("missing key '") + key + "'");
        return fallback;
    }
    const auto& v = j.at(key);
    if (!v.is_number()) throw error(errc::parse_error, std::string("key '") + key + "' must be a number");
    return v.get<double>();
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const char* what) {
    if (!j.is_object()) throw error(errc::parse_error, std::string(what) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = key == "schema_version";
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw error(errc::parse_error, std::string(what) + ": unknown key '" + key + "'");
    }
}

}  // namespace detail

// Missing keys keep their defaults (the published fit values).
inline emitter::DephasingParams dephasing_from_json(const json& j) {
    detail::reject_unknown(j, {"alpha_ps2", "v_c_inv_ps", "mu_ps2", "F", "T1_ps", "Gamma_sd_inv_ps", "tau_c_ns"},
                           "dephasing parameters");
    emitter::DephasingParams p;
    p.alpha_ps2 = detail::number_field(j, "alpha_ps2", p.alpha_ps2);
    p.v_c_inv_ps = detail::number_field(j, "v_c_inv_ps", p.v_c_inv_ps);
    p.mu_ps2 = detail::number_field(j, "mu_ps2", p.mu_ps2);
    p.F = detail::number_field(j, "F", p.F);
    p.T1_ps = detail::number_field(j, "T1_ps", p.T1_ps);
    p.Gamma_sd_inv_ps = detail::number_field(j, "Gamma_sd_inv_ps", p.Gamma_sd_inv_ps);
    p.tau_c_ns = detail::number_field(j, "tau_c_ns", p.tau_c_ns);
    p.validate();
    return p;
}

inline json to_json(const emitter::DephasingParams& p) {
    return {{"alpha_ps2", p.alpha_ps2}, {"v_c_inv_ps", p.v_c_inv_ps}, {"mu_ps2", p.mu_ps2}, {"F", p.F},
            {"T1_ps", p.T1_ps}, {"Gamma_sd_inv_ps", p.Gamma_sd_inv_ps}, {"tau_c_ns", p.tau_c_ns}};
}

// TRPL parameters in lab units: {"T1_ps": 350, "delta_ueV": 6.4}.
inline emitter::DecayParams decay_from_json(const json& j) {
    detail::reject_unknown(j, {"T1_ps", "delta_ueV"}, "decay parameters");
    emitter::DecayParams p{350.0, emitter::ueV_to_inv_ps(6.4)};
    p.T1_ps = detail::number_field(j, "T1_ps", p.T1_ps);
    p.delta_inv_ps = emitter::ueV_to_inv_ps(detail::number_field(j, "delta_ueV", 6.4));
    p.validate();
    return p;
}

inline json to_json(const emitter::DecayParams& p) {
    return {{"T1_ps", p.T1_ps}, {"delta_ueV", emitter::inv_ps_to_ueV(p.delta_inv_ps)}};
}

inline json matrix_to_json(const ComplexMatrix& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array(), c = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            r.push_back(m(i, k).real());
            c.push_back(m(i, k).imag());
        }
        re.push_back(r);
        im.push_back(c);
    }
    return {{"real", re}, {"imag", im}};
}

inline json gate_to_json(const Gate& g) {
    json elements = json::array();
    for (const auto& e : g.elements) elements.push_back(element_label(e));
    return {{"schema_version", schema_version}, {"name", g.name}, {"elements", elements}};
}

inline Gate gate_from_json(const json& j) {
    detail::reject_unknown(j, {"name", "elements"}, "gate");
    if (!j.contains("elements") || !j.at("elements").is_array())
        throw error(errc::parse_error, "gate needs an 'elements' array");
    Gate g;
    g.name = j.value("name", std::string("custom"));
    for (const auto& e : j.at("elements")) {
        if (!e.is_string()) throw error(errc::parse_error, "gate elements must be strings");
        g.elements.push_back(parse_element(e.get<std::string>()));
    }
    if (g.elements.empty()) throw error(errc::parse_error, "gate has no elements");
    return g;
}

// ---------------------------------------------------------------------------
// Histograms: CSV `tau_ps,counts` plus a JSON sidecar with bin_width_ps,
// rep_period_ns and (optional) pulse_pair_sep_ns.

inline counting::CoincidenceHistogram read_histogram(std::istream& csv, const json& meta) {
    detail::reject_unknown(meta, {"bin_width_ps", "rep_period_ns", "pulse_pair_sep_ns"}, "histogram metadata");
    counting::CoincidenceHistogram h;
    h.bin_width_ps = detail::number_field(meta, "bin_width_ps", 0.0, true);
    h.rep_period_ns = detail::number_field(meta, "rep_period_ns", h.rep_period_ns);
    if (meta.contains("pulse_pair_sep_ns") && !meta.at("pulse_pair_sep_ns").is_null())
        h.pulse_pair_sep_ns = detail::number_field(meta, "pulse_pair_sep_ns", 0.0);
    for (const auto& row : read_csv(csv, {"tau_ps", "counts"})) {
        const std::string where = "line " + std::to_string(row.line);
        h.bins.push_back({parse_double(row.cells[0], where), parse_int(row.cells[1], where)});
    }
    if (h.bins.empty()) throw error(errc::parse_error, "histogram has no bins");
    try {
        h.validate();
    } catch (const error& e) {
        throw error(errc::parse_error, e.what());
    }
    return h;
}

inline std::string histogram_csv(const counting::CoincidenceHistogram& h) {
    std::string out = "tau_ps,counts\n";
    for (const auto& b : h.bins) out += format_double(b.tau_ps) + "," + std::to_string(b.counts) + "\n";
    return out;
}

inline json histogram_meta(const counting::CoincidenceHistogram& h) {
    json j = {{"bin_width_ps", h.bin_width_ps}, {"rep_period_ns", h.rep_period_ns}};
    j["pulse_pair_sep_ns"] = h.pulse_pair_sep_ns ? json(*h.pulse_pair_sep_ns) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Two-column numeric data with a header row of two names.

inline std::vector<emitter::Sample> read_samples(std::istream& csv) {
    std::vector<std::string> header;
    const auto rows = read_csv(csv, {}, &header);
    if (header.size() != 2) throw error(errc::parse_error, "data CSV must have exactly two columns");
    std::vector<emitter::Sample> out;
    for (const auto& row : rows) {
        const std::string where = "line " + std::to_string(row.line);
        out.push_back({parse_double(row.cells[0], where), parse_double(row.cells[1], where)});
    }
    if (out.empty()) throw error(errc::parse_error, "data CSV has no rows");
    return out;
}

inline std::string samples_csv(const std::vector<emitter::Sample>& data, const std::string& x_name,
                               const std::string& y_name) {
    std::string out = x_name + "," + y_name + "\n";
    for (const auto& s : data) out += format_double(s.x) + "," + format_double(s.y) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Tomography records: basis1,basis2,outcome1,outcome2,counts.

inline std::vector<tomography::MeasurementRecord> read_records(std::istream& csv) {
    using namespace tomography;
    std::map<int, MeasurementRecord> by;
    std::map<std::pair<int, int>, bool> seen;
    for (const auto& row : read_csv(csv, {"basis1", "basis2", "outcome1", "outcome2", "counts"})) {
        const std::string where = "line " + std::to_string(row.line);
        try {
            const Setting s{parse_basis(row.cells[0]), parse_basis(row.cells[1])};
            const int k = 2 * outcome_index(s.first, parse_pol(row.cells[2])) + outcome_index(s.second, parse_pol(row.cells[3]));
            const double n = parse_double(row.cells[4], where);
            if (n < 0.0) throw error(errc::parse_error, "counts must be >= 0");
            if (seen[{s.index(), k}]) throw error(errc::parse_error, "duplicate outcome row");
            seen[{s.index(), k}] = true;
            auto [it, inserted] = by.try_emplace(s.index(), MeasurementRecord{s, {}, 0.0});
            it->second.counts[static_cast<std::size_t>(k)] = n;
        } catch (const error& e) {
            throw error(errc::parse_error, where + ": " + e.what());
        }
    }
    std::vector<MeasurementRecord> out;
    for (auto& [index, r] : by) out.push_back(r);
    return out;
}

inline std::string records_csv(const std::vector<tomography::MeasurementRecord>& records) {
    using namespace tomography;
    std::string out = "basis1,basis2,outcome1,outcome2,counts\n";
    for (const auto& r : records)
        for (int k = 0; k < 4; ++k) {
            const auto a = basis_outcomes(r.setting.first)[static_cast<std::size_t>(k / 2)];
            const auto b = basis_outcomes(r.setting.second)[static_cast<std::size_t>(k % 2)];
            out += std::string{to_char(r.setting.first), ',', to_char(r.setting.second), ',', lophoton::to_char(a), ',',
                               lophoton::to_char(b), ','} +
                   format_double(r.counts[static_cast<std::size_t>(k)]) + "\n";
        }
    return out;
}

}  // namespace lophoton::io
