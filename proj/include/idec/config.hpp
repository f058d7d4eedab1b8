// JSON run configuration: plant data, numerics, spectrum region, and initial
// histories. Unknown keys are rejected; violations are reported with their
// key paths.
//
// Schema (defaults in parentheses):
//   {
//     "plant":    { "tau0", "tau1", "a", "b", "N": "<formula>", "M": "<formula>" },
//     "numerics": { "n" (200), "dt" (0.005), "t_max" (20),
//                   "method" ("direct"|"iterative"), "tol" (1e-10), "maxiter" (200) },
//     "spectrum": { "re_min" (-5), "re_max" (1), "im_max" (40/tau0), "root_tol" (1e-8) },
//     "initial":  { "x0" ("1"), "U0" ("0") }
//   }

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idec/errors.hpp"
#include "idec/model.hpp"
#include "idec/spectral.hpp"

namespace idec {

struct RunConfig {
    double tau0 = 1.0;
    double tau1 = 1.0;
    double a = 0.0;
    double b = 0.0;
    std::string N;
    std::string M;

    int n = 200;
    double dt = 0.005;
    double t_max = 20.0;
    std::string method = "direct";
    double tol = 1e-10;
    int maxiter = 200;

    double re_min = -5.0;
    double re_max = 1.0;
    std::optional<double> im_max;  // defaults to 40/tau0 once tau0 is known
    double root_tol = 1e-8;

    std::string x0 = "1";
    std::string u0 = "0";

    [[nodiscard]] PlantModel plant() const {
        return PlantModel{tau0, tau1, a, b, parse_kernel_expr(N), parse_kernel_expr(M)};
    }
    [[nodiscard]] Rect spectrum_region() const {
        const double im = im_max.value_or(40.0 / tau0);
        return Rect{re_min, re_max, -im, im};
    }
    [[nodiscard]] int transform_nodes() const { return std::max(400, 8 * n); }
};

namespace detail {

using Json = nlohmann::json;

inline void reject_unknown_keys(const Json& obj, const std::string& path,
                                std::initializer_list<const char*> known) {
    if (!obj.is_object()) {
        std::string where = path.empty() ? std::string("config") : path;
        if (!where.empty() && where.back() == '.') where.pop_back();
        throw ConfigError("'" + where + "' must be a JSON object");
    }
    for (const auto& item : obj.items()) {
        bool found = false;
        for (const char* k : known)
            if (item.key() == k) { found = true; break; }
        if (!found) throw ConfigError("unknown key '" + path + item.key() + "'");
    }
}

template <typename T>
T require(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + path + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("wrong type for key '" + path + key + "'");
    }
}

template <typename T>
void assign_if(const Json& obj, const std::string& path, const char* key, T& target) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError("wrong type for key '" + path + key + "'");
    }
}

} // namespace detail

inline RunConfig parse_config(const std::string& text) {
    using detail::Json;
    Json root;
    try {
        root = Json::parse(text);
    } catch (const detail::Json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    detail::reject_unknown_keys(root, "", {"plant", "numerics", "spectrum", "initial"});

    RunConfig cfg;

    if (!root.contains("plant")) throw ConfigError("missing key 'plant'");
    const Json& plant = root.at("plant");
    detail::reject_unknown_keys(plant, "plant.", {"tau0", "tau1", "a", "b", "N", "M"});
    cfg.tau0 = detail::require<double>(plant, "plant.", "tau0");
    cfg.tau1 = detail::require<double>(plant, "plant.", "tau1");
    cfg.a = detail::require<double>(plant, "plant.", "a");
    cfg.b = detail::require<double>(plant, "plant.", "b");
    cfg.N = detail::require<std::string>(plant, "plant.", "N");
    cfg.M = detail::require<std::string>(plant, "plant.", "M");

    if (root.contains("numerics")) {
        const Json& num = root.at("numerics");
        detail::reject_unknown_keys(num, "numerics.", {"n", "dt", "t_max", "method", "tol", "maxiter"});
        detail::assign_if(num, "numerics.", "n", cfg.n);
        detail::assign_if(num, "numerics.", "dt", cfg.dt);
        detail::assign_if(num, "numerics.", "t_max", cfg.t_max);
        detail::assign_if(num, "numerics.", "method", cfg.method);
        detail::assign_if(num, "numerics.", "tol", cfg.tol);
        detail::assign_if(num, "numerics.", "maxiter", cfg.maxiter);
    }
    if (root.contains("spectrum")) {
        const Json& spec = root.at("spectrum");
        detail::reject_unknown_keys(spec, "spectrum.", {"re_min", "re_max", "im_max", "root_tol"});
        detail::assign_if(spec, "spectrum.", "re_min", cfg.re_min);
        detail::assign_if(spec, "spectrum.", "re_max", cfg.re_max);
        double im = 0.0;
        if (spec.contains("im_max")) {
            detail::assign_if(spec, "spectrum.", "im_max", im);
            cfg.im_max = im;
        }
        detail::assign_if(spec, "spectrum.", "root_tol", cfg.root_tol);
    }
    if (root.contains("initial")) {
        const Json& init = root.at("initial");
        detail::reject_unknown_keys(init, "initial.", {"x0", "U0"});
        detail::assign_if(init, "initial.", "x0", cfg.x0);
        detail::assign_if(init, "initial.", "U0", cfg.u0);
    }

    // formulas must parse
    for (const auto& [path, text_expr] : {std::pair<std::string, std::string>{"plant.N", cfg.N},
                                          {"plant.M", cfg.M},
                                          {"initial.x0", cfg.x0},
                                          {"initial.U0", cfg.u0}}) {
        try {
            parse_kernel_expr(text_expr);
        } catch (const ParseError& e) {
            throw ConfigError("bad formula in '" + path + "': " + e.what());
        }
    }

    // semantic validation, all violations reported together
    std::vector<std::string> bad;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) bad.push_back(what);
    };
    check(std::isfinite(cfg.tau0) && cfg.tau0 > 0, "plant.tau0 must be finite and positive");
    check(std::isfinite(cfg.tau1) && cfg.tau1 > 0, "plant.tau1 must be finite and positive");
    check(std::isfinite(cfg.a), "plant.a must be finite");
    check(std::isfinite(cfg.b), "plant.b must be finite");
    check(std::abs(cfg.a) < 1.0, "plant.a: principal-part |a| < 1");
    check(cfg.tau1 >= cfg.tau0, "plant.tau1 must be >= plant.tau0");
    check(!(cfg.b == 0.0 && cfg.tau0 != cfg.tau1), "plant: b = 0 requires tau0 = tau1");
    check(cfg.n >= 8, "numerics.n must be >= 8");
    check(std::isfinite(cfg.dt) && cfg.dt > 0, "numerics.dt must be positive");
    check(std::isfinite(cfg.t_max) && cfg.t_max > 0, "numerics.t_max must be positive");
    check(cfg.method == "direct" || cfg.method == "iterative",
          "numerics.method must be 'direct' or 'iterative'");
    check(std::isfinite(cfg.tol) && cfg.tol > 0, "numerics.tol must be positive");
    check(cfg.maxiter >= 1, "numerics.maxiter must be >= 1");
    check(std::isfinite(cfg.re_min) && std::isfinite(cfg.re_max) && cfg.re_min < cfg.re_max,
          "spectrum: re_min < re_max required");
    check(!cfg.im_max || (std::isfinite(*cfg.im_max) && *cfg.im_max > 0),
          "spectrum.im_max must be positive");
    check(std::isfinite(cfg.root_tol) && cfg.root_tol > 0, "spectrum.root_tol must be positive");
    if (!bad.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& f : bad) msg += "\n  - " + f;
        throw ValidationError(msg, bad);
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

} // namespace idec
