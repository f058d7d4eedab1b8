// Subcommand orchestration shared by the command-line binary and the tests:
// check, kernels, simulate, spectrum, verify. Outputs are CSV files plus a
// plain-text report on the given stream.
//
// Exit codes: 0 success, 1 validation failure, 2 numerical failure
// (divergence, singularity, tolerance breach), 3 I/O failure.

#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "idec/config.hpp"
#include "idec/csv.hpp"
#include "idec/errors.hpp"
#include "idec/fredholm.hpp"
#include "idec/model.hpp"
#include "idec/simulator.hpp"
#include "idec/spectral.hpp"

namespace idec {

struct SubcommandOptions {
    std::string mode = "both";  // simulate: open | closed | both
    std::optional<std::string> method;
    std::optional<double> tol;
    std::optional<int> maxiter;
};

// Tolerances enforced by `verify`.
inline constexpr double kVerifyResidualTol = 1e-3;
inline constexpr double kVerifyCharfunTol = 5e-3;
inline constexpr double kVerifyRateRelTol = 0.10;

namespace detail {

struct Synthesis {
    PlantModel model;
    Grid grid;
    DelayDecomposition dec;
    FredholmDiscretization disc;
    ControllerKernels kernels;
};

inline Synthesis synthesize(const RunConfig& cfg, const SubcommandOptions& opt) {
    Synthesis s;
    s.model = cfg.plant();
    s.grid = make_grid(s.model.tau0, cfg.n);
    if (s.model.b != 0.0) {
        s.dec = decompose_delays(s.model.tau0, s.model.tau1, s.grid.step);
        s.disc = assemble_regular(s.model, s.dec, s.grid);
    } else {
        s.disc = assemble_degenerate(s.model, s.grid);
        s.dec = s.disc.dec;
    }
    const std::string method = opt.method.value_or(cfg.method);
    if (method == "iterative") {
        s.kernels = solve_successive(s.disc, opt.tol.value_or(cfg.tol),
                                     opt.maxiter.value_or(cfg.maxiter)).kernels;
    } else {
        s.kernels = solve_direct(s.disc);
    }
    return s;
}

inline bool report_validation(const PlantModel& model, std::ostream& log) {
    const ValidationReport report = validate(model);
    for (const auto& c : report.checks)
        log << (c.pass ? "[pass] " : "[FAIL] ") << c.name << " (" << c.detail
            << "), value = " << c.value << "\n";
    return report.all_pass();
}

inline void write_kernel_csvs(const Synthesis& s, const std::filesystem::path& out_dir) {
    csv::Writer fw(out_dir / "kernels_f.csv");
    fw.header("nu,f");
    for (int i = 0; i <= s.grid.n; ++i) fw.row(s.grid.node(i), s.kernels.f[static_cast<std::size_t>(i)]);

    csv::Writer gw(out_dir / "kernels_g.csv");
    gw.header("nu,g");
    for (std::size_t i = 0; i < s.kernels.g.size(); ++i)
        gw.row(s.grid.step * static_cast<double>(i), s.kernels.g[i]);
}

inline void write_residual_csv(const ResidualReport& rep, const Grid& grid, double tau0,
                               double tau1, const std::filesystem::path& out_dir) {
    csv::Writer w(out_dir / "residuals.csv");
    w.header("segment,nu,residual");
    for (std::size_t j = 0; j < rep.I1.size(); ++j)
        w.row("I1", grid.step * static_cast<double>(j), rep.I1[j]);
    for (std::size_t j = 0; j < rep.I2.size(); ++j)
        w.row("I2", tau0 + grid.step * static_cast<double>(j + 1), rep.I2[j]);
    for (std::size_t j = 0; j < rep.I3.size(); ++j)
        w.row("I3", tau1 + grid.step * static_cast<double>(j), rep.I3[j]);
}

inline void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.header("t,x,U");
    const int p = static_cast<int>(traj.hist_x.size()) - 1;
    const int q = static_cast<int>(traj.hist_U.size()) - 1;
    const int back = std::max(p, q);
    for (int idx = -back; idx < 0; ++idx) {
        const std::string xs =
            idx >= -p ? csv::field(traj.hist_x[static_cast<std::size_t>(idx + p)]) : std::string();
        const std::string us =
            idx >= -q ? csv::field(traj.hist_U[static_cast<std::size_t>(idx + q)]) : std::string();
        w.row(idx * traj.dt, xs, us);
    }
    for (std::size_t i = 0; i < traj.t.size(); ++i) w.row(traj.t[i], traj.x[i], traj.U[i]);
}

inline std::optional<double> try_rate(const Trajectory& traj, double t_start, Signal sig) {
    try {
        return estimate_decay_rate(traj, t_start, sig);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

inline int run_check(const RunConfig& cfg, std::ostream& log) {
    const PlantModel model = cfg.plant();
    const bool ok = report_validation(model, log);

    const SpectrumReport rep = check_spectral_controllability(
        model, cfg.spectrum_region(), 1e-6, cfg.transform_nodes(),
        FindZeroOptions{cfg.root_tol, 1e-10, 1e-8, 50, 3});
    log << "characteristic roots located in region: " << rep.winding_total << "\n";
    for (std::size_t i = 0; i < rep.roots.size(); ++i)
        log << "  root " << rep.roots[i].value.real() << (rep.roots[i].value.imag() < 0 ? " - " : " + ")
            << std::abs(rep.roots[i].value.imag()) << "i  |F1| = " << rep.F1_at_roots[i] << "\n";
    switch (rep.verdict) {
        case Controllability::PassInRegion:
            log << "[pass] spectral controllability holds in the region\n";
            break;
        case Controllability::Fail:
            log << "[FAIL] spectral controllability fails: common zero near " << rep.witness->real()
                << " + " << rep.witness->imag() << "i\n";
            break;
        case Controllability::NotChecked:
            log << "[FAIL] spectral controllability could not be decided (unresolved boxes)\n";
            break;
    }
    return (ok && rep.verdict == Controllability::PassInRegion) ? 0 : 1;
}

inline int run_kernels(const RunConfig& cfg, const std::filesystem::path& out_dir,
                       const SubcommandOptions& opt, std::ostream& log) {
    if (!report_validation(cfg.plant(), log)) return 1;
    const Synthesis s = synthesize(cfg, opt);
    write_kernel_csvs(s, out_dir);
    const ResidualReport rep = residuals(s.model, s.kernels, s.dec, s.grid);
    write_residual_csv(rep, s.grid, s.model.tau0, s.kernels.tau1, out_dir);
    log << "kernel sup norms: |f| <= " << detail::sup_abs(s.kernels.f) << ", |g| <= "
        << detail::sup_abs(s.kernels.g) << "\n";
    log << "residual sups: I1 = " << rep.sup_I1 << ", I2 = " << rep.sup_I2
        << ", I3 = " << rep.sup_I3 << "\n";
    if (s.kernels.condition_estimate)
        log << "condition estimate (1-norm): " << *s.kernels.condition_estimate << "\n";
    return 0;
}

inline int run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        const SubcommandOptions& opt, std::ostream& log) {
    const PlantModel model = cfg.plant();
    if (!report_validation(model, log)) return 1;
    const KernelExpr x0 = parse_kernel_expr(cfg.x0);
    const KernelExpr u0 = parse_kernel_expr(cfg.u0);
    const double t_start = 3.0 * model.tau0;

    if (opt.mode == "open" || opt.mode == "both") {
        const Trajectory traj = simulate(model, nullptr, x0, u0, cfg.t_max, cfg.dt);
        write_trajectory_csv(traj, out_dir / "trajectory_open.csv");
        if (auto rate = try_rate(traj, t_start, Signal::State))
            log << "open-loop state rate: " << *rate << "\n";
    }
    if (opt.mode == "closed" || opt.mode == "both") {
        const Synthesis s = synthesize(cfg, opt);
        const Trajectory traj = simulate(model, &s.kernels, x0, u0, cfg.t_max, cfg.dt);
        write_trajectory_csv(traj, out_dir / "trajectory_closed.csv");
        if (auto rate = try_rate(traj, t_start, Signal::State))
            log << "closed-loop state rate: " << *rate << "\n";
        if (auto rate = try_rate(traj, t_start, Signal::Input))
            log << "closed-loop input rate: " << *rate << "\n";
    }
    return 0;
}

inline int run_spectrum(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        std::ostream& log) {
    const PlantModel model = cfg.plant();
    if (!report_validation(model, log)) return 1;
    const CharacteristicEvaluator ev(model, cfg.transform_nodes());
    const SpectrumReport rep =
        find_zeros([&](Complex s) { return ev.F0(s); },
                   [&](Complex s) { return ev.F0_derivative(s); }, cfg.spectrum_region(),
                   FindZeroOptions{cfg.root_tol, 1e-10, 1e-8, 50, 3});
    csv::Writer w(out_dir / "roots.csv");
    w.header("re,im,abs_F,multiplicity");
    for (const auto& root : rep.roots)
        w.row(root.value.real(), root.value.imag(), root.abs_F, root.multiplicity);
    log << "roots located: " << rep.winding_total << " (unresolved boxes: " << rep.unresolved.size()
        << ")\n";
    return rep.unresolved.empty() ? 0 : 2;
}

inline int run_verify(const RunConfig& cfg, const std::filesystem::path& out_dir,
                      const SubcommandOptions& opt, std::ostream& log) {
    const PlantModel model = cfg.plant();
    if (!report_validation(model, log)) return 1;

    bool ok = true;
    auto gate = [&](bool pass, const std::string& what) {
        log << (pass ? "[pass] " : "[FAIL] ") << what << "\n";
        ok = ok && pass;
    };

    const Synthesis s = synthesize(cfg, opt);
    write_kernel_csvs(s, out_dir);

    const ResidualReport rep = residuals(s.model, s.kernels, s.dec, s.grid);
    write_residual_csv(rep, s.grid, s.model.tau0, s.kernels.tau1, out_dir);
    gate(rep.sup_all() <= kVerifyResidualTol,
         "kernel-equation residual sup = " + csv::field(rep.sup_all()) + " <= " +
             csv::field(kVerifyResidualTol));

    // characteristic function collapses to 1 - a e^{-tau0 s} on the imaginary axis
    double worst = 0.0;
    for (double om = -20.0; om <= 20.0 + 1e-9; om += 0.5) {
        const Complex si(0.0, om);
        const Complex target = 1.0 - model.a * std::exp(-model.tau0 * si);
        worst = std::max(worst,
                         std::abs(closed_loop_charfun(model, s.kernels, si, cfg.transform_nodes()) -
                                  target));
    }
    gate(worst <= kVerifyCharfunTol, "characteristic-function deviation = " + csv::field(worst) +
                                         " <= " + csv::field(kVerifyCharfunTol));

    // closed-loop decay rate against the pointwise-part rate ln|a| / tau0
    const Trajectory traj = simulate(model, &s.kernels, parse_kernel_expr(cfg.x0),
                                     parse_kernel_expr(cfg.u0), cfg.t_max, cfg.dt);
    write_trajectory_csv(traj, out_dir / "trajectory_closed.csv");
    if (model.a != 0.0) {
        const double target = std::log(std::abs(model.a)) / model.tau0;
        const double rate = estimate_decay_rate(traj, 3.0 * model.tau0, Signal::State);
        gate(std::abs(rate - target) <= kVerifyRateRelTol * std::abs(target),
             "closed-loop decay rate = " + csv::field(rate) + " within 10% of " +
                 csv::field(target));
        if (auto urate = try_rate(traj, 3.0 * model.tau0, Signal::Input))
            log << "closed-loop input rate: " << *urate << "\n";
    } else {
        log << "[skip] decay-rate target undefined for a = 0\n";
    }

    return ok ? 0 : 2;
}

} // namespace detail

inline int run_subcommand(const std::string& name, const RunConfig& cfg,
                          const std::filesystem::path& out_dir, const SubcommandOptions& opt = {},
                          std::ostream& log = std::cout) {
    try {
        std::filesystem::create_directories(out_dir);
        if (name == "check") return detail::run_check(cfg, log);
        if (name == "kernels") return detail::run_kernels(cfg, out_dir, opt, log);
        if (name == "simulate") return detail::run_simulate(cfg, out_dir, opt, log);
        if (name == "spectrum") return detail::run_spectrum(cfg, out_dir, log);
        if (name == "verify") return detail::run_verify(cfg, out_dir, opt, log);
        log << "unknown subcommand '" << name << "'\n";
        return 1;
    } catch (const IterationError& e) {
        log << "numerical failure: " << e.what() << " (iterations: " << e.trace.size() << ")\n";
        return 2;
    } catch (const ValidationError& e) {
        log << "validation failure: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        log << "invalid argument: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        log << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        log << "I/O failure: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "I/O failure: " << e.what() << "\n";
        return 3;
    }
}

} // namespace idec
