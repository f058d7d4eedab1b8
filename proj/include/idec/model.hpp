// Plant data and validation of the algebraically checkable standing
// assumptions: |a| < 1, tau1 >= tau0, and for the purely distributed input
// case (b = 0) the nonzero-scalar conditions a*M(0) - M(tau1) != 0 and
// F0(0) != 0. Also the delay decomposition tau1 = (n0+1)*tau0 - gamma used
// by the block kernel system.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "idec/expr.hpp"
#include "idec/quadrature.hpp"

namespace idec {

struct PlantModel {
    double tau0 = 1.0;  // state delay
    double tau1 = 1.0;  // input delay
    double a = 0.0;     // pointwise state coefficient
    double b = 0.0;     // pointwise input coefficient
    KernelExpr N;       // state kernel on [0, tau0]
    KernelExpr M;       // input kernel on [0, tau1]
};

struct ValidationCheck {
    std::string name;
    bool pass = false;
    double value = 0.0;  // the quantity the check inspected
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    [[nodiscard]] bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    [[nodiscard]] const ValidationCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline constexpr double kAssumptionTol = 1e-9;
inline constexpr int kDefaultTransformNodes = 400;

// F0 at s=0 reduces to the real quantity 1 - a - int_0^{tau0} N.
inline double f0_at_zero(const PlantModel& m, int nspec = kDefaultTransformNodes) {
    const auto samples = sample_expr(m.N, m.tau0, nspec);
    return 1.0 - m.a - trapezoid(samples, m.tau0 / nspec);
}

inline ValidationReport validate(const PlantModel& m, double tol_assump = kAssumptionTol) {
    ValidationReport report;

    report.checks.push_back({"positive-delays", m.tau0 > 0.0 && m.tau1 > 0.0,
                             std::min(m.tau0, m.tau1), "tau0 > 0 and tau1 > 0"});
    report.checks.push_back({"principal-part", std::abs(m.a) < 1.0, m.a, "|a| < 1"});
    report.checks.push_back({"delay-order", m.tau1 >= m.tau0, m.tau1 - m.tau0, "tau1 >= tau0"});

    if (m.b == 0.0) {
        report.checks.push_back({"equal-delays", m.tau0 == m.tau1, m.tau1 - m.tau0,
                                 "b = 0 requires tau0 = tau1"});
        if (m.tau0 > 0.0) {
            const double pointwise = m.a * m.M(0.0) - m.M(m.tau1);
            report.checks.push_back({"assumption-pointwise", std::abs(pointwise) > tol_assump,
                                     pointwise, "a*M(0) - M(tau1) != 0"});
            const double f0 = f0_at_zero(m);
            report.checks.push_back({"assumption-f0", std::abs(f0) > tol_assump, f0,
                                     "F0(0) != 0"});
        }
    }
    return report;
}

struct DelayDecomposition {
    int n0 = 0;            // tau1 = (n0+1)*tau0 - gamma
    double gamma = 0.0;    // in [0, tau0), snapped onto the working grid
    int gamma_index = 0;   // gamma / step
    double tau1 = 0.0;     // snapped tau1 = (n0+1)*tau0 - gamma
    double snap_shift = 0.0;  // how far snapping moved gamma
    bool snap_warning = false;
};

inline DelayDecomposition decompose_delays(double tau0, double tau1, double step) {
    if (!(tau0 > 0.0) || tau1 < tau0)
        throw std::invalid_argument("decompose_delays requires 0 < tau0 <= tau1");
    if (!(step > 0.0)) throw std::invalid_argument("decompose_delays requires step > 0");

    int n0 = static_cast<int>(std::ceil(tau1 / tau0 - 1e-12)) - 1;
    if (n0 < 0) n0 = 0;
    const double gamma_raw = (n0 + 1) * tau0 - tau1;

    const int per_interval = static_cast<int>(std::llround(tau0 / step));
    int gamma_index = static_cast<int>(std::llround(gamma_raw / step));
    if (gamma_index >= per_interval) {  // snapped up to a full interval: fold into n0
        gamma_index = 0;
        n0 -= 1;
    }
    if (gamma_index < 0) gamma_index = 0;

    DelayDecomposition dec;
    dec.n0 = n0;
    dec.gamma_index = gamma_index;
    dec.gamma = gamma_index * step;
    dec.tau1 = (n0 + 1) * tau0 - dec.gamma;
    dec.snap_shift = std::abs(dec.gamma - gamma_raw);
    dec.snap_warning = dec.snap_shift > step / 2;
    return dec;
}

} // namespace idec
