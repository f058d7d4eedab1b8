// Fixed-step time marching of the plant under open loop or one of the two
// feedback laws.
//
// Solutions of the difference equation jump wherever the initial data is
// incompatible with the equation (generically at t = 0), and the jumps
// propagate along the delay lattice through the pointwise terms. The marcher
// therefore carries both one-sided limits of x and U at every node: the
// left pair solves the implicit 2x2 step system (trapezoid quadrature with
// endpoint terms N(0) x (dt/2) etc.), the right pair follows by adding the
// pointwise-term jumps, and quadrature sums use the average of the limits.
// At nodes where nothing jumps the two streams coincide and the scheme
// reduces to the plain implicit trapezoid step; keeping the limits separate
// is what preserves second-order accuracy through the jumps. Delays are
// snapped onto the time grid and kernels resampled to it by linear
// interpolation, which keeps the pure difference part of the recursion
// exact. Reported trajectories are the right limits (the equation values).

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "idec/errors.hpp"
#include "idec/expr.hpp"
#include "idec/fredholm.hpp"
#include "idec/model.hpp"

namespace idec {

struct Trajectory {
    double dt = 0.0;
    double tau0 = 0.0;
    double tau1 = 0.0;
    // history on [-tau0, 0] and [-tau1, 0] (the t = 0 entries are the raw
    // initial data; the marched value at t = 0 lives in x/U below)
    std::vector<double> hist_x;
    std::vector<double> hist_U;
    // marched samples at t = 0, dt, ..., t_max
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> U;
    double snap_tau0 = 0.0;  // |p*dt - tau0| after snapping
    double snap_tau1 = 0.0;
};

namespace detail {

inline int snapped_steps(double delay, double dt, const char* what) {
    const int steps = static_cast<int>(std::llround(delay / dt));
    if (steps < 1 || std::abs(steps * dt - delay) > 1e-12 * std::max(1.0, delay))
        throw std::invalid_argument(std::string("dt does not divide ") + what);
    return steps;
}

// resample grid samples onto p+1 nodes of step dt by linear interpolation
inline std::vector<double> resample_linear(const std::vector<double>& samples, double src_step,
                                           int p, double dt) {
    std::vector<double> out(static_cast<std::size_t>(p) + 1);
    const int last = static_cast<int>(samples.size()) - 1;
    for (int i = 0; i <= p; ++i) {
        const double pos = i * dt / src_step;
        int idx = static_cast<int>(std::floor(pos));
        if (idx >= last) idx = last - 1;
        const double frac = pos - idx;
        out[static_cast<std::size_t>(i)] =
            samples[static_cast<std::size_t>(idx)] * (1.0 - frac) +
            samples[static_cast<std::size_t>(idx + 1)] * frac;
    }
    return out;
}

// Both one-sided limits of a marched signal plus its history.
struct TwoSided {
    std::vector<double> left, right, hist;
    int hist_len = 0;  // delay steps; hist has hist_len+1 entries on [-delay, 0]

    double lft(int idx) const {
        return idx >= 0 ? left[static_cast<std::size_t>(idx)]
                        : hist[static_cast<std::size_t>(idx + hist_len)];
    }
    double rgt(int idx) const {
        return idx >= 0 ? right[static_cast<std::size_t>(idx)]
                        : hist[static_cast<std::size_t>(idx + hist_len)];
    }
    double avg(int idx) const { return 0.5 * (lft(idx) + rgt(idx)); }
};

// Trapezoid sum over nu in [0, delay] of K(nu) y(t_j - nu) dnu, excluding the
// implicit nu = 0 endpoint (handled by the caller): interior nodes use the
// averaged limits, the far endpoint the right limit.
inline double delayed_quad(const std::vector<double>& kernel, const TwoSided& y, int j, int steps,
                           double dt) {
    double acc = 0.5 * kernel[static_cast<std::size_t>(steps)] * y.rgt(j - steps);
    for (int i = 1; i < steps; ++i) acc += kernel[static_cast<std::size_t>(i)] * y.avg(j - i);
    return acc * dt;
}

} // namespace detail

// March the plant from t = 0 to t_max. With `kernels == nullptr` the loop is
// open and U(t) follows the input expression at all times; otherwise the
// case-appropriate feedback law closes the loop and u0_expr only provides the
// input history on [-tau1, 0). History expressions are functions of time.
inline Trajectory simulate(const PlantModel& m, const ControllerKernels* kernels,
                           const KernelExpr& x0_expr, const KernelExpr& u0_expr,
                           double t_max, double dt) {
    if (!(dt > 0.0) || !(t_max > 0.0)) throw std::invalid_argument("dt and t_max must be positive");
    const int p = detail::snapped_steps(m.tau0, dt, "tau0");
    const int q = detail::snapped_steps(m.tau1, dt, "tau1");
    const int total = static_cast<int>(std::llround(t_max / dt));

    Trajectory traj;
    traj.dt = dt;
    traj.tau0 = m.tau0;
    traj.tau1 = m.tau1;
    traj.snap_tau0 = std::abs(p * dt - m.tau0);
    traj.snap_tau1 = std::abs(q * dt - m.tau1);

    detail::TwoSided X, U;
    X.hist_len = p;
    X.hist.resize(static_cast<std::size_t>(p) + 1);
    for (int i = 0; i <= p; ++i) X.hist[static_cast<std::size_t>(i)] = x0_expr((i - p) * dt);
    U.hist_len = q;
    U.hist.resize(static_cast<std::size_t>(q) + 1);
    for (int i = 0; i <= q; ++i) U.hist[static_cast<std::size_t>(i)] = u0_expr((i - q) * dt);
    traj.hist_x = X.hist;
    traj.hist_U = U.hist;

    // plant kernels on the simulation grid
    const std::vector<double> nk = sample_expr(m.N, m.tau0, p);
    const std::vector<double> mk = sample_expr(m.M, m.tau1, q);

    // feedback kernels resampled onto the grid
    std::vector<double> fk, gk, fpk;
    const bool closed = kernels != nullptr;
    const bool degenerate = closed && kernels->kcase == KernelCase::Degenerate;
    if (closed) {
        fk = detail::resample_linear(kernels->f, kernels->grid.step, p, dt);
        gk = detail::resample_linear(kernels->g, kernels->grid.step, q, dt);
        if (degenerate) fpk = detail::resample_linear(kernels->fprime, kernels->grid.step, p, dt);
    }
    const std::vector<double>& flaw = degenerate ? fpk : fk;

    X.left.resize(static_cast<std::size_t>(total) + 1);
    X.right.resize(static_cast<std::size_t>(total) + 1);
    U.left.resize(static_cast<std::size_t>(total) + 1);
    U.right.resize(static_cast<std::size_t>(total) + 1);
    traj.t.resize(static_cast<std::size_t>(total) + 1);

    for (int j = 0; j <= total; ++j) {
        traj.t[static_cast<std::size_t>(j)] = j * dt;
        const std::size_t sj = static_cast<std::size_t>(j);

        // plant sums without the nu = 0 endpoint
        const double sn = detail::delayed_quad(nk, X, j, p, dt);
        const double sm = detail::delayed_quad(mk, U, j, q, dt);

        if (j == 0) {
            // The left limits at t = 0 are the raw initial data, and the right
            // limits follow from the equation with every term explicit (the
            // nu = 0 quadrature endpoints take the left limits).
            X.left[0] = X.hist[static_cast<std::size_t>(p)];
            U.left[0] = U.hist[static_cast<std::size_t>(q)];
            const double quad0 = 0.5 * dt * (nk[0] * X.left[0] + mk[0] * U.left[0]);
            const double xr =
                m.a * X.rgt(-p) + m.b * U.rgt(-q) + sn + sm + quad0;
            X.right[0] = xr;
            if (!closed) {
                U.right[0] = u0_expr(0.0);
            } else {
                double ur = detail::delayed_quad(flaw, X, 0, p, dt) +
                            detail::delayed_quad(gk, U, 0, q, dt) +
                            0.5 * dt * (flaw[0] * X.left[0] + gk[0] * U.left[0]);
                if (degenerate) ur += kernels->f_at_0 * xr - kernels->f_at_end * X.rgt(-p);
                U.right[0] = ur;
            }
            continue;
        }

        if (!closed) {
            const double uj = u0_expr(j * dt);  // continuous input: both limits agree
            const double rx_left = m.a * X.lft(j - p) + m.b * U.lft(j - q) + sn + sm +
                                   0.5 * dt * mk[0] * uj;
            const double diag = 1.0 - 0.5 * dt * nk[0];
            if (std::abs(diag) < 1e-12)
                throw NumericalError("implicit step is singular: dt too large");
            X.left[sj] = rx_left / diag;
            U.left[sj] = uj;
            U.right[sj] = uj;
            X.right[sj] = X.left[sj] + m.a * (X.rgt(j - p) - X.lft(j - p));
            continue;
        }

        // implicit 2x2 in the left pair (x(t-), U(t-))
        double rx = m.a * X.lft(j - p) + m.b * U.lft(j - q) + sn + sm;
        double ru = detail::delayed_quad(flaw, X, j, p, dt) + detail::delayed_quad(gk, U, j, q, dt);
        if (degenerate) ru -= kernels->f_at_end * X.lft(j - p);

        const double a11 = 1.0 - 0.5 * dt * nk[0];
        const double a12 = -0.5 * dt * mk[0];
        double a21 = -0.5 * dt * flaw[0];
        if (degenerate) a21 -= kernels->f_at_0;
        const double a22 = 1.0 - 0.5 * dt * gk[0];
        const double det = a11 * a22 - a12 * a21;
        if (std::abs(det) < 1e-12)
            throw NumericalError("implicit step is singular: dt too large for these kernels");
        X.left[sj] = (rx * a22 - a12 * ru) / det;
        U.left[sj] = (a11 * ru - a21 * rx) / det;

        // right limits: the integrals are continuous, only pointwise terms jump
        X.right[sj] = X.left[sj] + m.a * (X.rgt(j - p) - X.lft(j - p)) +
                      m.b * (U.rgt(j - q) - U.lft(j - q));
        U.right[sj] = U.left[sj];
        if (degenerate)
            U.right[sj] += kernels->f_at_0 * (X.right[sj] - X.left[sj]) -
                           kernels->f_at_end * (X.rgt(j - p) - X.lft(j - p));
    }

    traj.x = std::move(X.right);
    traj.U = std::move(U.right);
    return traj;
}

enum class Signal { State, Input };

// Least-squares slope of log(window-sup) against window midpoints; windows of
// width tau0 tile [t_start, t_max]. The window sup strips the oscillation of
// complex root pairs, leaving the exponential envelope.
inline double estimate_decay_rate(const Trajectory& traj, double t_start,
                                  Signal signal = Signal::State) {
    const std::vector<double>& samples = signal == Signal::State ? traj.x : traj.U;
    const double t_max = traj.t.empty() ? 0.0 : traj.t.back();
    const double width = traj.tau0;

    std::vector<double> mids, logs;
    int k = 0;
    while (t_start + (k + 1) * width <= t_max + 1e-12) {
        const double lo = t_start + k * width;
        const double hi = lo + width;
        double sup = 0.0;
        for (std::size_t i = 0; i < traj.t.size(); ++i)
            if (traj.t[i] >= lo - 1e-12 && traj.t[i] < hi - 1e-12)
                sup = std::max(sup, std::abs(samples[i]));
        if (sup == 0.0) throw NumericalError("decay-rate fit is degenerate: a window sup is zero");
        mids.push_back(0.5 * (lo + hi));
        logs.push_back(std::log(sup));
        ++k;
    }
    if (mids.size() < 4) throw NumericalError("decay-rate fit is degenerate: fewer than 4 windows");

    double mean_t = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < mids.size(); ++i) {
        mean_t += mids[i];
        mean_y += logs[i];
    }
    mean_t /= static_cast<double>(mids.size());
    mean_y /= static_cast<double>(mids.size());
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < mids.size(); ++i) {
        stt += (mids[i] - mean_t) * (mids[i] - mean_t);
        sty += (mids[i] - mean_t) * (logs[i] - mean_y);
    }
    return sty / stt;
}

} // namespace idec
