// Assembly and solution of the discretized kernel systems that define the
// feedback kernels f and g.
//
// Both cases collocate at the n+1 nodes of a uniform grid on [0, tau0] and
// replace every integral with composite trapezoid sums (Nystrom). Integrals
// are evaluated over the active index segment where the integrand can be
// nonzero: the shifted kernels N and M vanish by zero-extension outside
// their domains and the block-0 unknown vanishes identically below gamma,
// so segment endpoints get the half trapezoid weight. The pointwise part of
// the system is exactly the coefficient pattern {1, -a, b} (or the 2x2
// matrix [[1, M(0)], [-a, -M(tau1)]] in the distributed-only case), which
// the successive-approximation solver inverts blockwise.
//
// One collocation node needs care: in the block-1 equation at nu = gamma the
// pointwise coupling multiplies the block-0 unknown at the edge of its
// support, whose value from the left is identically zero. The coupling is
// dropped there, which makes the row the left-sided equation at the interval
// boundary; the residual evaluator adopts the matching convention (the
// boundary abscissa tau0 belongs to the first interval, the second interval
// is open on the left).

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "idec/errors.hpp"
#include "idec/expr.hpp"
#include "idec/model.hpp"
#include "idec/quadrature.hpp"

namespace idec {

enum class KernelCase { Regular, Degenerate };

struct FredholmDiscretization {
    KernelCase kcase = KernelCase::Regular;
    int blocks = 0;       // n0+2 (regular) or 2 (degenerate)
    Grid grid;            // on [0, tau0]
    DelayDecomposition dec;
    double a = 0.0;
    double b = 0.0;
    double m_at_0 = 0.0;    // M(0)   (degenerate pointwise block)
    double m_at_end = 0.0;  // M(tau1)
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;

    [[nodiscard]] int block_size() const { return grid.n + 1; }
    [[nodiscard]] int size() const { return blocks * block_size(); }

    // The single node where the pointwise a-coupling is dropped (see header).
    [[nodiscard]] bool skip_pointwise_coupling(int block_row, int j) const {
        return kcase == KernelCase::Regular && block_row == 1 && j == dec.gamma_index;
    }
};

struct ControllerKernels {
    KernelCase kcase = KernelCase::Regular;
    Grid grid;                    // f grid on [0, tau0]
    double tau1 = 0.0;
    std::vector<double> f;        // samples on [0, tau0]
    std::vector<double> g;        // samples on [0, tau1], same step
    std::vector<std::vector<double>> g_blocks;  // regular case: per-block samples
    std::vector<double> fprime;   // degenerate case: numerical derivative of f
    double f_at_0 = 0.0;          // degenerate case: f(0)
    double f_at_end = 0.0;        // degenerate case: f(tau0)
    std::optional<double> condition_estimate;  // 1-norm estimate from the direct solve
};

struct ResidualReport {
    double sup_I1 = 0.0;
    double sup_I2 = 0.0;
    double sup_I3 = 0.0;
    std::vector<double> I1;  // nodes 0..n on [0, tau0]
    std::vector<double> I2;  // nodes on (tau0, tau1]; empty when tau0 = tau1
    std::vector<double> I3;  // nodes 0..n on [tau1, tau0+tau1]
    int n = 0;

    [[nodiscard]] double sup_all() const { return std::max({sup_I1, sup_I2, sup_I3}); }
};

namespace detail {

inline double sup_abs(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s = std::max(s, std::abs(x));
    return s;
}

// Accumulate  sign * int_{lo*step}^{hi*step} block(eta) K((c_idx)*step - eta) deta
// into matrix row `row` over the columns of `block_col`, trapezoid weights on
// the index segment [lo, hi]. Kernel arguments are exact index multiples.
struct RowBuilder {
    Eigen::MatrixXd& A;
    double step;

    void add(int row, int block_col, int bsize, int lo, int hi, int c_idx,
             const std::vector<double>& ktab, double sign) const {
        if (hi <= lo) return;
        for (int i = lo; i <= hi; ++i) {
            const int karg = c_idx - i;
            if (karg < 0 || karg >= static_cast<int>(ktab.size())) continue;
            const double w = (i == lo || i == hi) ? 0.5 * step : step;
            A(row, block_col * bsize + i) += sign * w * ktab[static_cast<std::size_t>(karg)];
        }
    }
};

} // namespace detail

inline FredholmDiscretization assemble_regular(const PlantModel& m, const DelayDecomposition& dec,
                                               const Grid& grid) {
    if (m.b == 0.0)
        throw std::invalid_argument("assemble_regular requires b != 0");

    const int n = grid.n;
    const int mg = dec.gamma_index;
    const int n0 = dec.n0;
    const int n1 = (n0 + 1) * n - mg;  // index of tau1 on the step-grid
    const int bsize = n + 1;
    const int nblocks = n0 + 2;

    FredholmDiscretization d;
    d.kcase = KernelCase::Regular;
    d.blocks = nblocks;
    d.grid = grid;
    d.dec = dec;
    d.a = m.a;
    d.b = m.b;
    d.m_at_0 = m.M(0.0);
    d.m_at_end = m.M(dec.tau1);
    d.matrix = Eigen::MatrixXd::Zero(nblocks * bsize, nblocks * bsize);
    d.rhs = Eigen::VectorXd::Zero(nblocks * bsize);

    // Kernel tables at grid arguments; indices outside are zero by extension.
    std::vector<double> ntab(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) ntab[static_cast<std::size_t>(i)] = m.N(grid.node(i));
    std::vector<double> mtab(static_cast<std::size_t>(n1) + 1);
    for (int i = 0; i <= n1; ++i) mtab[static_cast<std::size_t>(i)] = m.M(grid.node(i));
    auto next = [&](int k) { return (k >= 0 && k <= n) ? ntab[static_cast<std::size_t>(k)] : 0.0; };

    detail::RowBuilder rb{d.matrix, grid.step};
    const int fblk = n0 + 1;

    for (int j = 0; j <= n; ++j) {
        // block 0:  g0(nu) - int g0 N + int f M(.-gamma)  = -N(nu - gamma)
        int row = j;
        d.matrix(row, j) += 1.0;
        rb.add(row, 0, bsize, mg, j, j, ntab, -1.0);
        rb.add(row, fblk, bsize, 0, j - mg, j - mg, mtab, +1.0);
        d.rhs(row) = -next(j - mg);

        // blocks k = 1..n0
        for (int k = 1; k <= n0; ++k) {
            row = k * bsize + j;
            d.matrix(row, k * bsize + j) += 1.0;
            if (!d.skip_pointwise_coupling(k, j))
                d.matrix(row, (k - 1) * bsize + j) += -m.a;
            const int lo_prev = (k == 1) ? std::max(j, mg) : j;
            rb.add(row, k - 1, bsize, lo_prev, n, j + n, ntab, -1.0);
            rb.add(row, k, bsize, 0, j, j, ntab, -1.0);
            const int c = j + k * n - mg;
            rb.add(row, fblk, bsize, 0, std::min(n, c), c, mtab, +1.0);
            d.rhs(row) = -next(c);
        }

        // last block:  b f(nu) - a g_{n0}(nu) - int g_{n0} N + int f M = 0
        row = fblk * bsize + j;
        d.matrix(row, fblk * bsize + j) += m.b;
        d.matrix(row, n0 * bsize + j) += -m.a;
        const int lo_g = (n0 == 0) ? std::max(j, mg) : j;
        rb.add(row, n0, bsize, lo_g, n, j + n, ntab, -1.0);
        rb.add(row, fblk, bsize, j, n, j + n1, mtab, +1.0);
    }
    return d;
}

inline FredholmDiscretization assemble_degenerate(const PlantModel& m, const Grid& grid,
                                                  double tol_assump = kAssumptionTol) {
    if (m.b != 0.0)
        throw std::invalid_argument("assemble_degenerate requires b = 0");
    if (m.tau0 != m.tau1)
        throw std::invalid_argument("assemble_degenerate requires tau0 = tau1");

    const double m0 = m.M(0.0);
    const double m1 = m.M(m.tau1);
    if (std::abs(m.a * m0 - m1) <= tol_assump)
        throw NumericalError("assumption violated: a*M(0) - M(tau1) is numerically zero");

    const int n = grid.n;
    const int bsize = n + 1;
    const KernelExpr mprime = differentiate(m.M);

    FredholmDiscretization d;
    d.kcase = KernelCase::Degenerate;
    d.blocks = 2;
    d.grid = grid;
    d.dec = DelayDecomposition{0, 0.0, 0, m.tau1, 0.0, false};
    d.a = m.a;
    d.b = 0.0;
    d.m_at_0 = m0;
    d.m_at_end = m1;
    d.matrix = Eigen::MatrixXd::Zero(2 * bsize, 2 * bsize);
    d.rhs = Eigen::VectorXd::Zero(2 * bsize);

    std::vector<double> ntab(static_cast<std::size_t>(n) + 1);
    std::vector<double> mptab(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        ntab[static_cast<std::size_t>(i)] = m.N(grid.node(i));
        mptab[static_cast<std::size_t>(i)] = mprime(grid.node(i));
    }

    detail::RowBuilder rb{d.matrix, grid.step};

    for (int j = 0; j <= n; ++j) {
        // g(nu) + M(0) f(nu) + int_0^nu [f M'(nu-.) - g N(nu-.)] = -N(nu)
        int row = j;
        d.matrix(row, j) += 1.0;
        d.matrix(row, bsize + j) += m0;
        rb.add(row, 1, bsize, 0, j, j, mptab, +1.0);
        rb.add(row, 0, bsize, 0, j, j, ntab, -1.0);
        d.rhs(row) = -ntab[static_cast<std::size_t>(j)];

        // -a g(nu) - M(tau1) f(nu) + int_nu^tau0 [f M'(tau0+nu-.) - g N(tau0+nu-.)] = 0
        row = bsize + j;
        d.matrix(row, j) += -m.a;
        d.matrix(row, bsize + j) += -m1;
        rb.add(row, 1, bsize, j, n, j + n, mptab, +1.0);
        rb.add(row, 0, bsize, j, n, j + n, ntab, -1.0);
    }
    return d;
}

// Reassemble g on [0, tau1] from the per-interval block unknowns. At interior
// block boundaries the right block's value is taken.
inline std::vector<double> stitch_g(const std::vector<std::vector<double>>& blocks,
                                    const DelayDecomposition& dec, const Grid& grid) {
    const int n = grid.n;
    const int mg = dec.gamma_index;
    const int n0 = dec.n0;
    const int n1 = (n0 + 1) * n - mg;
    std::vector<double> g(static_cast<std::size_t>(n1) + 1);
    for (int l = 0; l <= n1; ++l) {
        const int k = std::min(n0, (l + mg) / n);
        g[static_cast<std::size_t>(l)] = blocks[static_cast<std::size_t>(k)][static_cast<std::size_t>(l + mg - k * n)];
    }
    return g;
}

namespace detail {

inline std::vector<double> central_difference(const std::vector<double>& f, double step) {
    const std::size_t n = f.size() - 1;
    std::vector<double> d(f.size());
    for (std::size_t i = 1; i < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2 * step);
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * step);
    d[n] = (3 * f[n] - 4 * f[n - 1] + f[n - 2]) / (2 * step);
    return d;
}

inline ControllerKernels kernels_from_solution(const FredholmDiscretization& d,
                                               const Eigen::VectorXd& h,
                                               std::optional<double> cond) {
    const int bsize = d.block_size();
    ControllerKernels k;
    k.kcase = d.kcase;
    k.grid = d.grid;
    k.tau1 = d.dec.tau1;
    k.condition_estimate = cond;

    const int fblk = d.blocks - 1;
    k.f.assign(h.data() + fblk * bsize, h.data() + (fblk + 1) * bsize);

    if (d.kcase == KernelCase::Regular) {
        k.g_blocks.resize(static_cast<std::size_t>(d.blocks) - 1);
        for (int c = 0; c + 1 < d.blocks; ++c)
            k.g_blocks[static_cast<std::size_t>(c)].assign(h.data() + c * bsize, h.data() + (c + 1) * bsize);
        k.g = stitch_g(k.g_blocks, d.dec, d.grid);
    } else {
        k.g.assign(h.data(), h.data() + bsize);
        k.fprime = central_difference(k.f, d.grid.step);
        k.f_at_0 = k.f.front();
        k.f_at_end = k.f.back();
    }
    return k;
}

// Apply the pointwise block part K to h (per collocation node).
inline Eigen::VectorXd apply_pointwise(const FredholmDiscretization& d, const Eigen::VectorXd& h) {
    const int bsize = d.block_size();
    Eigen::VectorXd out(d.size());
    if (d.kcase == KernelCase::Degenerate) {
        for (int j = 0; j < bsize; ++j) {
            out(j) = h(j) + d.m_at_0 * h(bsize + j);
            out(bsize + j) = -d.a * h(j) - d.m_at_end * h(bsize + j);
        }
        return out;
    }
    const int n0 = d.blocks - 2;
    for (int j = 0; j < bsize; ++j) {
        out(j) = h(j);
        for (int k = 1; k <= n0; ++k) {
            double v = h(k * bsize + j);
            if (!d.skip_pointwise_coupling(k, j)) v -= d.a * h((k - 1) * bsize + j);
            out(k * bsize + j) = v;
        }
        out((n0 + 1) * bsize + j) = d.b * h((n0 + 1) * bsize + j) - d.a * h(n0 * bsize + j);
    }
    return out;
}

// Solve K x = r blockwise; K is invertible whenever b != 0 (regular) or
// a*M(0) - M(tau1) != 0 (degenerate).
inline Eigen::VectorXd solve_pointwise(const FredholmDiscretization& d, const Eigen::VectorXd& r) {
    const int bsize = d.block_size();
    Eigen::VectorXd x(d.size());
    if (d.kcase == KernelCase::Degenerate) {
        const double det = d.a * d.m_at_0 - d.m_at_end;
        for (int j = 0; j < bsize; ++j) {
            const double r1 = r(j), r2 = r(bsize + j);
            x(j) = (-d.m_at_end * r1 - d.m_at_0 * r2) / det;
            x(bsize + j) = (d.a * r1 + r2) / det;
        }
        return x;
    }
    const int n0 = d.blocks - 2;
    for (int j = 0; j < bsize; ++j) {
        x(j) = r(j);
        for (int k = 1; k <= n0; ++k) {
            double v = r(k * bsize + j);
            if (!d.skip_pointwise_coupling(k, j)) v += d.a * x((k - 1) * bsize + j);
            x(k * bsize + j) = v;
        }
        x((n0 + 1) * bsize + j) = (r((n0 + 1) * bsize + j) + d.a * x(n0 * bsize + j)) / d.b;
    }
    return x;
}

} // namespace detail

// Dense LU with partial pivoting plus a 1-norm condition estimate.
inline ControllerKernels solve_direct(const FredholmDiscretization& d) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(d.matrix);

    const Eigen::VectorXd udiag = lu.matrixLU().diagonal().cwiseAbs();
    const double pivot_scale = std::max(1.0, udiag.maxCoeff());
    if (udiag.minCoeff() <= 1e-12 * pivot_scale)
        throw SingularMatrixError("kernel system is numerically singular (pivot below 1e-12 scale)");

    const Eigen::VectorXd h = lu.solve(d.rhs);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    return detail::kernels_from_solution(d, h, cond);
}

struct SuccessiveResult {
    ControllerKernels kernels;
    std::vector<double> trace;  // sup-norm difference per iteration
};

// Fixed-point iteration h <- K^{-1}(rhs - I h) with h0 = K^{-1} rhs, where K
// is the pointwise block part and I the integral part of the assembled
// system. Converges when the iterated part is a contraction; callers should
// fall back to solve_direct otherwise.
inline SuccessiveResult solve_successive(const FredholmDiscretization& d, double tol, int maxiter) {
    if (maxiter < 1) throw std::invalid_argument("maxiter must be >= 1");
    Eigen::VectorXd h = detail::solve_pointwise(d, d.rhs);
    std::vector<double> trace;
    int nondecreasing = 0;
    for (int it = 0; it < maxiter; ++it) {
        const Eigen::VectorXd integral_part = d.matrix * h - detail::apply_pointwise(d, h);
        const Eigen::VectorXd h_next = detail::solve_pointwise(d, d.rhs - integral_part);
        const double diff = (h_next - h).lpNorm<Eigen::Infinity>();
        trace.push_back(diff);
        h = h_next;
        if (diff <= tol)
            return {detail::kernels_from_solution(d, h, std::nullopt), std::move(trace)};
        if (trace.size() >= 2 && diff >= trace[trace.size() - 2]) {
            if (++nondecreasing >= 5)
                throw IterationError("successive approximations diverged", std::move(trace), true);
        } else {
            nondecreasing = 0;
        }
    }
    throw IterationError("successive approximations hit the iteration cap", std::move(trace), false);
}

// Residuals of the three defining integral identities, evaluated on a
// midpoint-refined grid (step/2, sampled kernels linearly interpolated at the
// half nodes). This is a separate code path from assembly: agreement at
// second order in the step is the consistency oracle for both.
inline ResidualReport residuals(const PlantModel& m, const ControllerKernels& k,
                                const DelayDecomposition& dec, const Grid& grid) {
    const int n = grid.n;
    const double h2 = grid.step / 2;

    const std::vector<double> ffine = refine_linear(k.f);
    const std::vector<double> gfine = refine_linear(k.g);

    // fine-grid kernel tables
    auto fine_table = [&](const KernelExpr& ker, int coarse_len) {
        std::vector<double> t(static_cast<std::size_t>(2 * coarse_len) + 1);
        for (int i = 0; i < static_cast<int>(t.size()); ++i) t[static_cast<std::size_t>(i)] = ker(h2 * i);
        return t;
    };

    // trapezoid over fine indices [lo, hi] of samples[t] * ktab[c - t]
    auto conv = [&](const std::vector<double>& samples, int lo, int hi,
                    const std::vector<double>& ktab, int c) {
        if (hi <= lo) return 0.0;
        double acc = 0.5 * (samples[static_cast<std::size_t>(lo)] * ktab[static_cast<std::size_t>(c - lo)] +
                            samples[static_cast<std::size_t>(hi)] * ktab[static_cast<std::size_t>(c - hi)]);
        for (int t = lo + 1; t < hi; ++t)
            acc += samples[static_cast<std::size_t>(t)] * ktab[static_cast<std::size_t>(c - t)];
        return acc * h2;
    };

    ResidualReport rep;
    rep.n = n;

    if (k.kcase == KernelCase::Degenerate) {
        const KernelExpr mprime = differentiate(m.M);
        const auto ntab = fine_table(m.N, n);
        const auto mptab = fine_table(mprime, n);
        const double m0 = m.M(0.0), m1 = m.M(m.tau1);

        rep.I1.resize(static_cast<std::size_t>(n) + 1);
        rep.I3.resize(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) {
            rep.I1[static_cast<std::size_t>(j)] =
                gfine[static_cast<std::size_t>(2 * j)] + m0 * ffine[static_cast<std::size_t>(2 * j)] +
                ntab[static_cast<std::size_t>(2 * j)] +
                conv(ffine, 0, 2 * j, mptab, 2 * j) - conv(gfine, 0, 2 * j, ntab, 2 * j);
            const int c = 2 * (n + j);
            rep.I3[static_cast<std::size_t>(j)] =
                -m1 * ffine[static_cast<std::size_t>(2 * j)] - m.a * gfine[static_cast<std::size_t>(2 * j)] +
                conv(ffine, 2 * j, 2 * n, mptab, c) - conv(gfine, 2 * j, 2 * n, ntab, c);
        }
    } else {
        const int mg = dec.gamma_index;
        const int n0 = dec.n0;
        const int n1 = (n0 + 1) * n - mg;
        const auto ntab = fine_table(m.N, n);
        const auto mtab = fine_table(m.M, n1);

        rep.I1.resize(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) {
            rep.I1[static_cast<std::size_t>(j)] =
                gfine[static_cast<std::size_t>(2 * j)] + ntab[static_cast<std::size_t>(2 * j)] +
                conv(ffine, 0, 2 * j, mtab, 2 * j) - conv(gfine, 0, 2 * j, ntab, 2 * j);
        }
        // I2 on the open-left interval (tau0, tau1]
        rep.I2.resize(static_cast<std::size_t>(n1 - n >= 0 ? n1 - n : 0));
        for (int jj = 1; jj <= n1 - n; ++jj) {
            const int c = 2 * (n + jj);
            rep.I2[static_cast<std::size_t>(jj - 1)] =
                gfine[static_cast<std::size_t>(c)] - m.a * gfine[static_cast<std::size_t>(2 * jj)] +
                conv(ffine, 0, 2 * n, mtab, c) - conv(gfine, 2 * jj, c, ntab, c);
        }
        rep.I3.resize(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) {
            const int c = 2 * (n1 + j);
            rep.I3[static_cast<std::size_t>(j)] =
                m.b * ffine[static_cast<std::size_t>(2 * j)] +
                conv(ffine, 2 * j, 2 * n, mtab, c) -
                m.a * gfine[static_cast<std::size_t>(2 * (n1 - n + j))] -
                conv(gfine, 2 * (n1 - n + j), 2 * n1, ntab, c);
        }
    }

    rep.sup_I1 = detail::sup_abs(rep.I1);
    rep.sup_I2 = detail::sup_abs(rep.I2);
    rep.sup_I3 = detail::sup_abs(rep.I3);
    return rep;
}

} // namespace idec
