// Uniform grids on delay intervals and composite trapezoid quadrature.
// All delay-interval integrals in the toolkit run through these helpers;
// kernels are extended by zero outside their declared domain.

#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "idec/expr.hpp"

namespace idec {

struct Grid {
    int n = 0;          // number of subintervals
    double step = 0.0;  // node spacing
    double length = 0.0;

    [[nodiscard]] double node(int i) const { return step * i; }
    [[nodiscard]] int points() const { return n + 1; }
};

inline Grid make_grid(double length, int n) {
    if (!(length > 0.0)) throw std::invalid_argument("grid length must be positive");
    if (n < 2) throw std::invalid_argument("grid needs at least 2 subintervals");
    return Grid{n, length / n, length};
}

// Composite trapezoid: step * (s_0/2 + s_1 + ... + s_{n-1} + s_n/2).
inline double trapezoid(std::span<const double> samples, double step) {
    if (samples.size() < 2) throw std::invalid_argument("trapezoid needs at least 2 samples");
    double acc = 0.5 * (samples.front() + samples.back());
    for (std::size_t i = 1; i + 1 < samples.size(); ++i) acc += samples[i];
    return acc * step;
}

// Zero-extension: the kernel value is 0 strictly outside [0, domain_length].
inline double eval_extended(const KernelExpr& kernel, double domain_length, double x) {
    if (x < 0.0 || x > domain_length) return 0.0;
    return kernel(x);
}

// Trapezoid approximation of  int_0^{nu_j} fsamples(eta) * kernel(nu_j + shift - eta) deta
// on the grid nodes eta_i, i = 0..j. Returns 0 for j = 0 (empty integral).
inline double convolve_at(std::span<const double> fsamples, const Grid& grid,
                          const KernelExpr& kernel, double kernel_length,
                          int j, double shift) {
    if (j < 0 || j > grid.n || static_cast<std::size_t>(grid.n) + 1 > fsamples.size())
        throw std::out_of_range("convolve_at: node index out of range");
    if (j == 0) return 0.0;
    const double c = grid.node(j) + shift;
    double acc = 0.5 * (fsamples[0] * eval_extended(kernel, kernel_length, c) +
                        fsamples[j] * eval_extended(kernel, kernel_length, c - grid.node(j)));
    for (int i = 1; i < j; ++i)
        acc += fsamples[i] * eval_extended(kernel, kernel_length, c - grid.node(i));
    return acc * grid.step;
}

// Trapezoid weight of node i inside the index segment [lo, hi]; zero-width
// segments contribute nothing.
inline double segment_weight(int i, int lo, int hi, double step) {
    if (hi <= lo || i < lo || i > hi) return 0.0;
    return (i == lo || i == hi) ? 0.5 * step : step;
}

// Midpoint-refined copy of a sample vector: 2*size-1 entries with linear
// interpolation at the new half nodes.
inline std::vector<double> refine_linear(std::span<const double> samples) {
    if (samples.empty()) return {};
    std::vector<double> out(2 * samples.size() - 1);
    for (std::size_t i = 0; i < samples.size(); ++i) out[2 * i] = samples[i];
    for (std::size_t i = 0; i + 1 < samples.size(); ++i)
        out[2 * i + 1] = 0.5 * (samples[i] + samples[i + 1]);
    return out;
}

// Sample an expression on [0, length] at n+1 uniform nodes.
inline std::vector<double> sample_expr(const KernelExpr& k, double length, int n) {
    const double step = length / n;
    std::vector<double> out(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) out[static_cast<std::size_t>(i)] = k(step * i);
    return out;
}

} // namespace idec
