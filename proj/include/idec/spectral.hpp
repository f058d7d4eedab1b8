// Holomorphic characteristic functions of the plant, zero location over
// rectangles by the argument principle, the spectral controllability check,
// and the closed-loop characteristic / controller transfer functions.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "idec/errors.hpp"
#include "idec/fredholm.hpp"
#include "idec/model.hpp"
#include "idec/quadrature.hpp"

namespace idec {

using Complex = std::complex<double>;
using ComplexFn = std::function<Complex(Complex)>;

namespace detail {

// Trapezoid of  sum_i w_i samples[i] e^{-nu_i s}  over [0, length]. The
// exponential factors follow a multiplicative recurrence with a periodic
// exact refresh to bound drift. With `moment` the integrand gains a nu factor
// (for d/ds of the transform, up to sign).
inline Complex laplace_sum(std::span<const double> samples, double length, Complex s,
                           bool moment = false) {
    const std::size_t count = samples.size();
    const double step = length / static_cast<double>(count - 1);
    const Complex ratio = std::exp(-step * s);
    Complex expfac = 1.0;
    Complex acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % 128 == 0) expfac = std::exp(-(step * static_cast<double>(i)) * s);
        const double w = (i == 0 || i + 1 == count) ? 0.5 : 1.0;
        const double factor = moment ? samples[i] * (step * static_cast<double>(i)) : samples[i];
        acc += w * factor * expfac;
        expfac *= ratio;
    }
    return acc * step;
}

inline void check_imag_cap(Complex s, double tau, int nspec) {
    if (std::abs(s.imag()) > nspec / (4.0 * tau))
        throw NumericalError(" |Im s| exceeds the transform sampling cap n_spec/(4 tau)");
}

} // namespace detail

// Transform of a sampled kernel: int_0^length samples(nu) e^{-nu s} dnu,
// with the samples midpoint-refined until the density reaches nspec nodes.
inline Complex transform_samples(std::span<const double> samples, double length, Complex s,
                                 int nspec = kDefaultTransformNodes) {
    detail::check_imag_cap(s, length, nspec);
    std::vector<double> fine(samples.begin(), samples.end());
    while (static_cast<int>(fine.size()) - 1 < nspec) fine = refine_linear(fine);
    return detail::laplace_sum(fine, length, s);
}

// F0 / F1 evaluators with the kernel samples precomputed once.
class CharacteristicEvaluator {
public:
    CharacteristicEvaluator(const PlantModel& m, int nspec = kDefaultTransformNodes)
        : tau0_(m.tau0), tau1_(m.tau1), a_(m.a), b_(m.b), nspec_(nspec),
          nsamples_(sample_expr(m.N, m.tau0, nspec)),
          msamples_(sample_expr(m.M, m.tau1, nspec)) {}

    [[nodiscard]] Complex F0(Complex s) const {
        detail::check_imag_cap(s, tau1_, nspec_);
        return 1.0 - a_ * std::exp(-tau0_ * s) - detail::laplace_sum(nsamples_, tau0_, s);
    }

    // F0'(s) = tau0 a e^{-tau0 s} + int nu N(nu) e^{-nu s} dnu
    [[nodiscard]] Complex F0_derivative(Complex s) const {
        detail::check_imag_cap(s, tau1_, nspec_);
        return tau0_ * a_ * std::exp(-tau0_ * s) + detail::laplace_sum(nsamples_, tau0_, s, true);
    }

    [[nodiscard]] Complex F1(Complex s) const {
        detail::check_imag_cap(s, tau1_, nspec_);
        return b_ * std::exp(-tau1_ * s) + detail::laplace_sum(msamples_, tau1_, s);
    }

    [[nodiscard]] Complex F1_derivative(Complex s) const {
        detail::check_imag_cap(s, tau1_, nspec_);
        return -tau1_ * b_ * std::exp(-tau1_ * s) - detail::laplace_sum(msamples_, tau1_, s, true);
    }

private:
    double tau0_, tau1_, a_, b_;
    int nspec_;
    std::vector<double> nsamples_, msamples_;
};

inline Complex eval_F0(const PlantModel& m, Complex s, int nspec = kDefaultTransformNodes) {
    return CharacteristicEvaluator(m, nspec).F0(s);
}

inline Complex eval_F1(const PlantModel& m, Complex s, int nspec = kDefaultTransformNodes) {
    return CharacteristicEvaluator(m, nspec).F1(s);
}

struct Rect {
    double re_min = 0, re_max = 0, im_min = 0, im_max = 0;

    [[nodiscard]] Complex center() const { return {0.5 * (re_min + re_max), 0.5 * (im_min + im_max)}; }
    [[nodiscard]] double width() const { return re_max - re_min; }
    [[nodiscard]] double height() const { return im_max - im_min; }
    [[nodiscard]] bool contains(Complex z, double slack = 0.0) const {
        return z.real() >= re_min - slack && z.real() <= re_max + slack &&
               z.imag() >= im_min - slack && z.imag() <= im_max + slack;
    }
};

struct RootEntry {
    Complex value;
    double abs_F = 0.0;
    int multiplicity = 1;
};

struct UnresolvedBox {
    Rect box;
    int winding = 0;
};

enum class Controllability { PassInRegion, Fail, NotChecked };

struct SpectrumReport {
    Rect region;
    std::vector<RootEntry> roots;
    int winding_total = 0;
    Controllability verdict = Controllability::NotChecked;
    std::optional<Complex> witness;          // common zero on a Fail verdict
    std::vector<double> F1_at_roots;         // |F1| at each located F0 root
    std::vector<UnresolvedBox> unresolved;
};

struct FindZeroOptions {
    double root_tol = 1e-8;
    double boundary_tol = 1e-10;
    double min_box = 1e-8;   // boxes this small stop subdividing
    int max_newton = 50;
    int max_inflate = 3;
};

namespace detail {

struct BoundaryZero {};  // signal: |F| dipped below boundary_tol on a contour

class WindingWalker {
public:
    WindingWalker(const ComplexFn& F, double boundary_tol) : F_(F), tol_(boundary_tol) {}

    // winding number of F over the rectangle boundary, counterclockwise
    int winding(const Rect& r) const {
        const Complex c1(r.re_min, r.im_min), c2(r.re_max, r.im_min);
        const Complex c3(r.re_max, r.im_max), c4(r.re_min, r.im_max);
        double total = 0.0;
        total += edge(c1, c2);
        total += edge(c2, c3);
        total += edge(c3, c4);
        total += edge(c4, c1);
        const double turns = total / (2.0 * 3.14159265358979323846);
        const int w = static_cast<int>(std::lround(turns));
        if (std::abs(turns - w) > 0.25) throw NumericalError("winding number did not settle to an integer");
        return w;
    }

private:
    Complex value(Complex z) const {
        const Complex f = F_(z);
        if (std::abs(f) <= tol_) throw BoundaryZero{};
        return f;
    }

    double edge(Complex za, Complex zb) const { return segment(za, value(za), zb, value(zb), 0); }

    // Argument increment along [za, zb]. A segment is accepted only when both
    // halves turn by less than pi/2 AND their sum agrees with the unsplit
    // principal increment; endpoint arguments alone can alias away full turns.
    double segment(Complex za, Complex fa, Complex zb, Complex fb, int depth) const {
        if (depth > 48) throw BoundaryZero{};  // cannot resolve: treat as a near-boundary zero
        const Complex zm = 0.5 * (za + zb);
        const Complex fm = value(zm);
        if (depth >= 4) {
            const double left = std::arg(fm / fa);
            const double right = std::arg(fb / fm);
            const double whole = std::arg(fb / fa);
            if (std::abs(left) < 1.5707963267948966 && std::abs(right) < 1.5707963267948966 &&
                std::abs(left + right - whole) < 1e-9)
                return left + right;
        }
        return segment(za, fa, zm, fm, depth + 1) + segment(zm, fm, zb, fb, depth + 1);
    }

    ComplexFn F_;
    double tol_;
};

inline std::optional<Complex> newton_refine(const ComplexFn& F, const ComplexFn& dF, Complex z0,
                                            const Rect& box, const FindZeroOptions& opt) {
    Complex z = z0;
    try {
        for (int it = 0; it < opt.max_newton; ++it) {
            const Complex f = F(z);
            if (std::abs(f) <= opt.root_tol) {
                const double slack = 1e-12 + 1e-9 * std::max(box.width(), box.height());
                if (box.contains(z, slack)) return z;
                return std::nullopt;  // converged into a neighbouring box; its winding covers it
            }
            const Complex df = dF(z);
            if (std::abs(df) < 1e-300) return std::nullopt;
            z -= f / df;
        }
    } catch (const std::exception&) {
        // an iterate escaped the evaluator's domain; count it as no convergence
    }
    return std::nullopt;
}

struct ZeroSearch {
    ComplexFn F;
    ComplexFn dF;
    FindZeroOptions opt;
    WindingWalker walker;
    std::vector<RootEntry> roots;
    std::vector<UnresolvedBox> unresolved;

    ZeroSearch(const ComplexFn& f, const ComplexFn& df, const FindZeroOptions& o)
        : F(f), dF(df), opt(o), walker(f, o.boundary_tol) {}

    void search(const Rect& r, int w) {
        if (w == 0) return;
        if (w < 0) {  // not attainable for a holomorphic function; numerical trouble
            unresolved.push_back({r, w});
            return;
        }
        if (w == 1) {
            const Complex candidates[5] = {
                r.center(),
                {r.re_min + 0.25 * r.width(), r.im_min + 0.25 * r.height()},
                {r.re_min + 0.75 * r.width(), r.im_min + 0.25 * r.height()},
                {r.re_min + 0.25 * r.width(), r.im_min + 0.75 * r.height()},
                {r.re_min + 0.75 * r.width(), r.im_min + 0.75 * r.height()},
            };
            for (const Complex& start : candidates) {
                if (auto root = newton_refine(F, dF, start, r, opt)) {
                    roots.push_back({*root, std::abs(F(*root)), 1});
                    return;
                }
            }
            // Newton failed from every start: shrink the box around the zero
            // and retry, giving up only at the minimum box size.
            if (std::max(r.width(), r.height()) > opt.min_box) {
                subdivide(r, w);
            } else {
                unresolved.push_back({r, w});
            }
            return;
        }
        if (std::max(r.width(), r.height()) <= opt.min_box) {
            // cluster tighter than min_box: report once with multiplicity
            roots.push_back({r.center(), std::abs(F(r.center())), w});
            return;
        }
        subdivide(r, w);
    }

    void subdivide(const Rect& r, int w) {
        // Irrational-looking cut fractions: a dyadic cascade of 0.5 cuts walks
        // straight through real-axis roots, and an even-multiplicity zero on a
        // cut line is invisible to argument tracking (no sign flip through a
        // square). Later fractions are fallbacks when a cut is still blocked.
        static constexpr double fractions[4] = {0.511871, 0.476293, 0.54296, 0.5};
        for (double frac : fractions) {
            const double xm = r.re_min + frac * r.width();
            const double ym = r.im_min + frac * r.height();
            const Rect quads[4] = {
                {r.re_min, xm, r.im_min, ym},
                {xm, r.re_max, r.im_min, ym},
                {r.re_min, xm, ym, r.im_max},
                {xm, r.re_max, ym, r.im_max},
            };
            int windings[4];
            bool ok = true;
            int sum = 0;
            try {
                for (int q = 0; q < 4; ++q) {
                    windings[q] = walker.winding(quads[q]);
                    sum += windings[q];
                }
            } catch (const BoundaryZero&) {
                ok = false;
            }
            if (!ok || sum != w) continue;  // a zero near a cut: nudge and retry
            for (int q = 0; q < 4; ++q) search(quads[q], windings[q]);
            return;
        }
        // Every cut is blocked by near-zero contour values. Around a zero of
        // multiplicity w the function is ~dist^w, so once the box is small no
        // interior cut can clear boundary_tol: report the cluster.
        if (w >= 2 && std::max(r.width(), r.height()) <= 1e-4) {
            roots.push_back({r.center(), std::abs(F(r.center())), w});
            return;
        }
        unresolved.push_back({r, w});
    }
};

} // namespace detail

// Locate zeros of a holomorphic function inside a rectangle: winding numbers
// by adaptive argument tracking on the boundary, recursive quadrisection
// until each box holds at most one zero, then Newton refinement with the
// analytic derivative. A region whose boundary passes too close to a zero is
// inflated slightly and retried a few times.
inline SpectrumReport find_zeros(const ComplexFn& F, const ComplexFn& dF, Rect region,
                                 FindZeroOptions opt = {}) {
    detail::ZeroSearch search(F, dF, opt);
    Rect r = region;
    int w = 0;
    for (int attempt = 0;; ++attempt) {
        try {
            w = search.walker.winding(r);
            break;
        } catch (const detail::BoundaryZero&) {
            if (attempt >= opt.max_inflate)
                throw NumericalError("zero on the search-region boundary after inflation retries");
            const double dre = 0.02 * r.width() + 1e-6;
            const double dim = 0.02 * r.height() + 1e-6;
            r = Rect{r.re_min - dre, r.re_max + dre, r.im_min - dim, r.im_max + dim};
        }
    }
    search.search(r, w);

    SpectrumReport rep;
    rep.region = r;
    rep.roots = std::move(search.roots);
    rep.unresolved = std::move(search.unresolved);
    // sort by (Re, Im); real parts matching to root_tol scale count as ties
    const double bucket = 100.0 * opt.root_tol;
    std::sort(rep.roots.begin(), rep.roots.end(), [bucket](const RootEntry& x, const RootEntry& y) {
        const double bx = std::floor(x.value.real() / bucket);
        const double by = std::floor(y.value.real() / bucket);
        if (bx != by) return bx < by;
        return x.value.imag() < y.value.imag();
    });
    rep.winding_total = 0;
    for (const auto& root : rep.roots) rep.winding_total += root.multiplicity;
    return rep;
}

inline Rect default_controllability_region(const PlantModel& m) {
    return Rect{-5.0, 1.0, -40.0 / m.tau0, 40.0 / m.tau0};
}

// Controllability check over synthetic evaluators (exposed for test doubles):
// locate all zeros of F0 in the region, then require |F1| > tol at each.
inline SpectrumReport check_controllability_evaluators(const ComplexFn& F0, const ComplexFn& dF0,
                                                       const ComplexFn& F1, Rect region, double tol,
                                                       FindZeroOptions opt = {}) {
    SpectrumReport rep = find_zeros(F0, dF0, region, opt);
    rep.verdict = Controllability::PassInRegion;
    for (const auto& root : rep.roots) {
        const double mag = std::abs(F1(root.value));
        rep.F1_at_roots.push_back(mag);
        if (mag <= tol && !rep.witness) {
            rep.verdict = Controllability::Fail;
            rep.witness = root.value;
        }
    }
    if (!rep.unresolved.empty() && rep.verdict == Controllability::PassInRegion)
        rep.verdict = Controllability::NotChecked;
    return rep;
}

inline SpectrumReport check_spectral_controllability(const PlantModel& m, Rect region,
                                                     double tol = 1e-6,
                                                     int nspec = kDefaultTransformNodes,
                                                     FindZeroOptions opt = {}) {
    const CharacteristicEvaluator ev(m, nspec);
    return check_controllability_evaluators(
        [&](Complex s) { return ev.F0(s); }, [&](Complex s) { return ev.F0_derivative(s); },
        [&](Complex s) { return ev.F1(s); }, region, tol, opt);
}

// det(Id - A(s)) of the closed loop, evaluated as F0(s)(1 - G(s)) - F1(s) Phi(s)
// with G the transform of g and Phi the transform of f (times s for the
// distributed-only control law, by the integration-by-parts identity for its
// pointwise terms).
inline Complex closed_loop_charfun(const PlantModel& m, const ControllerKernels& k, Complex s,
                                   int nspec = kDefaultTransformNodes) {
    const CharacteristicEvaluator ev(m, nspec);
    const Complex G = transform_samples(k.g, k.tau1, s, nspec);
    Complex phi = transform_samples(k.f, k.grid.length, s, nspec);
    if (k.kcase == KernelCase::Degenerate) phi *= s;
    return ev.F0(s) * (1.0 - G) - ev.F1(s) * phi;
}

// U(s)/x(s) of the controller alone: Phi(s) / (1 - G(s)).
inline Complex controller_transfer(const ControllerKernels& k, const PlantModel& m, Complex s,
                                   int nspec = kDefaultTransformNodes) {
    (void)m;
    const Complex G = transform_samples(k.g, k.tau1, s, nspec);
    const Complex den = 1.0 - G;
    if (std::abs(den) <= 1e-12)
        throw NumericalError("controller transfer function has a pole at the requested point");
    Complex phi = transform_samples(k.f, k.grid.length, s, nspec);
    if (k.kcase == KernelCase::Degenerate) phi *= s;
    return phi / den;
}

} // namespace idec
