#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "idec/fredholm.hpp"
#include "idec/model.hpp"

using namespace idec;
using Catch::Approx;

namespace {

PlantModel distributed_model() {  // b = 0, tau0 = tau1 = 1
    return PlantModel{1.0, 1.0, 0.3, 0.0, parse_kernel_expr("0.6 + sin(pi*v)/5"),
                      parse_kernel_expr("cos(v)")};
}

PlantModel pointwise_model() {  // b = 1, tau1 = 1.5
    return PlantModel{1.0, 1.5, 0.3, 1.0, parse_kernel_expr("0.6 + sin(pi*v)/5"),
                      parse_kernel_expr("cos(v)")};
}

PlantModel scaled_model(double scale) {  // contraction-scaled kernels, b = 1
    const std::string s = std::to_string(scale);
    return PlantModel{1.0, 1.0, 0.3, 1.0,
                      parse_kernel_expr(s + "*(0.6 + sin(pi*v)/5)"),
                      parse_kernel_expr(s + "*cos(v)")};
}

struct Solved {
    Grid grid;
    DelayDecomposition dec;
    FredholmDiscretization disc;
    ControllerKernels kernels;
};

Solved solve_model(const PlantModel& m, int n) {
    Solved s;
    s.grid = make_grid(m.tau0, n);
    if (m.b != 0.0) {
        s.dec = decompose_delays(m.tau0, m.tau1, s.grid.step);
        s.disc = assemble_regular(m, s.dec, s.grid);
    } else {
        s.disc = assemble_degenerate(m, s.grid);
        s.dec = s.disc.dec;
    }
    s.kernels = solve_direct(s.disc);
    return s;
}

Eigen::VectorXd solution_vector(const FredholmDiscretization& d, const ControllerKernels& k) {
    Eigen::VectorXd h(d.size());
    const int bsize = d.block_size();
    if (d.kcase == KernelCase::Degenerate) {
        for (int i = 0; i < bsize; ++i) {
            h(i) = k.g[static_cast<std::size_t>(i)];
            h(bsize + i) = k.f[static_cast<std::size_t>(i)];
        }
    } else {
        for (int c = 0; c + 1 < d.blocks; ++c)
            for (int i = 0; i < bsize; ++i)
                h(c * bsize + i) = k.g_blocks[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        for (int i = 0; i < bsize; ++i)
            h((d.blocks - 1) * bsize + i) = k.f[static_cast<std::size_t>(i)];
    }
    return h;
}

} // namespace

TEST_CASE("assembled system sizes") {
    const PlantModel mp = pointwise_model();
    const Grid g4 = make_grid(1.0, 4);
    const DelayDecomposition dec = decompose_delays(1.0, 1.5, g4.step);
    CHECK(dec.n0 == 1);
    CHECK(dec.gamma_index == 2);
    const FredholmDiscretization dr = assemble_regular(mp, dec, g4);
    CHECK(dr.matrix.rows() == 15);  // (n0+2) * (n+1)
    CHECK(dr.matrix.cols() == 15);

    const FredholmDiscretization dd = assemble_degenerate(distributed_model(), g4);
    CHECK(dd.matrix.rows() == 10);  // 2 * (n+1)
    CHECK(dd.blocks == 2);
}

TEST_CASE("assembled entries carry segment-aware trapezoid weights") {
    // n = 4, gamma index 2: at block-0 node j = 3 the f-integral runs over
    // [0, nu_j - gamma] only, so the in-block diagonal f entry is zero and
    // both active nodes carry the half weight 0.125
    const PlantModel m = pointwise_model();
    const Grid g4 = make_grid(1.0, 4);
    const DelayDecomposition dec = decompose_delays(1.0, 1.5, g4.step);
    const FredholmDiscretization d = assemble_regular(m, dec, g4);
    const int fcol = 2 * 5;  // f block offset
    CHECK(d.matrix(3, fcol + 3) == 0.0);
    CHECK(d.matrix(3, fcol + 2) == 0.0);
    CHECK(d.matrix(3, fcol + 1) == Approx(0.125 * std::cos(0.0)).margin(1e-15));
    CHECK(d.matrix(3, fcol + 0) == Approx(0.125 * std::cos(0.25)).margin(1e-15));
    // the g0 self-coupling runs over [gamma, nu_j]
    const double n_at = [&](double v) { return 0.6 + std::sin(3.14159265358979323846 * v) / 5.0; }(0.25);
    CHECK(d.matrix(3, 2) == Approx(-0.125 * n_at).margin(1e-15));
    CHECK(d.matrix(3, 3) == Approx(1.0 - 0.125 * 0.6).margin(1e-15));
    CHECK(d.matrix(3, 0) == 0.0);  // below the support of g0
    // right-hand side: -N(nu_j - gamma)
    CHECK(d.rhs(3) == Approx(-n_at).margin(1e-15));
    CHECK(d.rhs(1) == 0.0);  // argument below zero is extension territory
}

TEST_CASE("longer input delays: multi-block systems stay consistent") {
    struct Case {
        double tau1;
        const char* mker;
    };
    // kernels vanish at the interval ends so the solutions stay continuous
    const Case cases[] = {
        {2.0, "0.3*sin(pi*v/2)"},       // n0 = 1, gamma = 0
        {2.5, "0.3*sin(2*pi*v/2.5)"},   // n0 = 2, gamma = 0.5
    };
    for (const Case& c : cases) {
        PlantModel m{1.0, c.tau1, 0.3, 1.0, parse_kernel_expr("sin(pi*v)/5"),
                     parse_kernel_expr(c.mker)};
        INFO("tau1 = " << c.tau1);
        const Solved s100 = solve_model(m, 100);
        const Solved s200 = solve_model(m, 200);
        const ResidualReport r100 = residuals(m, s100.kernels, s100.dec, s100.grid);
        const ResidualReport r200 = residuals(m, s200.kernels, s200.dec, s200.grid);
        CHECK(r200.sup_all() <= 1e-3);
        const double ratio = r100.sup_all() / r200.sup_all();
        CHECK(ratio > 3.0);
        CHECK(ratio < 5.0);
    }
}

TEST_CASE("a vanishing pointwise pivot is reported as singular") {
    PlantModel m{1.0, 1.0, 0.3, 1e-20, parse_kernel_expr("0"), parse_kernel_expr("0")};
    const Grid g = make_grid(1.0, 16);
    const FredholmDiscretization d = assemble_regular(m, decompose_delays(1.0, 1.0, g.step), g);
    CHECK_THROWS_AS(solve_direct(d), SingularMatrixError);
}

TEST_CASE("wrong-case assembly is rejected") {
    const Grid g = make_grid(1.0, 8);
    CHECK_THROWS_AS(assemble_regular(distributed_model(), decompose_delays(1.0, 1.0, g.step), g),
                    std::invalid_argument);
    CHECK_THROWS_AS(assemble_degenerate(pointwise_model(), g), std::invalid_argument);
}

TEST_CASE("zero kernels give a pure pointwise system and zero feedback") {
    PlantModel m{1.0, 1.0, 0.3, 1.0, parse_kernel_expr("0"), parse_kernel_expr("0")};
    const Grid g = make_grid(1.0, 50);
    const DelayDecomposition dec = decompose_delays(1.0, 1.0, g.step);
    const FredholmDiscretization d = assemble_regular(m, dec, g);

    // integral part vanishes: the matrix action equals the pointwise pattern
    Eigen::VectorXd probe = Eigen::VectorXd::Random(d.size());
    const Eigen::VectorXd residual = d.matrix * probe - detail::apply_pointwise(d, probe);
    CHECK(residual.lpNorm<Eigen::Infinity>() == 0.0);

    const ControllerKernels k = solve_direct(d);
    for (double v : k.f) CHECK(std::abs(v) <= 1e-12);
    for (double v : k.g) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("distributed-only pointwise block matches the kernel endpoints") {
    const Grid g = make_grid(1.0, 16);
    const FredholmDiscretization d = assemble_degenerate(distributed_model(), g);
    CHECK(d.m_at_0 == Approx(1.0).margin(1e-15));
    CHECK(d.m_at_end == Approx(std::cos(1.0)).margin(1e-15));
    // |det K| = |a M(0) - M(tau1)|
    CHECK(std::abs(d.a * d.m_at_0 - d.m_at_end) ==
          Approx(std::abs(0.3 - std::cos(1.0))).margin(1e-14));

    // N = 0, M = 1 has M' = 0: the system reduces to K (g, f) = 0
    PlantModel trivial{1.0, 1.0, 0.3, 0.0, parse_kernel_expr("0"), parse_kernel_expr("1")};
    const ControllerKernels k = solve_direct(assemble_degenerate(trivial, g));
    for (double v : k.f) CHECK(std::abs(v) <= 1e-14);
    for (double v : k.g) CHECK(std::abs(v) <= 1e-14);
}

TEST_CASE("degenerate assembly enforces the pointwise assumption") {
    // a M(0) - M(tau1) = 0 for M = 0
    PlantModel bad{1.0, 1.0, 0.3, 0.0, parse_kernel_expr("0.6"), parse_kernel_expr("0")};
    CHECK_THROWS_AS(assemble_degenerate(bad, make_grid(1.0, 8)), NumericalError);
}

TEST_CASE("direct solve leaves a tiny backward error and a condition estimate") {
    const Solved s = solve_model(distributed_model(), 100);
    REQUIRE(s.kernels.condition_estimate.has_value());
    CHECK(*s.kernels.condition_estimate >= 1.0);

    const Eigen::VectorXd h = solution_vector(s.disc, s.kernels);
    const double backward = (s.disc.matrix * h - s.disc.rhs).lpNorm<Eigen::Infinity>();
    const double scale = s.disc.matrix.cwiseAbs().rowwise().sum().maxCoeff() *
                         h.lpNorm<Eigen::Infinity>();
    CHECK(backward <= 1e-10 * scale);
}

TEST_CASE("perturbation of the right-hand side obeys the condition bound") {
    const PlantModel m = distributed_model();
    const Grid g = make_grid(1.0, 30);
    const FredholmDiscretization d = assemble_degenerate(m, g);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(d.matrix);
    const Eigen::VectorXd h = lu.solve(d.rhs);

    // exact 1-norm of the inverse, column by column
    const int size = d.size();
    double inv_norm1 = 0.0;
    for (int j = 0; j < size; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(size);
        e(j) = 1.0;
        inv_norm1 = std::max(inv_norm1, lu.solve(e).lpNorm<1>());
    }

    const double delta = 1e-6;
    Eigen::VectorXd rhs2 = d.rhs;
    rhs2(size / 3) += delta;
    const Eigen::VectorXd h2 = lu.solve(rhs2);
    CHECK((h2 - h).lpNorm<1>() <= inv_norm1 * delta * (1.0 + 1e-12));

    // the reported estimate tracks the exact condition number
    const double norm1 = d.matrix.cwiseAbs().colwise().sum().maxCoeff();
    const double exact_cond = norm1 * inv_norm1;
    const ControllerKernels k = solve_direct(d);
    CHECK(*k.condition_estimate <= exact_cond * 1.01);
    CHECK(*k.condition_estimate >= exact_cond / 100.0);
}

TEST_CASE("reference distributed model: residual oracle at n = 200 and order check") {
    const PlantModel m = distributed_model();
    const Solved s200 = solve_model(m, 200);
    const ResidualReport r200 = residuals(m, s200.kernels, s200.dec, s200.grid);

    CHECK(r200.sup_I1 <= 1e-3);
    CHECK(r200.sup_I3 <= 1e-3);
    CHECK(r200.sup_I2 == 0.0);
    CHECK(r200.I2.empty());

    const Solved s400 = solve_model(m, 400);
    const ResidualReport r400 = residuals(m, s400.kernels, s400.dec, s400.grid);
    const double ratio1 = r200.sup_I1 / r400.sup_I1;
    const double ratio3 = r200.sup_I3 / r400.sup_I3;
    CHECK(ratio1 > 3.0);
    CHECK(ratio1 < 5.0);
    CHECK(ratio3 > 3.0);
    CHECK(ratio3 < 5.0);
}

TEST_CASE("pointwise-input model: block system, residuals, and support of g0") {
    const PlantModel m = pointwise_model();
    const Solved s = solve_model(m, 200);
    const ResidualReport rep = residuals(m, s.kernels, s.dec, s.grid);
    CHECK(rep.sup_I1 <= 1e-3);
    CHECK(rep.sup_I2 <= 1e-3);
    CHECK(rep.sup_I3 <= 1e-3);
    CHECK(rep.I2.size() == 100);  // nodes on (tau0, tau1]

    // the first block vanishes below gamma
    const std::vector<double>& g0 = s.kernels.g_blocks[0];
    const double rhs_sup = s.disc.rhs.lpNorm<Eigen::Infinity>();
    const double bound = 10.0 * s.grid.step * s.grid.step * (1.0 + rhs_sup);
    for (int i = 0; i < s.dec.gamma_index; ++i)
        CHECK(std::abs(g0[static_cast<std::size_t>(i)]) <= bound);

    // stitched g agrees with the blocks: g(0.25) = g0(0.75), g(1.2) = g1(0.7)
    const int n = s.grid.n;
    const int mg = s.dec.gamma_index;
    CHECK(s.kernels.g[n / 4] == g0[static_cast<std::size_t>(n / 4 + mg)]);
    const int l12 = static_cast<int>(std::llround(1.2 / s.grid.step));
    CHECK(s.kernels.g[static_cast<std::size_t>(l12)] ==
          s.kernels.g_blocks[1][static_cast<std::size_t>(l12 + mg - n)]);
}

TEST_CASE("oracle consistency shrinks ~4x on a smooth pointwise-input battery") {
    // kernels vanishing at the interval ends keep the solution continuous
    PlantModel m{1.0, 1.5, 0.3, 1.0, parse_kernel_expr("sin(pi*v)/5"),
                 parse_kernel_expr("0.4*sin(2*pi*v/1.5)")};
    const Solved s100 = solve_model(m, 100);
    const Solved s200 = solve_model(m, 200);
    const ResidualReport r100 = residuals(m, s100.kernels, s100.dec, s100.grid);
    const ResidualReport r200 = residuals(m, s200.kernels, s200.dec, s200.grid);
    const double ratio = r100.sup_all() / r200.sup_all();
    CHECK(ratio > 3.0);
    CHECK(ratio < 5.0);
}

TEST_CASE("stitching conventions") {
    const Grid g = make_grid(1.0, 10);
    SECTION("single block passes through verbatim") {
        std::vector<std::vector<double>> blocks(1);
        for (int i = 0; i <= 10; ++i) blocks[0].push_back(100.0 + i);
        const DelayDecomposition dec{0, 0.0, 0, 1.0, 0.0, false};
        CHECK(stitch_g(blocks, dec, g) == blocks[0]);
    }
    SECTION("two blocks with gamma = 0.5, right block wins at the boundary") {
        std::vector<std::vector<double>> blocks(2);
        for (int i = 0; i <= 10; ++i) blocks[0].push_back(100.0 + i);
        for (int i = 0; i <= 10; ++i) blocks[1].push_back(200.0 + i);
        const DelayDecomposition dec{1, 0.5, 5, 1.5, 0.0, false};
        const std::vector<double> st = stitch_g(blocks, dec, g);
        REQUIRE(st.size() == 16);  // [0, 1.5] at step 0.1
        CHECK(st[0] == blocks[0][5]);    // g(0) = g0(gamma)
        CHECK(st[4] == blocks[0][9]);    // interior of block 0
        CHECK(st[5] == blocks[1][0]);    // boundary: right block
        CHECK(st[12] == blocks[1][7]);   // g(1.2) = g1(0.7)
        CHECK(st[15] == blocks[1][10]);  // g(tau1) = g1(tau0)
    }
}

TEST_CASE("successive approximations") {
    SECTION("zero kernels converge in one iteration") {
        PlantModel m{1.0, 1.0, 0.3, 1.0, parse_kernel_expr("0"), parse_kernel_expr("0")};
        const Grid g = make_grid(1.0, 40);
        const FredholmDiscretization d =
            assemble_regular(m, decompose_delays(1.0, 1.0, g.step), g);
        const SuccessiveResult res = solve_successive(d, 1e-10, 50);
        CHECK(res.trace.size() == 1);
        for (double v : res.kernels.f) CHECK(std::abs(v) <= 1e-12);
        for (double v : res.kernels.g) CHECK(std::abs(v) <= 1e-12);
    }

    SECTION("contraction-scaled kernels match the direct solve") {
        const PlantModel m = scaled_model(0.01);
        const Grid g = make_grid(1.0, 100);
        const FredholmDiscretization d =
            assemble_regular(m, decompose_delays(1.0, 1.0, g.step), g);
        const SuccessiveResult res = solve_successive(d, 1e-10, 200);
        const ControllerKernels direct = solve_direct(d);
        double diff = 0.0;
        for (std::size_t i = 0; i < direct.f.size(); ++i)
            diff = std::max(diff, std::abs(direct.f[i] - res.kernels.f[i]));
        for (std::size_t i = 0; i < direct.g.size(); ++i)
            diff = std::max(diff, std::abs(direct.g[i] - res.kernels.g[i]));
        CHECK(diff <= 1e-8);
    }

    SECTION("iteration cap surfaces as an error with the trace") {
        const FredholmDiscretization d =
            assemble_degenerate(distributed_model(), make_grid(1.0, 100));
        try {
            solve_successive(d, 1e-10, 3);
            FAIL("expected the iteration cap to fire");
        } catch (const IterationError& e) {
            CHECK(e.trace.size() == 3);
            CHECK_FALSE(e.diverged);
        }
    }

    SECTION("divergence is detected on the reference distributed model") {
        const FredholmDiscretization d =
            assemble_degenerate(distributed_model(), make_grid(1.0, 100));
        try {
            solve_successive(d, 1e-10, 200);
            FAIL("expected divergence");
        } catch (const IterationError& e) {
            CHECK(e.diverged);
            CHECK(e.trace.size() >= 5);
        }
    }
}

TEST_CASE("zero feedback kernels on a zero-kernel degenerate-style model stay zero") {
    // rhs = 0 and invertible matrix: solution exactly zero even when iterated
    PlantModel m{1.0, 1.0, 0.3, 1.0, parse_kernel_expr("0"), parse_kernel_expr("0")};
    const Grid g = make_grid(1.0, 64);
    const FredholmDiscretization d = assemble_regular(m, decompose_delays(1.0, 1.0, g.step), g);
    const ControllerKernels k = solve_direct(d);
    double sup = 0.0;
    for (double v : k.f) sup = std::max(sup, std::abs(v));
    for (double v : k.g) sup = std::max(sup, std::abs(v));
    CHECK(sup <= 1e-12);
}
