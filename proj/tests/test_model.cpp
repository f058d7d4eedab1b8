#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "idec/model.hpp"

using namespace idec;
using Catch::Approx;

namespace {

PlantModel reference_model() {
    return PlantModel{1.0, 1.0, 0.3, 0.0, parse_kernel_expr("0.6 + sin(pi*v)/5"),
                      parse_kernel_expr("cos(v)")};
}

} // namespace

TEST_CASE("validation of the reference distributed-input model") {
    const ValidationReport rep = validate(reference_model());
    CHECK(rep.all_pass());

    // a*M(0) - M(1) = 0.3 - cos(1)
    const ValidationCheck* pw = rep.find("assumption-pointwise");
    REQUIRE(pw != nullptr);
    CHECK(pw->pass);
    CHECK(pw->value == Approx(0.3 - std::cos(1.0)).margin(1e-12));

    // F0(0) = 1 - 0.3 - 0.6 - 2/(5 pi)
    const ValidationCheck* f0 = rep.find("assumption-f0");
    REQUIRE(f0 != nullptr);
    CHECK(f0->pass);
    CHECK(f0->value == Approx(0.1 - 2.0 / (5.0 * 3.14159265358979323846)).margin(1e-6));
}

TEST_CASE("principal part violation is reported by name") {
    PlantModel m = reference_model();
    m.a = 1.2;
    const ValidationReport rep = validate(m);
    CHECK_FALSE(rep.all_pass());
    const ValidationCheck* c = rep.find("principal-part");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->pass);
    CHECK(c->value == 1.2);
}

TEST_CASE("validate is pure and skips the b = 0 checks when b != 0") {
    PlantModel m = reference_model();
    m.b = 1.0;
    m.tau1 = 1.5;
    const ValidationReport r1 = validate(m);
    const ValidationReport r2 = validate(m);
    REQUIRE(r1.checks.size() == r2.checks.size());
    for (std::size_t i = 0; i < r1.checks.size(); ++i) {
        CHECK(r1.checks[i].pass == r2.checks[i].pass);
        CHECK(r1.checks[i].value == r2.checks[i].value);
    }
    CHECK(r1.find("assumption-pointwise") == nullptr);
    CHECK(r1.find("assumption-f0") == nullptr);
    CHECK(r1.find("equal-delays") == nullptr);
}

TEST_CASE("b = 0 with unequal delays fails validation") {
    PlantModel m = reference_model();
    m.tau1 = 1.5;
    const ValidationReport rep = validate(m);
    const ValidationCheck* c = rep.find("equal-delays");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->pass);
}

TEST_CASE("delay decomposition") {
    SECTION("equal delays") {
        const DelayDecomposition dec = decompose_delays(1.0, 1.0, 0.005);
        CHECK(dec.n0 == 0);
        CHECK(dec.gamma == 0.0);
        CHECK(dec.tau1 == 1.0);
    }
    SECTION("half-interval offset") {
        const DelayDecomposition dec = decompose_delays(1.0, 1.5, 0.005);
        CHECK(dec.n0 == 1);
        CHECK(dec.gamma == Approx(0.5).margin(1e-12));
        CHECK((dec.n0 + 1) * 1.0 - dec.gamma == dec.tau1);  // recompose exactly
        CHECK(dec.tau1 == Approx(1.5).margin(1e-12));
    }
    SECTION("integer multiple") {
        const DelayDecomposition dec = decompose_delays(1.0, 2.0, 0.005);
        CHECK(dec.n0 == 1);
        CHECK(dec.gamma == 0.0);
    }
    SECTION("snapping onto the grid") {
        const DelayDecomposition dec = decompose_delays(1.0, 1.5007, 0.005);
        CHECK(dec.n0 == 1);
        CHECK(dec.gamma_index == 100);
        CHECK(dec.gamma == Approx(0.5).margin(1e-12));
        CHECK(dec.snap_shift == Approx(0.0007).margin(1e-10));
        CHECK_FALSE(dec.snap_warning);
    }
    SECTION("tau1 just under a multiple folds to gamma = 0") {
        const DelayDecomposition dec = decompose_delays(1.0, 1.999, 0.005);
        CHECK(dec.n0 == 1);
        CHECK(dec.gamma_index == 0);
        CHECK(dec.tau1 == Approx(2.0).margin(1e-12));
    }
    SECTION("invalid arguments") {
        CHECK_THROWS_AS(decompose_delays(1.0, 0.5, 0.005), std::invalid_argument);
        CHECK_THROWS_AS(decompose_delays(0.0, 1.0, 0.005), std::invalid_argument);
    }
}
