#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>

#include "idec/expr.hpp"

using namespace idec;
using Catch::Approx;

namespace {

// independent cosine oracle: plain Maclaurin series
double cos_series(double x) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 40; ++k) {
        term *= -x * x / ((2.0 * k - 1.0) * (2.0 * k));
        sum += term;
    }
    return sum;
}

} // namespace

TEST_CASE("parsing and evaluation of the basic forms") {
    const KernelExpr k = parse_kernel_expr("0.6 + sin(pi*v)/5");
    CHECK(eval_kernel(k, 0.5) == Approx(0.8).margin(1e-14));
    CHECK(eval_kernel(k, 0.0) == Approx(0.6).margin(1e-14));

    CHECK(eval_kernel(parse_kernel_expr("cos(v)"), 0.0) == 1.0);
    CHECK(eval_kernel(parse_kernel_expr("v^2"), -2.0) == 4.0);
    CHECK(eval_kernel(parse_kernel_expr("e"), 0.0) == Approx(std::exp(1.0)).margin(1e-15));
    CHECK(eval_kernel(parse_kernel_expr("sqrt(v)"), 9.0) == 3.0);
}

TEST_CASE("cos(1) against a series oracle") {
    const double oracle = cos_series(1.0);  // 0.5403023058681398
    CHECK(eval_kernel(parse_kernel_expr("cos(v)"), 1.0) == Approx(oracle).margin(1e-6));
    CHECK(oracle == Approx(0.5403023058681398).margin(1e-12));
}

TEST_CASE("operator precedence and associativity") {
    CHECK(eval_kernel(parse_kernel_expr("-v^2"), 3.0) == -9.0);        // ^ binds before unary -
    CHECK(eval_kernel(parse_kernel_expr("2^3^2"), 0.0) == 512.0);      // right-associative
    CHECK(eval_kernel(parse_kernel_expr("2^-1"), 0.0) == 0.5);
    CHECK(eval_kernel(parse_kernel_expr("1 - 2 - 3"), 0.0) == -4.0);   // left-associative
    CHECK(eval_kernel(parse_kernel_expr("6 / 2 / 3"), 0.0) == 1.0);
    CHECK(eval_kernel(parse_kernel_expr("1 + 2*v"), 5.0) == 11.0);
}

TEST_CASE("parse errors carry positions") {
    try {
        parse_kernel_expr("sin(");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position == 4);
    }

    CHECK_THROWS_AS(parse_kernel_expr("x"), ParseError);
    CHECK_THROWS_AS(parse_kernel_expr("foo(v)"), ParseError);
    CHECK_THROWS_AS(parse_kernel_expr(""), ParseError);
    CHECK_THROWS_AS(parse_kernel_expr("1 +"), ParseError);
    CHECK_THROWS_AS(parse_kernel_expr("(1"), ParseError);
    CHECK_THROWS_AS(parse_kernel_expr("2 3"), ParseError);
    CHECK_THROWS_AS(parse_kernel_expr("sin v"), ParseError);
}

TEST_CASE("evaluation domain errors") {
    CHECK_THROWS_AS(eval_kernel(parse_kernel_expr("1/v"), 0.0), EvalError);
    CHECK_THROWS_AS(eval_kernel(parse_kernel_expr("sqrt(v)"), -1.0), EvalError);
    CHECK_THROWS_AS(eval_kernel(parse_kernel_expr("(-2)^0.5"), 0.0), EvalError);
    CHECK_THROWS_AS(eval_kernel(parse_kernel_expr("exp(v)"), 1e6), EvalError);  // overflow
    CHECK_NOTHROW(eval_kernel(parse_kernel_expr("(-2)^3"), 0.0));
}

TEST_CASE("derivatives of the pinned examples") {
    const KernelExpr dcos = differentiate(parse_kernel_expr("cos(v)"));
    CHECK(eval_kernel(dcos, 0.0) == Approx(0.0).margin(1e-15));
    CHECK(eval_kernel(dcos, 1.0) == Approx(-std::sin(1.0)).margin(1e-14));

    const KernelExpr dn = differentiate(parse_kernel_expr("0.6 + sin(pi*v)/5"));
    CHECK(eval_kernel(dn, 0.0) == Approx(3.14159265358979323846 / 5.0).margin(1e-13));

    const KernelExpr dc = differentiate(parse_kernel_expr("3.5"));
    CHECK(eval_kernel(dc, 1.7) == 0.0);

    CHECK_THROWS_AS(differentiate(parse_kernel_expr("2^v")), std::invalid_argument);
}

namespace {

// random polynomial expression text over +, -, *, integer ^ and literals
std::string random_polynomial(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_int_distribution<int> coef(0, 9);
    std::uniform_int_distribution<int> expo(0, 3);
    if (depth == 0) {
        switch (pick(rng) % 3) {
            case 0: return "v";
            case 1: return std::to_string(coef(rng));
            default: return std::to_string(coef(rng)) + "." + std::to_string(coef(rng));
        }
    }
    const std::string a = random_polynomial(rng, depth - 1);
    const std::string b = random_polynomial(rng, depth - 1);
    switch (pick(rng)) {
        case 0: return "(" + a + " + " + b + ")";
        case 1: return "(" + a + " - " + b + ")";
        case 2:
        case 3: return "(" + a + ")*(" + b + ")";
        case 4: return "(" + a + ")^" + std::to_string(expo(rng));
        default: return "-(" + a + ")";
    }
}

// richer generator for the round-trip property (adds /, functions, constants)
std::string random_expression(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, 9);
    if (depth == 0) {
        switch (pick(rng) % 5) {
            case 0: return "v";
            case 1: return "pi";
            case 2: return "e";
            default: return std::to_string(std::uniform_int_distribution<int>(0, 99)(rng));
        }
    }
    const std::string a = random_expression(rng, depth - 1);
    const std::string b = random_expression(rng, depth - 1);
    switch (pick(rng)) {
        case 0: return "(" + a + " + " + b + ")";
        case 1: return "(" + a + " - " + b + ")";
        case 2: return "(" + a + ")*(" + b + ")";
        case 3: return "(" + a + ")/(" + b + ")";
        case 4: return "(" + a + ")^(" + b + ")";
        case 5: return "-(" + a + ")";
        case 6: return "sin(" + a + ")";
        case 7: return "cos(" + a + ")";
        case 8: return "exp(" + a + ")";
        default: return "sqrt(" + a + ")";
    }
}

} // namespace

TEST_CASE("property: symbolic derivative matches central finite differences") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> point(0.0, 1.0);
    const double h = 1e-5;

    for (int trial = 0; trial < 40; ++trial) {
        const std::string text = random_polynomial(rng, 3);
        const KernelExpr k = parse_kernel_expr(text);
        const KernelExpr dk = differentiate(k);
        for (int i = 0; i < 100; ++i) {
            const double v = point(rng);
            const double fd = (eval_kernel(k, v + h) - eval_kernel(k, v - h)) / (2 * h);
            const double exact = eval_kernel(dk, v);
            const double tol = 1e-6 * std::max(1.0, std::abs(exact));
            INFO(text << " at v=" << v);
            REQUIRE(std::abs(fd - exact) <= tol);
        }
    }
}

TEST_CASE("property: parse . unparse . parse is the identity") {
    std::mt19937 rng(987654321);
    for (int trial = 0; trial < 200; ++trial) {
        const std::string text = random_expression(rng, 3);
        const KernelExpr once = parse_kernel_expr(text);
        const KernelExpr twice = parse_kernel_expr(unparse(once));
        INFO(text << "  ->  " << unparse(once));
        REQUIRE(identical(once, twice));
    }
    // derivative trees round-trip too
    const KernelExpr d = differentiate(parse_kernel_expr("0.6 + sin(pi*v)/5"));
    CHECK(identical(d, parse_kernel_expr(unparse(d))));
}

TEST_CASE("evaluation is deterministic") {
    const KernelExpr k = parse_kernel_expr("sin(v)*exp(v) - v^3/7");
    for (double v : {0.1, 0.9, 2.4}) CHECK(eval_kernel(k, v) == eval_kernel(k, v));
}
