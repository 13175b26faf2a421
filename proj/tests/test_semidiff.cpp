#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "meanscope/generator.hpp"
#include "meanscope/rng.hpp"
#include "meanscope/semidiff.hpp"

using namespace meanscope;

namespace {

Generator two_piece() {
    // f(x) = 2x + |x - 1|: slopes 1 below the kink, 3 above
    CustomGenerator c;
    c.label = "two_piece";
    c.fn = [](double x) { return 2.0 * x + std::abs(x - 1.0); };
    c.d1 = [](double x) { return x < 1.0 ? 1.0 : 3.0; };
    c.d1_kinks = {1.0};
    return build_custom(std::move(c));
}

// smooth custom generator with no closed-form derivatives: exercises the
// fully numeric paths
Generator smooth_custom(double p) {
    CustomGenerator c;
    c.label = "pow_custom";
    c.fn = [p](double x) { return std::pow(x, p); };
    return build_custom(std::move(c));
}

}  // namespace

TEST_CASE("one-sided slopes at a first-derivative kink") {
    Generator g = two_piece();
    auto l = d1_side(g, 1.0, Side::Left);
    auto r = d1_side(g, 1.0, Side::Right);
    CHECK(l.value == Catch::Approx(1.0).margin(1e-6));
    CHECK(r.value == Catch::Approx(3.0).margin(1e-6));
}

TEST_CASE("analytic first derivatives short-circuit the engine") {
    Generator g = build("power(2)");
    for (Side s : {Side::Left, Side::Right}) {
        auto e = d1_side(g, 3.0, s);
        CHECK(e.value == Catch::Approx(6.0).margin(1e-8));
        CHECK(e.err_est < 1e-8);
    }
}

TEST_CASE("derivative estimates scale linearly under affine wrapping") {
    Generator base = build("power(1.7)");
    GeneratorSpec spec{AffineSpec{-2.5, 4.0, make_spec(parse_generator("power(1.7)"))}};
    Generator aff = build(spec);
    for (double x : {0.02, 0.9, 7.0, 300.0}) {
        auto b = d1_side(base, x, Side::Right);
        auto a = d1_side(aff, x, Side::Right);
        CHECK(a.value == Catch::Approx(-2.5 * b.value).epsilon(1e-9));
        auto b2 = d2_side(base, x, Side::Left);
        auto a2 = d2_side(aff, x, Side::Left);
        CHECK(a2.value == Catch::Approx(-2.5 * b2.value)
                              .margin(2.5 * b2.err_est + a2.err_est + 1e-12));
    }
}

TEST_CASE("one-sided second derivatives at the quadlin knot") {
    Generator g = build("quadlin(1)");
    auto l = d2_side(g, 1.0, Side::Left);
    auto r = d2_side(g, 1.0, Side::Right);
    CHECK(l.value == Catch::Approx(2.0).margin(1e-5));
    CHECK(r.value == Catch::Approx(0.0).margin(1e-5));
}

TEST_CASE("second derivatives of smooth generators") {
    Generator g = build("power(3)");
    for (Side s : {Side::Left, Side::Right}) {
        auto e = d2_side(g, 2.0, s);
        CHECK(e.value == Catch::Approx(12.0).margin(1e-6));
    }
    Generator lin = build("power(1)");
    auto z = d2_side(lin, 5.0, Side::Right);
    CHECK(std::abs(z.value) <= z.err_est + 1e-12);

    // nested path: no closed-form f' available
    Generator c = smooth_custom(3.0);
    auto n = d2_side(c, 2.0, Side::Right);
    CHECK(n.value == Catch::Approx(12.0).margin(std::max(n.err_est, 1e-5)));
}

TEST_CASE("left/right estimates agree at non-kink points") {
    CounterRng rng(5, "consistency");
    for (double p : {0.6, 1.3, 2.0, 3.4}) {
        Generator g = smooth_custom(p);
        for (int i = 0; i < 60; ++i) {
            double x = rng.log_uniform(i, 0, 5e-3, 2e2);
            auto l = d1_side(g, x, Side::Left);
            auto r = d1_side(g, x, Side::Right);
            double fp = p * std::pow(x, p - 1.0);
            CHECK(std::abs(l.value - r.value) <=
                  l.err_est + r.err_est + 1e-9 * (1.0 + std::abs(fp)));
        }
    }
}

TEST_CASE("Richardson diagonal error decreases until rounding noise") {
    for (double p : {1.3, 2.0, 2.7}) {
        for (double x : {0.05, 1.7, 40.0}) {
            auto fn = [p](double t) { return std::pow(t, p); };
            double exact = p * std::pow(x, p - 1.0);
            auto r = one_sided_d1(fn, x, Side::Right, default_step(x));
            double noise_floor = 1e-9 * (1.0 + std::abs(exact));
            double prev = std::abs(r.diagonal[0] - exact);
            for (int k = 1; k < kRichardsonLevels; ++k) {
                double err = std::abs(r.diagonal[k] - exact);
                if (prev <= noise_floor) break;
                CHECK(err <= prev);
                prev = err;
            }
            // and the converged value is good
            CHECK(std::abs(r.value - exact) <= r.err_est + noise_floor);
        }
    }
}

TEST_CASE("kink scan finds the quadlin curvature jump") {
    Generator g = build("quadlin(1)");
    KinkReport rep = detect_kinks(g, 2);
    REQUIRE(rep.points.size() == 1);
    CHECK(rep.points[0].x == Catch::Approx(1.0).margin(2e-4));
    CHECK(rep.points[0].left_value == Catch::Approx(2.0).margin(1e-4));
    CHECK(rep.points[0].right_value == Catch::Approx(0.0).margin(1e-4));

    // the knot sits strictly between grid points here
    Generator g7 = build("quadlin(0.7)");
    KinkReport rep7 = detect_kinks(g7, 2);
    REQUIRE(rep7.points.size() == 1);
    CHECK(rep7.points[0].x == Catch::Approx(0.7).margin(2e-4));
}

TEST_CASE("smooth generators report no kinks") {
    CHECK(detect_kinks(build("power(2)"), 1).points.empty());
    CHECK(detect_kinks(build("power(2)"), 2).points.empty());
    CHECK(detect_kinks(build("exp(0.1)", Interval{1e-3, 50.0}), 2).points.empty());
    // f' of quadlin is continuous at the knot by construction
    CHECK(detect_kinks(build("quadlin(1)"), 1).points.empty());
}

TEST_CASE("first-order kinks localize through the numeric path") {
    Generator g = two_piece();
    KinkReport rep = detect_kinks(g, 1);
    REQUIRE(rep.points.size() == 1);
    CHECK(rep.points[0].x == Catch::Approx(1.0).margin(2e-4));
    CHECK(rep.points[0].left_value == Catch::Approx(1.0).margin(1e-3));
    CHECK(rep.points[0].right_value == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("alpha detection across the generator families") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        Generator g = build(GeneratorSpec{QuadLinSpec{alpha}});
        AlphaReport rep = find_alpha(g);
        REQUIRE(rep.pattern_ok);
        REQUIRE_FALSE(rep.is_inf);
        CHECK(rep.alpha == Catch::Approx(alpha).margin(1e-3));
    }

    AlphaReport pw = find_alpha(build("power(2)"));
    CHECK(pw.pattern_ok);
    CHECK(pw.is_inf);

    AlphaReport lin = find_alpha(build("power(1)"));
    CHECK(lin.pattern_ok);
    CHECK_FALSE(lin.is_inf);
    CHECK(lin.alpha == 0.0);

    AlphaReport lg = find_alpha(build("log"));
    CHECK_FALSE(lg.pattern_ok);
    CHECK_FALSE(lg.violations.empty());
}

TEST_CASE("alpha detection is invariant under positive affine maps") {
    GeneratorSpec spec{AffineSpec{3.0, -2.0, make_spec(parse_generator("quadlin(1)"))}};
    Generator g = build(spec);
    AlphaReport rep = find_alpha(g);
    REQUIRE(rep.pattern_ok);
    CHECK(rep.alpha == Catch::Approx(1.0).margin(1e-3));
}
