#pragma once

// Monotone C1 piecewise-quadratic test generators: f' is continuous,
// positive and piecewise linear, so f'' is piecewise constant with jumps
// at the knots. For this family subadditivity of the induced mean has an
// exact finite characterization (writing r = f'/f''_+ = x + c_j on piece
// j): the curvature signs must be positive-then-zero, f'(0) must vanish,
// the intercepts c_j must be nondecreasing, and c_{piece(a+b)} >= c_i +
// c_j for every pair of piece starts a, b below the threshold. That makes
// the family an independent oracle for the sampling battery.

#include <cassert>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "meanscope/generator.hpp"

namespace meanscope::testsupport {

struct QuadSpline {
    // piece boundaries b[0] = 0 < b[1] < ... < b[P-1]; piece j lives on
    // [b[j], b[j+1]) and the last piece extends to infinity
    std::vector<double> b;
    std::vector<double> d;      // f'(b[j])
    std::vector<double> slope;  // slope of f' on piece j; slope.back() is the tail
    std::vector<double> fv;     // f(b[j]), f(0) = 0

    std::size_t pieces() const { return slope.size(); }

    std::size_t piece_of(double x) const {
        std::size_t j = 0;
        while (j + 1 < b.size() && x >= b[j + 1]) ++j;
        return j;
    }

    double f(double x) const {
        std::size_t j = piece_of(x);
        double t = x - b[j];
        return fv[j] + d[j] * t + 0.5 * slope[j] * t * t;
    }
    double d1(double x) const {
        std::size_t j = piece_of(x);
        return d[j] + slope[j] * (x - b[j]);
    }
    double d2_left(double x) const {
        std::size_t j = piece_of(x);
        if (j > 0 && x == b[j]) return slope[j - 1];
        return slope[j];
    }
    double d2_right(double x) const { return slope[piece_of(x)]; }
};

// Builds the derived arrays from boundaries, f' knot values and the tail
// slope of f'.
inline QuadSpline make_spline(std::vector<double> interior_knots, std::vector<double> dvals,
                              double tail_slope) {
    QuadSpline q;
    q.b.push_back(0.0);
    for (double k : interior_knots) q.b.push_back(k);
    q.d = std::move(dvals);
    assert(q.d.size() == q.b.size());
    q.slope.resize(q.b.size());
    for (std::size_t j = 0; j + 1 < q.b.size(); ++j)
        q.slope[j] = (q.d[j + 1] - q.d[j]) / (q.b[j + 1] - q.b[j]);
    q.slope.back() = tail_slope;
    q.fv.resize(q.b.size());
    q.fv[0] = 0.0;
    for (std::size_t j = 0; j + 1 < q.b.size(); ++j) {
        double t = q.b[j + 1] - q.b[j];
        q.fv[j + 1] = q.fv[j] + q.d[j] * t + 0.5 * q.slope[j] * t * t;
    }
    return q;
}

struct SplineClass {
    bool subadditive;
    std::string reason;  // empty when subadditive
};

// Exact classifier on the whole half-line (not window-truncated).
inline SplineClass classify_spline(const QuadSpline& q) {
    std::size_t P = q.pieces();
    for (std::size_t j = 0; j < P; ++j)
        if (q.slope[j] < 0.0) return {false, "negative curvature piece"};

    std::size_t first_zero = P;
    for (std::size_t j = 0; j < P; ++j) {
        if (q.slope[j] == 0.0) {
            first_zero = std::min(first_zero, j);
        } else if (first_zero < j) {
            return {false, "curvature re-enters after a flat piece"};
        }
    }
    if (first_zero == 0) return {true, ""};  // affine: arithmetic mean

    bool has_alpha = first_zero < P;
    double alpha = has_alpha ? q.b[first_zero] : std::numeric_limits<double>::infinity();

    if (q.d[0] > 0.0) return {false, "f' positive at zero with positive curvature"};

    std::vector<double> c(first_zero);
    for (std::size_t j = 0; j < first_zero; ++j) c[j] = q.d[j] / q.slope[j] - q.b[j];

    double scale = 1.0 + std::abs(alpha == std::numeric_limits<double>::infinity()
                                      ? q.b.back()
                                      : alpha);
    double eps = 1e-9 * scale;
    for (std::size_t j = 1; j < first_zero; ++j)
        if (c[j] < c[j - 1] - eps) return {false, "r decreasing across a knot"};

    for (std::size_t i = 0; i < first_zero; ++i) {
        for (std::size_t j = i; j < first_zero; ++j) {
            double z0 = q.b[i] + q.b[j];
            if (has_alpha && z0 >= alpha * (1.0 - 1e-12)) continue;
            std::size_t k = q.piece_of(z0);
            if (k >= first_zero) continue;  // lands at the flat tail boundary
            if (c[k] < c[i] + c[j] - eps) return {false, "r not superadditive"};
        }
    }
    return {true, ""};
}

inline Generator to_generator(const QuadSpline& q, const std::string& label,
                              Interval window = kDefaultWindow) {
    CustomGenerator c;
    c.label = label;
    c.fn = [q](double x) { return q.f(x); };
    c.d1 = [q](double x) { return q.d1(x); };
    c.d2_left = [q](double x) { return q.d2_left(x); };
    c.d2_right = [q](double x) { return q.d2_right(x); };
    for (std::size_t j = 1; j < q.b.size(); ++j)
        if (q.slope[j] != q.slope[j - 1]) c.d2_kinks.push_back(q.b[j]);
    return build_custom(std::move(c), window);
}

// ---------------------------------------------------------------------------
// Random family. Sub-family A is subadditive by construction (geometric
// knots, c_j = C (theta^j - 1)); the B sub-families break exactly one
// structural requirement decisively. Every draw is validated against the
// exact classifier.

struct FamilyMember {
    QuadSpline spline;
    bool subadditive;
    std::string flavor;
};

namespace detail {

// Builds a spline from knots, intercepts c and the first f'-slope: on
// piece j, f'(x) = s_j (x + c_j), glued continuously.
inline QuadSpline from_intercepts(const std::vector<double>& knots, const std::vector<double>& c,
                                  double s0, bool flat_tail) {
    std::size_t P = knots.size() + 1;  // positive-curvature pieces
    assert(c.size() == P);
    std::vector<double> b{0.0};
    for (double k : knots) b.push_back(k);
    std::vector<double> s(P);
    s[0] = s0;
    std::vector<double> d(P);
    d[0] = s[0] * c[0];
    for (std::size_t j = 0; j + 1 < P; ++j) {
        double dj = s[j] * (b[j + 1] + c[j]);
        s[j + 1] = dj / (b[j + 1] + c[j + 1]);
        d[j + 1] = dj;
    }
    if (flat_tail) {
        // append a flat piece: f'' = 0 beyond 1.30x the last knot
        std::vector<double> interior = knots;
        interior.push_back(knots.back() * 1.30);
        std::vector<double> dv(P + 1);
        for (std::size_t j = 0; j < P; ++j) dv[j] = d[j];
        dv[P] = s[P - 1] * (knots.back() * 1.30 + c[P - 1]);
        return make_spline(interior, dv, 0.0);
    }
    // infinite tail: the last piece keeps its slope
    return make_spline(knots, d, s[P - 1]);
}

}  // namespace detail

inline FamilyMember draw_family_member(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto logu = [&](double lo, double hi) {
        return lo * std::exp(u01(rng) * std::log(hi / lo));
    };

    // Geometric knots with ratio <= 1.295 and the flat tail starting at
    // 1.30x the last knot: for that geometry every pair sum t_i + t_j with
    // i >= 1 that would land back in the last positive piece instead
    // escapes past the threshold, which is what keeps the theta-chain
    // intercepts exactly superadditive.
    int nknots = 3 + int(u01(rng) * 3.0);  // 3..5 geometric knots
    double t1 = logu(0.06, 0.4);
    double g = 1.25 + u01(rng) * 0.045;
    std::vector<double> knots;
    for (int i = 0; i < nknots; ++i) knots.push_back(t1 * std::pow(g, i));
    std::size_t P = knots.size() + 1;

    double pick = u01(rng);
    FamilyMember out;
    if (pick < 0.55) {
        // A: subadditive by construction
        double theta = 1.66 + u01(rng) * 0.24;
        double C = (u01(rng) < 0.25) ? 0.0 : logu(0.05, 0.6) * t1;
        std::vector<double> c(P);
        for (std::size_t j = 0; j < P; ++j) c[j] = C * (std::pow(theta, double(j)) - 1.0);
        out.spline = detail::from_intercepts(knots, c, logu(0.3, 3.0), true);
        out.flavor = "A.subadditive";
    } else if (pick < 0.80) {
        // B1: r translated upward (f' positive at zero)
        double C0 = logu(0.25, 1.5) * t1;
        std::vector<double> c(P);
        for (std::size_t j = 0; j < P; ++j) c[j] = C0 * (1.0 + 0.15 * double(j));
        bool flat = u01(rng) < 0.5;
        out.spline = detail::from_intercepts(knots, c, logu(0.3, 3.0), flat);
        out.flavor = "B1.translated";
    } else {
        // B3: one concave piece (f'' < 0 somewhere)
        std::vector<double> d(P);
        d[0] = logu(0.2, 1.0);
        for (std::size_t j = 1; j < P; ++j) d[j] = d[j - 1] * (1.2 + u01(rng));
        std::size_t i0 = 1 + std::size_t(u01(rng) * double(P - 1));
        if (i0 >= P) i0 = P - 1;
        d[i0] = d[i0 - 1] * (0.35 + 0.3 * u01(rng));
        for (std::size_t j = i0 + 1; j < P; ++j)
            d[j] = std::max(d[j], d[j - 1] * (1.1 + 0.5 * u01(rng)));
        out.spline = make_spline(knots, d, u01(rng) < 0.5 ? 0.0 : 0.2 * d.back());
        out.flavor = "B3.concave_dip";
    }
    SplineClass cls = classify_spline(out.spline);
    out.subadditive = cls.subadditive;
    if (out.flavor[0] == 'A' && !cls.subadditive)
        throw std::logic_error("family A draw failed the exact classifier: " + cls.reason);
    if (out.flavor[0] == 'B' && cls.subadditive)
        throw std::logic_error("family B draw passed the exact classifier");
    return out;
}

inline std::vector<FamilyMember> draw_family(uint64_t meta_seed, int count) {
    std::mt19937_64 rng(meta_seed);
    std::vector<FamilyMember> out;
    out.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) out.push_back(draw_family_member(rng));
    return out;
}

}  // namespace meanscope::testsupport
