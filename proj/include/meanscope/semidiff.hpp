#pragma once

// One-sided numerical differentiation. One-sided divided differences admit
// an asymptotic expansion in integer powers of h, so Richardson
// extrapolation over a halving step schedule removes the leading error
// terms; the error estimate is the gap between the last two diagonal
// extrapolants.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "meanscope/common.hpp"
#include "meanscope/generator.hpp"

namespace meanscope {

enum class Side { Left, Right };

struct SemiDerivEstimate {
    double value = 0.0;
    Side side = Side::Right;
    int order = 1;
    double err_est = 0.0;  // absolute; |value| below comparable scale is 0
    double point = 0.0;
};

inline constexpr int kRichardsonLevels = 7;  // h_k = h0 * 2^-k, k = 0..6

inline double default_step(double x) { return 1e-3 * std::max(1.0, x); }

struct RichardsonResult {
    double value = 0.0;
    double err_est = 0.0;
    std::array<double, kRichardsonLevels> diagonal{};
};

namespace detail {

// T[k][j] = (2^j T[k][j-1] - T[k-1][j-1]) / (2^j - 1) for an expansion in
// integer powers of h; returns the last diagonal entry.
inline RichardsonResult richardson(const std::array<double, kRichardsonLevels>& d0) {
    std::array<std::array<double, kRichardsonLevels>, kRichardsonLevels> t{};
    RichardsonResult r;
    for (int k = 0; k < kRichardsonLevels; ++k) {
        t[k][0] = d0[k];
        double pow2 = 1.0;
        for (int j = 1; j <= k; ++j) {
            pow2 *= 2.0;
            t[k][j] = t[k][j - 1] + (t[k][j - 1] - t[k - 1][j - 1]) / (pow2 - 1.0);
        }
        r.diagonal[k] = t[k][k];
    }
    r.value = r.diagonal[kRichardsonLevels - 1];
    r.err_est = std::abs(r.diagonal[kRichardsonLevels - 1] - r.diagonal[kRichardsonLevels - 2]);
    double floor = std::numeric_limits<double>::epsilon() * (1.0 + std::abs(r.value));
    r.err_est = std::max(r.err_est, floor);
    return r;
}

}  // namespace detail

// One-sided first derivative of fn at x via (fn(x + s h) - fn(x)) / (s h).
inline RichardsonResult one_sided_d1(const RealFn& fn, double x, Side side, double h0) {
    double s = (side == Side::Right) ? 1.0 : -1.0;
    double f0 = fn(x);
    std::array<double, kRichardsonLevels> d{};
    double h = h0;
    for (int k = 0; k < kRichardsonLevels; ++k, h *= 0.5) {
        double xk = x + s * h;
        double hk = xk - x;  // the step actually representable at x
        if (hk == 0.0) throw StepUnderflowError("window too narrow for differentiation");
        d[k] = (fn(xk) - f0) / hk;
    }
    return detail::richardson(d);
}

// One-sided second derivative via (fn(x+2sh) - 2 fn(x+sh) + fn(x)) / h^2,
// again an expansion in integer powers of h.
inline RichardsonResult one_sided_d2(const RealFn& fn, double x, Side side, double h0) {
    double s = (side == Side::Right) ? 1.0 : -1.0;
    double f0 = fn(x);
    std::array<double, kRichardsonLevels> d{};
    double h = h0;
    for (int k = 0; k < kRichardsonLevels; ++k, h *= 0.5) {
        if (x + s * h == x) throw StepUnderflowError("window too narrow for differentiation");
        d[k] = (fn(x + 2.0 * s * h) - 2.0 * fn(x + s * h) + f0) / (h * h);
    }
    return detail::richardson(d);
}

namespace detail {

inline bool near_kink(double x, const std::vector<double>& kinks, double rel = 1e-9) {
    for (double k : kinks)
        if (std::abs(x - k) <= rel * std::max(1.0, std::abs(k))) return true;
    return false;
}

// Shrink h0 so every stencil point stays inside the window. The d2 stencil
// reaches 2*h0 out.
inline double fit_step(double x, Side side, double h0, const Interval& w, double reach) {
    double room = (side == Side::Right) ? (w.hi - x) : (x - w.lo);
    if (room <= 0.0) throw StepUnderflowError("no room on the requested side");
    return std::min(h0, room / (reach * 1.0000001));
}

}  // namespace detail

inline SemiDerivEstimate d1_side(const Generator& g, double x, Side side,
                                 double h0_cap = 0.0) {
    SemiDerivEstimate e;
    e.side = side;
    e.order = 1;
    e.point = x;
    if (g.d1 && !detail::near_kink(x, g.d1_kinks)) {
        e.value = g.d1(x);
        e.err_est = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(e.value));
        return e;
    }
    double h0 = (h0_cap > 0.0) ? h0_cap : default_step(x);
    h0 = detail::fit_step(x, side, h0, g.eff, 1.0);
    auto r = one_sided_d1(g.fn, x, side, h0);
    e.value = r.value;
    e.err_est = r.err_est;
    return e;
}

inline SemiDerivEstimate d2_side(const Generator& g, double x, Side side,
                                 double h0_cap = 0.0) {
    SemiDerivEstimate e;
    e.side = side;
    e.order = 2;
    e.point = x;
    double h0 = (h0_cap > 0.0) ? h0_cap : default_step(x);
    if (g.d1) {
        // differentiate the closed-form f' one-sidedly
        h0 = detail::fit_step(x, side, h0, g.eff, 1.0);
        auto r = one_sided_d1(g.d1, x, side, h0);
        e.value = r.value;
        e.err_est = r.err_est;
    } else {
        // nested one-sided second differences lose about a digit
        h0 = detail::fit_step(x, side, h0, g.eff, 2.0);
        auto r = one_sided_d2(g.fn, x, side, h0);
        e.value = r.value;
        e.err_est = 10.0 * r.err_est;
    }
    return e;
}

// ---------------------------------------------------------------------------
// Kink detection.

struct KinkPoint {
    double x;
    double left_value, right_value;
    int order;
};

struct KinkReport {
    std::vector<KinkPoint> points;
    Interval window;
};

inline constexpr int kScanGridPoints = 2049;
inline constexpr double kKinkTol = 1e-3;

namespace detail {

// Divided-difference statistic over [a, b]: approximates the derivative of
// the requested order somewhere inside, and is computed only from interior
// evaluations of f.
inline double cell_stat(const RealFn& fn, double a, double b, int order) {
    if (order == 1) return (fn(b) - fn(a)) / (b - a);
    double m = 0.5 * (a + b);
    double h = 0.5 * (b - a);
    return (fn(a) - 2.0 * fn(m) + fn(b)) / (h * h);
}

// Localize a jump of the order-th derivative inside [a, b] by trisection:
// of the three sub-thirds the two outer ones carry clean one-piece
// statistics unless the jump sits inside them, so the larger inter-third
// mismatch points at the sub-bracket to keep (overlapping brackets keep the
// middle third covered either way).
inline void trisect_kink(const RealFn& fn, double& a, double& b, int order) {
    for (int it = 0; it < 80; ++it) {
        if (b - a <= 5e-5 * std::max(1e-6, a)) break;
        double t1 = a + (b - a) / 3.0;
        double t2 = a + 2.0 * (b - a) / 3.0;
        double g1 = cell_stat(fn, a, t1, order);
        double g2 = cell_stat(fn, t1, t2, order);
        double g3 = cell_stat(fn, t2, b, order);
        if (std::abs(g1 - g2) >= std::abs(g2 - g3))
            b = t2;
        else
            a = t1;
    }
}

}  // namespace detail

inline KinkReport detect_kinks(const Generator& g, int order, int grid_n = kScanGridPoints,
                               double kink_tol = kKinkTol) {
    KinkReport report;
    report.window = g.eff;
    double llo = std::log(g.eff.lo), lhi = std::log(g.eff.hi);
    std::vector<double> grid(grid_n);
    for (int i = 0; i < grid_n; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * i / (grid_n - 1));

    auto estimate = [&](double x, Side s) {
        return (order == 1) ? d1_side(g, x, s) : d2_side(g, x, s);
    };
    auto mismatch = [&](const SemiDerivEstimate& l, const SemiDerivEstimate& r) {
        return std::abs(l.value - r.value) >
               kink_tol * (1.0 + std::abs(l.value) + std::abs(r.value)) + l.err_est + r.err_est;
    };

    // candidate brackets: pointwise left/right mismatch at interior grid
    // points, plus spikes in the per-cell divided-difference statistic
    // (which see jumps that sit strictly between grid points)
    std::vector<std::pair<double, double>> brackets;
    for (int i = 1; i + 1 < grid_n; ++i) {
        auto l = estimate(grid[i], Side::Left);
        auto r = estimate(grid[i], Side::Right);
        if (mismatch(l, r)) brackets.emplace_back(grid[i - 1], grid[i + 1]);
    }
    std::vector<double> stat(grid_n - 1);
    for (int i = 0; i + 1 < grid_n; ++i)
        stat[i] = detail::cell_stat(g.fn, grid[i], grid[i + 1], order);
    for (int i = 1; i + 2 < grid_n; ++i) {
        double smooth = 0.5 * (stat[i - 1] + stat[i + 1]);
        if (std::abs(stat[i] - smooth) >
            kink_tol * (1.0 + std::abs(stat[i - 1]) + std::abs(stat[i + 1])))
            brackets.emplace_back(grid[i], grid[i + 1]);
    }
    std::sort(brackets.begin(), brackets.end());

    for (auto [a, b] : brackets) {
        detail::trisect_kink(g.fn, a, b, order);
        double k = 0.5 * (a + b);
        // one-sided estimates taken just outside the final bracket step away
        // from the jump, so each sees a single smooth piece
        auto l = estimate(a, Side::Left);
        auto r = estimate(b, Side::Right);
        if (!mismatch(l, r)) continue;  // spike was smooth variation, not a kink
        bool dup = false;
        for (auto& p : report.points)
            if (std::abs(p.x - k) <= 2e-3 * std::max(1.0, std::abs(k))) {
                dup = true;
                break;
            }
        if (!dup) report.points.push_back({k, l.value, r.value, order});
    }
    return report;
}

// ---------------------------------------------------------------------------
// Threshold detection: the point where f''_+ transitions from positive to
// identically zero.

struct AlphaViolation {
    double x;
    double d2;  // offending one-sided second derivative
};

struct AlphaReport {
    double alpha = 0.0;          // meaningful when pattern_ok
    bool is_inf = false;         // f''_+ positive on the whole window
    bool pattern_ok = false;
    std::vector<AlphaViolation> violations;
};

namespace detail {

enum class SignClass { Positive, Zero, Negative };

// |f''_+| <= 1e-6 * f'/x counts as zero: f''*x/f' is invariant under affine
// transforms of f and rescaling of x.
inline SignClass classify_d2(const Generator& g, double x, double h0_cap = 0.0) {
    double d2 = d2_side(g, x, Side::Right, h0_cap).value;
    double scale = std::abs(d1_side(g, x, Side::Right).value) / x;
    double thr = 1e-6 * scale;
    if (std::abs(d2) <= thr) return SignClass::Zero;
    return d2 > 0.0 ? SignClass::Positive : SignClass::Negative;
}

}  // namespace detail

inline AlphaReport find_alpha(const Generator& g, int grid_n = kScanGridPoints) {
    AlphaReport rep;
    double llo = std::log(g.eff.lo), lhi = std::log(g.eff.hi);
    // right-sided stencils need room above, so the scan stops one grid cell
    // short of the window top
    int scan_n = grid_n - 1;
    std::vector<double> grid(grid_n);
    std::vector<detail::SignClass> cls(scan_n);
    for (int i = 0; i < grid_n; ++i)
        grid[i] = std::exp(llo + (lhi - llo) * i / (grid_n - 1));
    for (int i = 0; i < scan_n; ++i) cls[i] = detail::classify_d2(g, grid[i]);

    // the admissible pattern is positive* zero*
    int first_zero = scan_n;
    for (int i = 0; i < scan_n; ++i) {
        if (cls[i] == detail::SignClass::Negative) {
            rep.violations.push_back({grid[i], d2_side(g, grid[i], Side::Right).value});
        } else if (cls[i] == detail::SignClass::Zero) {
            first_zero = std::min(first_zero, i);
        } else if (first_zero < i) {
            rep.violations.push_back({grid[i], d2_side(g, grid[i], Side::Right).value});
        }
    }
    if (!rep.violations.empty()) {
        rep.pattern_ok = false;
        return rep;
    }
    rep.pattern_ok = true;
    if (first_zero == 0) {
        rep.alpha = 0.0;
        return rep;
    }
    if (first_zero == scan_n) {
        rep.is_inf = true;
        rep.alpha = std::numeric_limits<double>::infinity();
        return rep;
    }

    // Bisect the transition with stencils capped by the bracket width, so
    // evaluations never straddle the suspected threshold by more than a
    // shrinking margin. A capped re-read of the zero end guards against a
    // standard-width stencil having read zero one pollution radius early;
    // when that happens the zero end is pushed back up.
    double a = grid[first_zero - 1];
    double b = grid[first_zero];
    double top = grid[scan_n - 1];
    for (int it = 0; it < 140; ++it) {
        double width = b - a;
        double m = 0.5 * (a + b);
        if (width <= 1e-4 * std::clamp(m, 1e-2, 10.0)) break;
        double cap = 0.25 * width;
        if (b < top && detail::classify_d2(g, b, cap) == detail::SignClass::Positive) {
            a = b;
            b = std::min(b + width, top);
            continue;
        }
        if (detail::classify_d2(g, m, cap) == detail::SignClass::Positive)
            a = m;
        else
            b = m;
    }
    rep.alpha = 0.5 * (a + b);
    return rep;
}

}  // namespace meanscope
