#pragma once

// The n-variable quasi-arithmetic mean induced by a generator, its monotone
// inverse solver, and the closed-form power means used as a mutual oracle.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "meanscope/common.hpp"
#include "meanscope/generator.hpp"
#include "meanscope/semidiff.hpp"

namespace meanscope {

struct MeanResult {
    double value = 0.0;
    int solver_iters = 0;
    double residual = 0.0;  // |f(value) - target|
};

namespace detail {

// Neumaier compensated sum: checker tolerances assume the mean of f-values
// carries far less than 1e-12 relative error even for long vectors.
inline double compensated_sum(std::span<const double> v) {
    double s = 0.0, comp = 0.0;
    for (double x : v) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            comp += (s - t) + x;
        else
            comp += (x - t) + s;
        s = t;
    }
    return s + comp;
}

}  // namespace detail

// Solve f(x) = y on the effective window: bracketing bisection to 1e-10
// relative width, then up to 4 polish steps (Newton when a closed-form f'
// exists, secant otherwise) falling back to the bisection result if a step
// leaves the bracket. Polish is what brings the residual down to the
// 1e-13 * (1 + |y|) level the mean contract requires.
inline MeanResult invert_result(const Generator& g, double y) {
    const double lo = g.eff.lo, hi = g.eff.hi;
    double flo = g.fn(lo), fhi = g.fn(hi);
    double fmin = std::min(flo, fhi), fmax = std::max(flo, fhi);
    double slack = 1e-12 * (1.0 + std::abs(fmin) + std::abs(fmax));
    if (y < fmin - slack || y > fmax + slack)
        throw RangeError("target value " + std::to_string(y) +
                         " outside the generator image of the window");
    y = std::clamp(y, fmin, fmax);

    bool inc = flo <= fhi;
    double a = lo, b = hi;
    double fa = flo;
    MeanResult res;
    while (b - a > 1e-10 * (0.5 * (a + b)) && res.solver_iters < 200) {
        ++res.solver_iters;
        double m = 0.5 * (a + b);
        double fm = g.fn(m);
        bool go_right = inc ? (fm < y) : (fm > y);
        if (go_right) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    double x = 0.5 * (a + b);
    double fx = g.fn(x);
    double best_x = x, best_r = std::abs(fx - y);

    bool newton_ok = g.d1 && !detail::near_kink(x, g.d1_kinks);
    for (int k = 0; k < 4 && best_r > 0.0; ++k) {
        double step;
        if (newton_ok) {
            double d = g.d1(x);
            if (d == 0.0) break;
            step = (y - fx) / d;
        } else {
            // secant through the bracket ends
            double fb = g.fn(b);
            if (fb == fa) break;
            step = (y - fx) * (b - a) / (fb - fa);
        }
        double nx = x + step;
        if (!(nx >= a && nx <= b)) break;  // leaving the bracket: keep bisection result
        ++res.solver_iters;
        x = nx;
        fx = g.fn(x);
        double r = std::abs(fx - y);
        if (r < best_r) {
            best_r = r;
            best_x = x;
        }
    }
    res.value = best_x;
    res.residual = best_r;
    return res;
}

inline double invert(const Generator& g, double y) { return invert_result(g, y).value; }

// A_f(x) = f^{-1}( (f(x_1) + ... + f(x_n)) / n ). Entries are sorted
// ascending before summation, which makes permutation symmetry bit-exact.
inline MeanResult qa_mean_result(const Generator& g, std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean of an empty vector");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> fv(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) fv[i] = g.eval(sorted[i]);
    double target = detail::compensated_sum(fv) / double(fv.size());
    MeanResult res = invert_result(g, target);
    // internality can be off by an ulp after inversion; clamp
    res.value = std::clamp(res.value, sorted.front(), sorted.back());
    return res;
}

inline double qa_mean(const Generator& g, std::span<const double> xs) {
    return qa_mean_result(g, xs).value;
}

inline double arithmetic_mean(std::span<const double> xs) {
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    return detail::compensated_sum(sorted) / double(sorted.size());
}

// Closed-form p-th power mean; p = 0 is the geometric mean. Scaling by the
// largest entry keeps x^p finite for any p.
inline double power_mean(double p, std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean of an empty vector");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    if (p == 0.0) {
        std::vector<double> logs(n);
        for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(sorted[i]);
        return std::exp(detail::compensated_sum(logs) / double(n));
    }
    double m = sorted.back();
    std::vector<double> pw(n);
    for (std::size_t i = 0; i < n; ++i) pw[i] = std::pow(sorted[i] / m, p);
    double s = detail::compensated_sum(pw) / double(n);
    return m * std::pow(s, 1.0 / p);
}

}  // namespace meanscope
