#pragma once

// Generator functions f: (0, inf) -> R, the single input object of the
// library. A GeneratorSpec is the declarative (parseable) form; a Generator
// is the built, window-bound, monotonicity-certified object every other
// module consumes.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "meanscope/common.hpp"
#include "meanscope/expr.hpp"

namespace meanscope {

struct GeneratorSpec;
using SpecPtr = std::shared_ptr<const GeneratorSpec>;

struct PowerSpec { double p; };        // x^p, p != 0
struct LogSpec {};                     // ln x
struct ExpSpec { double c; };          // e^{c x}, c != 0
struct QuadLinSpec { double alpha; };  // x^2 on (0, alpha], tangent line beyond
struct ExprSpec { ExprPtr ast; };
struct AffineSpec { double a; double b; SpecPtr inner; };  // a*inner(x) + b, a != 0

struct GeneratorSpec {
    std::variant<PowerSpec, LogSpec, ExpSpec, QuadLinSpec, ExprSpec, AffineSpec> v;
};

inline SpecPtr make_spec(GeneratorSpec s) {
    return std::make_shared<const GeneratorSpec>(std::move(s));
}

inline std::string pretty_spec(const GeneratorSpec& s) {
    struct Printer {
        std::string operator()(const PowerSpec& p) const {
            return "power(" + format_number(p.p) + ")";
        }
        std::string operator()(const LogSpec&) const { return "log"; }
        std::string operator()(const ExpSpec& e) const {
            return "exp(" + format_number(e.c) + ")";
        }
        std::string operator()(const QuadLinSpec& q) const {
            return "quadlin(" + format_number(q.alpha) + ")";
        }
        std::string operator()(const ExprSpec& e) const { return pretty_expr(e.ast); }
        std::string operator()(const AffineSpec& a) const {
            std::string inner = std::visit(Printer{}, a.inner->v);
            return format_number(a.a) + "*[" + inner + "] + " + format_number(a.b);
        }
    };
    return std::visit(Printer{}, s.v);
}

inline bool spec_equal(const GeneratorSpec& a, const GeneratorSpec& b) {
    if (a.v.index() != b.v.index()) return false;
    if (auto* p = std::get_if<PowerSpec>(&a.v)) return p->p == std::get<PowerSpec>(b.v).p;
    if (std::holds_alternative<LogSpec>(a.v)) return true;
    if (auto* e = std::get_if<ExpSpec>(&a.v)) return e->c == std::get<ExpSpec>(b.v).c;
    if (auto* q = std::get_if<QuadLinSpec>(&a.v))
        return q->alpha == std::get<QuadLinSpec>(b.v).alpha;
    if (auto* x = std::get_if<ExprSpec>(&a.v))
        return expr_equal(*x->ast, *std::get<ExprSpec>(b.v).ast);
    const auto& fa = std::get<AffineSpec>(a.v);
    const auto& fb = std::get<AffineSpec>(b.v);
    return fa.a == fb.a && fa.b == fb.b && spec_equal(*fa.inner, *fb.inner);
}

// ---------------------------------------------------------------------------
// Parsing. A builtin call that spans the whole input wins; anything else is
// a DSL expression. "exp(<num>)" is the builtin, "exp(<expr with x>)" the
// DSL function.

inline GeneratorSpec parse_generator(std::string_view text) {
    auto toks = detail::lex(text);
    using TT = detail::Token::Type;

    auto builtin_arg = [&](double& out) -> bool {
        // ident ( [-] num ) END
        std::size_t n = toks.size();
        if (n == 5 && toks[1].type == TT::LParen && toks[2].type == TT::Num &&
            toks[3].type == TT::RParen && toks[4].type == TT::End) {
            out = toks[2].num;
            return true;
        }
        if (n == 6 && toks[1].type == TT::LParen && toks[2].type == TT::Minus &&
            toks[3].type == TT::Num && toks[4].type == TT::RParen && toks[5].type == TT::End) {
            out = -toks[3].num;
            return true;
        }
        return false;
    };

    if (!toks.empty() && toks[0].type == TT::Ident) {
        const std::string& name = toks[0].ident;
        double arg = 0.0;
        if (name == "log" && toks.size() == 2 && toks[1].type == TT::End)
            return GeneratorSpec{LogSpec{}};
        if (name == "power" && builtin_arg(arg)) {
            if (arg == 0.0) throw ParseError("power exponent must be nonzero", toks[2].offset + 1);
            return GeneratorSpec{PowerSpec{arg}};
        }
        if (name == "quadlin" && builtin_arg(arg)) {
            if (arg <= 0.0) throw ParseError("quadlin threshold must be positive", toks[2].offset + 1);
            return GeneratorSpec{QuadLinSpec{arg}};
        }
        if (name == "exp" && builtin_arg(arg)) {
            if (arg == 0.0) throw ParseError("exp rate must be nonzero", toks[2].offset + 1);
            return GeneratorSpec{ExpSpec{arg}};
        }
        if (name == "power" || name == "quadlin")
            throw ParseError("'" + name + "' expects a single numeric argument",
                             toks[0].offset + 1);
    }

    detail::ExprParser p(toks);
    return GeneratorSpec{ExprSpec{p.parse()}};
}

// Recognizes expression trees equivalent to a builtin (after constant
// folding): x^p, ln(x), exp(c*x), x. Affine wrappers a*T + b around a core
// are lifted so the core can keep its closed-form derivatives.
inline GeneratorSpec canonicalize_spec(const GeneratorSpec& s);

namespace detail {

inline std::optional<GeneratorSpec> match_builtin(const ExprPtr& e) {
    using K = ExprNode::Kind;
    if (e->kind == K::Var) return GeneratorSpec{PowerSpec{1.0}};
    if (e->kind == K::Pow && e->lhs->kind == K::Var && e->value != 0.0)
        return GeneratorSpec{PowerSpec{e->value}};
    if (e->kind == K::Ln && e->lhs->kind == K::Var) return GeneratorSpec{LogSpec{}};
    if (e->kind == K::Exp) {
        double a, b;
        if (linear_in_var(*e->lhs, a, b) && a != 0.0 && b == 0.0)
            return GeneratorSpec{ExpSpec{a}};
    }
    return std::nullopt;
}

// Splits e = a*core + b where core is the unique non-constant subtree along
// top-level +, -, * and / by constants. Returns false when e is not of that
// shape (or is itself constant).
inline bool affine_split(const ExprPtr& e, double& a, double& b, ExprPtr& core) {
    using K = ExprNode::Kind;
    switch (e->kind) {
        case K::Const: return false;
        case K::Var: case K::Pow: case K::Ln: case K::Exp:
            a = 1.0; b = 0.0; core = e;
            return true;
        case K::Neg: {
            if (!affine_split(e->lhs, a, b, core)) return false;
            a = -a; b = -b;
            return true;
        }
        case K::Add: case K::Sub: {
            double s = (e->kind == K::Add) ? 1.0 : -1.0;
            bool lc = e->lhs->kind == K::Const;
            bool rc = e->rhs->kind == K::Const;
            if (lc && !rc) {
                if (!affine_split(e->rhs, a, b, core)) return false;
                a *= s; b = e->lhs->value + s * b;
                return true;
            }
            if (rc && !lc) {
                if (!affine_split(e->lhs, a, b, core)) return false;
                b += s * e->rhs->value;
                return true;
            }
            return false;
        }
        case K::Mul: {
            bool lc = e->lhs->kind == K::Const;
            bool rc = e->rhs->kind == K::Const;
            if (lc == rc) return false;
            double k = lc ? e->lhs->value : e->rhs->value;
            if (k == 0.0) return false;
            if (!affine_split(lc ? e->rhs : e->lhs, a, b, core)) return false;
            a *= k; b *= k;
            return true;
        }
        case K::Div: {
            if (e->rhs->kind != K::Const || e->rhs->value == 0.0) return false;
            if (!affine_split(e->lhs, a, b, core)) return false;
            a /= e->rhs->value; b /= e->rhs->value;
            return true;
        }
    }
    return false;
}

}  // namespace detail

inline GeneratorSpec canonicalize_spec(const GeneratorSpec& s) {
    if (auto* aff = std::get_if<AffineSpec>(&s.v)) {
        GeneratorSpec inner = canonicalize_spec(*aff->inner);
        // collapse nested affine wrappers
        if (auto* in2 = std::get_if<AffineSpec>(&inner.v)) {
            return GeneratorSpec{AffineSpec{aff->a * in2->a, aff->a * in2->b + aff->b,
                                            in2->inner}};
        }
        return GeneratorSpec{AffineSpec{aff->a, aff->b, make_spec(std::move(inner))}};
    }
    auto* ex = std::get_if<ExprSpec>(&s.v);
    if (!ex) return s;
    ExprPtr folded = fold_expr(ex->ast);
    if (auto b = detail::match_builtin(folded)) return *b;
    double a, c;
    ExprPtr core;
    if (detail::affine_split(folded, a, c, core) && (a != 1.0 || c != 0.0)) {
        GeneratorSpec inner = canonicalize_spec(GeneratorSpec{ExprSpec{core}});
        return GeneratorSpec{AffineSpec{a, c, make_spec(std::move(inner))}};
    }
    return GeneratorSpec{ExprSpec{folded}};
}

// ---------------------------------------------------------------------------
// Built generators.

enum class Direction { Increasing, Decreasing };

using RealFn = std::function<double(double)>;

struct Generator {
    std::optional<GeneratorSpec> spec;  // absent for custom test generators
    std::string label;
    Interval window;   // requested analysis window
    Interval eff;      // effective window (clipped where f is not evaluable)
    bool clipped = false;
    Direction direction = Direction::Increasing;
    bool canonicalized = false;  // negated from a decreasing source

    RealFn fn;
    RealFn d1;                     // closed-form f' when available
    std::vector<double> d1_kinks;  // jump points of f' (d1 is one-sided there)
    RealFn d2_left, d2_right;      // closed-form one-sided f'' when available
    std::vector<double> d2_kinks;  // jump points of f''

    double eval(double x) const {
        if (!eff.contains(x, 1e-12))
            throw DomainError("point " + std::to_string(x) + " outside analysis window [" +
                              std::to_string(eff.lo) + ", " + std::to_string(eff.hi) + "]");
        return fn(x);
    }
    bool increasing() const { return direction == Direction::Increasing; }
};

namespace detail {

struct Closures {
    RealFn fn, d1, d2l, d2r;
    std::vector<double> d1_kinks, d2_kinks;
};

inline Closures materialize(const GeneratorSpec& s) {
    Closures c;
    if (auto* p = std::get_if<PowerSpec>(&s.v)) {
        double pp = p->p;
        c.fn = [pp](double x) { return std::pow(x, pp); };
        c.d1 = [pp](double x) { return pp * std::pow(x, pp - 1.0); };
        double k2 = pp * (pp - 1.0);
        c.d2l = c.d2r = [pp, k2](double x) { return k2 * std::pow(x, pp - 2.0); };
    } else if (std::holds_alternative<LogSpec>(s.v)) {
        c.fn = [](double x) { return std::log(x); };
        c.d1 = [](double x) { return 1.0 / x; };
        c.d2l = c.d2r = [](double x) { return -1.0 / (x * x); };
    } else if (auto* e = std::get_if<ExpSpec>(&s.v)) {
        double cc = e->c;
        c.fn = [cc](double x) { return std::exp(cc * x); };
        c.d1 = [cc](double x) { return cc * std::exp(cc * x); };
        c.d2l = c.d2r = [cc](double x) { return cc * cc * std::exp(cc * x); };
    } else if (auto* q = std::get_if<QuadLinSpec>(&s.v)) {
        double al = q->alpha;
        c.fn = [al](double x) { return x <= al ? x * x : 2.0 * al * x - al * al; };
        c.d1 = [al](double x) { return x <= al ? 2.0 * x : 2.0 * al; };
        c.d2l = [al](double x) { return x <= al ? 2.0 : 0.0; };
        c.d2r = [al](double x) { return x < al ? 2.0 : 0.0; };
        c.d2_kinks = {al};
    } else if (auto* x = std::get_if<ExprSpec>(&s.v)) {
        ExprPtr ast = x->ast;
        ExprPtr dd1 = fold_expr(diff_expr(ast));
        ExprPtr dd2 = fold_expr(diff_expr(dd1));
        c.fn = [ast](double t) { return eval_expr(*ast, t); };
        c.d1 = [dd1](double t) { return eval_expr(*dd1, t); };
        c.d2l = c.d2r = [dd2](double t) { return eval_expr(*dd2, t); };
    } else {
        const auto& aff = std::get<AffineSpec>(s.v);
        Closures in = materialize(*aff.inner);
        double a = aff.a, b = aff.b;
        c.fn = [a, b, f = in.fn](double t) { return a * f(t) + b; };
        if (in.d1) c.d1 = [a, f = in.d1](double t) { return a * f(t); };
        if (in.d2l) c.d2l = [a, f = in.d2l](double t) { return a * f(t); };
        if (in.d2r) c.d2r = [a, f = in.d2r](double t) { return a * f(t); };
        c.d1_kinks = in.d1_kinks;
        c.d2_kinks = in.d2_kinks;
    }
    return c;
}

inline uint64_t splitmix64_step(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Certify strict monotonicity by sampling: divided-difference signs on a
// log-uniform grid plus random pairs. Returns the direction or throws
// MonotonicityError with the first non-conforming pair.
inline Direction certify_monotone(const RealFn& fn, const Interval& w, int grid_n,
                                  int random_pairs) {
    double llo = std::log(w.lo), lhi = std::log(w.hi);
    auto grid_point = [&](int i) { return std::exp(llo + (lhi - llo) * i / (grid_n - 1)); };

    int dir = 0;
    double px = grid_point(0);
    double pf = fn(px);
    if (!std::isfinite(pf)) throw EvalError("generator not finite in window", px);
    for (int i = 1; i < grid_n; ++i) {
        double x = grid_point(i);
        double f = fn(x);
        if (!std::isfinite(f)) throw EvalError("generator not finite in window", x);
        int s = (f > pf) ? 1 : (f < pf) ? -1 : 0;
        if (s == 0 || (dir != 0 && s != dir)) throw MonotonicityError(px, x, pf, f);
        if (dir == 0) dir = s;
        px = x;
        pf = f;
    }

    uint64_t state = 0x6d65616e73636f70ULL;  // fixed internal seed
    for (int i = 0; i < random_pairs; ++i) {
        state = splitmix64_step(state);
        double u1 = double(state >> 11) * 0x1.0p-53;
        state = splitmix64_step(state);
        double u2 = double(state >> 11) * 0x1.0p-53;
        double x1 = std::exp(llo + (lhi - llo) * u1);
        double x2 = std::exp(llo + (lhi - llo) * u2);
        if (x1 == x2) continue;
        if (x1 > x2) std::swap(x1, x2);
        double f1 = fn(x1), f2 = fn(x2);
        int s = (f2 > f1) ? 1 : (f2 < f1) ? -1 : 0;
        if (s != dir) throw MonotonicityError(x1, x2, f1, f2);
    }
    return dir > 0 ? Direction::Increasing : Direction::Decreasing;
}

// Largest sub-window on which f evaluates to a finite, sum-safe value.
// Exponential generators overflow near the top of the default window; the
// analysis scope shrinks to where arithmetic on f-values stays finite.
inline Interval clip_window(const RealFn& fn, const Interval& w, bool& clipped) {
    constexpr double kMaxMagnitude = std::numeric_limits<double>::max() / 64.0;
    auto good = [&](double x) {
        try {
            double v = fn(x);
            return std::isfinite(v) && std::abs(v) <= kMaxMagnitude;
        } catch (const EvalError&) {
            return false;
        }
    };
    const int n = 513;
    double llo = std::log(w.lo), lhi = std::log(w.hi);
    auto grid_point = [&](int i) { return std::exp(llo + (lhi - llo) * i / (n - 1)); };

    int first = -1, last = -1;
    std::vector<bool> ok(n);
    for (int i = 0; i < n; ++i) {
        ok[i] = good(grid_point(i));
        if (ok[i]) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first < 0) throw EvalError("generator not evaluable anywhere in window", w.lo);
    for (int i = first; i <= last; ++i)
        if (!ok[i])
            throw EvalError("generator not evaluable on an interior subinterval",
                            grid_point(i));

    Interval out = w;
    if (first > 0) {
        double bad = grid_point(first - 1), ok = grid_point(first);
        for (int k = 0; k < 60 && (ok - bad) > 1e-12 * ok; ++k) {
            double m = std::sqrt(bad * ok);
            (good(m) ? ok : bad) = m;
        }
        out.lo = ok;
        clipped = true;
    }
    if (last < n - 1) {
        double ok = grid_point(last), bad = grid_point(last + 1);
        for (int k = 0; k < 60 && (bad - ok) > 1e-12 * ok; ++k) {
            double m = std::sqrt(bad * ok);
            (good(m) ? ok : bad) = m;
        }
        out.hi = ok;
        clipped = true;
    }
    return out;
}

}  // namespace detail

inline constexpr int kMonotoneGridPoints = 513;
inline constexpr int kMonotoneRandomPairs = 10000;

inline Generator build(const GeneratorSpec& raw_spec, Interval window = kDefaultWindow) {
    if (!(window.lo > 0.0) || !(window.lo < window.hi) || !std::isfinite(window.hi))
        throw DomainError("window must satisfy 0 < lo < hi < inf");

    Generator g;
    g.spec = canonicalize_spec(raw_spec);
    g.label = pretty_spec(raw_spec);
    g.window = window;

    detail::Closures c = detail::materialize(*g.spec);
    g.fn = std::move(c.fn);
    g.d1 = std::move(c.d1);
    g.d2_left = std::move(c.d2l);
    g.d2_right = std::move(c.d2r);
    g.d1_kinks = std::move(c.d1_kinks);
    g.d2_kinks = std::move(c.d2_kinks);

    g.eff = detail::clip_window(g.fn, window, g.clipped);
    g.direction =
        detail::certify_monotone(g.fn, g.eff, kMonotoneGridPoints, kMonotoneRandomPairs);
    return g;
}

inline Generator build(std::string_view text, Interval window = kDefaultWindow) {
    return build(parse_generator(text), window);
}

// Custom generators let tests supply piecewise functions that have no
// spec-level syntax (two-piece slopes, quadratic splines).
struct CustomGenerator {
    std::string label;
    RealFn fn;
    RealFn d1;
    std::vector<double> d1_kinks;
    RealFn d2_left, d2_right;
    std::vector<double> d2_kinks;
};

inline Generator build_custom(CustomGenerator c, Interval window = kDefaultWindow) {
    if (!(window.lo > 0.0) || !(window.lo < window.hi) || !std::isfinite(window.hi))
        throw DomainError("window must satisfy 0 < lo < hi < inf");
    Generator g;
    g.label = std::move(c.label);
    g.window = window;
    g.fn = std::move(c.fn);
    g.d1 = std::move(c.d1);
    g.d1_kinks = std::move(c.d1_kinks);
    g.d2_left = std::move(c.d2_left);
    g.d2_right = std::move(c.d2_right);
    g.d2_kinks = std::move(c.d2_kinks);
    g.eff = detail::clip_window(g.fn, window, g.clipped);
    g.direction =
        detail::certify_monotone(g.fn, g.eff, kMonotoneGridPoints, kMonotoneRandomPairs);
    return g;
}

// Every checker is stated for a strictly increasing generator; a decreasing
// one is replaced by -f, which induces the same mean.
inline Generator canonicalize(const Generator& g) {
    if (g.direction == Direction::Increasing) return g;
    Generator out = g;
    out.canonicalized = true;
    out.direction = Direction::Increasing;
    if (g.spec) out.spec = GeneratorSpec{AffineSpec{-1.0, 0.0, make_spec(*g.spec)}};
    out.fn = [f = g.fn](double x) { return -f(x); };
    if (g.d1) out.d1 = [f = g.d1](double x) { return -f(x); };
    if (g.d2_left) out.d2_left = [f = g.d2_left](double x) { return -f(x); };
    if (g.d2_right) out.d2_right = [f = g.d2_right](double x) { return -f(x); };
    return out;
}

}  // namespace meanscope
