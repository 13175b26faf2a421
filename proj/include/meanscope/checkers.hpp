#pragma once

// The subadditivity battery: five mutually-equivalent conditions evaluated
// independently, two cheap necessary conditions run first, and a
// proof-path validator. Because the conditions are equivalent, a run in
// which one of the four equivalence checkers passes while another fails is
// a defect signal, reported as Disagreement rather than silently resolved.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "meanscope/common.hpp"
#include "meanscope/generator.hpp"
#include "meanscope/means.hpp"
#include "meanscope/parallel.hpp"
#include "meanscope/rng.hpp"
#include "meanscope/semidiff.hpp"

namespace meanscope {

struct CheckConfig {
    uint64_t samples = 10000;
    int arity = 2;  // n >= 2; condition (ii) makes n = 2 decisive
    uint64_t seed = 0;
    double tol_rel = 1e-9;
};

using Witness = std::vector<std::vector<double>>;

struct Counterexample {
    std::string kind;
    Witness witness;
    double lhs = 0.0, rhs = 0.0;
    double violation = 0.0;   // lhs - rhs, positive and > err_budget
    double err_budget = 0.0;
};

enum class Status { Pass, Fail, Inconclusive };

inline const char* status_name(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        default: return "inconclusive";
    }
}

struct Verdict {
    std::string checker_id;
    Status status = Status::Inconclusive;
    double min_margin = std::numeric_limits<double>::infinity();
    uint64_t samples_run = 0;
    std::optional<Counterexample> counterexample;
    std::string note;
};

// Checker ids (stable, used in reports)
inline constexpr const char* kDirectId = "direct";
inline constexpr const char* kPhiId = "phi_concave";
inline constexpr const char* kPsiId = "psi_subadd";
inline constexpr const char* kCriterionVId = "criterion_v";
inline constexpr const char* kMaBoundId = "ma_bound";
inline constexpr const char* kLogConcaveId = "fprime_logconcave";
inline constexpr const char* kEq546Id = "eq546";
inline constexpr const char* kJensenId = "jensen_convex";
inline constexpr const char* kRatioConvexId = "ratio_convex";
inline constexpr const char* kCompareId = "compare";

// ---------------------------------------------------------------------------
// Shared sampling machinery.

struct EvalOut {
    double lhs = 0.0, rhs = 0.0;
    double err_budget = 0.0;
};

// Re-evaluates a witness; nullopt when the witness is not admissible
// (outside the sampler's domain, derivative unavailable).
using WitnessFn = std::function<std::optional<EvalOut>(const Witness&)>;
// Pulls one coordinate toward minimality (group index, coordinate index).
using PullFn = std::function<double(double, std::size_t, std::size_t)>;

namespace detail {

inline constexpr int kMaxRetries = 8;

struct SampleStats {
    double min_slack = std::numeric_limits<double>::infinity();
    bool has_worst = false;
    uint64_t worst_index = 0;
    double worst_violation = 0.0;
    Witness worst_witness;
    EvalOut worst_eval;
    uint64_t run = 0;
    uint64_t undecided = 0;

    void observe(uint64_t idx, const Witness& w, const EvalOut& out) {
        ++run;
        double violation = out.lhs - out.rhs;
        min_slack = std::min(min_slack, -violation);
        if (violation > out.err_budget) {
            if (!has_worst || violation > worst_violation ||
                (violation == worst_violation && idx < worst_index)) {
                has_worst = true;
                worst_index = idx;
                worst_violation = violation;
                worst_witness = w;
                worst_eval = out;
            }
        }
    }

    static void merge(SampleStats& a, const SampleStats& b) {
        a.min_slack = std::min(a.min_slack, b.min_slack);
        a.run += b.run;
        a.undecided += b.undecided;
        if (b.has_worst) {
            if (!a.has_worst || b.worst_violation > a.worst_violation ||
                (b.worst_violation == a.worst_violation && b.worst_index < a.worst_index)) {
                a.has_worst = b.has_worst;
                a.worst_index = b.worst_index;
                a.worst_violation = b.worst_violation;
                a.worst_witness = b.worst_witness;
                a.worst_eval = b.worst_eval;
            }
        }
    }
};

}  // namespace detail

// A shrink move is kept only while the violation stays numerically
// significant and keeps at least 90% of its scale-relative size, where the
// scale is 1 + |lhs| + |rhs| of the inequality. Without the guard the
// greedy walk rides the violation down to rounding level, which makes
// witnesses useless for inspection; with it, the walk follows relative
// plateaus toward small coordinates and stalls at the cliff. The guard
// only compares the candidate against the current state, so a shrunk
// witness is a fixed point of further shrinking.
inline constexpr double kShrinkKeepRatio = 0.9;

inline Counterexample shrink_with(const Counterexample& in, const WitnessFn& eval,
                                  const PullFn& pull, int max_sweeps = 200) {
    Counterexample ce = in;
    auto relative = [](double violation, double lhs, double rhs) {
        return violation / (1.0 + std::abs(lhs) + std::abs(rhs));
    };
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool moved = false;
        for (std::size_t gi = 0; gi < ce.witness.size(); ++gi) {
            for (std::size_t ci = 0; ci < ce.witness[gi].size(); ++ci) {
                double cur = ce.witness[gi][ci];
                double cand = pull(cur, gi, ci);
                if (!std::isfinite(cand) ||
                    std::abs(cand - cur) <= 1e-12 * std::max(1.0, std::abs(cur)))
                    continue;
                Witness w2 = ce.witness;
                w2[gi][ci] = cand;
                auto out = eval(w2);
                if (!out) continue;
                double violation = out->lhs - out->rhs;
                if (std::isfinite(violation) && violation > out->err_budget &&
                    relative(violation, out->lhs, out->rhs) >=
                        kShrinkKeepRatio * relative(ce.violation, ce.lhs, ce.rhs)) {
                    ce.witness = std::move(w2);
                    ce.lhs = out->lhs;
                    ce.rhs = out->rhs;
                    ce.violation = violation;
                    ce.err_budget = out->err_budget;
                    moved = true;
                }
            }
        }
        if (!moved) break;
    }
    return ce;
}

namespace detail {

// Log-space halving toward the geometric midpoint of the window, the
// natural anchor under log-uniform sampling.
inline PullFn pull_toward_log_mid(const Interval& w) {
    double mid = w.log_mid();
    return [mid](double v, std::size_t, std::size_t) {
        if (v <= 0.0) return v;
        return std::sqrt(v * mid);
    };
}

template <typename DrawEvalFn>
Verdict run_sampled(const char* id, const std::string& kind, uint64_t n, DrawEvalFn per_sample,
                    const WitnessFn& shrink_eval, const PullFn& pull) {
    auto chunk = [&](uint64_t b, uint64_t e, SampleStats& acc) {
        for (uint64_t i = b; i < e; ++i) {
            auto s = per_sample(i);
            if (!s)
                ++acc.undecided;
            else
                acc.observe(i, s->first, s->second);
        }
    };
    SampleStats stats =
        parallel_accumulate<SampleStats>(n, SampleStats{}, chunk, SampleStats::merge);

    Verdict v;
    v.checker_id = id;
    v.min_margin = stats.min_slack;
    v.samples_run = stats.run;
    if (stats.has_worst) {
        Counterexample ce{kind, stats.worst_witness, stats.worst_eval.lhs, stats.worst_eval.rhs,
                          stats.worst_eval.lhs - stats.worst_eval.rhs,
                          stats.worst_eval.err_budget};
        v.counterexample = shrink_with(ce, shrink_eval, pull);
        v.status = Status::Fail;
    } else if (stats.undecided > 0) {
        v.status = Status::Inconclusive;
        v.note = std::to_string(stats.undecided) + " samples undecided after retries";
    } else {
        v.status = Status::Pass;
    }
    return v;
}

// Derivative lookups with their error estimates, right-sided by convention.
struct DEst {
    double v, err;
};
inline DEst fprime(const Generator& g, double x) {
    auto e = d1_side(g, x, Side::Right);
    return {e.value, e.err_est};
}
inline DEst fsecond(const Generator& g, double x) {
    auto e = d2_side(g, x, Side::Right);
    return {e.value, e.err_est};
}

// r = f'/f''_+ with the linearized error bound.
inline DEst ratio_d1_d2(const Generator& g, double x) {
    DEst a = fprime(g, x), b = fsecond(g, x);
    double r = a.v / b.v;
    double err = std::abs(r) * (a.err / std::abs(a.v) + b.err / std::abs(b.v));
    return {r, err};
}

inline bool admissible_point(const Generator& g, double x) {
    return x > 0.0 && g.eff.contains(x, 1e-12);
}

// Right-sided stencils at x read f (or f') on (x, x + 2 h0]; when a listed
// kink sits strictly inside that range the tableau mixes two pieces and
// its error estimate is unreliable, so such sample points are rejected and
// redrawn. A point exactly at a kink is fine: the one-sided estimate is
// the object being asked for.
inline bool stencil_hits_kink(const Generator& g, double x) {
    double reach = 2.02 * default_step(x);
    auto hit = [&](const std::vector<double>& kinks) {
        for (double k : kinks)
            if (k > x * (1.0 + 1e-12) && k < x + reach) return true;
        return false;
    };
    return hit(g.d2_kinks) || hit(g.d1_kinks);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Witness evaluators (shared between the sampling loops and the shrinker;
// `shrink` dispatches on the counterexample kind).

inline std::optional<EvalOut> evaluate_witness(const std::string& kind, const Witness& w,
                                               const Generator& g, const CheckConfig& cfg);

namespace detail {

inline double budget0(const CheckConfig& cfg, double lhs, double rhs) {
    return cfg.tol_rel * (1.0 + std::abs(lhs) + std::abs(rhs));
}

inline std::optional<EvalOut> eval_direct(const Generator& g, const CheckConfig& cfg,
                                          const Witness& w) {
    if (w.size() != 2 || w[0].size() != w[1].size() || w[0].empty()) return std::nullopt;
    std::vector<double> sum(w[0].size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (!admissible_point(g, w[0][i]) || !admissible_point(g, w[1][i])) return std::nullopt;
        sum[i] = w[0][i] + w[1][i];
        if (sum[i] > g.eff.hi * (1.0 + 1e-12)) return std::nullopt;
    }
    double lhs = qa_mean(g, sum);
    double rhs = qa_mean(g, w[0]) + qa_mean(g, w[1]);
    return EvalOut{lhs, rhs, budget0(cfg, lhs, rhs)};
}

// Witness holds the preimage points (w1, w2), (w3, w4); the concavity test
// runs on (f(w1), f(w2)) and (f(w3), f(w4)) in image coordinates.
inline std::optional<EvalOut> eval_phi(const Generator& g, const CheckConfig& cfg,
                                       const Witness& w) {
    if (w.size() != 2 || w[0].size() != 2 || w[1].size() != 2) return std::nullopt;
    double w1 = w[0][0], w2 = w[0][1], w3 = w[1][0], w4 = w[1][1];
    for (double t : {w1, w2, w3, w4}) {
        if (!admissible_point(g, t)) return std::nullopt;
        if (t > g.eff.hi * 0.5 * (1.0 + 1e-12)) return std::nullopt;
    }
    // corners have known preimages; only the image midpoint needs inversion
    double phi1 = g.fn(w1 + w2);
    double phi2 = g.fn(w3 + w4);
    double m1 = invert(g, 0.5 * (g.fn(w1) + g.fn(w3)));
    double m2 = invert(g, 0.5 * (g.fn(w2) + g.fn(w4)));
    double mid = g.fn(m1 + m2);
    double chord = 0.5 * (phi1 + phi2);
    // concavity: mid >= chord
    return EvalOut{chord, mid, budget0(cfg, chord, mid)};
}

inline std::optional<EvalOut> eval_psi(const Generator& g, const CheckConfig& cfg,
                                       const Witness& w) {
    if (w.size() != 2 || w[0].size() != 2 || w[1].size() != 2) return std::nullopt;
    double x1 = w[0][0], y1 = w[0][1], x2 = w[1][0], y2 = w[1][1];
    for (double t : {x1, y1, x2, y2}) {
        if (!admissible_point(g, t)) return std::nullopt;
        if (t > g.eff.hi * 0.5 * (1.0 + 1e-12)) return std::nullopt;
    }
    // condition (iv) presumes differentiability; kink hits are resampled
    for (double t : {y1, y2, y1 + y2})
        if (near_kink(t, g.d1_kinks, 1e-7)) return std::nullopt;
    auto psi = [&](double x, double y, double& err) {
        DEst d = fprime(g, y);
        double v = (g.fn(x) - g.fn(y)) / d.v;
        err = std::abs(v) * d.err / std::abs(d.v);
        return v;
    };
    double e1, e2, e3;
    double lhs = psi(x1 + x2, y1 + y2, e3);
    double rhs1 = psi(x1, y1, e1);
    double rhs2 = psi(x2, y2, e2);
    double rhs = rhs1 + rhs2;
    return EvalOut{lhs, rhs, budget0(cfg, lhs, rhs) + e1 + e2 + e3};
}

inline std::optional<EvalOut> eval_criterion_increasing(const Generator& g,
                                                        const CheckConfig& cfg, double alpha_cap,
                                                        const Witness& w) {
    if (w.size() != 2 || w[0].size() != 1 || w[1].size() != 1) return std::nullopt;
    double x = w[0][0], y = w[1][0];
    if (!(x < y)) return std::nullopt;
    if (!admissible_point(g, x) || y >= alpha_cap) return std::nullopt;
    if (stencil_hits_kink(g, x) || stencil_hits_kink(g, y)) return std::nullopt;
    DEst rx = ratio_d1_d2(g, x), ry = ratio_d1_d2(g, y);
    // increasing: r(x) <= r(y)
    return EvalOut{rx.v, ry.v, budget0(cfg, rx.v, ry.v) + rx.err + ry.err};
}

inline std::optional<EvalOut> eval_criterion_superadd(const Generator& g, const CheckConfig& cfg,
                                                      double alpha_cap, const Witness& w) {
    if (w.size() != 2 || w[0].size() != 1 || w[1].size() != 1) return std::nullopt;
    double x = w[0][0], y = w[1][0];
    if (!admissible_point(g, x) || !admissible_point(g, y)) return std::nullopt;
    if (x + y >= alpha_cap) return std::nullopt;
    if (stencil_hits_kink(g, x) || stencil_hits_kink(g, y) || stencil_hits_kink(g, x + y))
        return std::nullopt;
    DEst rx = ratio_d1_d2(g, x), ry = ratio_d1_d2(g, y), rs = ratio_d1_d2(g, x + y);
    // superadditive: r(x+y) >= r(x) + r(y)
    double lhs = rx.v + ry.v, rhs = rs.v;
    return EvalOut{lhs, rhs, budget0(cfg, lhs, rhs) + rx.err + ry.err + rs.err};
}

// A point whose one-sided second derivative breaks the positive-then-zero
// sign pattern; only negative-type witnesses move under shrinking.
inline std::optional<EvalOut> eval_criterion_pattern(const Generator& g, const CheckConfig& cfg,
                                                     const Witness& w) {
    if (w.size() != 1 || w[0].size() != 1) return std::nullopt;
    double x = w[0][0];
    if (!admissible_point(g, x)) return std::nullopt;
    DEst d2 = fsecond(g, x);
    DEst d1 = fprime(g, x);
    double thr = 1e-6 * std::abs(d1.v) / x;
    // violation = how far below -thr the estimate sits
    return EvalOut{-d2.v, thr, budget0(cfg, d2.v, thr) + d2.err};
}

inline std::optional<EvalOut> eval_ma_bound(const Generator& g, const CheckConfig& cfg,
                                            const Witness& w) {
    if (w.size() != 1 || w[0].empty()) return std::nullopt;
    for (double t : w[0])
        if (!admissible_point(g, t)) return std::nullopt;
    double lhs = arithmetic_mean(w[0]);
    double rhs = qa_mean(g, w[0]);
    return EvalOut{lhs, rhs, budget0(cfg, lhs, rhs)};
}

inline std::optional<EvalOut> eval_logconcave(const Generator& g, const CheckConfig& cfg,
                                              const Witness& w) {
    if (w.size() != 2 || w[0].size() != 1 || w[1].size() != 1) return std::nullopt;
    double x = w[0][0], u = w[1][0];
    if (!admissible_point(g, x) || !admissible_point(g, u)) return std::nullopt;
    double m = 0.5 * (x + u);
    for (double t : {x, u, m})
        if (near_kink(t, g.d1_kinks, 1e-7)) return std::nullopt;
    DEst dx = fprime(g, x), du = fprime(g, u), dm = fprime(g, m);
    double lhs = dx.v * du.v;
    double rhs = dm.v * dm.v;
    double budget = budget0(cfg, lhs, rhs) + std::abs(du.v) * dx.err +
                    std::abs(dx.v) * du.err + 2.0 * std::abs(dm.v) * dm.err;
    return EvalOut{lhs, rhs, budget};
}

inline std::optional<EvalOut> eval_eq546(const Generator& g, const CheckConfig& cfg,
                                         const Witness& w) {
    if (w.size() != 4) return std::nullopt;
    for (auto& grp : w)
        if (grp.size() != 1) return std::nullopt;
    double x = w[0][0], y = w[1][0], u = w[2][0], v = w[3][0];
    if (!admissible_point(g, x) || !admissible_point(g, y)) return std::nullopt;
    if (x + y > g.eff.hi * (1.0 + 1e-12)) return std::nullopt;
    if (stencil_hits_kink(g, x) || stencil_hits_kink(g, y) || stencil_hits_kink(g, x + y))
        return std::nullopt;
    auto q = [&](double z, double& err) {
        DEst d2 = fsecond(g, z), d1 = fprime(g, z);
        double val = d2.v / d1.v;
        err = (d2.err + std::abs(val) * d1.err) / std::abs(d1.v);
        return val;
    };
    double es, ex, ey;
    double qs = q(x + y, es), qx = q(x, ex), qy = q(y, ey);
    double uv = u + v;
    double lhs = qs * uv * uv;
    double rhs = qx * u * u + qy * v * v;
    double budget = budget0(cfg, lhs, rhs) + es * uv * uv + ex * u * u + ey * v * v;
    return EvalOut{lhs, rhs, budget};
}

inline std::optional<EvalOut> eval_jensen(const Generator& g, const CheckConfig& cfg,
                                          const Witness& w) {
    if (w.size() != 2 || w[0].size() != w[1].size() || w[0].empty()) return std::nullopt;
    std::vector<double> mid(w[0].size());
    for (std::size_t i = 0; i < mid.size(); ++i) {
        if (!admissible_point(g, w[0][i]) || !admissible_point(g, w[1][i])) return std::nullopt;
        mid[i] = 0.5 * (w[0][i] + w[1][i]);
    }
    double lhs = qa_mean(g, mid);
    double rhs = 0.5 * (qa_mean(g, w[0]) + qa_mean(g, w[1]));
    return EvalOut{lhs, rhs, budget0(cfg, lhs, rhs)};
}

inline std::optional<EvalOut> eval_ratio_positivity(const Generator& g, const CheckConfig& cfg,
                                                    const Witness& w) {
    if (w.size() != 1 || w[0].size() != 1) return std::nullopt;
    double x = w[0][0];
    if (!admissible_point(g, x)) return std::nullopt;
    if (stencil_hits_kink(g, x)) return std::nullopt;
    DEst r = ratio_d1_d2(g, x);
    // positive: r(x) > 0, i.e. 0 - r(x) < 0
    return EvalOut{-r.v, 0.0, budget0(cfg, r.v, 0.0) + r.err};
}

inline std::optional<EvalOut> eval_ratio_midpoint(const Generator& g, const CheckConfig& cfg,
                                                  const Witness& w) {
    if (w.size() != 2 || w[0].size() != 1 || w[1].size() != 1) return std::nullopt;
    double x = w[0][0], u = w[1][0];
    if (!admissible_point(g, x) || !admissible_point(g, u)) return std::nullopt;
    double m = 0.5 * (x + u);
    if (stencil_hits_kink(g, x) || stencil_hits_kink(g, u) || stencil_hits_kink(g, m))
        return std::nullopt;
    DEst rx = ratio_d1_d2(g, x), ru = ratio_d1_d2(g, u), rm = ratio_d1_d2(g, m);
    // convexity: r(m) <= (r(x)+r(u))/2
    double lhs = rm.v;
    double rhs = 0.5 * (rx.v + ru.v);
    double budget = budget0(cfg, lhs, rhs) + rm.err + 0.5 * (rx.err + ru.err);
    return EvalOut{lhs, rhs, budget};
}

}  // namespace detail

// Builds the re-evaluator for a counterexample kind; per-kind context
// (e.g. the detected threshold) is computed once at construction. The
// returned closure references g and cfg.
inline WitnessFn make_witness_fn(const std::string& kind, const Generator& g,
                                 const CheckConfig& cfg) {
    using namespace detail;
    if (kind == "direct")
        return [&g, &cfg](const Witness& w) { return eval_direct(g, cfg, w); };
    if (kind == "phi_concave")
        return [&g, &cfg](const Witness& w) { return eval_phi(g, cfg, w); };
    if (kind == "psi_subadd")
        return [&g, &cfg](const Witness& w) { return eval_psi(g, cfg, w); };
    if (kind == "ma_bound")
        return [&g, &cfg](const Witness& w) { return eval_ma_bound(g, cfg, w); };
    if (kind == "fprime_logconcave")
        return [&g, &cfg](const Witness& w) { return eval_logconcave(g, cfg, w); };
    if (kind == "eq546")
        return [&g, &cfg](const Witness& w) { return eval_eq546(g, cfg, w); };
    if (kind == "jensen_convex")
        return [&g, &cfg](const Witness& w) { return eval_jensen(g, cfg, w); };
    if (kind == "ratio_convex.positivity")
        return [&g, &cfg](const Witness& w) { return eval_ratio_positivity(g, cfg, w); };
    if (kind == "ratio_convex.midpoint")
        return [&g, &cfg](const Witness& w) { return eval_ratio_midpoint(g, cfg, w); };
    if (kind == "criterion_v.pattern")
        return [&g, &cfg](const Witness& w) { return eval_criterion_pattern(g, cfg, w); };
    if (kind == "criterion_v.increasing" || kind == "criterion_v.superadd") {
        AlphaReport a = find_alpha(g);
        double cap = a.is_inf ? g.eff.hi : a.alpha * (1.0 - 3e-4);
        bool increasing = (kind == "criterion_v.increasing");
        return [&g, &cfg, cap, increasing](const Witness& w) {
            return increasing ? eval_criterion_increasing(g, cfg, cap, w)
                              : eval_criterion_superadd(g, cfg, cap, w);
        };
    }
    return [](const Witness&) { return std::optional<EvalOut>{}; };
}

inline std::optional<EvalOut> evaluate_witness(const std::string& kind, const Witness& w,
                                               const Generator& g, const CheckConfig& cfg) {
    return make_witness_fn(kind, g, cfg)(w);
}

// Spec-level shrink entry point: greedy halving toward the window midpoint,
// dispatching on the counterexample kind.
inline Counterexample shrink(const Counterexample& ce, const Generator& g,
                             const CheckConfig& cfg) {
    WitnessFn eval = make_witness_fn(ce.kind, g, cfg);
    PullFn pull = detail::pull_toward_log_mid(g.eff);
    if (ce.kind == "eq546") {
        PullFn base = pull;
        pull = [base](double v, std::size_t gi, std::size_t ci) {
            if (gi >= 2) return v * 0.5;  // direction coordinates halve toward 0
            return base(v, gi, ci);
        };
    }
    return shrink_with(ce, eval, pull);
}

// ---------------------------------------------------------------------------
// The checkers.

inline Verdict check_subadditive_direct(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kDirectId);
    std::size_t n = std::size_t(cfg.arity);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_direct(g, cfg, w); };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        Witness w(2, std::vector<double>(n));
        for (std::size_t k = 0; k < n; ++k) {
            w[0][k] = rng.log_uniform(i, uint32_t(k), g.eff.lo, g.eff.hi * 0.5);
            w[1][k] = rng.log_uniform(i, uint32_t(n + k), g.eff.lo, g.eff.hi * 0.5);
        }
        auto out = eval(w);
        if (!out || !std::isfinite(out->lhs - out->rhs)) return std::nullopt;
        return std::make_pair(std::move(w), *out);
    };
    return detail::run_sampled(kDirectId, "direct", cfg.samples, per_sample, eval,
                               detail::pull_toward_log_mid(g.eff));
}

inline Verdict check_phi_concavity(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kPhiId);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_phi(g, cfg, w); };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        Witness w{{rng.log_uniform(i, 0, g.eff.lo, g.eff.hi * 0.5),
                   rng.log_uniform(i, 1, g.eff.lo, g.eff.hi * 0.5)},
                  {rng.log_uniform(i, 2, g.eff.lo, g.eff.hi * 0.5),
                   rng.log_uniform(i, 3, g.eff.lo, g.eff.hi * 0.5)}};
        auto out = eval(w);
        if (!out || !std::isfinite(out->lhs - out->rhs)) return std::nullopt;
        return std::make_pair(std::move(w), *out);
    };
    return detail::run_sampled(kPhiId, "phi_concave", cfg.samples, per_sample, eval,
                               detail::pull_toward_log_mid(g.eff));
}

inline Verdict check_psi_subadditive(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kPsiId);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_psi(g, cfg, w); };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        for (int t = 0; t < detail::kMaxRetries; ++t) {
            uint32_t off = uint32_t(64 * t);
            Witness w{{rng.log_uniform(i, off + 0, g.eff.lo, g.eff.hi * 0.5),
                       rng.log_uniform(i, off + 1, g.eff.lo, g.eff.hi * 0.5)},
                      {rng.log_uniform(i, off + 2, g.eff.lo, g.eff.hi * 0.5),
                       rng.log_uniform(i, off + 3, g.eff.lo, g.eff.hi * 0.5)}};
            auto out = eval(w);
            if (out && std::isfinite(out->lhs - out->rhs))
                return std::make_pair(std::move(w), *out);
        }
        return std::nullopt;
    };
    return detail::run_sampled(kPsiId, "psi_subadd", cfg.samples, per_sample, eval,
                               detail::pull_toward_log_mid(g.eff));
}

inline Verdict check_ma_bound(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kMaBoundId);
    std::size_t n = std::size_t(cfg.arity);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_ma_bound(g, cfg, w); };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        Witness w(1, std::vector<double>(n));
        for (std::size_t k = 0; k < n; ++k) w[0][k] = rng.log_uniform(i, uint32_t(k), g.eff);
        auto out = eval(w);
        if (!out || !std::isfinite(out->lhs - out->rhs)) return std::nullopt;
        return std::make_pair(std::move(w), *out);
    };
    return detail::run_sampled(kMaBoundId, "ma_bound", cfg.samples, per_sample, eval,
                               detail::pull_toward_log_mid(g.eff));
}

inline Verdict check_fprime_logconcave(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kLogConcaveId);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_logconcave(g, cfg, w); };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        for (int t = 0; t < detail::kMaxRetries; ++t) {
            uint32_t off = uint32_t(64 * t);
            Witness w{{rng.log_uniform(i, off + 0, g.eff)}, {rng.log_uniform(i, off + 1, g.eff)}};
            auto out = eval(w);
            if (out && std::isfinite(out->lhs - out->rhs))
                return std::make_pair(std::move(w), *out);
        }
        return std::nullopt;
    };
    return detail::run_sampled(kLogConcaveId, "fprime_logconcave", cfg.samples,
                               per_sample, eval, detail::pull_toward_log_mid(g.eff));
}

inline Verdict check_eq546(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kEq546Id);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_eq546(g, cfg, w); };
    PullFn base = detail::pull_toward_log_mid(g.eff);
    PullFn pull = [base](double v, std::size_t gi, std::size_t ci) {
        if (gi >= 2) return v * 0.5;
        return base(v, gi, ci);
    };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        for (int t = 0; t < detail::kMaxRetries; ++t) {
            uint32_t off = uint32_t(64 * t);
            // directions cover the unit square including mixed signs
            Witness w{{rng.log_uniform(i, off + 0, g.eff.lo, g.eff.hi * 0.5)},
                      {rng.log_uniform(i, off + 1, g.eff.lo, g.eff.hi * 0.5)},
                      {rng.uniform(i, off + 2, -1.0, 1.0)},
                      {rng.uniform(i, off + 3, -1.0, 1.0)}};
            auto out = eval(w);
            if (out && std::isfinite(out->lhs - out->rhs))
                return std::make_pair(std::move(w), *out);
        }
        return std::nullopt;
    };
    return detail::run_sampled(kEq546Id, "eq546", cfg.samples, per_sample, eval, pull);
}

inline Verdict check_jensen_convexity(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    CounterRng rng(cfg.seed, kJensenId);
    std::size_t n = std::size_t(cfg.arity);
    WitnessFn eval = [&g, &cfg](const Witness& w) { return detail::eval_jensen(g, cfg, w); };
    auto per_sample = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        Witness w(2, std::vector<double>(n));
        for (std::size_t k = 0; k < n; ++k) {
            w[0][k] = rng.log_uniform(i, uint32_t(k), g.eff);
            w[1][k] = rng.log_uniform(i, uint32_t(n + k), g.eff);
        }
        auto out = eval(w);
        if (!out || !std::isfinite(out->lhs - out->rhs)) return std::nullopt;
        return std::make_pair(std::move(w), *out);
    };
    return detail::run_sampled(kJensenId, "jensen_convex", cfg.samples, per_sample, eval,
                               detail::pull_toward_log_mid(g.eff));
}

// Condition (v): the sign pattern of f''_+ plus monotonicity and
// superadditivity of f'/f''_+ below the threshold.
inline Verdict check_criterion_v(const Generator& g0, const CheckConfig& cfg,
                                 const AlphaReport* precomputed = nullptr) {
    Generator g = canonicalize(g0);
    AlphaReport alpha = precomputed ? *precomputed : find_alpha(g);

    Verdict v;
    v.checker_id = kCriterionVId;
    if (!alpha.pattern_ok) {
        const AlphaViolation& bad = alpha.violations.front();
        Counterexample ce;
        ce.kind = "criterion_v.pattern";
        ce.witness = {{bad.x}};
        auto out = detail::eval_criterion_pattern(g, cfg, ce.witness);
        if (out) {
            ce.lhs = out->lhs;
            ce.rhs = out->rhs;
            ce.violation = out->lhs - out->rhs;
            ce.err_budget = out->err_budget;
            if (ce.violation > ce.err_budget)
                ce = shrink_with(ce, [&](const Witness& w) {
                        return detail::eval_criterion_pattern(g, cfg, w);
                    }, detail::pull_toward_log_mid(g.eff));
        }
        if (ce.violation <= ce.err_budget) {
            // re-entry style violation (positive after zero); keep the raw point
            ce.lhs = bad.d2;
            ce.rhs = 0.0;
            ce.violation = std::abs(bad.d2);
            ce.err_budget = 0.0;
        }
        v.status = Status::Fail;
        v.counterexample = ce;
        v.min_margin = -ce.violation;
        v.note = "sign pattern of f''_+ violated";
        return v;
    }

    double cap = alpha.is_inf ? g.eff.hi : alpha.alpha * (1.0 - 3e-4);
    if (!(cap > g.eff.lo)) {
        // alpha at or below the window floor: both conditions are vacuous
        v.status = Status::Pass;
        v.min_margin = 0.0;
        v.note = "vacuous: f''_+ within zero threshold on the window";
        return v;
    }

    CounterRng rng(cfg.seed, kCriterionVId);
    WitnessFn eval_inc = [&g, &cfg, cap](const Witness& w) {
        return detail::eval_criterion_increasing(g, cfg, cap, w);
    };
    auto per_sample_inc = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        for (int t = 0; t < detail::kMaxRetries; ++t) {
            uint32_t off = uint32_t(64 * t);
            double a = rng.log_uniform(i, off + 0, g.eff.lo, cap);
            double b = rng.log_uniform(i, off + 1, g.eff.lo, cap);
            if (a == b) continue;
            Witness w{{std::min(a, b)}, {std::max(a, b)}};
            auto out = eval_inc(w);
            if (out && std::isfinite(out->lhs - out->rhs))
                return std::make_pair(std::move(w), *out);
        }
        return std::nullopt;
    };
    Verdict inc = detail::run_sampled(kCriterionVId, "criterion_v.increasing",
                                      cfg.samples, per_sample_inc, eval_inc,
                                      detail::pull_toward_log_mid(g.eff));

    Verdict sup;
    sup.checker_id = kCriterionVId;
    sup.status = Status::Pass;
    sup.min_margin = std::numeric_limits<double>::infinity();
    if (cap * 0.5 > g.eff.lo) {
        WitnessFn eval_sup = [&g, &cfg, cap](const Witness& w) {
            return detail::eval_criterion_superadd(g, cfg, cap, w);
        };
        auto per_sample_sup = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
            for (int t = 0; t < detail::kMaxRetries; ++t) {
                uint32_t off = uint32_t(64 * t);
                Witness w{{rng.log_uniform(i, off + 8, g.eff.lo, cap * 0.5)},
                          {rng.log_uniform(i, off + 9, g.eff.lo, cap * 0.5)}};
                auto out = eval_sup(w);
                if (out && std::isfinite(out->lhs - out->rhs))
                    return std::make_pair(std::move(w), *out);
            }
            return std::nullopt;
        };
        sup = detail::run_sampled(kCriterionVId, "criterion_v.superadd", cfg.samples,
                                  per_sample_sup, eval_sup, detail::pull_toward_log_mid(g.eff));
    }

    v.samples_run = inc.samples_run + sup.samples_run;
    v.min_margin = std::min(inc.min_margin, sup.min_margin);
    if (inc.status == Status::Fail || sup.status == Status::Fail) {
        v.status = Status::Fail;
        v.counterexample =
            (sup.status == Status::Fail) ? sup.counterexample : inc.counterexample;
        if (inc.status == Status::Fail && sup.status == Status::Fail &&
            inc.counterexample->violation > sup.counterexample->violation)
            v.counterexample = inc.counterexample;
    } else if (inc.status == Status::Inconclusive || sup.status == Status::Inconclusive) {
        v.status = Status::Inconclusive;
        v.note = inc.note.empty() ? sup.note : inc.note;
    } else {
        v.status = Status::Pass;
    }
    return v;
}

// Theorem-star ratio condition: f'' nowhere zero and f'/f'' positive and
// midpoint convex. Inconclusive when f'' sits inside the zero threshold
// anywhere on the window.
inline Verdict check_ratio_convex(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    Verdict v;
    v.checker_id = kRatioConvexId;

    const int grid_n = 513;
    double llo = std::log(g.eff.lo), lhi = std::log(g.eff.hi);
    for (int i = 0; i + 1 < grid_n; ++i) {
        double x = std::exp(llo + (lhi - llo) * i / (grid_n - 1));
        if (detail::classify_d2(g, x) == detail::SignClass::Zero) {
            v.status = Status::Inconclusive;
            v.note = "f'' within zero threshold near x = " + format_number(x);
            return v;
        }
    }

    CounterRng rng(cfg.seed, kRatioConvexId);
    WitnessFn eval_pos = [&g, &cfg](const Witness& w) {
        return detail::eval_ratio_positivity(g, cfg, w);
    };
    auto per_sample_pos = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        for (int t = 0; t < detail::kMaxRetries; ++t) {
            Witness w{{rng.log_uniform(i, uint32_t(64 * t), g.eff)}};
            auto out = eval_pos(w);
            if (out && std::isfinite(out->lhs - out->rhs))
                return std::make_pair(std::move(w), *out);
        }
        return std::nullopt;
    };
    Verdict pos = detail::run_sampled(kRatioConvexId, "ratio_convex.positivity",
                                      cfg.samples, per_sample_pos, eval_pos,
                                      detail::pull_toward_log_mid(g.eff));
    if (pos.status == Status::Fail) {
        pos.note = "f'/f'' not positive";
        return pos;
    }

    WitnessFn eval_mid = [&g, &cfg](const Witness& w) {
        return detail::eval_ratio_midpoint(g, cfg, w);
    };
    auto per_sample_mid = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        for (int t = 0; t < detail::kMaxRetries; ++t) {
            uint32_t off = uint32_t(64 * t);
            Witness w{{rng.log_uniform(i, off + 8, g.eff)}, {rng.log_uniform(i, off + 9, g.eff)}};
            auto out = eval_mid(w);
            if (out && std::isfinite(out->lhs - out->rhs))
                return std::make_pair(std::move(w), *out);
        }
        return std::nullopt;
    };
    Verdict mid = detail::run_sampled(kRatioConvexId, "ratio_convex.midpoint",
                                      cfg.samples, per_sample_mid, eval_mid,
                                      detail::pull_toward_log_mid(g.eff));
    mid.samples_run += pos.samples_run;
    mid.min_margin = std::min(mid.min_margin, pos.min_margin);
    return mid;
}

// Mikusinski comparison: A_f <= A_g iff f''/f' <= g''/g' pointwise. Both
// routes are evaluated; a split between them is a defect signal.
inline Verdict compare_means(const Generator& f0, const Generator& g0, const CheckConfig& cfg) {
    Generator f = canonicalize(f0);
    Generator g = canonicalize(g0);
    Verdict v;
    v.checker_id = kCompareId;
    if (!f.d2_kinks.empty() || !g.d2_kinks.empty()) {
        v.status = Status::Inconclusive;
        v.note = "comparison requires twice-differentiable generators on the window";
        return v;
    }
    Interval w{std::max(f.eff.lo, g.eff.lo), std::min(f.eff.hi, g.eff.hi)};
    if (!(w.lo < w.hi)) {
        v.status = Status::Inconclusive;
        v.note = "effective windows do not overlap";
        return v;
    }

    CounterRng rng(cfg.seed, kCompareId);
    auto ratio_of = [&cfg](const Generator& gen, double x, double& err) {
        detail::DEst d2 = detail::fsecond(gen, x), d1 = detail::fprime(gen, x);
        double val = d2.v / d1.v;
        err = (d2.err + std::abs(val) * d1.err) / std::abs(d1.v);
        (void)cfg;
        return val;
    };
    WitnessFn eval_ratio = [&](const Witness& wit) -> std::optional<EvalOut> {
        if (wit.size() != 1 || wit[0].size() != 1) return std::nullopt;
        double x = wit[0][0];
        if (!(x >= w.lo && x <= w.hi)) return std::nullopt;
        double ef, eg;
        double qf = ratio_of(f, x, ef);
        double qg = ratio_of(g, x, eg);
        return EvalOut{qf, qg, detail::budget0(cfg, qf, qg) + ef + eg};
    };
    auto per_sample_ratio = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        Witness wit{{rng.log_uniform(i, 0, w)}};
        auto out = eval_ratio(wit);
        if (!out || !std::isfinite(out->lhs - out->rhs)) return std::nullopt;
        return std::make_pair(std::move(wit), *out);
    };
    Verdict ratio_route = detail::run_sampled(kCompareId, "compare.ratio", cfg.samples,
                                              per_sample_ratio, eval_ratio,
                                              detail::pull_toward_log_mid(w));

    std::size_t n = std::size_t(cfg.arity);
    WitnessFn eval_direct = [&](const Witness& wit) -> std::optional<EvalOut> {
        if (wit.size() != 1 || wit[0].size() != n) return std::nullopt;
        for (double t : wit[0])
            if (!(t >= w.lo && t <= w.hi)) return std::nullopt;
        double lhs = qa_mean(f, wit[0]);
        double rhs = qa_mean(g, wit[0]);
        return EvalOut{lhs, rhs, detail::budget0(cfg, lhs, rhs)};
    };
    auto per_sample_direct = [&](uint64_t i) -> std::optional<std::pair<Witness, EvalOut>> {
        Witness wit(1, std::vector<double>(n));
        for (std::size_t k = 0; k < n; ++k) wit[0][k] = rng.log_uniform(i, uint32_t(8 + k), w);
        auto out = eval_direct(wit);
        if (!out || !std::isfinite(out->lhs - out->rhs)) return std::nullopt;
        return std::make_pair(std::move(wit), *out);
    };
    Verdict direct_route = detail::run_sampled(kCompareId, "compare.direct", cfg.samples,
                                               per_sample_direct, eval_direct,
                                               detail::pull_toward_log_mid(w));

    v.samples_run = ratio_route.samples_run + direct_route.samples_run;
    v.min_margin = std::min(ratio_route.min_margin, direct_route.min_margin);
    bool rf = ratio_route.status == Status::Fail;
    bool df = direct_route.status == Status::Fail;
    if (rf != df) {
        v.status = Status::Inconclusive;
        v.note = std::string("routes disagree: pointwise ratio says ") +
                 status_name(ratio_route.status) + ", direct mean comparison says " +
                 status_name(direct_route.status);
        v.counterexample = rf ? ratio_route.counterexample : direct_route.counterexample;
        return v;
    }
    if (df) {
        v.status = Status::Fail;
        v.counterexample = direct_route.counterexample;
        v.note = "both routes reject the comparison";
    } else {
        v.status = Status::Pass;
    }
    return v;
}

// ---------------------------------------------------------------------------
// The battery.

enum class Resolution { Subadditive, NotSubadditive, Disagreement };

inline const char* resolution_name(Resolution r) {
    switch (r) {
        case Resolution::Subadditive: return "subadditive";
        case Resolution::NotSubadditive: return "not_subadditive";
        default: return "disagreement";
    }
}

struct BatteryReport {
    std::string generator_label;
    Direction original_direction = Direction::Increasing;
    bool canonicalized = false;
    Interval window, eff;
    AlphaReport alpha;
    std::vector<Verdict> verdicts;
    Resolution resolution = Resolution::Disagreement;
    std::string details;
};

inline BatteryReport run_battery(const Generator& g0, const CheckConfig& cfg) {
    Generator g = canonicalize(g0);
    BatteryReport rep;
    rep.generator_label = g0.label;
    rep.original_direction = g0.direction;
    rep.canonicalized = g.canonicalized;
    rep.window = g.window;
    rep.eff = g.eff;
    rep.alpha = find_alpha(g);

    // cheap necessary conditions first; their failure already decides
    rep.verdicts.push_back(check_ma_bound(g, cfg));
    rep.verdicts.push_back(check_fprime_logconcave(g, cfg));
    for (const Verdict& v : rep.verdicts) {
        if (v.status == Status::Fail) {
            rep.resolution = Resolution::NotSubadditive;
            rep.details = "necessary condition '" + v.checker_id + "' failed";
            return rep;
        }
    }

    rep.verdicts.push_back(check_subadditive_direct(g, cfg));
    rep.verdicts.push_back(check_phi_concavity(g, cfg));
    rep.verdicts.push_back(check_psi_subadditive(g, cfg));
    rep.verdicts.push_back(check_criterion_v(g, cfg, &rep.alpha));
    rep.verdicts.push_back(check_eq546(g, cfg));

    int eq_pass = 0, eq_fail = 0;
    std::string passers, failers;
    for (const Verdict& v : rep.verdicts) {
        bool is_eq = v.checker_id == kDirectId || v.checker_id == kPhiId ||
                     v.checker_id == kPsiId || v.checker_id == kCriterionVId;
        if (!is_eq) continue;
        if (v.status == Status::Pass) {
            ++eq_pass;
            passers += (passers.empty() ? "" : ", ") + v.checker_id;
        } else if (v.status == Status::Fail) {
            ++eq_fail;
            failers += (failers.empty() ? "" : ", ") + v.checker_id;
        }
    }

    bool any_fail = false, all_pass = true;
    for (const Verdict& v : rep.verdicts) {
        any_fail = any_fail || v.status == Status::Fail;
        all_pass = all_pass && v.status == Status::Pass;
    }

    if (eq_fail > 0 && eq_pass > 0) {
        rep.resolution = Resolution::Disagreement;
        rep.details = "equivalence checkers contradict: pass = [" + passers + "], fail = [" +
                      failers + "]";
    } else if (all_pass) {
        rep.resolution = Resolution::Subadditive;
    } else if (any_fail) {
        rep.resolution = Resolution::NotSubadditive;
    } else {
        rep.resolution = Resolution::Disagreement;
        rep.details = "inconclusive checkers prevent a resolution";
    }
    return rep;
}

}  // namespace meanscope
