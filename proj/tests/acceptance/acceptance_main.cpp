// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. argv[1] optionally names the CLI binary (used by the
// determinism criterion); the default is ./meanscope next to the build tree.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "meanscope/checkers.hpp"
#include "meanscope/generator.hpp"
#include "meanscope/means.hpp"
#include "meanscope/report.hpp"
#include "meanscope/rng.hpp"
#include "meanscope/semidiff.hpp"
#include "support/spline_family.hpp"

using namespace meanscope;
using namespace meanscope::testsupport;

namespace {

std::string g_cli_path = "./meanscope";
int g_failures = 0;

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& message) {
        if (!cond && ok) {
            ok = false;
            detail = message;
        }
    }
};

void run_criterion(int id, const std::string& name, const std::function<void(Check&)>& body) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.ok) {
        std::printf("[PASS] criterion %2d: %s (%.1f s)\n", id, name.c_str(), secs);
    } else {
        std::printf("[FAIL] criterion %2d: %s (%.1f s)\n       %s\n", id, name.c_str(), secs,
                    c.detail.c_str());
        ++g_failures;
    }
    std::fflush(stdout);
}

CheckConfig config(uint64_t samples, uint64_t seed = 0) {
    CheckConfig cfg;
    cfg.samples = samples;
    cfg.seed = seed;
    cfg.tol_rel = 1e-9;
    return cfg;
}

std::string describe(double got, double want) {
    return "got " + std::to_string(got) + ", wanted " + std::to_string(want);
}

// criterion 1: power-mean classification with individually agreeing
// equivalence checkers
void criterion_power_classification(Check& c) {
    CheckConfig cfg = config(10000);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
        Generator g = build(GeneratorSpec{PowerSpec{p}});
        BatteryReport rep = run_battery(g, cfg);
        c.expect(rep.resolution == Resolution::Subadditive,
                 "power(" + std::to_string(p) + ") not resolved subadditive");
        for (auto* check : {check_subadditive_direct, check_phi_concavity,
                            check_psi_subadditive}) {
            c.expect(check(g, cfg).status == Status::Pass,
                     "an equivalence checker rejected power(" + std::to_string(p) + ")");
        }
        c.expect(check_criterion_v(g, cfg).status == Status::Pass,
                 "criterion (v) rejected power(" + std::to_string(p) + ")");
    }
    for (double p : {0.25, 0.5, 0.75}) {
        Generator g = build(GeneratorSpec{PowerSpec{p}});
        BatteryReport rep = run_battery(g, cfg);
        c.expect(rep.resolution == Resolution::NotSubadditive,
                 "power(" + std::to_string(p) + ") not resolved not-subadditive");
        for (auto* check : {check_subadditive_direct, check_phi_concavity,
                            check_psi_subadditive}) {
            c.expect(check(g, cfg).status == Status::Fail,
                     "an equivalence checker accepted power(" + std::to_string(p) + ")");
        }
        c.expect(check_criterion_v(g, cfg).status == Status::Fail,
                 "criterion (v) accepted power(" + std::to_string(p) + ")");
    }
}

// criterion 2: the exponential generator, its shrunk counterexample under
// an independent closed-form oracle, and the frozen witness value
void criterion_exponential(Check& c) {
    CheckConfig cfg = config(10000, 42);
    Generator g = build("exp(1)");
    BatteryReport rep = run_battery(g, cfg);
    c.expect(rep.resolution == Resolution::NotSubadditive, "exp(1) not rejected");

    const Verdict* direct = nullptr;
    for (const Verdict& v : rep.verdicts)
        if (v.checker_id == kDirectId) direct = &v;
    c.expect(direct != nullptr && direct->counterexample.has_value(),
             "direct checker produced no counterexample");
    if (direct && direct->counterexample) {
        // independent oracle: ln of the mean of exponentials
        auto log_mean_exp = [](const std::vector<double>& xs) {
            double s = 0.0;
            for (double x : xs) s += std::exp(x);
            return std::log(s / double(xs.size()));
        };
        const Witness& w = direct->counterexample->witness;
        c.expect(w.size() == 2 && w[0].size() == w[1].size(), "unexpected witness shape");
        std::vector<double> sum(w[0].size());
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = w[0][i] + w[1][i];
        double viol = log_mean_exp(sum) - log_mean_exp(w[0]) - log_mean_exp(w[1]);
        c.expect(viol >= 1e-3, "shrunk counterexample violation " + std::to_string(viol) +
                                   " below 1e-3 under the closed-form oracle");
    }

    // frozen witness x = y = (0.1, 3)
    std::vector<double> x{0.1, 3.0}, sum{0.2, 6.0};
    double lhs = qa_mean(g, sum);
    double rhs = 2.0 * qa_mean(g, x);
    c.expect(std::abs((lhs - rhs) - 0.58910) <= 1e-4,
             "witness value drifted: " + describe(lhs - rhs, 0.58910));
}

// criterion 3: threshold detection for quadlin and the sentinels
void criterion_alpha(Check& c) {
    for (double alpha : {0.5, 1.0, 2.0}) {
        Generator g = build(GeneratorSpec{QuadLinSpec{alpha}});
        AlphaReport rep = find_alpha(g);
        c.expect(rep.pattern_ok, "quadlin pattern not recognized");
        c.expect(!rep.is_inf && std::abs(rep.alpha - alpha) <= 1e-3,
                 "alpha estimate " + describe(rep.alpha, alpha));
    }
    AlphaReport pw = find_alpha(build("power(2)"));
    c.expect(pw.pattern_ok && pw.is_inf, "power(2) should report the infinite sentinel");
    AlphaReport lin = find_alpha(build("power(1)"));
    c.expect(lin.pattern_ok && !lin.is_inf && lin.alpha == 0.0, "power(1) should report 0");
}

// criterion 4: sampled f'/f''_+ against the symbolic x/(p-1)
void criterion_ratio_oracle(Check& c) {
    for (double p : {1.5, 2.0, 3.0}) {
        Generator g = build(GeneratorSpec{PowerSpec{p}});
        for (int i = 0; i < 100; ++i) {
            double x = 1e-2 * std::pow(1e4, i / 99.0);
            double r = meanscope::detail::ratio_d1_d2(g, x).v;
            double want = x / (p - 1.0);
            c.expect(std::abs(r - want) <= 1e-5 * std::abs(want),
                     "ratio mismatch at x=" + std::to_string(x) + ": " + describe(r, want));
        }
    }
}

// criterion 5: one-sided derivative engine at the bench points
void criterion_semiderivative(Check& c) {
    CustomGenerator tp;
    tp.label = "two_piece";
    tp.fn = [](double x) { return 2.0 * x + std::abs(x - 1.0); };
    tp.d1 = [](double x) { return x < 1.0 ? 1.0 : 3.0; };
    tp.d1_kinks = {1.0};
    Generator g = build_custom(std::move(tp));
    double l1 = d1_side(g, 1.0, Side::Left).value;
    double r1 = d1_side(g, 1.0, Side::Right).value;
    c.expect(std::abs(l1 - 1.0) <= 1e-6, "left slope " + describe(l1, 1.0));
    c.expect(std::abs(r1 - 3.0) <= 1e-6, "right slope " + describe(r1, 3.0));

    Generator ql = build("quadlin(1)");
    double l2 = d2_side(ql, 1.0, Side::Left).value;
    double r2 = d2_side(ql, 1.0, Side::Right).value;
    c.expect(std::abs(l2 - 2.0) <= 1e-5, "left curvature " + describe(l2, 2.0));
    c.expect(std::abs(r2 - 0.0) <= 1e-5, "right curvature " + describe(r2, 0.0));
}

// criterion 6: closed-form power means against the generator route, plus
// internality and bit-exact permutation symmetry
void criterion_mean_oracle(Check& c) {
    CounterRng rng(20260810, "acceptance_mean_oracle");
    const std::array<std::size_t, 3> arities{2, 3, 5};
    uint64_t idx = 0;
    for (int gp = 0; gp < 50; ++gp) {
        double p = rng.uniform(uint64_t(gp), 7000, 0.2, 4.0);
        Generator g = build(GeneratorSpec{PowerSpec{p}});
        for (int rep = 0; rep < 200; ++rep, ++idx) {
            std::size_t n = arities[std::size_t(idx % 3)];
            std::vector<double> xs(n);
            for (std::size_t k = 0; k < n; ++k)
                xs[k] = rng.log_uniform(idx, uint32_t(k), 1e-2, 1e2);
            double lhs = qa_mean(g, xs);
            double rhs = power_mean(p, xs);
            if (std::abs(lhs - rhs) > 1e-10 * std::abs(rhs)) {
                c.expect(false, "oracle mismatch at p=" + std::to_string(p) + ": " +
                                    describe(lhs, rhs));
                return;
            }
            double mn = *std::min_element(xs.begin(), xs.end());
            double mx = *std::max_element(xs.begin(), xs.end());
            if (lhs < mn || lhs > mx) {
                c.expect(false, "internality violated");
                return;
            }
            std::vector<double> rot(xs.begin() + 1, xs.end());
            rot.push_back(xs.front());
            if (qa_mean(g, rot) != lhs) {
                c.expect(false, "permutation symmetry violated");
                return;
            }
        }
    }
}

// criterion 7: arithmetic mean below the quasi-arithmetic mean for every
// battery-subadditive generator
void criterion_ma_necessity(Check& c) {
    std::vector<Generator> candidates;
    for (double p : {1.0, 1.5, 2.0, 3.0})
        candidates.push_back(build(GeneratorSpec{PowerSpec{p}}));
    for (double a : {0.5, 1.0, 2.0})
        candidates.push_back(build(GeneratorSpec{QuadLinSpec{a}}));
    auto family = draw_family(77001, 40);
    int spline_count = 0;
    for (std::size_t i = 0; i < family.size() && spline_count < 20; ++i) {
        if (!family[i].subadditive) continue;
        candidates.push_back(to_generator(family[i].spline, "spline#" + std::to_string(i)));
        ++spline_count;
    }

    CheckConfig screen = config(2000);
    CheckConfig full = config(10000);
    int subadditive_seen = 0;
    for (const Generator& g : candidates) {
        if (run_battery(g, screen).resolution != Resolution::Subadditive) continue;
        ++subadditive_seen;
        Verdict v = check_ma_bound(g, full);
        c.expect(v.status == Status::Pass,
                 "significant A > qa_mean violation on " + g.label);
    }
    c.expect(subadditive_seen >= 20, "too few subadditive generators in the pool");
}

// criterion 8: the spline stress family, disagreement-free and seed-stable;
// the ten-seed sweep runs at 1500 samples per checker to stay inside the
// wall-clock budget, the main pass at the full default
void criterion_equivalence_stress(Check& c) {
    auto family = draw_family(20260810, 200);
    std::vector<Generator> gens;
    gens.reserve(family.size());
    for (std::size_t i = 0; i < family.size(); ++i)
        gens.push_back(to_generator(family[i].spline, "spline#" + std::to_string(i)));

    CheckConfig full = config(10000);
    int disagreements = 0, mismatches = 0;
    std::vector<Resolution> first(family.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        BatteryReport rep = run_battery(gens[i], full);
        first[i] = rep.resolution;
        if (rep.resolution == Resolution::Disagreement) ++disagreements;
        bool want_sub = family[i].subadditive;
        if (rep.resolution != (want_sub ? Resolution::Subadditive
                                        : Resolution::NotSubadditive))
            ++mismatches;
    }
    c.expect(disagreements == 0,
             std::to_string(disagreements) + " disagreements in the 200-member family");
    c.expect(mismatches == 0, std::to_string(mismatches) +
                                  " resolutions differ from the exact spline classifier");

    for (uint64_t seed = 0; seed < 10; ++seed) {
        CheckConfig sweep = config(1500, seed);
        for (std::size_t i = 0; i < family.size(); ++i) {
            Resolution r = run_battery(gens[i], sweep).resolution;
            if (r != first[i]) {
                c.expect(false, "resolution flipped for spline#" + std::to_string(i) +
                                    " at seed " + std::to_string(seed));
                return;
            }
        }
    }
}

// criterion 9: mean convexity and the f'/f'' route agree on the smooth
// members with curvature bounded away from zero
void criterion_convexity_crosscheck(Check& c) {
    CheckConfig cfg = config(10000);
    std::vector<GeneratorSpec> specs;
    for (double p : {0.25, 0.5, 0.75, 1.5, 2.0, 3.0}) specs.push_back(GeneratorSpec{PowerSpec{p}});
    for (double e : {0.5, 1.0, 2.0}) specs.push_back(GeneratorSpec{ExpSpec{e}});
    for (const GeneratorSpec& s : specs) {
        Generator g = build(s);
        Verdict jensen = check_jensen_convexity(g, cfg);
        Verdict ratio = check_ratio_convex(g, cfg);
        c.expect(ratio.status != Status::Inconclusive,
                 "ratio route inconclusive on a bounded-curvature generator: " + g.label);
        c.expect(jensen.status == ratio.status,
                 "routes disagree on " + g.label + ": jensen " +
                     status_name(jensen.status) + ", ratio " + status_name(ratio.status));
    }
}

// criterion 10: the proof-path validator holds on every battery-subadditive
// stress generator and rejects the exponential with the analytic witness
void criterion_eq546(Check& c) {
    CheckConfig screen = config(2000);
    CheckConfig full = config(10000);

    std::vector<Generator> pool;
    for (double p : {1.0, 1.5, 2.0, 3.0}) pool.push_back(build(GeneratorSpec{PowerSpec{p}}));
    for (double a : {0.3, 0.5, 1.0, 2.0, 3.0})
        pool.push_back(build(GeneratorSpec{QuadLinSpec{a}}));
    auto family = draw_family(55010, 40);
    for (std::size_t i = 0; i < family.size(); ++i)
        if (family[i].subadditive)
            pool.push_back(to_generator(family[i].spline, "spline#" + std::to_string(i)));

    for (const Generator& g : pool) {
        if (run_battery(g, screen).resolution != Resolution::Subadditive) continue;
        Verdict v = check_eq546(g, full);
        c.expect(v.status == Status::Pass, "eq546 rejected subadditive generator " + g.label);
    }

    Generator ex = build("exp(1)");
    c.expect(check_eq546(ex, full).status == Status::Fail, "eq546 accepted exp(1)");
    // analytic witness u = v = 1: both curvature ratios are 1, so 4 <= 2 fails
    auto out = evaluate_witness("eq546", Witness{{0.7}, {1.1}, {1.0}, {1.0}}, ex, full);
    c.expect(out.has_value() && out->lhs - out->rhs > out->err_budget &&
                 std::abs(out->lhs - 4.0) < 1e-4 && std::abs(out->rhs - 2.0) < 1e-4,
             "analytic eq546 witness did not evaluate to 4 <= 2");
}

// criterion 11: CLI determinism and the exit-code mapping
void criterion_cli(Check& c) {
    auto run_cli = [&](const std::string& args, std::string& out) {
        std::string cmd = g_cli_path + " " + args + " 2>/dev/null";
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) return -1;
        char buf[4096];
        out.clear();
        std::size_t n;
        while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
        int status = pclose(pipe);
        if (!WIFEXITED(status)) return -1;
        return WEXITSTATUS(status);
    };

    std::string out1, out2;
    int rc1 = run_cli("battery -g \"exp(1)\" --seed 42 --json", out1);
    int rc2 = run_cli("battery -g \"exp(1)\" --seed 42 --json", out2);
    c.expect(rc1 == 1 && rc2 == 1, "battery exp(1) exit code " + std::to_string(rc1));
    c.expect(!out1.empty() && out1 == out2, "battery --json --seed 42 not byte-identical");

    // the report parses and re-serializes byte-identically
    try {
        json parsed = json::parse(out1);
        c.expect(parsed.dump(2) + "\n" == out1, "JSON round trip changed the report bytes");
        c.expect(parsed["resolution"] == "not_subadditive", "unexpected resolution field");
        c.expect(!parsed["checkers"].empty(), "no checkers in the report");
        bool has_ce = false;
        for (const auto& ch : parsed["checkers"])
            if (!ch["counterexample"].is_null()) has_ce = true;
        c.expect(has_ce, "no counterexample present in the exp(1) report");
    } catch (const json::exception& e) {
        c.expect(false, std::string("report does not parse as JSON: ") + e.what());
    }

    // re-running with the embedded resolved config reproduces the report
    std::string out3;
    int rc3 = run_cli("battery -g \"exp(1)\" --seed 42 --json --window 1e-3:1e3 "
                      "--samples 10000 --arity 2 --tol 1e-9",
                      out3);
    c.expect(rc3 == 1 && out3 == out1, "explicit resolved config changed the report");

    std::string out;
    c.expect(run_cli("battery -g \"power(2)\" --samples 2000", out) == 0,
             "battery power(2) should exit 0");
    c.expect(run_cli("battery -g \"power(1.5)\" --samples 2000", out) == 0,
             "battery power(1.5) should exit 0");
    c.expect(run_cli("battery -g \"power(0.5)\" --samples 2000", out) == 1,
             "battery power(0.5) should exit 1");
    c.expect(run_cli("battery -g \"power(0.25)\" --samples 2000", out) == 1,
             "battery power(0.25) should exit 1");
    c.expect(run_cli("mean -g \"power(2)\" -x 1,7", out) == 0, "mean should exit 0");
    c.expect(out.find("5") != std::string::npos, "mean output should contain the value 5");
    c.expect(run_cli("alpha -g \"quadlin(1)\"", out) == 0, "alpha should exit 0");
    c.expect(out.find("pattern_ok: true") != std::string::npos,
             "alpha output should confirm the sign pattern");
    c.expect(run_cli("check direct -g \"power(2)\" --samples 2000", out) == 0,
             "check direct power(2) should exit 0");
    c.expect(run_cli("check direct -g \"power(0.5)\" --samples 2000", out) == 1,
             "check direct power(0.5) should exit 1");
    c.expect(run_cli("check ratio_convex -g \"quadlin(1)\" --samples 2000", out) == 2,
             "inconclusive checks should exit 2");
    c.expect(run_cli("compare -g \"power(1)\" -g \"power(2)\" --samples 2000", out) == 0,
             "compare should exit 0 when the order holds");
    c.expect(run_cli("mean -g \"power(\" -x 1,7", out) == 64, "parse error should exit 64");
    c.expect(run_cli("battery -g \"x - x^2\"", out) == 65,
             "monotonicity failure should exit 65");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    run_criterion(1, "power-mean classification with agreeing equivalence checkers",
                  criterion_power_classification);
    run_criterion(2, "exponential generator rejection with oracle-checked counterexample",
                  criterion_exponential);
    run_criterion(3, "threshold detection for quadlin, power(2) and power(1)", criterion_alpha);
    run_criterion(4, "f'/f''_+ against the symbolic power-generator ratio",
                  criterion_ratio_oracle);
    run_criterion(5, "one-sided derivative engine at first- and second-order kinks",
                  criterion_semiderivative);
    run_criterion(6, "mean-evaluation oracle, internality, permutation symmetry",
                  criterion_mean_oracle);
    run_criterion(7, "arithmetic-mean bound on every subadditive generator",
                  criterion_ma_necessity);
    run_criterion(8, "equivalence stress over 200 random quadratic splines",
                  criterion_equivalence_stress);
    run_criterion(9, "mean convexity against the f'/f'' convexity route",
                  criterion_convexity_crosscheck);
    run_criterion(10, "proof-path validator on subadditive generators and exp(1)",
                  criterion_eq546);
    run_criterion(11, "CLI byte determinism and exit-code mapping", criterion_cli);

    if (g_failures == 0) {
        std::printf("all 11 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria failed\n", g_failures);
    return 1;
}
