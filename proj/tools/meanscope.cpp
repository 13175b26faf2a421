// meanscope: probe quasi-arithmetic means for subadditivity and related
// structure from the command line.
//
// Exit codes: 0 success (battery: subadditive / check: pass), 1 battery
// not-subadditive or check fail, 2 disagreement or inconclusive, 64 usage
// or parse error, 65 generator construction error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "meanscope/checkers.hpp"
#include "meanscope/means.hpp"
#include "meanscope/report.hpp"

namespace {

using namespace meanscope;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;
constexpr int kExitUndecided = 2;
constexpr int kExitUsage = 64;
constexpr int kExitConstruction = 65;

struct CliOptions {
    std::vector<std::string> generators;
    std::string xs_text;
    std::string window_text = "1e-3:1e3";
    RunConfig cfg;
};

Interval parse_window(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ParseError("window must be lo:hi", 1);
    try {
        Interval w{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
        if (!(w.lo > 0.0) || !(w.lo < w.hi)) throw ParseError("window must satisfy 0 < lo < hi", 1);
        return w;
    } catch (const std::invalid_argument&) {
        throw ParseError("window must be lo:hi with numeric bounds", 1);
    }
}

std::vector<double> parse_comma_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        try {
            out.push_back(std::stod(text.substr(pos, comma - pos)));
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed entry in -x list", pos + 1);
        }
        pos = comma + 1;
    }
    if (out.empty()) throw ParseError("-x needs at least one entry", 1);
    return out;
}

void add_common_options(CLI::App* cmd, CliOptions& opt, int max_generators) {
    cmd->add_option("-g,--generator", opt.generators, "generator spec (builtin call or expression)")
        ->required()
        ->expected(1, max_generators);
    cmd->add_option("--window", opt.window_text, "analysis window lo:hi");
    cmd->add_option("--samples", opt.cfg.samples, "samples per checker");
    cmd->add_option("--arity", opt.cfg.arity, "vector length n for mean-based checkers")
        ->check(CLI::Range(2, 32));
    cmd->add_option("--seed", opt.cfg.seed, "seed for the counter-based sampler");
    cmd->add_option("--tol", opt.cfg.tol_rel, "relative tolerance for violation margins");
    cmd->add_flag("--json", opt.cfg.json_output, "emit a JSON report");
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

void report_error(const CliOptions& opt, const std::string& category, const std::string& msg) {
    if (opt.cfg.json_output)
        std::cerr << error_json(category, msg).dump(2) << "\n";
    else
        std::cerr << "error (" << category << "): " << msg << "\n";
}

int exit_for(Status s) {
    switch (s) {
        case Status::Pass: return kExitOk;
        case Status::Fail: return kExitNegative;
        default: return kExitUndecided;
    }
}

int exit_for(Resolution r) {
    switch (r) {
        case Resolution::Subadditive: return kExitOk;
        case Resolution::NotSubadditive: return kExitNegative;
        default: return kExitUndecided;
    }
}

void print_verdict_text(const Verdict& v) {
    std::printf("  %-18s %-13s min_margin=%.6g samples=%llu\n", v.checker_id.c_str(),
                status_name(v.status), std::isfinite(v.min_margin) ? v.min_margin : 0.0,
                (unsigned long long)v.samples_run);
    if (v.counterexample) {
        const Counterexample& ce = *v.counterexample;
        std::printf("    counterexample (%s): lhs=%.12g rhs=%.12g violation=%.6g\n",
                    ce.kind.c_str(), ce.lhs, ce.rhs, ce.violation);
        std::printf("    witness:");
        for (const auto& grp : ce.witness) {
            std::printf(" (");
            for (std::size_t i = 0; i < grp.size(); ++i)
                std::printf("%s%.8g", i ? ", " : "", grp[i]);
            std::printf(")");
        }
        std::printf("\n");
    }
    if (!v.note.empty()) std::printf("    note: %s\n", v.note.c_str());
}

int run_mean(CliOptions& opt) {
    Generator g = build(opt.generators[0], opt.cfg.window);
    std::vector<double> xs = parse_comma_list(opt.xs_text);
    MeanResult r = qa_mean_result(g, xs);
    if (opt.cfg.json_output) {
        emit(mean_json(opt.cfg, g, r));
    } else {
        std::printf("qa_mean(%s, n=%zu) = %.12g  (solver iters %d, residual %.3g)\n",
                    g.label.c_str(), xs.size(), r.value, r.solver_iters, r.residual);
    }
    return kExitOk;
}

int run_alpha(CliOptions& opt) {
    Generator g = build(opt.generators[0], opt.cfg.window);
    Generator canon = canonicalize(g);
    AlphaReport a = find_alpha(canon);
    if (opt.cfg.json_output) {
        emit(alpha_command_json(opt.cfg, g, a));
    } else {
        if (a.is_inf)
            std::printf("alpha: >= %.6g (f''_+ positive on the whole window)\n", g.eff.hi);
        else
            std::printf("alpha: %.6g\n", a.alpha);
        std::printf("pattern_ok: %s\n", a.pattern_ok ? "true" : "false");
        for (const auto& v : a.violations)
            std::printf("  sign violation at x=%.8g (f''_+ ~ %.6g)\n", v.x, v.d2);
    }
    return kExitOk;
}

int run_check(CliOptions& opt, const std::string& checker) {
    Generator g = build(opt.generators[0], opt.cfg.window);
    CheckConfig cc = opt.cfg.check_config();
    Verdict v;
    if (checker == kDirectId) v = check_subadditive_direct(g, cc);
    else if (checker == kPhiId) v = check_phi_concavity(g, cc);
    else if (checker == kPsiId) v = check_psi_subadditive(g, cc);
    else if (checker == kCriterionVId) v = check_criterion_v(g, cc);
    else if (checker == kMaBoundId) v = check_ma_bound(g, cc);
    else if (checker == kLogConcaveId) v = check_fprime_logconcave(g, cc);
    else if (checker == kEq546Id) v = check_eq546(g, cc);
    else if (checker == kJensenId) v = check_jensen_convexity(g, cc);
    else if (checker == kRatioConvexId) v = check_ratio_convex(g, cc);
    else {
        report_error(opt, "usage", "unknown checker '" + checker + "'");
        return kExitUsage;
    }
    if (opt.cfg.json_output) {
        emit(check_json(opt.cfg, g, v));
    } else {
        std::printf("%s on %s:\n", checker.c_str(), g.label.c_str());
        print_verdict_text(v);
    }
    return exit_for(v.status);
}

int run_battery_cmd(CliOptions& opt) {
    Generator g = build(opt.generators[0], opt.cfg.window);
    BatteryReport rep = run_battery(g, opt.cfg.check_config());
    if (opt.cfg.json_output) {
        emit(battery_json(opt.cfg, g, rep));
    } else {
        std::printf("battery on %s (window [%.3g, %.3g]%s)\n", g.label.c_str(), g.eff.lo,
                    g.eff.hi, g.clipped ? ", clipped" : "");
        if (rep.alpha.is_inf)
            std::printf("alpha: inf, pattern_ok: %s\n", rep.alpha.pattern_ok ? "true" : "false");
        else
            std::printf("alpha: %.6g, pattern_ok: %s\n", rep.alpha.alpha,
                        rep.alpha.pattern_ok ? "true" : "false");
        for (const Verdict& v : rep.verdicts) print_verdict_text(v);
        std::printf("resolution: %s\n", resolution_name(rep.resolution));
        if (!rep.details.empty()) std::printf("details: %s\n", rep.details.c_str());
    }
    return exit_for(rep.resolution);
}

int run_compare(CliOptions& opt) {
    Generator f = build(opt.generators[0], opt.cfg.window);
    Generator g = build(opt.generators[1], opt.cfg.window);
    Verdict v = compare_means(f, g, opt.cfg.check_config());
    if (opt.cfg.json_output) {
        json j;
        j["config"] = to_json(opt.cfg);
        j["generator"] = generator_json(f);
        j["generator_rhs"] = generator_json(g);
        j["checkers"] = json::array({verdict_json(v)});
        emit(j);
    } else {
        std::printf("compare A_f <= A_g for f = %s, g = %s:\n", f.label.c_str(), g.label.c_str());
        print_verdict_text(v);
    }
    return exit_for(v.status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical subadditivity analysis of quasi-arithmetic means"};
    app.require_subcommand(1);

    CliOptions opt;
    std::string checker_id;

    CLI::App* mean = app.add_subcommand("mean", "evaluate the quasi-arithmetic mean");
    add_common_options(mean, opt, 1);
    mean->add_option("-x", opt.xs_text, "comma-separated entries")->required();

    CLI::App* alpha = app.add_subcommand("alpha", "detect the f''_+ sign-change threshold");
    add_common_options(alpha, opt, 1);

    CLI::App* check = app.add_subcommand("check", "run a single checker");
    check->add_option("checker", checker_id,
                      "one of: direct, phi_concave, psi_subadd, criterion_v, ma_bound, "
                      "fprime_logconcave, eq546, jensen_convex, ratio_convex")
        ->required();
    add_common_options(check, opt, 1);

    CLI::App* battery = app.add_subcommand("battery", "run the full subadditivity battery");
    add_common_options(battery, opt, 1);

    CLI::App* compare = app.add_subcommand("compare", "compare two means (needs two -g)");
    add_common_options(compare, opt, 2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        opt.cfg.window = parse_window(opt.window_text);
        opt.cfg.generators = opt.generators;
        if (mean->parsed()) {
            opt.cfg.command = "mean";
            opt.cfg.xs = parse_comma_list(opt.xs_text);
            return run_mean(opt);
        }
        if (alpha->parsed()) {
            opt.cfg.command = "alpha";
            return run_alpha(opt);
        }
        if (check->parsed()) {
            opt.cfg.command = "check";
            return run_check(opt, checker_id);
        }
        if (battery->parsed()) {
            opt.cfg.command = "battery";
            return run_battery_cmd(opt);
        }
        if (compare->parsed()) {
            opt.cfg.command = "compare";
            if (opt.generators.size() != 2) {
                report_error(opt, "usage", "compare needs exactly two -g specs");
                return kExitUsage;
            }
            return run_compare(opt);
        }
    } catch (const ParseError& e) {
        report_error(opt, "parse", e.what());
        return kExitUsage;
    } catch (const MonotonicityError& e) {
        report_error(opt, "construction", e.what());
        return kExitConstruction;
    } catch (const EvalError& e) {
        report_error(opt, "construction", e.what());
        return kExitConstruction;
    } catch (const DomainError& e) {
        report_error(opt, "usage", e.what());
        return kExitUsage;
    } catch (const RangeError& e) {
        report_error(opt, "construction", e.what());
        return kExitConstruction;
    } catch (const std::exception& e) {
        report_error(opt, "internal", e.what());
        return kExitConstruction;
    }
    return kExitUsage;
}
