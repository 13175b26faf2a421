#pragma once

// JSON serialization of verdicts and battery reports. Field names are
// stable; nlohmann::json keeps keys sorted, so a report is byte-identical
// across runs with the same config.

#include <string>

#include <json.hpp>

#include "meanscope/checkers.hpp"
#include "meanscope/means.hpp"

namespace meanscope {

using json = nlohmann::ordered_json;

struct RunConfig {
    std::string command;
    std::vector<std::string> generators;
    std::vector<double> xs;  // mean command only
    Interval window = kDefaultWindow;
    uint64_t samples = 10000;
    int arity = 2;
    uint64_t seed = 0;
    double tol_rel = 1e-9;
    bool json_output = false;

    CheckConfig check_config() const { return CheckConfig{samples, arity, seed, tol_rel}; }
};

inline json to_json(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["generators"] = c.generators;
    if (!c.xs.empty()) j["x"] = c.xs;
    j["window"] = {{"lo", c.window.lo}, {"hi", c.window.hi}};
    j["samples"] = c.samples;
    j["arity"] = c.arity;
    j["seed"] = c.seed;
    j["tol_rel"] = c.tol_rel;
    j["output"] = c.json_output ? "json" : "text";
    return j;
}

inline json generator_json(const Generator& g) {
    json j;
    j["spec"] = g.label;
    j["direction"] = g.direction == Direction::Increasing ? "inc" : "dec";
    j["canonicalized"] = g.canonicalized;
    j["window"] = {{"lo", g.window.lo}, {"hi", g.window.hi}};
    j["effective_window"] = {{"lo", g.eff.lo}, {"hi", g.eff.hi}};
    j["clipped"] = g.clipped;
    return j;
}

inline json alpha_json(const AlphaReport& a) {
    json j;
    if (a.is_inf)
        j["value"] = "inf";
    else
        j["value"] = a.alpha;
    j["pattern_ok"] = a.pattern_ok;
    json viol = json::array();
    for (const auto& v : a.violations) viol.push_back({{"x", v.x}, {"f2", v.d2}});
    j["violations"] = viol;
    return j;
}

inline json counterexample_json(const Counterexample& ce) {
    json j;
    j["kind"] = ce.kind;
    j["witness"] = ce.witness;
    j["lhs"] = ce.lhs;
    j["rhs"] = ce.rhs;
    j["violation"] = ce.violation;
    j["err_budget"] = ce.err_budget;
    return j;
}

inline json verdict_json(const Verdict& v) {
    json j;
    j["id"] = v.checker_id;
    j["status"] = status_name(v.status);
    j["min_margin"] = std::isfinite(v.min_margin) ? v.min_margin : 0.0;
    j["samples"] = v.samples_run;
    j["counterexample"] = v.counterexample ? counterexample_json(*v.counterexample) : json();
    if (!v.note.empty()) j["note"] = v.note;
    return j;
}

inline json battery_json(const RunConfig& cfg, const Generator& original,
                         const BatteryReport& rep) {
    json j;
    j["config"] = to_json(cfg);
    json gj = generator_json(original);
    gj["canonicalized"] = rep.canonicalized;
    j["generator"] = gj;
    j["alpha"] = alpha_json(rep.alpha);
    json checkers = json::array();
    for (const Verdict& v : rep.verdicts) checkers.push_back(verdict_json(v));
    j["checkers"] = checkers;
    j["resolution"] = resolution_name(rep.resolution);
    if (!rep.details.empty()) j["details"] = rep.details;
    return j;
}

inline json mean_json(const RunConfig& cfg, const Generator& g, const MeanResult& r) {
    json j;
    j["config"] = to_json(cfg);
    j["generator"] = generator_json(g);
    j["mean"] = {{"value", r.value}, {"solver_iters", r.solver_iters}, {"residual", r.residual}};
    return j;
}

inline json check_json(const RunConfig& cfg, const Generator& g, const Verdict& v) {
    json j;
    j["config"] = to_json(cfg);
    j["generator"] = generator_json(g);
    j["checkers"] = json::array({verdict_json(v)});
    return j;
}

inline json alpha_command_json(const RunConfig& cfg, const Generator& g, const AlphaReport& a) {
    json j;
    j["config"] = to_json(cfg);
    j["generator"] = generator_json(g);
    j["alpha"] = alpha_json(a);
    return j;
}

inline json error_json(const std::string& category, const std::string& message) {
    json j;
    j["error"] = {{"category", category}, {"message", message}};
    return j;
}

}  // namespace meanscope
