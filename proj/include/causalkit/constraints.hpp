#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalkit/graph.hpp"

namespace causalkit {

// Provenance of a constraint set: which case and threshold rate produced it
// and which of the three constraint forms it carries.
struct ConstraintSource {
    std::string case_id;
    int rate_percent = 0;  // 33, 50 or 67; 0 when not rate-derived
    std::string type;      // "required" | "initial" | "temporal"
};

// Structural constraints handed to the learners: mandatory directed edges,
// forbidden directed pairs, and an optional starting graph.
struct ConstraintSet {
    int num_variables = 0;
    EdgeSet required;
    EdgeSet forbidden;
    std::optional<Dag> initial;
    ConstraintSource source;

    bool empty() const { return required.empty() && forbidden.empty() && !initial.has_value(); }
};

// Temporal prohibitions implied by a required edge set: for every ancestral
// pair (X,Y) in the transitive closure, the reversed pair (Y,X) is forbidden.
inline EdgeSet derive_temporal(const EdgeSet& required, int n) {
    if (!is_acyclic(required, n))
        throw Error(ErrorCode::CyclicInput, "derive_temporal: required edge set is cyclic");
    EdgeSet forbidden;
    for (const auto& [x, y] : transitive_closure(required, n)) forbidden.emplace(y, x);
    return forbidden;
}

// Embeds a required edge set as a starting graph.
inline Dag as_initial_graph(const EdgeSet& required, const VariableIndex& variables) {
    if (!is_acyclic(required, variables.size()))
        throw Error(ErrorCode::CyclicInput, "as_initial_graph: required edge set is cyclic");
    return Dag(variables, required);
}

// Returns every violated ConstraintSet invariant; empty when consistent.
inline std::vector<std::string> validate(const ConstraintSet& cs) {
    std::vector<std::string> problems;
    for (const auto& [p, c] : cs.required)
        if (p == c) problems.push_back("required self-loop");
    bool required_acyclic = true;
    try {
        required_acyclic = is_acyclic(cs.required, cs.num_variables);
    } catch (const Error&) {
        problems.push_back("required edge references an unknown variable index");
        required_acyclic = false;
    }
    if (!required_acyclic) problems.push_back("required edge set is cyclic");
    for (const auto& e : cs.required)
        if (cs.forbidden.count(e))
            problems.push_back("edge both required and forbidden");
    if (cs.initial.has_value()) {
        const Dag& g = *cs.initial;
        if (g.num_variables() != cs.num_variables)
            problems.push_back("initial graph variable count mismatch");
        for (const auto& e : cs.required)
            if (!g.has_edge(e.first, e.second))
                problems.push_back("initial graph missing a required edge");
        for (const auto& e : g.edges())
            if (cs.forbidden.count(e))
                problems.push_back("initial graph contains a forbidden pair");
    }
    return problems;
}

inline nlohmann::json constraints_to_json(const ConstraintSet& cs, const VariableIndex& vars) {
    nlohmann::json j;
    auto edges_to_json = [&](const EdgeSet& edges) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [p, c] : edges)
            arr.push_back({vars.label(p), vars.label(c)});
        return arr;
    };
    j["required"] = edges_to_json(cs.required);
    j["forbidden"] = edges_to_json(cs.forbidden);
    if (cs.initial.has_value())
        j["initial"] = edges_to_json(cs.initial->edges());
    else
        j["initial"] = nullptr;
    j["source"] = {{"case", cs.source.case_id},
                   {"rate", cs.source.rate_percent},
                   {"type", cs.source.type}};
    return j;
}

// Parses the constraint JSON against a variable index. Edges referencing an
// unknown label are dropped with a warning instead of failing the run.
inline ConstraintSet constraints_from_json(const nlohmann::json& j, const VariableIndex& vars,
                                           std::vector<std::string>* warnings = nullptr) {
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    auto edges_from_json = [&](const nlohmann::json& arr, const char* what) {
        EdgeSet out;
        if (arr.is_null()) return out;
        for (const auto& pair : arr) {
            if (!pair.is_array() || pair.size() != 2)
                throw Error(ErrorCode::FormatError, "constraint edge must be a [parent, child] pair");
            const std::string ps = pair[0].get<std::string>();
            const std::string cs = pair[1].get<std::string>();
            auto p = vars.find(ps);
            auto c = vars.find(cs);
            if (!p || !c) {
                warn(std::string(what) + " edge dropped, unknown label: " + ps + " -> " + cs);
                continue;
            }
            out.emplace(*p, *c);
        }
        return out;
    };

    ConstraintSet cs;
    cs.num_variables = vars.size();
    cs.required = edges_from_json(j.value("required", nlohmann::json::array()), "required");
    cs.forbidden = edges_from_json(j.value("forbidden", nlohmann::json::array()), "forbidden");
    if (j.contains("initial") && !j["initial"].is_null())
        cs.initial = Dag(vars, edges_from_json(j["initial"], "initial"));
    if (j.contains("source") && j["source"].is_object()) {
        const auto& s = j["source"];
        cs.source.case_id = s.value("case", std::string());
        cs.source.rate_percent = s.value("rate", 0);
        cs.source.type = s.value("type", std::string());
    }
    return cs;
}

}  // namespace causalkit
