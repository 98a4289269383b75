#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <vector>

#include "causalkit/graph.hpp"

namespace causalkit {

// Occurrence counts of directed edges across a set of graphs. A->B and B->A
// are distinct entries.
struct EdgeTally {
    std::map<Edge, int> counts;
    int total_inputs = 0;
};

inline EdgeTally tally(const std::vector<EdgeSet>& graphs) {
    if (graphs.empty()) throw Error(ErrorCode::EmptyInput, "tally: no input graphs");
    EdgeTally t;
    t.total_inputs = static_cast<int>(graphs.size());
    for (const auto& g : graphs)
        for (const auto& e : g) ++t.counts[e];
    return t;
}

// Minimum occurrence count for an edge to pass the given threshold fraction.
inline int threshold_count(double fraction, int total_inputs) {
    return static_cast<int>(std::ceil(fraction * total_inputs));
}

namespace detail {

// Candidate edges at or above the threshold, ordered by descending count and
// ascending (parent, child) on ties.
inline std::vector<Edge> candidates_by_frequency(const EdgeTally& t, double fraction) {
    const int k = threshold_count(fraction, t.total_inputs);
    std::vector<std::pair<int, Edge>> ranked;
    for (const auto& [e, c] : t.counts)
        if (c >= k) ranked.emplace_back(c, e);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<Edge> out;
    out.reserve(ranked.size());
    for (const auto& [c, e] : ranked) out.push_back(e);
    return out;
}

}  // namespace detail

// Model-averaged graph: edges meeting the threshold are inserted in
// descending frequency order (lexicographic on ties) and any edge whose
// insertion would create a directed cycle is skipped.
inline Dag model_average(const EdgeTally& t, double threshold_fraction,
                         const VariableIndex& variables) {
    const int n = variables.size();
    EdgeSet picked;
    for (const Edge& e : detail::candidates_by_frequency(t, threshold_fraction)) {
        picked.insert(e);
        if (!is_acyclic(picked, n)) picked.erase(e);
    }
    return Dag(variables, picked);
}

// Raw thresholded edge set per rate, with no cycle removal. Sets are nested:
// a higher rate yields a subset of a lower rate.
inline std::vector<EdgeSet> edge_sets_by_rate(const EdgeTally& t, const std::vector<double>& rates) {
    std::vector<EdgeSet> out;
    out.reserve(rates.size());
    for (double rate : rates) {
        const int k = threshold_count(rate, t.total_inputs);
        EdgeSet s;
        for (const auto& [e, c] : t.counts)
            if (c >= k) s.insert(e);
        out.push_back(std::move(s));
    }
    return out;
}

// Repairs a possibly cyclic raw edge set destined for constraints, using the
// same descending-frequency cycle-skipping insertion as model_average. Every
// dropped edge is reported.
inline EdgeSet repair_acyclic(const EdgeSet& raw, const EdgeTally& t, int n,
                              std::vector<Edge>* dropped = nullptr) {
    std::vector<std::pair<int, Edge>> ranked;
    for (const auto& e : raw) {
        auto it = t.counts.find(e);
        ranked.emplace_back(it == t.counts.end() ? 0 : it->second, e);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    EdgeSet picked;
    for (const auto& [c, e] : ranked) {
        picked.insert(e);
        if (!is_acyclic(picked, n)) {
            picked.erase(e);
            if (dropped) dropped->push_back(e);
        }
    }
    return picked;
}

inline void write_tally_csv(std::ostream& out, const EdgeTally& t, const VariableIndex& vars) {
    out << "parent,child,count,total\n";
    for (const auto& [e, c] : t.counts)
        out << vars.label(e.first) << "," << vars.label(e.second) << "," << c << ","
            << t.total_inputs << "\n";
}

}  // namespace causalkit
