#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalkit/errors.hpp"

namespace causalkit {

// Directed edge as (parent index, child index).
using Edge = std::pair<int, int>;
using EdgeSet = std::set<Edge>;

// Ordered set of variable labels. Graphs and datasets reference variables by
// index; labels appear only at I/O boundaries.
class VariableIndex {
public:
    VariableIndex() = default;

    explicit VariableIndex(std::vector<std::string> labels) : labels_(std::move(labels)) {
        for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
            auto [it, inserted] = index_.emplace(labels_[i], i);
            if (!inserted)
                throw Error(ErrorCode::FormatError, "duplicate variable label: " + labels_[i]);
        }
    }

    int size() const { return static_cast<int>(labels_.size()); }
    const std::string& label(int i) const { return labels_.at(static_cast<size_t>(i)); }
    const std::vector<std::string>& labels() const { return labels_; }

    std::optional<int> find(std::string_view label) const {
        auto it = index_.find(label);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const VariableIndex& other) const { return labels_ == other.labels_; }
    bool operator!=(const VariableIndex& other) const { return !(*this == other); }

private:
    std::vector<std::string> labels_;
    std::map<std::string, int, std::less<>> index_;
};

namespace detail {

inline void check_indices(const EdgeSet& edges, int n) {
    for (const auto& [p, c] : edges) {
        if (p < 0 || c < 0 || p >= n || c >= n)
            throw Error(ErrorCode::IndexMismatch, "edge index out of range");
    }
}

}  // namespace detail

// True iff the directed graph has no cycle. Kahn's algorithm.
inline bool is_acyclic(const EdgeSet& edges, int n) {
    detail::check_indices(edges, n);
    std::vector<int> in_degree(static_cast<size_t>(n), 0);
    std::vector<std::vector<int>> children(static_cast<size_t>(n));
    for (const auto& [p, c] : edges) {
        if (p == c) return false;
        ++in_degree[static_cast<size_t>(c)];
        children[static_cast<size_t>(p)].push_back(c);
    }
    std::vector<int> queue;
    for (int i = 0; i < n; ++i)
        if (in_degree[static_cast<size_t>(i)] == 0) queue.push_back(i);
    int removed = 0;
    while (!queue.empty()) {
        int x = queue.back();
        queue.pop_back();
        ++removed;
        for (int c : children[static_cast<size_t>(x)])
            if (--in_degree[static_cast<size_t>(c)] == 0) queue.push_back(c);
    }
    return removed == n;
}

// Lexicographically smallest topological order, or nullopt on a cycle.
inline std::optional<std::vector<int>> topological_order(const EdgeSet& edges, int n) {
    detail::check_indices(edges, n);
    std::vector<int> in_degree(static_cast<size_t>(n), 0);
    std::vector<std::vector<int>> children(static_cast<size_t>(n));
    for (const auto& [p, c] : edges) {
        ++in_degree[static_cast<size_t>(c)];
        children[static_cast<size_t>(p)].push_back(c);
    }
    std::set<int> ready;
    for (int i = 0; i < n; ++i)
        if (in_degree[static_cast<size_t>(i)] == 0) ready.insert(i);
    std::vector<int> order;
    order.reserve(static_cast<size_t>(n));
    while (!ready.empty()) {
        int x = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(x);
        for (int c : children[static_cast<size_t>(x)])
            if (--in_degree[static_cast<size_t>(c)] == 0) ready.insert(c);
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
}

// (X,Y) is in the result iff a directed path X->...->Y exists. Input must be
// acyclic.
inline EdgeSet transitive_closure(const EdgeSet& edges, int n) {
    auto order = topological_order(edges, n);
    if (!order) throw Error(ErrorCode::CyclicInput, "transitive_closure: input has a directed cycle");
    std::vector<std::vector<bool>> reach(static_cast<size_t>(n),
                                         std::vector<bool>(static_cast<size_t>(n), false));
    std::vector<std::vector<int>> children(static_cast<size_t>(n));
    for (const auto& [p, c] : edges) children[static_cast<size_t>(p)].push_back(c);
    for (auto it = order->rbegin(); it != order->rend(); ++it) {
        int x = *it;
        for (int c : children[static_cast<size_t>(x)]) {
            reach[static_cast<size_t>(x)][static_cast<size_t>(c)] = true;
            for (int j = 0; j < n; ++j)
                if (reach[static_cast<size_t>(c)][static_cast<size_t>(j)])
                    reach[static_cast<size_t>(x)][static_cast<size_t>(j)] = true;
        }
    }
    EdgeSet closure;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (reach[static_cast<size_t>(i)][static_cast<size_t>(j)]) closure.emplace(i, j);
    return closure;
}

// Immutable directed acyclic graph over a VariableIndex.
class Dag {
public:
    Dag() = default;

    Dag(VariableIndex variables, EdgeSet edges)
        : variables_(std::move(variables)), edges_(std::move(edges)) {
        for (const auto& [p, c] : edges_)
            if (p == c) throw Error(ErrorCode::CyclicInput, "Dag: self-loop");
        if (!is_acyclic(edges_, variables_.size()))
            throw Error(ErrorCode::CyclicInput, "Dag: edge set has a directed cycle");
    }

    const VariableIndex& variables() const { return variables_; }
    int num_variables() const { return variables_.size(); }
    const EdgeSet& edges() const { return edges_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    bool has_edge(int parent, int child) const { return edges_.count({parent, child}) > 0; }

    std::vector<int> parents_of(int child) const {
        std::vector<int> out;
        for (const auto& [p, c] : edges_)
            if (c == child) out.push_back(p);
        return out;
    }

    std::vector<int> children_of(int parent) const {
        std::vector<int> out;
        auto it = edges_.lower_bound({parent, 0});
        for (; it != edges_.end() && it->first == parent; ++it) out.push_back(it->second);
        return out;
    }

    bool operator==(const Dag& other) const {
        return variables_ == other.variables_ && edges_ == other.edges_;
    }

private:
    VariableIndex variables_;
    EdgeSet edges_;
};

// Partially directed graph: a set of directed edges plus a set of undirected
// edges stored as (low index, high index). Doubles as a CPDAG when completed.
class Pdag {
public:
    Pdag() = default;

    Pdag(VariableIndex variables, EdgeSet directed, EdgeSet undirected)
        : variables_(std::move(variables)), directed_(std::move(directed)) {
        for (const auto& [a, b] : undirected) {
            if (a == b) throw Error(ErrorCode::CyclicInput, "Pdag: self-loop");
            undirected_.emplace(std::min(a, b), std::max(a, b));
        }
        detail::check_indices(directed_, variables_.size());
        detail::check_indices(undirected_, variables_.size());
        for (const auto& [p, c] : directed_) {
            if (p == c) throw Error(ErrorCode::CyclicInput, "Pdag: self-loop");
            if (directed_.count({c, p}))
                throw Error(ErrorCode::FormatError, "Pdag: edge directed both ways");
            if (undirected_.count({std::min(p, c), std::max(p, c)}))
                throw Error(ErrorCode::FormatError, "Pdag: edge both directed and undirected");
        }
    }

    static Pdag from_dag(const Dag& dag) {
        return Pdag(dag.variables(), dag.edges(), {});
    }

    const VariableIndex& variables() const { return variables_; }
    int num_variables() const { return variables_.size(); }
    const EdgeSet& directed() const { return directed_; }
    const EdgeSet& undirected() const { return undirected_; }
    int num_edges() const { return static_cast<int>(directed_.size() + undirected_.size()); }

    bool has_directed(int parent, int child) const { return directed_.count({parent, child}) > 0; }
    bool has_undirected(int a, int b) const {
        return undirected_.count({std::min(a, b), std::max(a, b)}) > 0;
    }
    bool adjacent(int a, int b) const {
        return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b);
    }

    bool fully_directed() const { return undirected_.empty(); }

    bool operator==(const Pdag& other) const {
        return variables_ == other.variables_ && directed_ == other.directed_ &&
               undirected_ == other.undirected_;
    }

private:
    VariableIndex variables_;
    EdgeSet directed_;
    EdgeSet undirected_;  // normalized (low, high)
};

namespace detail {

// Mutable orientation state used by Meek propagation and by PC-Stable.
struct OrientationState {
    int n = 0;
    EdgeSet directed;
    EdgeSet undirected;  // normalized (low, high)
    const EdgeSet* forbidden = nullptr;  // pairs that must never become directed

    bool has_directed(int a, int b) const { return directed.count({a, b}) > 0; }
    bool has_undirected(int a, int b) const {
        return undirected.count({std::min(a, b), std::max(a, b)}) > 0;
    }
    bool adjacent(int a, int b) const {
        return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b);
    }
    bool is_forbidden(int a, int b) const {
        return forbidden != nullptr && forbidden->count({a, b}) > 0;
    }

    // Turns the undirected edge a-b into a->b. Returns false if the edge is
    // no longer undirected or the orientation is forbidden.
    bool orient(int a, int b) {
        if (!has_undirected(a, b) || is_forbidden(a, b)) return false;
        undirected.erase({std::min(a, b), std::max(a, b)});
        directed.emplace(a, b);
        return true;
    }
};

// Meek's orientation rules 1-4, applied to fixpoint. Orientations that land
// in the forbidden set are skipped.
inline void meek_closure(OrientationState& g) {
    bool changed = true;
    while (changed) {
        changed = false;
        // Rule 1: a->b, b-c, a and c non-adjacent  =>  b->c.
        for (const auto& [a, b] : EdgeSet(g.directed)) {
            for (int c = 0; c < g.n; ++c) {
                if (c == a || c == b) continue;
                if (g.has_undirected(b, c) && !g.adjacent(a, c)) changed |= g.orient(b, c);
            }
        }
        // Rule 2: a->c->b with a-b  =>  a->b.
        for (const auto& [lo, hi] : EdgeSet(g.undirected)) {
            for (auto [a, b] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
                for (int c = 0; c < g.n; ++c) {
                    if (c == a || c == b) continue;
                    if (g.has_directed(a, c) && g.has_directed(c, b)) {
                        changed |= g.orient(a, b);
                        break;
                    }
                }
            }
        }
        // Rule 3: a-b with c->b, d->b, a-c, a-d, c and d non-adjacent  =>  a->b.
        for (const auto& [lo, hi] : EdgeSet(g.undirected)) {
            for (auto [a, b] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
                bool done = false;
                for (int c = 0; c < g.n && !done; ++c) {
                    if (c == a || c == b || !g.has_directed(c, b) || !g.has_undirected(a, c))
                        continue;
                    for (int d = c + 1; d < g.n && !done; ++d) {
                        if (d == a || d == b || !g.has_directed(d, b) || !g.has_undirected(a, d))
                            continue;
                        if (!g.adjacent(c, d)) done = changed = g.orient(a, b);
                    }
                }
            }
        }
        // Rule 4: a-b with a-c, c->d, d->b, c and b non-adjacent, a and d
        // adjacent  =>  a->b. (Reversing to b->a would force either the
        // directed cycle c->d->b->a->c or the new collider b->a<-c.)
        for (const auto& [lo, hi] : EdgeSet(g.undirected)) {
            for (auto [a, b] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
                bool done = false;
                for (int c = 0; c < g.n && !done; ++c) {
                    if (c == a || c == b || !g.has_undirected(a, c) || g.adjacent(c, b)) continue;
                    for (int d = 0; d < g.n && !done; ++d) {
                        if (d == a || d == b || d == c) continue;
                        if (g.has_directed(c, d) && g.has_directed(d, b) && g.adjacent(a, d))
                            done = changed = g.orient(a, b);
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Completed pattern (CPDAG) of the DAG's Markov equivalence class: skeleton
// kept, v-structures directed, remaining compelled edges directed by Meek
// closure, reversible edges undirected.
inline Pdag dag_to_cpdag(const Dag& dag) {
    const int n = dag.num_variables();
    detail::OrientationState g;
    g.n = n;
    // Undirected skeleton to start.
    for (const auto& [p, c] : dag.edges()) g.undirected.emplace(std::min(p, c), std::max(p, c));
    // Direct the v-structures x->z<-y with x, y non-adjacent.
    for (int z = 0; z < n; ++z) {
        auto parents = dag.parents_of(z);
        for (size_t i = 0; i < parents.size(); ++i) {
            for (size_t j = i + 1; j < parents.size(); ++j) {
                int x = parents[i], y = parents[j];
                if (dag.has_edge(x, y) || dag.has_edge(y, x)) continue;
                g.orient(x, z);
                g.orient(y, z);
            }
        }
    }
    detail::meek_closure(g);
    // Compelled orientations agree with the input DAG by construction.
    return Pdag(dag.variables(), std::move(g.directed), std::move(g.undirected));
}

// Consistent extension of a PDAG to a DAG (Dor-Tarsi): keeps every directed
// edge and the skeleton, and introduces no new v-structure. Returns nullopt
// when no consistent extension exists.
//
// Among valid sink candidates the highest index is removed first, which
// orients free undirected edges from lower to higher index; together with
// ordered edge sets this makes the result the lexicographically smallest
// consistent extension produced by the sink elimination scheme.
inline std::optional<Dag> extend_to_dag(const Pdag& pdag) {
    const int n = pdag.num_variables();
    std::vector<std::set<int>> out(static_cast<size_t>(n)), in(static_cast<size_t>(n)),
        und(static_cast<size_t>(n));
    for (const auto& [p, c] : pdag.directed()) {
        out[static_cast<size_t>(p)].insert(c);
        in[static_cast<size_t>(c)].insert(p);
    }
    for (const auto& [a, b] : pdag.undirected()) {
        und[static_cast<size_t>(a)].insert(b);
        und[static_cast<size_t>(b)].insert(a);
    }
    auto adjacent = [&](int a, int b) {
        return out[static_cast<size_t>(a)].count(b) || in[static_cast<size_t>(a)].count(b) ||
               und[static_cast<size_t>(a)].count(b);
    };

    EdgeSet result = pdag.directed();
    std::vector<bool> removed(static_cast<size_t>(n), false);
    for (int step = 0; step < n; ++step) {
        int chosen = -1;
        for (int x = n - 1; x >= 0; --x) {
            if (removed[static_cast<size_t>(x)]) continue;
            if (!out[static_cast<size_t>(x)].empty()) continue;  // must be a sink
            // Every undirected neighbour must be adjacent to all other
            // vertices adjacent to x.
            bool ok = true;
            for (int y : und[static_cast<size_t>(x)]) {
                for (int z : und[static_cast<size_t>(x)])
                    if (z != y && !adjacent(y, z)) { ok = false; break; }
                if (!ok) break;
                for (int z : in[static_cast<size_t>(x)])
                    if (z != y && !adjacent(y, z)) { ok = false; break; }
                if (!ok) break;
            }
            if (ok) { chosen = x; break; }
        }
        if (chosen == -1) return std::nullopt;  // not extensible
        for (int y : std::set<int>(und[static_cast<size_t>(chosen)])) {
            result.emplace(y, chosen);
            und[static_cast<size_t>(y)].erase(chosen);
        }
        und[static_cast<size_t>(chosen)].clear();
        for (int y : std::set<int>(in[static_cast<size_t>(chosen)])) {
            out[static_cast<size_t>(y)].erase(chosen);
        }
        in[static_cast<size_t>(chosen)].clear();
        removed[static_cast<size_t>(chosen)] = true;
    }
    return Dag(pdag.variables(), std::move(result));
}

}  // namespace causalkit
