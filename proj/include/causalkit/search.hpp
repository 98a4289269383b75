#pragma once

#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causalkit/constraints.hpp"
#include "causalkit/dataset.hpp"
#include "causalkit/graph.hpp"
#include "causalkit/scoring.hpp"

namespace causalkit {

struct SearchParams {
    std::optional<int> max_in_degree;
    int tabu_length = 10;
    int tabu_max_worse_moves = 10;
    double alpha = 0.05;
    long long seed = 1;
};

// Per-run diagnostics surfaced in the learner sidecar files.
struct LearnLog {
    long long moves = 0;
    long long ci_tests = 0;
    std::vector<double> score_trace;  // total BIC after each accepted score-based move
    std::vector<std::string> warnings;
};

namespace detail {

constexpr double kScoreEpsilon = 1e-9;
constexpr int kMaxSepsetSize = 3;  // conditioning-set cap for MMHC's selection phase
constexpr long long kMaxGreedyIterations = 100000;

inline void require_consistent(const ConstraintSet& cs, const DiscreteDataset& data) {
    if (cs.num_variables != data.num_variables())
        throw Error(ErrorCode::InconsistentConstraints,
                    "constraint set and dataset variable counts differ");
    auto problems = validate(cs);
    if (!problems.empty()) {
        std::string msg = "inconsistent constraints:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw Error(ErrorCode::InconsistentConstraints, msg);
    }
}

inline bool degenerate_input(const DiscreteDataset& data) {
    return data.num_variables() < 2 || data.num_rows() < 10;
}

// Mutable directed graph used inside the score-based searches.
class DirectedState {
public:
    explicit DirectedState(int n) : n_(n), parents_(static_cast<size_t>(n)),
                                    children_(static_cast<size_t>(n)) {}

    int size() const { return n_; }
    bool has(int p, int c) const { return children_[static_cast<size_t>(p)].count(c) > 0; }
    const std::set<int>& parents(int c) const { return parents_[static_cast<size_t>(c)]; }
    const std::set<int>& children(int p) const { return children_[static_cast<size_t>(p)]; }
    int in_degree(int c) const { return static_cast<int>(parents_[static_cast<size_t>(c)].size()); }

    void add(int p, int c) {
        parents_[static_cast<size_t>(c)].insert(p);
        children_[static_cast<size_t>(p)].insert(c);
    }
    void remove(int p, int c) {
        parents_[static_cast<size_t>(c)].erase(p);
        children_[static_cast<size_t>(p)].erase(c);
    }

    bool path_exists(int from, int to) const {
        if (from == to) return true;
        std::vector<bool> visited(static_cast<size_t>(n_), false);
        std::vector<int> stack{from};
        visited[static_cast<size_t>(from)] = true;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            for (int c : children_[static_cast<size_t>(x)]) {
                if (c == to) return true;
                if (!visited[static_cast<size_t>(c)]) {
                    visited[static_cast<size_t>(c)] = true;
                    stack.push_back(c);
                }
            }
        }
        return false;
    }

    EdgeSet edges() const {
        EdgeSet out;
        for (int p = 0; p < n_; ++p)
            for (int c : children_[static_cast<size_t>(p)]) out.emplace(p, c);
        return out;
    }

private:
    int n_;
    std::vector<std::set<int>> parents_;
    std::vector<std::set<int>> children_;
};

enum class MoveType { Add = 0, Delete = 1, Reverse = 2 };

struct Move {
    MoveType type = MoveType::Add;
    int parent = -1;
    int child = -1;
    double delta = 0.0;

    bool same_action(const Move& o) const {
        return type == o.type && parent == o.parent && child == o.child;
    }
};

inline Move inverse_move(const Move& m) {
    switch (m.type) {
        case MoveType::Add: return {MoveType::Delete, m.parent, m.child, 0.0};
        case MoveType::Delete: return {MoveType::Add, m.parent, m.child, 0.0};
        case MoveType::Reverse: return {MoveType::Reverse, m.child, m.parent, 0.0};
    }
    return m;
}

struct HcContext {
    const CachedScorer* scorer = nullptr;
    const ConstraintSet* cs = nullptr;
    const SearchParams* params = nullptr;
    // When set, only pairs with allowed[a][b] (symmetric) may become adjacent.
    const std::vector<std::vector<bool>>* allowed = nullptr;
};

inline bool pair_allowed(const HcContext& ctx, int a, int b) {
    return ctx.allowed == nullptr || (*ctx.allowed)[static_cast<size_t>(a)][static_cast<size_t>(b)];
}

inline double local_with(const HcContext& ctx, int child, const std::set<int>& parents,
                         int added, int removed) {
    std::vector<int> ps;
    ps.reserve(parents.size() + 1);
    for (int p : parents)
        if (p != removed) ps.push_back(p);
    if (added >= 0) ps.push_back(added);
    return ctx.scorer->local(child, ps);
}

// Best legal move in canonical order (add < delete < reverse, then parent,
// child ascending); on equal deltas the earliest candidate wins. Moves in the
// tabu list are skipped unless they beat the best score seen so far
// (aspiration), which keeps the improving phase identical to plain HC.
inline std::optional<Move> best_move(const DirectedState& g, const HcContext& ctx,
                                     const std::deque<Move>& tabu, double current_total,
                                     double best_total) {
    const int n = g.size();
    const auto& cs = *ctx.cs;
    std::optional<Move> best;

    auto blocked_by_tabu = [&](const Move& m) {
        for (const auto& t : tabu)
            if (t.same_action(m)) return current_total + m.delta <= best_total + kScoreEpsilon;
        return false;
    };
    auto consider = [&](Move m) {
        if (blocked_by_tabu(m)) return;
        if (!best || m.delta > best->delta + kScoreEpsilon) best = m;
    };
    auto within_cap = [&](int child) {
        return !ctx.params->max_in_degree.has_value() ||
               g.in_degree(child) < *ctx.params->max_in_degree;
    };

    for (int p = 0; p < n; ++p) {
        for (int c = 0; c < n; ++c) {
            if (p == c || g.has(p, c) || g.has(c, p)) continue;
            if (cs.forbidden.count({p, c}) || !pair_allowed(ctx, p, c)) continue;
            if (!within_cap(c)) continue;
            if (g.path_exists(c, p)) continue;  // would create a cycle
            const double before = local_with(ctx, c, g.parents(c), -1, -1);
            const double after = local_with(ctx, c, g.parents(c), p, -1);
            consider({MoveType::Add, p, c, after - before});
        }
    }
    for (int p = 0; p < n; ++p) {
        for (int c : g.children(p)) {
            if (cs.required.count({p, c})) continue;
            const double before = local_with(ctx, c, g.parents(c), -1, -1);
            const double after = local_with(ctx, c, g.parents(c), -1, p);
            consider({MoveType::Delete, p, c, after - before});
        }
    }
    for (int p = 0; p < n; ++p) {
        // Copy: the cycle probe below temporarily mutates the child set.
        const std::vector<int> children_of_p(g.children(p).begin(), g.children(p).end());
        for (int c : children_of_p) {
            if (cs.required.count({p, c}) || cs.forbidden.count({c, p})) continue;
            if (!within_cap(p)) continue;
            // Reversing p->c to c->p: a cycle appears iff another p~>c path exists.
            DirectedState& mutable_g = const_cast<DirectedState&>(g);
            mutable_g.remove(p, c);
            const bool cycle = mutable_g.path_exists(p, c);
            mutable_g.add(p, c);
            if (cycle) continue;
            const double delta = (local_with(ctx, c, g.parents(c), -1, p) -
                                  local_with(ctx, c, g.parents(c), -1, -1)) +
                                 (local_with(ctx, p, g.parents(p), c, -1) -
                                  local_with(ctx, p, g.parents(p), -1, -1));
            consider({MoveType::Reverse, p, c, delta});
        }
    }
    return best;
}

inline void apply_move(DirectedState& g, const Move& m) {
    switch (m.type) {
        case MoveType::Add: g.add(m.parent, m.child); break;
        case MoveType::Delete: g.remove(m.parent, m.child); break;
        case MoveType::Reverse:
            g.remove(m.parent, m.child);
            g.add(m.child, m.parent);
            break;
    }
}

inline DirectedState starting_state(const ConstraintSet& cs, int n) {
    DirectedState g(n);
    if (cs.initial.has_value()) {
        for (const auto& [p, c] : cs.initial->edges()) g.add(p, c);
    } else {
        for (const auto& [p, c] : cs.required) g.add(p, c);
    }
    return g;
}

// Shared greedy core. With use_tabu=false this is plain hill climbing; with
// use_tabu=true a bounded number of non-improving escape moves is allowed
// while a FIFO list blocks move reversal, and the best graph seen is kept.
inline Dag greedy_search(const DiscreteDataset& data, const ConstraintSet& cs,
                         const SearchParams& params, bool use_tabu,
                         const std::vector<std::vector<bool>>* allowed, const CachedScorer* scorer,
                         LearnLog* log) {
    require_consistent(cs, data);
    const int n = data.num_variables();
    if (degenerate_input(data)) {
        if (log) log->warnings.push_back("degenerate input: returning the required-edge graph");
        return Dag(data.variables(), cs.required);
    }

    CachedScorer local_scorer{data};
    if (scorer == nullptr) scorer = &local_scorer;
    HcContext ctx{scorer, &cs, &params, allowed};

    DirectedState g = starting_state(cs, n);
    double total = scorer->total(g.edges());
    if (log) log->score_trace.push_back(total);

    EdgeSet best_edges = g.edges();
    double best_total = total;
    std::deque<Move> tabu;
    int worse_moves = 0;
    long long iterations = 0;

    while (true) {
        if (++iterations > kMaxGreedyIterations) {
            if (log) log->warnings.push_back("iteration cap reached; returning best seen");
            break;
        }
        auto move = best_move(g, ctx, tabu, total, best_total);
        if (!move) break;
        const bool improving = move->delta > kScoreEpsilon;
        if (!improving) {
            if (!use_tabu || worse_moves >= params.tabu_max_worse_moves) break;
        }
        apply_move(g, *move);
        total += move->delta;
        if (log) {
            ++log->moves;
            log->score_trace.push_back(total);
        }
        if (total > best_total + kScoreEpsilon) {
            best_total = total;
            best_edges = g.edges();
            worse_moves = 0;
        } else if (!improving) {
            ++worse_moves;  // only non-improving moves consume the escape budget
        }
        if (use_tabu && params.tabu_length > 0) {
            tabu.push_back(inverse_move(*move));
            while (static_cast<int>(tabu.size()) > params.tabu_length) tabu.pop_front();
        }
    }
    return Dag(data.variables(), use_tabu ? best_edges : g.edges());
}

// Lexicographic enumeration of k-subsets of a sorted pool. Calls fn for each
// subset; fn returning true stops the enumeration early.
template <typename Fn>
bool for_each_subset(const std::vector<int>& pool, int k, Fn&& fn) {
    const int m = static_cast<int>(pool.size());
    if (k > m) return false;
    std::vector<int> idx(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
    std::vector<int> subset(static_cast<size_t>(k));
    while (true) {
        for (int i = 0; i < k; ++i) subset[static_cast<size_t>(i)] = pool[static_cast<size_t>(idx[static_cast<size_t>(i)])];
        if (fn(subset)) return true;
        int i = k - 1;
        while (i >= 0 && idx[static_cast<size_t>(i)] == m - k + i) --i;
        if (i < 0) return false;
        ++idx[static_cast<size_t>(i)];
        for (int j = i + 1; j < k; ++j) idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
    }
}

}  // namespace detail

// Greedy add/delete/reverse local search maximizing total BIC. Starts from
// the initial graph when given, else from the required-edge graph. Required
// edges are never deleted or reversed; forbidden pairs are never added.
inline Dag hill_climb(const DiscreteDataset& data, const ConstraintSet& cs,
                      const SearchParams& params, LearnLog* log = nullptr,
                      const CachedScorer* scorer = nullptr) {
    return detail::greedy_search(data, cs, params, /*use_tabu=*/false, nullptr, scorer, log);
}

// Hill climbing with tabu escape: after a local maximum, up to
// tabu_max_worse_moves non-improving moves are taken while a FIFO list of
// length tabu_length blocks move reversal; the best graph seen is returned.
inline Dag tabu(const DiscreteDataset& data, const ConstraintSet& cs, const SearchParams& params,
                LearnLog* log = nullptr, const CachedScorer* scorer = nullptr) {
    return detail::greedy_search(data, cs, params, /*use_tabu=*/true, nullptr, scorer, log);
}

// PC-Stable: order-independent skeleton phase with neighbour sets frozen per
// depth level, v-structure orientation and Meek propagation. Required edges
// are never tested for removal and their orientations are imposed before
// propagation; forbidden orientations are never emitted as directed edges.
inline Pdag pc_stable(const DiscreteDataset& data, const ConstraintSet& cs,
                      const SearchParams& params, LearnLog* log = nullptr,
                      const CachedCiTester* tester = nullptr) {
    detail::require_consistent(cs, data);
    if (cs.initial.has_value())
        throw Error(ErrorCode::UnsupportedConstraint,
                    "pc_stable does not support initial-graph constraints");
    const int n = data.num_variables();
    if (detail::degenerate_input(data)) {
        if (log) log->warnings.push_back("degenerate input: returning the required-edge graph");
        return Pdag(data.variables(), cs.required, {});
    }

    CachedCiTester local_tester{data};
    if (tester == nullptr) tester = &local_tester;

    auto protected_pair = [&](int a, int b) {
        return cs.required.count({a, b}) > 0 || cs.required.count({b, a}) > 0;
    };

    std::vector<std::set<int>> adj(static_cast<size_t>(n));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b) adj[static_cast<size_t>(a)].insert(b);
    std::map<std::pair<int, int>, std::vector<int>> sepsets;

    for (int level = 0;; ++level) {
        bool any_testable = false;
        const std::vector<std::set<int>> frozen = adj;  // PC-Stable: freeze per level
        for (int x = 0; x < n; ++x) {
            for (int y : std::set<int>(adj[static_cast<size_t>(x)])) {
                if (y < x || !adj[static_cast<size_t>(x)].count(y)) continue;
                if (protected_pair(x, y)) continue;
                bool removed = false;
                for (int side = 0; side < 2 && !removed; ++side) {
                    const int u = side == 0 ? x : y;
                    const int v = side == 0 ? y : x;
                    std::vector<int> pool;
                    for (int w : frozen[static_cast<size_t>(u)])
                        if (w != v) pool.push_back(w);
                    if (static_cast<int>(pool.size()) < level) continue;
                    any_testable = any_testable || static_cast<int>(pool.size()) > level;
                    detail::for_each_subset(pool, level, [&](const std::vector<int>& s) {
                        if (log) ++log->ci_tests;
                        if (tester->test(x, y, s).p_value > params.alpha) {
                            adj[static_cast<size_t>(x)].erase(y);
                            adj[static_cast<size_t>(y)].erase(x);
                            sepsets[{x, y}] = s;
                            removed = true;
                        }
                        return removed;
                    });
                }
            }
        }
        if (!any_testable) break;
    }

    detail::OrientationState g;
    g.n = n;
    g.forbidden = &cs.forbidden;
    for (int a = 0; a < n; ++a)
        for (int b : adj[static_cast<size_t>(a)])
            if (a < b) g.undirected.emplace(a, b);

    // Required orientations come first, then v-structures, then Meek closure.
    for (const auto& [p, c] : cs.required) g.orient(p, c);
    for (int z = 0; z < n; ++z) {
        std::vector<int> nbrs(adj[static_cast<size_t>(z)].begin(), adj[static_cast<size_t>(z)].end());
        for (size_t i = 0; i < nbrs.size(); ++i) {
            for (size_t j = i + 1; j < nbrs.size(); ++j) {
                const int x = nbrs[i], y = nbrs[j];
                if (adj[static_cast<size_t>(x)].count(y)) continue;  // shielded
                auto it = sepsets.find({std::min(x, y), std::max(x, y)});
                if (it != sepsets.end() &&
                    std::find(it->second.begin(), it->second.end(), z) != it->second.end())
                    continue;  // z separates x and y: not a collider
                // Orient both arms into z unless either arm is already
                // directed away from z or forbidden.
                if (g.has_directed(z, x) || g.has_directed(z, y)) continue;
                if (g.is_forbidden(x, z) || g.is_forbidden(y, z)) continue;
                g.orient(x, z);
                g.orient(y, z);
            }
        }
    }
    detail::meek_closure(g);

    // Constraint interactions can in principle leave a directed cycle; demote
    // non-required directed edges until the directed part is acyclic.
    while (!is_acyclic(g.directed, n)) {
        Edge victim{-1, -1};
        for (const auto& e : g.directed) {
            if (cs.required.count(e)) continue;
            // e = (p, c) lies on a cycle iff c ~> p holds without e.
            detail::DirectedState probe(n);
            for (const auto& [p, c] : g.directed)
                if (Edge{p, c} != e) probe.add(p, c);
            if (probe.path_exists(e.second, e.first)) { victim = e; break; }
        }
        if (victim.first < 0) break;  // only required edges remain on cycles
        g.directed.erase(victim);
        g.undirected.emplace(std::min(victim.first, victim.second),
                             std::max(victim.first, victim.second));
    }

    return Pdag(data.variables(), std::move(g.directed), std::move(g.undirected));
}

// Max-min hill climbing: per-variable candidate parent-children selection via
// G^2 tests, then hill climbing restricted to the selected adjacencies plus
// the required edges.
inline Dag mmhc(const DiscreteDataset& data, const ConstraintSet& cs, const SearchParams& params,
                LearnLog* log = nullptr, const CachedScorer* scorer = nullptr,
                const CachedCiTester* tester = nullptr) {
    detail::require_consistent(cs, data);
    if (cs.initial.has_value())
        throw Error(ErrorCode::UnsupportedConstraint,
                    "mmhc does not support initial-graph constraints");
    const int n = data.num_variables();
    if (detail::degenerate_input(data)) {
        if (log) log->warnings.push_back("degenerate input: returning the required-edge graph");
        return Dag(data.variables(), cs.required);
    }

    CachedCiTester local_tester{data};
    if (tester == nullptr) tester = &local_tester;

    auto max_p_over_subsets = [&](int x, int t, const std::vector<int>& cpc) {
        double pmax = 0.0;
        const int cap = std::min(detail::kMaxSepsetSize, static_cast<int>(cpc.size()));
        for (int k = 0; k <= cap; ++k) {
            detail::for_each_subset(cpc, k, [&](const std::vector<int>& s) {
                if (log) ++log->ci_tests;
                pmax = std::max(pmax, tester->test(x, t, s).p_value);
                return pmax > params.alpha;  // already separated, stop early
            });
            if (pmax > params.alpha) break;
        }
        return pmax;
    };

    // Phase 1: candidate parent-children set per target.
    std::vector<std::set<int>> cpc(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
        std::vector<int> selected;
        std::set<int> excluded{t};
        while (true) {
            int best = -1;
            double best_pmax = std::numeric_limits<double>::infinity();
            for (int x = 0; x < n; ++x) {
                if (excluded.count(x) ||
                    std::find(selected.begin(), selected.end(), x) != selected.end())
                    continue;
                const double pmax = max_p_over_subsets(x, t, selected);
                if (pmax > params.alpha) {
                    excluded.insert(x);  // separated by a subset of the current CPC
                    continue;
                }
                if (pmax < best_pmax) {  // strict: ties keep the lowest index
                    best = x;
                    best_pmax = pmax;
                }
            }
            if (best == -1) break;
            selected.push_back(best);
            std::sort(selected.begin(), selected.end());
        }
        // Backward pass: drop members separated given the rest of the CPC.
        bool changed = true;
        while (changed) {
            changed = false;
            for (int x : std::vector<int>(selected)) {
                std::vector<int> rest;
                for (int w : selected)
                    if (w != x) rest.push_back(w);
                if (max_p_over_subsets(x, t, rest) > params.alpha) {
                    selected.erase(std::find(selected.begin(), selected.end(), x));
                    changed = true;
                }
            }
        }
        cpc[static_cast<size_t>(t)] = std::set<int>(selected.begin(), selected.end());
    }

    // Symmetry correction plus forced inclusion of required endpoints.
    std::vector<std::vector<bool>> allowed(static_cast<size_t>(n),
                                           std::vector<bool>(static_cast<size_t>(n), false));
    for (int a = 0; a < n; ++a)
        for (int b : cpc[static_cast<size_t>(a)])
            if (cpc[static_cast<size_t>(b)].count(a)) {
                allowed[static_cast<size_t>(a)][static_cast<size_t>(b)] = true;
                allowed[static_cast<size_t>(b)][static_cast<size_t>(a)] = true;
            }
    for (const auto& [p, c] : cs.required) {
        allowed[static_cast<size_t>(p)][static_cast<size_t>(c)] = true;
        allowed[static_cast<size_t>(c)][static_cast<size_t>(p)] = true;
    }

    return detail::greedy_search(data, cs, params, /*use_tabu=*/false, &allowed, scorer, log);
}

}  // namespace causalkit
