#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "causalkit/graph.hpp"

namespace causalkit {

// CPDAG-level confusion counts over unordered variable pairs. Pairs that are
// adjacent in both graphs but carry a different mark (orientation mismatch,
// or directed vs undirected) earn partial credit of 0.5 to each of tp, fp and
// fn, which preserves the marginal identities tp+fn = a and tp+fp = learnt
// edge count.
struct ConfusionCounts {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    double tn = 0.0;
    double reference_edges = 0.0;      // a
    double reference_independencies = 0.0;  // i = n(n-1)/2 - a
};

namespace detail {

// Pair mark: 0 absent, 1 undirected, 2 directed low->high, 3 directed high->low.
inline int pair_mark(const Pdag& g, int lo, int hi) {
    if (g.has_undirected(lo, hi)) return 1;
    if (g.has_directed(lo, hi)) return 2;
    if (g.has_directed(hi, lo)) return 3;
    return 0;
}

}  // namespace detail

inline ConfusionCounts confusion(const Pdag& learnt, const Pdag& reference) {
    if (learnt.variables() != reference.variables())
        throw Error(ErrorCode::IndexMismatch, "confusion: variable sets differ");
    const int n = learnt.num_variables();
    ConfusionCounts c;
    c.reference_edges = static_cast<double>(reference.num_edges());
    c.reference_independencies =
        static_cast<double>(n) * (n - 1) / 2.0 - c.reference_edges;
    for (int lo = 0; lo < n; ++lo) {
        for (int hi = lo + 1; hi < n; ++hi) {
            const int ml = detail::pair_mark(learnt, lo, hi);
            const int mr = detail::pair_mark(reference, lo, hi);
            if (ml == 0 && mr == 0) c.tn += 1.0;
            else if (mr == 0) c.fp += 1.0;
            else if (ml == 0) c.fn += 1.0;
            else if (ml == mr) c.tp += 1.0;
            else { c.tp += 0.5; c.fp += 0.5; c.fn += 0.5; }
        }
    }
    return c;
}

// F1 over CPDAG pairs; 1 when both graphs are empty.
inline double f1(const ConfusionCounts& c) {
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    if (denom == 0.0) return 1.0;
    return 2.0 * c.tp / denom;
}

// Balanced scoring function. A zero normalizer (empty or complete reference)
// makes its half vacuous: with a = 0 both tp and fn are 0, so the edge half
// contributes its perfect value 1, and likewise for i = 0. This keeps
// bsf(x, x) = 1 for every reference.
inline double bsf(const ConfusionCounts& c) {
    const double edge_half =
        c.reference_edges > 0.0 ? (c.tp - c.fn) / c.reference_edges : 1.0;
    const double independency_half =
        c.reference_independencies > 0.0
            ? (c.tn - c.fp) / c.reference_independencies
            : 1.0;
    return 0.5 * (edge_half + independency_half);
}

// Structural Hamming distance: unordered pairs whose mark differs in any way.
inline long long shd(const Pdag& learnt, const Pdag& reference) {
    if (learnt.variables() != reference.variables())
        throw Error(ErrorCode::IndexMismatch, "shd: variable sets differ");
    const int n = learnt.num_variables();
    long long distance = 0;
    for (int lo = 0; lo < n; ++lo)
        for (int hi = lo + 1; hi < n; ++hi)
            if (detail::pair_mark(learnt, lo, hi) != detail::pair_mark(reference, lo, hi))
                ++distance;
    return distance;
}

enum class MetricKind { F1, Bsf, Shd, Bic };

// Relative change in percent, signed so that positive is an improvement for
// the graphical metrics and an increase for BIC.
inline double relative_change(double with_constraints, double without_constraints,
                              MetricKind kind) {
    constexpr double kEpsilon = 1e-9;
    switch (kind) {
        case MetricKind::F1:
        case MetricKind::Bsf:
            return 100.0 * (with_constraints - without_constraints) /
                   std::max(std::abs(without_constraints), kEpsilon);
        case MetricKind::Shd:
            return 100.0 * (without_constraints - with_constraints) /
                   std::max(without_constraints, kEpsilon);
        case MetricKind::Bic:
            return 100.0 * (with_constraints - without_constraints) /
                   std::max(std::abs(without_constraints), kEpsilon);
    }
    return 0.0;
}

}  // namespace causalkit
