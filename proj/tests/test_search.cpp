#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "causalkit/metrics.hpp"
#include "causalkit/scoring.hpp"
#include "causalkit/search.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace causalkit;

namespace {

ConstraintSet no_constraints(int n) {
    ConstraintSet cs;
    cs.num_variables = n;
    return cs;
}

DiscreteDataset independent_coins(int n, long long rows, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> data;
    for (long long i = 0; i < rows; ++i) {
        std::vector<int> row;
        for (int j = 0; j < n; ++j) row.push_back(static_cast<int>(rng() % 2));
        data.push_back(std::move(row));
    }
    return DiscreteDataset::from_state_rows(synthetic::numbered_labels(n), std::move(data),
                                            std::vector<int>(static_cast<size_t>(n), 2));
}

// Random learning problem for constraint-satisfaction fuzzing.
struct FuzzProblem {
    DiscreteDataset data;
    ConstraintSet cs;
};

FuzzProblem fuzz_problem(uint64_t seed, bool with_initial) {
    std::mt19937_64 rng(seed);
    const int n = 3 + static_cast<int>(rng() % 4);
    std::vector<int> cards;
    for (int i = 0; i < n; ++i) cards.push_back(2 + static_cast<int>(rng() % 2));
    auto bn = synthetic::random_bn(n, synthetic::random_dag_edges(n, n, rng), cards, rng, 0.8);
    FuzzProblem fp{synthetic::sample(bn, 60 + static_cast<long long>(rng() % 200), rng),
                   no_constraints(n)};

    fp.cs.required = synthetic::random_dag_edges(n, static_cast<int>(rng() % 3), rng);
    if (rng() % 2) {
        fp.cs.forbidden = derive_temporal(fp.cs.required, n);
    } else {
        for (int trial = 0; trial < 4; ++trial) {
            const int a = static_cast<int>(rng() % n);
            const int b = static_cast<int>(rng() % n);
            if (a != b && !fp.cs.required.count({a, b})) fp.cs.forbidden.emplace(a, b);
        }
    }
    if (with_initial) {
        EdgeSet edges = fp.cs.required;
        for (int trial = 0; trial < 3; ++trial) {
            const int a = static_cast<int>(rng() % n);
            const int b = static_cast<int>(rng() % n);
            if (a == b || fp.cs.forbidden.count({a, b})) continue;
            edges.emplace(a, b);
            if (!is_acyclic(edges, n)) edges.erase({a, b});
        }
        fp.cs.initial = Dag(synthetic::numbered_labels(n), edges);
    }
    if (!validate(fp.cs).empty()) return fuzz_problem(seed + 7919, with_initial);
    return fp;
}

void check_satisfies(const EdgeSet& directed, const ConstraintSet& cs, int n) {
    for (const auto& e : cs.required) CHECK(directed.count(e) == 1);
    for (const auto& e : directed) CHECK(cs.forbidden.count(e) == 0);
    CHECK(is_acyclic(directed, n));
}

}  // namespace

TEST_CASE("hill climbing leaves independent coins unconnected") {
    const auto d = independent_coins(2, 5000, 113);
    // The stated oracle: every single-edge delta is negative at this N.
    CHECK(bic_local(d, 1, {0}) - bic_local(d, 1, {}) < 0);
    CHECK(bic_local(d, 0, {1}) - bic_local(d, 0, {}) < 0);
    const auto g = hill_climb(d, no_constraints(2), SearchParams{});
    CHECK(g.edges().empty());
}

TEST_CASE("hill climbing keeps required edges") {
    const auto d = independent_coins(3, 500, 127);
    ConstraintSet cs = no_constraints(3);
    cs.required = {{0, 1}};
    const auto g = hill_climb(d, cs, SearchParams{});
    CHECK(g.has_edge(0, 1));
}

TEST_CASE("hill climbing recovers a strong binary chain") {
    auto bn = synthetic::binary_chain(3, 0.9);
    const Pdag truth = dag_to_cpdag(Dag(bn.variables, bn.edges));
    int recovered = 0;
    for (int seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(1000 + static_cast<uint64_t>(seed));
        const auto d = synthetic::sample(bn, 10000, rng);
        const auto g = hill_climb(d, no_constraints(3), SearchParams{});
        if (dag_to_cpdag(g) == truth) ++recovered;
    }
    CHECK(recovered >= 4);
}

TEST_CASE("hill climbing score trace is monotone") {
    std::mt19937_64 rng(131);
    auto bn = synthetic::random_bn(5, synthetic::random_dag_edges(5, 6, rng), {2, 2, 2, 2, 2}, rng);
    const auto d = synthetic::sample(bn, 800, rng);
    LearnLog log;
    hill_climb(d, no_constraints(5), SearchParams{}, &log);
    for (size_t i = 1; i < log.score_trace.size(); ++i)
        CHECK(log.score_trace[i] > log.score_trace[i - 1]);
}

TEST_CASE("degenerate inputs return the required graph with a warning") {
    const auto d = independent_coins(3, 5, 137);  // N < 10
    ConstraintSet cs = no_constraints(3);
    cs.required = {{2, 0}};
    LearnLog log;
    const auto g = hill_climb(d, cs, SearchParams{}, &log);
    CHECK(g.edges() == cs.required);
    CHECK_FALSE(log.warnings.empty());

    LearnLog plog;
    const auto p = pc_stable(d, cs, SearchParams{}, &plog);
    CHECK(p.directed() == cs.required);
    CHECK_FALSE(plog.warnings.empty());
}

TEST_CASE("inconsistent constraints are rejected up front") {
    const auto d = independent_coins(2, 100, 139);
    ConstraintSet cs = no_constraints(2);
    cs.required = {{0, 1}};
    cs.forbidden = {{0, 1}};
    CHECK_THROWS_AS(hill_climb(d, cs, SearchParams{}), Error);
    CHECK_THROWS_AS(tabu(d, cs, SearchParams{}), Error);
    CHECK_THROWS_AS(pc_stable(d, cs, SearchParams{}), Error);
    CHECK_THROWS_AS(mmhc(d, cs, SearchParams{}), Error);
}

TEST_CASE("tabu with zero lengths degenerates to hill climbing") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto fp = fuzz_problem(300 + seed, false);
        SearchParams p;
        p.tabu_length = 0;
        p.tabu_max_worse_moves = 0;
        const auto a = hill_climb(fp.data, fp.cs, p);
        const auto b = tabu(fp.data, fp.cs, p);
        CHECK(a.edges() == b.edges());
    }
}

TEST_CASE("tabu never scores below hill climbing") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto fp = fuzz_problem(500 + seed, false);
        const CachedScorer scorer(fp.data);
        SearchParams p;
        const double hc_score = scorer.total(hill_climb(fp.data, fp.cs, p, nullptr, &scorer));
        const double tabu_score = scorer.total(tabu(fp.data, fp.cs, p, nullptr, &scorer));
        CHECK(tabu_score >= hc_score - 1e-9);
    }
}

TEST_CASE("tabu keeps required edges") {
    const auto d = independent_coins(3, 500, 149);
    ConstraintSet cs = no_constraints(3);
    cs.required = {{1, 2}};
    CHECK(tabu(d, cs, SearchParams{}).has_edge(1, 2));
}

TEST_CASE("pc_stable orients a strong collider") {
    auto bn = synthetic::binary_collider();
    int oriented = 0;
    for (int seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(2000 + static_cast<uint64_t>(seed));
        const auto d = synthetic::sample(bn, 10000, rng);
        const auto p = pc_stable(d, no_constraints(3), SearchParams{});
        if (p.has_directed(0, 2) && p.has_directed(1, 2) && !p.adjacent(0, 1)) ++oriented;
    }
    CHECK(oriented >= 4);
}

TEST_CASE("pc_stable leaves independent variables empty") {
    SearchParams p;
    p.alpha = 0.01;
    int empty = 0;
    for (int seed = 0; seed < 5; ++seed) {
        const auto d = independent_coins(4, 5000, 3000 + static_cast<uint64_t>(seed));
        const auto g = pc_stable(d, no_constraints(4), p);
        if (g.num_edges() == 0) ++empty;
    }
    CHECK(empty >= 4);
}

TEST_CASE("pc_stable imposes required orientations") {
    auto bn = synthetic::binary_chain(3, 0.9);
    std::mt19937_64 rng(151);
    const auto d = synthetic::sample(bn, 5000, rng);
    ConstraintSet cs = no_constraints(3);
    cs.required = {{0, 1}};
    const auto p = pc_stable(d, cs, SearchParams{});
    CHECK(p.has_directed(0, 1));
}

TEST_CASE("pc_stable respects forbidden orientations") {
    auto bn = synthetic::binary_collider();
    std::mt19937_64 rng(157);
    const auto d = synthetic::sample(bn, 10000, rng);
    ConstraintSet cs = no_constraints(3);
    cs.forbidden = {{0, 2}};
    const auto p = pc_stable(d, cs, SearchParams{});
    CHECK_FALSE(p.has_directed(0, 2));
}

TEST_CASE("pc_stable rejects initial-graph constraints") {
    const auto d = independent_coins(3, 200, 163);
    ConstraintSet cs = no_constraints(3);
    cs.initial = Dag(synthetic::numbered_labels(3), {});
    try {
        pc_stable(d, cs, SearchParams{});
        FAIL("expected UnsupportedConstraint");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedConstraint);
    }
}

TEST_CASE("pc_stable is invariant under column permutations") {
    std::mt19937_64 rng(167);
    auto bn = synthetic::faithful_five();
    const auto d = synthetic::sample(bn, 4000, rng);
    const auto base = pc_stable(d, no_constraints(5), SearchParams{});

    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> perm{0, 1, 2, 3, 4};
        std::shuffle(perm.begin(), perm.end(), rng);
        // Permuted copy of the dataset: column j of the copy is perm[j].
        std::vector<std::vector<int>> rows;
        std::vector<int> cards;
        std::vector<std::string> labels;
        for (int j = 0; j < 5; ++j) {
            cards.push_back(2);
            labels.push_back("P" + std::to_string(j));
        }
        for (long long i = 0; i < d.num_rows(); ++i) {
            std::vector<int> row;
            for (int j = 0; j < 5; ++j) row.push_back(d.value(i, perm[static_cast<size_t>(j)]));
            rows.push_back(std::move(row));
        }
        const auto permuted = DiscreteDataset::from_state_rows(VariableIndex(labels),
                                                               std::move(rows), cards);
        const auto got = pc_stable(permuted, no_constraints(5), SearchParams{});
        // Map back: column j in the permuted data is original perm[j].
        EdgeSet directed, undirected;
        for (const auto& [p, c] : got.directed())
            directed.emplace(perm[static_cast<size_t>(p)], perm[static_cast<size_t>(c)]);
        for (const auto& [a, b] : got.undirected())
            undirected.emplace(std::min(perm[static_cast<size_t>(a)], perm[static_cast<size_t>(b)]),
                               std::max(perm[static_cast<size_t>(a)], perm[static_cast<size_t>(b)]));
        CHECK(directed == base.directed());
        CHECK(undirected == base.undirected());
    }
}

TEST_CASE("mmhc leaves independent variables empty and honors required edges") {
    const auto d = independent_coins(4, 3000, 173);
    CHECK(mmhc(d, no_constraints(4), SearchParams{}).edges().empty());

    ConstraintSet cs = no_constraints(4);
    cs.required = {{0, 3}};
    CHECK(mmhc(d, cs, SearchParams{}).has_edge(0, 3));  // forced despite pruning
}

TEST_CASE("mmhc recovers a strong binary chain") {
    auto bn = synthetic::binary_chain(3, 0.9);
    const Pdag truth = dag_to_cpdag(Dag(bn.variables, bn.edges));
    int recovered = 0;
    for (int seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(4000 + static_cast<uint64_t>(seed));
        const auto d = synthetic::sample(bn, 10000, rng);
        if (dag_to_cpdag(mmhc(d, no_constraints(3), SearchParams{})) == truth) ++recovered;
    }
    CHECK(recovered >= 4);
}

TEST_CASE("mmhc rejects initial-graph constraints") {
    const auto d = independent_coins(3, 200, 179);
    ConstraintSet cs = no_constraints(3);
    cs.initial = Dag(synthetic::numbered_labels(3), {});
    CHECK_THROWS_AS(mmhc(d, cs, SearchParams{}), Error);
}

TEST_CASE("every learner satisfies its constraints on fuzzed problems") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        auto fp = fuzz_problem(7000 + seed, false);
        const int n = fp.data.num_variables();
        check_satisfies(hill_climb(fp.data, fp.cs, SearchParams{}).edges(), fp.cs, n);
        check_satisfies(tabu(fp.data, fp.cs, SearchParams{}).edges(), fp.cs, n);
        check_satisfies(mmhc(fp.data, fp.cs, SearchParams{}).edges(), fp.cs, n);
        const auto p = pc_stable(fp.data, fp.cs, SearchParams{});
        check_satisfies(p.directed(), fp.cs, n);

        auto with_initial = fuzz_problem(9000 + seed, true);
        check_satisfies(hill_climb(with_initial.data, with_initial.cs, SearchParams{}).edges(),
                        with_initial.cs, with_initial.data.num_variables());
        check_satisfies(tabu(with_initial.data, with_initial.cs, SearchParams{}).edges(),
                        with_initial.cs, with_initial.data.num_variables());
    }
}

TEST_CASE("learners are deterministic on identical inputs") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        auto fp = fuzz_problem(11000 + seed, false);
        const SearchParams p;
        CHECK(hill_climb(fp.data, fp.cs, p).edges() == hill_climb(fp.data, fp.cs, p).edges());
        CHECK(tabu(fp.data, fp.cs, p).edges() == tabu(fp.data, fp.cs, p).edges());
        CHECK(mmhc(fp.data, fp.cs, p).edges() == mmhc(fp.data, fp.cs, p).edges());
        const auto a = pc_stable(fp.data, fp.cs, p);
        const auto b = pc_stable(fp.data, fp.cs, p);
        CHECK(a.directed() == b.directed());
        CHECK(a.undirected() == b.undirected());
    }
}

TEST_CASE("hill climbing honors the in-degree cap") {
    std::mt19937_64 rng(181);
    auto bn = synthetic::random_bn(5, EdgeSet{{0, 4}, {1, 4}, {2, 4}, {3, 4}}, {2, 2, 2, 2, 2},
                                   rng, 0.9);
    const auto d = synthetic::sample(bn, 4000, rng);
    SearchParams p;
    p.max_in_degree = 2;
    const auto g = hill_climb(d, no_constraints(5), p);
    for (int v = 0; v < 5; ++v) CHECK(g.parents_of(v).size() <= 2);
}
