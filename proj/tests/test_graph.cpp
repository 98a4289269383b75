#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "causalkit/graph.hpp"
#include "causalkit/graph_io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace causalkit;

TEST_CASE("is_acyclic basics") {
    CHECK(is_acyclic({}, 3));
    CHECK_FALSE(is_acyclic({{0, 1}, {1, 2}, {2, 0}}, 3));
    CHECK_FALSE(is_acyclic({{1, 1}}, 2));
    CHECK_THROWS_AS(is_acyclic({{0, 5}}, 3), Error);
}

TEST_CASE("edge sets built along a permutation are acyclic") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 7);
        const int m = static_cast<int>(rng() % (n * (n - 1) / 2 + 1));
        CHECK(is_acyclic(synthetic::random_dag_edges(n, m, rng), n));
    }
}

TEST_CASE("transitive closure matches the worked example and the path oracle") {
    // A->B, B->C  =>  (A,B), (B,C), (A,C)
    CHECK(transitive_closure({{0, 1}, {1, 2}}, 3) == EdgeSet{{0, 1}, {1, 2}, {0, 2}});
    CHECK(transitive_closure({}, 4) == EdgeSet{});

    const EdgeSet diamond{{0, 1}, {0, 2}, {1, 3}, {2, 3}};
    const EdgeSet closed = transitive_closure(diamond, 4);
    CHECK(closed.size() == 5);
    CHECK(closed.count({0, 3}) == 1);
    CHECK(closed == oracles::closure_by_path_enumeration(diamond, 4));

    CHECK_THROWS_AS(transitive_closure({{0, 1}, {1, 0}}, 2), Error);

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 6);
        const auto edges = synthetic::random_dag_edges(n, static_cast<int>(rng() % (n * 2)), rng);
        const auto once = transitive_closure(edges, n);
        CHECK(once == oracles::closure_by_path_enumeration(edges, n));
        CHECK(transitive_closure(once, n) == once);  // idempotent
    }
}

TEST_CASE("Dag rejects cycles and self-loops") {
    const auto vars = oracles::letters(3);
    CHECK_THROWS_AS(Dag(vars, {{0, 1}, {1, 2}, {2, 0}}), Error);
    CHECK_THROWS_AS(Dag(vars, {{1, 1}}), Error);
    const Dag d(vars, {{0, 1}, {1, 2}});
    CHECK(d.parents_of(2) == std::vector<int>{1});
    CHECK(d.children_of(0) == std::vector<int>{1});
}

TEST_CASE("Pdag invariants") {
    const auto vars = oracles::letters(3);
    CHECK_THROWS_AS(Pdag(vars, {{0, 1}}, {{0, 1}}), Error);
    CHECK_THROWS_AS(Pdag(vars, {{0, 1}, {1, 0}}, {}), Error);
    const Pdag p(vars, {{0, 1}}, {{2, 1}});
    CHECK(p.has_undirected(1, 2));
    CHECK(p.has_undirected(2, 1));
    CHECK(p.adjacent(0, 1));
    CHECK_FALSE(p.adjacent(0, 2));
}

TEST_CASE("dag_to_cpdag on the textbook small cases") {
    const auto vars3 = oracles::letters(3);

    // Collider A->C<-B stays fully directed.
    const Pdag collider = dag_to_cpdag(Dag(vars3, {{0, 2}, {1, 2}}));
    CHECK(collider.directed() == EdgeSet{{0, 2}, {1, 2}});
    CHECK(collider.undirected().empty());

    // Chain A->B->C loses both orientations.
    const Pdag chain = dag_to_cpdag(Dag(vars3, {{0, 1}, {1, 2}}));
    CHECK(chain.directed().empty());
    CHECK(chain.undirected() == EdgeSet{{0, 1}, {1, 2}});

    // {A->B, C->B, B->D}: the v-structure plus Meek rule 1 compel everything.
    const auto vars4 = oracles::letters(4);
    const Pdag meek1 = dag_to_cpdag(Dag(vars4, {{0, 1}, {2, 1}, {1, 3}}));
    CHECK(meek1.directed() == EdgeSet{{0, 1}, {2, 1}, {1, 3}});
    CHECK(meek1.undirected().empty());
}

TEST_CASE("dag_to_cpdag equals MEC enumeration on all 3-node DAGs") {
    const oracles::MecOracle oracle(3);
    CHECK(oracle.dag_count() == 25);
    const auto vars = oracles::letters(3);
    for (const auto& edges : oracles::enumerate_all_dags(3)) {
        const Dag d(vars, edges);
        CHECK(dag_to_cpdag(d) == oracle.pattern(d));
    }
}

TEST_CASE("dag_to_cpdag equals MEC enumeration on random 4-node DAGs") {
    const oracles::MecOracle oracle(4);
    const auto vars = oracles::letters(4);
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 60; ++trial) {
        const Dag d(vars, synthetic::random_dag_edges(4, static_cast<int>(rng() % 7), rng));
        CHECK(dag_to_cpdag(d) == oracle.pattern(d));
    }
}

TEST_CASE("dag_to_cpdag preserves the skeleton") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const auto edges = synthetic::random_dag_edges(n, static_cast<int>(rng() % (2 * n)), rng);
        const Pdag pattern = dag_to_cpdag(Dag(oracles::letters(n), edges));
        auto pattern_skeleton = oracles::skeleton_of(pattern.directed());
        for (const auto& e : pattern.undirected()) pattern_skeleton.insert(e);
        CHECK(pattern_skeleton == oracles::skeleton_of(edges));
    }
}

TEST_CASE("extend_to_dag identity, tie rule, and failure") {
    const auto vars2 = oracles::letters(2);
    const Dag directed(vars2, {{1, 0}});
    const auto same = extend_to_dag(Pdag::from_dag(directed));
    REQUIRE(same.has_value());
    CHECK(same->edges() == directed.edges());

    // A single undirected pair orients A->B under the lexicographic tie rule.
    const auto one = extend_to_dag(Pdag(vars2, {}, {{0, 1}}));
    REQUIRE(one.has_value());
    CHECK(one->edges() == EdgeSet{{0, 1}});

    // A chordless undirected 4-cycle admits no consistent extension.
    const auto vars4 = oracles::letters(4);
    const Pdag square(vars4, {}, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    CHECK(oracles::brute_force_extensions(square).empty());
    CHECK_FALSE(extend_to_dag(square).has_value());
}

TEST_CASE("extend_to_dag agrees with brute force over random patterns") {
    std::mt19937_64 rng(19);
    const auto vars = oracles::letters(5);
    for (int trial = 0; trial < 80; ++trial) {
        const auto edges = synthetic::random_dag_edges(5, static_cast<int>(rng() % 9), rng);
        const Pdag pattern = dag_to_cpdag(Dag(vars, edges));
        const auto extensions = oracles::brute_force_extensions(pattern);
        const auto got = extend_to_dag(pattern);
        REQUIRE(got.has_value());
        CHECK_FALSE(extensions.empty());
        bool found = false;
        for (const auto& e : extensions) found = found || e == got->edges();
        CHECK(found);
    }
}

TEST_CASE("extending a completed pattern lands in the same MEC") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);  // up to 6 nodes
        const auto vars = oracles::letters(n);
        const auto edges = synthetic::random_dag_edges(n, static_cast<int>(rng() % (2 * n)), rng);
        const auto extension = extend_to_dag(dag_to_cpdag(Dag(vars, edges)));
        REQUIRE(extension.has_value());
        CHECK(oracles::mec_signature(extension->edges(), n) == oracles::mec_signature(edges, n));
    }
}

TEST_CASE("Meek rule 4 fires on the kite configuration") {
    // a-b, a-c, a-d undirected; c->d, d->b directed; c and b non-adjacent.
    detail::OrientationState g;
    g.n = 4;
    const int a = 0, b = 1, c = 2, d = 3;
    g.undirected = {{a, b}, {a, c}, {a, d}};
    g.directed = {{c, d}, {d, b}};
    detail::meek_closure(g);
    CHECK(g.directed.count({a, b}) == 1);
}

TEST_CASE("edge-list round trip preserves DAGs and PDAGs") {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const auto vars = oracles::letters(n);
        const Dag dag(vars, synthetic::random_dag_edges(n, static_cast<int>(rng() % (2 * n)), rng));
        {
            std::ostringstream out;
            write_edge_list(out, dag);
            std::istringstream in(out.str());
            CHECK(dag_from_rows(read_edge_list_rows(in, "mem"), vars) == dag);
        }
        const Pdag pattern = dag_to_cpdag(dag);
        {
            std::ostringstream out;
            write_edge_list(out, pattern);
            std::istringstream in(out.str());
            CHECK(pdag_from_rows(read_edge_list_rows(in, "mem"), vars) == pattern);
        }
    }
}

TEST_CASE("VariableIndex rejects duplicates and finds labels") {
    CHECK_THROWS_AS(VariableIndex({"x", "x"}), Error);
    const VariableIndex vars({"alpha", "beta"});
    CHECK(vars.find("beta") == 1);
    CHECK_FALSE(vars.find("gamma").has_value());
}
