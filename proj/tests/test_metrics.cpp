#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "causalkit/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace causalkit;

namespace {

Pdag random_cpdag(int n, std::mt19937_64& rng) {
    const auto edges = synthetic::random_dag_edges(n, static_cast<int>(rng() % (2 * n)), rng);
    return dag_to_cpdag(Dag(oracles::letters(n), edges));
}

}  // namespace

TEST_CASE("confusion on identical and empty graphs") {
    std::mt19937_64 rng(97);
    const auto g = random_cpdag(5, rng);
    const auto self = confusion(g, g);
    CHECK(self.tp == Catch::Approx(static_cast<double>(g.num_edges())));
    CHECK(self.fp == 0.0);
    CHECK(self.fn == 0.0);
    CHECK(self.tn == Catch::Approx(10.0 - g.num_edges()));

    const Pdag empty(g.variables(), {}, {});
    const auto miss = confusion(empty, g);
    CHECK(miss.fn == Catch::Approx(static_cast<double>(g.num_edges())));
    CHECK(miss.tp == 0.0);
    CHECK(miss.tn == Catch::Approx(miss.reference_independencies));
}

TEST_CASE("the mixed-mark worked example") {
    const auto vars = oracles::letters(3);
    const Pdag reference(vars, {{0, 1}}, {{1, 2}});  // A->B, B-C
    const Pdag learnt(vars, {{0, 1}, {1, 2}}, {});   // A->B, B->C
    const auto c = confusion(learnt, reference);
    CHECK(c.tp == Catch::Approx(1.5));
    CHECK(c.fp == Catch::Approx(0.5));
    CHECK(c.fn == Catch::Approx(0.5));
    CHECK(c.tn == Catch::Approx(1.0));
    CHECK(c.reference_edges == 2.0);
    CHECK(c.reference_independencies == 1.0);
    CHECK(f1(c) == Catch::Approx(0.75));
    CHECK(bsf(c) == Catch::Approx(0.5));
    CHECK(shd(learnt, reference) == 1);
}

TEST_CASE("f1 and bsf boundary values") {
    std::mt19937_64 rng(101);
    const auto g = random_cpdag(4, rng);
    CHECK(f1(confusion(g, g)) == Catch::Approx(1.0));
    CHECK(bsf(confusion(g, g)) == Catch::Approx(1.0));

    const Pdag empty(g.variables(), {}, {});
    if (g.num_edges() > 0) {
        CHECK(f1(confusion(empty, g)) == 0.0);
        CHECK(bsf(confusion(empty, g)) == Catch::Approx(0.0));
    }
    CHECK(f1(confusion(empty, empty)) == 1.0);  // both empty defined as 1

    // Degenerate normalizers stay finite and keep bsf(x, x) = 1.
    const auto vars2 = oracles::letters(2);
    const Pdag full(vars2, {{0, 1}}, {});
    CHECK(bsf(confusion(full, full)) == Catch::Approx(1.0));   // i = 0
    const Pdag none(vars2, {}, {});
    CHECK(bsf(confusion(none, none)) == Catch::Approx(1.0));   // a = 0
    CHECK(bsf(confusion(full, none)) == Catch::Approx(0.0));   // a = 0, i = 1, learnt full
}

TEST_CASE("shd counts differing pairs and detects identity") {
    std::mt19937_64 rng(103);
    const auto g = random_cpdag(5, rng);
    CHECK(shd(g, g) == 0);
    const Pdag empty(g.variables(), {}, {});
    CHECK(shd(empty, g) == g.num_edges());

    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_cpdag(4, rng);
        const auto b = random_cpdag(4, rng);
        const bool identical = a.directed() == b.directed() && a.undirected() == b.undirected();
        CHECK((shd(a, b) == 0) == identical);
    }
}

TEST_CASE("marginal identities hold for random CPDAG pairs") {
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const auto learnt = random_cpdag(n, rng);
        const auto reference = random_cpdag(n, rng);
        const auto c = confusion(learnt, reference);
        CHECK(c.tp + c.fn == Catch::Approx(c.reference_edges));
        CHECK(c.tp + c.fp == Catch::Approx(static_cast<double>(learnt.num_edges())));
        CHECK(c.reference_edges + c.reference_independencies ==
              Catch::Approx(n * (n - 1) / 2.0));
    }
}

TEST_CASE("metrics are invariant under a shared relabeling") {
    std::mt19937_64 rng(109);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 4);
        const auto learnt = random_cpdag(n, rng);
        const auto reference = random_cpdag(n, rng);

        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        auto remap = [&](const Pdag& g) {
            EdgeSet directed, undirected;
            for (const auto& [p, c] : g.directed())
                directed.emplace(perm[static_cast<size_t>(p)], perm[static_cast<size_t>(c)]);
            for (const auto& [a, b] : g.undirected())
                undirected.emplace(perm[static_cast<size_t>(a)], perm[static_cast<size_t>(b)]);
            return Pdag(g.variables(), std::move(directed), std::move(undirected));
        };
        const auto c0 = confusion(learnt, reference);
        const auto c1 = confusion(remap(learnt), remap(reference));
        CHECK(f1(c0) == Catch::Approx(f1(c1)));
        CHECK(bsf(c0) == Catch::Approx(bsf(c1)));
    }
}

TEST_CASE("confusion demands a shared variable index") {
    const Pdag a(oracles::letters(3), {}, {});
    const Pdag b(oracles::letters(4), {}, {});
    CHECK_THROWS_AS(confusion(a, b), Error);
    CHECK_THROWS_AS(shd(a, b), Error);
}

TEST_CASE("relative change formulas and signs") {
    CHECK(relative_change(0.5, 0.5, MetricKind::F1) == 0.0);
    CHECK(relative_change(0.75, 0.6, MetricKind::F1) == Catch::Approx(25.0));
    CHECK(relative_change(0.75, 0.6, MetricKind::Bsf) == Catch::Approx(25.0));
    CHECK(relative_change(7.0, 10.0, MetricKind::Shd) == Catch::Approx(30.0));   // improvement
    CHECK(relative_change(13.0, 10.0, MetricKind::Shd) == Catch::Approx(-30.0)); // degradation
    CHECK(relative_change(-90.0, -100.0, MetricKind::Bic) == Catch::Approx(10.0));
    CHECK(relative_change(-110.0, -100.0, MetricKind::Bic) == Catch::Approx(-10.0));
    // Zero baseline stays finite via the epsilon guard.
    CHECK(std::isfinite(relative_change(0.4, 0.0, MetricKind::F1)));
}
