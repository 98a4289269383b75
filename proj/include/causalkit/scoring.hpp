#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "causalkit/dataset.hpp"
#include "causalkit/graph.hpp"

namespace causalkit {

// Result of a conditional independence test.
struct CiResult {
    double statistic = 0.0;
    long long degrees_of_freedom = 0;
    double p_value = 1.0;
};

// Local BIC of one child given its parents, natural log, penalty (ln N)/2 per
// free parameter. Higher is better. Decomposable: the graph score is the sum
// of local scores.
inline double bic_local(const DiscreteDataset& data, int child, const std::vector<int>& parents) {
    CountTable t = counts(data, child, parents);
    const double n = static_cast<double>(data.num_rows());
    double log_lik = 0.0;
    for (long long j = 0; j < t.num_configs; ++j) {
        const long long nj = t.marginal[static_cast<size_t>(j)];
        if (nj == 0) continue;
        for (int k = 0; k < t.child_cardinality; ++k) {
            const long long njk = t.joint[static_cast<size_t>(j * t.child_cardinality + k)];
            if (njk == 0) continue;
            log_lik += static_cast<double>(njk) *
                       std::log(static_cast<double>(njk) / static_cast<double>(nj));
        }
    }
    const double free_params =
        static_cast<double>(t.child_cardinality - 1) * static_cast<double>(t.num_configs);
    return log_lik - 0.5 * std::log(n) * free_params;
}

// Independent CPT entries of a discrete network: sum over nodes of
// (r_i - 1) * product of parent cardinalities.
inline long long free_parameters(const Dag& dag, const std::vector<int>& cardinalities) {
    if (static_cast<int>(cardinalities.size()) != dag.num_variables())
        throw Error(ErrorCode::IndexMismatch, "free_parameters: cardinalities do not cover graph");
    long long total = 0;
    for (int i = 0; i < dag.num_variables(); ++i) {
        long long q = 1;
        for (int p : dag.parents_of(i)) q *= cardinalities[static_cast<size_t>(p)];
        total += (cardinalities[static_cast<size_t>(i)] - 1LL) * q;
    }
    return total;
}

// G^2 test of x against y given the conditioning list z. Empty strata
// contribute nothing to the statistic and are dropped from the degrees of
// freedom. Symmetric in x and y.
inline CiResult g2_test(const DiscreteDataset& data, int x, int y, const std::vector<int>& z_in) {
    if (x == y) throw Error(ErrorCode::IndexMismatch, "g2_test: x == y");
    for (int w : z_in)
        if (w == x || w == y) throw Error(ErrorCode::IndexMismatch, "g2_test: z overlaps x or y");
    // Canonical evaluation order makes the x/y symmetry and the conditioning
    // permutation invariance bit-exact, not just mathematical.
    if (x > y) std::swap(x, y);
    std::vector<int> z = z_in;
    std::sort(z.begin(), z.end());
    const int rx = data.cardinality(x);
    const int ry = data.cardinality(y);
    long long qz = 1;
    for (int w : z) {
        qz *= data.cardinality(w);
        if (qz > (1LL << 24)) throw Error(ErrorCode::Internal, "g2_test: conditioning table too large");
    }
    std::vector<long long> nxyz(static_cast<size_t>(qz) * rx * ry, 0);
    std::vector<long long> nxz(static_cast<size_t>(qz) * rx, 0);
    std::vector<long long> nyz(static_cast<size_t>(qz) * ry, 0);
    std::vector<long long> nz(static_cast<size_t>(qz), 0);
    const long long rows = data.num_rows();
    for (long long i = 0; i < rows; ++i) {
        long long j = 0;
        for (int w : z) j = j * data.cardinality(w) + data.value(i, w);
        const int a = data.value(i, x);
        const int b = data.value(i, y);
        ++nxyz[static_cast<size_t>((j * rx + a) * ry + b)];
        ++nxz[static_cast<size_t>(j * rx + a)];
        ++nyz[static_cast<size_t>(j * ry + b)];
        ++nz[static_cast<size_t>(j)];
    }
    double stat = 0.0;
    long long populated_strata = 0;
    for (long long j = 0; j < qz; ++j) {
        if (nz[static_cast<size_t>(j)] == 0) continue;
        ++populated_strata;
        for (int a = 0; a < rx; ++a) {
            for (int b = 0; b < ry; ++b) {
                const long long o = nxyz[static_cast<size_t>((j * rx + a) * ry + b)];
                if (o == 0) continue;
                stat += 2.0 * static_cast<double>(o) *
                        std::log(static_cast<double>(o) * static_cast<double>(nz[static_cast<size_t>(j)]) /
                                 (static_cast<double>(nxz[static_cast<size_t>(j * rx + a)]) *
                                  static_cast<double>(nyz[static_cast<size_t>(j * ry + b)])));
            }
        }
    }
    CiResult r;
    r.statistic = std::max(0.0, stat);
    r.degrees_of_freedom = static_cast<long long>(rx - 1) * (ry - 1) * populated_strata;
    if (r.degrees_of_freedom <= 0) {
        r.p_value = 1.0;
    } else {
        boost::math::chi_squared dist(static_cast<double>(r.degrees_of_freedom));
        r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
    }
    return r;
}

// Memoizing wrapper over bic_local, keyed by (child, sorted parents). Safe
// for concurrent lookup and insert; always returns the pure value.
class CachedScorer {
public:
    explicit CachedScorer(const DiscreteDataset& data) : data_(&data) {}

    double local(int child, const std::vector<int>& parents) const {
        std::vector<int> key;
        key.reserve(parents.size() + 1);
        key.push_back(child);
        key.insert(key.end(), parents.begin(), parents.end());
        std::sort(key.begin() + 1, key.end());
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        const double value = bic_local(*data_, child, parents);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(std::move(key), value);
        return value;
    }

    double total(const EdgeSet& edges) const {
        const int n = data_->num_variables();
        std::vector<std::vector<int>> parents(static_cast<size_t>(n));
        for (const auto& [p, c] : edges) parents[static_cast<size_t>(c)].push_back(p);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += local(i, parents[static_cast<size_t>(i)]);
        return sum;
    }

    double total(const Dag& dag) const { return total(dag.edges()); }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.size();
    }

    const DiscreteDataset& data() const { return *data_; }

private:
    const DiscreteDataset* data_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<int>, double> cache_;
};

// Memoizing wrapper over g2_test, keyed by the unordered (x, y) pair and the
// sorted conditioning set. Thread-safe like CachedScorer.
class CachedCiTester {
public:
    explicit CachedCiTester(const DiscreteDataset& data) : data_(&data) {}

    CiResult test(int x, int y, const std::vector<int>& z) const {
        std::vector<int> key;
        key.reserve(z.size() + 2);
        key.push_back(std::min(x, y));
        key.push_back(std::max(x, y));
        key.insert(key.end(), z.begin(), z.end());
        std::sort(key.begin() + 2, key.end());
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        const CiResult value = g2_test(*data_, x, y, z);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(std::move(key), value);
        return value;
    }

    const DiscreteDataset& data() const { return *data_; }

private:
    const DiscreteDataset* data_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<int>, CiResult> cache_;
};

}  // namespace causalkit
