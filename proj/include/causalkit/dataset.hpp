#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "causalkit/errors.hpp"
#include "causalkit/graph.hpp"

namespace causalkit {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    fields.push_back(field);
    return fields;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

// Joint counts of one child against an ordered parent list. Parent
// configurations are indexed in mixed-radix order with the first parent as
// the most significant digit.
struct CountTable {
    long long num_configs = 1;          // q
    int child_cardinality = 1;          // r
    std::vector<long long> joint;       // size q*r, joint[j*r + k]
    std::vector<long long> marginal;    // size q, marginal[j] = sum_k joint[j*r+k]
};

// Immutable table of categorical observations. Cell values are state indices
// into per-variable state spaces recorded in first-appearance order.
class DiscreteDataset {
public:
    DiscreteDataset() = default;

    static DiscreteDataset from_state_rows(VariableIndex variables,
                                           std::vector<std::vector<int>> rows,
                                           std::vector<int> cardinalities) {
        DiscreteDataset d;
        d.variables_ = std::move(variables);
        d.cardinalities_ = std::move(cardinalities);
        const int n = d.variables_.size();
        if (static_cast<int>(d.cardinalities_.size()) != n)
            throw Error(ErrorCode::FormatError, "cardinalities do not cover all variables");
        if (rows.empty()) throw Error(ErrorCode::EmptyInput, "EmptyData: no observations");
        d.num_rows_ = static_cast<long long>(rows.size());
        d.cells_.reserve(rows.size() * static_cast<size_t>(n));
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != n)
                throw Error(ErrorCode::FormatError, "RaggedRow: row width mismatch");
            for (int j = 0; j < n; ++j) {
                if (row[static_cast<size_t>(j)] < 0 ||
                    row[static_cast<size_t>(j)] >= d.cardinalities_[static_cast<size_t>(j)])
                    throw Error(ErrorCode::FormatError, "state index out of range");
                d.cells_.push_back(row[static_cast<size_t>(j)]);
            }
        }
        d.state_labels_.resize(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j)
            for (int s = 0; s < d.cardinalities_[static_cast<size_t>(j)]; ++s)
                d.state_labels_[static_cast<size_t>(j)].push_back("s" + std::to_string(s));
        return d;
    }

    const VariableIndex& variables() const { return variables_; }
    int num_variables() const { return variables_.size(); }
    long long num_rows() const { return num_rows_; }
    const std::vector<int>& cardinalities() const { return cardinalities_; }
    int cardinality(int var) const { return cardinalities_.at(static_cast<size_t>(var)); }

    int value(long long row, int var) const {
        return cells_[static_cast<size_t>(row) * static_cast<size_t>(variables_.size()) +
                      static_cast<size_t>(var)];
    }

    const std::string& state_label(int var, int state) const {
        return state_labels_.at(static_cast<size_t>(var)).at(static_cast<size_t>(state));
    }

    void write_csv(std::ostream& out) const {
        const int n = num_variables();
        for (int j = 0; j < n; ++j) out << (j ? "," : "") << variables_.label(j);
        out << "\n";
        for (long long i = 0; i < num_rows_; ++i) {
            for (int j = 0; j < n; ++j)
                out << (j ? "," : "") << state_label(j, value(i, j));
            out << "\n";
        }
    }

    friend DiscreteDataset load_csv(const std::string& path, bool allow_missing);
    friend DiscreteDataset load_csv_stream(std::istream& in, bool allow_missing);

private:
    VariableIndex variables_;
    long long num_rows_ = 0;
    std::vector<int> cardinalities_;
    std::vector<int32_t> cells_;
    std::vector<std::vector<std::string>> state_labels_;
};

// Reads a discrete dataset from a header-mandatory CSV. Values are opaque
// category strings with no numeric coercion; per-column state indices follow
// first appearance order. Blank cells are rejected unless allow_missing is
// set, in which case the blank becomes an ordinary extra state.
inline DiscreteDataset load_csv_stream(std::istream& in, bool allow_missing = false) {
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorCode::FormatError, "MissingHeader: file is empty");
    detail::strip_cr(line);
    auto header = detail::split_csv_line(line);
    if (header.empty() || (header.size() == 1 && header[0].empty()))
        throw Error(ErrorCode::FormatError, "MissingHeader: empty header row");
    for (const auto& label : header)
        if (label.empty())
            throw Error(ErrorCode::FormatError, "MissingHeader: blank column label");

    DiscreteDataset d;
    d.variables_ = VariableIndex(header);
    const int n = d.variables_.size();
    d.state_labels_.resize(static_cast<size_t>(n));
    std::vector<std::map<std::string, int>> state_index(static_cast<size_t>(n));

    while (std::getline(in, line)) {
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (static_cast<int>(fields.size()) != n)
            throw Error(ErrorCode::FormatError,
                        "RaggedRow: expected " + std::to_string(n) + " fields, got " +
                            std::to_string(fields.size()));
        for (int j = 0; j < n; ++j) {
            const std::string& v = fields[static_cast<size_t>(j)];
            if (v.empty() && !allow_missing)
                throw Error(ErrorCode::FormatError,
                            "missing value in column " + d.variables_.label(j) +
                                " (use allow-missing to keep blanks as a state)");
            auto& idx = state_index[static_cast<size_t>(j)];
            auto it = idx.find(v);
            int s;
            if (it == idx.end()) {
                s = static_cast<int>(idx.size());
                idx.emplace(v, s);
                d.state_labels_[static_cast<size_t>(j)].push_back(v);
            } else {
                s = it->second;
            }
            d.cells_.push_back(s);
        }
        ++d.num_rows_;
    }
    if (d.num_rows_ == 0) throw Error(ErrorCode::EmptyInput, "EmptyData: no data rows");
    d.cardinalities_.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        d.cardinalities_[static_cast<size_t>(j)] =
            static_cast<int>(d.state_labels_[static_cast<size_t>(j)].size());
    return d;
}

inline DiscreteDataset load_csv(const std::string& path, bool allow_missing = false) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open dataset: " + path);
    return load_csv_stream(in, allow_missing);
}

// Joint counts N_jk for the child against each parent configuration j, plus
// the configuration marginals N_j. Sums to the row count.
inline CountTable counts(const DiscreteDataset& data, int child, const std::vector<int>& parents) {
    const int n = data.num_variables();
    if (child < 0 || child >= n) throw Error(ErrorCode::IndexMismatch, "counts: bad child index");
    std::vector<bool> seen(static_cast<size_t>(n), false);
    seen[static_cast<size_t>(child)] = true;
    CountTable t;
    t.child_cardinality = data.cardinality(child);
    for (int p : parents) {
        if (p < 0 || p >= n) throw Error(ErrorCode::IndexMismatch, "counts: bad parent index");
        if (seen[static_cast<size_t>(p)])
            throw Error(ErrorCode::IndexMismatch, "counts: duplicate parent or parent == child");
        seen[static_cast<size_t>(p)] = true;
        t.num_configs *= data.cardinality(p);
        if (t.num_configs > (1LL << 26))
            throw Error(ErrorCode::Internal, "counts: contingency table too large");
    }
    t.joint.assign(static_cast<size_t>(t.num_configs * t.child_cardinality), 0);
    t.marginal.assign(static_cast<size_t>(t.num_configs), 0);
    const long long rows = data.num_rows();
    for (long long i = 0; i < rows; ++i) {
        long long j = 0;
        for (int p : parents) j = j * data.cardinality(p) + data.value(i, p);
        int k = data.value(i, child);
        ++t.joint[static_cast<size_t>(j * t.child_cardinality + k)];
        ++t.marginal[static_cast<size_t>(j)];
    }
    return t;
}

}  // namespace causalkit
