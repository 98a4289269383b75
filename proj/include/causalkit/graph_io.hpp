#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "causalkit/dataset.hpp"
#include "causalkit/graph.hpp"

namespace causalkit {

// Edge-list CSV format shared repo-wide: header `parent,child`, one directed
// edge per row. PDAG files carry a third column `directed` with `yes|no`;
// rows marked `no` are undirected.

struct EdgeListRow {
    std::string parent;
    std::string child;
    bool directed = true;
};

inline void write_edge_list(std::ostream& out, const Dag& dag) {
    out << "parent,child\n";
    for (const auto& [p, c] : dag.edges())
        out << dag.variables().label(p) << "," << dag.variables().label(c) << "\n";
}

inline void write_edge_list(std::ostream& out, const Pdag& pdag) {
    out << "parent,child,directed\n";
    for (const auto& [p, c] : pdag.directed())
        out << pdag.variables().label(p) << "," << pdag.variables().label(c) << ",yes\n";
    for (const auto& [a, b] : pdag.undirected())
        out << pdag.variables().label(a) << "," << pdag.variables().label(b) << ",no\n";
}

template <typename Graph>
void save_edge_list(const std::string& path, const Graph& g) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write graph: " + path);
    write_edge_list(out, g);
}

inline std::vector<EdgeListRow> read_edge_list_rows(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorCode::FormatError, origin + ": empty edge-list file");
    detail::strip_cr(line);
    auto header = detail::split_csv_line(line);
    const bool has_mark = header.size() == 3;
    if (!(header.size() == 2 || has_mark) || header[0] != "parent" || header[1] != "child" ||
        (has_mark && header[2] != "directed"))
        throw Error(ErrorCode::FormatError, origin + ": expected header parent,child[,directed]");
    std::vector<EdgeListRow> rows;
    while (std::getline(in, line)) {
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw Error(ErrorCode::FormatError, origin + ": ragged edge-list row");
        EdgeListRow r;
        r.parent = fields[0];
        r.child = fields[1];
        if (has_mark) {
            if (fields[2] == "yes") r.directed = true;
            else if (fields[2] == "no") r.directed = false;
            else throw Error(ErrorCode::FormatError, origin + ": directed column must be yes|no");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<EdgeListRow> read_edge_list_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open graph: " + path);
    return read_edge_list_rows(in, path);
}

// Labels appearing in the rows, in first-appearance order. Used when no
// dataset fixes the variable set.
inline std::vector<std::string> labels_in_rows(const std::vector<EdgeListRow>& rows) {
    std::vector<std::string> labels;
    auto add = [&](const std::string& s) {
        for (const auto& l : labels)
            if (l == s) return;
        labels.push_back(s);
    };
    for (const auto& r : rows) {
        add(r.parent);
        add(r.child);
    }
    return labels;
}

inline Pdag pdag_from_rows(const std::vector<EdgeListRow>& rows, const VariableIndex& vars) {
    EdgeSet directed, undirected;
    for (const auto& r : rows) {
        auto p = vars.find(r.parent);
        auto c = vars.find(r.child);
        if (!p || !c)
            throw Error(ErrorCode::FormatError,
                        "edge list references unknown label: " + r.parent + " -> " + r.child);
        if (r.directed) directed.emplace(*p, *c);
        else undirected.emplace(*p, *c);
    }
    return Pdag(vars, std::move(directed), std::move(undirected));
}

inline Dag dag_from_rows(const std::vector<EdgeListRow>& rows, const VariableIndex& vars) {
    EdgeSet edges;
    for (const auto& r : rows) {
        if (!r.directed)
            throw Error(ErrorCode::FormatError, "expected a fully directed graph");
        auto p = vars.find(r.parent);
        auto c = vars.find(r.child);
        if (!p || !c)
            throw Error(ErrorCode::FormatError,
                        "edge list references unknown label: " + r.parent + " -> " + r.child);
        edges.emplace(*p, *c);
    }
    return Dag(vars, std::move(edges));
}

inline Pdag load_pdag(const std::string& path, const VariableIndex& vars) {
    return pdag_from_rows(read_edge_list_rows(path), vars);
}

inline Dag load_dag(const std::string& path, const VariableIndex& vars) {
    return dag_from_rows(read_edge_list_rows(path), vars);
}

}  // namespace causalkit
