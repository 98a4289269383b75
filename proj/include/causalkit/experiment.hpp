#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalkit/consensus.hpp"
#include "causalkit/constraints.hpp"
#include "causalkit/dataset.hpp"
#include "causalkit/elicitation.hpp"
#include "causalkit/graph.hpp"
#include "causalkit/graph_io.hpp"
#include "causalkit/metrics.hpp"
#include "causalkit/scoring.hpp"
#include "causalkit/search.hpp"

namespace causalkit {

// Five-number summary plus mean, quartiles by linear interpolation (type 7).
struct BoxSummary {
    double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

inline BoxSummary summarize_box(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "summarize_box: no values");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        const double h = (static_cast<double>(values.size()) - 1.0) * p;
        const size_t lo = static_cast<size_t>(h);
        const size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    BoxSummary b;
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile(0.25);
    b.median = quantile(0.5);
    b.q3 = quantile(0.75);
    double sum = 0;
    for (double v : values) sum += v;
    b.mean = sum / static_cast<double>(values.size());
    return b;
}

struct CaseConfig {
    std::string case_id;
    std::optional<std::string> dataset_path;
    std::string reference_path;
    std::string elicitation_dir;
    std::optional<std::string> labels_path;  // for dataset-free cases
};

struct GridBlock {
    std::vector<std::string> algorithms;
    std::vector<std::string> constraint_types;
    std::vector<int> rates;  // percent: 33, 50, 67
};

struct ExperimentConfig {
    std::vector<CaseConfig> cases;
    std::vector<GridBlock> grid;
    SearchParams search;
    std::string output_dir = "out";
    int workers = 0;  // 0 = hardware concurrency
};

inline const std::vector<std::string>& known_algorithms() {
    static const std::vector<std::string> a = {"hc", "tabu", "pc_stable", "mmhc"};
    return a;
}

inline bool algorithm_supports_initial(const std::string& algo) {
    return algo == "hc" || algo == "tabu";
}

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.cases.empty()) throw Error(ErrorCode::ConfigError, "config lists no cases");
    if (cfg.grid.empty()) throw Error(ErrorCode::ConfigError, "config lists no grid blocks");
    std::set<std::string> ids;
    for (const auto& c : cfg.cases) {
        if (c.case_id.empty()) throw Error(ErrorCode::ConfigError, "case with empty case_id");
        if (!ids.insert(c.case_id).second)
            throw Error(ErrorCode::ConfigError, "duplicate case_id: " + c.case_id);
    }
    for (const auto& block : cfg.grid) {
        for (const auto& a : block.algorithms)
            if (std::find(known_algorithms().begin(), known_algorithms().end(), a) ==
                known_algorithms().end())
                throw Error(ErrorCode::ConfigError, "unknown algorithm: " + a);
        for (const auto& t : block.constraint_types) {
            if (t != "required" && t != "initial" && t != "temporal")
                throw Error(ErrorCode::ConfigError, "unknown constraint type: " + t);
            if (t == "initial")
                for (const auto& a : block.algorithms)
                    if (!algorithm_supports_initial(a))
                        throw Error(ErrorCode::ConfigError,
                                    "initial-graph constraints are not supported by " + a);
        }
        for (int r : block.rates)
            if (r != 33 && r != 50 && r != 67)
                throw Error(ErrorCode::ConfigError, "rate must be one of 33, 50, 67");
    }
    if (cfg.search.alpha <= 0.0 || cfg.search.alpha >= 1.0)
        throw Error(ErrorCode::ConfigError, "alpha must lie in (0,1)");
    if (cfg.search.tabu_length < 0 || cfg.search.tabu_max_worse_moves < 0)
        throw Error(ErrorCode::ConfigError, "tabu settings must be non-negative");
}

// Loads the experiment config. Relative fixture paths are resolved against
// the config file's directory; output_dir is resolved against the caller's
// working directory.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                                    const std::string& base_dir) {
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        if (path.is_absolute() || base_dir.empty()) return p;
        return (std::filesystem::path(base_dir) / path).lexically_normal().string();
    };
    ExperimentConfig cfg;
    for (const auto& cj : j.at("cases")) {
        CaseConfig c;
        c.case_id = cj.at("case_id").get<std::string>();
        if (cj.contains("dataset") && !cj["dataset"].is_null())
            c.dataset_path = resolve(cj["dataset"].get<std::string>());
        c.reference_path = resolve(cj.at("reference").get<std::string>());
        c.elicitation_dir = resolve(cj.at("elicitation").get<std::string>());
        if (cj.contains("labels") && !cj["labels"].is_null())
            c.labels_path = resolve(cj["labels"].get<std::string>());
        cfg.cases.push_back(std::move(c));
    }
    auto block_from = [&](const nlohmann::json& bj) {
        GridBlock b;
        b.algorithms = bj.value("algorithms", std::vector<std::string>{});
        b.constraint_types = bj.value("constraint_types", std::vector<std::string>{});
        b.rates = bj.value("rates", std::vector<int>{});
        return b;
    };
    if (j.contains("grid")) {
        for (const auto& bj : j["grid"]) cfg.grid.push_back(block_from(bj));
    } else {
        cfg.grid.push_back(block_from(j));
    }
    if (j.contains("search")) {
        const auto& s = j["search"];
        if (s.contains("max_in_degree") && !s["max_in_degree"].is_null())
            cfg.search.max_in_degree = s["max_in_degree"].get<int>();
        cfg.search.tabu_length = s.value("tabu_length", cfg.search.tabu_length);
        cfg.search.tabu_max_worse_moves =
            s.value("tabu_max_worse_moves", cfg.search.tabu_max_worse_moves);
        cfg.search.alpha = s.value("alpha", cfg.search.alpha);
        cfg.search.seed = s.value("seed", cfg.search.seed);
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.workers = j.value("workers", 0);
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path + ": " + e.what());
    }
    return experiment_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

namespace detail {

inline std::string fmt(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v, int precision) {
    return v ? fmt(*v, precision) : std::string();
}

constexpr double kModelAverageThreshold = 2.0 / 3.0;

inline const std::vector<std::string>& constraint_type_order() {
    static const std::vector<std::string> order = {"none", "required", "initial", "temporal"};
    return order;
}

inline int type_rank(const std::string& t) {
    const auto& order = constraint_type_order();
    return static_cast<int>(std::find(order.begin(), order.end(), t) - order.begin());
}

inline void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace detail

// Everything loaded and derived for one case before any learner runs.
struct CaseRuntime {
    CaseConfig config;
    VariableIndex variables;
    std::shared_ptr<const DiscreteDataset> data;  // stable address across moves
    Pdag reference_cpdag;
    EdgeTally edge_tally;
    std::map<int, EdgeSet> raw_rate_sets;                          // rate -> raw thresholded set
    std::map<std::pair<std::string, int>, ConstraintSet> derived;  // (type, rate) -> constraints
    std::shared_ptr<CachedScorer> scorer;
    std::shared_ptr<CachedCiTester> tester;
    std::vector<std::string> notes;
};

struct CellSpec {
    int case_index = 0;
    std::string algorithm;
    std::string constraint_type;  // "none" for the unconstrained baseline
    int rate = 0;                 // 0 for baselines
};

struct CellResult {
    CellSpec spec;
    bool failed = false;
    std::string failure;
    std::optional<double> f1, bsf, bic;
    std::optional<long long> shd;
    std::optional<double> rel_f1, rel_bsf, rel_shd, rel_bic;
    std::string graph_file;
    double wall_seconds = 0.0;
    long long moves = 0;
};

struct ExperimentReport {
    std::string output_dir;
    std::string metrics_csv;
    std::string box_csv;
    std::string svg;
    int cells = 0;
    int failed_cells = 0;
};

void write_relative_change_svg(const std::string& path, const std::vector<CellResult>& results);

namespace detail {

inline VariableIndex case_variable_index(const CaseConfig& c, const DiscreteDataset* data) {
    if (data != nullptr) return data->variables();
    if (c.labels_path.has_value()) {
        std::ifstream in(*c.labels_path);
        if (!in) throw Error(ErrorCode::FileNotFound, "cannot open labels: " + *c.labels_path);
        std::vector<std::string> labels;
        std::string line;
        while (std::getline(in, line)) {
            strip_cr(line);
            if (!line.empty()) labels.push_back(line);
        }
        if (labels.empty())
            throw Error(ErrorCode::FormatError, *c.labels_path + ": no labels");
        return VariableIndex(labels);
    }
    return VariableIndex(labels_in_rows(read_edge_list_rows(c.reference_path)));
}

inline Pdag reference_pattern(const std::string& path, const VariableIndex& vars) {
    const auto rows = read_edge_list_rows(path);
    bool all_directed = true;
    for (const auto& r : rows) all_directed = all_directed && r.directed;
    if (all_directed) return dag_to_cpdag(dag_from_rows(rows, vars));
    return pdag_from_rows(rows, vars);
}

inline CaseRuntime prepare_case(const CaseConfig& cc, const std::string& out_dir) {
    CaseRuntime rt;
    rt.config = cc;
    if (cc.dataset_path.has_value())
        rt.data = std::make_shared<const DiscreteDataset>(load_csv(*cc.dataset_path));
    rt.variables = case_variable_index(cc, rt.data.get());
    rt.reference_cpdag = reference_pattern(cc.reference_path, rt.variables);
    if (rt.data != nullptr) {
        rt.scorer = std::make_shared<CachedScorer>(*rt.data);
        rt.tester = std::make_shared<CachedCiTester>(*rt.data);
    }

    // Replay the ten elicitation records and tally the parsed edges.
    ElicitOptions opts;
    opts.cache_dir = cc.elicitation_dir;
    std::vector<EdgeSet> graphs;
    for (int prompt_id = 1; prompt_id <= 10; ++prompt_id) {
        const auto record =
            elicit(cc.case_id, prompt_id, rt.variables.labels(), TransportMode::Replay, opts);
        EdgeSet edges;
        for (const auto& [ps, cs] : record.parsed_edges) {
            auto p = rt.variables.find(ps);
            auto c = rt.variables.find(cs);
            if (!p || !c) {
                rt.notes.push_back(cc.case_id + " prompt " + std::to_string(prompt_id) +
                                   ": dropped edge with unknown label " + ps + " -> " + cs);
                continue;
            }
            edges.emplace(*p, *c);
        }
        graphs.push_back(std::move(edges));
    }
    rt.edge_tally = tally(graphs);

    const std::filesystem::path case_dir = std::filesystem::path(out_dir) / cc.case_id;
    std::filesystem::create_directories(case_dir);
    {
        std::ofstream out(case_dir / "tally.csv");
        write_tally_csv(out, rt.edge_tally, rt.variables);
    }
    save_edge_list((case_dir / "consensus.csv").string(),
                   model_average(rt.edge_tally, kModelAverageThreshold, rt.variables));

    return rt;
}

// Derives all three constraint forms for every requested rate; the grid may
// use any subset, the files are written regardless.
inline void derive_case_constraints(CaseRuntime& rt, const std::vector<int>& rates,
                                    const std::string& out_dir) {
    static const std::vector<std::string> types = {"required", "initial", "temporal"};
    const int n = rt.variables.size();
    for (int rate : rates) {
        const double fraction = rate / 100.0;
        EdgeSet raw = edge_sets_by_rate(rt.edge_tally, {fraction})[0];
        rt.raw_rate_sets[rate] = raw;
        std::vector<Edge> dropped;
        const EdgeSet repaired = repair_acyclic(raw, rt.edge_tally, n, &dropped);
        for (const auto& e : dropped)
            rt.notes.push_back(rt.config.case_id + " rate " + std::to_string(rate) +
                               ": dropped cycle-forming edge " + rt.variables.label(e.first) +
                               " -> " + rt.variables.label(e.second));
        for (const auto& type : types) {
            ConstraintSet cs;
            cs.num_variables = n;
            cs.source = {rt.config.case_id, rate, type};
            if (type == "required") {
                cs.required = repaired;
            } else if (type == "temporal") {
                cs.forbidden = derive_temporal(repaired, n);
            } else if (type == "initial") {
                cs.initial = as_initial_graph(repaired, rt.variables);
            }
            const auto problems = validate(cs);
            if (!problems.empty())
                throw Error(ErrorCode::InconsistentConstraints,
                            rt.config.case_id + ": derived constraints invalid");
            rt.derived[{type, rate}] = cs;
            const std::filesystem::path path =
                std::filesystem::path(out_dir) / rt.config.case_id /
                ("constraints_" + type + "_" + std::to_string(rate) + ".json");
            std::ofstream out(path);
            out << constraints_to_json(cs, rt.variables).dump(2) << "\n";
        }
    }
}

struct LearnOutcome {
    std::optional<Dag> dag;
    std::optional<Pdag> pdag;
    LearnLog log;
};

inline LearnOutcome run_learner(const std::string& algorithm, const CaseRuntime& rt,
                                const ConstraintSet& cs, const SearchParams& params) {
    LearnOutcome out;
    if (algorithm == "hc")
        out.dag = hill_climb(*rt.data, cs, params, &out.log, rt.scorer.get());
    else if (algorithm == "tabu")
        out.dag = tabu(*rt.data, cs, params, &out.log, rt.scorer.get());
    else if (algorithm == "mmhc")
        out.dag = mmhc(*rt.data, cs, params, &out.log, rt.scorer.get(), rt.tester.get());
    else if (algorithm == "pc_stable")
        out.pdag = pc_stable(*rt.data, cs, params, &out.log, rt.tester.get());
    else
        throw Error(ErrorCode::ConfigError, "unknown algorithm: " + algorithm);
    return out;
}

}  // namespace detail

// Runs the full grid: per case, replay elicitation, tally, derive constraint
// sets; per (algorithm x constraint type x rate) plus an unconstrained
// baseline per algorithm, learn, convert to CPDAG, score against the
// reference CPDAG, compute relative changes; write metrics CSV, per-cell
// graph files, the aggregate SVG chart and the box-summary CSV. A failing
// cell is recorded with empty metric fields; it never aborts the grid.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const std::string out_dir = cfg.output_dir;
    std::filesystem::create_directories(out_dir);

    // Union of rates/types needed per constraint derivation.
    std::set<int> all_rates;
    std::set<std::string> all_algorithms;
    for (const auto& block : cfg.grid) {
        for (int r : block.rates) all_rates.insert(r);
        for (const auto& a : block.algorithms) all_algorithms.insert(a);
    }

    std::vector<CaseRuntime> runtimes;
    for (const auto& cc : cfg.cases) {
        CaseRuntime rt = detail::prepare_case(cc, out_dir);
        detail::derive_case_constraints(rt, std::vector<int>(all_rates.begin(), all_rates.end()),
                                        out_dir);
        runtimes.push_back(std::move(rt));
    }

    // Cell list in deterministic order: case, algorithm (canonical order),
    // then constraint type and rate. Baselines first per algorithm.
    std::vector<CellSpec> cells;
    std::set<std::tuple<int, std::string, std::string, int>> seen;
    auto push_cell = [&](int case_index, const std::string& algo, const std::string& type,
                         int rate) {
        if (runtimes[static_cast<size_t>(case_index)].data == nullptr) return;
        if (seen.insert({case_index, algo, type, rate}).second)
            cells.push_back({case_index, algo, type, rate});
    };
    for (int ci = 0; ci < static_cast<int>(cfg.cases.size()); ++ci) {
        for (const auto& algo : known_algorithms()) {
            if (!all_algorithms.count(algo)) continue;
            push_cell(ci, algo, "none", 0);
            for (const auto& type : detail::constraint_type_order()) {
                if (type == "none") continue;
                for (const auto& block : cfg.grid) {
                    if (std::find(block.algorithms.begin(), block.algorithms.end(), algo) ==
                        block.algorithms.end())
                        continue;
                    if (std::find(block.constraint_types.begin(), block.constraint_types.end(),
                                  type) == block.constraint_types.end())
                        continue;
                    for (int rate : block.rates) push_cell(ci, algo, type, rate);
                }
            }
        }
    }

    std::vector<CellResult> results(cells.size());
    detail::parallel_for(static_cast<int>(cells.size()), cfg.workers, [&](int i) {
        const CellSpec& spec = cells[static_cast<size_t>(i)];
        CellResult& res = results[static_cast<size_t>(i)];
        res.spec = spec;
        const CaseRuntime& rt = runtimes[static_cast<size_t>(spec.case_index)];
        try {
            ConstraintSet cs;
            cs.num_variables = rt.variables.size();
            cs.source = {rt.config.case_id, spec.rate, spec.constraint_type};
            if (spec.constraint_type != "none")
                cs = rt.derived.at({spec.constraint_type, spec.rate});

            const auto t0 = std::chrono::steady_clock::now();
            detail::LearnOutcome out = detail::run_learner(spec.algorithm, rt, cs, cfg.search);
            res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                   .count();
            res.moves = out.log.moves;

            const std::string stem =
                spec.algorithm + "_" + spec.constraint_type +
                (spec.constraint_type == "none" ? "" : "_" + std::to_string(spec.rate));
            const std::filesystem::path case_dir =
                std::filesystem::path(out_dir) / rt.config.case_id;
            res.graph_file = (case_dir / (stem + ".csv")).string();

            Pdag learnt_pattern;
            if (out.dag.has_value()) {
                save_edge_list(res.graph_file, *out.dag);
                learnt_pattern = dag_to_cpdag(*out.dag);
                res.bic = rt.scorer->total(*out.dag);
            } else {
                save_edge_list(res.graph_file, *out.pdag);
                learnt_pattern = *out.pdag;
                if (auto extension = extend_to_dag(*out.pdag))
                    res.bic = rt.scorer->total(*extension);
                // A non-extensible PDAG leaves the BIC field empty.
            }
            const ConfusionCounts c = confusion(learnt_pattern, rt.reference_cpdag);
            res.f1 = f1(c);
            res.bsf = bsf(c);
            res.shd = shd(learnt_pattern, rt.reference_cpdag);

            nlohmann::json sidecar{
                {"algorithm", spec.algorithm},
                {"constraint_type", spec.constraint_type},
                {"rate", spec.rate},
                {"case", rt.config.case_id},
                {"params",
                 {{"alpha", cfg.search.alpha},
                  {"tabu_length", cfg.search.tabu_length},
                  {"tabu_max_worse_moves", cfg.search.tabu_max_worse_moves},
                  {"max_in_degree",
                   cfg.search.max_in_degree ? nlohmann::json(*cfg.search.max_in_degree)
                                            : nlohmann::json(nullptr)},
                  {"seed", cfg.search.seed}}},
                {"moves", out.log.moves},
                {"ci_tests", out.log.ci_tests},
                {"warnings", out.log.warnings},
                {"wall_seconds", res.wall_seconds}};
            std::ofstream side(case_dir / (stem + ".json"));
            side << sidecar.dump(2) << "\n";
        } catch (const std::exception& e) {
            res.failed = true;
            res.failure = e.what();
        }
    });

    // Relative changes against the same case/algorithm baseline.
    std::map<std::pair<int, std::string>, const CellResult*> baselines;
    for (const auto& r : results)
        if (r.spec.constraint_type == "none") baselines[{r.spec.case_index, r.spec.algorithm}] = &r;
    for (auto& r : results) {
        if (r.spec.constraint_type == "none" || r.failed) continue;
        auto it = baselines.find({r.spec.case_index, r.spec.algorithm});
        if (it == baselines.end() || it->second->failed) continue;
        const CellResult& b = *it->second;
        if (r.f1 && b.f1) r.rel_f1 = relative_change(*r.f1, *b.f1, MetricKind::F1);
        if (r.bsf && b.bsf) r.rel_bsf = relative_change(*r.bsf, *b.bsf, MetricKind::Bsf);
        if (r.shd && b.shd)
            r.rel_shd = relative_change(static_cast<double>(*r.shd), static_cast<double>(*b.shd),
                                        MetricKind::Shd);
        if (r.bic && b.bic) r.rel_bic = relative_change(*r.bic, *b.bic, MetricKind::Bic);
    }

    ExperimentReport report;
    report.output_dir = out_dir;
    report.cells = static_cast<int>(results.size());
    for (const auto& r : results)
        if (r.failed) ++report.failed_cells;

    // Metrics CSV.
    report.metrics_csv = (std::filesystem::path(out_dir) / "metrics.csv").string();
    {
        std::ofstream out(report.metrics_csv);
        out << "case,algorithm,constraint_type,rate,f1,bsf,shd,bic,rel_f1,rel_bsf,rel_shd,rel_bic\n";
        for (const auto& r : results) {
            const auto& rt = runtimes[static_cast<size_t>(r.spec.case_index)];
            out << rt.config.case_id << "," << r.spec.algorithm << "," << r.spec.constraint_type
                << "," << (r.spec.constraint_type == "none" ? "" : std::to_string(r.spec.rate))
                << "," << detail::fmt_opt(r.f1, 6) << "," << detail::fmt_opt(r.bsf, 6) << ","
                << (r.shd ? std::to_string(*r.shd) : "") << "," << detail::fmt_opt(r.bic, 4) << ","
                << detail::fmt_opt(r.rel_f1, 4) << "," << detail::fmt_opt(r.rel_bsf, 4) << ","
                << detail::fmt_opt(r.rel_shd, 4) << "," << detail::fmt_opt(r.rel_bic, 4) << "\n";
        }
    }

    // Box summaries of the absolute scores per (constraint type, rate).
    report.box_csv = (std::filesystem::path(out_dir) / "box_summary.csv").string();
    {
        std::ofstream out(report.box_csv);
        out << "metric,constraint_type,rate,count,min,q1,median,mean,q3,max\n";
        const std::vector<std::string> metrics = {"f1", "bsf", "shd", "bic"};
        for (const auto& metric : metrics) {
            for (const auto& type : detail::constraint_type_order()) {
                std::set<int> rates_here;
                for (const auto& r : results)
                    if (r.spec.constraint_type == type) rates_here.insert(r.spec.rate);
                for (int rate : rates_here) {
                    std::vector<double> values;
                    for (const auto& r : results) {
                        if (r.spec.constraint_type != type || r.spec.rate != rate || r.failed)
                            continue;
                        if (metric == "f1" && r.f1) values.push_back(*r.f1);
                        if (metric == "bsf" && r.bsf) values.push_back(*r.bsf);
                        if (metric == "shd" && r.shd)
                            values.push_back(static_cast<double>(*r.shd));
                        if (metric == "bic" && r.bic) values.push_back(*r.bic);
                    }
                    if (values.empty()) continue;
                    const BoxSummary b = summarize_box(values);
                    out << metric << "," << type << ","
                        << (type == "none" ? "" : std::to_string(rate)) << "," << values.size()
                        << "," << detail::fmt(b.min, 6) << "," << detail::fmt(b.q1, 6) << ","
                        << detail::fmt(b.median, 6) << "," << detail::fmt(b.mean, 6) << ","
                        << detail::fmt(b.q3, 6) << "," << detail::fmt(b.max, 6) << "\n";
                }
            }
        }
    }

    // Aggregate SVG: one panel per relative metric, one bar per
    // (constraint type, rate), bar value = unweighted mean over cells.
    report.svg = (std::filesystem::path(out_dir) / "relative_change.svg").string();
    write_relative_change_svg(report.svg, results);

    // Post-hoc audit: every referenced graph satisfies its cell's constraints.
    for (const auto& r : results) {
        if (r.failed) continue;
        const auto& rt = runtimes[static_cast<size_t>(r.spec.case_index)];
        const Pdag g = load_pdag(r.graph_file, rt.variables);
        ConstraintSet cs;
        if (r.spec.constraint_type != "none")
            cs = rt.derived.at({r.spec.constraint_type, r.spec.rate});
        for (const auto& e : cs.required)
            if (!g.has_directed(e.first, e.second))
                throw Error(ErrorCode::Internal, "audit: required edge missing in " + r.graph_file);
        for (const auto& e : g.directed())
            if (cs.forbidden.count(e))
                throw Error(ErrorCode::Internal, "audit: forbidden edge present in " + r.graph_file);
        if (!is_acyclic(g.directed(), g.num_variables()))
            throw Error(ErrorCode::Internal, "audit: directed cycle in " + r.graph_file);
    }

    // Run notes (dropped edges, replay warnings).
    {
        std::ofstream out(std::filesystem::path(out_dir) / "run_notes.txt");
        for (const auto& rt : runtimes)
            for (const auto& note : rt.notes) out << note << "\n";
        for (const auto& r : results)
            if (r.failed)
                out << "cell failed: " << r.spec.algorithm << "/" << r.spec.constraint_type << "/"
                    << r.spec.rate << ": " << r.failure << "\n";
    }

    return report;
}

// Grouped-bar SVG of mean relative changes. Each bar carries data-metric,
// data-group and data-value attributes, and each panel records its pixel
// scale, so the chart can be parsed back into the numbers it encodes.
inline void write_relative_change_svg(const std::string& path,
                                      const std::vector<CellResult>& results) {
    struct Panel {
        std::string name;
        std::function<std::optional<double>(const CellResult&)> get;
    };
    const std::vector<Panel> panels = {
        {"rel_f1", [](const CellResult& r) { return r.rel_f1; }},
        {"rel_bsf", [](const CellResult& r) { return r.rel_bsf; }},
        {"rel_shd", [](const CellResult& r) { return r.rel_shd; }},
        {"rel_bic", [](const CellResult& r) { return r.rel_bic; }},
    };

    // Group labels in fixed order.
    std::vector<std::pair<std::string, int>> groups;
    for (const auto& type : detail::constraint_type_order()) {
        if (type == "none") continue;
        std::set<int> rates;
        for (const auto& r : results)
            if (r.spec.constraint_type == type) rates.insert(r.spec.rate);
        for (int rate : rates) groups.emplace_back(type, rate);
    }

    const double panel_w = 720, panel_h = 150, margin = 60, gap = 40;
    const double width = panel_w + 2 * margin;
    const double height = static_cast<double>(panels.size()) * (panel_h + gap) + margin;

    std::ofstream out(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "  <title>Mean relative change in CPDAG scores by constraint type and rate</title>\n";

    for (size_t pi = 0; pi < panels.size(); ++pi) {
        const auto& panel = panels[pi];
        std::vector<std::optional<double>> means(groups.size());
        double max_abs = 1.0;
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            double sum = 0;
            int count = 0;
            for (const auto& r : results) {
                if (r.spec.constraint_type != groups[gi].first || r.spec.rate != groups[gi].second)
                    continue;
                if (auto v = panel.get(r)) {
                    sum += *v;
                    ++count;
                }
            }
            if (count > 0) {
                means[gi] = sum / count;
                max_abs = std::max(max_abs, std::abs(*means[gi]));
            }
        }
        const double top = margin / 2 + static_cast<double>(pi) * (panel_h + gap);
        const double zero_y = top + panel_h / 2;
        const double scale = (panel_h / 2 - 6) / max_abs;  // px per percent
        out << "  <g data-panel=\"" << panel.name << "\" data-zero-y=\"" << detail::fmt(zero_y, 3)
            << "\" data-scale=\"" << detail::fmt(scale, 6) << "\">\n";
        out << "    <text x=\"" << margin << "\" y=\"" << detail::fmt(top - 4, 3)
            << "\" font-size=\"12\">" << panel.name << " (mean % change)</text>\n";
        out << "    <line x1=\"" << margin << "\" y1=\"" << detail::fmt(zero_y, 3) << "\" x2=\""
            << margin + panel_w << "\" y2=\"" << detail::fmt(zero_y, 3)
            << "\" stroke=\"#888\" stroke-width=\"1\"/>\n";
        const double slot = groups.empty() ? panel_w : panel_w / static_cast<double>(groups.size());
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            if (!means[gi]) continue;
            const double v = *means[gi];
            const double h = std::abs(v) * scale;
            const double x = margin + static_cast<double>(gi) * slot + slot * 0.2;
            const double y = v >= 0 ? zero_y - h : zero_y;
            const std::string group_name =
                groups[gi].first + "-" + std::to_string(groups[gi].second);
            out << "    <rect data-metric=\"" << panel.name << "\" data-group=\"" << group_name
                << "\" data-value=\"" << detail::fmt(v, 6) << "\" x=\"" << detail::fmt(x, 3)
                << "\" y=\"" << detail::fmt(y, 3) << "\" width=\"" << detail::fmt(slot * 0.6, 3)
                << "\" height=\"" << detail::fmt(h, 3) << "\" fill=\""
                << (v >= 0 ? "#3b6fb6" : "#c0392b") << "\"/>\n";
            out << "    <text x=\"" << detail::fmt(x, 3) << "\" y=\""
                << detail::fmt(top + panel_h + 12, 3) << "\" font-size=\"10\">"
                << detail::xml_escape(group_name) << "</text>\n";
        }
        out << "  </g>\n";
    }
    out << "</svg>\n";
}

}  // namespace causalkit
