// Command-line front end: elicit, consensus, constraints derive, learn, eval
// and experiment subcommands over the causalkit library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "causalkit/causalkit.hpp"

namespace {

using namespace causalkit;

int exit_code_for(const Error& e) { return static_cast<int>(e.code()); }

struct CaseContext {
    CaseConfig config;
    VariableIndex variables;
    std::optional<DiscreteDataset> data;
};

CaseContext load_case(const std::string& config_path, const std::string& case_id) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    for (const auto& c : cfg.cases) {
        if (c.case_id != case_id) continue;
        CaseContext ctx;
        ctx.config = c;
        if (c.dataset_path.has_value()) ctx.data = load_csv(*c.dataset_path);
        ctx.variables = detail::case_variable_index(c, ctx.data ? &*ctx.data : nullptr);
        return ctx;
    }
    throw Error(ErrorCode::ConfigError, "case not found in config: " + case_id);
}

// Splits a base URL like https://host[:port][/prefix] into the client target
// and a path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::Usage, "base url must include a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

ChatTransport make_http_transport(const std::string& base_url, const std::string& model,
                                  double temperature, const std::string& api_key) {
    return [=](const std::string& prompt) -> std::string {
        const auto [host, prefix] = split_base_url(base_url);
        httplib::Client client(host);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        nlohmann::json body{{"model", model},
                            {"temperature", temperature},
                            {"messages", {{{"role", "user"}, {"content", prompt}}}}};
        httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
        auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res)
            throw std::runtime_error("transport error: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw std::runtime_error("http status " + std::to_string(res->status) + ": " +
                                     res->body.substr(0, 200));
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    };
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

int cmd_elicit(const std::string& config_path, const std::string& case_id, bool live,
               const std::string& base_url, const std::string& model, double temperature) {
    const CaseContext ctx = load_case(config_path, case_id);
    ElicitOptions opts;
    opts.cache_dir = ctx.config.elicitation_dir;
    opts.model_id = model;

    ChatTransport transport;
    if (live) {
        const std::string key = env_or("LLM_API_KEY", "");
        if (key.empty())
            throw Error(ErrorCode::MissingApiKey, "live elicitation requires LLM_API_KEY");
        transport = make_http_transport(base_url, model, temperature, key);
    }
    for (int prompt_id = 1; prompt_id <= 10; ++prompt_id) {
        const auto record =
            elicit(case_id, prompt_id, ctx.variables.labels(),
                   live ? TransportMode::Live : TransportMode::Replay, opts, transport);
        std::cout << case_id << " prompt " << record.prompt_id << ": "
                  << record.parsed_edges.size() << " edges, " << record.warnings.size()
                  << " warnings\n";
    }
    return 0;
}

std::vector<EdgeSet> replayed_edge_sets(const CaseContext& ctx) {
    ElicitOptions opts;
    opts.cache_dir = ctx.config.elicitation_dir;
    std::vector<EdgeSet> graphs;
    for (int prompt_id = 1; prompt_id <= 10; ++prompt_id) {
        const auto record = elicit(ctx.config.case_id, prompt_id, ctx.variables.labels(),
                                   TransportMode::Replay, opts);
        EdgeSet edges;
        for (const auto& [p, c] : record.parsed_edges) {
            auto pi = ctx.variables.find(p);
            auto ci = ctx.variables.find(c);
            if (!pi || !ci) {
                std::cerr << "warning: dropping edge with unknown label " << p << " -> " << c
                          << "\n";
                continue;
            }
            edges.emplace(*pi, *ci);
        }
        graphs.push_back(std::move(edges));
    }
    return graphs;
}

int cmd_consensus(const std::string& config_path, const std::string& case_id,
                  const std::vector<int>& rates, const std::string& out_dir) {
    const CaseContext ctx = load_case(config_path, case_id);
    const EdgeTally t = tally(replayed_edge_sets(ctx));

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(std::filesystem::path(out_dir) / "tally.csv");
        write_tally_csv(out, t, ctx.variables);
    }
    const Dag consensus_graph = model_average(t, 2.0 / 3.0, ctx.variables);
    save_edge_list((std::filesystem::path(out_dir) / "consensus.csv").string(), consensus_graph);

    std::cout << case_id << ": " << t.counts.size() << " distinct edges over " << t.total_inputs
              << " outputs; consensus graph has " << consensus_graph.num_edges() << " edges\n";
    for (int rate : rates) {
        const auto s = edge_sets_by_rate(t, {rate / 100.0})[0];
        std::cout << "rate " << rate << "%: " << s.size() << " edges\n";
    }
    return 0;
}

int cmd_constraints_derive(const std::string& config_path, const std::string& case_id,
                           const std::string& type, int rate, std::string out_path) {
    if (type != "required" && type != "initial" && type != "temporal")
        throw Error(ErrorCode::Usage, "--type must be required|initial|temporal");
    if (rate != 33 && rate != 50 && rate != 67)
        throw Error(ErrorCode::Usage, "--rate must be 33, 50 or 67");
    const CaseContext ctx = load_case(config_path, case_id);
    const EdgeTally t = tally(replayed_edge_sets(ctx));
    const int n = ctx.variables.size();

    const EdgeSet raw = edge_sets_by_rate(t, {rate / 100.0})[0];
    std::vector<Edge> dropped;
    const EdgeSet repaired = repair_acyclic(raw, t, n, &dropped);
    for (const auto& e : dropped)
        std::cerr << "warning: dropped cycle-forming edge " << ctx.variables.label(e.first)
                  << " -> " << ctx.variables.label(e.second) << "\n";

    ConstraintSet cs;
    cs.num_variables = n;
    cs.source = {case_id, rate, type};
    if (type == "required") cs.required = repaired;
    else if (type == "temporal") cs.forbidden = derive_temporal(repaired, n);
    else cs.initial = as_initial_graph(repaired, ctx.variables);

    if (out_path.empty())
        out_path = "out/" + case_id + "/constraints_" + type + "_" + std::to_string(rate) + ".json";
    std::filesystem::create_directories(std::filesystem::path(out_path).parent_path());
    std::ofstream out(out_path);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + out_path);
    out << constraints_to_json(cs, ctx.variables).dump(2) << "\n";
    std::cout << "wrote " << out_path << " (required " << cs.required.size() << ", forbidden "
              << cs.forbidden.size() << ", initial "
              << (cs.initial ? std::to_string(cs.initial->num_edges()) : std::string("null"))
              << ")\n";
    return 0;
}

int cmd_learn(const std::string& algo, const std::string& data_path,
              const std::string& constraints_path, const std::string& out_path,
              const SearchParams& params, bool allow_missing) {
    const DiscreteDataset data = load_csv(data_path, allow_missing);
    ConstraintSet cs;
    cs.num_variables = data.num_variables();
    if (!constraints_path.empty()) {
        std::ifstream in(constraints_path);
        if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + constraints_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::FormatError, constraints_path + ": " + e.what());
        }
        std::vector<std::string> warnings;
        cs = constraints_from_json(j, data.variables(), &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    }

    LearnLog log;
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Dag> dag;
    std::optional<Pdag> pdag;
    if (algo == "hc") dag = hill_climb(data, cs, params, &log);
    else if (algo == "tabu") dag = tabu(data, cs, params, &log);
    else if (algo == "mmhc") dag = mmhc(data, cs, params, &log);
    else if (algo == "pc_stable") pdag = pc_stable(data, cs, params, &log);
    else throw Error(ErrorCode::Usage, "--algo must be hc|tabu|pc_stable|mmhc");
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::path out_file(out_path);
    if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
    if (dag) save_edge_list(out_path, *dag);
    else save_edge_list(out_path, *pdag);

    nlohmann::json sidecar{
        {"algorithm", algo},
        {"data", data_path},
        {"constraints", constraints_path.empty() ? nlohmann::json(nullptr)
                                                 : nlohmann::json(constraints_path)},
        {"params",
         {{"alpha", params.alpha},
          {"tabu_length", params.tabu_length},
          {"tabu_max_worse_moves", params.tabu_max_worse_moves},
          {"max_in_degree",
           params.max_in_degree ? nlohmann::json(*params.max_in_degree) : nlohmann::json(nullptr)},
          {"seed", params.seed}}},
        {"source", {{"case", cs.source.case_id}, {"rate", cs.source.rate_percent},
                    {"type", cs.source.type}}},
        {"moves", log.moves},
        {"ci_tests", log.ci_tests},
        {"warnings", log.warnings},
        {"wall_seconds", seconds}};
    std::ofstream side(out_path + ".json");
    side << sidecar.dump(2) << "\n";

    const int edges = dag ? dag->num_edges() : pdag->num_edges();
    std::cout << algo << ": " << edges << " edges, " << log.moves << " moves, "
              << log.ci_tests << " ci tests -> " << out_path << "\n";
    for (const auto& w : log.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

Pdag load_pattern(const std::string& path, const VariableIndex& vars) {
    const auto rows = read_edge_list_rows(path);
    bool all_directed = true;
    for (const auto& r : rows) all_directed = all_directed && r.directed;
    if (all_directed) return dag_to_cpdag(dag_from_rows(rows, vars));
    return pdag_from_rows(rows, vars);
}

int cmd_eval(const std::string& learnt_path, const std::string& reference_path,
             const std::string& data_path, bool allow_missing) {
    std::optional<DiscreteDataset> data;
    VariableIndex vars;
    if (!data_path.empty()) {
        data = load_csv(data_path, allow_missing);
        vars = data->variables();
    } else {
        auto labels = labels_in_rows(read_edge_list_rows(learnt_path));
        for (const auto& l : labels_in_rows(read_edge_list_rows(reference_path))) {
            bool seen = false;
            for (const auto& existing : labels) seen = seen || existing == l;
            if (!seen) labels.push_back(l);
        }
        vars = VariableIndex(labels);
    }
    const Pdag learnt = load_pattern(learnt_path, vars);
    const Pdag reference = load_pattern(reference_path, vars);
    const auto c = confusion(learnt, reference);

    char line[160];
    std::snprintf(line, sizeof(line), "f1=%.3f bsf=%.3f shd=%lld", f1(c), bsf(c),
                  shd(learnt, reference));
    std::cout << line;
    if (data.has_value()) {
        const CachedScorer scorer(*data);
        std::optional<double> bic;
        const auto rows = read_edge_list_rows(learnt_path);
        bool all_directed = true;
        for (const auto& r : rows) all_directed = all_directed && r.directed;
        if (all_directed) {
            bic = scorer.total(dag_from_rows(rows, vars));
        } else if (auto ext = extend_to_dag(pdag_from_rows(rows, vars))) {
            bic = scorer.total(*ext);
        }
        if (bic) std::snprintf(line, sizeof(line), " bic=%.4f", *bic);
        else std::snprintf(line, sizeof(line), " bic=na");
        std::cout << line;
    }
    std::cout << "\n";
    return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_override, int workers) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (workers > 0) cfg.workers = workers;
    const ExperimentReport report = run_experiment(cfg);
    std::cout << "experiment: " << report.cells << " cells (" << report.failed_cells
              << " failed)\n"
              << "metrics: " << report.metrics_csv << "\n"
              << "box summary: " << report.box_csv << "\n"
              << "chart: " << report.svg << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-elicited constraints for discrete Bayesian network structure learning"};
    app.require_subcommand(1);

    std::string config_path = "configs/canonical.json";
    std::string case_id, out_path, out_dir;
    std::string base_url = env_or("LLM_BASE_URL", "https://api.openai.com/v1");
    std::string model = env_or("LLM_MODEL", "gpt-4-turbo");
    double temperature = 1.0;
    bool live = false, replay = false;

    auto* elicit_cmd = app.add_subcommand("elicit", "Run or replay the 10 elicitation prompts");
    elicit_cmd->add_option("--case", case_id, "case id from the config")->required();
    elicit_cmd->add_option("--config", config_path, "experiment config file");
    elicit_cmd->add_flag("--live", live, "call the chat endpoint (needs LLM_API_KEY)");
    elicit_cmd->add_flag("--replay", replay, "serve cached records (default)");
    elicit_cmd->add_option("--base-url", base_url, "chat completions base url");
    elicit_cmd->add_option("--model", model, "model id");
    elicit_cmd->add_option("--temperature", temperature, "sampling temperature");

    std::vector<int> rates{33, 50, 67};
    auto* consensus_cmd = app.add_subcommand("consensus", "Tally replayed outputs per case");
    consensus_cmd->add_option("--case", case_id, "case id from the config")->required();
    consensus_cmd->add_option("--config", config_path, "experiment config file");
    consensus_cmd->add_option("--rates", rates, "threshold rates in percent")->delimiter(',');
    consensus_cmd->add_option("--out-dir", out_dir, "output directory (default out/<case>)");

    std::string ctype;
    int crate = 50;
    auto* constraints_cmd = app.add_subcommand("constraints", "Constraint file operations");
    auto* derive_cmd = constraints_cmd->add_subcommand("derive", "Derive a constraint file");
    derive_cmd->add_option("--case", case_id, "case id from the config")->required();
    derive_cmd->add_option("--config", config_path, "experiment config file");
    derive_cmd->add_option("--type", ctype, "required|initial|temporal")->required();
    derive_cmd->add_option("--rate", crate, "threshold rate in percent")->required();
    derive_cmd->add_option("--out", out_path, "output constraint JSON path");

    std::string algo, data_path, constraints_path;
    SearchParams params;
    int max_in_degree = -1;
    auto* learn_cmd = app.add_subcommand("learn", "Learn a structure from a dataset");
    learn_cmd->add_option("--algo", algo, "hc|tabu|pc_stable|mmhc")->required();
    learn_cmd->add_option("--data", data_path, "dataset CSV")->required();
    learn_cmd->add_option("--constraints", constraints_path, "constraint JSON");
    learn_cmd->add_option("--out", out_path, "output edge-list CSV")->required();
    learn_cmd->add_option("--alpha", params.alpha, "significance level");
    learn_cmd->add_option("--tabu-length", params.tabu_length, "tabu list length");
    learn_cmd->add_option("--tabu-max-worse", params.tabu_max_worse_moves,
                          "non-improving move budget");
    learn_cmd->add_option("--max-in-degree", max_in_degree, "parent cap (-1 = none)");
    learn_cmd->add_option("--seed", params.seed, "run seed (recorded in the sidecar)");
    bool allow_missing = false;
    learn_cmd->add_flag("--allow-missing", allow_missing,
                        "treat blank cells as an explicit extra state");

    std::string learnt_path, reference_path;
    auto* eval_cmd = app.add_subcommand("eval", "Score a learnt graph against a reference");
    eval_cmd->add_option("--learnt", learnt_path, "learnt graph CSV")->required();
    eval_cmd->add_option("--reference", reference_path, "reference graph CSV")->required();
    eval_cmd->add_option("--data", data_path, "dataset CSV (enables BIC)");
    eval_cmd->add_flag("--allow-missing", allow_missing,
                       "treat blank cells as an explicit extra state");

    int workers = 0;
    auto* experiment_cmd = app.add_subcommand("experiment", "Run the full experiment grid");
    experiment_cmd->add_option("--config", config_path, "experiment config file")->required();
    experiment_cmd->add_option("--out", out_dir, "override the output directory");
    experiment_cmd->add_option("--workers", workers, "worker threads (0 = hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorCode::Usage);
    }

    try {
        if (elicit_cmd->parsed()) {
            if (live && replay) throw Error(ErrorCode::Usage, "--live and --replay conflict");
            return cmd_elicit(config_path, case_id, live, base_url, model, temperature);
        }
        if (consensus_cmd->parsed()) {
            if (out_dir.empty()) out_dir = "out/" + case_id;
            return cmd_consensus(config_path, case_id, rates, out_dir);
        }
        if (constraints_cmd->parsed() && derive_cmd->parsed())
            return cmd_constraints_derive(config_path, case_id, ctype, crate, out_path);
        if (learn_cmd->parsed()) {
            if (max_in_degree >= 0) params.max_in_degree = max_in_degree;
            return cmd_learn(algo, data_path, constraints_path, out_path, params,
                             allow_missing);
        }
        if (eval_cmd->parsed())
            return cmd_eval(learnt_path, reference_path, data_path, allow_missing);
        if (experiment_cmd->parsed()) return cmd_experiment(config_path, out_dir, workers);
        throw Error(ErrorCode::Usage, "no subcommand given");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::Internal);
    }
}
