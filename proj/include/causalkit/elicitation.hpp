#pragma once

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "causalkit/errors.hpp"

namespace causalkit {

// One of the ten phrasings used to ask the model for causal links between
// the variable labels of a case.
struct PromptTemplate {
    int id = 0;  // 1..10
    std::string text;
};

inline const std::vector<PromptTemplate>& prompt_templates() {
    static const std::vector<PromptTemplate> templates = {
        {1, "Could you identify and list the causal connections among the variables within the dataset?"},
        {2, "Would you mind detailing the cause-and-effect relationships present among the dataset's variables?"},
        {3, "Can you provide an analysis of the causal linkages between the dataset's variables?"},
        {4, "I'd appreciate it if you could enumerate the causative associations among the variables in our dataset."},
        {5, "Could you explore and list out the causal relations found within the dataset's variables?"},
        {6, "Please, could you dissect and document the causal connections that exist among the dataset's variables?"},
        {7, "Would you be able to chart out the causal pathways linking the variables in the dataset?"},
        {8, "Can you draft a list of causal relationships that are evident among the variables of the dataset?"},
        {9, "I'd like you to investigate and compile a list of the cause-and-effect dynamics among the dataset's variables."},
        {10, "Could you analyze and itemize the causal links present within the dataset, focusing on the variables' interactions?"},
    };
    return templates;
}

inline const PromptTemplate& prompt_template(int id) {
    const auto& all = prompt_templates();
    if (id < 1 || id > static_cast<int>(all.size()))
        throw Error(ErrorCode::Usage, "prompt id must be in 1..10");
    return all[static_cast<size_t>(id - 1)];
}

inline constexpr const char* kOutputFormatInstruction =
    "Answer only with lines of the form X -> Y using the exact variable names.";

// Renders the full prompt: template sentence, the label list, and a fixed
// output-format instruction. Labels are joined with ", ", or with "; " when
// any label itself contains a comma.
inline std::string build_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& labels) {
    if (labels.empty()) throw Error(ErrorCode::EmptyInput, "build_prompt: no labels");
    bool comma_in_label = false;
    for (const auto& l : labels)
        if (l.find(',') != std::string::npos) comma_in_label = true;
    const std::string sep = comma_in_label ? "; " : ", ";
    std::string prompt = tmpl.text;
    prompt += "\nVariables: ";
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i) prompt += sep;
        prompt += labels[i];
    }
    prompt += "\n";
    prompt += kOutputFormatInstruction;
    return prompt;
}

namespace detail {

inline std::string fold_case(const std::string& s) {
    std::string out = s;
    for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Strips a leading enumeration marker such as "1.", "23)", "-" or "*".
inline std::string strip_enumeration(const std::string& s) {
    size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    size_t d = i;
    while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
    if (d > i && d < s.size() && (s[d] == '.' || s[d] == ')')) return s.substr(d + 1);
    if (i < s.size() && (s[i] == '-' || s[i] == '*') && i + 1 < s.size() && s[i + 1] == ' ')
        return s.substr(i + 1);
    return s.substr(i);
}

// Splits a line at the first "->", Unicode arrow, or "causes" separator.
inline bool split_causal_line(const std::string& line, std::string& lhs, std::string& rhs) {
    size_t pos = line.find("->");
    size_t len = 2;
    if (pos == std::string::npos) {
        pos = line.find("\xE2\x86\x92");  // U+2192
        len = 3;
    }
    if (pos == std::string::npos) {
        const std::string folded = fold_case(line);
        pos = folded.find(" causes ");
        len = 8;
    }
    if (pos == std::string::npos) return false;
    lhs = trim(line.substr(0, pos));
    rhs = trim(line.substr(pos + len));
    while (!rhs.empty() && (rhs.back() == '.' || rhs.back() == ',' || rhs.back() == ';'))
        rhs.pop_back();
    rhs = trim(rhs);
    return !lhs.empty() && !rhs.empty();
}

}  // namespace detail

// Extracts directed label pairs from a raw model response. Accepted per line:
// "X -> Y", "X [arrow] Y" and "X causes Y", with an optional leading
// enumeration marker. Matching is exact after trimming and case folding;
// anything else becomes a warning, never an error. Returned labels use the
// canonical casing of the input label list.
inline std::pair<std::vector<std::pair<std::string, std::string>>, std::vector<std::string>>
parse_edges(const std::string& raw, const std::vector<std::string>& labels) {
    std::map<std::string, std::string> canonical;  // folded -> canonical
    for (const auto& l : labels) canonical.emplace(detail::fold_case(l), l);

    std::vector<std::pair<std::string, std::string>> edges;
    std::vector<std::string> warnings;
    std::set<std::pair<std::string, std::string>> seen;

    size_t start = 0;
    while (start <= raw.size()) {
        size_t end = raw.find('\n', start);
        std::string line = raw.substr(start, end == std::string::npos ? std::string::npos : end - start);
        start = end == std::string::npos ? raw.size() + 1 : end + 1;

        line = detail::trim(detail::strip_enumeration(line));
        if (line.empty()) continue;
        std::string lhs, rhs;
        if (!detail::split_causal_line(line, lhs, rhs)) {
            warnings.push_back("unparsed line: " + line);
            continue;
        }
        auto p = canonical.find(detail::fold_case(lhs));
        auto c = canonical.find(detail::fold_case(rhs));
        if (p == canonical.end() || c == canonical.end()) {
            warnings.push_back("unknown label in edge: " + lhs + " -> " + rhs);
            continue;
        }
        if (p->second == c->second) {
            warnings.push_back("self-loop dropped: " + p->second);
            continue;
        }
        auto key = std::make_pair(p->second, c->second);
        if (seen.insert(key).second) edges.push_back(key);
    }
    return {edges, warnings};
}

inline std::string serialize_edges(const std::vector<std::pair<std::string, std::string>>& edges) {
    std::string out;
    for (const auto& [p, c] : edges) {
        out += p;
        out += " -> ";
        out += c;
        out += "\n";
    }
    return out;
}

// Everything recorded about one elicitation call, cached as one JSON file so
// downstream stages can replay it byte-identically without a network.
struct ElicitationRecord {
    std::string case_id;
    int prompt_id = 0;
    std::string request;
    std::string raw_response;
    std::vector<std::pair<std::string, std::string>> parsed_edges;
    std::vector<std::string> warnings;
    std::string timestamp;
    std::string model_id;
};

inline nlohmann::json record_to_json(const ElicitationRecord& r) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [p, c] : r.parsed_edges) edges.push_back({p, c});
    return nlohmann::json{{"case_id", r.case_id},     {"prompt_id", r.prompt_id},
                          {"request", r.request},     {"raw_response", r.raw_response},
                          {"parsed_edges", edges},    {"warnings", r.warnings},
                          {"timestamp", r.timestamp}, {"model_id", r.model_id}};
}

inline ElicitationRecord record_from_json(const nlohmann::json& j) {
    ElicitationRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    r.prompt_id = j.at("prompt_id").get<int>();
    r.request = j.at("request").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    for (const auto& e : j.at("parsed_edges"))
        r.parsed_edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.timestamp = j.value("timestamp", std::string());
    r.model_id = j.value("model_id", std::string());
    return r;
}

// Sends a rendered prompt and returns the raw completion text. Throws
// Error(HttpFailure) on transport problems.
using ChatTransport = std::function<std::string(const std::string& prompt)>;

enum class TransportMode { Live, Replay };

struct ElicitOptions {
    std::string cache_dir;
    std::string model_id = "gpt-4-turbo";
    int max_retries = 3;
    int backoff_ms = 250;
};

// cache_dir is the per-case record directory.
inline std::string record_path(const std::string& cache_dir, int prompt_id) {
    char name[32];
    std::snprintf(name, sizeof(name), "prompt_%02d.json", prompt_id);
    return (std::filesystem::path(cache_dir) / name).string();
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void save_record(const std::string& path, const ElicitationRecord& r) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write elicitation record: " + path);
    out << record_to_json(r).dump(2) << "\n";
}

inline ElicitationRecord load_record(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::CacheMiss, "no cached elicitation record: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path + ": " + e.what());
    }
    return record_from_json(j);
}

// Runs one elicitation. Live mode renders the prompt, calls the transport
// with bounded retries, persists the raw response before parsing it, then
// persists the parsed record. Replay mode returns the cached record as-is.
inline ElicitationRecord elicit(const std::string& case_id, int prompt_id,
                                const std::vector<std::string>& labels, TransportMode mode,
                                const ElicitOptions& options,
                                const ChatTransport& transport = nullptr) {
    const std::string path = record_path(options.cache_dir, prompt_id);
    if (mode == TransportMode::Replay) return load_record(path);

    if (!transport) throw Error(ErrorCode::MissingApiKey, "live elicitation needs a transport");
    ElicitationRecord r;
    r.case_id = case_id;
    r.prompt_id = prompt_id;
    r.request = build_prompt(prompt_template(prompt_id), labels);
    r.model_id = options.model_id;

    std::string last_error;
    bool ok = false;
    for (int attempt = 0; attempt < std::max(1, options.max_retries); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.backoff_ms * (1LL << (attempt - 1))));
        try {
            r.raw_response = transport(r.request);
            ok = true;
            break;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    if (!ok)
        throw Error(ErrorCode::HttpFailure,
                    "chat request failed after " + std::to_string(options.max_retries) +
                        " attempts: " + last_error);

    r.timestamp = utc_timestamp();
    save_record(path, r);  // raw response survives even if parsing throws
    auto [edges, warnings] = parse_edges(r.raw_response, labels);
    r.parsed_edges = std::move(edges);
    r.warnings = std::move(warnings);
    save_record(path, r);
    return r;
}

}  // namespace causalkit
