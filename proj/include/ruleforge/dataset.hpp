#pragma once

// Task configuration and labeled evaluation samples.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ruleforge/error.hpp"
#include "ruleforge/hashing.hpp"
#include "ruleforge/metrics.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge {

struct TaskSpec {
    std::string task_id;
    double score_min = 1;
    double score_max = 6;
    ScoreKind score_kind = ScoreKind::Integer;
    MetricKind metric = MetricKind::QWK;
    std::vector<std::string> known_aspects;
    int max_subrules = 6;
    int max_aspects = 10;
    /// Gold at or above this counts as relevant for mean AP.
    double relevance_threshold = 1.0;

    double range_width() const noexcept { return score_max - score_min; }

    void validate() const {
        if (!(score_min < score_max)) throw Error(ErrorKind::ConfigError, "score_min must be below score_max");
        if (max_subrules < 1 || max_aspects < 1) throw Error(ErrorKind::ConfigError, "caps must be positive");
        if (max_subrules > max_aspects) throw Error(ErrorKind::ConfigError, "max_subrules exceeds max_aspects");
        if (metric == MetricKind::QWK && score_kind != ScoreKind::Integer)
            throw Error(ErrorKind::ConfigError, "QWK requires an integer score scale");
    }
};

inline json to_json(const TaskSpec& t) {
    return json{{"task_id", t.task_id},
                {"score_min", number_json(t.score_min)},
                {"score_max", number_json(t.score_max)},
                {"score_kind", t.score_kind == ScoreKind::Integer ? "integer" : "real"},
                {"metric", std::string(to_string(t.metric))},
                {"known_aspects", t.known_aspects},
                {"max_subrules", t.max_subrules},
                {"max_aspects", t.max_aspects},
                {"relevance_threshold", number_json(t.relevance_threshold)}};
}

inline TaskSpec task_from_json(const json& j) {
    TaskSpec t;
    try {
        t.task_id = j.value("task_id", std::string{"task"});
        t.score_min = j.at("score_min").get<double>();
        t.score_max = j.at("score_max").get<double>();
        const auto kind = j.value("score_kind", std::string{"integer"});
        if (kind != "integer" && kind != "real") throw Error(ErrorKind::ConfigError, "score_kind must be integer|real");
        t.score_kind = kind == "integer" ? ScoreKind::Integer : ScoreKind::Real;
        t.metric = metric_from_string(j.at("metric").get<std::string>());
        t.known_aspects = j.value("known_aspects", std::vector<std::string>{});
        t.max_subrules = j.at("max_subrules").get<int>();
        t.max_aspects = j.at("max_aspects").get<int>();
        t.relevance_threshold = j.value("relevance_threshold", 1.0);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("task spec: ") + e.what());
    }
    t.validate();
    return t;
}

/// Per-task search settings for the four benchmark tasks.
inline TaskSpec task_preset(const std::string& name) {
    TaskSpec t;
    t.task_id = name;
    if (name == "asap") {
        t.score_min = 1, t.score_max = 6, t.metric = MetricKind::QWK, t.max_subrules = 6, t.max_aspects = 10;
        t.known_aspects = {"Ideas & Content", "Organization",  "Word Choice",
                           "Sentence Fluency", "Conventions", "Evidence & Support"};
    } else if (name == "amazon") {
        t.score_min = 1, t.score_max = 5, t.metric = MetricKind::MSE, t.max_subrules = 3, t.max_aspects = 7;
    } else if (name == "relish") {
        t.score_min = 0, t.score_max = 2, t.metric = MetricKind::MeanAP, t.max_subrules = 4, t.max_aspects = 8;
        t.known_aspects = {"Goal", "Method"};
    } else if (name == "summeval") {
        t.score_min = 1, t.score_max = 5, t.score_kind = ScoreKind::Real, t.metric = MetricKind::SpearmanRho;
        t.max_subrules = 4, t.max_aspects = 4;
        t.known_aspects = {"Coherence", "Fluency", "Consistency", "Relevance"};
    } else {
        throw Error(ErrorKind::ConfigError, "unknown task preset '" + name + "'");
    }
    return t;
}

// Samples --------------------------------------------------------------------

enum class Split { Distill, Train, Test };

inline std::string_view to_string(Split s) {
    switch (s) {
    case Split::Distill: return "distill";
    case Split::Train: return "train";
    case Split::Test: return "test";
    }
    return "distill";
}

inline Split split_from_string(std::string_view s) {
    if (s == "distill") return Split::Distill;
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw Error(ErrorKind::ParseError, "unknown split '" + std::string(s) + "'");
}

struct SingleText {
    std::string text;
    friend bool operator==(const SingleText&, const SingleText&) = default;
};

struct QueryCandidate {
    std::string query;
    std::string candidate;
    std::string group_id;
    friend bool operator==(const QueryCandidate&, const QueryCandidate&) = default;
};

struct LabeledSample {
    std::string sample_id;
    std::variant<SingleText, QueryCandidate> payload;
    double gold = 0;
    Split split = Split::Distill;

    const QueryCandidate* query_candidate() const { return std::get_if<QueryCandidate>(&payload); }

    /// Text rendered into prompts.
    std::string render() const {
        if (const auto* qc = query_candidate()) return "Query: " + qc->query + "\nCandidate: " + qc->candidate;
        return std::get<SingleText>(payload).text;
    }

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

inline json to_json(const LabeledSample& s) {
    json j{{"id", s.sample_id}};
    if (const auto* qc = s.query_candidate()) {
        j["query"] = qc->query;
        j["candidate"] = qc->candidate;
        j["group_id"] = qc->group_id;
    } else {
        j["text"] = std::get<SingleText>(s.payload).text;
    }
    j["gold"] = number_json(s.gold);
    j["split"] = std::string(to_string(s.split));
    return j;
}

inline LabeledSample sample_from_json(const json& j, const TaskSpec& task, std::size_t line) {
    LabeledSample s;
    try {
        s.sample_id = j.at("id").get<std::string>();
        if (j.contains("query")) {
            QueryCandidate qc{j.at("query").get<std::string>(), j.at("candidate").get<std::string>(),
                              j.at("group_id").get<std::string>()};
            if (qc.group_id.empty()) throw Error(ErrorKind::ParseError, "empty group_id", line);
            s.payload = std::move(qc);
        } else {
            s.payload = SingleText{j.at("text").get<std::string>()};
        }
        s.gold = j.at("gold").get<double>();
        s.split = split_from_string(j.value("split", std::string{"distill"}));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what(), line);
    } catch (const Error& e) {
        if (e.line()) throw;
        throw Error(e.kind(), e.detail(), line);
    }
    if (!(s.gold >= task.score_min && s.gold <= task.score_max))
        throw Error(ErrorKind::RangeError, "gold " + format_number(s.gold) + " outside declared range", line);
    if (task.score_kind == ScoreKind::Integer && s.gold != std::floor(s.gold))
        throw Error(ErrorKind::RangeError, "gold must be integral for an integer task", line);
    return s;
}

inline std::vector<LabeledSample> parse_dataset(std::istream& in, const TaskSpec& task) {
    std::vector<LabeledSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, e.what(), line_no);
        }
        out.push_back(sample_from_json(j, task, line_no));
    }
    return out;
}

inline std::vector<LabeledSample> load_dataset(const std::string& path, const TaskSpec& task) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open dataset '" + path + "'");
    return parse_dataset(in, task);
}

inline std::string serialize_dataset(const std::vector<LabeledSample>& samples) {
    std::string out;
    for (const auto& s : samples) out += to_json(s).dump() + "\n";
    return out;
}

/// Seeded subset of the distill split. Integer tasks are stratified by gold
/// value with largest-remainder quotas.
inline std::vector<LabeledSample> sample_distill_subset(const std::vector<LabeledSample>& samples, std::size_t n,
                                                        std::uint64_t seed, ScoreKind kind = ScoreKind::Integer) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == Split::Distill) pool.push_back(i);
    }
    if (n > pool.size())
        throw Error(ErrorKind::InsufficientSamples,
                    "requested " + std::to_string(n) + " of " + std::to_string(pool.size()) + " distill samples");

    std::vector<std::size_t> chosen;
    if (kind == ScoreKind::Real) {
        hashing::SplitMix rng(hashing::combine(seed, 0x5eed));
        rng.shuffle(pool);
        chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        std::map<double, std::vector<std::size_t>> strata;
        for (auto i : pool) strata[samples[i].gold].push_back(i);
        struct Quota {
            double gold;
            std::size_t take;
            double remainder;
        };
        std::vector<Quota> quotas;
        std::size_t assigned = 0;
        for (const auto& [gold, members] : strata) {
            const double exact = static_cast<double>(n) * static_cast<double>(members.size()) /
                                 static_cast<double>(pool.size());
            const auto base = static_cast<std::size_t>(std::floor(exact));
            quotas.push_back({gold, base, exact - static_cast<double>(base)});
            assigned += base;
        }
        std::vector<std::size_t> by_remainder(quotas.size());
        for (std::size_t i = 0; i < by_remainder.size(); ++i) by_remainder[i] = i;
        std::stable_sort(by_remainder.begin(), by_remainder.end(),
                         [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
        for (std::size_t k = 0; assigned < n; k = (k + 1) % by_remainder.size()) {
            auto& q = quotas[by_remainder[k]];
            if (q.take < strata[q.gold].size()) {
                ++q.take;
                ++assigned;
            }
        }
        for (const auto& q : quotas) {
            auto members = strata[q.gold];
            hashing::SplitMix rng(hashing::combine(seed, hashing::fnv1a(format_number(q.gold))));
            rng.shuffle(members);
            chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(q.take));
        }
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<LabeledSample> out;
    out.reserve(chosen.size());
    for (auto i : chosen) out.push_back(samples[i]);
    return out;
}

} // namespace ruleforge
