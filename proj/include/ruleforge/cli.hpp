#pragma once

// Command implementations behind the `ruleforge` executable. Each command
// reads its inputs, writes its outputs, and throws ruleforge::Error on
// failure; run_command maps errors to exit codes and a JSON error object.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleforge/analysis.hpp"
#include "ruleforge/dataset.hpp"
#include "ruleforge/mcts_search.hpp"
#include "ruleforge/planted_oracle.hpp"
#include "ruleforge/prediction_cache.hpp"
#include "ruleforge/remote_oracle.hpp"
#include "ruleforge/rule_application.hpp"

namespace ruleforge::cli {

namespace fs = std::filesystem;

enum ExitCode : int { Success = 0, Failure = 1, ConfigFailure = 2, OracleFailure = 3, DataFailure = 4 };

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ConfigError: return ConfigFailure;
    case ErrorKind::OracleUnavailable:
    case ErrorKind::MalformedResponse: return OracleFailure;
    case ErrorKind::ParseError:
    case ErrorKind::RangeError:
    case ErrorKind::InsufficientSamples:
    case ErrorKind::CorruptStore:
    case ErrorKind::EmptyInput:
    case ErrorKind::DegenerateInput:
    case ErrorKind::InvalidRubric:
    case ErrorKind::DuplicateAspect: return DataFailure;
    default: return Failure;
    }
}

inline std::string error_json(ErrorKind kind, const std::string& message, std::optional<std::size_t> line = {}) {
    json e{{"kind", std::string(to_string(kind))}, {"message", message}};
    if (line) e["line"] = *line;
    return json{{"error", e}}.dump();
}

template <typename Fn>
int run_command(Fn&& fn, std::ostream& err = std::cerr) {
    try {
        return fn();
    } catch (const Error& e) {
        err << error_json(e.kind(), e.detail(), e.line()) << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << error_json(ErrorKind::PreconditionViolation, e.what()) << "\n";
        return Failure;
    }
}

inline std::string read_file(const fs::path& path, ErrorKind missing = ErrorKind::ConfigError) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(missing, "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot write '" + path.string() + "'");
    out << content;
}

inline json parse_json_file(const fs::path& path) {
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
}

// Run configuration ------------------------------------------------------------------

struct OracleConfig {
    enum class Kind { Planted, Remote } kind = Kind::Planted;
    PlantedEnvironment environment;
    RemoteConfig remote;
};

struct RunConfig {
    TaskSpec task;
    SearchConfig search;
    OracleConfig oracle;
    fs::path dataset;
    fs::path cache;
    fs::path out_dir = "out";
    bool audit = false;
    std::uint64_t min_visits = 2;
    std::size_t top_k = 5;

    fs::path cache_path() const { return cache.empty() ? out_dir / "cache.jsonl" : cache; }
};

inline TaskSpec task_section(const json& j) {
    if (j.contains("preset")) return task_preset(j.at("preset").get<std::string>());
    if (!j.contains("task")) throw Error(ErrorKind::ConfigError, "config needs 'task' or 'preset'");
    return task_from_json(j.at("task"));
}

inline OracleConfig oracle_section(const json& j) {
    OracleConfig o;
    try {
        const auto kind = j.value("kind", std::string{"planted"});
        if (kind == "planted") {
            o.kind = OracleConfig::Kind::Planted;
            o.environment = environment_from_json(j.at("environment"));
        } else if (kind == "remote") {
            o.kind = OracleConfig::Kind::Remote;
            o.remote.base_url = j.value("base_url", o.remote.base_url);
            o.remote.model = j.value("model", o.remote.model);
            o.remote.max_in_flight = j.value("max_in_flight", o.remote.max_in_flight);
            o.remote.retry_budget = j.value("retry_budget", o.remote.retry_budget);
            o.remote.backoff = std::chrono::milliseconds(j.value("backoff_ms", 500));
            o.remote.generation_temperature = j.value("generation_temperature", o.remote.generation_temperature);
            o.remote.scoring_temperature = j.value("scoring_temperature", o.remote.scoring_temperature);
        } else {
            throw Error(ErrorKind::ConfigError, "oracle kind must be planted|remote");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("oracle: ") + e.what());
    }
    return o;
}

/// Parse a run configuration; relative paths resolve against `base_dir`.
inline RunConfig run_config_from_json(const json& j, const fs::path& base_dir = {}) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
    RunConfig c;
    c.task = task_section(j);
    c.search = search_config_from_json(j.value("search", json::object()));
    if (!j.contains("oracle")) throw Error(ErrorKind::ConfigError, "config needs an 'oracle' section");
    c.oracle = oracle_section(j.at("oracle"));
    const auto paths = j.value("paths", json::object());
    const auto resolve = [&](const std::string& p) -> fs::path {
        if (p.empty()) return {};
        fs::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    c.dataset = resolve(paths.value("dataset", std::string{}));
    c.cache = resolve(paths.value("cache", std::string{}));
    c.out_dir = resolve(paths.value("out_dir", std::string{"out"}));
    c.audit = j.value("audit", false);
    c.min_visits = j.value("min_visits", c.min_visits);
    c.top_k = j.value("top_k", c.top_k);
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(parse_json_file(path), path.parent_path());
}

inline std::unique_ptr<Oracle> make_oracle(const RunConfig& c) {
    if (c.oracle.kind == OracleConfig::Kind::Planted) return std::make_unique<PlantedOracle>(c.oracle.environment, c.task);
    auto remote = c.oracle.remote;
    if (c.audit) remote.audit_path = (c.out_dir / "audit.jsonl").string();
    return RemoteOracle::from_config(c.task, remote);
}

inline std::vector<LabeledSample> load_config_dataset(const RunConfig& c) {
    if (c.dataset.empty()) throw Error(ErrorKind::ConfigError, "paths.dataset is required");
    if (!fs::exists(c.dataset)) throw Error(ErrorKind::ConfigError, "dataset '" + c.dataset.string() + "' not found");
    return load_dataset(c.dataset.string(), c.task);
}

// distill ------------------------------------------------------------------------------

struct DistillOutputs {
    fs::path report;
    fs::path rules;
    fs::path cache;
};

inline DistillOutputs cmd_distill(const RunConfig& c, std::ostream& log = std::clog) {
    const auto data = load_config_dataset(c);
    fs::create_directories(c.out_dir);
    auto oracle = make_oracle(c);
    PredictionCache cache;
    const auto cache_path = c.cache_path();
    if (fs::exists(cache_path)) cache.restore(cache_path);

    const auto report = run_search(c.task, data, *oracle, cache, c.search);
    const auto top = select_top(filter_rules(report, c.min_visits), c.top_k);

    DistillOutputs out{c.out_dir / "report.json", c.out_dir / "rules.json", cache_path};
    write_file(out.report, to_json(report).dump(2) + "\n");
    write_file(out.rules, serialize_rules(top));
    cache.persist(cache_path);
    for (const auto& w : report.warnings) log << "warning: " << w << "\n";
    log << "distill: " << report.states.size() << " states, " << top.size() << " rules, " << report.oracle_calls
        << " oracle calls, " << report.cache_hits << " cache hits\n";
    return out;
}

// score ------------------------------------------------------------------------------------

/// One JSON line per input sample: {id, score, rule_key} or {id, error}.
inline std::size_t cmd_score(const RunConfig& c, const fs::path& rules_file, const fs::path& input_file,
                             std::ostream& out, Oracle& oracle) {
    const auto rules = parse_rules(read_file(rules_file));
    if (rules.empty()) throw Error(ErrorKind::ConfigError, "rules file has no rules");
    if (!fs::exists(input_file)) throw Error(ErrorKind::ConfigError, "input '" + input_file.string() + "' not found");
    const auto samples = load_dataset(input_file.string(), c.task);
    for (const auto& s : samples) {
        const auto& chosen = choose_rule(rules, c.search.seed, s.sample_id);
        json line{{"id", s.sample_id}};
        try {
            const auto prompt = build_cor_prompt(chosen.rule, c.task, s);
            line["score"] = number_json(oracle.evaluate_with_rule(prompt, s, chosen.rule));
            line["rule_key"] = chosen.rule.stable_key();
        } catch (const Error& e) {
            line["rule_key"] = chosen.rule.stable_key();
            line["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.detail()}};
        }
        out << line.dump() << "\n";
    }
    return samples.size();
}

inline std::size_t cmd_score(const RunConfig& c, const fs::path& rules_file, const fs::path& input_file,
                             std::ostream& out) {
    auto oracle = make_oracle(c);
    return cmd_score(c, rules_file, input_file, out, *oracle);
}

// analyze ------------------------------------------------------------------------------------

inline std::vector<ScoringRule> top_rule_sets(const SearchReport& report, std::size_t n, std::uint64_t min_visits = 1) {
    std::vector<ScoringRule> rules;
    for (const auto& r : select_top(filter_rules(report, min_visits), n)) rules.push_back(r.rule);
    return rules;
}

/// Entropy, pairwise Jaccard and frequency spectrum of the top rules, plus
/// an alignment block when reference aspects are given. `human` may hold
/// "human_aspects", and optionally "pool_size" and "predicted_aspects".
inline json cmd_analyze(const SearchReport& report, const std::optional<json>& human, std::size_t top_n = 10) {
    const auto rules = top_rule_sets(report, top_n);
    json out{{"schema_version", analysis_schema_version}};
    json keys = json::array();
    for (const auto& r : rules) keys.push_back(r.stable_key());
    out["top_rules"] = keys;

    if (rules.empty()) {
        out["entropy"] = {{"insufficient", true}};
    } else {
        out["entropy"] = {{"subrule_id", subrule_entropy(rules, EntropySupport::SubRuleId)},
                          {"aspect", subrule_entropy(rules, EntropySupport::Aspect)}};
    }
    if (rules.size() < 2) {
        out["avg_pairwise_jaccard"] = {{"insufficient", true}, {"rules", rules.size()}};
    } else {
        out["avg_pairwise_jaccard"] = {{"value", avg_pairwise_jaccard(rules)}};
    }
    json spectrum = json::array();
    for (const auto& e : frequency_spectrum(rules)) {
        spectrum.push_back({{"subrule_id", e.subrule_id},
                            {"aspect", e.aspect},
                            {"lineage", std::string(to_string(e.lineage))},
                            {"count", e.count}});
    }
    out["frequency_spectrum"] = spectrum;

    if (human) {
        std::vector<std::string> predicted;
        if (human->contains("predicted_aspects")) {
            predicted = human->at("predicted_aspects").get<std::vector<std::string>>();
        } else if (!rules.empty()) {
            for (const auto& sr : rules.front()) predicted.push_back(sr.aspect().name());
        }
        std::set<std::string> pool_aspects;
        for (const auto& sr : report.pool) pool_aspects.insert(sr.aspect().canonical_key());
        const auto pool_size = human->value("pool_size", pool_aspects.size());
        out["alignment"] = to_json(alignment(predicted, human->at("human_aspects").get<std::vector<std::string>>(), pool_size));
    }
    return out;
}

// export-rl ---------------------------------------------------------------------------------------

inline ExportSummary cmd_export_rl(const RunConfig& c, const fs::path& rules_file, std::size_t n_pairs,
                                   std::uint64_t seed, std::ostream& out, std::size_t max_select = 3) {
    const auto rules = parse_rules(read_file(rules_file));
    const auto data = load_config_dataset(c);
    ExportOptions options;
    options.n_pairs = n_pairs;
    options.pairing_seed = seed;
    options.max_select = max_select;
    return export_rl_dataset(rules, data, c.task, options, out);
}

// simulate ------------------------------------------------------------------------------------------

struct Scenario {
    TaskSpec task;
    PlantedEnvironment environment;
    /// Noise as a fraction of the score range; overrides environment.noise_sd.
    std::optional<double> noise_fraction;
    SearchConfig search;
    std::size_t n_samples = 400;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double min_recall = 0.75;
    double min_precision = 0.6;
    double runtime_budget_s = 60;
    std::uint64_t min_visits = 2;
};

inline Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "scenario must be a JSON object");
    Scenario s;
    try {
        s.task = task_section(j);
        if (!j.contains("environment")) throw Error(ErrorKind::ConfigError, "scenario needs an 'environment'");
        s.environment = environment_from_json(j.at("environment"));
        if (j.contains("noise_fraction")) s.noise_fraction = j.at("noise_fraction").get<double>();
        s.search = search_config_from_json(j.value("search", json::object()));
        s.n_samples = j.value("n_samples", s.n_samples);
        s.seeds = j.value("seeds", s.seeds);
        s.min_recall = j.value("min_recall", s.min_recall);
        s.min_precision = j.value("min_precision", s.min_precision);
        s.runtime_budget_s = j.value("runtime_budget_s", s.runtime_budget_s);
        s.min_visits = j.value("min_visits", s.min_visits);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("scenario: ") + e.what());
    }
    if (s.seeds.empty()) throw Error(ErrorKind::ConfigError, "scenario needs at least one seed");
    return s;
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    double precision = 0;
    double recall = 0;
    double top_reward = 0;
    double best_decoy_reward = 0;
    std::vector<std::string> top_aspects;
    bool passed = false;
};

struct ScenarioOutcome {
    std::vector<SeedOutcome> seeds;
    double elapsed_s = 0;
    bool passed = false;
};

/// Planted-recovery run for one seed: search, then compare the best-ranked
/// rule's aspects with the latent set, and its reward with the best rule
/// built only from decoys.
inline SeedOutcome run_recovery_seed(const Scenario& sc, std::uint64_t seed) {
    auto env = sc.environment;
    env.seed = hashing::combine(sc.environment.seed, seed);
    if (sc.noise_fraction) env.noise_sd = *sc.noise_fraction * sc.task.range_width();
    PlantedOracle oracle(env, sc.task);
    PredictionCache cache;
    auto search = sc.search;
    search.seed = seed;
    const auto data = make_planted_dataset(sc.task, sc.n_samples, seed);
    const auto report = run_search(sc.task, data, oracle, cache, search);

    SeedOutcome out;
    out.seed = seed;
    const auto ranked = select_top(filter_rules(report, sc.min_visits), 1);
    if (ranked.empty()) return out;
    const auto& top = ranked.front().rule;
    const auto latent = env.latent_keys();
    std::size_t hits = 0;
    for (const auto& sr : top) {
        out.top_aspects.push_back(sr.aspect().name());
        hits += latent.count(sr.aspect().canonical_key());
    }
    out.precision = static_cast<double>(hits) / static_cast<double>(top.size());
    out.recall = static_cast<double>(hits) / static_cast<double>(latent.size());

    std::map<std::string, LabeledSample> by_id;
    for (const auto& s : data) by_id.emplace(s.sample_id, s);
    std::vector<LabeledSample> subset;
    for (const auto& id : report.subset_ids) subset.push_back(by_id.at(id));
    Simulator sim(sc.task, subset, search.reward_mode, search.seed);
    const auto score = [&](const LabeledSample& s, const SubRule& sr) { return cache.get_or_score(s, sr, oracle); };
    out.top_reward = sim.simulate(top, score);

    out.best_decoy_reward = 0;
    const auto all_decoy = [&](const ScoringRule& r) {
        return !r.empty() && std::none_of(r.begin(), r.end(),
                                          [&](const SubRule& sr) { return latent.count(sr.aspect().canonical_key()); });
    };
    for (const auto& st : report.states) {
        if (all_decoy(st.rule)) out.best_decoy_reward = std::max(out.best_decoy_reward, sim.simulate(st.rule, score));
    }
    for (const auto& sr : report.pool) {
        ScoringRule single({sr});
        if (all_decoy(single)) out.best_decoy_reward = std::max(out.best_decoy_reward, sim.simulate(single, score));
    }
    out.passed = out.recall >= sc.min_recall && out.precision >= sc.min_precision &&
                 out.top_reward > out.best_decoy_reward;
    return out;
}

inline ScenarioOutcome run_scenario(const Scenario& sc) {
    const auto start = std::chrono::steady_clock::now();
    ScenarioOutcome out;
    out.passed = true;
    for (auto seed : sc.seeds) {
        out.seeds.push_back(run_recovery_seed(sc, seed));
        out.passed = out.passed && out.seeds.back().passed;
    }
    out.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out.elapsed_s > sc.runtime_budget_s) out.passed = false;
    return out;
}

inline json to_json(const ScenarioOutcome& o, const Scenario& sc) {
    json seeds = json::array();
    for (const auto& s : o.seeds) {
        seeds.push_back({{"seed", s.seed},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"top_reward", s.top_reward},
                         {"best_decoy_reward", s.best_decoy_reward},
                         {"top_aspects", s.top_aspects},
                         {"pass", s.passed}});
    }
    return json{{"pass", o.passed},
                {"elapsed_s", o.elapsed_s},
                {"runtime_budget_s", sc.runtime_budget_s},
                {"thresholds", {{"min_recall", sc.min_recall}, {"min_precision", sc.min_precision}}},
                {"seeds", seeds}};
}

} // namespace ruleforge::cli
