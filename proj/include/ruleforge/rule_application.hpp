#pragma once

// Consuming distilled rules: ranking and selection, Chain-of-Rule prompts,
// rule-guided pairwise prompts, evaluator-response parsing and RL data export.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleforge/dataset.hpp"
#include "ruleforge/hashing.hpp"
#include "ruleforge/mcts_search.hpp"
#include "ruleforge/prompts.hpp"
#include "ruleforge/reward.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge {

struct RankedRule {
    ScoringRule rule;
    std::uint64_t visits = 0;
    double mean_reward = 0;
};

inline bool ranks_before(const RankedRule& a, const RankedRule& b) {
    if (a.mean_reward != b.mean_reward) return a.mean_reward > b.mean_reward;
    if (a.visits != b.visits) return a.visits > b.visits;
    return a.rule.stable_key() < b.rule.stable_key();
}

/// Non-empty states with at least `min_visits` visits, best first.
inline std::vector<RankedRule> filter_rules(const SearchReport& report, std::uint64_t min_visits) {
    std::vector<RankedRule> out;
    for (const auto& s : report.states) {
        if (s.rule.empty() || s.visits < min_visits) continue;
        out.push_back({s.rule, s.visits, s.mean_reward});
    }
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

inline std::vector<RankedRule> select_top(const std::vector<RankedRule>& ranked, std::size_t k = 5) {
    return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()))};
}

inline json to_json(const RankedRule& r) {
    json j = to_json(r.rule);
    j["stable_key"] = r.rule.stable_key();
    j["visits"] = r.visits;
    j["mean_reward"] = r.mean_reward;
    return j;
}

/// Rules file: {"rules":[{"subrules":[...], "stable_key", "visits", "mean_reward"}]}.
inline std::string serialize_rules(const std::vector<RankedRule>& rules) {
    json arr = json::array();
    for (const auto& r : rules) arr.push_back(to_json(r));
    return json{{"rules", arr}}.dump(2) + "\n";
}

inline std::vector<RankedRule> parse_rules(const std::string& text) {
    std::vector<RankedRule> out;
    try {
        const auto j = json::parse(text);
        for (const auto& r : j.at("rules")) {
            out.push_back({rule_from_json(r), r.value("visits", std::uint64_t{0}), r.value("mean_reward", 0.0)});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("rules file: ") + e.what());
    }
    return out;
}

/// Seeded uniform choice of a rule for one sample.
inline const RankedRule& choose_rule(const std::vector<RankedRule>& top, std::uint64_t seed,
                                     const std::string& sample_id) {
    if (top.empty()) throw Error(ErrorKind::PreconditionViolation, "no rules to choose from");
    hashing::SplitMix rng(hashing::combine(seed, hashing::fnv1a(sample_id)));
    return top[static_cast<std::size_t>(rng.below(top.size()))];
}

inline std::string build_cor_prompt(const ScoringRule& rule, const TaskSpec& task, const LabeledSample& sample) {
    if (rule.empty()) throw Error(ErrorKind::PreconditionViolation, "rule has no sub-rules");
    return prompts::chain_of_rule(rule, task, sample);
}

/// Union of sub-rules over `top`; on a shared aspect the sub-rule from the
/// best-ranked rule wins.
inline std::vector<SubRule> build_expanded_ruleset(std::vector<RankedRule> top) {
    std::stable_sort(top.begin(), top.end(), [](const RankedRule& a, const RankedRule& b) {
        if (a.mean_reward != b.mean_reward) return a.mean_reward > b.mean_reward;
        return a.visits > b.visits;
    });
    std::vector<SubRule> out;
    std::set<std::string> seen;
    for (const auto& r : top) {
        for (const auto& sr : r.rule) {
            if (seen.insert(sr.aspect().canonical_key()).second) out.push_back(sr);
        }
    }
    return out;
}

struct PairwiseItem {
    std::string prompt;
    std::pair<std::string, std::string> text_ids;
    ScorePair gold;
    double range_width = 0;
};

inline PairwiseItem build_pairwise_prompt(std::span<const SubRule> subrules, const LabeledSample& first,
                                          const LabeledSample& second, const TaskSpec& task, std::size_t max_select) {
    if (subrules.empty()) throw Error(ErrorKind::PreconditionViolation, "no candidate sub-rules");
    if (first.sample_id == second.sample_id) throw Error(ErrorKind::PreconditionViolation, "pair needs two texts");
    return {prompts::pairwise(subrules, first, second, task, max_select),
            {first.sample_id, second.sample_id},
            {first.gold, second.gold},
            task.range_width()};
}

// Evaluator responses ------------------------------------------------------------

struct WeightedAspect {
    std::string aspect;
    double weight = 0;
};

struct EvaluatorResponse {
    std::vector<WeightedAspect> aspects;
    std::optional<std::string> analysis;
    ScorePair scores;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::optional<std::string> last_tag(const std::string& text, const std::string& tag) {
    const std::regex re("<" + tag + ">([\\s\\S]*?)</" + tag + ">");
    std::optional<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it)
        out = (*it)[1].str();
    return out;
}

} // namespace detail

/// Parse a pairwise evaluator reply. The last marker of each kind wins.
/// Weights are renormalized to sum to 1 (equal when absent or mismatched).
inline EvaluatorResponse parse_evaluator_response(const std::string& text, const TaskSpec& task) {
    EvaluatorResponse out;
    const auto aspect_block = detail::last_tag(text, "Aspect");
    if (!aspect_block) throw Error(ErrorKind::MissingAspects, "no <Aspect> block");
    std::string item;
    for (char ch : *aspect_block + ",") {
        if (ch == ',' || ch == ';') {
            if (auto t = detail::trim(item); !t.empty()) out.aspects.push_back({t, 0});
            item.clear();
        } else {
            item += ch;
        }
    }
    if (out.aspects.empty()) throw Error(ErrorKind::MissingAspects, "empty <Aspect> block");

    static const std::regex weighted(R"(\\weighted\{([^{}]*)\})");
    static const std::regex number(R"(-?\d+(?:\.\d+)?)");
    std::vector<double> weights;
    std::optional<std::string> weight_body;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), weighted); it != std::sregex_iterator(); ++it)
        weight_body = (*it)[1].str();
    if (weight_body) {
        for (auto it = std::sregex_iterator(weight_body->begin(), weight_body->end(), number);
             it != std::sregex_iterator(); ++it)
            weights.push_back(std::stod(it->str()));
    }
    double total = 0;
    for (double w : weights) total += w;
    if (weights.size() == out.aspects.size() && total > 0) {
        for (std::size_t i = 0; i < weights.size(); ++i) out.aspects[i].weight = weights[i] / total;
    } else {
        out.warnings.push_back("aspect weights missing or mismatched; using equal weights");
        for (auto& a : out.aspects) a.weight = 1.0 / static_cast<double>(out.aspects.size());
    }

    out.analysis = detail::last_tag(text, "Analysis");
    if (out.analysis) out.analysis = detail::trim(*out.analysis);
    else out.warnings.push_back("no <Analysis> block");

    const auto boxed = response::last_boxed(text);
    if (!boxed || boxed->size() < 2) throw Error(ErrorKind::MissingScores, "no boxed score pair");
    const auto clamp = [&](double v) { return std::clamp(v, task.score_min, task.score_max); };
    out.scores = {clamp((*boxed)[boxed->size() - 2]), clamp(boxed->back())};
    return out;
}

// RL export -------------------------------------------------------------------------

struct ExportOptions {
    std::size_t n_pairs = 100;
    std::uint64_t pairing_seed = 0;
    std::size_t max_select = 3;
    /// Minimum share of pairs whose gold scores differ.
    double min_unequal_fraction = 0.4;
};

struct ExportSummary {
    std::size_t records = 0;
    std::size_t unequal_pairs = 0;
    std::vector<std::string> warnings;
};

inline json to_json(const PairwiseItem& item) {
    return json{{"prompt", item.prompt},
                {"gold", {number_json(item.gold.first), number_json(item.gold.second)}},
                {"sc", number_json(item.range_width)},
                {"text_ids", {item.text_ids.first, item.text_ids.second}}};
}

/// Write `n_pairs` rule-guided pairwise records (JSONL) drawn from the train
/// split. Each epoch pairs a fresh seeded shuffle without replacement; pairs
/// with equal gold are admitted only while the unequal-gold quota can still
/// be met.
inline ExportSummary export_rl_dataset(const std::vector<RankedRule>& top, const std::vector<LabeledSample>& data,
                                       const TaskSpec& task, const ExportOptions& options, std::ostream& out) {
    std::vector<const LabeledSample*> train;
    for (const auto& s : data)
        if (s.split == Split::Train) train.push_back(&s);
    if (train.size() < 2) throw Error(ErrorKind::InsufficientSamples, "need at least two train samples");
    const auto subrules = build_expanded_ruleset(top);
    if (subrules.empty()) throw Error(ErrorKind::PreconditionViolation, "no rules to export");

    ExportSummary summary;
    const bool any_unequal = std::any_of(train.begin(), train.end(),
                                         [&](const LabeledSample* s) { return s->gold != train.front()->gold; });
    const auto quota = static_cast<std::size_t>(std::ceil(options.min_unequal_fraction * options.n_pairs));
    const std::size_t equal_allowance = any_unequal ? options.n_pairs - std::min(quota, options.n_pairs) : options.n_pairs;
    if (!any_unequal) summary.warnings.push_back("all gold scores equal; unequal-pair quota unsatisfiable, emitting ties");

    std::size_t equal_taken = 0;
    hashing::SplitMix rng(hashing::combine(options.pairing_seed, 0xe1));
    const std::size_t max_epochs = 64 + 4 * options.n_pairs;
    for (std::size_t epoch = 0; summary.records < options.n_pairs && epoch < max_epochs; ++epoch) {
        auto order = train;
        rng.shuffle(order);
        for (std::size_t i = 0; i + 1 < order.size() && summary.records < options.n_pairs; i += 2) {
            const bool unequal = order[i]->gold != order[i + 1]->gold;
            if (!unequal) {
                if (equal_taken >= equal_allowance) continue;
                ++equal_taken;
            } else {
                ++summary.unequal_pairs;
            }
            out << to_json(build_pairwise_prompt(subrules, *order[i], *order[i + 1], task, options.max_select)).dump()
                << "\n";
            ++summary.records;
        }
    }
    if (summary.records < options.n_pairs)
        summary.warnings.push_back("produced only " + std::to_string(summary.records) + " pairs");
    return summary;
}

} // namespace ruleforge
