#pragma once

// The language-model boundary: sub-rule proposal, rubric modification and
// per-sub-rule scoring. Implementations must tolerate concurrent calls.

#include <algorithm>
#include <atomic>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruleforge/dataset.hpp"
#include "ruleforge/error.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge {

struct ProposalResult {
    std::vector<SubRule> subrules;
    /// Dropped proposals (aspect collisions, unusable rubrics).
    std::vector<std::string> warnings;
};

class Oracle {
public:
    virtual ~Oracle() = default;

    /// Up to `num` new Initial sub-rules whose aspects avoid `existing`.
    /// `variant` distinguishes repeated generations of the same request.
    virtual ProposalResult propose_subrules(std::span<const Aspect> existing, std::size_t num,
                                            std::uint64_t variant = 0) = 0;
    virtual SubRule modify_rubric(const SubRule& sr, Direction direction) = 0;
    /// Score in [score_min, score_max] of `sample` under a single sub-rule.
    virtual double score_sample(const LabeledSample& sample, const SubRule& sr) = 0;
    /// Score under a whole rule given its rendered Chain-of-Rule prompt.
    virtual double evaluate_with_rule(const std::string& prompt, const LabeledSample& sample,
                                      const ScoringRule& rule) = 0;

    virtual std::size_t max_in_flight() const { return 1; }

    const TaskSpec& task() const noexcept { return task_; }
    std::uint64_t score_calls() const noexcept { return score_calls_.load(); }
    std::uint64_t generation_calls() const noexcept { return generation_calls_.load(); }

protected:
    explicit Oracle(TaskSpec task) : task_(std::move(task)) {}

    double clamp_score(double v) const { return std::clamp(v, task_.score_min, task_.score_max); }

    TaskSpec task_;
    std::atomic<std::uint64_t> score_calls_{0};
    std::atomic<std::uint64_t> generation_calls_{0};
};

/// Filter raw proposals: drop aspects colliding with `existing` or with an
/// earlier proposal, drop rubrics not covering the task range, and cap the
/// pool at task.max_aspects.
inline ProposalResult accept_proposals(std::vector<SubRule> proposals, std::span<const Aspect> existing,
                                       std::size_t num, const TaskSpec& task) {
    ProposalResult out;
    std::set<std::string> seen;
    for (const auto& a : existing) seen.insert(a.canonical_key());
    const std::size_t room =
        seen.size() >= static_cast<std::size_t>(task.max_aspects) ? 0 : task.max_aspects - seen.size();
    const std::size_t limit = std::min(num, room);
    for (auto& sr : proposals) {
        if (seen.count(sr.aspect().canonical_key())) {
            out.warnings.push_back("AspectCollision: dropped duplicate aspect '" + sr.aspect().name() + "'");
            continue;
        }
        if (!sr.rubric().covers(task.score_min, task.score_max, task.score_kind)) {
            out.warnings.push_back("rubric for '" + sr.aspect().name() + "' does not cover the score range");
            continue;
        }
        if (out.subrules.size() >= limit) {
            out.warnings.push_back("pool cap reached; dropped '" + sr.aspect().name() + "'");
            continue;
        }
        seen.insert(sr.aspect().canonical_key());
        out.subrules.push_back(std::move(sr));
    }
    return out;
}

// Response parsing -------------------------------------------------------------

namespace response {

/// First JSON object in a model reply, tolerating code fences, prose around
/// the object, and ';' used as an array separator.
inline json extract_object(const std::string& text) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw Error(ErrorKind::MalformedResponse, "no JSON object in response");
    std::string body = text.substr(open, close - open + 1);
    try {
        return json::parse(body);
    } catch (const json::exception&) {
    }
    static const std::regex semicolon_sep(R"("\s*;\s*")");
    body = std::regex_replace(body, semicolon_sep, "\",\"");
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedResponse, e.what());
    }
}

inline const json* find_key(const json& obj, std::string_view wanted) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        std::string k = it.key();
        k.erase(std::remove_if(k.begin(), k.end(), [](unsigned char c) { return std::isspace(c); }), k.end());
        if (k == wanted) return &it.value();
    }
    return nullptr;
}

/// (aspect, guideline) pairs from an Assessment_Dimensions /
/// Scoring_Guideline reply.
inline std::vector<std::pair<std::string, std::string>> dimensions(const std::string& text) {
    const json obj = extract_object(text);
    const json* dims = find_key(obj, "Assessment_Dimensions");
    const json* guides = find_key(obj, "Scoring_Guideline");
    if (dims == nullptr || guides == nullptr || !dims->is_array() || !guides->is_array())
        throw Error(ErrorKind::MalformedResponse, "missing Assessment_Dimensions or Scoring_Guideline");
    if (dims->size() != guides->size())
        throw Error(ErrorKind::MalformedResponse, "dimension and guideline counts differ");
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < dims->size(); ++i) {
        if (!(*dims)[i].is_string()) throw Error(ErrorKind::MalformedResponse, "dimension is not a string");
        const auto& g = (*guides)[i];
        out.emplace_back((*dims)[i].get<std::string>(), g.is_string() ? g.get<std::string>() : g.dump());
    }
    return out;
}

/// Numbers inside the last \box{...} or \boxed{...} marker.
inline std::optional<std::vector<double>> last_boxed(const std::string& text) {
    static const std::regex box(R"(\\box(?:ed)?\{([^{}]*)\})");
    static const std::regex number(R"(-?\d+(?:\.\d+)?)");
    std::optional<std::string> inner;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), box); it != std::sregex_iterator(); ++it)
        inner = (*it)[1].str();
    if (!inner) return std::nullopt;
    std::vector<double> values;
    for (auto it = std::sregex_iterator(inner->begin(), inner->end(), number); it != std::sregex_iterator(); ++it)
        values.push_back(std::stod(it->str()));
    return values;
}

/// Final score of a single-text evaluation: the last number in the last box.
inline double single_score(const std::string& text) {
    const auto values = last_boxed(text);
    if (!values || values->empty()) throw Error(ErrorKind::MalformedResponse, "no boxed score in response");
    return values->back();
}

} // namespace response
} // namespace ruleforge
