#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ruleforge/dataset.hpp"
#include "ruleforge/mcts_search.hpp"
#include "ruleforge/planted_oracle.hpp"
#include "ruleforge/rule_model.hpp"

namespace rf_test {

using namespace ruleforge;

inline TaskSpec essay_task(int k = 6, int max_aspects = 10) {
    TaskSpec t;
    t.task_id = "essays";
    t.score_min = 1;
    t.score_max = 6;
    t.score_kind = ScoreKind::Integer;
    t.metric = MetricKind::QWK;
    t.max_subrules = k;
    t.max_aspects = max_aspects;
    return t;
}

inline SubRule make_subrule(const std::string& aspect, const std::string& flavor = "") {
    return SubRule(Aspect(aspect), Rubric({{1, 2, "weak" + flavor}, {3, 4, "fair" + flavor}, {5, 6, "strong" + flavor}}));
}

inline ScoringRule make_rule(const std::vector<std::string>& aspects) {
    std::vector<SubRule> subs;
    for (const auto& a : aspects) subs.push_back(make_subrule(a));
    return ScoringRule(std::move(subs));
}

inline LabeledSample make_sample(const std::string& id, double gold, Split split = Split::Distill) {
    LabeledSample s;
    s.sample_id = id;
    s.payload = SingleText{"text of " + id};
    s.gold = gold;
    s.split = split;
    return s;
}

inline const std::vector<std::string>& latent_names() {
    static const std::vector<std::string> v{"Content", "Organization", "Word Choice", "Conventions"};
    return v;
}

inline const std::vector<std::string>& decoy_names() {
    static const std::vector<std::string> v{"Font Style",     "Title Length",      "Paragraph Count",
                                            "Use of Quotes", "Spelling of Names", "Ending Punctuation"};
    return v;
}

inline PlantedEnvironment planted_env(double noise_sd = 0.0, std::uint64_t seed = 7) {
    return PlantedEnvironment::uniform(latent_names(), decoy_names(), noise_sd, seed);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("ruleforge_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// First violated tree invariant, or empty: every visited node has
/// N = 1 + sum of child N, and all mean rewards lie in [0,1].
inline std::string tree_violation(const SearchEngine& engine) {
    for (const SearchNode* n : engine.nodes()) {
        std::uint64_t child_visits = 0;
        for (const auto& c : n->children) child_visits += c->N;
        if (n->N != 0 && n->N != 1 + child_visits)
            return "visit count " + std::to_string(n->N) + " != 1 + " + std::to_string(child_visits);
        if (n->N == 0 && !n->children.empty()) return "unvisited node with children";
        const double m = n->mean_reward();
        if (m < 0.0 || m > 1.0) return "mean reward out of range";
    }
    return {};
}

} // namespace rf_test
