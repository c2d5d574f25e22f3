#pragma once

// Prompt templates for rule generation, rubric modification, rule-guided
// scoring and pairwise comparison.

#include <span>
#include <string>
#include <vector>

#include "ruleforge/dataset.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge::prompts {

inline std::string range_clause(const TaskSpec& task) {
    return "The final score ranges from " + format_number(task.score_min) + " to " + format_number(task.score_max) +
           ".";
}

inline std::string criterion_line(const SubRule& sr) { return "**" + sr.aspect().name() + "**: " + sr.rubric().text(); }

inline std::string propose(const TaskSpec& task, std::span<const Aspect> existing, std::size_t num) {
    std::string existing_list;
    for (const auto& a : existing) existing_list += (existing_list.empty() ? "" : "; ") + a.name();
    if (existing_list.empty()) existing_list = "(none)";

    std::string out = "Generate " + std::to_string(num) + " assessment dimensions beyond the existing ones:\n";
    out += "existing aspects: " + existing_list + "\n\n";
    if (!task.known_aspects.empty()) {
        out += "Consider these known aspects first if they are not already present:";
        for (const auto& k : task.known_aspects) out += " " + k + ";";
        out += "\n\n";
    }
    out += "Each dimension should be:\n"
           "- as independent as possible from the others;\n"
           "- objectively measurable;\n"
           "- a meaningful addition to the assessment.\n"
           "For each dimension write a scoring guideline split into score intervals that together cover the "
           "whole range from " +
           format_number(task.score_min) + " to " + format_number(task.score_max) +
           ", at most 60 words in total. Each interval must say clearly what qualifies a text for that score.\n"
           "Return JSON with the keys \"Assessment_Dimensions\" and \"Scoring_Guideline\", for example:\n"
           "{\"Assessment_Dimensions\": [\"Sentiment\", \"Aspect2\"], "
           "\"Scoring_Guideline\": [\"1-2: Mostly negative ...; 3-4: Mixed ...; 5-6: Mostly positive ...\", "
           "\"Guideline for Aspect2\"]}\n";
    return out;
}

inline std::string modify(const SubRule& sr, Direction direction) {
    const bool strict = direction == Direction::Stricter;
    json original{{"Assessment_Dimensions", {sr.aspect().name()}}, {"Scoring_Guideline", {sr.rubric().text()}}};
    std::string out = std::string("## Make the scoring criteria ") + (strict ? "stricter" : "more lenient") + ".\n";
    out += "Below is a scoring dimension and its guideline. Rewrite the Scoring_Guideline so that it is much ";
    out += strict ? "stricter" : "more lenient";
    out += " and clearly different from the original. Under the new guideline the same text should receive a ";
    out += strict ? "lower" : "higher";
    out += " score.\nKeep exactly the same JSON output format.\n## Scoring dimension and guideline:\n";
    out += original.dump() + "\n";
    return out;
}

/// Chain-of-Rule evaluation prompt for a single text.
inline std::string chain_of_rule(const ScoringRule& rule, const TaskSpec& task, const LabeledSample& sample) {
    std::string out = "You are tasked with evaluating the text based on the given Scoring Criteria:\n\n";
    for (const auto& sr : rule) out += criterion_line(sr) + "\n";
    out += "\n## Texts to be evaluated\nText-1: " + sample.render() + "\n\n";
    out += "For each criterion, provide a brief analysis and assign scores. Then, provide a comprehensive score "
           "upon them. " +
           range_clause(task) + "\nPlace the final score in \\box{x}.\n";
    return out;
}

/// Single-criterion scoring prompt used while simulating a rule.
inline std::string score_single(const SubRule& sr, const TaskSpec& task, const LabeledSample& sample) {
    return chain_of_rule(ScoringRule({sr}), task, sample);
}

inline std::string pairwise(std::span<const SubRule> subrules, const LabeledSample& first,
                            const LabeledSample& second, const TaskSpec& task, std::size_t max_select) {
    std::string out = "First, choose no more than " + std::to_string(max_select) +
                      " scoring criteria from the candidate Scoring Criteria below that matter most for this task, "
                      "and assign weights to the chosen aspects.\n"
                      "Then evaluate the pair of texts using the criteria you selected.\n\n";
    for (const auto& sr : subrules) out += criterion_line(sr) + "\n";
    out += "\n## Texts to be evaluated\n";
    out += "Text-1: " + first.render() + "\n";
    out += "Text-2: " + second.render() + "\n\n";
    out += "For each criterion, provide a brief analysis and assign scores. Then, provide a comprehensive score "
           "upon them. " +
           range_clause(task) + "\n\n";
    out += "## Output Format Requirements\n"
           "Selected Aspects: list the chosen aspects inside <Aspect> </Aspect> tags, e.g. <Aspect>Content, "
           "Goal</Aspect>, with weights written as \\weighted{x,y}.\n"
           "Analysis: compare the texts on the selected aspects inside <Analysis> </Analysis> tags.\n"
           "Scores: combine the per-aspect judgments using the weights into one overall score per text, written "
           "as \\box{x,y}.\n";
    return out;
}

} // namespace ruleforge::prompts
