#pragma once

// Composite pairwise reward: ordering agreement plus range-normalized
// absolute accuracy, with equal unit weights.

#include <cmath>

#include "ruleforge/error.hpp"

namespace ruleforge {

struct ScorePair {
    double first = 0;
    double second = 0;
};

constexpr int sgn(double v) noexcept { return (v > 0) - (v < 0); }

/// +1 when predicted and gold orderings agree (ties match ties), else -1.
constexpr int r_order(ScorePair pred, ScorePair gold) noexcept {
    return sgn(pred.first - pred.second) == sgn(gold.first - gold.second) ? 1 : -1;
}

/// Sum over both texts of 1 - 2|s - s*|/sc; in [-2, 2] when errors <= sc.
inline double r_abs(ScorePair pred, ScorePair gold, double score_range) {
    if (!(score_range > 0)) throw Error(ErrorKind::InvalidRange, "score range must be positive");
    return (1.0 - 2.0 * std::fabs(pred.first - gold.first) / score_range) +
           (1.0 - 2.0 * std::fabs(pred.second - gold.second) / score_range);
}

/// r_order + r_abs, in [-3, 3].
inline double total_reward(ScorePair pred, ScorePair gold, double score_range) {
    return r_order(pred, gold) + r_abs(pred, gold, score_range);
}

/// total_reward mapped affinely from [-3, 3] onto [0, 1].
inline double normalized_total_reward(ScorePair pred, ScorePair gold, double score_range) {
    return (total_reward(pred, gold, score_range) + 3.0) / 6.0;
}

} // namespace ruleforge
