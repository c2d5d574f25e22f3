#pragma once

// Agreement measures between predicted and gold scores, and their mapping to
// a bounded, higher-is-better search reward.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ruleforge/error.hpp"

namespace ruleforge {

enum class MetricKind { QWK, KendallTau, SpearmanRho, MAE, MSE, MeanAP, NDCG };
enum class MetricDirection { HigherBetter, LowerBetter };

inline MetricDirection direction(MetricKind kind) noexcept {
    return (kind == MetricKind::MAE || kind == MetricKind::MSE) ? MetricDirection::LowerBetter
                                                                  : MetricDirection::HigherBetter;
}

inline bool is_grouped(MetricKind kind) noexcept { return kind == MetricKind::MeanAP || kind == MetricKind::NDCG; }

inline std::string_view to_string(MetricKind kind) {
    switch (kind) {
    case MetricKind::QWK: return "qwk";
    case MetricKind::KendallTau: return "kendall_tau";
    case MetricKind::SpearmanRho: return "spearman";
    case MetricKind::MAE: return "mae";
    case MetricKind::MSE: return "mse";
    case MetricKind::MeanAP: return "map";
    case MetricKind::NDCG: return "ndcg";
    }
    return "qwk";
}

inline MetricKind metric_from_string(std::string_view s) {
    for (auto k : {MetricKind::QWK, MetricKind::KendallTau, MetricKind::SpearmanRho, MetricKind::MAE, MetricKind::MSE,
                   MetricKind::MeanAP, MetricKind::NDCG}) {
        if (to_string(k) == s) return k;
    }
    if (s == "rho" || s == "spearman_rho") return MetricKind::SpearmanRho;
    if (s == "kendall" || s == "tau") return MetricKind::KendallTau;
    if (s == "mean_ap") return MetricKind::MeanAP;
    throw Error(ErrorKind::ConfigError, "unknown metric '" + std::string(s) + "'");
}

namespace detail {

template <typename T>
void require_paired(std::span<const T> pred, std::span<const T> gold, std::size_t min_len = 1) {
    if (pred.size() != gold.size()) throw Error(ErrorKind::PreconditionViolation, "length mismatch");
    if (pred.size() < min_len) throw Error(ErrorKind::EmptyInput, "need at least " + std::to_string(min_len));
}

/// Mid-ranks (1-based, ties share the average rank).
inline std::vector<double> mid_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline std::int64_t tie_pairs(std::span<const double> sorted) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const auto t = static_cast<std::int64_t>(j - i);
        total += t * (t - 1) / 2;
        i = j;
    }
    return total;
}

// Bottom-up merge sort returning the number of inversions.
inline std::int64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buf(v.size());
    std::int64_t swaps = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    swaps += static_cast<std::int64_t>(mid - i);
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < hi) buf[k++] = v[j++];
        }
        std::copy(buf.begin(), buf.end(), v.begin());
    }
    return swaps;
}

} // namespace detail

/// Quadratic weighted kappa over the integer categories lo..hi.
inline double qwk(std::span<const int> pred, std::span<const int> gold, int lo, int hi) {
    detail::require_paired(pred, gold);
    if (hi <= lo) throw Error(ErrorKind::DegenerateInput, "QWK needs at least two categories");
    const auto in_range = [&](int v) { return v >= lo && v <= hi; };
    if (!std::all_of(pred.begin(), pred.end(), in_range) || !std::all_of(gold.begin(), gold.end(), in_range))
        throw Error(ErrorKind::RangeError, "QWK input outside category range");
    if (std::all_of(gold.begin(), gold.end(), [&](int g) { return g == gold[0]; }))
        throw Error(ErrorKind::DegenerateInput, "all gold values identical");

    const auto cats = static_cast<std::size_t>(hi - lo + 1);
    std::vector<double> observed(cats * cats, 0.0), hist_pred(cats, 0.0), hist_gold(cats, 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto p = static_cast<std::size_t>(pred[i] - lo);
        const auto g = static_cast<std::size_t>(gold[i] - lo);
        observed[p * cats + g] += 1.0;
        hist_pred[p] += 1.0;
        hist_gold[g] += 1.0;
    }
    const double n = static_cast<double>(pred.size());
    const double denom_w = static_cast<double>((cats - 1) * (cats - 1));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < cats; ++i) {
        for (std::size_t j = 0; j < cats; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            const double w = d * d / denom_w;
            num += w * observed[i * cats + j];
            den += w * hist_pred[i] * hist_gold[j] / n;
        }
    }
    if (den == 0.0) throw Error(ErrorKind::DegenerateInput, "zero expected disagreement");
    return 1.0 - num / den;
}

/// Kendall tau-b via Knight's O(n log n) sort-and-merge counting.
inline double kendall_tau(std::span<const double> pred, std::span<const double> gold) {
    detail::require_paired(pred, gold, 2);
    const std::size_t n = pred.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pred[a] != pred[b] ? pred[a] < pred[b] : gold[a] < gold[b];
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = pred[order[i]];
        ys[i] = gold[order[i]];
    }
    const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
    const std::int64_t ties_x = detail::tie_pairs(xs);
    std::int64_t ties_xy = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
        const auto t = static_cast<std::int64_t>(j - i);
        ties_xy += t * (t - 1) / 2;
        i = j;
    }
    const std::int64_t swaps = detail::count_inversions(ys);
    const std::int64_t ties_y = detail::tie_pairs(ys);
    const double denom = std::sqrt(static_cast<double>(n0 - ties_x)) * std::sqrt(static_cast<double>(n0 - ties_y));
    if (denom == 0.0) throw Error(ErrorKind::DegenerateInput, "constant input vector");
    const std::int64_t concordant_minus_discordant = n0 - ties_x - ties_y + ties_xy - 2 * swaps;
    return static_cast<double>(concordant_minus_discordant) / denom;
}

inline double spearman_rho(std::span<const double> pred, std::span<const double> gold) {
    detail::require_paired(pred, gold, 2);
    const auto rp = detail::mid_ranks(pred);
    const auto rg = detail::mid_ranks(gold);
    const double n = static_cast<double>(rp.size());
    const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
    const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rp.size(); ++i) {
        sxy += (rp[i] - mp) * (rg[i] - mg);
        sxx += (rp[i] - mp) * (rp[i] - mp);
        syy += (rg[i] - mg) * (rg[i] - mg);
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::DegenerateInput, "constant input vector");
    return sxy / std::sqrt(sxx * syy);
}

inline double mae(std::span<const double> pred, std::span<const double> gold) {
    detail::require_paired(pred, gold);
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - gold[i]);
    return s / static_cast<double>(pred.size());
}

inline double mse(std::span<const double> pred, std::span<const double> gold) {
    detail::require_paired(pred, gold);
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gold[i]) * (pred[i] - gold[i]);
    return s / static_cast<double>(pred.size());
}

// Grouped ranking metrics ------------------------------------------------------

struct RankedItem {
    std::string sample_id;
    double pred = 0;
    double gold = 0;
};

struct RankedGroup {
    std::string group_id;
    std::vector<RankedItem> items;
};

namespace detail {

/// Items in predicted order: score descending, sample_id ascending on ties.
inline std::vector<RankedItem> predicted_order(const RankedGroup& g) {
    auto items = g.items;
    std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
        return a.pred != b.pred ? a.pred > b.pred : a.sample_id < b.sample_id;
    });
    return items;
}

} // namespace detail

/// Mean average precision; gold >= relevance_threshold counts as relevant.
inline double mean_ap(std::span<const RankedGroup> groups, double relevance_threshold = 1.0) {
    if (groups.empty()) throw Error(ErrorKind::EmptyInput, "no groups");
    double total = 0;
    for (const auto& g : groups) {
        const auto items = detail::predicted_order(g);
        double hits = 0, precision_sum = 0;
        for (std::size_t r = 0; r < items.size(); ++r) {
            if (items[r].gold >= relevance_threshold) {
                hits += 1;
                precision_sum += hits / static_cast<double>(r + 1);
            }
        }
        if (hits == 0) throw Error(ErrorKind::NoRelevantItems, g.group_id);
        total += precision_sum / hits;
    }
    return total / static_cast<double>(groups.size());
}

/// nDCG with exponential gain (2^g - 1) / log2(rank + 1), averaged over groups.
inline double ndcg(std::span<const RankedGroup> groups) {
    if (groups.empty()) throw Error(ErrorKind::EmptyInput, "no groups");
    double total = 0;
    for (const auto& g : groups) {
        const auto items = detail::predicted_order(g);
        std::vector<double> ideal;
        ideal.reserve(items.size());
        double dcg = 0;
        for (std::size_t r = 0; r < items.size(); ++r) {
            if (items[r].gold < 0) throw Error(ErrorKind::InvalidParameters, "negative gain");
            dcg += (std::exp2(items[r].gold) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
            ideal.push_back(items[r].gold);
        }
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        double idcg = 0;
        for (std::size_t r = 0; r < ideal.size(); ++r) idcg += (std::exp2(ideal[r]) - 1.0) / std::log2(r + 2.0);
        if (idcg == 0.0) throw Error(ErrorKind::AllZeroGains, g.group_id);
        total += dcg / idcg;
    }
    return total / static_cast<double>(groups.size());
}

/// Map a metric value into a [0,1] reward where larger is better.
inline double metric_to_reward(double value, MetricKind kind, double lo, double hi) {
    const double width = hi - lo;
    double r = 0;
    switch (kind) {
    case MetricKind::QWK:
    case MetricKind::KendallTau:
    case MetricKind::SpearmanRho: r = (value + 1.0) / 2.0; break;
    case MetricKind::MeanAP:
    case MetricKind::NDCG: r = value; break;
    case MetricKind::MAE: r = 1.0 - value / width; break;
    case MetricKind::MSE: r = 1.0 - value / (width * width); break;
    }
    return std::clamp(r, 0.0, 1.0);
}

} // namespace ruleforge
