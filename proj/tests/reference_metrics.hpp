#pragma once

// Slow, direct reference implementations used to cross-check the library
// metrics. Each one works from the textbook definition with no shared code.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ruleforge/hashing.hpp"
#include "ruleforge/metrics.hpp"

namespace rf_ref {

/// Weighted kappa from its pairwise form: observed squared disagreement over
/// the disagreement expected when pred and gold are independently shuffled.
inline double qwk(const std::vector<int>& p, const std::vector<int>& g) {
    const double n = static_cast<double>(p.size());
    double observed = 0, expected = 0;
    for (std::size_t i = 0; i < p.size(); ++i) observed += double(p[i] - g[i]) * double(p[i] - g[i]);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) expected += double(p[i] - g[j]) * double(p[i] - g[j]);
    expected /= n;
    return 1.0 - observed / expected;
}

/// Tau-b by enumerating all pairs.
inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    long long conc = 0, disc = 0, tie_x = 0, tie_y = 0, n0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            ++n0;
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0) ++tie_x;
            if (dy == 0) ++tie_y;
            if (dx * dy > 0) ++conc;
            if (dx * dy < 0) ++disc;
        }
    }
    return double(conc - disc) / std::sqrt(double(n0 - tie_x) * double(n0 - tie_y));
}

/// Mid-rank of every element by counting, O(n^2).
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double below = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) below += 1;
            if (w == v[i]) equal += 1;
        }
        r[i] = below + (equal + 1) / 2.0;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) { return pearson(ranks(x), ranks(y)); }

inline double mae(const std::vector<double>& p, const std::vector<double>& g) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - g[i]);
    return s / double(p.size());
}

inline double mse(const std::vector<double>& p, const std::vector<double>& g) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::pow(p[i] - g[i], 2);
    return s / double(p.size());
}

/// Rank (1-based) of item i: items with higher pred, or equal pred and a
/// smaller id, come first.
inline std::size_t position(const ruleforge::RankedGroup& g, std::size_t i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < g.items.size(); ++j) {
        if (j == i) continue;
        const auto& a = g.items[j];
        const auto& b = g.items[i];
        if (a.pred > b.pred || (a.pred == b.pred && a.sample_id < b.sample_id)) ++ahead;
    }
    return ahead + 1;
}

/// AP per group: for each relevant item, the share of relevant items at or
/// above its rank.
inline double mean_ap(const std::vector<ruleforge::RankedGroup>& groups, double threshold) {
    double total = 0;
    for (const auto& g : groups) {
        double sum = 0, rel = 0;
        for (std::size_t i = 0; i < g.items.size(); ++i) {
            if (g.items[i].gold < threshold) continue;
            rel += 1;
            const auto ri = position(g, i);
            double rel_above = 0;
            for (std::size_t j = 0; j < g.items.size(); ++j)
                if (g.items[j].gold >= threshold && position(g, j) <= ri) rel_above += 1;
            sum += rel_above / double(ri);
        }
        total += sum / rel;
    }
    return total / double(groups.size());
}

/// nDCG with the ideal DCG found by trying every ordering of the group.
inline double ndcg(const std::vector<ruleforge::RankedGroup>& groups) {
    const auto dcg_of = [](const std::vector<double>& gains) {
        double d = 0;
        for (std::size_t r = 0; r < gains.size(); ++r) d += (std::pow(2.0, gains[r]) - 1.0) / std::log2(double(r) + 2.0);
        return d;
    };
    double total = 0;
    for (const auto& g : groups) {
        std::vector<double> predicted(g.items.size());
        for (std::size_t i = 0; i < g.items.size(); ++i) predicted[position(g, i) - 1] = g.items[i].gold;
        std::vector<double> perm;
        for (const auto& it : g.items) perm.push_back(it.gold);
        std::sort(perm.begin(), perm.end());
        double best = 0;
        do {
            best = std::max(best, dcg_of(perm));
        } while (std::next_permutation(perm.begin(), perm.end()));
        total += dcg_of(predicted) / best;
    }
    return total / double(groups.size());
}

/// Largest absolute gap between library and reference, per metric name, over
/// `instances` seeded random inputs of length 2..12. Degenerate draws are
/// redrawn.
inline std::map<std::string, double> metric_gaps(std::size_t instances, std::uint64_t seed) {
    using namespace ruleforge;
    hashing::SplitMix rng(seed);
    std::map<std::string, double> gap;
    const auto note = [&](const std::string& name, double a, double b) {
        gap[name] = std::max(gap[name], std::fabs(a - b));
    };
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.below(11));
        const int lo = 1, hi = 2 + static_cast<int>(rng.below(5));
        std::vector<int> pi(n), gi(n);
        std::vector<double> pd(n), gd(n);
        do {
            for (std::size_t i = 0; i < n; ++i) {
                pi[i] = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
                gi[i] = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
                pd[i] = pi[i];
                gd[i] = gi[i];
            }
        } while (std::all_of(pi.begin(), pi.end(), [&](int v) { return v == pi[0]; }) ||
                 std::all_of(gi.begin(), gi.end(), [&](int v) { return v == gi[0]; }));
        note("qwk", ruleforge::qwk(pi, gi, lo, hi), qwk(pi, gi));
        note("kendall_tau", ruleforge::kendall_tau(pd, gd), kendall_tau_b(pd, gd));
        note("spearman", ruleforge::spearman_rho(pd, gd), spearman(pd, gd));
        std::vector<double> pr(n), gr(n);
        for (std::size_t i = 0; i < n; ++i) {
            pr[i] = rng.uniform() * 5;
            gr[i] = rng.uniform() * 5;
        }
        note("mae", ruleforge::mae(pr, gr), mae(pr, gr));
        note("mse", ruleforge::mse(pr, gr), mse(pr, gr));

        // Ranking metrics: up to three groups of at most 6 items, 12 total.
        std::vector<RankedGroup> groups;
        std::size_t left = n;
        for (int gidx = 0; left > 0 && gidx < 3; ++gidx) {
            const std::size_t size = std::min<std::size_t>(left, 1 + rng.below(6));
            left -= size;
            RankedGroup g{"g" + std::to_string(gidx), {}};
            for (std::size_t i = 0; i < size; ++i) {
                g.items.push_back({"s" + std::to_string(rng.below(100)) + "_" + std::to_string(i),
                                   static_cast<double>(rng.below(4)), static_cast<double>(rng.below(3))});
            }
            if (std::none_of(g.items.begin(), g.items.end(), [](const RankedItem& it) { return it.gold >= 1; }))
                g.items.front().gold = 1 + static_cast<double>(rng.below(2));
            groups.push_back(std::move(g));
        }
        note("map", ruleforge::mean_ap(groups, 1.0), mean_ap(groups, 1.0));
        note("ndcg", ruleforge::ndcg(groups), ndcg(groups));
    }
    return gap;
}

} // namespace rf_ref
