#pragma once

// Statistics over rule sets: sub-rule entropy, pairwise aspect overlap,
// frequency spectra, alignment with a reference aspect set (with an exact
// hypergeometric tail), score histograms and generation robustness.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "ruleforge/error.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge {

inline constexpr int analysis_schema_version = 1;

enum class EntropySupport { SubRuleId, Aspect };

namespace detail {

inline std::string support_key(const SubRule& sr, EntropySupport support) {
    return support == EntropySupport::SubRuleId ? sr.id().value : sr.aspect().canonical_key();
}

} // namespace detail

/// Shannon entropy (bits) of sub-rule occurrences across all rules.
inline double subrule_entropy(const std::vector<ScoringRule>& rules,
                              EntropySupport support = EntropySupport::SubRuleId) {
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& r : rules) {
        for (const auto& sr : r) {
            ++counts[detail::support_key(sr, support)];
            ++total;
        }
    }
    if (total == 0) throw Error(ErrorKind::EmptyInput, "no sub-rules");
    double h = 0;
    for (const auto& [k, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

inline double avg_pairwise_jaccard(const std::vector<ScoringRule>& rules) {
    if (rules.size() < 2) throw Error(ErrorKind::InsufficientRules, "need at least two rules");
    double sum = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        for (std::size_t j = i + 1; j < rules.size(); ++j) {
            sum += aspect_jaccard(rules[i], rules[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

struct SpectrumEntry {
    std::string subrule_id;
    std::string aspect;
    Lineage lineage = Lineage::Initial;
    std::size_t count = 0;
};

/// Occurrence counts, descending, ties by id ascending.
inline std::vector<SpectrumEntry> frequency_spectrum(const std::vector<ScoringRule>& rules) {
    std::map<std::string, SpectrumEntry> by_id;
    for (const auto& r : rules) {
        for (const auto& sr : r) {
            auto& e = by_id[sr.id().value];
            e.subrule_id = sr.id().value;
            e.aspect = sr.aspect().name();
            e.lineage = sr.lineage();
            ++e.count;
        }
    }
    std::vector<SpectrumEntry> out;
    for (auto& [k, e] : by_id) out.push_back(std::move(e));
    std::stable_sort(out.begin(), out.end(),
                     [](const SpectrumEntry& a, const SpectrumEntry& b) { return a.count > b.count; });
    return out;
}

inline boost::multiprecision::cpp_int binomial(unsigned n, unsigned k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    boost::multiprecision::cpp_int c = 1;
    for (unsigned i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

/// P(X >= k) for X ~ Hypergeometric(population N, successes K, draws n),
/// summed exactly over integers with a single final division.
inline double hypergeom_tail(long long N, long long K, long long n, long long k) {
    if (N < 0 || K < 0 || n < 0 || k < 0 || K > N || n > N)
        throw Error(ErrorKind::InvalidParameters, "need 0 <= K, n <= N and k >= 0");
    using boost::multiprecision::cpp_int;
    using boost::multiprecision::cpp_rational;
    const auto u = [](long long v) { return static_cast<unsigned>(v); };
    cpp_int numerator = 0;
    for (long long i = std::max(k, n - (N - K)); i <= std::min(n, K); ++i)
        numerator += binomial(u(K), u(i)) * binomial(u(N - K), u(n - i));
    const cpp_rational p(numerator, binomial(u(N), u(n)));
    return p.convert_to<double>();
}

struct AlignmentReport {
    double precision = 0;
    double recall = 0;
    double jaccard = 0;
    double expected_matches = 0;
    /// Actual over expected matches under random selection.
    double lor_ratio = 0;
    /// (actual - expected) / expected.
    double lor_improvement = 0;
    double p_hypergeometric = 1;
    std::vector<std::string> matched;
    std::vector<std::string> missed;
};

inline AlignmentReport alignment(const std::vector<std::string>& predicted, const std::vector<std::string>& human,
                                 std::size_t pool_size) {
    std::set<std::string> pred, ref;
    for (const auto& a : predicted) pred.insert(canonicalize_aspect(a));
    if (pred.empty()) throw Error(ErrorKind::EmptyPrediction, "no predicted aspects");
    std::map<std::string, std::string> human_names;
    for (const auto& a : human) human_names.emplace(canonicalize_aspect(a), a);
    for (const auto& [k, v] : human_names) ref.insert(k);
    std::set<std::string> uni = pred;
    uni.insert(ref.begin(), ref.end());
    if (ref.size() > pool_size || uni.size() > pool_size)
        throw Error(ErrorKind::InvalidParameters, "aspects exceed the candidate pool size");

    AlignmentReport r;
    std::size_t inter = 0;
    for (const auto& k : ref) {
        if (pred.count(k)) {
            ++inter;
            r.matched.push_back(human_names[k]);
        } else {
            r.missed.push_back(human_names[k]);
        }
    }
    const double i = static_cast<double>(inter);
    r.precision = i / static_cast<double>(pred.size());
    r.recall = ref.empty() ? 0.0 : i / static_cast<double>(ref.size());
    r.jaccard = i / static_cast<double>(uni.size());
    r.expected_matches = static_cast<double>(pred.size()) * static_cast<double>(ref.size()) / static_cast<double>(pool_size);
    r.lor_ratio = r.expected_matches > 0 ? i / r.expected_matches : 0.0;
    r.lor_improvement = r.lor_ratio - 1.0;
    r.p_hypergeometric = hypergeom_tail(static_cast<long long>(pool_size), static_cast<long long>(ref.size()),
                                        static_cast<long long>(pred.size()), static_cast<long long>(inter));
    return r;
}

inline json to_json(const AlignmentReport& r) {
    return json{{"schema_version", analysis_schema_version},
                {"precision", r.precision},
                {"recall", r.recall},
                {"jaccard", r.jaccard},
                {"expected_matches", r.expected_matches},
                {"lor_ratio", r.lor_ratio},
                {"lor_improvement", r.lor_improvement},
                {"p_hypergeometric", r.p_hypergeometric},
                {"matched", r.matched},
                {"missed", r.missed}};
}

struct Histogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<double> pred_mass;
    std::vector<double> gold_mass;
};

namespace detail {

inline std::vector<double> bin_mass(const std::vector<double>& values, const std::vector<double>& edges) {
    const std::size_t bins = edges.size() - 1;
    std::vector<double> mass(bins, 0.0);
    for (double v : values) {
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        mass[std::min(b, bins - 1)] += 1.0;
    }
    for (auto& m : mass) m /= static_cast<double>(values.size());
    return mass;
}

} // namespace detail

/// Normalized histograms over [lo, hi] with `bins` equal-width bins (last
/// bin closed).
inline Histogram score_histogram(const std::vector<double>& preds, const std::vector<double>& golds, double lo,
                                 double hi, std::size_t bins) {
    if (preds.size() != golds.size()) throw Error(ErrorKind::PreconditionViolation, "length mismatch");
    if (preds.empty()) throw Error(ErrorKind::EmptyInput, "no scores");
    if (bins == 0 || !(lo < hi)) throw Error(ErrorKind::InvalidParameters, "need bins > 0 and lo < hi");
    Histogram h;
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / bins);
    h.pred_mass = detail::bin_mass(preds, h.edges);
    h.gold_mass = detail::bin_mass(golds, h.edges);
    return h;
}

/// One bin per integer score in [lo, hi].
inline Histogram integer_histogram(const std::vector<double>& preds, const std::vector<double>& golds, int lo, int hi) {
    if (preds.size() != golds.size()) throw Error(ErrorKind::PreconditionViolation, "length mismatch");
    if (preds.empty()) throw Error(ErrorKind::EmptyInput, "no scores");
    if (hi < lo) throw Error(ErrorKind::InvalidParameters, "hi < lo");
    Histogram h;
    for (int v = lo; v <= hi + 1; ++v) h.edges.push_back(v - 0.5);
    h.pred_mass = detail::bin_mass(preds, h.edges);
    h.gold_mass = detail::bin_mass(golds, h.edges);
    return h;
}

inline json to_json(const Histogram& h) {
    return json{{"schema_version", analysis_schema_version},
                {"edges", h.edges},
                {"pred", h.pred_mass},
                {"gold", h.gold_mass}};
}

/// Pairwise aspect-set Jaccard between repeated candidate generations.
inline std::vector<std::vector<double>> robustness_matrix(const std::vector<std::vector<SubRule>>& generations) {
    if (generations.size() < 2) throw Error(ErrorKind::InsufficientGenerations, "need at least two generations");
    std::vector<std::set<std::string>> keys;
    for (const auto& g : generations) {
        std::set<std::string> k;
        for (const auto& sr : g) k.insert(sr.aspect().canonical_key());
        keys.push_back(std::move(k));
    }
    std::vector<std::vector<double>> m(keys.size(), std::vector<double>(keys.size(), 1.0));
    for (std::size_t i = 0; i < keys.size(); ++i)
        for (std::size_t j = i + 1; j < keys.size(); ++j) m[i][j] = m[j][i] = set_jaccard(keys[i], keys[j]);
    return m;
}

inline double mean_off_diagonal(const std::vector<std::vector<double>>& m) {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            if (i != j) sum += m[i][j], ++count;
    return count ? sum / static_cast<double>(count) : 0.0;
}

} // namespace ruleforge
