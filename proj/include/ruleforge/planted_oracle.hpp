#pragma once

// Deterministic oracle with hidden ground-truth aspects.
//
// Each sample carries one latent feature per planted aspect; the weighted
// sum of features reproduces the sample's normalized gold score. Scoring a
// latent aspect returns that aspect's feature on the task scale, scoring any
// other aspect returns hash noise unrelated to gold. Every value is a pure
// function of (seed, request), so call order and concurrency never matter.

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "ruleforge/dataset.hpp"
#include "ruleforge/hashing.hpp"
#include "ruleforge/oracle.hpp"

namespace ruleforge {

struct LatentAspect {
    std::string aspect;
    double weight = 0;
};

struct PlantedEnvironment {
    std::vector<LatentAspect> latent_aspects;
    std::vector<std::string> decoy_aspects;
    /// Gaussian noise on every score, in score units.
    double noise_sd = 0;
    std::uint64_t seed = 0;
    /// Spread of a single latent aspect around gold, as a fraction of range.
    double aspect_spread = 0.25;
    /// Score shift per stricter/lenient step, as a fraction of range.
    double modify_step = 0.1;
    /// Miscalibration of Initial rubrics per aspect, as a fraction of range.
    std::map<std::string, double> initial_bias;

    void validate() const {
        if (noise_sd < 0) throw Error(ErrorKind::ConfigError, "noise_sd must be non-negative");
        if (latent_aspects.empty()) throw Error(ErrorKind::ConfigError, "planted environment needs latent aspects");
        double total = 0;
        std::set<std::string> latent;
        for (const auto& l : latent_aspects) {
            if (l.weight < 0) throw Error(ErrorKind::ConfigError, "latent weights must be non-negative");
            total += l.weight;
            if (!latent.insert(canonicalize_aspect(l.aspect)).second)
                throw Error(ErrorKind::ConfigError, "duplicate latent aspect '" + l.aspect + "'");
        }
        if (std::fabs(total - 1.0) > 1e-9) throw Error(ErrorKind::ConfigError, "latent weights must sum to 1");
        std::set<std::string> decoys;
        for (const auto& d : decoy_aspects) {
            const auto key = canonicalize_aspect(d);
            if (latent.count(key)) throw Error(ErrorKind::ConfigError, "aspect '" + d + "' is both latent and decoy");
            if (!decoys.insert(key).second) throw Error(ErrorKind::ConfigError, "duplicate decoy aspect '" + d + "'");
        }
    }

    /// Latent aspects with equal weights.
    static PlantedEnvironment uniform(std::vector<std::string> latent, std::vector<std::string> decoys,
                                      double noise_sd, std::uint64_t seed) {
        PlantedEnvironment env;
        for (auto& a : latent) env.latent_aspects.push_back({std::move(a), 1.0 / static_cast<double>(latent.size())});
        env.decoy_aspects = std::move(decoys);
        env.noise_sd = noise_sd;
        env.seed = seed;
        return env;
    }

    std::set<std::string> latent_keys() const {
        std::set<std::string> keys;
        for (const auto& l : latent_aspects) keys.insert(canonicalize_aspect(l.aspect));
        return keys;
    }
};

inline json to_json(const PlantedEnvironment& env) {
    json latent = json::array();
    for (const auto& l : env.latent_aspects) latent.push_back({{"aspect", l.aspect}, {"weight", l.weight}});
    json bias = json::object();
    for (const auto& [k, v] : env.initial_bias) bias[k] = v;
    return json{{"latent_aspects", latent},     {"decoy_aspects", env.decoy_aspects},
                {"noise_sd", env.noise_sd},     {"seed", env.seed},
                {"aspect_spread", env.aspect_spread}, {"modify_step", env.modify_step},
                {"initial_bias", bias}};
}

inline PlantedEnvironment environment_from_json(const json& j) {
    PlantedEnvironment env;
    try {
        for (const auto& l : j.at("latent_aspects")) {
            if (l.is_string()) {
                env.latent_aspects.push_back({l.get<std::string>(), -1});
            } else {
                env.latent_aspects.push_back({l.at("aspect").get<std::string>(), l.at("weight").get<double>()});
            }
        }
        // Bare names mean equal weights.
        if (std::all_of(env.latent_aspects.begin(), env.latent_aspects.end(),
                        [](const LatentAspect& l) { return l.weight < 0; })) {
            for (auto& l : env.latent_aspects) l.weight = 1.0 / static_cast<double>(env.latent_aspects.size());
        }
        env.decoy_aspects = j.value("decoy_aspects", std::vector<std::string>{});
        env.noise_sd = j.value("noise_sd", 0.0);
        env.seed = j.value("seed", std::uint64_t{0});
        env.aspect_spread = j.value("aspect_spread", env.aspect_spread);
        env.modify_step = j.value("modify_step", env.modify_step);
        if (j.contains("initial_bias")) {
            for (const auto& [k, v] : j.at("initial_bias").items()) env.initial_bias[canonicalize_aspect(k)] = v;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("planted environment: ") + e.what());
    }
    env.validate();
    return env;
}

class PlantedOracle final : public Oracle {
public:
    PlantedOracle(PlantedEnvironment env, TaskSpec task) : Oracle(std::move(task)), env_(std::move(env)) {
        env_.validate();
        for (std::size_t i = 0; i < env_.latent_aspects.size(); ++i)
            latent_index_[canonicalize_aspect(env_.latent_aspects[i].aspect)] = i;
    }

    const PlantedEnvironment& environment() const noexcept { return env_; }

    ProposalResult propose_subrules(std::span<const Aspect> existing, std::size_t num,
                                    std::uint64_t variant = 0) override {
        if (num < 1) throw Error(ErrorKind::PreconditionViolation, "num must be at least 1");
        ++generation_calls_;
        std::set<std::string> taken;
        std::uint64_t request = hashing::combine(env_.seed, variant);
        for (const auto& a : existing) taken.insert(a.canonical_key());
        for (const auto& k : taken) request = hashing::combine(request, hashing::fnv1a(k));

        std::vector<std::string> names;
        for (const auto& l : env_.latent_aspects) names.push_back(l.aspect);
        names.insert(names.end(), env_.decoy_aspects.begin(), env_.decoy_aspects.end());
        std::erase_if(names, [&](const std::string& n) { return taken.count(canonicalize_aspect(n)) > 0; });
        hashing::SplitMix rng(request);
        rng.shuffle(names);
        if (names.size() > num) names.resize(num);

        std::vector<SubRule> proposals;
        for (const auto& n : names) proposals.emplace_back(Aspect(n), Rubric(initial_bands(n)));
        return accept_proposals(std::move(proposals), existing, num, task_);
    }

    SubRule modify_rubric(const SubRule& sr, Direction direction) override {
        ++generation_calls_;
        const int level = strictness(sr) + (direction == Direction::Stricter ? 1 : -1);
        std::vector<ScoreBand> bands;
        for (const auto& b : sr.rubric().bands()) {
            std::string text = strip_tag(b.text);
            bands.push_back({b.lo, b.hi, text});
        }
        bands.front().text += " [strictness=" + std::to_string(level) + "]";
        return SubRule(sr.aspect(), Rubric(std::move(bands), lineage_of(direction), sr.id()));
    }

    double score_sample(const LabeledSample& sample, const SubRule& sr) override {
        ++score_calls_;
        return planted_score(sample, sr);
    }

    double evaluate_with_rule(const std::string&, const LabeledSample& sample, const ScoringRule& rule) override {
        if (rule.empty()) throw Error(ErrorKind::PreconditionViolation, "empty rule");
        ++score_calls_;
        double sum = 0;
        for (const auto& sr : rule) sum += planted_score(sample, sr);
        double v = sum / static_cast<double>(rule.size());
        if (task_.score_kind == ScoreKind::Integer) v = std::floor(v + 0.5);
        return clamp_score(v);
    }

    /// Strictness level encoded in a planted rubric (0 for Initial).
    static int strictness(const SubRule& sr) {
        static const std::regex tag(R"(\[strictness=(-?\d+)\])");
        std::smatch m;
        const auto& text = sr.rubric().bands().front().text;
        if (std::regex_search(text, m, tag)) return std::stoi(m.str(1));
        return 0;
    }

    /// Score without touching the call counter.
    double planted_score(const LabeledSample& sample, const SubRule& sr) const {
        const double lo = task_.score_min, width = task_.range_width();
        const auto& key = sr.aspect().canonical_key();
        const std::uint64_t sample_key = hashing::combine(env_.seed, hashing::fnv1a(sample.sample_id));
        double score;
        if (auto it = latent_index_.find(key); it != latent_index_.end()) {
            score = sample.gold + width * latent_deviation(sample, it->second);
        } else {
            score = lo + width * hashing::unit_interval(hashing::combine(sample_key, hashing::fnv1a(key)));
        }
        if (auto it = env_.initial_bias.find(key); it != env_.initial_bias.end()) score += it->second * width;
        score -= strictness(sr) * env_.modify_step * width;
        if (env_.noise_sd > 0)
            score += env_.noise_sd * hashing::standard_normal(hashing::combine(sample_key, hashing::fnv1a(sr.id().value)));
        return clamp_score(score);
    }

private:
    static std::string strip_tag(const std::string& text) {
        static const std::regex tag(R"(\s*\[strictness=-?\d+\])");
        return std::regex_replace(text, tag, "");
    }

    std::vector<ScoreBand> initial_bands(const std::string& aspect) const {
        const double lo = task_.score_min, hi = task_.score_max;
        std::vector<ScoreBand> bands;
        if (task_.score_kind == ScoreKind::Integer) {
            const int first = static_cast<int>(std::ceil(lo)), last = static_cast<int>(std::floor(hi));
            const int count = last - first + 1;
            const int per = std::max(1, (count + 2) / 3);
            for (int b = first; b <= last; b += per) {
                const int e = std::min(last, b + per - 1);
                bands.push_back({double(b), double(e), ""});
            }
        } else {
            const double step = (hi - lo) / 3.0;
            for (int i = 0; i < 3; ++i) bands.push_back({lo + i * step, i == 2 ? hi : lo + (i + 1) * step, ""});
            // Real bands may not overlap; nudge upper bounds below the next lower bound.
            for (std::size_t i = 0; i + 1 < bands.size(); ++i) bands[i].hi = std::nextafter(bands[i + 1].lo, lo);
        }
        static const char* levels[] = {"weak", "adequate", "strong", "excellent", "outstanding"};
        for (std::size_t i = 0; i < bands.size(); ++i)
            bands[i].text = std::string(levels[std::min<std::size_t>(i, 4)]) + " " + canonicalize_aspect(aspect);
        return bands;
    }

    /// Offset of latent aspect `index` from the sample's normalized gold;
    /// weighted sum over latent aspects is zero and every feature stays in
    /// [0,1].
    double latent_deviation(const LabeledSample& sample, std::size_t index) const {
        const double u = (sample.gold - task_.score_min) / task_.range_width();
        const std::uint64_t base = hashing::combine(env_.seed ^ 0x1a7e27ULL, hashing::fnv1a(sample.sample_id));
        std::vector<double> z(env_.latent_aspects.size());
        double mean = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = hashing::standard_normal(
                hashing::combine(base, hashing::fnv1a(canonicalize_aspect(env_.latent_aspects[i].aspect))));
            mean += env_.latent_aspects[i].weight * z[i];
        }
        double scale = env_.aspect_spread;
        for (auto& v : z) {
            v -= mean;
            if (v > 0) scale = std::min(scale, (1.0 - u) / v);
            if (v < 0) scale = std::min(scale, u / -v);
        }
        return scale * z[index];
    }

    PlantedEnvironment env_;
    std::map<std::string, std::size_t> latent_index_;
};

/// Synthetic labeled samples for a planted environment, golds uniform over
/// the scale. `group_size` > 0 produces
/// query/candidate samples in groups of that size.
inline std::vector<LabeledSample> make_planted_dataset(const TaskSpec& task, std::size_t n, std::uint64_t seed,
                                                       Split split = Split::Distill, std::size_t group_size = 0,
                                                       const std::string& id_prefix = "s") {
    std::vector<LabeledSample> out;
    hashing::SplitMix rng(hashing::combine(seed, 0xda7a));
    const int first = static_cast<int>(std::ceil(task.score_min));
    const int count = static_cast<int>(std::floor(task.score_max)) - first + 1;
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%s%05zu", id_prefix.c_str(), i);
        LabeledSample s;
        s.sample_id = id;
        s.split = split;
        if (task.score_kind == ScoreKind::Integer) {
            s.gold = first + static_cast<int>(rng.below(static_cast<std::uint64_t>(count)));
        } else {
            s.gold = task.score_min + task.range_width() * rng.uniform();
        }
        if (group_size > 0) {
            s.payload = QueryCandidate{"query " + std::to_string(i / group_size), "candidate text " + std::string(id),
                                       "g" + std::to_string(i / group_size)};
        } else {
            s.payload = SingleText{"synthetic text " + std::string(id)};
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace ruleforge
