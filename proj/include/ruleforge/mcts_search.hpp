#pragma once

// Two-stage Monte Carlo Tree Search over scoring rules.
//
// Stage 1 only adds pool sub-rules to a state. Once any state in the tree
// holds the maximum number of sub-rules, the search switches permanently to
// stage 2, which only rewrites member rubrics stricter or more lenient, and
// lowers the UCT exploration coefficient.
//
// A state's prediction for a sample is the unweighted mean of its sub-rule
// scores; per-sub-rule scores come from the prediction cache, so evaluating
// a child costs oracle calls only for the sub-rule it introduced.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ruleforge/dataset.hpp"
#include "ruleforge/hashing.hpp"
#include "ruleforge/metrics.hpp"
#include "ruleforge/oracle.hpp"
#include "ruleforge/prediction_cache.hpp"
#include "ruleforge/reward.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge {

enum class Stage { Stage1, Stage2 };
enum class RewardMode { DatasetMetric, Pairwise };

inline std::string_view to_string(Stage s) { return s == Stage::Stage1 ? "stage1" : "stage2"; }
inline std::string_view to_string(RewardMode m) { return m == RewardMode::DatasetMetric ? "metric" : "pairwise"; }

struct SearchConfig {
    double c_stage1 = 1.414;
    double c_stage2 = 0.5;
    /// Stage threshold K; 0 means the task's max_subrules.
    int max_subrules = 0;
    std::size_t iteration_budget = 300;
    std::size_t distill_subset_size = 200;
    std::uint64_t seed = 0;
    RewardMode reward_mode = RewardMode::DatasetMetric;

    void validate() const {
        if (!(c_stage1 > 0) || !(c_stage2 > 0)) throw Error(ErrorKind::ConfigError, "UCT coefficients must be positive");
        if (!(c_stage2 < c_stage1)) throw Error(ErrorKind::ConfigError, "c_stage2 must be below c_stage1");
        if (max_subrules < 0) throw Error(ErrorKind::ConfigError, "max_subrules must be non-negative");
    }
};

inline json to_json(const SearchConfig& c) {
    return json{{"c_stage1", c.c_stage1},
                {"c_stage2", c.c_stage2},
                {"max_subrules", c.max_subrules},
                {"iteration_budget", c.iteration_budget},
                {"distill_subset_size", c.distill_subset_size},
                {"seed", c.seed},
                {"reward_mode", std::string(to_string(c.reward_mode))}};
}

inline SearchConfig search_config_from_json(const json& j) {
    SearchConfig c;
    try {
        c.c_stage1 = j.value("c_stage1", c.c_stage1);
        c.c_stage2 = j.value("c_stage2", c.c_stage2);
        c.max_subrules = j.value("max_subrules", c.max_subrules);
        c.iteration_budget = j.value("iteration_budget", c.iteration_budget);
        c.distill_subset_size = j.value("distill_subset_size", c.distill_subset_size);
        c.seed = j.value("seed", c.seed);
        const auto mode = j.value("reward_mode", std::string{"metric"});
        if (mode == "metric") c.reward_mode = RewardMode::DatasetMetric;
        else if (mode == "pairwise") c.reward_mode = RewardMode::Pairwise;
        else throw Error(ErrorKind::ConfigError, "reward_mode must be metric|pairwise");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("search config: ") + e.what());
    }
    c.validate();
    return c;
}

// Tree -----------------------------------------------------------------------

enum class ActionKind { None, Add, Modify };

inline std::string_view to_string(ActionKind k) {
    switch (k) {
    case ActionKind::None: return "none";
    case ActionKind::Add: return "add";
    case ActionKind::Modify: return "modify";
    }
    return "none";
}

/// An action not yet expanded. For Modify the rewritten rubric is produced
/// only when the action is expanded.
struct PendingAction {
    ActionKind kind = ActionKind::Add;
    SubRule subrule;  // pool sub-rule to add, or member to modify
    Direction direction = Direction::Stricter;
};

struct SearchNode {
    ScoringRule state;
    SearchNode* parent = nullptr;
    std::vector<std::unique_ptr<SearchNode>> children;
    double W = 0;
    std::uint64_t N = 0;
    std::vector<PendingAction> untried_actions;
    Stage created_stage = Stage::Stage1;
    ActionKind created_by = ActionKind::None;
    /// This state's own simulated reward (absent for the root).
    std::optional<double> reward;

    double mean_reward() const noexcept { return N == 0 ? 0.0 : W / static_cast<double>(N); }
};

/// W/N + c * sqrt(2 ln(N_p) / N).
inline double uct_value(const SearchNode& child, std::uint64_t parent_visits, double c) {
    if (child.N == 0) throw Error(ErrorKind::UnvisitedChild, "UCT undefined for an unvisited child");
    if (parent_visits == 0) throw Error(ErrorKind::PreconditionViolation, "parent has no visits");
    const double n = static_cast<double>(child.N);
    return child.W / n + c * std::sqrt(2.0 * std::log(static_cast<double>(parent_visits)) / n);
}

/// Descend by maximum UCT (first child wins ties; unvisited children are
/// taken immediately) until a node with untried actions or no children.
inline SearchNode* select(SearchNode& root, double c) {
    SearchNode* node = &root;
    while (node->untried_actions.empty() && !node->children.empty()) {
        SearchNode* best = nullptr;
        double best_value = 0;
        for (const auto& child : node->children) {
            if (child->N == 0) {
                best = child.get();
                break;
            }
            const double v = uct_value(*child, node->N, c);
            if (best == nullptr || v > best_value) {
                best = child.get();
                best_value = v;
            }
        }
        node = best;
    }
    return node;
}

/// N += 1 and W += reward on every node from `leaf` up to the root.
inline void backpropagate(SearchNode* leaf, double reward) {
    if (!(reward >= 0.0 && reward <= 1.0)) throw Error(ErrorKind::PreconditionViolation, "reward outside [0,1]");
    for (SearchNode* n = leaf; n != nullptr; n = n->parent) {
        n->N += 1;
        n->W += reward;
    }
}

/// Stage 1: add each pool sub-rule with a new aspect while below the cap.
/// Stage 2: stricter and lenient rewrites of every member.
inline std::vector<PendingAction> stage_actions(const ScoringRule& state, std::span<const SubRule> pool, Stage stage,
                                                std::size_t max_subrules) {
    std::vector<PendingAction> out;
    if (stage == Stage::Stage1) {
        if (state.size() >= max_subrules) return out;
        for (const auto& sr : pool) {
            if (!state.has_aspect(sr.aspect())) out.push_back({ActionKind::Add, sr, Direction::Stricter});
        }
    } else {
        for (const auto& sr : state) {
            out.push_back({ActionKind::Modify, sr, Direction::Stricter});
            out.push_back({ActionKind::Modify, sr, Direction::Lenient});
        }
    }
    return out;
}

// Simulation -----------------------------------------------------------------

/// Runs `fn(i)` for i in [0, n) on up to `width` threads.
inline void parallel_for(std::size_t n, std::size_t width, const std::function<void(std::size_t)>& fn) {
    width = std::min(width, n);
    if (width <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < width; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

/// Scores a state against a fixed distill subset.
class Simulator {
public:
    using ScoreSource = std::function<double(const LabeledSample&, const SubRule&)>;

    Simulator(TaskSpec task, std::vector<LabeledSample> subset, RewardMode mode, std::uint64_t seed)
        : task_(std::move(task)), subset_(std::move(subset)), mode_(mode) {
        if (subset_.size() < 2) throw Error(ErrorKind::InsufficientSamples, "distill subset needs at least 2 samples");
        std::vector<std::size_t> idx(subset_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        hashing::SplitMix rng(hashing::combine(seed, 0x9a1f));
        rng.shuffle(idx);
        for (std::size_t i = 0; i + 1 < idx.size(); i += 2) pairs_.emplace_back(idx[i], idx[i + 1]);
    }

    const std::vector<LabeledSample>& subset() const noexcept { return subset_; }
    const TaskSpec& task() const noexcept { return task_; }

    /// Mean sub-rule score per sample, rounded half-up on integer scales.
    std::vector<double> predictions(const ScoringRule& state, const ScoreSource& score, std::size_t width = 1) const {
        if (state.empty()) throw Error(ErrorKind::PreconditionViolation, "cannot simulate an empty rule");
        std::vector<double> preds(subset_.size());
        parallel_for(subset_.size(), width, [&](std::size_t i) {
            double sum = 0;
            for (const auto& sr : state) sum += score(subset_[i], sr);
            double y = sum / static_cast<double>(state.size());
            if (task_.score_kind == ScoreKind::Integer) y = std::floor(y + 0.5);
            preds[i] = y;
        });
        return preds;
    }

    /// Reward in [0,1]. A degenerate metric input yields 0 and a warning.
    double reward(const std::vector<double>& preds, std::vector<std::string>* warnings = nullptr) const {
        if (mode_ == RewardMode::Pairwise) {
            double sum = 0;
            for (const auto& [a, b] : pairs_) {
                sum += normalized_total_reward({preds[a], preds[b]}, {subset_[a].gold, subset_[b].gold},
                                               task_.range_width());
            }
            return sum / static_cast<double>(pairs_.size());
        }
        try {
            return metric_to_reward(metric_value(preds), task_.metric, task_.score_min, task_.score_max);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::DegenerateInput) throw;
            if (warnings) warnings->push_back(std::string("degenerate metric input, reward 0: ") + e.detail());
            return 0.0;
        }
    }

    double simulate(const ScoringRule& state, const ScoreSource& score, std::size_t width = 1,
                    std::vector<std::string>* warnings = nullptr) const {
        return reward(predictions(state, score, width), warnings);
    }

    double metric_value(const std::vector<double>& preds) const {
        std::vector<double> gold(subset_.size());
        for (std::size_t i = 0; i < subset_.size(); ++i) gold[i] = subset_[i].gold;
        switch (task_.metric) {
        case MetricKind::QWK: {
            std::vector<int> p(preds.size()), g(gold.size());
            for (std::size_t i = 0; i < preds.size(); ++i) {
                p[i] = static_cast<int>(std::lround(preds[i]));
                g[i] = static_cast<int>(std::lround(gold[i]));
            }
            return qwk(p, g, static_cast<int>(std::lround(task_.score_min)), static_cast<int>(std::lround(task_.score_max)));
        }
        case MetricKind::KendallTau: return kendall_tau(preds, gold);
        case MetricKind::SpearmanRho: return spearman_rho(preds, gold);
        case MetricKind::MAE: return mae(preds, gold);
        case MetricKind::MSE: return mse(preds, gold);
        case MetricKind::MeanAP:
        case MetricKind::NDCG: {
            std::map<std::string, RankedGroup> by_group;
            for (std::size_t i = 0; i < subset_.size(); ++i) {
                const auto* qc = subset_[i].query_candidate();
                const std::string gid = qc ? qc->group_id : std::string{};
                auto& g = by_group[gid];
                g.group_id = gid;
                g.items.push_back({subset_[i].sample_id, preds[i], gold[i]});
            }
            std::vector<RankedGroup> usable;
            for (auto& [gid, g] : by_group) {
                if (g.items.size() < 2) continue;
                const bool informative =
                    task_.metric == MetricKind::MeanAP
                        ? std::any_of(g.items.begin(), g.items.end(),
                                      [&](const RankedItem& it) { return it.gold >= task_.relevance_threshold; })
                        : std::any_of(g.items.begin(), g.items.end(), [](const RankedItem& it) { return it.gold > 0; });
                if (informative) usable.push_back(std::move(g));
            }
            if (usable.empty()) throw Error(ErrorKind::DegenerateInput, "no group with two items and a relevant one");
            return task_.metric == MetricKind::MeanAP ? mean_ap(usable, task_.relevance_threshold) : ndcg(usable);
        }
        }
        return 0.0;
    }

private:
    TaskSpec task_;
    std::vector<LabeledSample> subset_;
    RewardMode mode_;
    std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

// Report -----------------------------------------------------------------------

struct StateSummary {
    ScoringRule rule;
    std::uint64_t visits = 0;
    double total_reward = 0;
    double mean_reward = 0;
    std::optional<double> reward;
    Stage stage_created = Stage::Stage1;
};

struct IterationTrace {
    std::size_t iteration = 0;
    Stage stage = Stage::Stage1;
    double c = 0;
    ActionKind action = ActionKind::None;
    std::size_t state_size = 0;
    double reward = 0;
};

struct SearchReport {
    std::vector<StateSummary> states;
    std::optional<std::size_t> stage_flip_iteration;
    std::uint64_t oracle_calls = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t generation_calls = 0;
    json config_echo = json::object();
    std::vector<SubRule> pool;
    std::vector<std::string> subset_ids;
    std::vector<IterationTrace> trace;
    std::vector<std::string> warnings;
};

inline json to_json(const SearchReport& r) {
    json states = json::array();
    for (const auto& s : r.states) {
        states.push_back({{"rule", to_json(s.rule)},
                          {"stable_key", s.rule.stable_key()},
                          {"visits", s.visits},
                          {"total_reward", s.total_reward},
                          {"mean_reward", s.mean_reward},
                          {"reward", s.reward ? json(*s.reward) : json(nullptr)},
                          {"stage_created", std::string(to_string(s.stage_created))}});
    }
    json pool = json::array();
    for (const auto& sr : r.pool) pool.push_back(to_json(sr));
    json trace = json::array();
    for (const auto& t : r.trace) {
        trace.push_back({{"iteration", t.iteration},
                         {"stage", std::string(to_string(t.stage))},
                         {"c", t.c},
                         {"action", std::string(to_string(t.action))},
                         {"state_size", t.state_size},
                         {"reward", t.reward}});
    }
    return json{{"states", states},
                {"stage_flip_iteration", r.stage_flip_iteration ? json(*r.stage_flip_iteration) : json(nullptr)},
                {"oracle_calls", r.oracle_calls},
                {"cache_hits", r.cache_hits},
                {"generation_calls", r.generation_calls},
                {"config_echo", r.config_echo},
                {"pool", pool},
                {"subset_ids", r.subset_ids},
                {"trace", trace},
                {"warnings", r.warnings}};
}

inline SearchReport report_from_json(const json& j) {
    SearchReport r;
    try {
        for (const auto& s : j.at("states")) {
            StateSummary st;
            st.rule = rule_from_json(s.at("rule"));
            st.visits = s.at("visits").get<std::uint64_t>();
            st.mean_reward = s.at("mean_reward").get<double>();
            st.total_reward = s.value("total_reward", st.mean_reward * static_cast<double>(st.visits));
            if (s.contains("reward") && !s.at("reward").is_null()) st.reward = s.at("reward").get<double>();
            st.stage_created = s.value("stage_created", std::string{"stage1"}) == "stage2" ? Stage::Stage2 : Stage::Stage1;
            r.states.push_back(std::move(st));
        }
        if (j.contains("stage_flip_iteration") && !j.at("stage_flip_iteration").is_null())
            r.stage_flip_iteration = j.at("stage_flip_iteration").get<std::size_t>();
        r.oracle_calls = j.value("oracle_calls", std::uint64_t{0});
        r.cache_hits = j.value("cache_hits", std::uint64_t{0});
        r.generation_calls = j.value("generation_calls", std::uint64_t{0});
        r.config_echo = j.value("config_echo", json::object());
        if (j.contains("pool"))
            for (const auto& sr : j.at("pool")) r.pool.push_back(subrule_from_json(sr));
        r.subset_ids = j.value("subset_ids", std::vector<std::string>{});
        if (j.contains("trace")) {
            for (const auto& t : j.at("trace")) {
                IterationTrace it;
                it.iteration = t.at("iteration").get<std::size_t>();
                it.stage = t.at("stage").get<std::string>() == "stage2" ? Stage::Stage2 : Stage::Stage1;
                it.c = t.at("c").get<double>();
                const auto a = t.at("action").get<std::string>();
                it.action = a == "add" ? ActionKind::Add : a == "modify" ? ActionKind::Modify : ActionKind::None;
                it.state_size = t.at("state_size").get<std::size_t>();
                it.reward = t.at("reward").get<double>();
                r.trace.push_back(it);
            }
        }
        r.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("search report: ") + e.what());
    }
    return r;
}

// Engine -------------------------------------------------------------------------

class SearchEngine {
public:
    SearchEngine(TaskSpec task, std::vector<LabeledSample> subset, std::vector<SubRule> pool, Oracle& oracle,
                 PredictionCache& cache, SearchConfig config)
        : task_(std::move(task)), config_(config), pool_(std::move(pool)), oracle_(oracle), cache_(cache),
          simulator_(task_, std::move(subset), config.reward_mode, config.seed),
          rng_(hashing::combine(config.seed, 0xe4a9)) {
        config_.validate();
        if (pool_.empty()) throw Error(ErrorKind::BudgetExhaustedWithEmptyTree, "candidate pool is empty");
        std::set<std::string> aspects;
        for (const auto& sr : pool_) aspects.insert(sr.aspect().canonical_key());
        const auto k = static_cast<std::size_t>(config_.max_subrules > 0 ? config_.max_subrules : task_.max_subrules);
        threshold_ = std::min(k, aspects.size());
        root_ = std::make_unique<SearchNode>();
        root_->N = 1;  // the root counts as visited once and is never simulated
        root_->untried_actions = stage_actions(root_->state, pool_, stage_, threshold_);
        nodes_.push_back(root_.get());
        calls_at_start_ = cache_.oracle_calls();
        hits_at_start_ = cache_.hits();
        generations_at_start_ = oracle_.generation_calls();
    }

    const SearchNode& root() const noexcept { return *root_; }
    Stage stage() const noexcept { return stage_; }
    std::size_t threshold() const noexcept { return threshold_; }
    std::size_t iterations() const noexcept { return iteration_; }
    std::optional<std::size_t> stage_flip_iteration() const noexcept { return flip_iteration_; }
    double current_c() const noexcept { return stage_ == Stage::Stage1 ? config_.c_stage1 : config_.c_stage2; }
    const Simulator& simulator() const noexcept { return simulator_; }
    const std::vector<IterationTrace>& trace() const noexcept { return trace_; }
    const std::vector<SearchNode*>& nodes() const noexcept { return nodes_; }

    /// Consume one untried action of `node` and attach the resulting child.
    SearchNode* expand(SearchNode& node) {
        if (node.untried_actions.empty()) throw Error(ErrorKind::NoUntriedActions, "node is fully expanded");
        const auto pick = static_cast<std::size_t>(rng_.below(node.untried_actions.size()));
        PendingAction action = std::move(node.untried_actions[pick]);
        node.untried_actions.erase(node.untried_actions.begin() + static_cast<std::ptrdiff_t>(pick));

        ScoringRule next;
        if (action.kind == ActionKind::Add) {
            next = apply_action(node.state, AddAction{action.subrule});
        } else {
            next = apply_action(node.state, ModifyAction{action.subrule.id(), modified(action.subrule, action.direction)});
        }
        auto child = std::make_unique<SearchNode>();
        child->state = std::move(next);
        child->parent = &node;
        child->created_stage = stage_;
        child->created_by = action.kind;
        child->untried_actions = stage_actions(child->state, pool_, stage_, threshold_);
        SearchNode* raw = child.get();
        node.children.push_back(std::move(child));
        nodes_.push_back(raw);
        return raw;
    }

    /// Reward of a state through the cache (fresh oracle calls on misses).
    double simulate(const ScoringRule& state) {
        return simulator_.simulate(
            state, [this](const LabeledSample& s, const SubRule& sr) { return cache_.get_or_score(s, sr, oracle_); },
            oracle_.max_in_flight(), &warnings_);
    }

    /// One select -> expand -> simulate -> backpropagate cycle.
    void step() {
        const double c = current_c();
        IterationTrace t{iteration_, stage_, c, ActionKind::None, 0, 0.0};
        SearchNode* leaf = select(*root_, c);
        if (!leaf->untried_actions.empty()) {
            leaf = expand(*leaf);
            t.action = leaf->created_by;
            if (stage_ == Stage::Stage1 && leaf->state.size() >= threshold_) flip_to_stage2();
        }
        double r = 0.0;
        if (!leaf->state.empty()) {
            if (!leaf->reward) leaf->reward = simulate(leaf->state);
            r = *leaf->reward;
        }
        backpropagate(leaf, r);
        t.state_size = leaf->state.size();
        t.reward = r;
        trace_.push_back(t);
        ++iteration_;
    }

    SearchReport run() {
        for (std::size_t i = 0; i < config_.iteration_budget; ++i) step();
        return report();
    }

    /// States aggregated by stable key in order of first appearance.
    SearchReport report() const {
        SearchReport r;
        std::map<std::string, std::size_t> index;
        for (const SearchNode* n : nodes_) {
            if (n->N == 0) continue;
            auto [it, inserted] = index.try_emplace(n->state.stable_key(), r.states.size());
            if (inserted) {
                r.states.push_back({n->state, 0, 0.0, 0.0, n->reward, n->created_stage});
            }
            auto& s = r.states[it->second];
            s.visits += n->N;
            s.total_reward += n->W;
        }
        for (auto& s : r.states) s.mean_reward = s.total_reward / static_cast<double>(s.visits);
        r.stage_flip_iteration = flip_iteration_;
        r.oracle_calls = cache_.oracle_calls() - calls_at_start_;
        r.cache_hits = cache_.hits() - hits_at_start_;
        r.generation_calls = oracle_.generation_calls() - generations_at_start_;
        r.config_echo = to_json(config_);
        r.config_echo["stage_threshold"] = threshold_;
        r.config_echo["task"] = to_json(task_);
        r.pool = pool_;
        for (const auto& s : simulator_.subset()) r.subset_ids.push_back(s.sample_id);
        r.trace = trace_;
        r.warnings = warnings_;
        return r;
    }

private:
    void flip_to_stage2() {
        stage_ = Stage::Stage2;
        flip_iteration_ = iteration_;
        for (SearchNode* n : nodes_) n->untried_actions = stage_actions(n->state, pool_, stage_, threshold_);
    }

    const SubRule& modified(const SubRule& sr, Direction d) {
        const auto key = std::make_pair(sr.id().value, d);
        auto it = modifications_.find(key);
        if (it == modifications_.end()) it = modifications_.emplace(key, oracle_.modify_rubric(sr, d)).first;
        return it->second;
    }

    TaskSpec task_;
    SearchConfig config_;
    std::vector<SubRule> pool_;
    Oracle& oracle_;
    PredictionCache& cache_;
    Simulator simulator_;
    hashing::SplitMix rng_;
    std::size_t threshold_ = 0;
    Stage stage_ = Stage::Stage1;
    std::optional<std::size_t> flip_iteration_;
    std::size_t iteration_ = 0;
    std::unique_ptr<SearchNode> root_;
    std::vector<SearchNode*> nodes_;
    std::map<std::pair<std::string, Direction>, SubRule> modifications_;
    std::vector<IterationTrace> trace_;
    std::vector<std::string> warnings_;
    std::uint64_t calls_at_start_ = 0;
    std::uint64_t hits_at_start_ = 0;
    std::uint64_t generations_at_start_ = 0;
};

/// Generate the candidate pool, draw the distill subset, and run the search.
inline SearchReport run_search(const TaskSpec& task, const std::vector<LabeledSample>& data, Oracle& oracle,
                               PredictionCache& cache, const SearchConfig& config) {
    config.validate();
    const auto pool = oracle.propose_subrules({}, static_cast<std::size_t>(task.max_aspects));
    if (pool.subrules.empty())
        throw Error(ErrorKind::BudgetExhaustedWithEmptyTree, "candidate pool generation produced no sub-rules");
    auto subset = sample_distill_subset(data, config.distill_subset_size, config.seed, task.score_kind);
    SearchEngine engine(task, std::move(subset), pool.subrules, oracle, cache, config);
    auto report = engine.run();
    report.warnings.insert(report.warnings.begin(), pool.warnings.begin(), pool.warnings.end());
    return report;
}

/// Reward of `rule` recomputed purely from stored scores; throws if a score
/// is missing.
inline double recompute_reward(const ScoringRule& rule, const Simulator& simulator,
                               const std::map<PredictionCache::Key, double>& scores) {
    return simulator.simulate(rule, [&](const LabeledSample& s, const SubRule& sr) {
        auto it = scores.find({s.sample_id, sr.id().value});
        if (it == scores.end()) throw Error(ErrorKind::CorruptStore, "missing score for " + s.sample_id);
        return it->second;
    });
}

} // namespace ruleforge
