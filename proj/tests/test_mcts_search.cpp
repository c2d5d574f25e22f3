#include <gtest/gtest.h>

#include "ruleforge/mcts_search.hpp"
#include "ruleforge/planted_oracle.hpp"
#include "test_support.hpp"

using namespace ruleforge;

namespace {

std::unique_ptr<SearchNode> child_of(SearchNode& parent, double W, std::uint64_t N) {
    auto c = std::make_unique<SearchNode>();
    c->parent = &parent;
    c->W = W;
    c->N = N;
    return c;
}

std::vector<SubRule> pool_of(const std::vector<std::string>& names) {
    std::vector<SubRule> out;
    for (const auto& n : names) out.push_back(rf_test::make_subrule(n));
    return out;
}

struct Fixture {
    TaskSpec task = rf_test::essay_task();
    PlantedOracle oracle{rf_test::planted_env(0.25), rf_test::essay_task()};
    PredictionCache cache;
    std::vector<LabeledSample> subset = make_planted_dataset(rf_test::essay_task(), 60, 3);
    std::vector<SubRule> pool = oracle.propose_subrules({}, 10).subrules;

    SearchEngine engine(SearchConfig config = {}) { return SearchEngine(task, subset, pool, oracle, cache, config); }
};

} // namespace

TEST(Uct, HandValues) {
    SearchNode n;
    n.W = 2;
    n.N = 4;
    EXPECT_NEAR(uct_value(n, 8, 1.0), 0.5 + std::sqrt(2 * std::log(8.0) / 4), 1e-12);
    EXPECT_NEAR(uct_value(n, 8, 1.0), 1.519667, 1e-6);
    EXPECT_DOUBLE_EQ(uct_value(n, 8, 0.0), 0.5);
    SearchNode m;
    m.W = 4;
    m.N = 8;
    EXPECT_GT(uct_value(n, 20, 1.0), uct_value(m, 20, 1.0));
    SearchNode fresh;
    EXPECT_THROW(uct_value(fresh, 4, 1.0), Error);
}

TEST(Select, RootWithUntriedActions) {
    SearchNode root;
    root.N = 1;
    root.untried_actions.push_back({ActionKind::Add, rf_test::make_subrule("A"), Direction::Stricter});
    root.children.push_back(child_of(root, 1, 1));
    EXPECT_EQ(select(root, 1.0), &root);
}

TEST(Select, DescendsToDeepestLeaf) {
    SearchNode root;
    root.N = 4;
    root.children.push_back(child_of(root, 2, 3));
    auto* a = root.children.back().get();
    a->children.push_back(child_of(*a, 1, 2));
    auto* b = a->children.back().get();
    b->children.push_back(child_of(*b, 0.5, 1));
    auto* leaf = b->children.back().get();
    EXPECT_EQ(select(root, 1.0), leaf);
}

TEST(Select, TieGoesToFirstChild) {
    SearchNode root;
    root.N = 5;
    root.children.push_back(child_of(root, 1, 2));
    root.children.push_back(child_of(root, 1, 2));
    EXPECT_EQ(select(root, 1.0), root.children.front().get());
    EXPECT_EQ(select(root, 0.0), root.children.front().get());
}

TEST(Backpropagate, PathUpdates) {
    SearchNode root;
    root.children.push_back(child_of(root, 0, 0));
    auto* a = root.children.back().get();
    a->children.push_back(child_of(*a, 0, 0));
    auto* b = a->children.back().get();
    b->children.push_back(child_of(*b, 0, 0));
    auto* c = b->children.back().get();
    backpropagate(c, 0.0);
    for (const SearchNode* n : {&root, a, b, c}) {
        EXPECT_EQ(n->N, 1u);
        EXPECT_EQ(n->W, 0.0);
    }
    backpropagate(c, 0.25);
    backpropagate(a, 0.5);
    EXPECT_EQ(root.N, 3u);
    EXPECT_DOUBLE_EQ(root.W, 0.75);
    EXPECT_EQ(c->N, 2u);
    EXPECT_THROW(backpropagate(c, 1.5), Error);
}

TEST(StageActions, Counts) {
    const auto pool = pool_of({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
    EXPECT_EQ(stage_actions(ScoringRule(), pool, Stage::Stage1, 6).size(), 10u);
    const auto three = rf_test::make_rule({"a", "b", "c"});
    EXPECT_EQ(stage_actions(three, pool, Stage::Stage2, 6).size(), 6u);
    EXPECT_EQ(stage_actions(three, pool, Stage::Stage1, 6).size(), 7u);
    const auto six = rf_test::make_rule({"a", "b", "c", "d", "e", "f"});
    EXPECT_TRUE(stage_actions(six, pool, Stage::Stage1, 6).empty());
}

TEST(Simulator, PerfectRuleScoresOne) {
    const auto task = rf_test::essay_task();
    PlantedOracle oracle(rf_test::planted_env(0.0), task);
    const auto subset = make_planted_dataset(task, 80, 5);
    Simulator sim(task, subset, RewardMode::DatasetMetric, 1);
    const auto score = [&](const LabeledSample& s, const SubRule& sr) { return oracle.score_sample(s, sr); };
    EXPECT_DOUBLE_EQ(sim.simulate(rf_test::make_rule(rf_test::latent_names()), score), 1.0);
    Simulator par(task, subset, RewardMode::Pairwise, 1);
    EXPECT_DOUBLE_EQ(par.simulate(rf_test::make_rule(rf_test::latent_names()), score), 1.0);
}

TEST(Simulator, DecoyRuleNearBaseline) {
    const auto task = rf_test::essay_task();
    PlantedOracle oracle(rf_test::planted_env(0.25), task);
    const auto subset = make_planted_dataset(task, 120, 5);
    Simulator sim(task, subset, RewardMode::DatasetMetric, 1);
    const auto score = [&](const LabeledSample& s, const SubRule& sr) { return oracle.score_sample(s, sr); };
    const double latent = sim.simulate(rf_test::make_rule({"Content"}), score);
    for (const auto& d : rf_test::decoy_names()) {
        const double r = sim.simulate(rf_test::make_rule({d}), score);
        EXPECT_NEAR(r, 0.5, 0.15) << d;  // QWK near 0
        EXPECT_LT(r, latent) << d;
    }
}

TEST(Simulator, IncrementalOracleCost) {
    Fixture f;
    Simulator sim(f.task, f.subset, RewardMode::DatasetMetric, 1);
    const auto score = [&](const LabeledSample& s, const SubRule& sr) { return f.cache.get_or_score(s, sr, f.oracle); };
    ScoringRule state;
    for (std::size_t k = 0; k < 4; ++k) {
        state = apply_action(state, AddAction{f.pool[k]});
        const auto before = f.oracle.score_calls();
        sim.simulate(state, score);
        EXPECT_EQ(f.oracle.score_calls() - before, f.subset.size());
        const auto again = f.oracle.score_calls();
        sim.simulate(state, score);
        EXPECT_EQ(f.oracle.score_calls(), again);
    }
}

TEST(Simulator, DegenerateMetricYieldsZeroWithWarning) {
    auto task = rf_test::essay_task();
    std::vector<LabeledSample> subset;
    for (int i = 0; i < 10; ++i) subset.push_back(rf_test::make_sample("s" + std::to_string(i), 3));
    Simulator sim(task, subset, RewardMode::DatasetMetric, 1);
    std::vector<std::string> warnings;
    EXPECT_EQ(sim.reward(std::vector<double>(10, 3.0), &warnings), 0.0);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Simulator, GroupedMetricSkipsUninformativeGroups) {
    auto task = task_preset("relish");
    auto subset = make_planted_dataset(task, 40, 2, Split::Distill, 4);
    Simulator sim(task, subset, RewardMode::DatasetMetric, 1);
    std::vector<double> golds;
    for (const auto& s : subset) golds.push_back(s.gold);
    EXPECT_DOUBLE_EQ(sim.metric_value(golds), 1.0);
}

TEST(SearchEngine, BudgetZeroIsRootOnly) {
    Fixture f;
    SearchConfig cfg;
    cfg.iteration_budget = 0;
    auto e = f.engine(cfg);
    const auto report = e.run();
    ASSERT_EQ(report.states.size(), 1u);
    EXPECT_TRUE(report.states[0].rule.empty());
    EXPECT_EQ(report.states[0].visits, 1u);
    EXPECT_FALSE(report.stage_flip_iteration.has_value());
    EXPECT_EQ(f.oracle.score_calls(), 0u);
}

TEST(SearchEngine, StageScheduleAndCap) {
    Fixture f;
    SearchConfig cfg;
    cfg.iteration_budget = 300;
    cfg.seed = 4;
    cfg.max_subrules = 3;
    auto e = f.engine(cfg);
    const auto report = e.run();
    ASSERT_TRUE(report.stage_flip_iteration.has_value());
    const auto flip = *report.stage_flip_iteration;
    for (const auto& t : report.trace) {
        if (t.iteration > flip) {
            EXPECT_NE(t.action, ActionKind::Add) << t.iteration;
            EXPECT_EQ(t.c, cfg.c_stage2);
        } else if (t.iteration < flip) {
            EXPECT_EQ(t.c, cfg.c_stage1);
        }
        EXPECT_LE(t.state_size, 3u);
    }
    for (const auto& s : report.states) EXPECT_LE(s.rule.size(), 3u);
    EXPECT_EQ(e.stage(), Stage::Stage2);
    EXPECT_EQ(e.current_c(), cfg.c_stage2);
}

TEST(SearchEngine, NoFlipUntilThresholdReached) {
    Fixture f;
    SearchConfig cfg;
    cfg.iteration_budget = 200;
    auto e = f.engine(cfg);
    const auto report = e.run();
    std::size_t deepest = 0;
    for (const auto& t : report.trace) deepest = std::max(deepest, t.state_size);
    EXPECT_EQ(report.stage_flip_iteration.has_value(), deepest >= e.threshold());
    if (!report.stage_flip_iteration)
        for (const auto& t : report.trace) EXPECT_EQ(t.c, cfg.c_stage1);
}

TEST(SearchEngine, ThresholdCappedByPoolAspects) {
    Fixture f;
    f.pool.erase(f.pool.begin() + 3, f.pool.end());
    auto e = f.engine();
    EXPECT_EQ(e.threshold(), 3u);
    for (int i = 0; i < 10; ++i) e.step();
    EXPECT_TRUE(e.stage_flip_iteration().has_value());
}

TEST(SearchEngine, InvariantsHoldEveryIteration) {
    Fixture f;
    SearchConfig cfg;
    cfg.seed = 9;
    auto e = f.engine(cfg);
    for (int i = 0; i < 500; ++i) {
        e.step();
        const auto v = rf_test::tree_violation(e);
        ASSERT_TRUE(v.empty()) << "iteration " << i << ": " << v;
    }
}

TEST(SearchEngine, RunSearchDeterministic) {
    const auto run = [] {
        Fixture f;
        SearchConfig cfg;
        cfg.seed = 11;
        cfg.iteration_budget = 120;
        cfg.distill_subset_size = 50;
        const auto data = make_planted_dataset(f.task, 200, 8);
        return to_json(run_search(f.task, data, f.oracle, f.cache, cfg)).dump();
    };
    EXPECT_EQ(run(), run());
}

TEST(SearchEngine, ReportRoundTrip) {
    Fixture f;
    SearchConfig cfg;
    cfg.iteration_budget = 60;
    const auto report = f.engine(cfg).run();
    const auto back = report_from_json(to_json(report));
    EXPECT_EQ(to_json(back).dump(), to_json(report).dump());
}

TEST(SearchEngine, RecomputeFromCacheMatches) {
    Fixture f;
    SearchConfig cfg;
    cfg.iteration_budget = 80;
    auto e = f.engine(cfg);
    const auto report = e.run();
    const auto scores = f.cache.scores();
    for (const auto& s : report.states) {
        if (!s.reward) continue;
        EXPECT_DOUBLE_EQ(recompute_reward(s.rule, e.simulator(), scores), *s.reward);
    }
}

TEST(SearchConfig, Validation) {
    SearchConfig c;
    c.c_stage2 = 2.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_THROW(search_config_from_json(json{{"reward_mode", "bogus"}}), Error);
    const auto back = search_config_from_json(to_json(SearchConfig{}));
    EXPECT_EQ(back.c_stage1, 1.414);
    EXPECT_EQ(back.reward_mode, RewardMode::DatasetMetric);
}

TEST(ParallelFor, CoversAllIndicesAndPropagatesErrors) {
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 7) throw Error(ErrorKind::OracleUnavailable, "x");
                 }),
                 Error);
}
