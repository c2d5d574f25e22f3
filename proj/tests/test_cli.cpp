#include <sstream>

#include <gtest/gtest.h>

#include "ruleforge/cli.hpp"
#include "test_support.hpp"

using namespace ruleforge;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) { return cli::read_file(p); }

json planted_config(const fs::path& dir, std::uint64_t seed = 1) {
    const auto task = rf_test::essay_task();
    std::string data = serialize_dataset(make_planted_dataset(task, 200, 3, Split::Distill, 0, "d"));
    data += serialize_dataset(make_planted_dataset(task, 60, 4, Split::Train, 0, "t"));
    cli::write_file(dir / "data.jsonl", data);
    return json{{"task", to_json(task)},
                {"search", {{"iteration_budget", 80}, {"distill_subset_size", 60}, {"seed", seed}}},
                {"oracle", {{"kind", "planted"}, {"environment", to_json(rf_test::planted_env(0.25))}}},
                {"paths", {{"dataset", "data.jsonl"}, {"out_dir", "out"}}}};
}

cli::RunConfig config_in(const fs::path& dir, std::uint64_t seed = 1) {
    cli::write_file(dir / "config.json", planted_config(dir, seed).dump(2));
    return cli::load_run_config(dir / "config.json");
}

json error_of(const std::string& stderr_text) { return json::parse(stderr_text).at("error"); }

} // namespace

TEST(CliDistill, WritesRulesReportAndCache) {
    const auto dir = rf_test::temp_dir("cli_distill");
    const auto c = config_in(dir);
    std::ostringstream log;
    const auto out = cli::cmd_distill(c, log);
    const auto rules = parse_rules(slurp(out.rules));
    EXPECT_GE(rules.size(), 1u);
    EXPECT_LE(rules.size(), 5u);
    EXPECT_TRUE(fs::exists(out.report));
    EXPECT_TRUE(fs::exists(dir / "out" / "cache.jsonl"));
    EXPECT_EQ(out.report.parent_path(), dir / "out");
}

TEST(CliDistill, DeterministicOutputs) {
    const auto a = rf_test::temp_dir("cli_det_a"), b = rf_test::temp_dir("cli_det_b");
    std::ostringstream log;
    const auto oa = cli::cmd_distill(config_in(a, 5), log);
    const auto ob = cli::cmd_distill(config_in(b, 5), log);
    EXPECT_EQ(slurp(oa.rules), slurp(ob.rules));
    EXPECT_EQ(slurp(oa.report), slurp(ob.report));
    EXPECT_EQ(slurp(oa.cache), slurp(ob.cache));
}

TEST(CliDistill, WarmCacheAvoidsOracleCalls) {
    const auto dir = rf_test::temp_dir("cli_warm");
    const auto c = config_in(dir);
    std::ostringstream log;
    const auto first = cli::cmd_distill(c, log);
    const auto rules = slurp(first.rules);
    cli::cmd_distill(c, log);
    const auto report = report_from_json(json::parse(slurp(first.report)));
    EXPECT_EQ(report.oracle_calls, 0u);
    EXPECT_EQ(slurp(first.rules), rules);
}

TEST(CliDistill, MissingDatasetIsConfigError) {
    const auto dir = rf_test::temp_dir("cli_missing");
    auto j = planted_config(dir);
    j["paths"]["dataset"] = "nowhere.jsonl";
    const auto c = cli::run_config_from_json(j, dir);
    std::ostringstream err;
    EXPECT_EQ(cli::run_command([&] { cli::cmd_distill(c); return 0; }, err), 2);
    EXPECT_EQ(error_of(err.str())["kind"], "ConfigError");
}

TEST(CliDistill, BadDataIsDataError) {
    const auto dir = rf_test::temp_dir("cli_baddata");
    const auto c = config_in(dir);
    cli::write_file(dir / "data.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"gold\":9}\n");
    std::ostringstream err;
    EXPECT_EQ(cli::run_command([&] { cli::cmd_distill(c); return 0; }, err), 4);
    const auto e = error_of(err.str());
    EXPECT_EQ(e["kind"], "RangeError");
    EXPECT_EQ(e["line"], 1);
}

TEST(CliConfig, Validation) {
    EXPECT_THROW(cli::run_config_from_json(json::array()), Error);
    EXPECT_THROW(cli::run_config_from_json(json{{"preset", "asap"}}), Error);  // no oracle
    EXPECT_THROW(cli::run_config_from_json(json{{"preset", "asap"}, {"oracle", {{"kind", "magic"}}}}), Error);
    const auto c = cli::run_config_from_json(
        json{{"preset", "asap"},
             {"oracle", {{"kind", "remote"}, {"base_url", "http://x/v1"}, {"retry_budget", 1}}},
             {"paths", {{"dataset", "d.jsonl"}}}},
        "/base");
    EXPECT_EQ(c.oracle.kind, cli::OracleConfig::Kind::Remote);
    EXPECT_EQ(c.oracle.remote.retry_budget, 1u);
    EXPECT_EQ(c.dataset, fs::path("/base/d.jsonl"));
    EXPECT_EQ(c.task.max_subrules, 6);
}

TEST(CliScore, OneLinePerSampleAndPerfectRule) {
    const auto dir = rf_test::temp_dir("cli_score");
    auto j = planted_config(dir);
    j["oracle"]["environment"]["noise_sd"] = 0.0;
    const auto c = cli::run_config_from_json(j, dir);
    std::vector<RankedRule> perfect{{rf_test::make_rule(rf_test::latent_names()), 1, 1.0}};
    cli::write_file(dir / "rules.json", serialize_rules(perfect));
    const auto input = make_planted_dataset(c.task, 10, 77, Split::Test, 0, "x");
    cli::write_file(dir / "input.jsonl", serialize_dataset(input));
    std::ostringstream out;
    EXPECT_EQ(cli::cmd_score(c, dir / "rules.json", dir / "input.jsonl", out), 10u);
    std::istringstream lines(out.str());
    std::string line;
    std::size_t i = 0;
    while (std::getline(lines, line)) {
        const auto r = json::parse(line);
        EXPECT_EQ(r["id"], input[i].sample_id);
        EXPECT_EQ(r["score"].get<double>(), input[i].gold);
        EXPECT_EQ(r["rule_key"], perfect[0].rule.stable_key());
        ++i;
    }
    EXPECT_EQ(i, 10u);
}

TEST(CliScore, UnparseableReplyMarksOnlyThatLine) {
    // Remote oracle whose transport garbles the reply for one sample.
    class Garble : public ChatTransport {
    public:
        std::string complete(const ChatRequest& r) override {
            return r.messages.back().content.find("text of b") != std::string::npos ? "no idea" : "\\box{4}";
        }
    };
    const auto dir = rf_test::temp_dir("cli_garble");
    const auto c = config_in(dir);
    RemoteConfig rc;
    rc.retry_budget = 1;
    rc.backoff = std::chrono::milliseconds(0);
    RemoteOracle oracle(std::make_shared<Garble>(), c.task, rc);
    cli::write_file(dir / "rules.json", serialize_rules({{rf_test::make_rule({"Ideas"}), 1, 1.0}}));
    cli::write_file(dir / "input.jsonl", serialize_dataset({rf_test::make_sample("a", 2), rf_test::make_sample("b", 3),
                                                            rf_test::make_sample("c", 5)}));
    std::ostringstream out;
    cli::cmd_score(c, dir / "rules.json", dir / "input.jsonl", out, oracle);
    std::istringstream in(out.str());
    std::vector<json> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(json::parse(line));
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0]["score"], 4);
    EXPECT_EQ(lines[1]["error"]["kind"], "MalformedResponse");
    EXPECT_FALSE(lines[1].contains("score"));
    EXPECT_EQ(lines[2]["score"], 4);
}

TEST(CliAnalyze, ReferenceAlignmentFixture) {
    SearchReport report;
    for (const auto& n : {"Ideas", "Organization", "Voice", "Word Choice", "Conventions", "Font", "Length", "Title",
                          "Quotes", "Margins"})
        report.pool.push_back(rf_test::make_subrule(n));
    report.states.push_back(
        {rf_test::make_rule({"Ideas", "Organization", "Voice", "Word Choice", "Conventions"}), 9, 8.1, 0.9, 0.9, Stage::Stage1});
    report.states.push_back({rf_test::make_rule({"Ideas", "Font"}), 3, 1.5, 0.5, 0.5, Stage::Stage1});
    const json human{{"human_aspects", {"Ideas", "Organization", "Voice", "Word Choice", "Fluency", "Conventions"}}};
    const auto out = cli::cmd_analyze(report_from_json(to_json(report)), human);
    const auto& a = out.at("alignment");
    EXPECT_DOUBLE_EQ(a["precision"].get<double>(), 1.0);
    EXPECT_NEAR(a["p_hypergeometric"].get<double>(), 0.0238, 1e-4);
    EXPECT_EQ(out["schema_version"], analysis_schema_version);
    EXPECT_TRUE(out["avg_pairwise_jaccard"].contains("value"));
}

TEST(CliAnalyze, SingleRuleAndNoHumanFile) {
    SearchReport report;
    report.states.push_back({ScoringRule(), 5, 2.0, 0.4, std::nullopt, Stage::Stage1});
    report.states.push_back({rf_test::make_rule({"a", "b"}), 4, 2.0, 0.5, 0.5, Stage::Stage1});
    const auto out = cli::cmd_analyze(report, std::nullopt);
    EXPECT_TRUE(out.contains("entropy"));
    EXPECT_DOUBLE_EQ(out["entropy"]["subrule_id"].get<double>(), 1.0);
    EXPECT_TRUE(out["avg_pairwise_jaccard"]["insufficient"].get<bool>());
    EXPECT_FALSE(out.contains("alignment"));
}

TEST(CliExportRl, CountAndDeterminism) {
    const auto dir = rf_test::temp_dir("cli_export");
    const auto c = config_in(dir);
    cli::write_file(dir / "rules.json", serialize_rules({{rf_test::make_rule({"Ideas", "Voice"}), 2, 0.7}}));
    std::ostringstream a, b;
    const auto s = cli::cmd_export_rl(c, dir / "rules.json", 50, 9, a);
    cli::cmd_export_rl(c, dir / "rules.json", 50, 9, b);
    EXPECT_EQ(s.records, 50u);
    EXPECT_EQ(a.str(), b.str());
    std::istringstream in(a.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto r = json::parse(line);
        const ScorePair gold{r["gold"][0].get<double>(), r["gold"][1].get<double>()};
        EXPECT_NEAR(total_reward(gold, gold, r["sc"].get<double>()), 3.0, 1e-12);
        ++n;
    }
    EXPECT_EQ(n, 50u);
}

TEST(CliSimulate, DefaultScenarioPasses) {
    const auto sc = cli::scenario_from_json(cli::parse_json_file(fs::path(RULEFORGE_SOURCE_DIR) / "configs/scenario_default.json"));
    const auto out = cli::run_scenario(sc);
    EXPECT_TRUE(out.passed) << cli::to_json(out, sc).dump(2);
    EXPECT_LT(out.elapsed_s, sc.runtime_budget_s);
}

TEST(CliSimulate, HugeNoiseFailsOnRecall) {
    auto j = cli::parse_json_file(fs::path(RULEFORGE_SOURCE_DIR) / "configs/scenario_default.json");
    j["noise_fraction"] = 20.0;
    j["seeds"] = {1, 2};
    const auto sc = cli::scenario_from_json(j);
    const auto out = cli::run_scenario(sc);
    EXPECT_FALSE(out.passed);
    bool recall_low = false;
    for (const auto& s : out.seeds) recall_low = recall_low || s.recall < sc.min_recall;
    EXPECT_TRUE(recall_low) << cli::to_json(out, sc).dump(2);
}

TEST(CliSimulate, MalformedScenarioIsConfigError) {
    std::ostringstream err;
    EXPECT_EQ(cli::run_command([] { cli::scenario_from_json(json{{"task", {{"score_min", 1}}}}); return 0; }, err), 2);
    EXPECT_EQ(error_of(err.str())["kind"], "ConfigError");
    EXPECT_THROW(cli::scenario_from_json(json{{"preset", "asap"}}), Error);
}

TEST(CliErrors, ExitCodeMapping) {
    EXPECT_EQ(cli::exit_code_for(ErrorKind::ConfigError), 2);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::OracleUnavailable), 3);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::MalformedResponse), 3);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::ParseError), 4);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::CorruptStore), 4);
}
