#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ruleforge/cli.hpp"

namespace rc = ruleforge::cli;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
    std::optional<std::string> out_dir;
    bool audit = false;
};

rc::RunConfig load(const std::string& path, const Overrides& o) {
    auto c = rc::load_run_config(path);
    if (o.seed) c.search.seed = *o.seed;
    if (o.budget) c.search.iteration_budget = *o.budget;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.audit) c.audit = true;
    return c;
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ruleforge::Error(ruleforge::ErrorKind::ConfigError, "cannot write '" + path + "'");
    fn(out);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distill scoring rules from labeled data and apply them"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
        sub->add_option("--seed", overrides.seed, "search and selection seed");
        sub->add_option("--budget", overrides.budget, "MCTS iteration budget");
        sub->add_option("--out-dir", overrides.out_dir, "output directory");
        sub->add_flag("--audit", overrides.audit, "log every oracle exchange");
    };

    auto* distill = app.add_subcommand("distill", "search for scoring rules");
    add_common(distill);

    std::string rules_path, input_path, output_path;
    auto* score = app.add_subcommand("score", "score texts with distilled rules");
    add_common(score);
    score->add_option("--rules", rules_path, "rules.json from distill")->required();
    score->add_option("--input", input_path, "samples (JSONL)")->required();
    score->add_option("-o,--output", output_path, "output JSONL (default stdout)");

    std::string report_path, human_path;
    std::size_t top_n = 10;
    auto* analyze = app.add_subcommand("analyze", "rule-set statistics and alignment");
    analyze->add_option("--report", report_path, "report.json from distill")->required();
    analyze->add_option("--human", human_path, "reference aspects (JSON)");
    analyze->add_option("--top", top_n, "number of top rules to analyze");
    analyze->add_option("-o,--output", output_path, "output JSON (default stdout)");

    std::size_t n_pairs = 100, max_select = 3;
    std::uint64_t pairing_seed = 0;
    auto* export_rl = app.add_subcommand("export-rl", "write rule-guided pairwise RL records");
    add_common(export_rl);
    export_rl->add_option("--rules", rules_path, "rules.json from distill")->required();
    export_rl->add_option("--pairs", n_pairs, "number of pairs");
    export_rl->add_option("--pairing-seed", pairing_seed, "pairing seed");
    export_rl->add_option("--max-select", max_select, "aspects the evaluator may select");
    export_rl->add_option("-o,--output", output_path, "output JSONL (default stdout)");

    std::string scenario_path;
    auto* simulate = app.add_subcommand("simulate", "planted-recovery scenario");
    simulate->add_option("--scenario", scenario_path, "scenario (JSON)")->required();
    simulate->add_option("-o,--output", output_path, "output JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rc::ConfigFailure;
    }

    if (distill->parsed()) {
        return rc::run_command([&] {
            const auto out = rc::cmd_distill(load(config_path, overrides), std::cerr);
            std::cout << out.report.string() << "\n" << out.rules.string() << "\n";
            return 0;
        });
    }
    if (score->parsed()) {
        return rc::run_command([&] {
            const auto c = load(config_path, overrides);
            with_output(output_path, [&](std::ostream& os) { rc::cmd_score(c, rules_path, input_path, os); });
            return 0;
        });
    }
    if (analyze->parsed()) {
        return rc::run_command([&] {
            const auto report = ruleforge::report_from_json(rc::parse_json_file(report_path));
            std::optional<ruleforge::json> human;
            if (!human_path.empty()) human = rc::parse_json_file(human_path);
            const auto result = rc::cmd_analyze(report, human, top_n);
            with_output(output_path, [&](std::ostream& os) { os << result.dump(2) << "\n"; });
            return 0;
        });
    }
    if (export_rl->parsed()) {
        return rc::run_command([&] {
            const auto c = load(config_path, overrides);
            ruleforge::ExportSummary summary;
            with_output(output_path, [&](std::ostream& os) {
                summary = rc::cmd_export_rl(c, rules_path, n_pairs, pairing_seed, os, max_select);
            });
            for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
            std::cerr << "export-rl: " << summary.records << " records, " << summary.unequal_pairs
                      << " with unequal gold\n";
            return 0;
        });
    }
    return rc::run_command([&] {
        const auto scenario = rc::scenario_from_json(rc::parse_json_file(scenario_path));
        const auto outcome = rc::run_scenario(scenario);
        with_output(output_path, [&](std::ostream& os) { os << rc::to_json(outcome, scenario).dump(2) << "\n"; });
        return outcome.passed ? 0 : static_cast<int>(rc::Failure);
    });
}
