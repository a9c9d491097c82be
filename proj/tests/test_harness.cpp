#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "help/harness.hpp"
#include "help/util.hpp"

using namespace help;
using namespace help::cli;

namespace {

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("help_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path smoke_dir() { return data_dir() / "fixtures" / "smoke"; }

std::set<std::string> files_in(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
  return out;
}

/// Trace files without the timing-dependent parts.
std::map<std::string, std::string> trace_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir / "traces")) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST(Config, KeysAndFile) {
  RunConfig c;
  c.set("llp_shots", "3");
  c.set("grounding", "false");
  c.set("mode", "llp_only");
  c.set("grounding_threshold", "0.5");
  EXPECT_EQ(c.llp_shots, 3u);
  EXPECT_FALSE(c.grounding);
  EXPECT_EQ(c.pipeline().mode, PlannerMode::LlpOnly);
  EXPECT_THROW(c.set("nonsense", "1"), ConfigError);
  EXPECT_THROW(c.set("llp_shots", "many"), ConfigError);
  EXPECT_THROW(c.set("mode", "magic"), ConfigError);

  const auto dir = scratch("config");
  write_file(dir / "run.conf", "# comment\nllp_shots = 2\nselection = fixed\n\nparallelism = 4\n");
  RunConfig d;
  d.load_file(dir / "run.conf");
  EXPECT_EQ(d.llp_shots, 2u);
  EXPECT_EQ(d.pipeline().selection, ExemplarSelection::Fixed);
  EXPECT_EQ(d.parallelism, 4u);

  RunConfig moved = d;
  moved.out = "/elsewhere";
  moved.dataset = "/other/dataset.jsonl";
  EXPECT_EQ(moved.hash(), d.hash());
  moved.llp_shots = 4;
  EXPECT_NE(moved.hash(), d.hash());

  write_file(dir / "bad.conf", "llp_shots = 2\nwhat = ever\n");
  EXPECT_EQ(run_cli({"--config", (dir / "bad.conf").string(), "run", "--dataset", "x"}), 2);
  EXPECT_EQ(run_cli({"--config", (dir / "missing.conf").string(), "gen"}), 2);
  fs::remove_all(dir);
}

TEST(Cli, BadInvocationsExitTwo) {
  EXPECT_EQ(run_cli({"gen", "--suite", "nope"}), 2);
  EXPECT_EQ(run_cli({"frobnicate"}), 2);
  EXPECT_EQ(run_cli({"run", "--dataset", "/does/not/exist.jsonl", "--script", (smoke_dir() / "script.json").string()}),
            2);
  const auto empty = scratch("empty");
  EXPECT_EQ(run_cli({"report", "--in", empty.string()}), 2);
  EXPECT_EQ(run_cli({"eval", "--dataset", (smoke_dir() / "dataset.jsonl").string(), "--run", empty.string()}), 2);
  fs::remove_all(empty);
}

TEST(Gen, DeterministicAndCounted) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(run_cli({"gen", "--suite", "lengths", "--per-length", "20", "--seed", "7", "--out", a.string()}), 0);
  ASSERT_EQ(run_cli({"--seed", "7", "--out", b.string(), "gen", "--suite", "lengths", "--per-length", "20"}), 0);
  EXPECT_EQ(read_file(a / "dataset.jsonl"), read_file(b / "dataset.jsonl"));
  const auto manifest = read_json(a / "manifest.json");
  EXPECT_EQ(manifest["counts"]["total"], 160);
  for (const auto& [len, n] : manifest["counts"]["by_length"].items()) EXPECT_EQ(n, 20) << len;
  EXPECT_EQ(manifest["dataset_hash"], file_hash(a / "dataset.jsonl"));
  EXPECT_EQ(load_dataset(a / "dataset.jsonl").size(), 160u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Gen, ShippedSmokeFixtureIsCurrent) {
  const auto dir = scratch("gen_smoke");
  ASSERT_EQ(run_cli({"gen", "--suite", "smoke", "--seed", "42", "--out", dir.string()}), 0);
  EXPECT_EQ(read_file(dir / "dataset.jsonl"), read_file(smoke_dir() / "dataset.jsonl"));
  fs::remove_all(dir);
}

TEST(Pipeline, SmokeRunEvalReport) {
  const auto dir = scratch("smoke");
  const auto dataset = (smoke_dir() / "dataset.jsonl").string();
  const auto script = (smoke_dir() / "script.json").string();
  ASSERT_EQ(run_cli({"run", "--dataset", dataset, "--script", script, "--parallelism", "4", "--out", dir.string()}), 0);
  EXPECT_EQ(files_in(dir / "traces").size(), 20u);
  ASSERT_EQ(run_cli({"eval", "--dataset", dataset, "--out", dir.string()}), 0);
  for (const char* f : {"records.jsonl", "report.json", "report.csv", "by_length.csv", "by_class.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto report = read_json(dir / "report.json");
  EXPECT_EQ(report["tasks"], 20);
  EXPECT_DOUBLE_EQ(report["metrics"]["overall"]["em_p"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["sim_success"]["overall"].get<double>(), 1.0);
  EXPECT_EQ(report["meta"]["config_hash"], read_json(dir / "run.json")["config_hash"]);
  EXPECT_TRUE(read_file(dir / "report.csv").starts_with("# config_hash="));

  ASSERT_EQ(run_cli({"report", "--in", dir.string()}), 0);
  const auto md = read_file(dir / "report.md");
  EXPECT_NE(md.find("EM-P"), std::string::npos);
  EXPECT_NE(md.find("SIM"), std::string::npos);

  // a second evaluation directory for deltas
  const auto text = cmd_report(dir, dir);
  EXPECT_NE(text.find("+0.000"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Pipeline, ResumeKeepsTraces) {
  const auto dir = scratch("resume");
  RunConfig config;
  config.dataset = (smoke_dir() / "dataset.jsonl").string();
  config.script = (smoke_dir() / "script.json").string();
  config.out = dir.string();
  const auto first = cmd_run(config);
  EXPECT_EQ(first.skipped, 0u);
  const auto full = trace_contents(dir);

  fs::remove(dir / "traces" / "smoke-03.json");
  write_file(dir / "traces" / "smoke-04.json", "{ truncated");
  const auto second = cmd_run(config);
  EXPECT_EQ(second.total, 20u);
  EXPECT_EQ(second.skipped, 18u);
  EXPECT_EQ(trace_contents(dir), full);
  fs::remove_all(dir);
}

TEST(Pipeline, ScriptMissesAreTaskErrors) {
  const auto dir = scratch("miss");
  write_file(dir / "script.json", R"({"rules": [{"system_contains": "feasibility checker", "response": "Feasible"}]})");
  EXPECT_EQ(run_cli({"run", "--dataset", (smoke_dir() / "dataset.jsonl").string(), "--script",
                     (dir / "script.json").string(), "--out", (dir / "run").string()}),
            1);
  const auto trace = read_json(dir / "run" / "traces" / "smoke-01.json");
  EXPECT_FALSE(trace["errors"].empty());
  ASSERT_EQ(run_cli({"eval", "--dataset", (smoke_dir() / "dataset.jsonl").string(), "--out", (dir / "run").string()}),
            0);
  EXPECT_DOUBLE_EQ(read_json(dir / "run" / "report.json")["metrics"]["overall"]["em_p"].get<double>(), 0.0);
  fs::remove_all(dir);
}

TEST(Feasibility, AccuracyOverTwoHundred) {
  const auto dir = scratch("feas");
  ASSERT_EQ(run_cli({"gen", "--suite", "feasibility", "--out", dir.string()}), 0);
  std::vector<std::string> negatives;
  for (const auto& t : load_dataset(dir / "dataset.jsonl"))
    if (t.metadata.at("expected_verdict") == "NotFeasible") negatives.push_back(t.instruction);
  ASSERT_EQ(negatives.size(), 100u);
  // answers "Not feasible" for half of the negatives only
  nlohmann::json rules = nlohmann::json::array();
  for (std::size_t i = 0; i < negatives.size(); i += 2)
    rules.push_back({{"contains", "Command: " + negatives[i] + "\n"}, {"response", "Not feasible"}});
  rules.push_back({{"response", "Feasible"}});
  write_file(dir / "script.json", nlohmann::json{{"rules", rules}}.dump());

  ASSERT_EQ(run_cli({"feasibility", "--dataset", (dir / "dataset.jsonl").string(), "--script",
                     (dir / "script.json").string(), "--out", (dir / "run").string()}),
            0);
  const auto report = read_json(dir / "run" / "feasibility.json");
  EXPECT_EQ(report["total"], 200);
  EXPECT_EQ(report["correct"], 150);
  EXPECT_DOUBLE_EQ(report["accuracy"].get<double>(), 0.75);
  EXPECT_EQ(report["confusion"]["infeasible_as_feasible"], 50);
  fs::remove_all(dir);
}

TEST(Eval, GroundTruthTracesScorePerfectly) {
  const auto dir = scratch("gt");
  ASSERT_EQ(run_cli({"gen", "--suite", "core", "--per-class", "10", "--out", dir.string()}), 0);
  const auto tasks = load_dataset(dir / "dataset.jsonl");
  fs::create_directories(dir / "traces");
  for (const auto& t : tasks) {
    const nlohmann::json trace{{"task_id", t.id}, {"final_plan", render_plan(*t.gt_plan, SkillRegistry::default_registry())},
                               {"parse_ok", true}, {"errors", nlohmann::json::array()}};
    write_file(dir / "traces" / (t.id + ".json"), trace.dump());
  }
  ASSERT_EQ(run_cli({"eval", "--dataset", (dir / "dataset.jsonl").string(), "--out", dir.string()}), 0);
  const auto report = read_json(dir / "report.json");
  for (const char* m : {"em_a", "lcss_a", "lcsa_a", "em_p", "lcss_p", "lcsa_p"})
    EXPECT_DOUBLE_EQ(report["metrics"]["overall"][m].get<double>(), 1.0) << m;
  EXPECT_DOUBLE_EQ(report["sim_success"]["overall"].get<double>(), 1.0);

  // a missing trace scores as an empty plan
  fs::remove(dir / "traces" / (tasks[0].id + ".json"));
  ASSERT_EQ(run_cli({"eval", "--dataset", (dir / "dataset.jsonl").string(), "--out", dir.string()}), 0);
  const auto partial = read_json(dir / "report.json");
  EXPECT_EQ(partial["missing_traces"], 1);
  EXPECT_LT(partial["metrics"]["overall"]["em_p"].get<double>(), 1.0);
  fs::remove_all(dir);
}
