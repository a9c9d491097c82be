#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "help/agents.hpp"
#include "help/llm_gateway.hpp"

namespace help::cli {

namespace fs = std::filesystem;

/// Bad flags, unreadable inputs, mismatched files. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every setting of a run. The config file holds the same keys as `key = value`
/// lines; `#` starts a comment.
struct RunConfig {
  // backend
  std::string script;  // scripted fixture; when set no network is used
  GatewayConfig gateway;
  std::string trace_log;  // optional JSONL log of every chat exchange

  // planner
  std::string mode = "help";             // help | llp_only
  std::string selection = "similarity";  // similarity | fixed
  std::size_t llp_shots = 5;
  bool grounding = true;
  double grounding_threshold = kDefaultGroundingThreshold;
  bool feasibility_check = true;
  bool execute = true;
  std::string embedder = "trigram";  // trigram | remote
  std::string embed_url;
  std::string scorer = "tf";  // tf | embedding
  std::string registry = "default";  // default | alfred | path to a registry file
  std::string prompts;               // directory; shipped prompts when empty
  std::string bank;                  // vocabulary bank file; shipped bank when empty

  // io
  std::string dataset;
  std::string out = "out";
  std::size_t parallelism = 1;
  std::uint64_t seed = 42;

  /// Applies one key; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void load_file(const fs::path& path);

  /// Settings that change results. Paths are left out so relocated runs hash alike.
  nlohmann::json to_json() const;
  std::string hash() const;

  PipelineConfig pipeline() const;
  SkillRegistry skill_registry() const;
  PromptSet prompt_set() const;
  VocabBank vocab_bank() const;
  std::shared_ptr<ChatBackend> make_backend() const;
  std::shared_ptr<const Embedder> make_embedder() const;
  std::shared_ptr<const SimilarityScorer> make_scorer() const;
};

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::string suite = "core";  // core | lengths | ambiguous | feasibility | smoke
  std::size_t per_class = 100;
  std::size_t per_length = 200;
  std::size_t count = 50;
  std::vector<int> lengths{2, 4, 6, 8, 10, 12, 14, 16};
  std::uint64_t seed = 42;
  std::string bank;
  fs::path out = "out";
};

/// Writes dataset.jsonl and manifest.json under `out`; returns the manifest.
nlohmann::json cmd_gen(const GenOptions& options);

std::vector<TaskInstance> load_dataset(const fs::path& path);

// ---------------------------------------------------------------------------
// run

struct RunSummary {
  std::size_t total = 0;
  std::size_t skipped = 0;  // traces already present
  std::size_t with_errors = 0;
};

/// One trace file per task under out/traces, then out/traces.jsonl in dataset
/// order and out/run.json. `backend` overrides the configured one.
RunSummary cmd_run(const RunConfig& config, std::shared_ptr<ChatBackend> backend = nullptr,
                   bool feasibility_only = false);

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path dataset;
  fs::path run_dir;  // holds traces/ from cmd_run
  fs::path out;      // defaults to run_dir
  std::string bank;
  std::string registry = "default";
};

/// Writes records.jsonl, report.json, report.csv, by_length.csv and by_class.csv
/// (or feasibility.json for feasibility datasets); returns report.json.
nlohmann::json cmd_eval(const EvalOptions& options);

// ---------------------------------------------------------------------------
// report

/// Metrics against plan length as a plain-text table.
std::string render_table(const nlohmann::json& report, const nlohmann::json* baseline = nullptr);

/// Prints the table and writes report.md next to report.json.
std::string cmd_report(const fs::path& eval_dir, const std::optional<fs::path>& compare_dir = std::nullopt);

/// Full command line; returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace help::cli
