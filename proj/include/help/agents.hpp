#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "help/grounding.hpp"
#include "help/llm_gateway.hpp"
#include "help/plan_dsl.hpp"
#include "help/task_gen.hpp"
#include "help/world_sim.hpp"

namespace help {

struct Exemplar {
  std::string id;
  std::string input;
  std::string objects;  // comma-separated feedback objects, HLP only
  std::string output;
  std::map<std::string, std::string> tags;
};

/// One agent's profile and short-term memory. `user_template` uses {{instruction}},
/// {{objects_block}} and {{skills}}; `objects_template` (with {{objects}}) is
/// rendered into {{objects_block}} only when objects are present.
struct PromptTemplate {
  std::string name;
  std::string version;
  std::string profile;
  std::string user_template;
  std::string objects_template;
  std::vector<Exemplar> exemplars;

  static PromptTemplate from_json(const nlohmann::json& j);
  static PromptTemplate load(const std::filesystem::path& path);

  std::string render_user(std::string_view instruction, std::string_view objects = {}) const;
  std::string render_profile(const SkillRegistry& registry) const;
  /// System profile, one user/assistant pair per exemplar, then the query.
  ChatRequest build(std::string_view instruction, std::string_view objects, const std::vector<Exemplar>& shots,
                    const SkillRegistry& registry) const;
};

/// "move_to(object, location), pick_up(object, location), ..., done()"
std::string describe_skills(const SkillRegistry& registry);

/// Loads hlp.json, llp.json, feedback.json and feasibility.json from a directory.
struct PromptSet {
  PromptTemplate hlp;
  PromptTemplate llp;
  PromptTemplate feedback;
  PromptTemplate feasibility;

  static PromptSet load(const std::filesystem::path& dir);
  static PromptSet load_default();
};

// ---------------------------------------------------------------------------
// Exemplar selection

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual double score(std::string_view a, std::string_view b) const = 0;
  virtual std::string identity() const = 0;
};

/// Cosine between term-frequency vectors of lowercased word unigrams and bigrams.
class TfCosineScorer final : public SimilarityScorer {
 public:
  double score(std::string_view a, std::string_view b) const override;
  std::string identity() const override { return "tf-cosine-uni-bi-v1"; }
};

/// Cosine between sentence vectors produced by an Embedder (e.g. a remote sentence encoder).
class EmbeddingScorer final : public SimilarityScorer {
 public:
  explicit EmbeddingScorer(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {}
  double score(std::string_view a, std::string_view b) const override;
  std::string identity() const override { return "embedding:" + embedder_->identity(); }

 private:
  std::shared_ptr<const Embedder> embedder_;
};

class PoolTooSmall : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Top-k by score, descending, ties to the lower id. Without a scorer the first k
/// pool entries are returned (the fixed-prompt setting).
std::vector<Exemplar> select_exemplars(std::string_view query, const std::vector<Exemplar>& pool, std::size_t k,
                                       const SimilarityScorer* scorer);

// ---------------------------------------------------------------------------
// Agents

/// One prompt/completion round trip, kept for the trace.
struct Exchange {
  std::string agent;
  ChatRequest request;
  std::string completion;
};

class EmptyDecomposition : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numbered or bulleted lines of a completion, markers stripped.
std::vector<std::string> parse_subtasks(std::string_view completion);

std::vector<std::string> hlp_decompose(std::string_view instruction, const std::vector<std::string>& feedback_objects,
                                       ChatBackend& backend, const PromptTemplate& prompt,
                                       const SkillRegistry& registry, std::vector<Exchange>* log = nullptr);

/// The noun phrase to look up, or nullopt when the instruction needs no feedback.
std::optional<std::string> parse_feedback_query(std::string_view completion);

std::optional<std::string> feedback_query(std::string_view instruction, ChatBackend& backend,
                                          const PromptTemplate& prompt, const SkillRegistry& registry,
                                          std::vector<Exchange>* log = nullptr);

enum class Verdict { Feasible, NotFeasible };

std::string_view to_string(Verdict v);

struct FeasibilityResult {
  Verdict verdict = Verdict::NotFeasible;
  bool parsed = false;  // false: the completion was unreadable and we failed safe
};

FeasibilityResult parse_verdict(std::string_view completion);

FeasibilityResult check_feasibility(std::string_view instruction, ChatBackend& backend, const PromptTemplate& prompt,
                                    const SkillRegistry& registry, std::vector<Exchange>* log = nullptr);

/// The environment vocabulary and embedder the LLP grounds against.
struct GroundingContext {
  const Embedder* embedder = nullptr;
  const Vocabulary* objects = nullptr;
  const Vocabulary* locations = nullptr;
  double threshold = kDefaultGroundingThreshold;
};

struct LlpResult {
  std::string subtask;
  std::string raw_text;
  bool parse_ok = false;
  std::string parse_error;
  std::vector<std::string> warnings;
  Plan parsed;
  Plan grounded;
  std::vector<GroundingDecision> decisions;
};

/// grounding == nullptr skips grounding (grounded == parsed).
LlpResult llp_plan(std::string_view subtask, ChatBackend& backend, const PromptTemplate& prompt,
                   const std::vector<Exemplar>& shots, const SkillRegistry& registry,
                   const GroundingContext* grounding, std::vector<Exchange>* log = nullptr);

// ---------------------------------------------------------------------------
// Pipeline

enum class PlannerMode { Help, LlpOnly };
enum class ExemplarSelection { Similarity, Fixed };

struct PipelineConfig {
  PlannerMode mode = PlannerMode::Help;
  ExemplarSelection selection = ExemplarSelection::Similarity;
  std::size_t llp_shots = 5;
  bool grounding = true;
  double grounding_threshold = kDefaultGroundingThreshold;
  bool feasibility_check = true;
  bool execute = true;
};

struct ExecutionSummary {
  bool success = false;
  std::size_t steps_executed = 0;
  std::optional<StepFailure> failure;
  std::optional<bool> goal_satisfied;
};

struct PipelineTrace {
  std::string task_id;
  std::string instruction;
  std::optional<Verdict> verdict;
  bool halted = false;
  std::optional<std::string> feedback_query;
  std::vector<std::string> feedback_objects;
  std::vector<std::string> subtasks;
  std::vector<LlpResult> llp;
  Plan final_plan;
  bool parse_ok = false;  // every subtask parsed and no stage failed
  std::optional<ExecutionSummary> execution;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::vector<Exchange> exchanges;
};

nlohmann::json to_json(const PipelineTrace& trace);
/// Reads back the fields evaluation needs (plan, verdict, flags); exchanges are not restored.
PipelineTrace trace_from_json(const nlohmann::json& j, const SkillRegistry& registry);

class HelpPipeline {
 public:
  HelpPipeline(PromptSet prompts, SkillRegistry registry, PipelineConfig config,
               std::shared_ptr<const SimilarityScorer> scorer = std::make_shared<TfCosineScorer>(),
               std::shared_ptr<const Embedder> embedder = std::make_shared<TrigramEmbedder>());

  /// feasibility -> feedback -> HLP -> LLP per subtask (+ grounding) -> concatenation -> execution.
  /// Stage errors are recorded in the trace; the partial trace is returned.
  PipelineTrace run(std::string_view instruction, const WorldState& world, ChatBackend& backend,
                    const TaskInstance* task = nullptr) const;

  /// Only the feasibility agent.
  PipelineTrace check_only(std::string_view instruction, ChatBackend& backend) const;

  const PipelineConfig& config() const { return config_; }
  const PromptSet& prompts() const { return prompts_; }
  std::string identity() const;

 private:
  PromptSet prompts_;
  SkillRegistry registry_;
  PipelineConfig config_;
  std::shared_ptr<const SimilarityScorer> scorer_;
  std::shared_ptr<const Embedder> embedder_;
};

}  // namespace help
