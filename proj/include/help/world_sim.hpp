#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "help/plan_dsl.hpp"
#include "help/task_gen.hpp"

namespace help {

inline constexpr std::string_view kStart = "start";

struct ObjectInstance {
  std::string id;  // name_k, unique
  std::string name;
  std::string base;
  std::vector<std::string> attributes;
  std::string location;  // empty while held

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

/// Everything the simulator knows. Objects keep insertion order; that order is
/// the deterministic enumeration used to resolve 'unspecified'.
struct WorldState {
  std::vector<std::string> locations;
  std::vector<ObjectInstance> objects;
  std::map<std::string, std::vector<std::string>> collectives;
  std::string robot_at{kStart};
  std::optional<std::string> holding;  // object id

  bool is_location(std::string_view name) const;
  /// The name when it is unique in the world, otherwise the indexed id.
  std::string label(const ObjectInstance& obj) const;
  /// Instances a plan argument can refer to (by id, label or full name), in enumeration order.
  std::vector<const ObjectInstance*> resolve(std::string_view ref) const;
  const ObjectInstance* find_id(std::string_view id) const;
  std::vector<std::string> object_labels() const;

  nlohmann::json to_json() const;
  std::string hash() const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

class VocabMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds the task's world: task objects at their stated (or seeded) sources
/// followed by a few seeded distractors. Throws VocabMismatch.
WorldState init_world(const TaskInstance& task, const VocabBank& bank);

enum class FailureReason { HandFull, HandEmpty, ObjectNotHere, NoSuchObject, NoSuchLocation, Injected };

std::string_view to_string(FailureReason reason);

struct ActionFailure {
  FailureReason reason;
  std::string message;
};

std::variant<WorldState, ActionFailure> execute_action(const WorldState& state, const Action& action);

struct StepFailure {
  std::size_t step;  // 1-based
  FailureReason reason;
  std::string message;
};

struct ExecOutcome {
  bool success = false;
  std::size_t steps_executed = 0;
  std::optional<StepFailure> failure;
};

struct TraceStep {
  std::size_t step;
  std::string action;
  std::string pre_state_hash;
  std::string result;  // "ok" or the failure reason
};

struct ExecResult {
  ExecOutcome outcome;
  WorldState final_state;
  std::vector<TraceStep> trace;
};

struct ExecOptions {
  /// Returns true to make the step fail (simulated grasp loss etc.). Unset by default.
  std::function<bool(const Action&, std::size_t step)> fail_hook;
};

/// Each pick_up fails with the given probability; deterministic per seed.
std::function<bool(const Action&, std::size_t)> pick_drop_injector(double probability, std::uint64_t seed);

/// Runs actions in order and stops at the first failure; there is no recovery.
ExecResult execute_plan(const WorldState& state, const Plan& plan, const ExecOptions& options = {});

struct ObjectInfo {
  std::string id;
  std::string label;
  std::string name;
  std::string base;
  std::vector<std::string> attributes;
  std::string location;  // "held" while in the gripper
};

/// Full inventory, or the instances whose name, base type, id or collective matches the query.
std::vector<ObjectInfo> list_objects(const WorldState& state, const std::optional<std::string>& query = std::nullopt);

bool goal_satisfied(const WorldState& state, const TaskInstance& task);

nlohmann::json to_json(const TraceStep& step);

}  // namespace help
