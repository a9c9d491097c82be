#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "help/plan_dsl.hpp"

namespace help {

enum class TaskClass { Pick, PickPlace, PickPlace2, Composite, Ambiguous, FeasibilityPositive, FeasibilityNegative };

std::string_view to_string(TaskClass c);
TaskClass task_class_from_string(std::string_view s);

/// Destination value meaning "the robot ends up holding the object".
inline constexpr std::string_view kHeld = "held";

/// An object the task is about.
struct TaskObject {
  std::string name;         // vocabulary name, e.g. "green apple"
  std::string ref;          // how plans refer to it: the name, or name_k for duplicates
  std::string source;       // a location or "unspecified"
  std::string destination;  // a location or "held"

  friend bool operator==(const TaskObject&, const TaskObject&) = default;
};

struct TaskInstance {
  std::string id;
  std::string instruction;
  TaskClass task_class = TaskClass::Pick;
  std::optional<Plan> gt_plan;  // absent for FeasibilityNegative
  std::vector<std::string> gt_subtasks;
  std::uint64_t world_seed = 0;
  std::vector<TaskObject> objects;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

nlohmann::json to_json(const TaskInstance& task);
TaskInstance task_from_json(const nlohmann::json& j);

struct Template {
  std::string id;
  TaskClass task_class;
  std::string text;  // placeholders: {obj} {src} {dst} {obj2} {src2} {dst2} {collective}
};

struct VocabObject {
  std::string name;
  std::string base;  // base type; defaults to the name
  std::vector<std::string> attributes;
};

struct VocabBank {
  static constexpr std::size_t kTemplates = 30;
  static constexpr std::size_t kObjects = 38;
  static constexpr std::size_t kLocations = 8;

  std::vector<Template> templates;
  std::vector<VocabObject> objects;
  std::vector<std::string> locations;
  std::map<std::string, std::vector<std::string>> collectives;
  std::vector<std::string> infeasible_commands;

  static VocabBank from_json(const nlohmann::json& j);
  static VocabBank load(const std::filesystem::path& path);
  /// The shipped bank under data_dir().
  static VocabBank load_default();
  nlohmann::json to_json() const;
  std::string hash() const;

  const VocabObject* find_object(std::string_view name) const;
  bool has_location(std::string_view name) const;
  std::vector<const Template*> templates_of(TaskClass c) const;
};

class BankInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnreachableLength : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws BankInvalid when counts or templates are inconsistent.
void check_bank(const VocabBank& bank);

/// Pick, PickPlace and PickPlace2 tasks, n of each.
std::vector<TaskInstance> generate_core(const VocabBank& bank, std::size_t n_per_class, std::uint64_t seed);

/// Chains of 4-step PickPlace units plus at most one trailing 2-step Pick unit.
std::vector<TaskInstance> compose_long_horizon(const VocabBank& bank, const std::vector<int>& lengths,
                                               std::size_t n_per_length, std::uint64_t seed);

/// Instructions that use a collective noun ("all the clothes").
std::vector<TaskInstance> generate_ambiguous(const VocabBank& bank, std::size_t n, std::uint64_t seed);

/// 100 feasible tasks sampled from core and long-horizon generation plus 100 infeasible commands.
std::vector<TaskInstance> generate_feasibility_set(const VocabBank& bank, std::uint64_t seed);

/// The 20-task offline smoke suite: 5 Pick, 5 PickPlace, 4 PickPlace2, 3 Composite, 3 Ambiguous.
std::vector<TaskInstance> generate_smoke(const VocabBank& bank, std::uint64_t seed);

}  // namespace help
