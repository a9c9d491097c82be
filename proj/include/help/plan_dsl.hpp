#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace help {

/// Role of a skill parameter. Grounding uses it to pick the vocabulary.
enum class ParamRole { Object, Location };

std::string_view to_string(ParamRole role);
ParamRole param_role_from_string(std::string_view text);

/// The location placeholder that tells the executor to resolve a location itself.
inline constexpr std::string_view kUnspecified = "unspecified";
inline constexpr std::string_view kDoneSkill = "done";

struct SkillSchema {
  std::string name;
  std::vector<ParamRole> params;
  std::string description;
  std::vector<std::string> aliases;
  // A call missing only its trailing location argument is completed with
  // 'unspecified' (the one-argument `move_to('couch')` form).
  bool location_optional = false;

  std::size_t arity() const { return params.size(); }
};

class SkillRegistry {
 public:
  SkillRegistry() = default;
  explicit SkillRegistry(std::vector<SkillSchema> skills);

  static SkillRegistry from_json(const nlohmann::json& doc);
  static SkillRegistry load(const std::filesystem::path& path);

  /// move_to, pick_up, put and done.
  static SkillRegistry default_registry();
  /// The eight ALFRED skills plus done.
  static SkillRegistry alfred_registry();

  const SkillSchema* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const std::vector<SkillSchema>& skills() const { return skills_; }

  nlohmann::json to_json() const;

 private:
  std::vector<SkillSchema> skills_;
};

struct Action {
  std::string skill;
  std::vector<std::string> args;

  bool is_done() const { return skill == kDoneSkill; }
  friend bool operator==(const Action&, const Action&) = default;
};

struct Plan {
  std::vector<Action> actions;  // never contains done()
  bool terminated = false;

  /// |p|: number of counted steps; the done() terminator is not a step.
  std::size_t length() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
  friend bool operator==(const Plan&, const Plan&) = default;
};

enum class PlanErrorKind { EmptyInput, UnknownSkill, ArityMismatch, SyntaxError, InvalidPlan };

std::string_view to_string(PlanErrorKind kind);

/// Parse and render failure. Line and column are 1-based; 0 means "not applicable".
class PlanError : public std::runtime_error {
 public:
  PlanError(PlanErrorKind kind, std::string message, std::size_t line = 0, std::size_t column = 0);

  PlanErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  PlanErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

struct ParseResult {
  Plan plan;
  std::vector<std::string> warnings;
};

/// Parses numbered pseudocode such as
///   1. move_to('pillow', 'floor'), 2. pick_up('pillow', 'floor'), 3. done()
/// Numbering, quote style, spacing and `,`/newline separators are all optional.
/// Prose after the last action (or anything after done()) is dropped with a warning.
/// Throws PlanError.
ParseResult parse_plan_detailed(std::string_view text, const SkillRegistry& registry);
Plan parse_plan(std::string_view text, const SkillRegistry& registry);

struct Violation {
  enum class Kind { UnknownSkill, ArityMismatch, EmptyArgument, MisplacedDone };
  Kind kind;
  std::size_t index;  // 0-based action index
  std::string message;
};

std::vector<Violation> validate_plan(const Plan& plan, const SkillRegistry& registry);

/// Canonical `N. skill('a', 'b')` form, one action per line. Throws PlanError(InvalidPlan).
std::string render_plan(const Plan& plan, const SkillRegistry& registry);
/// Same text without validation against a registry.
std::string render_plan(const Plan& plan);
std::string render_action(const Action& action);

/// Lowercase, collapse (unicode) whitespace, trim, strip surrounding quotes. Idempotent.
std::string normalize_arg(std::string_view raw);

}  // namespace help
