#include "help/world_sim.hpp"

#include <algorithm>
#include <memory>
#include <set>

#include "help/util.hpp"

namespace help {

namespace {

std::vector<std::string> word_forms(std::string_view word) {
  std::vector<std::string> forms{std::string(word)};
  if (word.size() > 3 && word.ends_with("es")) forms.emplace_back(word.substr(0, word.size() - 2));
  if (word.size() > 2 && word.ends_with('s')) forms.emplace_back(word.substr(0, word.size() - 1));
  return forms;
}

bool forms_meet(std::string_view a, std::string_view b) {
  for (const auto& x : word_forms(a))
    for (const auto& y : word_forms(b))
      if (x == y) return true;
  return false;
}

ActionFailure failure(FailureReason reason, std::string message) { return {reason, std::move(message)}; }

ObjectInstance* mutable_find(WorldState& s, std::string_view id) {
  for (auto& o : s.objects)
    if (o.id == id) return &o;
  return nullptr;
}

}  // namespace

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::HandFull: return "HandFull";
    case FailureReason::HandEmpty: return "HandEmpty";
    case FailureReason::ObjectNotHere: return "ObjectNotHere";
    case FailureReason::NoSuchObject: return "NoSuchObject";
    case FailureReason::NoSuchLocation: return "NoSuchLocation";
    case FailureReason::Injected: return "Injected";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// WorldState

bool WorldState::is_location(std::string_view name) const {
  return std::find(locations.begin(), locations.end(), name) != locations.end();
}

std::string WorldState::label(const ObjectInstance& obj) const {
  const auto same = std::count_if(objects.begin(), objects.end(), [&](const auto& o) { return o.name == obj.name; });
  return same > 1 ? obj.id : obj.name;
}

std::vector<const ObjectInstance*> WorldState::resolve(std::string_view ref) const {
  std::vector<const ObjectInstance*> out;
  for (const auto& o : objects)
    if (o.id == ref || o.name == ref || label(o) == ref) out.push_back(&o);
  return out;
}

const ObjectInstance* WorldState::find_id(std::string_view id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

std::vector<std::string> WorldState::object_labels() const {
  std::vector<std::string> out;
  for (const auto& o : objects) out.push_back(label(o));
  return out;
}

nlohmann::json WorldState::to_json() const {
  auto objs = nlohmann::json::array();
  for (const auto& o : objects)
    objs.push_back({{"id", o.id}, {"name", o.name}, {"base", o.base}, {"attributes", o.attributes},
                    {"location", o.location}});
  return {{"locations", locations},
          {"objects", objs},
          {"robot_at", robot_at},
          {"holding", holding ? nlohmann::json(*holding) : nlohmann::json()}};
}

std::string WorldState::hash() const { return json_hash(to_json()); }

// ---------------------------------------------------------------------------
// Construction

WorldState init_world(const TaskInstance& task, const VocabBank& bank) {
  WorldState state;
  state.locations = bank.locations;
  state.collectives = bank.collectives;
  Rng rng(task.world_seed);

  std::map<std::string, int> counter;
  auto add = [&](const VocabObject& v, std::string location) {
    ObjectInstance o{v.name + "_" + std::to_string(++counter[v.name]), v.name, v.base, v.attributes,
                     std::move(location)};
    state.objects.push_back(std::move(o));
  };

  std::set<std::string> excluded;
  for (const auto& t : task.objects) {
    const VocabObject* v = bank.find_object(t.name);
    if (v == nullptr) throw VocabMismatch("task " + task.id + " references unknown object '" + t.name + "'");
    for (const auto* loc : {&t.source, &t.destination}) {
      if (*loc != kUnspecified && *loc != kHeld && !bank.has_location(*loc))
        throw VocabMismatch("task " + task.id + " references unknown location '" + *loc + "'");
    }
    std::string where = t.source;
    if (where == kUnspecified) {
      std::vector<std::string> options;
      for (const auto& l : bank.locations)
        if (l != t.destination) options.push_back(l);
      where = rng.pick(options);
    }
    add(*v, where);
    excluded.insert(t.name);
  }
  if (auto it = task.metadata.find("collective"); it != task.metadata.end()) {
    if (auto c = bank.collectives.find(it->second); c != bank.collectives.end())
      excluded.insert(c->second.begin(), c->second.end());
  }

  std::vector<const VocabObject*> candidates;
  for (const auto& v : bank.objects)
    if (!excluded.contains(v.name)) candidates.push_back(&v);
  rng.shuffle(candidates);
  const auto n_distractors = std::min<std::size_t>(static_cast<std::size_t>(rng.range(2, 5)), candidates.size());
  std::vector<std::string> spots;
  for (const auto& l : bank.locations) {
    const bool is_goal = std::any_of(task.objects.begin(), task.objects.end(),
                                     [&](const TaskObject& t) { return t.destination == l; });
    if (!is_goal) spots.push_back(l);
  }
  if (spots.empty()) spots = bank.locations;
  for (std::size_t i = 0; i < n_distractors; ++i) add(*candidates[i], rng.pick(spots));
  return state;
}

// ---------------------------------------------------------------------------
// Execution

std::variant<WorldState, ActionFailure> execute_action(const WorldState& state, const Action& action) {
  const auto& skill = action.skill;
  if (skill == kDoneSkill) return state;
  if (action.args.size() != 2) throw std::invalid_argument("execute_action: unvalidated action " + render_action(action));
  const std::string& target = action.args[0];
  const std::string& where = action.args[1];
  const bool unspecified = where == kUnspecified;
  if (!unspecified && !state.is_location(where))
    return failure(FailureReason::NoSuchLocation, "no location named '" + where + "'");

  WorldState next = state;
  const auto candidates = state.resolve(target);

  if (skill == "move_to") {
    if (state.is_location(target) && (unspecified || target == where)) {
      next.robot_at = target;
      return next;
    }
    if (candidates.empty()) return failure(FailureReason::NoSuchObject, "no object named '" + target + "'");
    if (unspecified) {
      for (const auto* c : candidates) {
        if (!c->location.empty()) {
          next.robot_at = c->location;
          return next;
        }
      }
      return next;  // only held instances: already there
    }
    for (const auto* c : candidates) {
      if (c->location.empty() || c->location == where) {
        next.robot_at = where;
        return next;
      }
    }
    return failure(FailureReason::ObjectNotHere, "'" + target + "' is not at '" + where + "'");
  }

  if (skill == "pick_up") {
    if (state.holding) return failure(FailureReason::HandFull, "already holding '" + *state.holding + "'");
    const std::string here = unspecified ? state.robot_at : where;
    if (state.robot_at != here)
      return failure(FailureReason::ObjectNotHere, "robot is at '" + state.robot_at + "', not at '" + where + "'");
    if (candidates.empty()) return failure(FailureReason::NoSuchObject, "no object named '" + target + "'");
    for (const auto* c : candidates) {
      if (c->location == here) {
        next.holding = c->id;
        mutable_find(next, c->id)->location.clear();
        return next;
      }
    }
    return failure(FailureReason::ObjectNotHere, "'" + target + "' is not at '" + here + "'");
  }

  if (skill == "put") {
    if (!state.holding) return failure(FailureReason::HandEmpty, "not holding anything");
    const bool matches = std::any_of(candidates.begin(), candidates.end(),
                                     [&](const auto* c) { return c->id == *state.holding; });
    if (!matches) return failure(FailureReason::HandEmpty, "not holding '" + target + "'");
    const std::string dest = unspecified ? state.robot_at : where;
    if (!state.is_location(dest)) return failure(FailureReason::NoSuchLocation, "robot is not at a location");
    if (state.robot_at != dest)
      return failure(FailureReason::ObjectNotHere, "robot is at '" + state.robot_at + "', not at '" + dest + "'");
    mutable_find(next, *state.holding)->location = dest;
    next.holding.reset();
    return next;
  }

  throw std::invalid_argument("execute_action: skill has no semantics: " + skill);
}

std::function<bool(const Action&, std::size_t)> pick_drop_injector(double probability, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng, probability](const Action& a, std::size_t) { return a.skill == "pick_up" && rng->chance(probability); };
}

ExecResult execute_plan(const WorldState& state, const Plan& plan, const ExecOptions& options) {
  ExecResult result{{}, state, {}};
  for (std::size_t i = 0; i < plan.actions.size(); ++i) {
    const auto& action = plan.actions[i];
    const std::size_t step = i + 1;
    TraceStep trace{step, render_action(action), result.final_state.hash(), "ok"};
    if (options.fail_hook && options.fail_hook(action, step)) {
      trace.result = std::string(to_string(FailureReason::Injected));
      result.trace.push_back(std::move(trace));
      result.outcome.failure = StepFailure{step, FailureReason::Injected, "injected failure"};
      return result;
    }
    auto next = execute_action(result.final_state, action);
    if (auto* f = std::get_if<ActionFailure>(&next)) {
      trace.result = std::string(to_string(f->reason));
      result.trace.push_back(std::move(trace));
      result.outcome.failure = StepFailure{step, f->reason, f->message};
      return result;
    }
    result.final_state = std::move(std::get<WorldState>(next));
    result.trace.push_back(std::move(trace));
    result.outcome.steps_executed = step;
  }
  result.outcome.success = true;
  return result;
}

// ---------------------------------------------------------------------------
// Queries

std::vector<ObjectInfo> list_objects(const WorldState& state, const std::optional<std::string>& query) {
  std::optional<std::string> q;
  if (query) {
    q = normalize_arg(*query);
    if (q->empty()) q.reset();
  }
  std::vector<ObjectInfo> out;
  for (const auto& o : state.objects) {
    bool match = !q.has_value();
    if (!match) {
      match = *q == o.id || *q == state.label(o) || forms_meet(*q, o.name) || forms_meet(*q, o.base);
    }
    if (!match) {
      for (const auto& [noun, members] : state.collectives) {
        if (forms_meet(*q, noun) && std::find(members.begin(), members.end(), o.name) != members.end()) {
          match = true;
          break;
        }
      }
    }
    if (match) {
      out.push_back({o.id, state.label(o), o.name, o.base, o.attributes,
                     o.location.empty() ? std::string(kHeld) : o.location});
    }
  }
  return out;
}

bool goal_satisfied(const WorldState& state, const TaskInstance& task) {
  if (task.objects.empty()) return false;
  for (const auto& goal : task.objects) {
    const auto candidates = state.resolve(goal.ref);
    const bool ok = std::any_of(candidates.begin(), candidates.end(), [&](const ObjectInstance* c) {
      if (goal.destination == kHeld) return state.holding && *state.holding == c->id;
      return c->location == goal.destination;
    });
    if (!ok) return false;
  }
  return true;
}

nlohmann::json to_json(const TraceStep& step) {
  return {{"step", step.step}, {"action", step.action}, {"pre_state_hash", step.pre_state_hash},
          {"result", step.result}};
}

}  // namespace help
