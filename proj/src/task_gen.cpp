#include "help/task_gen.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "help/util.hpp"

namespace help {

namespace {

constexpr std::array<std::pair<TaskClass, std::string_view>, 7> kClassNames{{
    {TaskClass::Pick, "Pick"},
    {TaskClass::PickPlace, "PickPlace"},
    {TaskClass::PickPlace2, "PickPlace2"},
    {TaskClass::Composite, "Composite"},
    {TaskClass::Ambiguous, "Ambiguous"},
    {TaskClass::FeasibilityPositive, "FeasibilityPositive"},
    {TaskClass::FeasibilityNegative, "FeasibilityNegative"},
}};

bool has(std::string_view text, std::string_view placeholder) { return text.find(placeholder) != std::string_view::npos; }

std::string fill(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string ph = "{" + key + "}";
    for (std::size_t pos = text.find(ph); pos != std::string::npos; pos = text.find(ph, pos + value.size()))
      text.replace(pos, ph.size(), value);
  }
  return text;
}

std::string lower_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

std::string pad_index(std::size_t i, int width) {
  std::string s = std::to_string(i);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

Action act(std::string_view skill, const std::string& o, const std::string& l) {
  return Action{std::string(skill), {o, l}};
}

void append_pick(std::vector<Action>& out, const std::string& ref, const std::string& src) {
  out.push_back(act("move_to", ref, src));
  out.push_back(act("pick_up", ref, src));
}

void append_place(std::vector<Action>& out, const std::string& ref, const std::string& src,
                  const std::string& dst) {
  append_pick(out, ref, src);
  out.push_back(act("move_to", ref, dst));
  out.push_back(act("put", ref, dst));
}

std::string pick_subtask(const std::string& ref, const std::string& src) {
  if (src == kUnspecified) return "Pick up the " + ref;
  return "Pick up the " + ref + " from the " + src;
}

std::string place_subtask(const std::string& ref, const std::string& src, const std::string& dst) {
  return pick_subtask(ref, src) + " and put it on the " + dst;
}

// One pick or pick-and-place block of a task.
struct Unit {
  TaskObject object;
  std::map<std::string, std::string> slots;  // obj/src/dst for template filling
  std::string subtask;
  std::vector<Action> actions;
};

class Builder {
 public:
  Builder(const VocabBank& bank, Rng& rng) : bank_(bank), rng_(rng) {}

  std::string fresh_object() {
    std::vector<std::string> free;
    for (const auto& o : bank_.objects)
      if (!used_.contains(o.name)) free.push_back(o.name);
    if (free.empty()) throw BankInvalid("vocabulary bank ran out of distinct objects");
    std::string name = rng_.pick(free);
    used_.insert(name);
    return name;
  }

  std::string location() { return rng_.pick(bank_.locations); }

  std::string other_location(const std::string& avoid) {
    std::vector<std::string> rest;
    for (const auto& l : bank_.locations)
      if (l != avoid) rest.push_back(l);
    return rng_.pick(rest);
  }

  // with_src=false leaves the source unspecified.
  Unit unit(bool place, bool with_src) {
    Unit u;
    const std::string name = fresh_object();
    const std::string src = with_src ? location() : std::string(kUnspecified);
    u.object = TaskObject{name, name, src, std::string(kHeld)};
    u.slots = {{"obj", name}, {"src", src}};
    if (place) {
      const std::string dst = with_src ? other_location(src) : location();
      u.object.destination = dst;
      u.slots["dst"] = dst;
      u.subtask = place_subtask(name, src, dst);
      append_place(u.actions, name, src, dst);
    } else {
      u.subtask = pick_subtask(name, src);
      append_pick(u.actions, name, src);
    }
    return u;
  }

  const Template& any_template(TaskClass c) {
    auto list = bank_.templates_of(c);
    if (list.empty()) throw BankInvalid("no templates for class " + std::string(to_string(c)));
    return *list[rng_.index(list.size())];
  }

  Rng& rng() { return rng_; }

 private:
  const VocabBank& bank_;
  Rng& rng_;
  std::set<std::string> used_;
};

TaskInstance finish(std::string id, TaskClass cls, std::string instruction, std::vector<Unit> units,
                    std::uint64_t task_seed, const std::string& template_id, const std::string& suite) {
  TaskInstance t;
  t.id = std::move(id);
  t.task_class = cls;
  t.instruction = std::move(instruction);
  Plan plan;
  plan.terminated = true;
  for (auto& u : units) {
    t.objects.push_back(u.object);
    t.gt_subtasks.push_back(u.subtask);
    plan.actions.insert(plan.actions.end(), u.actions.begin(), u.actions.end());
  }
  t.world_seed = derive_seed(task_seed, "world");
  t.metadata["task_class"] = std::string(to_string(cls));
  t.metadata["length"] = std::to_string(plan.length());
  t.metadata["template"] = template_id;
  t.metadata["suite"] = suite;
  t.gt_plan = std::move(plan);
  return t;
}

TaskInstance make_core(const VocabBank& bank, TaskClass cls, std::uint64_t task_seed, std::string id,
                       const std::string& suite) {
  Rng rng(task_seed);
  Builder b(bank, rng);
  const Template& tpl = b.any_template(cls);
  std::vector<Unit> units;
  std::map<std::string, std::string> slots;
  if (cls == TaskClass::PickPlace2) {
    units.push_back(b.unit(true, has(tpl.text, "{src}")));
    units.push_back(b.unit(true, has(tpl.text, "{src2}")));
    slots = units[0].slots;
    for (const auto& [k, v] : units[1].slots) slots[k + "2"] = v;
  } else {
    units.push_back(b.unit(cls == TaskClass::PickPlace, has(tpl.text, "{src}")));
    slots = units[0].slots;
  }
  return finish(std::move(id), cls, fill(tpl.text, slots), std::move(units), task_seed, tpl.id, suite);
}

TaskInstance make_composite(const VocabBank& bank, int length, std::uint64_t task_seed, std::string id,
                            const std::string& suite) {
  static const std::vector<std::string> kConnectives{" and then ", ", then ", ", and then "};
  Rng rng(task_seed);
  Builder b(bank, rng);
  std::vector<Unit> units;
  std::vector<std::string> clauses, template_ids;
  const int place_units = length / 4;
  const bool trailing_pick = length % 4 == 2;
  for (int i = 0; i < place_units + (trailing_pick ? 1 : 0); ++i) {
    const bool place = i < place_units;
    const Template& tpl = b.any_template(place ? TaskClass::PickPlace : TaskClass::Pick);
    units.push_back(b.unit(place, has(tpl.text, "{src}")));
    clauses.push_back(fill(tpl.text, units.back().slots));
    template_ids.push_back(tpl.id);
  }
  std::string instruction = clauses.front();
  for (std::size_t i = 1; i < clauses.size(); ++i)
    instruction += rng.pick(kConnectives) + lower_first(clauses[i]);
  auto t = finish(std::move(id), TaskClass::Composite, std::move(instruction), std::move(units), task_seed,
                  join(template_ids, "+"), suite);
  t.metadata["target_length"] = std::to_string(length);
  t.metadata["pick_unit"] = trailing_pick ? "last" : "none";
  return t;
}

TaskInstance make_ambiguous(const VocabBank& bank, std::uint64_t task_seed, std::string id,
                            const std::string& suite) {
  Rng rng(task_seed);
  Builder b(bank, rng);
  const Template& tpl = b.any_template(TaskClass::Ambiguous);

  std::vector<std::string> names;
  for (const auto& [k, _] : bank.collectives) names.push_back(k);
  const std::string collective = rng.pick(names);
  std::vector<std::string> members = bank.collectives.at(collective);
  rng.shuffle(members);
  const int m = rng.range(1, static_cast<int>(std::min<std::size_t>(3, members.size())));
  members.resize(static_cast<std::size_t>(m));
  if (rng.chance(0.3)) members.insert(members.begin() + 1, members.front());

  const bool with_src = has(tpl.text, "{src}");
  const std::string src = with_src ? b.location() : std::string(kUnspecified);
  const std::string dst = with_src ? b.other_location(src) : b.location();

  std::map<std::string, int> totals, seen;
  for (const auto& n : members) ++totals[n];
  std::vector<Unit> units;
  std::vector<std::string> refs;
  for (const auto& n : members) {
    const std::string ref = totals[n] > 1 ? n + "_" + std::to_string(++seen[n]) : n;
    Unit u;
    u.object = TaskObject{n, ref, src, dst};
    u.subtask = place_subtask(ref, src, dst);
    append_place(u.actions, ref, src, dst);
    units.push_back(std::move(u));
    refs.push_back(ref);
  }
  const std::string instruction = fill(tpl.text, {{"collective", collective}, {"src", src}, {"dst", dst}});
  auto t = finish(std::move(id), TaskClass::Ambiguous, instruction, std::move(units), task_seed, tpl.id, suite);
  t.metadata["collective"] = collective;
  t.metadata["members"] = join(refs, ",");
  return t;
}

void check_length(int length) {
  if (length < 2 || length > 16 || length % 2 != 0)
    throw UnreachableLength("plan length " + std::to_string(length) +
                            " cannot be built from 4-step and 2-step units within [2, 16]");
}

}  // namespace

std::string_view to_string(TaskClass c) {
  for (const auto& [k, name] : kClassNames)
    if (k == c) return name;
  return "?";
}

TaskClass task_class_from_string(std::string_view s) {
  for (const auto& [k, name] : kClassNames)
    if (name == s) return k;
  throw std::invalid_argument("unknown task class: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const TaskInstance& t) {
  static const SkillRegistry registry = SkillRegistry::default_registry();
  auto objects = nlohmann::json::array();
  for (const auto& o : t.objects)
    objects.push_back({{"name", o.name}, {"ref", o.ref}, {"source", o.source}, {"destination", o.destination}});
  nlohmann::json j{{"id", t.id},
                   {"instruction", t.instruction},
                   {"task_class", to_string(t.task_class)},
                   {"gt_plan", t.gt_plan ? nlohmann::json(render_plan(*t.gt_plan, registry)) : nlohmann::json()},
                   {"gt_subtasks", t.gt_subtasks},
                   {"world_seed", t.world_seed},
                   {"objects", objects},
                   {"metadata", t.metadata}};
  return j;
}

TaskInstance task_from_json(const nlohmann::json& j) {
  static const SkillRegistry registry = SkillRegistry::default_registry();
  TaskInstance t;
  t.id = j.at("id").get<std::string>();
  t.instruction = j.at("instruction").get<std::string>();
  t.task_class = task_class_from_string(j.at("task_class").get<std::string>());
  if (const auto& gt = j.at("gt_plan"); !gt.is_null()) t.gt_plan = parse_plan(gt.get<std::string>(), registry);
  t.gt_subtasks = j.value("gt_subtasks", std::vector<std::string>{});
  t.world_seed = j.at("world_seed").get<std::uint64_t>();
  for (const auto& o : j.value("objects", nlohmann::json::array()))
    t.objects.push_back({o.at("name"), o.at("ref"), o.at("source"), o.at("destination")});
  t.metadata = j.value("metadata", std::map<std::string, std::string>{});
  return t;
}

// ---------------------------------------------------------------------------
// VocabBank

VocabBank VocabBank::from_json(const nlohmann::json& j) {
  VocabBank bank;
  for (const auto& t : j.at("templates"))
    bank.templates.push_back({t.at("id"), task_class_from_string(t.at("class").get<std::string>()), t.at("text")});
  for (const auto& o : j.at("objects")) {
    if (o.is_string()) {
      bank.objects.push_back({o.get<std::string>(), o.get<std::string>(), {}});
    } else {
      VocabObject v{o.at("name"), o.value("base", o.at("name").get<std::string>()),
                    o.value("attributes", std::vector<std::string>{})};
      bank.objects.push_back(std::move(v));
    }
  }
  bank.locations = j.at("locations").get<std::vector<std::string>>();
  bank.collectives = j.value("collectives", std::map<std::string, std::vector<std::string>>{});
  bank.infeasible_commands = j.value("infeasible_commands", std::vector<std::string>{});
  return bank;
}

VocabBank VocabBank::load(const std::filesystem::path& path) {
  return from_json(nlohmann::json::parse(read_file(path)));
}

VocabBank VocabBank::load_default() { return load(data_dir() / "vocab_bank.json"); }

nlohmann::json VocabBank::to_json() const {
  auto tpls = nlohmann::json::array();
  for (const auto& t : templates) tpls.push_back({{"id", t.id}, {"class", to_string(t.task_class)}, {"text", t.text}});
  auto objs = nlohmann::json::array();
  for (const auto& o : objects) {
    if (o.base == o.name && o.attributes.empty()) {
      objs.push_back(o.name);
    } else {
      objs.push_back({{"name", o.name}, {"base", o.base}, {"attributes", o.attributes}});
    }
  }
  return {{"templates", tpls},
          {"objects", objs},
          {"locations", locations},
          {"collectives", collectives},
          {"infeasible_commands", infeasible_commands}};
}

std::string VocabBank::hash() const { return json_hash(to_json()); }

const VocabObject* VocabBank::find_object(std::string_view name) const {
  for (const auto& o : objects)
    if (o.name == name) return &o;
  return nullptr;
}

bool VocabBank::has_location(std::string_view name) const {
  return std::find(locations.begin(), locations.end(), name) != locations.end();
}

std::vector<const Template*> VocabBank::templates_of(TaskClass c) const {
  std::vector<const Template*> out;
  for (const auto& t : templates)
    if (t.task_class == c) out.push_back(&t);
  return out;
}

void check_bank(const VocabBank& bank) {
  auto fail = [](const std::string& msg) { throw BankInvalid(msg); };
  if (bank.templates.size() != VocabBank::kTemplates)
    fail("expected " + std::to_string(VocabBank::kTemplates) + " templates, got " + std::to_string(bank.templates.size()));
  if (bank.objects.size() != VocabBank::kObjects)
    fail("expected " + std::to_string(VocabBank::kObjects) + " objects, got " + std::to_string(bank.objects.size()));
  if (bank.locations.size() != VocabBank::kLocations)
    fail("expected " + std::to_string(VocabBank::kLocations) + " locations, got " + std::to_string(bank.locations.size()));

  std::set<std::string> names;
  for (const auto& o : bank.objects) {
    if (o.name != normalize_arg(o.name) || o.name.empty()) fail("object name not normalized: '" + o.name + "'");
    if (!names.insert(o.name).second) fail("duplicate object: " + o.name);
    if (bank.has_location(o.name)) fail("name is both object and location: " + o.name);
  }
  if (std::set<std::string>(bank.locations.begin(), bank.locations.end()).size() != bank.locations.size())
    fail("duplicate location");
  for (const auto& l : bank.locations)
    if (l != normalize_arg(l) || l == kUnspecified || l == kHeld) fail("bad location name: '" + l + "'");
  for (const auto& [noun, members] : bank.collectives) {
    if (members.empty()) fail("collective '" + noun + "' has no members");
    for (const auto& m : members)
      if (!names.contains(m)) fail("collective '" + noun + "' member not in objects: " + m);
  }

  static const std::set<std::string> kKnown{"obj", "src", "dst", "obj2", "src2", "dst2", "collective"};
  std::set<std::string> ids;
  for (const auto& t : bank.templates) {
    if (!ids.insert(t.id).second) fail("duplicate template id: " + t.id);
    for (std::size_t pos = t.text.find('{'); pos != std::string::npos; pos = t.text.find('{', pos + 1)) {
      const std::size_t close = t.text.find('}', pos);
      if (close == std::string::npos) fail("unterminated placeholder in " + t.id);
      if (!kKnown.contains(t.text.substr(pos + 1, close - pos - 1))) fail("unknown placeholder in " + t.id);
    }
    const bool ok = [&] {
      switch (t.task_class) {
        case TaskClass::Pick: return has(t.text, "{obj}") && !has(t.text, "{dst}") && !has(t.text, "{obj2}");
        case TaskClass::PickPlace: return has(t.text, "{obj}") && has(t.text, "{dst}") && !has(t.text, "{obj2}");
        case TaskClass::PickPlace2:
          return has(t.text, "{obj}") && has(t.text, "{dst}") && has(t.text, "{obj2}") && has(t.text, "{dst2}");
        case TaskClass::Ambiguous: return has(t.text, "{collective}") && has(t.text, "{dst}");
        default: return false;
      }
    }();
    if (!ok) fail("template " + t.id + " does not fit class " + std::string(to_string(t.task_class)));
  }
  if (bank.collectives.empty()) fail("no collectives");
}

// ---------------------------------------------------------------------------
// Generators

std::vector<TaskInstance> generate_core(const VocabBank& bank, std::size_t n_per_class, std::uint64_t seed) {
  check_bank(bank);
  if (n_per_class == 0) throw std::invalid_argument("n_per_class must be >= 1");
  static constexpr std::array<std::pair<TaskClass, std::string_view>, 3> kCore{{
      {TaskClass::Pick, "pick"}, {TaskClass::PickPlace, "pp"}, {TaskClass::PickPlace2, "pp2"}}};
  std::vector<TaskInstance> out;
  for (const auto& [cls, tag] : kCore) {
    const std::uint64_t class_seed = derive_seed(seed, tag);
    for (std::size_t i = 0; i < n_per_class; ++i)
      out.push_back(make_core(bank, cls, derive_seed(class_seed, "task", i),
                              "core-" + std::string(tag) + "-" + pad_index(i, 4), "core"));
  }
  return out;
}

std::vector<TaskInstance> compose_long_horizon(const VocabBank& bank, const std::vector<int>& lengths,
                                               std::size_t n_per_length, std::uint64_t seed) {
  check_bank(bank);
  for (int length : lengths) check_length(length);
  std::vector<TaskInstance> out;
  for (int length : lengths) {
    const std::uint64_t length_seed = derive_seed(seed, "length", static_cast<std::uint64_t>(length));
    for (std::size_t i = 0; i < n_per_length; ++i)
      out.push_back(make_composite(bank, length, derive_seed(length_seed, "task", i),
                                   "len" + pad_index(static_cast<std::size_t>(length), 2) + "-" + pad_index(i, 4),
                                   "lengths"));
  }
  return out;
}

std::vector<TaskInstance> generate_ambiguous(const VocabBank& bank, std::size_t n, std::uint64_t seed) {
  check_bank(bank);
  std::vector<TaskInstance> out;
  const std::uint64_t base = derive_seed(seed, "ambiguous");
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(make_ambiguous(bank, derive_seed(base, "task", i), "amb-" + pad_index(i, 4), "ambiguous"));
  return out;
}

std::vector<TaskInstance> generate_feasibility_set(const VocabBank& bank, std::uint64_t seed) {
  check_bank(bank);
  constexpr std::size_t kHalf = 100;
  if (bank.infeasible_commands.size() < kHalf)
    throw BankInvalid("need at least 100 infeasible commands, have " + std::to_string(bank.infeasible_commands.size()));

  auto pool = generate_core(bank, 25, derive_seed(seed, "feasibility-core"));
  auto lengths = compose_long_horizon(bank, {2, 4, 6, 8, 10, 12, 14, 16}, 10, derive_seed(seed, "feasibility-lengths"));
  pool.insert(pool.end(), lengths.begin(), lengths.end());
  Rng rng(derive_seed(seed, "feasibility"));
  rng.shuffle(pool);
  pool.resize(kHalf);

  std::vector<TaskInstance> out;
  for (auto& t : pool) {
    t.metadata["source_class"] = std::string(to_string(t.task_class));
    t.metadata["source_id"] = t.id;
    t.task_class = TaskClass::FeasibilityPositive;
    t.metadata["task_class"] = std::string(to_string(t.task_class));
    t.metadata["expected_verdict"] = "Feasible";
    t.metadata["suite"] = "feasibility";
    out.push_back(std::move(t));
  }
  std::vector<std::string> negatives = bank.infeasible_commands;
  rng.shuffle(negatives);
  negatives.resize(kHalf);
  for (std::size_t i = 0; i < kHalf; ++i) {
    TaskInstance t;
    t.instruction = negatives[i];
    t.task_class = TaskClass::FeasibilityNegative;
    t.world_seed = derive_seed(seed, "feasibility-negative", i);
    t.metadata = {{"task_class", "FeasibilityNegative"}, {"expected_verdict", "NotFeasible"}, {"suite", "feasibility"}};
    out.push_back(std::move(t));
  }
  rng.shuffle(out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = "feas-" + pad_index(i, 3);
  return out;
}

std::vector<TaskInstance> generate_smoke(const VocabBank& bank, std::uint64_t seed) {
  check_bank(bank);
  std::vector<TaskInstance> out;
  auto id = [&] { return "smoke-" + pad_index(out.size(), 2); };
  auto sub = [&](std::string_view tag) { return derive_seed(seed, "smoke", fnv1a64(tag) + out.size()); };
  for (int i = 0; i < 5; ++i) out.push_back(make_core(bank, TaskClass::Pick, sub("pick"), id(), "smoke"));
  for (int i = 0; i < 5; ++i) out.push_back(make_core(bank, TaskClass::PickPlace, sub("pp"), id(), "smoke"));
  for (int i = 0; i < 4; ++i) out.push_back(make_core(bank, TaskClass::PickPlace2, sub("pp2"), id(), "smoke"));
  for (int length : {6, 10, 12}) out.push_back(make_composite(bank, length, sub("composite"), id(), "smoke"));
  for (int i = 0; i < 3; ++i) out.push_back(make_ambiguous(bank, sub("ambiguous"), id(), "smoke"));
  return out;
}

}  // namespace help
