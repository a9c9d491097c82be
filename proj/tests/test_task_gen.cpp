#include <gtest/gtest.h>

#include <set>

#include "help/task_gen.hpp"
#include "help/util.hpp"

using namespace help;

namespace {

const VocabBank& bank() {
  static const VocabBank b = VocabBank::load_default();
  return b;
}

std::string dump_all(const std::vector<TaskInstance>& tasks) {
  std::vector<nlohmann::json> rows;
  for (const auto& t : tasks) rows.push_back(to_json(t));
  return to_jsonl(rows);
}

}  // namespace

TEST(Bank, ShippedCounts) {
  EXPECT_EQ(bank().templates.size(), 30u);
  EXPECT_EQ(bank().objects.size(), 38u);
  EXPECT_EQ(bank().locations.size(), 8u);
  EXPECT_EQ(bank().infeasible_commands.size(), 100u);
  EXPECT_NO_THROW(check_bank(bank()));
  for (const char* name : {"pillow", "bowl", "spoon", "shirt", "jeans", "green apple", "toy cube"})
    EXPECT_NE(bank().find_object(name), nullptr) << name;
  for (const char* loc : {"couch", "table", "closet", "drawer", "floor", "white box"})
    EXPECT_TRUE(bank().has_location(loc)) << loc;
  EXPECT_TRUE(bank().collectives.contains("clothes"));
}

TEST(Bank, CountViolationsRejected) {
  VocabBank b = bank();
  b.objects.pop_back();
  EXPECT_THROW(check_bank(b), BankInvalid);
  EXPECT_THROW(generate_core(b, 1, 1), BankInvalid);
  VocabBank c = bank();
  c.templates[0].text = "Pick up the {nothing}";
  EXPECT_THROW(check_bank(c), BankInvalid);
}

TEST(Bank, JsonRoundTripKeepsHash) {
  const auto again = VocabBank::from_json(bank().to_json());
  EXPECT_EQ(again.hash(), bank().hash());
}

TEST(Core, CountsAndDeterminism) {
  const auto a = generate_core(bank(), 200, 42);
  ASSERT_EQ(a.size(), 600u);
  std::map<TaskClass, int> per;
  for (const auto& t : a) ++per[t.task_class];
  EXPECT_EQ(per[TaskClass::Pick], 200);
  EXPECT_EQ(per[TaskClass::PickPlace], 200);
  EXPECT_EQ(per[TaskClass::PickPlace2], 200);
  EXPECT_EQ(dump_all(a), dump_all(generate_core(bank(), 200, 42)));
  EXPECT_NE(dump_all(a), dump_all(generate_core(bank(), 200, 43)));
}

TEST(Core, GroundTruthShapes) {
  const auto registry = SkillRegistry::default_registry();
  for (const auto& t : generate_core(bank(), 100, 5)) {
    ASSERT_TRUE(t.gt_plan.has_value());
    EXPECT_TRUE(validate_plan(*t.gt_plan, registry).empty());
    const auto& acts = t.gt_plan->actions;
    const std::size_t expected = t.task_class == TaskClass::Pick ? 2 : t.task_class == TaskClass::PickPlace ? 4 : 8;
    ASSERT_EQ(acts.size(), expected) << t.id;
    EXPECT_EQ(acts[0].skill, "move_to");
    EXPECT_EQ(acts[1].skill, "pick_up");
    EXPECT_EQ(acts[0].args, acts[1].args);
    EXPECT_EQ(acts[0].args[1], t.objects[0].source);
    if (expected >= 4) {
      EXPECT_EQ(acts[3].skill, "put");
      EXPECT_EQ(acts[3].args[1], t.objects[0].destination);
    }
    if (t.task_class == TaskClass::PickPlace2) EXPECT_NE(t.objects[0].name, t.objects[1].name);
  }
}

TEST(Core, MissingSourceUsesUnspecified) {
  bool saw = false;
  for (const auto& t : generate_core(bank(), 100, 9)) {
    if (t.task_class != TaskClass::Pick || t.objects[0].source != kUnspecified) continue;
    saw = true;
    EXPECT_EQ(t.gt_plan->actions[0].args[1], "unspecified");
    EXPECT_EQ(t.instruction.find("{src}"), std::string::npos);
  }
  EXPECT_TRUE(saw);
}

TEST(Core, NoUnfilledPlaceholders) {
  for (const auto& t : generate_core(bank(), 100, 3)) EXPECT_EQ(t.instruction.find('{'), std::string::npos) << t.instruction;
}

TEST(LongHorizon, ExactLengths) {
  const std::vector<int> lengths{2, 4, 6, 8, 10, 12, 14, 16};
  const auto tasks = compose_long_horizon(bank(), lengths, 200, 42);
  ASSERT_EQ(tasks.size(), 1600u);
  std::map<std::size_t, int> bins;
  for (const auto& t : tasks) {
    ++bins[t.gt_plan->length()];
    EXPECT_EQ(std::to_string(t.gt_plan->length()), t.metadata.at("target_length"));
    std::set<std::string> names;
    for (const auto& o : t.objects) names.insert(o.name);
    EXPECT_EQ(names.size(), t.objects.size()) << "objects repeat in " << t.id;
  }
  for (int l : lengths) EXPECT_EQ(bins[static_cast<std::size_t>(l)], 200) << l;
}

TEST(LongHorizon, TrailingPickOnlyWhenNeeded) {
  for (const auto& t : compose_long_horizon(bank(), {6, 8, 10, 14}, 30, 1)) {
    const auto& acts = t.gt_plan->actions;
    const bool holds = t.gt_plan->length() % 4 == 2;
    EXPECT_EQ(acts.back().skill, holds ? "pick_up" : "put") << t.id;
    EXPECT_EQ(t.metadata.at("pick_unit"), holds ? "last" : "none");
    for (std::size_t i = 0; i + 1 < t.objects.size(); ++i) EXPECT_NE(t.objects[i].destination, std::string(kHeld));
  }
}

TEST(LongHorizon, Connectives) {
  for (const auto& t : compose_long_horizon(bank(), {8, 12}, 20, 4)) {
    const bool joined = t.instruction.find("and then") != std::string::npos ||
                        t.instruction.find(", then") != std::string::npos;
    EXPECT_TRUE(joined) << t.instruction;
    EXPECT_EQ(t.gt_subtasks.size(), t.objects.size());
  }
}

TEST(LongHorizon, UnreachableLengths) {
  EXPECT_THROW(compose_long_horizon(bank(), {3}, 1, 1), UnreachableLength);
  EXPECT_THROW(compose_long_horizon(bank(), {0}, 1, 1), UnreachableLength);
  EXPECT_THROW(compose_long_horizon(bank(), {18}, 1, 1), UnreachableLength);
}

TEST(Ambiguous, CollectivesAndDuplicates) {
  const auto tasks = generate_ambiguous(bank(), 300, 42);
  bool saw_duplicate = false, saw_single = false;
  for (const auto& t : tasks) {
    const auto& noun = t.metadata.at("collective");
    EXPECT_NE(t.instruction.find(noun), std::string::npos) << t.instruction;
    const auto& members = bank().collectives.at(noun);
    std::vector<std::string> refs;
    for (const auto& o : t.objects) {
      EXPECT_NE(std::find(members.begin(), members.end(), o.name), members.end());
      refs.push_back(o.ref);
      if (o.ref != o.name) {
        saw_duplicate = true;
        EXPECT_TRUE(o.ref == o.name + "_1" || o.ref == o.name + "_2") << o.ref;
      }
    }
    EXPECT_EQ(t.metadata.at("members"), join(refs, ","));
    EXPECT_EQ(t.gt_plan->length(), 4 * t.objects.size());
    if (t.objects.size() == 1) saw_single = true;
  }
  EXPECT_TRUE(saw_duplicate);
  EXPECT_TRUE(saw_single);
}

TEST(Feasibility, SplitAndVerbatimNegatives) {
  const auto tasks = generate_feasibility_set(bank(), 7);
  ASSERT_EQ(tasks.size(), 200u);
  int pos = 0, neg = 0;
  std::set<std::string> negatives;
  for (const auto& t : tasks) {
    if (t.task_class == TaskClass::FeasibilityPositive) {
      ++pos;
      EXPECT_TRUE(t.gt_plan.has_value());
    } else {
      ++neg;
      EXPECT_FALSE(t.gt_plan.has_value());
      negatives.insert(t.instruction);
    }
  }
  EXPECT_EQ(pos, 100);
  EXPECT_EQ(neg, 100);
  EXPECT_TRUE(negatives.contains("write a Python script"));
  EXPECT_TRUE(negatives.contains("water the plants"));
  EXPECT_EQ(dump_all(tasks), dump_all(generate_feasibility_set(bank(), 7)));
}

TEST(Smoke, Composition) {
  const auto tasks = generate_smoke(bank(), 42);
  ASSERT_EQ(tasks.size(), 20u);
  std::map<TaskClass, int> per;
  for (const auto& t : tasks) ++per[t.task_class];
  EXPECT_EQ(per[TaskClass::Pick], 5);
  EXPECT_EQ(per[TaskClass::PickPlace], 5);
  EXPECT_EQ(per[TaskClass::PickPlace2], 4);
  EXPECT_EQ(per[TaskClass::Composite], 3);
  EXPECT_EQ(per[TaskClass::Ambiguous], 3);
}

TEST(TaskJson, RoundTrip) {
  auto all = generate_core(bank(), 10, 1);
  const auto amb = generate_ambiguous(bank(), 10, 1);
  all.insert(all.end(), amb.begin(), amb.end());
  const auto feas = generate_feasibility_set(bank(), 1);
  all.insert(all.end(), feas.begin(), feas.end());
  for (const auto& t : all) EXPECT_EQ(task_from_json(to_json(t)), t) << t.id;
}
