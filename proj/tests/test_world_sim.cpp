#include <gtest/gtest.h>

#include "help/task_gen.hpp"
#include "help/world_sim.hpp"
#include "oracles.hpp"

using namespace help;

namespace {

const VocabBank& bank() {
  static const VocabBank b = VocabBank::load_default();
  return b;
}

const SkillRegistry& reg() {
  static const SkillRegistry r = SkillRegistry::default_registry();
  return r;
}

TaskInstance pillow_task() {
  TaskInstance t;
  t.id = "pillow";
  t.instruction = "Pick up a pillow from the floor and put it on the couch";
  t.task_class = TaskClass::PickPlace;
  t.gt_plan = parse_plan(
      "1. move_to('pillow', 'floor')\n2. pick_up('pillow', 'floor')\n3. move_to('pillow', 'couch')\n"
      "4. put('pillow', 'couch')\n5. done()",
      reg());
  t.world_seed = 99;
  t.objects = {{"pillow", "pillow", "floor", "couch"}};
  return t;
}

TaskInstance clothes_task() {
  TaskInstance t;
  t.id = "clothes";
  t.instruction = "Put all the clothes from the floor into the drawer";
  t.task_class = TaskClass::Ambiguous;
  t.world_seed = 5;
  t.objects = {{"shirt", "shirt", "floor", "drawer"}, {"jeans", "jeans", "floor", "drawer"}};
  t.metadata["collective"] = "clothes";
  Plan p;
  for (const auto& o : t.objects) {
    p.actions.push_back({"move_to", {o.ref, "floor"}});
    p.actions.push_back({"pick_up", {o.ref, "floor"}});
    p.actions.push_back({"move_to", {o.ref, "drawer"}});
    p.actions.push_back({"put", {o.ref, "drawer"}});
  }
  p.terminated = true;
  t.gt_plan = p;
  return t;
}

const ObjectInstance* first_named(const WorldState& s, const std::string& name) {
  for (const auto& o : s.objects)
    if (o.name == name) return &o;
  return nullptr;
}

WorldState tiny_world() {
  WorldState s;
  s.locations = {"floor", "couch", "table"};
  s.objects = {{"pillow_1", "pillow", "pillow", {}, "floor"},
               {"toy cube_1", "toy cube", "cube", {"toy"}, "table"},
               {"toy cube_2", "toy cube", "cube", {"toy"}, "couch"}};
  s.collectives = {{"toys", {"toy cube", "ball"}}};
  return s;
}

WorldState step(const WorldState& s, const Action& a) {
  auto r = execute_action(s, a);
  if (auto* f = std::get_if<ActionFailure>(&r)) ADD_FAILURE() << f->message;
  return std::get<WorldState>(r);
}

FailureReason fails(const WorldState& s, const Action& a) {
  auto r = execute_action(s, a);
  auto* f = std::get_if<ActionFailure>(&r);
  if (f == nullptr) {
    ADD_FAILURE() << "expected failure for " << render_action(a);
    return FailureReason::Injected;
  }
  return f->reason;
}

}  // namespace

TEST(InitWorld, PillowTask) {
  const auto s = init_world(pillow_task(), bank());
  const auto* pillow = first_named(s, "pillow");
  ASSERT_NE(pillow, nullptr);
  EXPECT_EQ(pillow->location, "floor");
  EXPECT_TRUE(s.is_location("couch"));
  for (const auto& o : s.objects) EXPECT_NE(o.location, "couch") << o.id;
  EXPECT_EQ(s.robot_at, "start");
  EXPECT_FALSE(s.holding);
}

TEST(InitWorld, ClothesTaskAndDeterminism) {
  const auto s = init_world(clothes_task(), bank());
  EXPECT_EQ(s.objects[0].id, "shirt_1");
  EXPECT_EQ(s.objects[0].location, "floor");
  EXPECT_EQ(s.objects[1].id, "jeans_1");
  EXPECT_EQ(s.objects[1].location, "floor");
  EXPECT_EQ(s, init_world(clothes_task(), bank()));
  EXPECT_EQ(s.hash(), init_world(clothes_task(), bank()).hash());
}

TEST(InitWorld, UnknownNamesRejected) {
  auto t = pillow_task();
  t.objects[0].name = "unicorn";
  EXPECT_THROW(init_world(t, bank()), VocabMismatch);
  t = pillow_task();
  t.objects[0].destination = "moon";
  EXPECT_THROW(init_world(t, bank()), VocabMismatch);
}

TEST(Execute, Preconditions) {
  auto s = tiny_world();
  s.robot_at = "floor";
  const auto held = step(s, {"pick_up", {"pillow", "floor"}});
  EXPECT_EQ(held.holding, "pillow_1");
  EXPECT_EQ(fails(held, {"put", {"pillow", "couch"}}), FailureReason::ObjectNotHere);
  EXPECT_EQ(fails(held, {"pick_up", {"toy cube", "table"}}), FailureReason::HandFull);
  EXPECT_EQ(fails(s, {"put", {"pillow", "couch"}}), FailureReason::HandEmpty);
  EXPECT_EQ(fails(s, {"move_to", {"unicorn", "floor"}}), FailureReason::NoSuchObject);
  EXPECT_EQ(fails(s, {"move_to", {"pillow", "moon"}}), FailureReason::NoSuchLocation);
  EXPECT_EQ(fails(s, {"pick_up", {"pillow", "table"}}), FailureReason::ObjectNotHere);
  EXPECT_EQ(step(s, {"done", {}}), s);
}

TEST(Execute, UnspecifiedResolvesToFirstInstance) {
  const auto s = tiny_world();
  EXPECT_EQ(step(s, {"move_to", {"toy cube", "unspecified"}}).robot_at, "table");
  EXPECT_EQ(step(s, {"move_to", {"toy cube_2", "unspecified"}}).robot_at, "couch");
  const auto at_couch = step(s, {"move_to", {"couch", "unspecified"}});
  EXPECT_EQ(at_couch.robot_at, "couch");
  const auto picked = step(at_couch, {"pick_up", {"toy cube", "unspecified"}});
  EXPECT_EQ(picked.holding, "toy cube_2");
}

TEST(ExecutePlan, PillowGroundTruth) {
  const auto t = pillow_task();
  const auto r = execute_plan(init_world(t, bank()), *t.gt_plan);
  EXPECT_TRUE(r.outcome.success);
  EXPECT_EQ(r.outcome.steps_executed, 4u);
  EXPECT_FALSE(r.outcome.failure);
  EXPECT_TRUE(goal_satisfied(r.final_state, t));
  EXPECT_FALSE(goal_satisfied(init_world(t, bank()), t));
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_EQ(r.trace[0].pre_state_hash, init_world(t, bank()).hash());
}

TEST(ExecutePlan, StopsAtFirstFailure) {
  const auto s = init_world(pillow_task(), bank());
  const auto plan = parse_plan("put('pillow', 'couch')\nmove_to('pillow', 'floor')", reg());
  const auto r = execute_plan(s, plan);
  EXPECT_FALSE(r.outcome.success);
  ASSERT_TRUE(r.outcome.failure);
  EXPECT_EQ(r.outcome.failure->step, 1u);
  EXPECT_EQ(r.outcome.failure->reason, FailureReason::HandEmpty);
  EXPECT_EQ(r.outcome.steps_executed, 0u);
  EXPECT_EQ(r.final_state, s);
}

TEST(ExecutePlan, InjectedFailures) {
  const auto t = pillow_task();
  ExecOptions always;
  always.fail_hook = pick_drop_injector(1.0, 3);
  const auto r = execute_plan(init_world(t, bank()), *t.gt_plan, always);
  ASSERT_TRUE(r.outcome.failure);
  EXPECT_EQ(r.outcome.failure->reason, FailureReason::Injected);
  EXPECT_EQ(r.outcome.failure->step, 2u);
  ExecOptions never;
  never.fail_hook = pick_drop_injector(0.0, 3);
  EXPECT_TRUE(execute_plan(init_world(t, bank()), *t.gt_plan, never).outcome.success);
}

TEST(ListObjects, Queries) {
  const auto s = init_world(clothes_task(), bank());
  const auto clothes = list_objects(s, "clothes");
  ASSERT_EQ(clothes.size(), 2u);
  EXPECT_EQ(clothes[0].id, "shirt_1");
  EXPECT_EQ(clothes[1].id, "jeans_1");
  EXPECT_EQ(list_objects(s).size(), s.objects.size());
  EXPECT_TRUE(list_objects(s, "unicorn").empty());

  const auto toys = list_objects(tiny_world(), "toys");
  ASSERT_EQ(toys.size(), 2u);
  EXPECT_EQ(toys[0].id, "toy cube_1");
  EXPECT_EQ(toys[0].label, "toy cube_1");
  EXPECT_EQ(list_objects(tiny_world(), "cubes").size(), 2u);
  EXPECT_EQ(list_objects(tiny_world(), "pillow")[0].label, "pillow");
}

TEST(Goal, LengthSixEndsHolding) {
  for (const auto& t : compose_long_horizon(bank(), {6}, 20, 8)) {
    const auto r = execute_plan(init_world(t, bank()), *t.gt_plan);
    ASSERT_TRUE(r.outcome.success) << t.id;
    EXPECT_TRUE(r.final_state.holding.has_value());
    EXPECT_TRUE(goal_satisfied(r.final_state, t));
  }
}

TEST(Property, GroundTruthSoundAcrossSuites) {
  auto tasks = generate_core(bank(), 60, 21);
  for (auto&& extra : {compose_long_horizon(bank(), {2, 4, 6, 8, 10, 12, 14, 16}, 20, 21),
                       generate_ambiguous(bank(), 60, 21), generate_smoke(bank(), 21)})
    tasks.insert(tasks.end(), extra.begin(), extra.end());
  for (const auto& t : tasks) {
    const auto world = init_world(t, bank());
    const auto r = execute_plan(world, *t.gt_plan);
    ASSERT_TRUE(r.outcome.success) << t.id << ": " << (r.outcome.failure ? r.outcome.failure->message : "");
    EXPECT_EQ(r.outcome.steps_executed, t.gt_plan->length());
    EXPECT_TRUE(goal_satisfied(r.final_state, t)) << t.id;
    // render/parse round trip does not change execution
    const auto again = execute_plan(world, parse_plan(render_plan(*t.gt_plan, reg()), reg()));
    EXPECT_EQ(again.final_state, r.final_state);
  }
}

TEST(Property, ConservationAndTruncation) {
  Rng rng(404);
  const auto base = init_world(clothes_task(), bank());
  for (int i = 0; i < 500; ++i) {
    Plan p;
    const auto n = rng.index(9);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& obj = rng.pick(base.objects);
      const std::string loc = rng.chance(0.2) ? "unspecified" : rng.pick(base.locations);
      const std::vector<std::string> skills{"move_to", "pick_up", "put"};
      p.actions.push_back({rng.pick(skills), {rng.chance(0.5) ? obj.id : obj.name, loc}});
    }
    const auto r = execute_plan(base, p);
    EXPECT_EQ(r.final_state.objects.size(), base.objects.size());
    std::size_t held = 0;
    for (const auto& o : r.final_state.objects) {
      if (o.location.empty()) {
        ++held;
        EXPECT_EQ(r.final_state.holding, o.id);
      }
    }
    EXPECT_LE(held, 1u);
    EXPECT_EQ(held == 1, r.final_state.holding.has_value());
    if (r.outcome.failure) {
      Plan cut = p;
      cut.actions.resize(r.outcome.failure->step);
      const auto r2 = execute_plan(base, cut);
      EXPECT_EQ(r2.outcome.failure->step, r.outcome.failure->step);
      EXPECT_EQ(r2.outcome.failure->reason, r.outcome.failure->reason);
      EXPECT_EQ(r2.outcome.steps_executed, r.outcome.steps_executed);
    } else {
      EXPECT_EQ(r.outcome.steps_executed, p.length());
    }
  }
}
