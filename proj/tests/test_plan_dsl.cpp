#include <gtest/gtest.h>

#include "help/plan_dsl.hpp"
#include "oracles.hpp"

using namespace help;

namespace {

const SkillRegistry& reg() {
  static const SkillRegistry r = SkillRegistry::default_registry();
  return r;
}

Plan pillow_plan() {
  return {{{"move_to", {"pillow", "floor"}},
           {"pick_up", {"pillow", "floor"}},
           {"move_to", {"couch", "unspecified"}},
           {"put", {"pillow", "couch"}}},
          true};
}

PlanError parse_error(std::string_view text) {
  try {
    parse_plan(text, reg());
  } catch (const PlanError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a PlanError for: " << text;
  return PlanError(PlanErrorKind::InvalidPlan, "none");
}

}  // namespace

TEST(Registry, DefaultHasFourSkills) {
  EXPECT_EQ(reg().skills().size(), 4u);
  ASSERT_NE(reg().find("move_to"), nullptr);
  EXPECT_EQ(reg().find("move_to")->arity(), 2u);
  EXPECT_EQ(reg().find("done")->arity(), 0u);
  EXPECT_FALSE(reg().contains("slice"));
}

TEST(Registry, JsonRoundTrip) {
  const auto again = SkillRegistry::from_json(reg().to_json());
  ASSERT_EQ(again.skills().size(), reg().skills().size());
  for (std::size_t i = 0; i < again.skills().size(); ++i) {
    EXPECT_EQ(again.skills()[i].name, reg().skills()[i].name);
    EXPECT_EQ(again.skills()[i].params, reg().skills()[i].params);
  }
}

TEST(Registry, DuplicateNamesRejected) {
  const nlohmann::json doc = {{"skills", {{{"name", "a"}, {"params", nlohmann::json::array()}},
                                          {{"name", "a"}, {"params", nlohmann::json::array()}}}}};
  EXPECT_ANY_THROW(SkillRegistry::from_json(doc));
}

TEST(Parse, PillowOneLiner) {
  const auto plan = parse_plan(
      "1. move_to('pillow', 'floor'), 2. pick_up('pillow', 'floor'), 3. move_to('couch'), 4. put('pillow', "
      "'couch'), 5. done()",
      reg());
  EXPECT_EQ(plan, pillow_plan());
  EXPECT_EQ(plan.length(), 4u);
}

TEST(Parse, CaseQuotesAndSpacing) {
  const auto plan = parse_plan("1. MOVE_TO( \"Red Cup\" , 'table' )\n2. done( )", reg());
  const Plan expected{{{"move_to", {"red cup", "table"}}}, true};
  EXPECT_EQ(plan, expected);
}

TEST(Parse, EmptyInput) {
  EXPECT_EQ(parse_error("").kind(), PlanErrorKind::EmptyInput);
  EXPECT_EQ(parse_error("  \n\t ").kind(), PlanErrorKind::EmptyInput);
}

TEST(Parse, UnknownSkillIsLocated) {
  const auto e = parse_error("1. move_to('a', 'table')\n2. fly('a', 'table')");
  EXPECT_EQ(e.kind(), PlanErrorKind::UnknownSkill);
  EXPECT_EQ(e.line(), 2u);
  EXPECT_EQ(e.column(), 4u);
}

TEST(Parse, ArityMismatch) {
  const auto e = parse_error("pick_up('a')");
  EXPECT_EQ(e.kind(), PlanErrorKind::ArityMismatch);
  EXPECT_EQ(e.line(), 1u);
  EXPECT_EQ(parse_error("put('a', 'b', 'c')").kind(), PlanErrorKind::ArityMismatch);
}

TEST(Parse, SyntaxErrors) {
  EXPECT_EQ(parse_error("move_to('a', 'table'").kind(), PlanErrorKind::SyntaxError);
  EXPECT_EQ(parse_error("move_to('a, 'table')").kind(), PlanErrorKind::SyntaxError);
  EXPECT_EQ(parse_error("Sure! Here is the plan:\n1. move_to('a', 'table')").kind(), PlanErrorKind::SyntaxError);
  EXPECT_EQ(parse_error("move_to('', 'table')").kind(), PlanErrorKind::SyntaxError);
}

TEST(Parse, SeparatorsAndBareArguments) {
  const Plan expected{{{"move_to", {"apple", "table"}}, {"pick_up", {"apple", "table"}}}, false};
  EXPECT_EQ(parse_plan("move_to(apple, table); pick_up(apple, table)", reg()), expected);
  EXPECT_EQ(parse_plan("1) move_to('apple','table')\n\n2) pick_up('apple','table')", reg()), expected);
}

TEST(Parse, TrailingProseIsDroppedWithWarning) {
  const auto r = parse_plan_detailed("1. move_to('a', 'table')\n2. done()\nThis plan moves the robot.", reg());
  EXPECT_EQ(r.plan.length(), 1u);
  EXPECT_TRUE(r.plan.terminated);
  EXPECT_FALSE(r.warnings.empty());

  const auto r2 = parse_plan_detailed("1. move_to('a', 'table')\nThat is all.", reg());
  EXPECT_EQ(r2.plan.length(), 1u);
  EXPECT_FALSE(r2.plan.terminated);
  EXPECT_FALSE(r2.warnings.empty());
}

TEST(Parse, NumberingIsIgnored) {
  const auto a = parse_plan("1. move_to('a', 'table')\n2. pick_up('a', 'table')\n3. done()", reg());
  const auto b = parse_plan("7. move_to('a', 'table')\n3. pick_up('a', 'table')\ndone()", reg());
  const auto c = parse_plan("move_to('a', 'table')\npick_up('a', 'table')\ndone()", reg());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Parse, AlfredAliases) {
  const auto alfred = SkillRegistry::alfred_registry();
  EXPECT_EQ(alfred.skills().size(), 9u);
  const auto plan = parse_plan("1. slice('apple')\n2. done()", alfred);
  ASSERT_EQ(plan.length(), 1u);
  EXPECT_TRUE(validate_plan(plan, alfred).empty());
}

TEST(Render, Examples) {
  EXPECT_EQ(render_plan({{{"pick_up", {"apple", "table"}}}, false}, reg()), "1. pick_up('apple', 'table')");
  EXPECT_EQ(render_plan({{}, true}, reg()), "1. done()");
  const auto text = render_plan(pillow_plan(), reg());
  EXPECT_EQ(text,
            "1. move_to('pillow', 'floor')\n2. pick_up('pillow', 'floor')\n3. move_to('couch', 'unspecified')\n"
            "4. put('pillow', 'couch')\n5. done()");
  EXPECT_EQ(parse_plan(text, reg()), pillow_plan());
}

TEST(Render, InvalidPlanThrows) {
  try {
    render_plan({{{"slice", {"apple"}}}, false}, reg());
    FAIL();
  } catch (const PlanError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::InvalidPlan);
  }
}

TEST(Render, ApostropheArgumentsRoundTrip) {
  const Plan p{{{"pick_up", {"o'neil mug", "table"}}}, true};
  EXPECT_EQ(parse_plan(render_plan(p, reg()), reg()), p);
}

TEST(Validate, Reports) {
  EXPECT_TRUE(validate_plan(pillow_plan(), reg()).empty());
  const auto v = validate_plan({{{"slice", {"apple"}}}, false}, reg());
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::UnknownSkill);
  const auto v2 = validate_plan({{{"put", {"apple", ""}}, {"move_to", {"a"}}}, false}, reg());
  ASSERT_EQ(v2.size(), 2u);
  EXPECT_EQ(v2[0].kind, Violation::Kind::EmptyArgument);
  EXPECT_EQ(v2[1].kind, Violation::Kind::ArityMismatch);
  EXPECT_EQ(v2[1].index, 1u);
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_arg(" 'Green Apple' "), "green apple");
  EXPECT_EQ(normalize_arg("unspecified"), "unspecified");
  EXPECT_EQ(normalize_arg("TOY cube"), "toy cube");
  EXPECT_EQ(normalize_arg("white　  box"), "white box");
  EXPECT_EQ(normalize_arg("\"Red   Cup\""), "red cup");
}

TEST(Normalize, Idempotent) {
  const std::vector<std::string> samples{" 'A  b' ", "\"x\"", "'\"q\"'", " Toy Car ", "", "''", "  ",
                                         "Mixed CASE\tTab"};
  for (const auto& s : samples) EXPECT_EQ(normalize_arg(normalize_arg(s)), normalize_arg(s)) << s;
}

TEST(Property, RoundTripGeneratedPlans) {
  Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    Plan p = oracle::random_plan(rng, 10, true);
    if (p.empty()) p.terminated = true;  // "" is EmptyInput, not the empty plan
    EXPECT_EQ(parse_plan(render_plan(p, reg()), reg()), p);
  }
}

TEST(Property, ParserNeverAborts) {
  Rng rng(77);
  const std::string alphabet = "move_topickupdne()'\", .;\n1234 \t";
  for (int i = 0; i < 3000; ++i) {
    std::string s;
    const std::size_t n = rng.index(40);
    for (std::size_t k = 0; k < n; ++k) s += alphabet[rng.index(alphabet.size())];
    try {
      (void)parse_plan(s, reg());
    } catch (const PlanError& e) {
      if (e.kind() != PlanErrorKind::EmptyInput) EXPECT_GE(e.line(), 1u) << s;
    }
  }
}
