#include <gtest/gtest.h>

#include "help/metrics.hpp"
#include "oracles.hpp"

using namespace help;

namespace {

Plan pp(const std::string& obj, const std::string& src, const std::string& dst) {
  return {{{"move_to", {obj, src}}, {"pick_up", {obj, src}}, {"move_to", {obj, dst}}, {"put", {obj, dst}}}, true};
}

}  // namespace

TEST(ExactMatch, Examples) {
  const Plan gt = pp("bowl", "floor", "table");
  EXPECT_EQ(exact_match(gt, gt, MetricMode::A), 1);
  EXPECT_EQ(exact_match(gt, gt, MetricMode::P), 1);

  Plan wrong_arg = gt;
  wrong_arg.actions[3].args[1] = "couch";
  EXPECT_EQ(exact_match(wrong_arg, gt, MetricMode::A), 1);
  EXPECT_EQ(exact_match(wrong_arg, gt, MetricMode::P), 0);

  Plan short_plan = gt;
  short_plan.actions.pop_back();
  EXPECT_EQ(exact_match(short_plan, gt, MetricMode::A), 0);
  EXPECT_EQ(exact_match(short_plan, gt, MetricMode::P), 0);
}

TEST(ExactMatch, DoneIsIgnored) {
  Plan a = pp("bowl", "floor", "table");
  Plan b = a;
  b.terminated = false;
  EXPECT_EQ(exact_match(a, b, MetricMode::P), 1);
}

TEST(Lcss, Examples) {
  const Plan gt = pp("bowl", "floor", "table");
  Plan missing = gt;
  missing.actions.pop_back();
  EXPECT_DOUBLE_EQ(lcs_subsequence(missing, gt, MetricMode::P), 0.75);

  // pred skips the first step and adds one unrelated step: 3 common of max(4, 4)
  Plan shifted{{gt.actions[1], gt.actions[2], gt.actions[3], {"pick_up", {"cup", "couch"}}}, true};
  EXPECT_DOUBLE_EQ(lcs_subsequence(shifted, gt, MetricMode::P), 0.75);

  EXPECT_DOUBLE_EQ(lcs_subsequence(Plan{}, Plan{}, MetricMode::P), 1.0);
  EXPECT_DOUBLE_EQ(lcs_subsequence(Plan{}, gt, MetricMode::A), 0.0);
  EXPECT_DOUBLE_EQ(lcs_subsequence(gt, Plan{}, MetricMode::A), 0.0);
}

TEST(Lcsa, Examples) {
  const Plan gt = pp("bowl", "floor", "table");
  // Alternating agreement: common blocks of length 1 only.
  Plan alt = gt;
  alt.actions[1].args[0] = "cup";
  alt.actions[3].args[0] = "cup";
  EXPECT_DOUBLE_EQ(lcs_subarray(alt, gt, MetricMode::P), 0.25);
  EXPECT_DOUBLE_EQ(lcs_subsequence(alt, gt, MetricMode::P), 0.5);
  EXPECT_DOUBLE_EQ(lcs_subarray(alt, gt, MetricMode::A), 1.0);

  // 5-step prediction containing the 4 GT steps contiguously
  Plan extra = gt;
  extra.actions.insert(extra.actions.begin(), {"move_to", {"bowl", "unspecified"}});
  EXPECT_DOUBLE_EQ(lcs_subarray(extra, gt, MetricMode::P), 0.8);
}

TEST(Kernels, GenericOverElementType) {
  const std::vector<int> x{1, 2, 3, 4, 5}, y{2, 4, 5, 1};
  EXPECT_EQ(lcs_length<int>(x, y), 3u);
  EXPECT_EQ(longest_common_subarray_length<int>(x, y), 2u);
  const std::vector<int> empty;
  EXPECT_EQ(lcs_length<int>(x, empty), 0u);
}

TEST(Oracle, DynamicProgrammingMatchesEnumeration) {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Plan a = oracle::random_plan(rng, 8), b = oracle::random_plan(rng, 8);
    for (bool args : {false, true}) {
      const auto mode = args ? MetricMode::P : MetricMode::A;
      ASSERT_EQ(lcs_subsequence(a, b, mode), oracle::lcss(a, b, args));
      ASSERT_EQ(lcs_subarray(a, b, mode), oracle::lcsa(a, b, args));
      ASSERT_EQ(exact_match(a, b, mode), oracle::em(a, b, args));
    }
  }
}

TEST(Property, InvariantsAndSymmetry) {
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) {
    const Plan a = oracle::random_plan(rng, 8), b = oracle::random_plan(rng, 8);
    const auto r = evaluate("t", a, b);
    for (auto [em, ss, sa] : {std::tuple{r.em_a, r.lcss_a, r.lcsa_a}, std::tuple{r.em_p, r.lcss_p, r.lcsa_p}}) {
      EXPECT_LE(0.0, sa);
      EXPECT_LE(sa, ss);
      EXPECT_LE(ss, 1.0);
      if (em == 1) {
        EXPECT_EQ(ss, 1.0);
        EXPECT_EQ(sa, 1.0);
      }
    }
    EXPECT_GE(r.em_a, r.em_p);
    EXPECT_GE(r.lcss_a, r.lcss_p);
    EXPECT_GE(r.lcsa_a, r.lcsa_p);
    EXPECT_EQ(lcs_subsequence(a, b, MetricMode::P), lcs_subsequence(b, a, MetricMode::P));
  }
}

TEST(Aggregate, Means) {
  const Plan gt = pp("bowl", "floor", "table");
  Plan wrong = gt;
  wrong.actions[0].args[0] = "cup";
  std::vector<EvalRecord> records{evaluate("a", gt, gt), evaluate("b", wrong, gt, false)};
  records[0].metadata["length"] = "4";
  records[1].metadata["length"] = "4";
  const std::vector<std::string> keys{"length"};
  const auto report = aggregate(records, keys);
  EXPECT_EQ(report.overall.count, 2u);
  EXPECT_DOUBLE_EQ(report.overall.mean("em_p"), 0.5);
  EXPECT_DOUBLE_EQ(report.overall.mean("em_a"), 1.0);
  EXPECT_DOUBLE_EQ(report.overall.parse_failure_rate, 0.5);
  ASSERT_EQ(report.groups.at("length").size(), 1u);
  EXPECT_THROW(aggregate(std::span<const EvalRecord>{}, keys), std::invalid_argument);
}

TEST(Aggregate, NumericGroupOrderAndSerialization) {
  std::vector<EvalRecord> records;
  for (int len : {16, 2, 10, 4}) {
    for (int k = 0; k < 200; ++k) {
      auto r = evaluate("t", Plan{}, Plan{});
      r.metadata["length"] = std::to_string(len);
      records.push_back(r);
    }
  }
  const std::vector<std::string> keys{"length"};
  const auto report = aggregate(records, keys);
  const auto& rows = report.groups.at("length");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].first, "2");
  EXPECT_EQ(rows[1].first, "4");
  EXPECT_EQ(rows[2].first, "10");
  EXPECT_EQ(rows[3].first, "16");
  EXPECT_EQ(rows[0].second.count, 200u);
  EXPECT_DOUBLE_EQ(rows[0].second.mean("em_p"), 1.0);

  const auto back = eval_report_from_json(to_json(report));
  EXPECT_EQ(to_csv(back), to_csv(report));
  const auto csv = to_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "group,value,em_a,lcss_a,lcsa_a,em_p,lcss_p,lcsa_p,count,parse_failure_rate");
}

TEST(EvalRecord, JsonRoundTrip) {
  auto r = evaluate("x", pp("a", "b", "c"), pp("a", "b", "d"));
  r.metadata["task_class"] = "PickPlace";
  EXPECT_EQ(eval_record_from_json(to_json(r)), r);
}
