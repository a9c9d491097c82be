#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "help/plan_dsl.hpp"

namespace help {

/// A compares skill names only; P compares skill names and the full argument tuple.
enum class MetricMode { A, P };

std::string_view to_string(MetricMode mode);

// ---------------------------------------------------------------------------
// Sequence kernels. Generic over any equality-comparable element type.

/// Length of the longest common (not necessarily contiguous) subsequence.
template <typename T>
std::size_t lcs_length(std::span<const T> x, std::span<const T> y) {
  if (x.size() < y.size()) std::swap(x, y);
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

/// Length of the longest common contiguous block.
template <typename T>
std::size_t longest_common_subarray_length(std::span<const T> x, std::span<const T> y) {
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Plan metrics. done() never takes part: Plan stores it only as a flag.

/// One token per action: the skill name (A) or skill plus arguments (P).
std::vector<std::string> project(const Plan& plan, MetricMode mode);

int exact_match(const Plan& pred, const Plan& gt, MetricMode mode);
/// LCS / max(|pred|, |gt|); 1.0 when both are empty, 0.0 when exactly one is.
double lcs_subsequence(const Plan& pred, const Plan& gt, MetricMode mode);
/// Longest common contiguous run / max(|pred|, |gt|); same empty-plan conventions.
double lcs_subarray(const Plan& pred, const Plan& gt, MetricMode mode);

struct EvalRecord {
  std::string task_id;
  int em_a = 0;
  int em_p = 0;
  double lcss_a = 0.0;
  double lcss_p = 0.0;
  double lcsa_a = 0.0;
  double lcsa_p = 0.0;
  std::size_t pred_len = 0;
  std::size_t gt_len = 0;
  bool parse_ok = true;
  std::map<std::string, std::string> metadata;  // grouping keys, e.g. task_class, length

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

EvalRecord evaluate(std::string task_id, const Plan& pred, const Plan& gt, bool parse_ok = true);

nlohmann::json to_json(const EvalRecord& record);
EvalRecord eval_record_from_json(const nlohmann::json& j);

inline constexpr std::array<std::string_view, 6> kMetricNames{"em_a",   "lcss_a", "lcsa_a",
                                                               "em_p",   "lcss_p", "lcsa_p"};

struct GroupStats {
  std::size_t count = 0;
  std::array<double, 6> means{};  // ordered as kMetricNames
  double parse_failure_rate = 0.0;

  double mean(std::string_view metric) const;
};

struct EvalReport {
  GroupStats overall;
  // group key -> group value -> stats. Values sort numerically when they all parse as integers.
  std::map<std::string, std::vector<std::pair<std::string, GroupStats>>> groups;
};

/// Means of the six metrics overall and per value of each metadata key. Throws on empty input.
EvalReport aggregate(std::span<const EvalRecord> records, std::span<const std::string> group_keys);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
/// Rows: one per (group key, value) plus "overall"; columns: six metrics, count, parse_failure_rate.
std::string to_csv(const EvalReport& report);

}  // namespace help
