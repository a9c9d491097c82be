#include "help/metrics.hpp"

#include <charconv>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace help {

std::string_view to_string(MetricMode mode) { return mode == MetricMode::A ? "A" : "P"; }

std::vector<std::string> project(const Plan& plan, MetricMode mode) {
  std::vector<std::string> out;
  out.reserve(plan.actions.size());
  for (const auto& a : plan.actions) {
    if (a.is_done()) continue;
    if (mode == MetricMode::A) {
      out.push_back(a.skill);
      continue;
    }
    std::string token = a.skill;
    token += '(';
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i > 0) token += '\x1f';
      token += a.args[i];
    }
    token += ')';
    out.push_back(std::move(token));
  }
  return out;
}

namespace {

template <typename Kernel>
double normalized_score(const Plan& pred, const Plan& gt, MetricMode mode, Kernel kernel) {
  const auto x = project(pred, mode);
  const auto y = project(gt, mode);
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  const std::size_t common = kernel(std::span<const std::string>(x), std::span<const std::string>(y));
  return static_cast<double>(common) / static_cast<double>(std::max(x.size(), y.size()));
}

bool all_integers(const std::vector<std::pair<std::string, GroupStats>>& rows) {
  for (const auto& [value, _] : rows) {
    long long parsed = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc() || p != value.data() + value.size()) return false;
  }
  return true;
}

GroupStats fold(const std::vector<const EvalRecord*>& records) {
  GroupStats stats;
  stats.count = records.size();
  std::size_t failures = 0;
  for (const auto* r : records) {
    const std::array<double, 6> v{static_cast<double>(r->em_a), r->lcss_a, r->lcsa_a,
                                  static_cast<double>(r->em_p), r->lcss_p, r->lcsa_p};
    for (std::size_t i = 0; i < v.size(); ++i) stats.means[i] += v[i];
    if (!r->parse_ok) ++failures;
  }
  for (auto& m : stats.means) m /= static_cast<double>(stats.count);
  stats.parse_failure_rate = static_cast<double>(failures) / static_cast<double>(stats.count);
  return stats;
}

nlohmann::json stats_to_json(const GroupStats& s) {
  nlohmann::json j{{"count", s.count}, {"parse_failure_rate", s.parse_failure_rate}};
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) j[std::string(kMetricNames[i])] = s.means[i];
  return j;
}

GroupStats stats_from_json(const nlohmann::json& j) {
  GroupStats s;
  s.count = j.at("count").get<std::size_t>();
  s.parse_failure_rate = j.at("parse_failure_rate").get<double>();
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) s.means[i] = j.at(std::string(kMetricNames[i])).get<double>();
  return s;
}

std::string fixed(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << v;
  return out.str();
}

}  // namespace

int exact_match(const Plan& pred, const Plan& gt, MetricMode mode) {
  return project(pred, mode) == project(gt, mode) ? 1 : 0;
}

double lcs_subsequence(const Plan& pred, const Plan& gt, MetricMode mode) {
  return normalized_score(pred, gt, mode, [](auto x, auto y) { return lcs_length(x, y); });
}

double lcs_subarray(const Plan& pred, const Plan& gt, MetricMode mode) {
  return normalized_score(pred, gt, mode,
                          [](auto x, auto y) { return longest_common_subarray_length(x, y); });
}

EvalRecord evaluate(std::string task_id, const Plan& pred, const Plan& gt, bool parse_ok) {
  EvalRecord r;
  r.task_id = std::move(task_id);
  r.em_a = exact_match(pred, gt, MetricMode::A);
  r.em_p = exact_match(pred, gt, MetricMode::P);
  r.lcss_a = lcs_subsequence(pred, gt, MetricMode::A);
  r.lcss_p = lcs_subsequence(pred, gt, MetricMode::P);
  r.lcsa_a = lcs_subarray(pred, gt, MetricMode::A);
  r.lcsa_p = lcs_subarray(pred, gt, MetricMode::P);
  r.pred_len = pred.length();
  r.gt_len = gt.length();
  r.parse_ok = parse_ok;
  return r;
}

double GroupStats::mean(std::string_view metric) const {
  for (std::size_t i = 0; i < kMetricNames.size(); ++i)
    if (kMetricNames[i] == metric) return means[i];
  throw std::invalid_argument("unknown metric: " + std::string(metric));
}

nlohmann::json to_json(const EvalRecord& r) {
  return {{"task_id", r.task_id}, {"em_a", r.em_a},       {"em_p", r.em_p},
          {"lcss_a", r.lcss_a},   {"lcss_p", r.lcss_p},   {"lcsa_a", r.lcsa_a},
          {"lcsa_p", r.lcsa_p},   {"pred_len", r.pred_len}, {"gt_len", r.gt_len},
          {"parse_ok", r.parse_ok}, {"metadata", r.metadata}};
}

EvalRecord eval_record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.task_id = j.at("task_id").get<std::string>();
  r.em_a = j.at("em_a").get<int>();
  r.em_p = j.at("em_p").get<int>();
  r.lcss_a = j.at("lcss_a").get<double>();
  r.lcss_p = j.at("lcss_p").get<double>();
  r.lcsa_a = j.at("lcsa_a").get<double>();
  r.lcsa_p = j.at("lcsa_p").get<double>();
  r.pred_len = j.at("pred_len").get<std::size_t>();
  r.gt_len = j.at("gt_len").get<std::size_t>();
  r.parse_ok = j.at("parse_ok").get<bool>();
  r.metadata = j.value("metadata", std::map<std::string, std::string>{});
  return r;
}

EvalReport aggregate(std::span<const EvalRecord> records, std::span<const std::string> group_keys) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  EvalReport report;
  std::vector<const EvalRecord*> all;
  for (const auto& r : records) all.push_back(&r);
  report.overall = fold(all);

  for (const auto& key : group_keys) {
    std::map<std::string, std::vector<const EvalRecord*>> buckets;
    for (const auto& r : records) {
      if (auto it = r.metadata.find(key); it != r.metadata.end()) buckets[it->second].push_back(&r);
    }
    if (buckets.empty()) continue;
    auto& rows = report.groups[key];
    for (const auto& [value, members] : buckets) rows.emplace_back(value, fold(members));
    if (all_integers(rows)) {
      std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::stoll(a.first) < std::stoll(b.first);
      });
    }
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [key, rows] : report.groups) {
    auto arr = nlohmann::json::array();
    for (const auto& [value, stats] : rows) {
      auto row = stats_to_json(stats);
      row["value"] = value;
      arr.push_back(std::move(row));
    }
    groups[key] = std::move(arr);
  }
  return {{"overall", stats_to_json(report.overall)}, {"groups", groups}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport report;
  report.overall = stats_from_json(j.at("overall"));
  for (const auto& [key, rows] : j.at("groups").items()) {
    auto& out = report.groups[key];
    for (const auto& row : rows) out.emplace_back(row.at("value").get<std::string>(), stats_from_json(row));
  }
  return report;
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "group,value";
  for (auto name : kMetricNames) out << ',' << name;
  out << ",count,parse_failure_rate\n";
  auto row = [&](std::string_view group, std::string_view value, const GroupStats& s) {
    out << group << ',' << value;
    for (double m : s.means) out << ',' << fixed(m);
    out << ',' << s.count << ',' << fixed(s.parse_failure_rate) << '\n';
  };
  row("overall", "all", report.overall);
  for (const auto& [key, rows] : report.groups)
    for (const auto& [value, stats] : rows) row(key, value, stats);
  return out.str();
}

}  // namespace help
