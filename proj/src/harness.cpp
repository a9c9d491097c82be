#include "help/harness.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "help/metrics.hpp"
#include "help/task_gen.hpp"
#include "help/util.hpp"
#include "help/world_sim.hpp"

namespace help::cli {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = to_lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(v, &used);
    } else if constexpr (std::is_same_v<T, int>) {
      out = std::stoi(v, &used);
    } else {
      if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

void require_one_of(const std::string& key, const std::string& v, std::initializer_list<std::string_view> allowed) {
  for (auto a : allowed)
    if (v == a) return;
  throw ConfigError("invalid value '" + v + "' for '" + key + "'");
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string manifest_hash_for(const fs::path& dataset) {
  const auto manifest = dataset.parent_path() / "manifest.json";
  return fs::exists(manifest) ? file_hash(manifest) : std::string();
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string signed_fixed(double v) {
  std::ostringstream s;
  s << std::showpos << std::fixed << std::setprecision(3) << v;
  return s.str();
}

struct Meta {
  std::string config_hash;
  std::string dataset_manifest_hash;
  std::string backend;

  nlohmann::json to_json() const {
    return {{"config_hash", config_hash}, {"dataset_manifest_hash", dataset_manifest_hash}, {"backend", backend}};
  }
  std::string comment() const {
    return "# config_hash=" + config_hash + " dataset_manifest_hash=" + dataset_manifest_hash + " backend=" + backend +
           "\n";
  }
};

Meta run_meta(const fs::path& run_dir) {
  const auto path = run_dir / "run.json";
  if (!fs::exists(path)) return {};
  const auto j = read_json(path);
  return {j.value("config_hash", ""), j.value("dataset_manifest_hash", ""), j.value("backend", "")};
}

SkillRegistry registry_named(const std::string& name) {
  if (name == "default") return SkillRegistry::default_registry();
  if (name == "alfred") return SkillRegistry::alfred_registry();
  if (!fs::exists(name)) throw ConfigError("skill registry not found: " + name);
  return SkillRegistry::load(name);
}

VocabBank bank_at(const std::string& path) {
  if (path.empty()) return VocabBank::load_default();
  if (!fs::exists(path)) throw ConfigError("vocabulary bank not found: " + path);
  return VocabBank::load(path);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "script") script = value;
  else if (key == "base_url") gateway.base_url = value;
  else if (key == "model") gateway.model = value;
  else if (key == "api_key_env") gateway.api_key_env = value;
  else if (key == "temperature") gateway.temperature = parse_number<double>(key, value);
  else if (key == "max_tokens") gateway.max_tokens = parse_number<int>(key, value);
  else if (key == "timeout_ms") gateway.timeout_ms = parse_number<int>(key, value);
  else if (key == "retries") gateway.retries = parse_number<int>(key, value);
  else if (key == "backoff_ms") gateway.backoff_ms = parse_number<int>(key, value);
  else if (key == "concurrency") gateway.concurrency = parse_number<int>(key, value);
  else if (key == "trace_log") trace_log = value;
  else if (key == "mode") { require_one_of(key, value, {"help", "llp_only"}); mode = value; }
  else if (key == "selection") { require_one_of(key, value, {"similarity", "fixed"}); selection = value; }
  else if (key == "llp_shots") llp_shots = parse_number<std::size_t>(key, value);
  else if (key == "grounding") grounding = parse_bool(key, value);
  else if (key == "grounding_threshold") grounding_threshold = parse_number<double>(key, value);
  else if (key == "feasibility_check") feasibility_check = parse_bool(key, value);
  else if (key == "execute") execute = parse_bool(key, value);
  else if (key == "embedder") { require_one_of(key, value, {"trigram", "remote"}); embedder = value; }
  else if (key == "embed_url") embed_url = value;
  else if (key == "scorer") { require_one_of(key, value, {"tf", "embedding"}); scorer = value; }
  else if (key == "registry") registry = value;
  else if (key == "prompts") prompts = value;
  else if (key == "bank") bank = value;
  else if (key == "dataset") dataset = value;
  else if (key == "out") out = value;
  else if (key == "parallelism") parallelism = std::max<std::size_t>(1, parse_number<std::size_t>(key, value));
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::load_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  int line_no = 0;
  for (const auto& raw : split_lines(read_file(path))) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json backend;
  if (!script.empty()) {
    backend = {{"kind", "scripted"}, {"script", fs::path(script).filename().string()}};
  } else {
    backend = {{"kind", "http"},
               {"base_url", gateway.base_url},
               {"model", gateway.model},
               {"temperature", gateway.temperature},
               {"max_tokens", gateway.max_tokens}};
  }
  std::string registry_id = registry;
  if (registry != "default" && registry != "alfred" && fs::exists(registry)) registry_id = "file:" + file_hash(registry);
  return {{"backend", backend},
          {"mode", mode},
          {"selection", selection},
          {"llp_shots", llp_shots},
          {"grounding", grounding},
          {"grounding_threshold", grounding_threshold},
          {"feasibility_check", feasibility_check},
          {"execute", execute},
          {"embedder", embedder == "remote" ? "remote:" + embed_url : embedder},
          {"scorer", scorer},
          {"registry", registry_id},
          {"seed", seed}};
}

std::string RunConfig::hash() const { return json_hash(to_json()); }

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.mode = mode == "llp_only" ? PlannerMode::LlpOnly : PlannerMode::Help;
  p.selection = selection == "fixed" ? ExemplarSelection::Fixed : ExemplarSelection::Similarity;
  p.llp_shots = llp_shots;
  p.grounding = grounding;
  p.grounding_threshold = grounding_threshold;
  p.feasibility_check = feasibility_check;
  p.execute = execute;
  return p;
}

SkillRegistry RunConfig::skill_registry() const { return registry_named(registry); }

PromptSet RunConfig::prompt_set() const {
  if (prompts.empty()) return PromptSet::load_default();
  if (!fs::is_directory(prompts)) throw ConfigError("prompt directory not found: " + prompts);
  return PromptSet::load(prompts);
}

VocabBank RunConfig::vocab_bank() const { return bank_at(bank); }

std::shared_ptr<ChatBackend> RunConfig::make_backend() const {
  if (!script.empty()) {
    if (!fs::exists(script)) throw ConfigError("script fixture not found: " + script);
    return std::make_shared<ScriptedBackend>(ScriptedBackend::load(script));
  }
  return std::make_shared<HttpChatBackend>(gateway);
}

std::shared_ptr<const Embedder> RunConfig::make_embedder() const {
  if (embedder == "remote") {
    if (embed_url.empty()) throw ConfigError("embedder = remote needs embed_url");
    return std::make_shared<RemoteEmbedder>(embed_url);
  }
  return std::make_shared<TrigramEmbedder>();
}

std::shared_ptr<const SimilarityScorer> RunConfig::make_scorer() const {
  if (scorer == "embedding") return std::make_shared<EmbeddingScorer>(make_embedder());
  return std::make_shared<TfCosineScorer>();
}

// ---------------------------------------------------------------------------
// gen

std::vector<TaskInstance> load_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("dataset not found: " + path.string());
  std::vector<TaskInstance> tasks;
  try {
    for (const auto& row : read_jsonl(path)) tasks.push_back(task_from_json(row));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed dataset " + path.string() + ": " + e.what());
  }
  return tasks;
}

nlohmann::json cmd_gen(const GenOptions& o) {
  const VocabBank bank = bank_at(o.bank);
  check_bank(bank);

  std::vector<TaskInstance> tasks;
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::string> notes;
  if (o.suite == "core") {
    tasks = generate_core(bank, o.per_class, o.seed);
    params = {{"per_class", o.per_class}};
  } else if (o.suite == "lengths") {
    tasks = compose_long_horizon(bank, o.lengths, o.per_length, o.seed);
    params = {{"per_length", o.per_length}, {"lengths", o.lengths}};
    notes.push_back("lengths that are not multiples of 4 end with one 2-step pick unit; all other units are 4-step pick-and-place");
  } else if (o.suite == "ambiguous") {
    tasks = generate_ambiguous(bank, o.count, o.seed);
    params = {{"count", o.count}};
  } else if (o.suite == "feasibility") {
    tasks = generate_feasibility_set(bank, o.seed);
  } else if (o.suite == "smoke") {
    tasks = generate_smoke(bank, o.seed);
  } else {
    throw ConfigError("unknown suite '" + o.suite + "' (core, lengths, ambiguous, feasibility, smoke)");
  }

  std::vector<nlohmann::json> rows;
  std::map<std::string, std::size_t> by_class, by_length, by_verdict;
  for (const auto& t : tasks) {
    rows.push_back(to_json(t));
    ++by_class[std::string(to_string(t.task_class))];
    if (t.gt_plan) ++by_length[std::to_string(t.gt_plan->length())];
    if (auto it = t.metadata.find("expected_verdict"); it != t.metadata.end()) ++by_verdict[it->second];
  }
  fs::create_directories(o.out);
  const auto dataset_path = o.out / "dataset.jsonl";
  write_file(dataset_path, to_jsonl(rows));

  nlohmann::json counts{{"total", tasks.size()}, {"by_task_class", by_class}, {"by_length", by_length}};
  if (!by_verdict.empty()) counts["by_expected_verdict"] = by_verdict;
  nlohmann::json manifest{{"suite", o.suite},
                          {"seed", o.seed},
                          {"bank_hash", bank.hash()},
                          {"params", params},
                          {"counts", counts},
                          {"dataset_hash", file_hash(dataset_path)},
                          {"notes", notes}};
  write_file(o.out / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// run

RunSummary cmd_run(const RunConfig& config, std::shared_ptr<ChatBackend> backend, bool feasibility_only) {
  if (config.dataset.empty()) throw ConfigError("no dataset given");
  const auto tasks = load_dataset(config.dataset);
  const VocabBank bank = config.vocab_bank();
  const std::string manifest_hash = manifest_hash_for(config.dataset);
  if (!manifest_hash.empty()) {
    const auto manifest = read_json(fs::path(config.dataset).parent_path() / "manifest.json");
    if (manifest.value("bank_hash", bank.hash()) != bank.hash())
      throw ConfigError("dataset was generated from a different vocabulary bank");
  }

  if (!backend) backend = config.make_backend();
  if (!config.trace_log.empty()) backend = std::make_shared<TracingBackend>(backend, config.trace_log);
  const HelpPipeline pipeline(config.prompt_set(), config.skill_registry(), config.pipeline(), config.make_scorer(),
                              config.make_embedder());

  const fs::path out = config.out;
  const fs::path trace_dir = out / "traces";
  fs::create_directories(trace_dir);
  const Meta meta{config.hash(), manifest_hash, backend->identity()};

  RunSummary summary;
  summary.total = tasks.size();
  std::atomic<std::size_t> next{0}, skipped{0};
  std::mutex error_mutex;
  std::exception_ptr io_error;

  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& task = tasks[i];
      const auto path = trace_dir / (task.id + ".json");
      if (fs::exists(path)) {
        if (nlohmann::json::accept(read_file(path))) {
          ++skipped;
          continue;
        }
      }
      PipelineTrace trace;
      try {
        if (feasibility_only) {
          trace = pipeline.check_only(task.instruction, *backend);
        } else {
          trace = pipeline.run(task.instruction, init_world(task, bank), *backend, &task);
        }
      } catch (const std::exception& e) {
        trace.instruction = task.instruction;
        trace.errors.push_back(std::string("setup: ") + e.what());
      }
      trace.task_id = task.id;
      auto j = to_json(trace);
      j["run"] = meta.to_json();
      try {
        write_file(path, j.dump(2) + "\n");
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!io_error) io_error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.parallelism, tasks.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (io_error) std::rethrow_exception(io_error);
  summary.skipped = skipped;

  std::vector<nlohmann::json> merged;
  for (const auto& task : tasks) {
    auto j = read_json(trace_dir / (task.id + ".json"));
    if (!j.value("errors", nlohmann::json::array()).empty()) ++summary.with_errors;
    merged.push_back(std::move(j));
  }
  write_file(out / "traces.jsonl", to_jsonl(merged));
  nlohmann::json run{{"config", config.to_json()},
                     {"config_hash", meta.config_hash},
                     {"dataset_manifest_hash", meta.dataset_manifest_hash},
                     {"backend", meta.backend},
                     {"pipeline", nlohmann::json::parse(pipeline.identity())},
                     {"feasibility_only", feasibility_only},
                     {"tasks", summary.total},
                     {"tasks_with_errors", summary.with_errors}};
  write_file(out / "run.json", run.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// eval

namespace {

bool is_feasibility_dataset(const std::vector<TaskInstance>& tasks) {
  if (tasks.empty()) return false;
  for (const auto& t : tasks)
    if (!t.metadata.contains("expected_verdict")) return false;
  return true;
}

nlohmann::json eval_feasibility(const std::vector<TaskInstance>& tasks, const fs::path& trace_dir, const Meta& meta,
                                const fs::path& out) {
  std::size_t correct = 0, tp = 0, fp = 0, tn = 0, fn = 0, missing = 0;
  std::vector<nlohmann::json> rows;
  for (const auto& task : tasks) {
    const auto path = trace_dir / (task.id + ".json");
    std::string predicted = "missing";
    if (fs::exists(path)) {
      const auto j = read_json(path);
      if (j.contains("verdict") && j["verdict"].is_string()) predicted = j["verdict"].get<std::string>();
    }
    if (predicted == "missing") ++missing;
    const std::string expected = task.metadata.at("expected_verdict");
    const bool ok = predicted == expected;
    correct += ok;
    if (expected == "Feasible") (predicted == "Feasible" ? tp : fn)++;
    else (predicted == "Feasible" ? fp : tn)++;
    rows.push_back({{"task_id", task.id}, {"expected", expected}, {"predicted", predicted}, {"correct", ok}});
  }
  const double accuracy = tasks.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(tasks.size());
  nlohmann::json report{{"meta", meta.to_json()},
                        {"kind", "feasibility"},
                        {"accuracy", accuracy},
                        {"correct", correct},
                        {"total", tasks.size()},
                        {"missing", missing},
                        {"confusion", {{"feasible_as_feasible", tp}, {"feasible_as_not", fn},
                                       {"infeasible_as_feasible", fp}, {"infeasible_as_not", tn}}}};
  fs::create_directories(out);
  write_file(out / "records.jsonl", to_jsonl(rows));
  write_file(out / "feasibility.json", report.dump(2) + "\n");
  write_file(out / "report.json", report.dump(2) + "\n");
  return report;
}

std::string group_csv(const EvalReport& report, const std::string& key,
                      const std::map<std::string, std::pair<std::size_t, std::size_t>>& sim, const Meta& meta) {
  std::ostringstream out;
  out << meta.comment() << key;
  for (auto name : kMetricNames) out << ',' << name;
  out << ",sim_success,count,parse_failure_rate\n";
  if (auto it = report.groups.find(key); it != report.groups.end()) {
    for (const auto& [value, stats] : it->second) {
      out << value;
      for (double m : stats.means) out << ',' << fixed(m, 6);
      const auto& [ok, n] = sim.at(value);
      out << ',' << fixed(n == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(n), 6) << ',' << stats.count
          << ',' << fixed(stats.parse_failure_rate, 6) << '\n';
    }
  }
  return out.str();
}

}  // namespace

nlohmann::json cmd_eval(const EvalOptions& o) {
  const auto tasks = load_dataset(o.dataset);
  const fs::path trace_dir = o.run_dir / "traces";
  if (!fs::is_directory(trace_dir)) throw ConfigError("no traces under " + o.run_dir.string());
  const fs::path out = o.out.empty() ? o.run_dir : o.out;
  Meta meta = run_meta(o.run_dir);
  meta.dataset_manifest_hash = manifest_hash_for(o.dataset);

  if (is_feasibility_dataset(tasks)) return eval_feasibility(tasks, trace_dir, meta, out);

  const SkillRegistry registry = registry_named(o.registry);
  const VocabBank bank = bank_at(o.bank);
  std::vector<EvalRecord> records;
  std::vector<nlohmann::json> rows;
  std::map<std::string, std::map<std::string, std::pair<std::size_t, std::size_t>>> sim;
  std::size_t sim_ok = 0, missing = 0;
  for (const auto& task : tasks) {
    if (!task.gt_plan) throw ConfigError("task " + task.id + " has no ground-truth plan");
    Plan pred;
    bool parse_ok = false;
    const auto path = trace_dir / (task.id + ".json");
    if (fs::exists(path)) {
      const auto trace = trace_from_json(read_json(path), registry);
      pred = trace.final_plan;
      parse_ok = trace.parse_ok;
    } else {
      ++missing;
    }
    auto record = evaluate(task.id, pred, *task.gt_plan, parse_ok);
    record.metadata["length"] = std::to_string(task.gt_plan->length());
    record.metadata["task_class"] = std::string(to_string(task.task_class));

    const auto world = init_world(task, bank);
    const auto exec = execute_plan(world, pred);
    const bool success = exec.outcome.success && goal_satisfied(exec.final_state, task);
    sim_ok += success;
    for (const auto& key : {"length", "task_class"}) {
      auto& [ok, n] = sim[key][record.metadata[key]];
      ok += success;
      ++n;
    }
    auto row = to_json(record);
    row["sim_success"] = success;
    row["pred_plan"] = pred.empty() && !pred.terminated ? "" : render_plan(pred);
    rows.push_back(std::move(row));
    records.push_back(std::move(record));
  }
  if (records.empty()) throw ConfigError("dataset is empty");

  const std::vector<std::string> keys{"length", "task_class"};
  const EvalReport report = aggregate(records, keys);
  nlohmann::json sim_json{{"overall", static_cast<double>(sim_ok) / static_cast<double>(records.size())}};
  for (const auto& [key, values] : sim) {
    nlohmann::json by = nlohmann::json::object();
    for (const auto& [value, counts] : values)
      by[value] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    sim_json[key == "length" ? "by_length" : "by_task_class"] = by;
  }
  nlohmann::json doc{{"meta", meta.to_json()},
                     {"kind", "plans"},
                     {"tasks", records.size()},
                     {"missing_traces", missing},
                     {"metrics", to_json(report)},
                     {"sim_success", sim_json}};

  fs::create_directories(out);
  write_file(out / "records.jsonl", to_jsonl(rows));
  write_file(out / "report.json", doc.dump(2) + "\n");
  write_file(out / "report.csv", meta.comment() + to_csv(report));
  write_file(out / "by_length.csv", group_csv(report, "length", sim["length"], meta));
  write_file(out / "by_class.csv", group_csv(report, "task_class", sim["task_class"], meta));
  return doc;
}

// ---------------------------------------------------------------------------
// report

namespace {

struct Column {
  std::string label;
  nlohmann::json stats;
  double sim = 0.0;
};

std::vector<Column> columns_of(const nlohmann::json& report) {
  std::vector<Column> cols;
  const auto& metrics = report.at("metrics");
  const auto& sim = report.at("sim_success");
  if (metrics.at("groups").contains("length")) {
    for (const auto& row : metrics["groups"]["length"]) {
      const auto v = row.at("value").get<std::string>();
      cols.push_back({v, row, sim.at("by_length").value(v, 0.0)});
    }
  }
  cols.push_back({"all", metrics.at("overall"), sim.at("overall").get<double>()});
  return cols;
}

const std::array<std::pair<std::string_view, std::string_view>, 6> kLabels{
    {{"em_a", "EM-A"}, {"lcss_a", "LCSS-A"}, {"lcsa_a", "LCSA-A"}, {"em_p", "EM-P"}, {"lcss_p", "LCSS-P"},
     {"lcsa_p", "LCSA-P"}}};

std::string feasibility_summary(const nlohmann::json& r, const nlohmann::json* base) {
  std::string s = "feasibility accuracy: " + fixed(r.at("accuracy").get<double>()) + " (" +
                  std::to_string(r.at("correct").get<std::size_t>()) + "/" +
                  std::to_string(r.at("total").get<std::size_t>()) + ")";
  if (base != nullptr && base->value("kind", "") == "feasibility")
    s += " delta " + signed_fixed(r["accuracy"].get<double>() - (*base)["accuracy"].get<double>());
  return s + "\n";
}

}  // namespace

std::string render_table(const nlohmann::json& report, const nlohmann::json* baseline) {
  if (report.value("kind", "") == "feasibility") return feasibility_summary(report, baseline);
  const auto cols = columns_of(report);
  std::vector<Column> base_cols;
  if (baseline != nullptr && baseline->value("kind", "") == "plans") base_cols = columns_of(*baseline);
  auto base_for = [&](const std::string& label) -> const Column* {
    for (const auto& c : base_cols)
      if (c.label == label) return &c;
    return nullptr;
  };
  const int width = base_cols.empty() ? 7 : 15;

  std::ostringstream out;
  out << std::left << std::setw(8) << "length" << std::right;
  for (const auto& c : cols) out << std::setw(width) << c.label;
  out << '\n';
  auto emit = [&](std::string_view label, auto value_of) {
    out << std::left << std::setw(8) << label << std::right;
    for (const auto& c : cols) {
      std::string cell = fixed(value_of(c));
      if (const Column* b = base_for(c.label); b != nullptr) cell += " (" + signed_fixed(value_of(c) - value_of(*b)) + ")";
      out << std::setw(width) << cell;
    }
    out << '\n';
  };
  for (const auto& [key, label] : kLabels)
    emit(label, [key = std::string(key)](const Column& c) { return c.stats.at(key).get<double>(); });
  emit("SIM", [](const Column& c) { return c.sim; });
  out << std::left << std::setw(8) << "n" << std::right;
  for (const auto& c : cols) out << std::setw(width) << c.stats.at("count").get<std::size_t>();
  out << '\n';
  return out.str();
}

std::string cmd_report(const fs::path& eval_dir, const std::optional<fs::path>& compare_dir) {
  const auto path = eval_dir / "report.json";
  if (!fs::exists(path)) throw ConfigError("no report.json under " + eval_dir.string());
  const auto report = read_json(path);
  std::optional<nlohmann::json> baseline;
  if (compare_dir) {
    const auto other = *compare_dir / "report.json";
    if (!fs::exists(other)) throw ConfigError("no report.json under " + compare_dir->string());
    baseline = read_json(other);
  }
  const std::string table = render_table(report, baseline ? &*baseline : nullptr);

  std::ostringstream md;
  md << "# Evaluation report\n\n";
  const auto& meta = report.at("meta");
  md << "- config hash: `" << meta.value("config_hash", "") << "`\n";
  md << "- dataset manifest hash: `" << meta.value("dataset_manifest_hash", "") << "`\n";
  md << "- backend: `" << meta.value("backend", "") << "`\n\n";
  if (report.value("kind", "") == "feasibility") {
    md << table;
  } else {
    const auto cols = columns_of(report);
    md << "| metric |";
    for (const auto& c : cols) md << ' ' << c.label << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) md << "---:|";
    md << '\n';
    for (const auto& [key, label] : kLabels) {
      md << "| " << label << " |";
      for (const auto& c : cols) md << ' ' << fixed(c.stats.at(std::string(key)).get<double>()) << " |";
      md << '\n';
    }
    md << "| SIM |";
    for (const auto& c : cols) md << ' ' << fixed(c.sim) << " |";
    md << "\n| n |";
    for (const auto& c : cols) md << ' ' << c.stats.at("count").get<std::size_t>() << " |";
    md << '\n';
    if (baseline) md << "\nCompared against `" << compare_dir->filename().string() << "`:\n\n```\n" << table << "```\n";
  }
  write_file(eval_dir / "report.md", md.str());
  return table;
}

// ---------------------------------------------------------------------------
// Command line

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Hierarchical LLM planner: dataset generation, pipeline runs and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 42;
  std::string out;
  app.add_option("--config", config_path, "key = value config file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  auto* out_opt = app.add_option("--out", out, "output directory");

  // gen
  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a task dataset");
  gen_cmd->add_option("--suite", gen.suite, "core | lengths | ambiguous | feasibility | smoke");
  gen_cmd->add_option("--per-class", gen.per_class, "tasks per class (core)");
  gen_cmd->add_option("--per-length", gen.per_length, "tasks per length (lengths)");
  gen_cmd->add_option("--count", gen.count, "number of tasks (ambiguous)");
  gen_cmd->add_option("--lengths", gen.lengths, "comma-separated plan lengths")->delimiter(',');
  gen_cmd->add_option("--bank", gen.bank, "vocabulary bank file");

  // run / feasibility share the planner flags
  std::vector<std::string> overrides;
  std::string dataset, script, base_url, model, mode, selection, registry, prompts, trace_log;
  std::size_t parallelism = 0, shots = 0;
  double threshold = -1.0;
  bool no_grounding = false, no_feasibility = false, no_execute = false;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "dataset.jsonl");
    cmd->add_option("--script", script, "scripted backend fixture (offline)");
    cmd->add_option("--base-url", base_url, "chat-completions server");
    cmd->add_option("--model", model, "model name sent to the server");
    cmd->add_option("--registry", registry, "default | alfred | registry file");
    cmd->add_option("--prompts", prompts, "prompt directory");
    cmd->add_option("--trace-log", trace_log, "JSONL log of every chat exchange");
    cmd->add_option("--parallelism", parallelism, "concurrent tasks");
    cmd->add_option("--set", overrides, "extra key=value settings");
  };
  auto* run_cmd = app.add_subcommand("run", "run the planner over a dataset");
  add_run_flags(run_cmd);
  run_cmd->add_option("--mode", mode, "help | llp_only");
  run_cmd->add_option("--selection", selection, "similarity | fixed");
  run_cmd->add_option("--shots", shots, "LLP exemplars per prompt");
  run_cmd->add_option("--grounding-threshold", threshold, "cosine acceptance threshold");
  run_cmd->add_flag("--no-grounding", no_grounding, "keep LLP arguments as generated");
  run_cmd->add_flag("--no-feasibility", no_feasibility, "skip the feasibility agent");
  run_cmd->add_flag("--no-execute", no_execute, "do not simulate the final plan");
  auto* feas_cmd = app.add_subcommand("feasibility", "feasibility verdicts over a dataset, then accuracy");
  add_run_flags(feas_cmd);

  // eval
  std::string run_dir, eval_bank, eval_registry = "default";
  auto* eval_cmd = app.add_subcommand("eval", "score traces against ground truth");
  eval_cmd->add_option("--dataset", dataset, "dataset.jsonl")->required();
  eval_cmd->add_option("--run", run_dir, "run directory (defaults to --out)");
  eval_cmd->add_option("--bank", eval_bank, "vocabulary bank file");
  eval_cmd->add_option("--registry", eval_registry, "default | alfred | registry file");

  // report
  std::string report_dir, compare_dir;
  auto* report_cmd = app.add_subcommand("report", "print the metrics table and write report.md");
  report_cmd->add_option("--in", report_dir, "evaluation directory (defaults to --out)");
  report_cmd->add_option("--compare", compare_dir, "second evaluation directory for deltas");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    if (seed_opt->count() > 0) config.seed = seed;
    if (out_opt->count() > 0) config.out = out;

    if (gen_cmd->parsed()) {
      gen.seed = config.seed;
      gen.out = config.out;
      if (gen.bank.empty()) gen.bank = config.bank;
      const auto manifest = cmd_gen(gen);
      std::cout << "wrote " << manifest["counts"]["total"].get<std::size_t>() << " tasks to "
                << (gen.out / "dataset.jsonl").string() << '\n';
      return 0;
    }

    if (run_cmd->parsed() || feas_cmd->parsed()) {
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        config.set(trim(kv.substr(0, eq)), kv.substr(eq + 1));
      }
      if (!dataset.empty()) config.dataset = dataset;
      if (!script.empty()) config.script = script;
      if (!base_url.empty()) config.gateway.base_url = base_url;
      if (!model.empty()) config.gateway.model = model;
      if (!registry.empty()) config.registry = registry;
      if (!prompts.empty()) config.prompts = prompts;
      if (!trace_log.empty()) config.trace_log = trace_log;
      if (parallelism > 0) config.parallelism = parallelism;
      if (!mode.empty()) config.set("mode", mode);
      if (!selection.empty()) config.set("selection", selection);
      if (shots > 0) config.llp_shots = shots;
      if (threshold >= 0.0) config.grounding_threshold = threshold;
      if (no_grounding) config.grounding = false;
      if (no_feasibility) config.feasibility_check = false;
      if (no_execute) config.execute = false;

      const bool feas_only = feas_cmd->parsed();
      const auto summary = cmd_run(config, nullptr, feas_only);
      std::cout << "traces: " << summary.total << " (" << summary.skipped << " resumed, " << summary.with_errors
                << " with errors) in " << config.out << '\n';
      if (feas_only) {
        const auto report = cmd_eval({config.dataset, config.out, config.out, config.bank, config.registry});
        if (report.value("kind", "") == "feasibility")
          std::cout << "accuracy: " << fixed(report["accuracy"].get<double>()) << '\n';
      }
      return summary.with_errors > 0 ? 1 : 0;
    }

    if (eval_cmd->parsed()) {
      const fs::path from = run_dir.empty() ? fs::path(config.out) : fs::path(run_dir);
      const fs::path to = out_opt->count() > 0 && !run_dir.empty() ? fs::path(config.out) : from;
      const auto report = cmd_eval({dataset, from, to, eval_bank.empty() ? config.bank : eval_bank, eval_registry});
      if (report.value("kind", "") == "feasibility") {
        std::cout << "accuracy: " << fixed(report["accuracy"].get<double>()) << '\n';
      } else {
        std::cout << "evaluated " << report["tasks"].get<std::size_t>() << " tasks, P-EM "
                  << fixed(report["metrics"]["overall"]["em_p"].get<double>()) << ", sim success "
                  << fixed(report["sim_success"]["overall"].get<double>()) << '\n';
      }
      return 0;
    }

    if (report_cmd->parsed()) {
      const fs::path dir = report_dir.empty() ? fs::path(config.out) : fs::path(report_dir);
      std::cout << cmd_report(dir, compare_dir.empty() ? std::nullopt : std::optional<fs::path>(compare_dir));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("help_cli");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace help::cli
