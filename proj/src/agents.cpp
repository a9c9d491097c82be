#include "help/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "help/util.hpp"

namespace help {

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

/// The literal text before {{instruction}} on its line, e.g. "Instruction:".
std::string query_prefix(const PromptTemplate& prompt) {
  const auto at = prompt.user_template.find("{{instruction}}");
  if (at == std::string::npos) return {};
  const auto line_start = prompt.user_template.rfind('\n', at);
  return trim(prompt.user_template.substr(line_start == std::string::npos ? 0 : line_start + 1,
                                          at - (line_start == std::string::npos ? 0 : line_start + 1)));
}

ChatRequest finish(ChatRequest request, const PromptTemplate& prompt) {
  if (const auto prefix = query_prefix(prompt); !prefix.empty()) request.stop.push_back("\n" + prefix);
  return request;
}

std::string complete(ChatBackend& backend, const ChatRequest& request, std::string_view agent,
                     std::vector<Exchange>* log) {
  auto response = backend.complete(request);
  if (log != nullptr) log->push_back({std::string(agent), request, response.content});
  return response.content;
}

/// Cut the completion where the model starts writing the next query itself.
std::string_view until_prefix(std::string_view text, std::string_view prefix) {
  if (prefix.empty()) return text;
  std::size_t from = 0;
  while (from <= text.size()) {
    const auto nl = text.find('\n', from);
    const auto line = text.substr(from, nl == std::string_view::npos ? std::string_view::npos : nl - from);
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string_view::npos && line.substr(first).starts_with(prefix)) return text.substr(0, from);
    if (nl == std::string_view::npos) break;
    from = nl + 1;
  }
  return text;
}

std::map<std::string, double> word_features(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '_' || u >= 0x80) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  std::map<std::string, double> tf;
  for (std::size_t i = 0; i < words.size(); ++i) {
    tf[words[i]] += 1.0;
    if (i + 1 < words.size()) tf[words[i] + ' ' + words[i + 1]] += 1.0;
  }
  return tf;
}

std::optional<StepFailure> step_failure_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  static const std::map<std::string, FailureReason> kReasons{
      {"HandFull", FailureReason::HandFull},           {"HandEmpty", FailureReason::HandEmpty},
      {"ObjectNotHere", FailureReason::ObjectNotHere}, {"NoSuchObject", FailureReason::NoSuchObject},
      {"NoSuchLocation", FailureReason::NoSuchLocation}, {"Injected", FailureReason::Injected}};
  return StepFailure{j.at("step").get<std::size_t>(), kReasons.at(j.at("reason").get<std::string>()),
                     j.value("message", "")};
}

Plan plan_from_text(const std::string& text, const SkillRegistry& registry) {
  if (trim(text).empty()) return {};
  return parse_plan(text, registry);
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompts

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
  PromptTemplate t;
  t.name = j.at("name").get<std::string>();
  t.version = j.value("version", "1");
  t.profile = j.at("profile").get<std::string>();
  t.user_template = j.at("user_template").get<std::string>();
  t.objects_template = j.value("objects_template", "");
  for (const auto& e : j.value("exemplars", nlohmann::json::array())) {
    Exemplar ex;
    ex.id = e.at("id").get<std::string>();
    ex.input = e.at("input").get<std::string>();
    ex.objects = e.value("objects", "");
    ex.output = e.at("output").get<std::string>();
    ex.tags = e.value("tags", std::map<std::string, std::string>{});
    t.exemplars.push_back(std::move(ex));
  }
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  return from_json(nlohmann::json::parse(read_file(path)));
}

std::string PromptTemplate::render_user(std::string_view instruction, std::string_view objects) const {
  std::string block;
  if (!objects.empty()) {
    block = objects_template;
    replace_all(block, "{{objects}}", objects);
  }
  std::string out = user_template;
  replace_all(out, "{{objects_block}}", block);
  replace_all(out, "{{instruction}}", instruction);
  return out;
}

std::string PromptTemplate::render_profile(const SkillRegistry& registry) const {
  std::string out = profile;
  replace_all(out, "{{skills}}", describe_skills(registry));
  return out;
}

ChatRequest PromptTemplate::build(std::string_view instruction, std::string_view objects,
                                  const std::vector<Exemplar>& shots, const SkillRegistry& registry) const {
  ChatRequest request;
  request.messages.push_back({"system", render_profile(registry)});
  for (const auto& shot : shots) {
    request.messages.push_back({"user", render_user(shot.input, shot.objects)});
    request.messages.push_back({"assistant", shot.output});
  }
  request.messages.push_back({"user", render_user(instruction, objects)});
  return request;
}

std::string describe_skills(const SkillRegistry& registry) {
  std::vector<std::string> parts;
  bool has_done = false;
  for (const auto& skill : registry.skills()) {
    has_done = has_done || skill.name == kDoneSkill;
    std::vector<std::string> params;
    for (auto role : skill.params) params.emplace_back(role == ParamRole::Object ? "object" : "location");
    parts.push_back(skill.name + "(" + join(params, ", ") + ")");
  }
  if (!has_done) parts.push_back(std::string(kDoneSkill) + "()");
  return join(parts, ", ");
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  return {PromptTemplate::load(dir / "hlp.json"), PromptTemplate::load(dir / "llp.json"),
          PromptTemplate::load(dir / "feedback.json"), PromptTemplate::load(dir / "feasibility.json")};
}

PromptSet PromptSet::load_default() { return load(data_dir() / "prompts"); }

// ---------------------------------------------------------------------------
// Exemplar selection

double TfCosineScorer::score(std::string_view a, std::string_view b) const {
  const auto fa = word_features(a), fb = word_features(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : fa) {
    na += v * v;
    if (auto it = fb.find(k); it != fb.end()) dot += v * it->second;
  }
  for (const auto& [_, v] : fb) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

double EmbeddingScorer::score(std::string_view a, std::string_view b) const {
  const auto v = embedder_->embed_all({std::string(a), std::string(b)});
  return cosine(v[0], v[1]);
}

std::vector<Exemplar> select_exemplars(std::string_view query, const std::vector<Exemplar>& pool, std::size_t k,
                                       const SimilarityScorer* scorer) {
  if (k > pool.size())
    throw PoolTooSmall("asked for " + std::to_string(k) + " exemplars from a pool of " + std::to_string(pool.size()));
  if (scorer == nullptr) return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};

  std::vector<double> scores;
  scores.reserve(pool.size());
  for (const auto& ex : pool) scores.push_back(scorer->score(query, ex.input));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pool[a].id < pool[b].id;
  });
  std::vector<Exemplar> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[order[i]]);
  return out;
}

// ---------------------------------------------------------------------------
// HLP and feedback

std::vector<std::string> parse_subtasks(std::string_view completion) {
  std::vector<std::string> out;
  for (const auto& raw : split_lines(completion)) {
    std::string line = trim(raw);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')' || line[i] == ':')) {
      line = trim(line.substr(i + 1));
    } else if (line.starts_with("- ") || line.starts_with("* ")) {
      line = trim(line.substr(2));
    } else if (line.starts_with("•")) {
      line = trim(line.substr(3));
    }
    if (line.empty() || line.back() == ':') continue;
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<std::string> hlp_decompose(std::string_view instruction, const std::vector<std::string>& feedback_objects,
                                       ChatBackend& backend, const PromptTemplate& prompt,
                                       const SkillRegistry& registry, std::vector<Exchange>* log) {
  const auto request = finish(prompt.build(instruction, join(feedback_objects, ", "), prompt.exemplars, registry), prompt);
  const auto text = complete(backend, request, "hlp", log);
  auto subtasks = parse_subtasks(until_prefix(text, query_prefix(prompt)));
  if (subtasks.empty()) throw EmptyDecomposition("high-level planner returned no subtasks for: " + std::string(instruction));
  return subtasks;
}

std::optional<std::string> parse_feedback_query(std::string_view completion) {
  std::string line;
  for (const auto& l : split_lines(completion)) {
    line = trim(l);
    if (!line.empty()) break;
  }
  if (to_lower(line).starts_with("query:")) line = trim(line.substr(6));
  while (!line.empty() && (line.back() == '.' || line.back() == '"' || line.back() == '\'')) line.pop_back();
  while (!line.empty() && (line.front() == '"' || line.front() == '\'')) line.erase(0, 1);
  line = normalize_arg(line);
  if (line.empty() || line == "none" || line == "no" || line == "n/a" || line == "nothing" || line == "-")
    return std::nullopt;
  return line;
}

std::optional<std::string> feedback_query(std::string_view instruction, ChatBackend& backend,
                                          const PromptTemplate& prompt, const SkillRegistry& registry,
                                          std::vector<Exchange>* log) {
  const auto request = finish(prompt.build(instruction, "", prompt.exemplars, registry), prompt);
  return parse_feedback_query(complete(backend, request, "feedback", log));
}

// ---------------------------------------------------------------------------
// Feasibility

std::string_view to_string(Verdict v) { return v == Verdict::Feasible ? "Feasible" : "NotFeasible"; }

FeasibilityResult parse_verdict(std::string_view completion) {
  const std::string text = to_lower(completion);
  for (std::string_view neg : {"not feasible", "infeasible", "unfeasible", "not possible", "notfeasible"})
    if (text.find(neg) != std::string::npos) return {Verdict::NotFeasible, true};
  if (text.find("feasible") != std::string::npos) return {Verdict::Feasible, true};
  return {Verdict::NotFeasible, false};
}

FeasibilityResult check_feasibility(std::string_view instruction, ChatBackend& backend, const PromptTemplate& prompt,
                                    const SkillRegistry& registry, std::vector<Exchange>* log) {
  const auto request = finish(prompt.build(instruction, "", prompt.exemplars, registry), prompt);
  return parse_verdict(complete(backend, request, "feasibility", log));
}

// ---------------------------------------------------------------------------
// LLP

LlpResult llp_plan(std::string_view subtask, ChatBackend& backend, const PromptTemplate& prompt,
                   const std::vector<Exemplar>& shots, const SkillRegistry& registry,
                   const GroundingContext* grounding, std::vector<Exchange>* log) {
  LlpResult r;
  r.subtask = std::string(subtask);
  const auto request = finish(prompt.build(subtask, "", shots, registry), prompt);
  r.raw_text = complete(backend, request, "llp", log);
  try {
    auto parsed = parse_plan_detailed(until_prefix(r.raw_text, query_prefix(prompt)), registry);
    r.parsed = std::move(parsed.plan);
    r.warnings = std::move(parsed.warnings);
    r.parse_ok = true;
  } catch (const PlanError& e) {
    r.parse_error = e.what();
    return r;
  }
  if (grounding != nullptr) {
    auto g = ground_plan(r.parsed, registry, *grounding->objects, *grounding->locations, *grounding->embedder,
                         grounding->threshold);
    r.grounded = std::move(g.plan);
    r.decisions = std::move(g.decisions);
  } else {
    r.grounded = r.parsed;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline

HelpPipeline::HelpPipeline(PromptSet prompts, SkillRegistry registry, PipelineConfig config,
                           std::shared_ptr<const SimilarityScorer> scorer, std::shared_ptr<const Embedder> embedder)
    : prompts_(std::move(prompts)),
      registry_(std::move(registry)),
      config_(config),
      scorer_(std::move(scorer)),
      embedder_(std::move(embedder)) {
  if (config_.llp_shots > prompts_.llp.exemplars.size())
    throw PoolTooSmall("LLP pool has " + std::to_string(prompts_.llp.exemplars.size()) + " exemplars, " +
                       std::to_string(config_.llp_shots) + " requested");
}

std::string HelpPipeline::identity() const {
  nlohmann::json j{{"mode", config_.mode == PlannerMode::Help ? "help" : "llp_only"},
                   {"selection", config_.selection == ExemplarSelection::Similarity ? "similarity" : "fixed"},
                   {"llp_shots", config_.llp_shots},
                   {"grounding", config_.grounding},
                   {"grounding_threshold", config_.grounding_threshold},
                   {"feasibility_check", config_.feasibility_check},
                   {"execute", config_.execute},
                   {"scorer", scorer_->identity()},
                   {"embedder", embedder_->identity()},
                   {"prompts",
                    {prompts_.hlp.name + "@" + prompts_.hlp.version, prompts_.llp.name + "@" + prompts_.llp.version,
                     prompts_.feedback.name + "@" + prompts_.feedback.version,
                     prompts_.feasibility.name + "@" + prompts_.feasibility.version}}};
  return j.dump();
}

PipelineTrace HelpPipeline::check_only(std::string_view instruction, ChatBackend& backend) const {
  PipelineTrace t;
  t.instruction = std::string(instruction);
  try {
    const auto r = check_feasibility(instruction, backend, prompts_.feasibility, registry_, &t.exchanges);
    t.verdict = r.verdict;
    if (!r.parsed) t.warnings.push_back("unreadable feasibility verdict, treated as NotFeasible");
    t.parse_ok = r.parsed;
  } catch (const std::exception& e) {
    t.errors.push_back(std::string("feasibility: ") + e.what());
  }
  t.halted = true;
  return t;
}

PipelineTrace HelpPipeline::run(std::string_view instruction, const WorldState& world, ChatBackend& backend,
                                const TaskInstance* task) const {
  PipelineTrace t;
  t.instruction = std::string(instruction);
  if (task != nullptr) t.task_id = task->id;
  std::string stage;
  try {
    if (config_.feasibility_check) {
      stage = "feasibility";
      const auto r = check_feasibility(instruction, backend, prompts_.feasibility, registry_, &t.exchanges);
      t.verdict = r.verdict;
      if (!r.parsed) t.warnings.push_back("unreadable feasibility verdict, treated as NotFeasible");
      if (r.verdict == Verdict::NotFeasible) {
        t.halted = true;
        return t;
      }
    }

    if (config_.mode == PlannerMode::Help) {
      stage = "feedback";
      t.feedback_query = feedback_query(instruction, backend, prompts_.feedback, registry_, &t.exchanges);
      if (t.feedback_query) {
        for (const auto& info : list_objects(world, t.feedback_query)) t.feedback_objects.push_back(info.label);
        if (t.feedback_objects.empty()) t.warnings.push_back("feedback query matched no objects: " + *t.feedback_query);
      }
      stage = "hlp";
      t.subtasks = hlp_decompose(instruction, t.feedback_objects, backend, prompts_.hlp, registry_, &t.exchanges);
    } else {
      t.subtasks = {std::string(instruction)};
    }

    stage = "llp";
    std::optional<Vocabulary> objects, locations;
    GroundingContext ctx;
    if (config_.grounding) {
      objects.emplace(world.object_labels(), *embedder_);
      locations.emplace(world.locations, *embedder_);
      ctx = {embedder_.get(), &*objects, &*locations, config_.grounding_threshold};
    }
    const SimilarityScorer* scorer = config_.selection == ExemplarSelection::Similarity ? scorer_.get() : nullptr;
    for (const auto& subtask : t.subtasks) {
      const auto shots = select_exemplars(subtask, prompts_.llp.exemplars, config_.llp_shots, scorer);
      t.llp.push_back(
          llp_plan(subtask, backend, prompts_.llp, shots, registry_, config_.grounding ? &ctx : nullptr, &t.exchanges));
    }
  } catch (const std::exception& e) {
    t.errors.push_back(stage + ": " + e.what());
  }

  bool any_parsed = false;
  t.parse_ok = t.errors.empty() && !t.llp.empty();
  for (const auto& r : t.llp) {
    if (!r.parse_ok) {
      t.parse_ok = false;
      continue;
    }
    any_parsed = true;
    t.final_plan.actions.insert(t.final_plan.actions.end(), r.grounded.actions.begin(), r.grounded.actions.end());
    for (const auto& w : r.warnings) t.warnings.push_back(r.subtask + ": " + w);
  }
  t.final_plan.terminated = any_parsed;

  if (config_.execute && t.errors.empty()) {
    const auto exec = execute_plan(world, t.final_plan);
    ExecutionSummary s;
    s.success = exec.outcome.success;
    s.steps_executed = exec.outcome.steps_executed;
    s.failure = exec.outcome.failure;
    if (task != nullptr && task->gt_plan) s.goal_satisfied = exec.outcome.success && goal_satisfied(exec.final_state, *task);
    t.execution = s;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Trace serialization

nlohmann::json to_json(const PipelineTrace& t) {
  auto llp = nlohmann::json::array();
  for (const auto& r : t.llp) {
    auto decisions = nlohmann::json::array();
    for (const auto& d : r.decisions) decisions.push_back(to_json(d));
    llp.push_back({{"subtask", r.subtask},
                   {"raw_text", r.raw_text},
                   {"parse_ok", r.parse_ok},
                   {"parse_error", r.parse_error},
                   {"warnings", r.warnings},
                   {"parsed_plan", r.parse_ok ? render_plan(r.parsed) : ""},
                   {"grounded_plan", r.parse_ok ? render_plan(r.grounded) : ""},
                   {"grounding", decisions}});
  }
  nlohmann::json exec = nullptr;
  if (t.execution) {
    const auto& s = *t.execution;
    exec = {{"success", s.success}, {"steps_executed", s.steps_executed}, {"failure", nullptr},
            {"goal_satisfied", nullptr}};
    if (s.failure)
      exec["failure"] = {{"step", s.failure->step}, {"reason", to_string(s.failure->reason)},
                         {"message", s.failure->message}};
    if (s.goal_satisfied) exec["goal_satisfied"] = *s.goal_satisfied;
  }
  auto exchanges = nlohmann::json::array();
  for (const auto& x : t.exchanges)
    exchanges.push_back({{"agent", x.agent}, {"request", x.request.to_json()}, {"completion", x.completion}});

  return {{"task_id", t.task_id},
          {"instruction", t.instruction},
          {"verdict", t.verdict ? nlohmann::json(to_string(*t.verdict)) : nlohmann::json(nullptr)},
          {"halted", t.halted},
          {"feedback_query", t.feedback_query ? nlohmann::json(*t.feedback_query) : nlohmann::json(nullptr)},
          {"feedback_objects", t.feedback_objects},
          {"subtasks", t.subtasks},
          {"llp", llp},
          {"final_plan", t.final_plan.empty() && !t.final_plan.terminated ? "" : render_plan(t.final_plan)},
          {"final_length", t.final_plan.length()},
          {"parse_ok", t.parse_ok},
          {"execution", exec},
          {"errors", t.errors},
          {"warnings", t.warnings},
          {"exchanges", exchanges}};
}

PipelineTrace trace_from_json(const nlohmann::json& j, const SkillRegistry& registry) {
  PipelineTrace t;
  t.task_id = j.value("task_id", "");
  t.instruction = j.value("instruction", "");
  if (j.contains("verdict") && j["verdict"].is_string())
    t.verdict = j["verdict"].get<std::string>() == "Feasible" ? Verdict::Feasible : Verdict::NotFeasible;
  t.halted = j.value("halted", false);
  if (j.contains("feedback_query") && j["feedback_query"].is_string())
    t.feedback_query = j["feedback_query"].get<std::string>();
  t.feedback_objects = j.value("feedback_objects", std::vector<std::string>{});
  t.subtasks = j.value("subtasks", std::vector<std::string>{});
  for (const auto& r : j.value("llp", nlohmann::json::array())) {
    LlpResult l;
    l.subtask = r.value("subtask", "");
    l.raw_text = r.value("raw_text", "");
    l.parse_ok = r.value("parse_ok", false);
    l.parse_error = r.value("parse_error", "");
    l.warnings = r.value("warnings", std::vector<std::string>{});
    if (l.parse_ok) {
      l.parsed = plan_from_text(r.value("parsed_plan", ""), registry);
      l.grounded = plan_from_text(r.value("grounded_plan", ""), registry);
    }
    t.llp.push_back(std::move(l));
  }
  t.final_plan = plan_from_text(j.value("final_plan", ""), registry);
  t.parse_ok = j.value("parse_ok", false);
  if (j.contains("execution") && j["execution"].is_object()) {
    const auto& e = j["execution"];
    ExecutionSummary s;
    s.success = e.value("success", false);
    s.steps_executed = e.value("steps_executed", std::size_t{0});
    s.failure = step_failure_from_json(e.value("failure", nlohmann::json(nullptr)));
    if (e.contains("goal_satisfied") && e["goal_satisfied"].is_boolean()) s.goal_satisfied = e["goal_satisfied"].get<bool>();
    t.execution = s;
  }
  t.errors = j.value("errors", std::vector<std::string>{});
  t.warnings = j.value("warnings", std::vector<std::string>{});
  return t;
}

}  // namespace help
