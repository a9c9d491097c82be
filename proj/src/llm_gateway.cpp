#include "help/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "help/util.hpp"

namespace help {

namespace {

struct UrlParts {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

bool retryable(const LlmError& e) {
  switch (e.kind()) {
    case LlmError::Kind::Timeout:
    case LlmError::Kind::Transport: return true;
    case LlmError::Kind::BadStatus: return e.status() == 408 || e.status() == 429 || e.status() >= 500;
    default: return false;
  }
}

std::string excerpt(std::string_view s, std::size_t n = 200) {
  return s.size() <= n ? std::string(s) : std::string(s.substr(0, n)) + "...";
}

}  // namespace

std::string_view to_string(LlmError::Kind kind) {
  switch (kind) {
    case LlmError::Kind::Timeout: return "Timeout";
    case LlmError::Kind::Transport: return "TransportError";
    case LlmError::Kind::BadStatus: return "BadStatus";
    case LlmError::Kind::ScriptMiss: return "ScriptMiss";
    case LlmError::Kind::InvalidRequest: return "InvalidRequest";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ChatRequest

const std::string& ChatRequest::last_user_content() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == "user") return it->content;
  static const std::string kEmpty;
  return kEmpty;
}

nlohmann::json ChatRequest::to_json() const {
  auto msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json j{{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}};
  if (!stop.empty()) j["stop"] = stop;
  return j;
}

std::string ChatRequest::hash() const { return json_hash(to_json()); }

// ---------------------------------------------------------------------------
// HTTP backend

HttpChatBackend::HttpChatBackend(GatewayConfig config) : config_(std::move(config)) {
  if (config_.concurrency < 1) config_.concurrency = 1;
  if (config_.retries < 0) config_.retries = 0;
}

std::string HttpChatBackend::identity() const { return "http:" + config_.base_url + "#" + config_.model; }

ChatRequest HttpChatBackend::with_defaults(ChatRequest request) const {
  const ChatRequest blank;
  if (request.model.empty()) request.model = config_.model;
  if (request.temperature == blank.temperature) request.temperature = config_.temperature;
  if (request.max_tokens == blank.max_tokens) request.max_tokens = config_.max_tokens;
  if (request.timeout_ms == blank.timeout_ms) request.timeout_ms = config_.timeout_ms;
  return request;
}

ChatResponse HttpChatBackend::complete(const ChatRequest& raw) {
  if (raw.messages.empty()) throw LlmError(LlmError::Kind::InvalidRequest, "request has no messages");
  if (raw.temperature < 0.0) throw LlmError(LlmError::Kind::InvalidRequest, "temperature must be >= 0");
  const ChatRequest request = with_defaults(raw);

  {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < config_.concurrency; });
    ++in_flight_;
  }
  struct Release {
    HttpChatBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};

  int delay = config_.backoff_ms;
  for (int attempt_no = 0;; ++attempt_no) {
    try {
      return attempt(request);
    } catch (const LlmError& e) {
      if (!retryable(e) || attempt_no >= config_.retries) throw;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    delay *= 2;
  }
}

ChatResponse HttpChatBackend::attempt(const ChatRequest& request) {
  const auto url = split_url(config_.base_url);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(request.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(url.prefix + "/v1/chat/completions", headers, request.to_json().dump(), "application/json");
  const double elapsed =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && elapsed >= 0.9 * request.timeout_ms);
    throw LlmError(timed_out ? LlmError::Kind::Timeout : LlmError::Kind::Transport,
                   "chat request to " + config_.base_url + " failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw LlmError(LlmError::Kind::BadStatus,
                   "chat endpoint returned " + std::to_string(res->status) + ": " + excerpt(res->body), res->status);
  }

  ChatResponse out;
  out.latency_ms = elapsed;
  try {
    const auto doc = nlohmann::json::parse(res->body);
    const auto& choice = doc.at("choices").at(0);
    out.content = choice.at("message").at("content").get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
      out.finish_reason = choice["finish_reason"].get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
      const auto& usage = doc["usage"];
      if (usage.contains("prompt_tokens")) out.prompt_tokens = usage["prompt_tokens"].get<int>();
      if (usage.contains("completion_tokens")) out.completion_tokens = usage["completion_tokens"].get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw LlmError(LlmError::Kind::BadStatus, std::string("malformed completion body: ") + e.what(), res->status);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules, std::string name)
    : rules_(std::move(rules)), name_(std::move(name)) {}

ScriptedBackend ScriptedBackend::from_json(const nlohmann::json& doc, std::string name) {
  std::vector<Rule> rules;
  for (const auto& r : doc.at("rules")) {
    rules.push_back({r.value("contains", ""), r.value("system_contains", ""), r.value("prompt_hash", ""),
                     r.at("response").get<std::string>()});
  }
  return ScriptedBackend(std::move(rules), doc.value("name", name));
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path) {
  return from_json(nlohmann::json::parse(read_file(path)), "scripted:" + path.filename().string());
}

ScriptedBackend ScriptedBackend::from_trace_log(const std::filesystem::path& path) {
  std::vector<Rule> rules;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("response")) continue;
    rules.push_back({"", "", row.at("request_hash").get<std::string>(),
                     row.at("response").at("content").get<std::string>()});
  }
  return ScriptedBackend(std::move(rules), "replay:" + path.filename().string());
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  const std::string& user = request.last_user_content();
  std::string system;
  for (const auto& m : request.messages)
    if (m.role == "system") system += m.content;
  std::string hash;
  for (const auto& rule : rules_) {
    if (!rule.prompt_hash.empty()) {
      if (hash.empty()) hash = request.hash();
      if (rule.prompt_hash != hash) continue;
    }
    if (!rule.contains.empty() && user.find(rule.contains) == std::string::npos) continue;
    if (!rule.system_contains.empty() && system.find(rule.system_contains) == std::string::npos) continue;
    ChatResponse out;
    out.content = rule.response;
    out.finish_reason = "stop";
    return out;
  }
  throw LlmError(LlmError::Kind::ScriptMiss, "no scripted rule matches: " + excerpt(user));
}

// ---------------------------------------------------------------------------
// Tracing

TracingBackend::TracingBackend(std::shared_ptr<ChatBackend> inner, const std::filesystem::path& log_path)
    : inner_(std::move(inner)) {
  if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
  log_.open(log_path, std::ios::app);
  if (!log_) throw std::runtime_error("cannot open trace log " + log_path.string());
}

void TracingBackend::append(const nlohmann::json& row) {
  std::lock_guard lock(mutex_);
  log_ << row.dump() << '\n';
  log_.flush();
}

ChatResponse TracingBackend::complete(const ChatRequest& request) {
  const auto ts = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  nlohmann::json row{{"ts_ms", ts}, {"backend", inner_->identity()}, {"request", request.to_json()},
                     {"request_hash", request.hash()}};
  try {
    ChatResponse res = inner_->complete(request);
    nlohmann::json r{{"content", res.content}, {"finish_reason", res.finish_reason}, {"latency_ms", res.latency_ms}};
    if (res.prompt_tokens) r["prompt_tokens"] = *res.prompt_tokens;
    if (res.completion_tokens) r["completion_tokens"] = *res.completion_tokens;
    row["response"] = std::move(r);
    append(row);
    return res;
  } catch (const LlmError& e) {
    row["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}, {"status", e.status()}};
    append(row);
    throw;
  }
}

}  // namespace help
