#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace help {

struct ChatMessage {
  std::string role;  // system, user or assistant
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::vector<std::string> stop;
  std::string model;
  int timeout_ms = 60000;

  /// The last user message (what scripted rules match against).
  const std::string& last_user_content() const;
  nlohmann::json to_json() const;
  /// Hash of the request body that would be sent; identical requests hash identically.
  std::string hash() const;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

class LlmError : public std::runtime_error {
 public:
  enum class Kind { Timeout, Transport, BadStatus, ScriptMiss, InvalidRequest };

  LlmError(Kind kind, std::string message, int status = 0)
      : std::runtime_error(std::move(message)), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

std::string_view to_string(LlmError::Kind kind);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws LlmError.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string identity() const = 0;
};

struct GatewayConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model = "local-model";
  double temperature = 0.0;
  int max_tokens = 512;
  int timeout_ms = 60000;
  int retries = 3;
  int backoff_ms = 200;  // doubles after every retry
  int concurrency = 4;
};

/// POSTs to base_url + /v1/chat/completions. Transport failures and 408/429/5xx
/// are retried with exponential backoff; other statuses fail immediately.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(GatewayConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string identity() const override;

  /// Fills model/temperature/max_tokens/timeout from the config where the request leaves defaults.
  ChatRequest with_defaults(ChatRequest request) const;

 private:
  ChatResponse attempt(const ChatRequest& request);

  GatewayConfig config_;
  std::mutex mutex_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

/// Deterministic offline backend: the first matching rule answers.
class ScriptedBackend final : public ChatBackend {
 public:
  struct Rule {
    std::string contains;         // substring of the last user message; empty matches any
    std::string system_contains;  // substring of the system message; empty matches any
    std::string prompt_hash;      // when set, must equal ChatRequest::hash()
    std::string response;
  };

  explicit ScriptedBackend(std::vector<Rule> rules, std::string name = "scripted");

  static ScriptedBackend from_json(const nlohmann::json& doc, std::string name = "scripted");
  static ScriptedBackend load(const std::filesystem::path& path);
  /// Rules keyed by request hash, rebuilt from a trace log written by TracingBackend.
  static ScriptedBackend from_trace_log(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& request) override;
  std::string identity() const override { return name_; }
  const std::vector<Rule>& rules() const { return rules_; }

 private:
  std::vector<Rule> rules_;
  std::string name_;
};

/// Appends every request and its response (or error) to a JSONL log.
class TracingBackend final : public ChatBackend {
 public:
  TracingBackend(std::shared_ptr<ChatBackend> inner, const std::filesystem::path& log_path);

  ChatResponse complete(const ChatRequest& request) override;
  std::string identity() const override { return inner_->identity(); }

 private:
  void append(const nlohmann::json& row);

  std::shared_ptr<ChatBackend> inner_;
  std::mutex mutex_;
  std::ofstream log_;
};

}  // namespace help
