#pragma once

// Provider-agnostic chat-completions access.
//
// Everything that talks to a model goes through ChatBackend. Backends:
//   HttpChatBackend   - OpenAI-style endpoint with retry/backoff and an
//                       in-flight limit; the HTTP client itself is injected
//                       (see llm_http.hpp for the cpp-httplib one).
//   ReplayBackend     - answers from a recorded transcript keyed by request
//                       fingerprint; strict mode rejects unknown requests.
//   RecordingBackend  - forwards to another backend and appends every
//                       exchange to a transcript.
//   FunctionBackend   - wraps a callable; used for scripted models in tests.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"

namespace geoloc {

enum class Role { System, User, Assistant, Tool };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

inline Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  if (s == "tool") return Role::Tool;
  throw ParseError("unknown chat role \"" + s + "\"");
}

struct ToolCall {
  std::string id;
  std::string name;
  json arguments = json::object();

  bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::vector<ToolCall> tool_calls;  // assistant messages only
  std::string tool_call_id;          // tool messages only

  bool operator==(const ChatMessage&) const = default;
};

struct ToolSchema {
  std::string name;
  std::string description;
  json parameters;  // JSON Schema object
};

struct ChatExchange {
  std::vector<ChatMessage> request_messages;
  std::string response_text;
  std::optional<std::vector<ToolCall>> tool_calls;
  std::int64_t latency_ms = 0;
  std::string model_id;

  bool has_tool_calls() const { return tool_calls && !tool_calls->empty(); }
  bool operator==(const ChatExchange&) const = default;
};

inline void to_json(json& j, const ToolCall& c) { j = json{{"id", c.id}, {"name", c.name}, {"arguments", c.arguments}}; }

inline void from_json(const json& j, ToolCall& c) {
  c.id = j.value("id", std::string());
  c.name = detail::required<std::string>(j, "name");
  c.arguments = j.value("arguments", json::object());
}

inline void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", to_string(m.role)}, {"content", m.content}};
  if (!m.tool_calls.empty()) j["tool_calls"] = m.tool_calls;
  if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
}

inline void from_json(const json& j, ChatMessage& m) {
  m.role = role_from_string(detail::required<std::string>(j, "role"));
  m.content = j.value("content", std::string());
  m.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
  m.tool_call_id = j.value("tool_call_id", std::string());
}

inline void to_json(json& j, const ChatExchange& e) {
  j = json{{"request_messages", e.request_messages},
           {"response_text", e.response_text},
           {"latency_ms", e.latency_ms},
           {"model_id", e.model_id}};
  j["tool_calls"] = e.tool_calls ? json(*e.tool_calls) : json(nullptr);
}

inline void from_json(const json& j, ChatExchange& e) {
  e.request_messages = detail::required<std::vector<ChatMessage>>(j, "request_messages");
  e.response_text = j.value("response_text", std::string());
  e.tool_calls.reset();
  if (auto it = j.find("tool_calls"); it != j.end() && !it->is_null()) e.tool_calls = it->get<std::vector<ToolCall>>();
  e.latency_ms = j.value("latency_ms", std::int64_t{0});
  e.model_id = j.value("model_id", std::string());
}

// Stable hex digest of the canonical JSON form of a message list. Object keys
// are sorted by the JSON library, so key order never affects the result.
inline std::string fingerprint(const std::vector<ChatMessage>& messages) {
  const std::string canonical = json(messages).dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// -- transcripts ---------------------------------------------------------------

inline void write_transcript(std::ostream& out, const std::vector<ChatExchange>& exchanges) {
  for (const auto& e : exchanges) out << json(e).dump() << '\n';
}

inline void record_transcript(const std::vector<ChatExchange>& exchanges, const std::string& path) {
  auto out = open_output(path);
  write_transcript(out, exchanges);
}

inline std::vector<ChatExchange> read_transcript(std::istream& in) {
  std::vector<ChatExchange> out;
  for_each_jsonl(in, [&](const json& j, std::size_t) { out.push_back(j.get<ChatExchange>()); });
  return out;
}

inline std::vector<ChatExchange> load_transcript(const std::string& path) {
  auto in = open_input(path);
  return read_transcript(in);
}

// -- backends --------------------------------------------------------------------

class UnscriptedRequest : public Error {
 public:
  explicit UnscriptedRequest(const std::string& fp) : Error("unscripted request (fingerprint " + fp + ")") {}
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatExchange complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) = 0;
};

class FunctionBackend : public ChatBackend {
 public:
  using Fn = std::function<ChatExchange(const std::vector<ChatMessage>&, const std::vector<ToolSchema>&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  ChatExchange complete(const std::vector<ChatMessage>& m, const std::vector<ToolSchema>& t) override {
    auto e = fn_(m, t);
    e.request_messages = m;
    return e;
  }

 private:
  Fn fn_;
};

class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(const std::vector<ChatExchange>& transcript, bool strict = true,
                         std::shared_ptr<ChatBackend> fallthrough = nullptr)
      : strict_(strict), fallthrough_(std::move(fallthrough)) {
    for (const auto& e : transcript) by_fp_.emplace(fingerprint(e.request_messages), e);  // first wins
  }

  ChatExchange complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override {
    auto fp = fingerprint(messages);
    if (auto it = by_fp_.find(fp); it != by_fp_.end()) return it->second;
    if (strict_ || !fallthrough_) throw UnscriptedRequest(fp);
    return fallthrough_->complete(messages, tools);
  }

  std::size_t size() const { return by_fp_.size(); }

 private:
  std::unordered_map<std::string, ChatExchange> by_fp_;
  bool strict_;
  std::shared_ptr<ChatBackend> fallthrough_;
};

// Single writer: exchanges are appended under a lock, one JSON line each.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner, std::string path)
      : inner_(std::move(inner)), out_(open_output(path)) {}

  ChatExchange complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override {
    auto e = inner_->complete(messages, tools);
    std::lock_guard lock(mu_);
    out_ << json(e).dump() << '\n';
    out_.flush();
    return e;
  }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

// -- HTTP backend ----------------------------------------------------------------

struct ModelConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_id = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";  // empty: no Authorization header
  int max_retries = 3;
  int max_in_flight = 4;
  int initial_backoff_ms = 500;
  double backoff_multiplier = 2.0;
  int max_backoff_ms = 30000;
  int timeout_s = 120;
};

inline void to_json(json& j, const ModelConfig& c) {
  j = json{{"endpoint_url", c.endpoint_url},       {"model_id", c.model_id},
           {"api_key_env", c.api_key_env},         {"max_retries", c.max_retries},
           {"max_in_flight", c.max_in_flight},     {"initial_backoff_ms", c.initial_backoff_ms},
           {"backoff_multiplier", c.backoff_multiplier}, {"max_backoff_ms", c.max_backoff_ms},
           {"timeout_s", c.timeout_s}};
}

inline void from_json(const json& j, ModelConfig& c) {
  ModelConfig d;
  c.endpoint_url = j.value("endpoint_url", d.endpoint_url);
  c.model_id = j.value("model_id", d.model_id);
  c.api_key_env = j.value("api_key_env", d.api_key_env);
  c.max_retries = j.value("max_retries", d.max_retries);
  c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
  c.initial_backoff_ms = j.value("initial_backoff_ms", d.initial_backoff_ms);
  c.backoff_multiplier = j.value("backoff_multiplier", d.backoff_multiplier);
  c.max_backoff_ms = j.value("max_backoff_ms", d.max_backoff_ms);
  c.timeout_s = j.value("timeout_s", d.timeout_s);
}

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Minimal HTTP client seam. Throws TransportError(status 0) on network failure.
class HttpPoster {
 public:
  virtual ~HttpPoster() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers, int timeout_s) = 0;
};

inline bool is_retryable_status(int status) {
  return status == 0 || status == 408 || status == 425 || status == 429 || status >= 500;
}

// Delay before retry number `retry` (1-based).
inline std::chrono::milliseconds backoff_delay(const ModelConfig& cfg, int retry) {
  double ms = cfg.initial_backoff_ms;
  for (int i = 1; i < retry; ++i) ms *= cfg.backoff_multiplier;
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::min<double>(ms, cfg.max_backoff_ms)));
}

inline json chat_request_body(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools,
                              const ModelConfig& cfg) {
  json msgs = json::array();
  for (const auto& m : messages) {
    json jm{{"role", to_string(m.role)}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
      json calls = json::array();
      for (const auto& c : m.tool_calls)
        calls.push_back({{"id", c.id}, {"type", "function"}, {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
      jm["tool_calls"] = calls;
    }
    if (m.role == Role::Tool) jm["tool_call_id"] = m.tool_call_id;
    msgs.push_back(std::move(jm));
  }
  json body{{"model", cfg.model_id}, {"messages", msgs}, {"temperature", 0}};
  if (!tools.empty()) {
    json jt = json::array();
    for (const auto& t : tools)
      jt.push_back({{"type", "function"},
                    {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    body["tools"] = jt;
  }
  return body;
}

// Parses choices[0].message. Tool-call arguments that are not valid JSON are
// kept as a JSON string so the caller can report them back to the model.
inline ChatExchange parse_chat_response(const std::string& body, const std::vector<ChatMessage>& request,
                                        const std::string& model_id) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw TransportError("malformed chat completion response", 200, body);
  const auto& msg = j["choices"][0].value("message", json::object());
  ChatExchange e;
  e.request_messages = request;
  e.model_id = j.value("model", model_id);
  if (msg.contains("content") && msg["content"].is_string()) e.response_text = msg["content"].get<std::string>();
  if (msg.contains("tool_calls") && msg["tool_calls"].is_array()) {
    std::vector<ToolCall> calls;
    for (const auto& c : msg["tool_calls"]) {
      ToolCall tc;
      tc.id = c.value("id", std::string());
      const auto& fn = c.value("function", json::object());
      tc.name = fn.value("name", std::string());
      auto args = fn.value("arguments", std::string("{}"));
      auto parsed = json::parse(args, nullptr, false);
      tc.arguments = parsed.is_discarded() ? json(args) : parsed;
      calls.push_back(std::move(tc));
    }
    e.tool_calls = std::move(calls);
  }
  return e;
}

class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : free_(std::max(1, limit)) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int free_;
};

class HttpChatBackend : public ChatBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpChatBackend(ModelConfig cfg, std::shared_ptr<HttpPoster> poster, Sleeper sleeper = {})
      : cfg_(std::move(cfg)), poster_(std::move(poster)), sleeper_(std::move(sleeper)), limiter_(cfg_.max_in_flight) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (!key || !*key) throw ValidationError("environment variable " + cfg_.api_key_env + " is not set");
      api_key_ = key;
    }
  }

  ChatExchange complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) override {
    const std::string body = chat_request_body(messages, tools, cfg_).dump();
    std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

    struct Slot {
      InFlightLimiter& l;
      explicit Slot(InFlightLimiter& x) : l(x) { l.acquire(); }
      ~Slot() { l.release(); }
    };

    for (int attempt = 0;; ++attempt) {
      HttpResponse resp;
      auto t0 = std::chrono::steady_clock::now();
      try {
        Slot slot(limiter_);
        resp = poster_->post(cfg_.endpoint_url, body, headers, cfg_.timeout_s);
      } catch (const TransportError& e) {
        resp.status = e.status();
        resp.body = e.what();
      }
      auto latency =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      if (resp.status >= 200 && resp.status < 300) {
        auto e = parse_chat_response(resp.body, messages, cfg_.model_id);
        e.latency_ms = latency;
        return e;
      }
      if (!is_retryable_status(resp.status))
        throw TransportError("chat endpoint returned HTTP " + std::to_string(resp.status), resp.status, resp.body);
      if (attempt >= cfg_.max_retries)
        throw TransportError("retries exhausted after " + std::to_string(attempt + 1) + " attempts (last status " +
                                 std::to_string(resp.status) + ")",
                             resp.status, resp.body);
      sleeper_(backoff_delay(cfg_, attempt + 1));
    }
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  std::shared_ptr<HttpPoster> poster_;
  Sleeper sleeper_;
  InFlightLimiter limiter_;
  std::string api_key_;
};

}  // namespace geoloc
