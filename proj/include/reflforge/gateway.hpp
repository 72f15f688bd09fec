#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "reflforge/errors.hpp"
#include "reflforge/prompts.hpp"

namespace reflforge {

// ---------------------------------------------------------------------------
// Requests and configuration
// ---------------------------------------------------------------------------

struct ChatRequest {
  RoleTag role_tag = RoleTag::propose_initial;
  std::string rendered_prompt;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<int> seed;
  // Routing metadata: which question this call belongs to and the
  // deterministic context key the mock script is indexed by.
  std::string question_id;
  std::string script_key;
};

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_base_ms = 100;
};

struct BackendConfig {
  std::string kind = "openai";  // "openai" | "mock"
  std::string base_url = "http://127.0.0.1:11434";
  std::string api_key;
  std::string model_name = "llama3.1:8b";
  std::map<std::string, std::string> model_by_role;  // role tag -> model override
  int max_concurrency = 4;
  RetryPolicy retry;
  int timeout_ms = 120000;
  std::int64_t token_budget = 0;  // 0 = unlimited
  std::string mock_script;        // path; implies kind == "mock"

  const std::string& model_for(RoleTag role) const {
    auto it = model_by_role.find(to_string(role));
    return it == model_by_role.end() ? model_name : it->second;
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (max_concurrency < 1) out.push_back("max_concurrency must be >= 1");
    if (retry.max_attempts < 1) out.push_back("retry.max_attempts must be >= 1");
    if (retry.backoff_base_ms < 0) out.push_back("retry.backoff_base_ms must be >= 0");
    if (timeout_ms < 1) out.push_back("timeout_ms must be >= 1");
    if (kind != "openai" && kind != "mock") out.push_back("backend kind must be openai or mock");
    if (kind == "mock" && mock_script.empty()) out.push_back("mock backend needs mock_script");
    return out;
  }
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct Completion {
  std::string text;
  Usage usage;
  int attempts = 1;
};

// ---------------------------------------------------------------------------
// Shared gadgets
// ---------------------------------------------------------------------------

// Admission limiter: at most `limit` calls are in flight at once;
// additional callers block until a slot frees up.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

  class Ticket {
   public:
    explicit Ticket(ConcurrencyLimiter& l) : limiter_(&l) {}
    ~Ticket() {
      if (limiter_ != nullptr) limiter_->release();
    }
    Ticket(Ticket&& o) noexcept : limiter_(o.limiter_) { o.limiter_ = nullptr; }
    Ticket(const Ticket&) = delete;
    Ticket& operator=(const Ticket&) = delete;
    Ticket& operator=(Ticket&&) = delete;

   private:
    ConcurrencyLimiter* limiter_;
  };

  Ticket acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return in_flight_ < limit_; });
    ++in_flight_;
    return Ticket(*this);
  }

 private:
  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
};

// Optional global token cap shared by every call of a run.
class TokenBudget {
 public:
  explicit TokenBudget(std::int64_t cap) : cap_(cap) {}

  void precheck() const {
    if (cap_ > 0 && used_.load() >= cap_)
      throw BudgetExceeded("token budget exhausted: " + std::to_string(cap_));
  }

  void charge(const Usage& u) {
    const std::int64_t total =
        used_.fetch_add(u.prompt_tokens + u.completion_tokens) + u.prompt_tokens +
        u.completion_tokens;
    if (cap_ > 0 && total > cap_)
      throw BudgetExceeded("token budget exceeded: used " + std::to_string(total) + " of " +
                           std::to_string(cap_));
  }

  std::int64_t used() const { return used_.load(); }

 private:
  std::int64_t cap_;
  std::atomic<std::int64_t> used_{0};
};

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

class Backend {
 public:
  virtual ~Backend() = default;

  // Blocking. Retries transient failures per the retry policy, never has
  // more than max_concurrency requests in flight, and charges the global
  // token budget. Throws TransportError / ProtocolError / BudgetExceeded.
  virtual Completion complete(const ChatRequest& request) = 0;

  virtual bool deterministic() const = 0;

  std::int64_t total_prompt_tokens() const { return prompt_tokens_.load(); }
  std::int64_t total_completion_tokens() const { return completion_tokens_.load(); }

 protected:
  void record(const Usage& u) {
    prompt_tokens_ += u.prompt_tokens;
    completion_tokens_ += u.completion_tokens;
  }

 private:
  std::atomic<std::int64_t> prompt_tokens_{0};
  std::atomic<std::int64_t> completion_tokens_{0};
};

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

// Deterministic backend driven by a script file:
//
//   {
//     "schema": "refl-forge-mock/1",
//     "defaults": { "<role>": "response text" },
//     "entries": { "<question_id>|<role>|<context key>": "response text" }
//   }
//
// Lookup tries the exact entry, then "<question_id>|<role>|*", then the
// role default. A miss is a ProtocolError so fixture gaps surface loudly.
// Responses are byte-identical on every call regardless of interleaving.
class MockBackend final : public Backend {
 public:
  MockBackend(nlohmann::json script, const BackendConfig& config)
      : budget_(config.token_budget), limiter_(config.max_concurrency) {
    if (!script.is_object()) throw ConfigError("mock script: top level must be an object");
    if (auto it = script.find("defaults"); it != script.end())
      for (const auto& [role, text] : it->items()) defaults_[role] = text.get<std::string>();
    if (auto it = script.find("entries"); it != script.end())
      for (const auto& [key, text] : it->items()) entries_[key] = text.get<std::string>();
  }

  static std::unique_ptr<MockBackend> from_file(const std::string& path,
                                                const BackendConfig& config) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("mock script not found: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("mock script " + path + ": " + e.what());
    }
    return std::make_unique<MockBackend>(std::move(j), config);
  }

  static std::string entry_key(const std::string& question_id, RoleTag role,
                               const std::string& context_key) {
    return question_id + "|" + to_string(role) + "|" + context_key;
  }

  Completion complete(const ChatRequest& request) override {
    budget_.precheck();
    auto ticket = limiter_.acquire();
    const std::string* text = lookup(request);
    if (text == nullptr)
      throw ProtocolError("mock script has no entry for " +
                          entry_key(request.question_id, request.role_tag, request.script_key));
    Completion c;
    c.text = *text;
    // Deterministic pseudo-usage so budget accounting is exercisable.
    c.usage.prompt_tokens = static_cast<std::int64_t>(request.rendered_prompt.size() / 4 + 1);
    c.usage.completion_tokens = static_cast<std::int64_t>(c.text.size() / 4 + 1);
    budget_.charge(c.usage);
    record(c.usage);
    return c;
  }

  bool deterministic() const override { return true; }

 private:
  const std::string* lookup(const ChatRequest& request) const {
    const auto exact =
        entries_.find(entry_key(request.question_id, request.role_tag, request.script_key));
    if (exact != entries_.end()) return &exact->second;
    const auto wild = entries_.find(entry_key(request.question_id, request.role_tag, "*"));
    if (wild != entries_.end()) return &wild->second;
    const auto def = defaults_.find(to_string(request.role_tag));
    if (def != defaults_.end()) return &def->second;
    return nullptr;
  }

  std::map<std::string, std::string> defaults_;
  std::map<std::string, std::string> entries_;
  TokenBudget budget_;
  ConcurrencyLimiter limiter_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend
// ---------------------------------------------------------------------------

namespace detail {

struct ParsedUrl {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_prefix;       // "" or "/v1"-style prefix, no trailing slash
};

inline ParsedUrl parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("base_url must start with http:// or https://: " + base_url);
  const std::string scheme = base_url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw ConfigError("unsupported base_url scheme: " + scheme);
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = base_url;
  } else {
    out.scheme_host_port = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  return out;
}

// Endpoint path per the chat-completions wire protocol. A base_url that
// already ends in /v1 is extended, anything else gets the full suffix.
inline std::string completions_path(const ParsedUrl& url) {
  if (url.path_prefix.size() >= 3 &&
      url.path_prefix.compare(url.path_prefix.size() - 3, 3, "/v1") == 0)
    return url.path_prefix + "/chat/completions";
  return url.path_prefix + "/v1/chat/completions";
}

}  // namespace detail

// The HTTP transport is supplied by the caller so the backend logic
// (payload, retry, parsing) stays independent of the socket library and
// testable against an in-process fake server.
struct HttpResponse {
  bool transport_ok = false;  // false: no response at all (connect/timeout)
  int status = 0;
  std::string body;
  std::string error;  // transport error description when !transport_ok
};

using HttpPostFn =
    std::function<HttpResponse(const std::string& scheme_host_port, const std::string& path,
                               const std::string& body, const std::string& api_key,
                               int timeout_ms)>;

class OpenAiBackend final : public Backend {
 public:
  OpenAiBackend(BackendConfig config, HttpPostFn post)
      : config_(std::move(config)),
        url_(detail::parse_base_url(config_.base_url)),
        path_(detail::completions_path(url_)),
        post_(std::move(post)),
        budget_(config_.token_budget),
        limiter_(config_.max_concurrency) {}

  Completion complete(const ChatRequest& request) override {
    budget_.precheck();
    const std::string body = payload(request).dump();
    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
      if (attempt > 1) backoff(attempt - 1);
      HttpResponse resp;
      {
        auto ticket = limiter_.acquire();
        resp = post_(url_.scheme_host_port, path_, body, config_.api_key, config_.timeout_ms);
      }
      if (!resp.transport_ok) {
        last_error = resp.error.empty() ? "no response" : resp.error;
        continue;
      }
      if (is_transient_status(resp.status)) {
        last_error = "HTTP " + std::to_string(resp.status);
        continue;
      }
      if (resp.status < 200 || resp.status >= 300)
        throw ProtocolError("backend returned HTTP " + std::to_string(resp.status) + ": " +
                            resp.body.substr(0, 200));
      Completion c = parse_completion(resp.body);
      c.attempts = attempt;
      budget_.charge(c.usage);
      record(c.usage);
      return c;
    }
    throw TransportError("backend unreachable after " +
                         std::to_string(config_.retry.max_attempts) + " attempts (" +
                         last_error + ")");
  }

  bool deterministic() const override { return false; }

 private:
  nlohmann::json payload(const ChatRequest& request) const {
    nlohmann::json j{
        {"model", config_.model_for(request.role_tag)},
        {"messages", nlohmann::json::array({nlohmann::json{
                        {"role", "user"}, {"content", request.rendered_prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (request.seed) j["seed"] = *request.seed;
    return j;
  }

  static bool is_transient_status(int status) {
    return status == 408 || status == 429 || status >= 500;
  }

  static Completion parse_completion(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("backend response is not JSON: " + body.substr(0, 200));
    }
    Completion c;
    try {
      c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("backend response missing choices[0].message.content");
    }
    if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
      c.usage.prompt_tokens = usage->value("prompt_tokens", 0);
      c.usage.completion_tokens = usage->value("completion_tokens", 0);
    }
    return c;
  }

  void backoff(int failed_attempts) const {
    const std::int64_t base = config_.retry.backoff_base_ms;
    std::int64_t ms = base << std::min(failed_attempts - 1, 10);
    if (ms > 10000) ms = 10000;
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }

  BackendConfig config_;
  detail::ParsedUrl url_;
  std::string path_;
  HttpPostFn post_;
  TokenBudget budget_;
  ConcurrencyLimiter limiter_;
};

}  // namespace reflforge
