#pragma once

// Client for OpenAI-style completion endpoints (legacy /v1/completions or
// /v1/chat/completions). Non-streaming; text is read from the first choice.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "planprobe/error.hpp"

namespace planprobe::endpoint {

enum class ApiKind { completions, chat };

inline ApiKind parse_api_kind(const std::string& text) {
  if (text == "completions") return ApiKind::completions;
  if (text == "chat") return ApiKind::chat;
  throw InvalidParameterError("unknown api kind '" + text + "' (expected completions or chat)");
}

inline const char* to_string(ApiKind kind) {
  return kind == ApiKind::completions ? "completions" : "chat";
}

inline constexpr const char* kTokenEnvVar = "PLANPROBE_API_KEY";

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path;  // empty: /v1/completions or /v1/chat/completions by api kind
  ApiKind api = ApiKind::completions;
  std::string model_name = "default";
  double temperature = 0.0;
  int max_tokens = 512;
  std::chrono::milliseconds timeout{60000};
  int retry_limit = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::string auth_token;  // only ever filled from the environment

  std::string request_path() const {
    if (!path.empty()) return path;
    return api == ApiKind::completions ? "/v1/completions" : "/v1/chat/completions";
  }

  void validate() const {
    if (base_url.empty()) throw InvalidParameterError("endpoint base URL is empty");
    if (retry_limit < 0) throw InvalidParameterError("retry limit must be >= 0");
    if (max_tokens < 1) throw InvalidParameterError("max_tokens must be >= 1");
    if (temperature < 0.0) throw InvalidParameterError("temperature must be >= 0");
  }
};

struct Completion {
  std::string text;
  std::string finish_reason;
};

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual Completion complete(const std::string& prompt) = 0;
};

inline nlohmann::json request_body(const EndpointConfig& cfg, const std::string& prompt) {
  nlohmann::json body;
  body["model"] = cfg.model_name;
  if (cfg.api == ApiKind::completions) {
    body["prompt"] = prompt;
  } else {
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  }
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  body["stream"] = false;
  return body;
}

inline Completion parse_response(ApiKind api, const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& choice = j.at("choices").at(0);
    Completion out;
    if (api == ApiKind::completions) {
      out.text = choice.at("text").get<std::string>();
    } else {
      out.text = choice.at("message").at("content").get<std::string>();
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
      out.finish_reason = choice["finish_reason"].get<std::string>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected response body: ") + e.what());
  }
}

class HttpCompletionClient final : public CompletionClient {
 public:
  explicit HttpCompletionClient(EndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const EndpointConfig& config() const { return cfg_; }

  Completion complete(const std::string& prompt) override {
    const std::string body = request_body(cfg_, prompt).dump();
    std::string last_error;
    auto backoff = cfg_.initial_backoff;
    int attempts = 0;
    for (int attempt = 0; attempt <= cfg_.retry_limit; ++attempt) {
      ++attempts;
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      // one client per call keeps this object safe to share across workers
      httplib::Client client(cfg_.base_url);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      httplib::Headers headers;
      if (!cfg_.auth_token.empty())
        headers.emplace("Authorization", "Bearer " + cfg_.auth_token);
      auto res = client.Post(cfg_.request_path(), headers, body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return parse_response(cfg_.api, res->body);
      last_error = fmt::format("HTTP {}", res->status);
      const bool retryable = res->status == 429 || res->status >= 500;
      if (!retryable) break;
    }
    throw TransportError(fmt::format("{}{} unreachable after {} attempt(s): {}", cfg_.base_url,
                                     cfg_.request_path(), attempts, last_error));
  }

 private:
  EndpointConfig cfg_;
};

}  // namespace planprobe::endpoint
