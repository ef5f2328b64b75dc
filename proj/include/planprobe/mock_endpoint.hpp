#pragma once

// Deterministic stand-in for a completion endpoint.
//
// Responses depend only on the request prompt and max_tokens. Numbers are
// drawn from the planning simulator: the plan starts at a domain prior and is
// pulled toward the context's central value as self-generated output
// accumulates. Every emitted value v_k at output index k satisfies
// (v_k + k) even; a context carrying that watermark is treated as the mock's
// own output and gets a much sharper likelihood.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "planprobe/error.hpp"
#include "planprobe/numeric_stream.hpp"
#include "planprobe/planmodel.hpp"
#include "planprobe/rng.hpp"

namespace planprobe::mock {

struct MockOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::size_t max_values = 96;
  // Respond 503 to this many requests before behaving; exercises retries.
  int fail_first = 0;
  double prior_mean = -30.0;
  double prior_precision = 0.05;
  double external_gain = 0.5;
  double self_gain = 5.0;
  double gain_growth = 0.2;
};

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool carries_watermark(const std::vector<std::int64_t>& values) {
  if (values.size() < 8) return false;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (((values[k] + static_cast<std::int64_t>(k)) % 2 + 2) % 2 != 0) return false;
  return true;
}

struct MockCompletion {
  std::string text;
  std::string finish_reason;
};

/// The mock's generation rule, usable without a server.
inline MockCompletion generate(const MockOptions& opt, const std::string& prompt, int max_tokens) {
  const auto colon = prompt.rfind(": ");
  std::vector<std::int64_t> context;
  if (colon != std::string::npos) {
    try {
      context = parse_numeric_stream(std::string_view(prompt).substr(colon + 2)).values;
    } catch (const ParseError&) {
    }
  }
  const std::size_t budget = static_cast<std::size_t>(std::max(1, max_tokens / 3));
  const std::size_t count = std::min(opt.max_values, budget);

  planmodel::DomainPrior prior{opt.prior_mean, opt.prior_precision};
  planmodel::EvidenceModel evidence;
  double emission_variance = 36.0;
  if (prompt.find("heights") != std::string::npos) {
    // guesses drift from the prompted start toward a population centre
    prior.mean = context.empty() ? 170.0 : static_cast<double>(context.back());
    evidence = {172.0, 0.02, 0.5, 0};
  } else {
    double mean = 0.0;
    double var = 0.0;
    if (!context.empty()) {
      for (auto v : context) mean += static_cast<double>(v);
      mean /= static_cast<double>(context.size());
      for (auto v : context) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
      var /= static_cast<double>(std::max<std::size_t>(1, context.size() - 1));
    }
    const double gain = carries_watermark(context) ? opt.self_gain : opt.external_gain;
    evidence = {mean, gain, opt.gain_growth, 0};
    emission_variance = std::max(1.0, var);
  }
  const auto traj = planmodel::simulate_trajectory(prior, evidence, count, emission_variance,
                                                   fnv1a(prompt));
  std::string text;
  for (std::size_t k = 0; k < count; ++k) {
    auto v = static_cast<std::int64_t>(std::llround(traj.emissions[k]));
    if (((v + static_cast<std::int64_t>(k)) % 2 + 2) % 2 != 0) v += 1;
    text += std::to_string(v);
    text += ", ";
  }
  return {text, count == budget ? "length" : "stop"};
}

class MockCompletionServer {
 public:
  explicit MockCompletionServer(MockOptions options = {}) : options_(std::move(options)) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, false);
    });
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   handle(req, res, true);
                 });
  }

  ~MockCompletionServer() { stop(); }

  MockCompletionServer(const MockCompletionServer&) = delete;
  MockCompletionServer& operator=(const MockCompletionServer&) = delete;

  /// Binds and serves on a background thread.
  void start() {
    if (options_.port == 0) {
      port_ = server_.bind_to_any_port(options_.host);
    } else {
      port_ = server_.bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (port_ < 0) throw TransportError(fmt::format("mock endpoint could not bind {}:{}",
                                                    options_.host, options_.port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  /// Serves on the calling thread until stop().
  void run() {
    if (!server_.listen(options_.host, options_.port))
      throw TransportError(fmt::format("mock endpoint could not listen on {}:{}", options_.host,
                                       options_.port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string base_url() const { return fmt::format("http://{}:{}", options_.host, port_); }
  std::size_t request_count() const { return requests_.load(); }

 private:
  void handle(const httplib::Request& req, httplib::Response& res, bool chat) {
    const auto n = requests_.fetch_add(1);
    if (static_cast<int>(n) < options_.fail_first) {
      res.status = 503;
      res.set_content(R"({"error":"warming up"})", "application/json");
      return;
    }
    nlohmann::json body;
    std::string prompt;
    int max_tokens = 512;
    std::string model;
    try {
      body = nlohmann::json::parse(req.body);
      model = body.value("model", "mock");
      max_tokens = body.value("max_tokens", 512);
      if (chat) {
        prompt = body.at("messages").back().at("content").get<std::string>();
      } else {
        prompt = body.at("prompt").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    const auto completion = generate(options_, prompt, max_tokens);
    nlohmann::json choice{{"index", 0}, {"finish_reason", completion.finish_reason}};
    if (chat) {
      choice["message"] = {{"role", "assistant"}, {"content", completion.text}};
    } else {
      choice["text"] = completion.text;
    }
    nlohmann::json out{{"id", "mock"},
                       {"object", chat ? "chat.completion" : "text_completion"},
                       {"model", model},
                       {"choices", nlohmann::json::array({choice})}};
    res.set_content(out.dump(), "application/json");
  }

  MockOptions options_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace planprobe::mock
