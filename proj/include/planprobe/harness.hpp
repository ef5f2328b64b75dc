#pragma once

// Protocol drivers for the two generation experiments.
//
// exp1: one greedy completion per starting height; the start value is part of
//       the prompt and counts as the first of `count` values.
// exp2: gen1 prompts with `context_count` rounded draws from N(mu, sigma);
//       gen2 prompts with the head of the matching gen1 output.
//
// Trials run in batches of `workers`; records reach the sink in trial order.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "planprobe/endpoint.hpp"
#include "planprobe/error.hpp"
#include "planprobe/numeric_stream.hpp"
#include "planprobe/parallel.hpp"
#include "planprobe/prompts.hpp"
#include "planprobe/records.hpp"
#include "planprobe/rng.hpp"

namespace planprobe::harness {

using records::Exp2Condition;
using records::Stage;
using records::TrialRecord;
using records::TrialStatus;

using RecordSink = std::function<void(const TrialRecord&)>;

struct Exp1Plan {
  std::int64_t start_min = 151;
  std::int64_t start_max = 219;
  std::size_t count = 60;

  void validate() const {
    if (start_min > start_max) throw InvalidParameterError("start_min must be <= start_max");
    if (count < 1) throw InvalidParameterError("count must be >= 1");
  }
  std::size_t trials() const { return static_cast<std::size_t>(start_max - start_min + 1); }
};

inline const std::vector<std::int64_t> kDefaultMus{50, 30, 10, 0, -10, -30, -50};

struct Exp2Plan {
  std::vector<std::int64_t> mus = kDefaultMus;
  std::size_t replicates = 100;
  double sigma = 10.0;
  std::size_t context_count = 64;
  std::size_t generate_count = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (mus.empty()) throw InvalidParameterError("at least one mu is required");
    if (replicates < 1) throw InvalidParameterError("replicates must be >= 1");
    if (!(sigma > 0.0)) throw InvalidParameterError("sigma must be > 0");
    if (context_count < 1 || generate_count < 1)
      throw InvalidParameterError("context and generate counts must be >= 1");
  }
};

struct RunOptions {
  std::size_t workers = 1;
  RecordSink sink;
};

/// Nearest-integer rounding of seeded N(mu, sigma) draws.
inline std::vector<std::int64_t> gaussian_context(std::int64_t mu, double sigma,
                                                  std::size_t count, std::uint64_t seed) {
  GaussianSource source(seed);
  std::vector<std::int64_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(static_cast<std::int64_t>(std::llround(source.normal(static_cast<double>(mu), sigma))));
  return out;
}

inline std::uint64_t context_seed(std::uint64_t seed, std::int64_t mu, std::int64_t replicate) {
  return derive_seed(seed, {mu, replicate});
}

namespace detail {

struct Job {
  TrialRecord record;  // prefilled condition; prompt_text set
  std::size_t wanted = 0;
  std::vector<std::int64_t> prefix;  // values known before generation
  bool skip = false;                 // already failed, no request
};

inline TrialRecord execute(endpoint::CompletionClient& client, Job job) {
  TrialRecord& r = job.record;
  if (job.skip) return r;
  r.timestamps.requested_at = records::utc_now_iso8601();
  const auto completion = client.complete(r.prompt_text);
  r.timestamps.completed_at = records::utc_now_iso8601();
  r.raw_completion = completion.text;
  r.finish_reason = completion.finish_reason;
  r.parsed_values = job.prefix;
  try {
    const auto end =
        completion.finish_reason == "length" ? StreamEnd::truncated : StreamEnd::complete;
    auto parsed = parse_numeric_stream(completion.text, end);
    r.parse_warnings = std::move(parsed.warnings);
    for (auto v : parsed.values) {
      if (r.parsed_values.size() >= job.wanted) break;
      r.parsed_values.push_back(v);
    }
    if (r.parsed_values.size() < job.wanted) {
      r.status = TrialStatus::under_length;
      r.parse_warnings.push_back(fmt::format("under-length: {} of {} values",
                                             r.parsed_values.size(), job.wanted));
    } else {
      r.status = TrialStatus::ok;
    }
  } catch (const ParseError& e) {
    r.status = TrialStatus::failed;
    r.parse_warnings.emplace_back(e.what());
  }
  return r;
}

inline std::vector<TrialRecord> run_jobs(endpoint::CompletionClient& client, std::vector<Job> jobs,
                                         const RunOptions& options) {
  std::vector<TrialRecord> out;
  out.reserve(jobs.size());
  const std::size_t batch = std::max<std::size_t>(1, options.workers);
  for (std::size_t begin = 0; begin < jobs.size(); begin += batch) {
    const std::size_t end = std::min(jobs.size(), begin + batch);
    std::vector<std::optional<TrialRecord>> slots(end - begin);
    std::vector<std::optional<std::string>> failures(end - begin);
    parallel_for(end - begin, batch, [&](std::size_t i) {
      try {
        slots[i] = execute(client, jobs[begin + i]);
      } catch (const TransportError& e) {
        failures[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (failures[i])
        throw TransportError(fmt::format("trial {} ('{}'): {}", begin + i,
                                         jobs[begin + i].record.condition, *failures[i]));
      if (options.sink) options.sink(*slots[i]);
      out.push_back(std::move(*slots[i]));
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<TrialRecord> run_exp1(endpoint::CompletionClient& client,
                                         const std::string& model_name, const Exp1Plan& plan,
                                         const RunOptions& options = {}) {
  plan.validate();
  std::vector<detail::Job> jobs;
  for (std::int64_t start = plan.start_min; start <= plan.start_max; ++start) {
    detail::Job job;
    job.record.experiment = records::Experiment::exp1;
    job.record.condition = fmt::format("start={}", start);
    job.record.model_name = model_name;
    job.record.start_value = start;
    job.record.requested_count = plan.count;
    job.record.prompt_text = prompts::height_guess_prompt(start);
    job.prefix = {start};
    job.wanted = plan.count;
    jobs.push_back(std::move(job));
  }
  return detail::run_jobs(client, std::move(jobs), options);
}

/// gen2 requires `gen1_records` holding a gen1 record for every (mu, replicate).
inline std::vector<TrialRecord> run_exp2(endpoint::CompletionClient& client,
                                         const std::string& model_name, const Exp2Plan& plan,
                                         Stage stage,
                                         const std::vector<TrialRecord>& gen1_records = {},
                                         const RunOptions& options = {}) {
  plan.validate();
  std::map<std::pair<std::int64_t, std::int64_t>, const TrialRecord*> linked;
  if (stage == Stage::gen2) {
    for (const auto& r : gen1_records)
      if (r.exp2 && r.exp2->stage == Stage::gen1) linked[{r.exp2->mu, r.exp2->replicate}] = &r;
    for (auto mu : plan.mus)
      for (std::size_t rep = 0; rep < plan.replicates; ++rep)
        if (!linked.count({mu, static_cast<std::int64_t>(rep)}))
          throw LinkageError(fmt::format("no gen1 record for (mu={}, replicate={})", mu, rep));
  }

  std::vector<detail::Job> jobs;
  for (auto mu : plan.mus) {
    for (std::size_t rep = 0; rep < plan.replicates; ++rep) {
      const auto replicate = static_cast<std::int64_t>(rep);
      detail::Job job;
      Exp2Condition cond;
      cond.mu = mu;
      cond.sigma = plan.sigma;
      cond.context_count = plan.context_count;
      cond.generate_count = plan.generate_count;
      cond.replicate = replicate;
      cond.stage = stage;
      if (stage == Stage::gen1) {
        cond.rng_seed = context_seed(plan.seed, mu, replicate);
        cond.context_values = gaussian_context(mu, plan.sigma, plan.context_count, cond.rng_seed);
      } else {
        const TrialRecord& source = *linked.at({mu, replicate});
        cond.rng_seed = source.exp2->rng_seed;
        const auto& head = source.parsed_values;
        if (head.size() < plan.context_count) {
          job.skip = true;
          job.record.status = TrialStatus::failed;
          job.record.parse_warnings.push_back(fmt::format(
              "linked gen1 record has {} values, {} required", head.size(), plan.context_count));
          cond.context_values = head;
        } else {
          cond.context_values.assign(head.begin(),
                                     head.begin() + static_cast<std::ptrdiff_t>(plan.context_count));
        }
      }
      job.record.experiment = records::Experiment::exp2;
      job.record.condition = fmt::format("mu={}/{}", mu, records::to_string(stage));
      job.record.model_name = model_name;
      job.record.prompt_text = prompts::sampling_prompt(cond.context_values);
      job.record.exp2 = std::move(cond);
      job.wanted = plan.generate_count;
      jobs.push_back(std::move(job));
    }
  }
  return detail::run_jobs(client, std::move(jobs), options);
}

}  // namespace planprobe::harness
