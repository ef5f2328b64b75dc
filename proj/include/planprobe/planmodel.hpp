#pragma once

// Conjugate-Gaussian simulator of inference-time planning: a domain prior over
// a scalar plan is combined with a planning likelihood whose precision grows
// as self-generated tokens accumulate in the context.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "planprobe/csv.hpp"
#include "planprobe/error.hpp"
#include "planprobe/rng.hpp"

namespace planprobe::planmodel {

struct DomainPrior {
  double mean = 0.0;
  double precision = 1.0;

  void validate() const {
    if (!std::isfinite(mean) || !std::isfinite(precision))
      throw InvalidParameterError("domain prior fields must be finite");
    if (precision <= 0.0) throw InvalidParameterError("domain prior precision must be > 0");
  }
};

/// Likelihood side of the update. The effective precision is
/// base_gain * (1 + gain_growth * self_token_count).
struct EvidenceModel {
  double target_estimate = 0.0;
  double base_gain = 1.0;
  double gain_growth = 0.0;
  std::uint64_t self_token_count = 0;

  double gain() const {
    return base_gain * (1.0 + gain_growth * static_cast<double>(self_token_count));
  }

  EvidenceModel with_self_tokens(std::uint64_t count) const {
    EvidenceModel copy = *this;
    copy.self_token_count = count;
    return copy;
  }

  void validate() const {
    if (!std::isfinite(target_estimate) || !std::isfinite(base_gain) ||
        !std::isfinite(gain_growth))
      throw InvalidParameterError("evidence model fields must be finite");
    // A zero gain is accepted and means "no evidence yet".
    if (base_gain < 0.0) throw InvalidParameterError("base gain must be >= 0");
    if (gain_growth < 0.0) throw InvalidParameterError("gain growth must be >= 0");
  }
};

struct PlanState {
  double posterior_mean = 0.0;
  double posterior_precision = 1.0;
  std::size_t step_index = 0;
};

struct Trajectory {
  std::vector<PlanState> plans;
  std::vector<double> emissions;
  std::vector<double> planning_strength;
  std::vector<double> bias;

  std::size_t size() const { return plans.size(); }
};

inline PlanState posterior_update(const DomainPrior& prior, const EvidenceModel& ev) {
  prior.validate();
  ev.validate();
  const double gain = ev.gain();
  if (!std::isfinite(gain)) throw InvalidParameterError("effective gain is not finite");
  PlanState state;
  state.posterior_precision = prior.precision + gain;
  // shrink form: exact when the target equals the prior mean
  state.posterior_mean =
      prior.mean + gain / state.posterior_precision * (ev.target_estimate - prior.mean);
  return state;
}

/// Share of posterior precision contributed by the likelihood.
inline double planning_strength(const PlanState& state, const DomainPrior& prior) {
  prior.validate();
  if (!(state.posterior_precision >= prior.precision) || !std::isfinite(state.posterior_mean))
    throw InvalidParameterError("plan state precision must be >= prior precision");
  return (state.posterior_precision - prior.precision) / state.posterior_precision;
}

/// Differential entropy (nats) of the next emission under the plan posterior.
inline double predictive_entropy(const PlanState& state, double emission_variance) {
  if (!(emission_variance > 0.0) || !std::isfinite(emission_variance))
    throw InvalidParameterError("emission variance must be finite and > 0");
  if (!(state.posterior_precision > 0.0))
    throw InvalidParameterError("posterior precision must be > 0");
  const double total = emission_variance + 1.0 / state.posterior_precision;
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * total);
}

inline Trajectory simulate_trajectory(const DomainPrior& prior, const EvidenceModel& ev,
                                      std::size_t steps, double emission_variance,
                                      std::uint64_t seed) {
  prior.validate();
  ev.validate();
  if (steps == 0) throw InvalidParameterError("steps must be >= 1");
  if (!(emission_variance >= 0.0) || !std::isfinite(emission_variance))
    throw InvalidParameterError("emission variance must be finite and >= 0");

  GaussianSource noise(seed);
  const double stddev = std::sqrt(emission_variance);
  Trajectory traj;
  traj.plans.reserve(steps);
  traj.emissions.reserve(steps);
  traj.planning_strength.reserve(steps);
  traj.bias.reserve(steps);

  for (std::size_t t = 0; t < steps; ++t) {
    // every emitted value joins the context before the next update
    PlanState state = posterior_update(prior, ev.with_self_tokens(ev.self_token_count + t));
    state.step_index = t;
    const double emission =
        stddev > 0.0 ? noise.normal(state.posterior_mean, stddev) : state.posterior_mean;
    traj.plans.push_back(state);
    traj.emissions.push_back(emission);
    traj.planning_strength.push_back(planning_strength(state, prior));
    traj.bias.push_back(state.posterior_mean - ev.target_estimate);
  }
  return traj;
}

/// Entropy excess of an out-of-distribution context over an in-distribution
/// one that differs only in base gain.
inline double entropy_gap(const EvidenceModel& ood, const EvidenceModel& ind,
                          const DomainPrior& prior, double emission_variance) {
  ood.validate();
  ind.validate();
  if (ood.base_gain > ind.base_gain)
    throw InvalidParameterError("out-of-distribution gain must not exceed in-distribution gain");
  if (ood.target_estimate != ind.target_estimate || ood.gain_growth != ind.gain_growth ||
      ood.self_token_count != ind.self_token_count)
    throw InvalidParameterError("evidence models must differ only in base gain");
  return predictive_entropy(posterior_update(prior, ood), emission_variance) -
         predictive_entropy(posterior_update(prior, ind), emission_variance);
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  csv::write_row(out, {"step", "posterior_mean", "posterior_precision", "emission",
                       "planning_strength", "bias"});
  for (std::size_t t = 0; t < traj.size(); ++t) {
    csv::write_row(out, {std::to_string(traj.plans[t].step_index),
                         csv::format_number(traj.plans[t].posterior_mean),
                         csv::format_number(traj.plans[t].posterior_precision),
                         csv::format_number(traj.emissions[t]),
                         csv::format_number(traj.planning_strength[t]),
                         csv::format_number(traj.bias[t])});
  }
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  write_trajectory_csv(out, traj);
  return out.str();
}

}  // namespace planprobe::planmodel
