#pragma once

// Synthetic embedding dumps with a known linear code, for probe checks and
// demos. Each trial is a run of i.i.d. integer samples laid out on the
// number/comma/space grid. The embedding at any token of sample s holds
//
//   h = sum_{k=1..horizon} w(s) * z_{s+k} * u_k + noise
//
// where z is the standardized future sample value and u_k are fixed random
// directions. Targets up to 3*horizon tokens ahead are linearly decodable;
// anything further is independent of h.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "planprobe/dump.hpp"
#include "planprobe/error.hpp"
#include "planprobe/rng.hpp"

namespace planprobe::synthetic {

struct DumpSpec {
  std::size_t trials = 60;
  std::size_t samples = 40;
  std::size_t hidden_dim = 16;
  std::vector<int> layers{0};
  std::size_t horizon = 3;  // samples ahead encoded; 0 gives a pure-noise dump
  double signal = 1.0;
  double noise = 0.1;
  // Signal weight grows linearly with sample index, from 0 to `signal`.
  bool ramp = false;
  double value_mean = 170.0;
  double value_sd = 10.0;
  std::uint64_t seed = 1;
  std::string model_name = "synthetic";

  void validate() const {
    if (trials < 1 || samples < 1) throw InvalidParameterError("trials and samples must be >= 1");
    if (hidden_dim < 1) throw InvalidParameterError("hidden_dim must be >= 1");
    if (layers.empty()) throw InvalidParameterError("at least one layer is required");
    if (!(noise >= 0.0) || !(value_sd > 0.0))
      throw InvalidParameterError("noise must be >= 0 and value_sd > 0");
  }
};

inline dump::EmbeddingDump make_dump(const DumpSpec& spec) {
  spec.validate();
  dump::EmbeddingDump d;
  d.model_name = spec.model_name;
  d.hidden_dim = spec.hidden_dim;
  d.layer_indices = spec.layers;
  d.samples_per_trial = spec.samples;

  // unit directions per (layer, k)
  std::vector<std::vector<std::vector<double>>> directions(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    GaussianSource g(derive_seed(spec.seed, {0, spec.layers[l]}));
    for (std::size_t k = 0; k < spec.horizon; ++k) {
      std::vector<double> u(spec.hidden_dim);
      double norm = 0.0;
      for (auto& v : u) {
        v = g.standard_normal();
        norm += v * v;
      }
      for (auto& v : u) v /= std::sqrt(norm);
      directions[l].push_back(std::move(u));
    }
  }

  for (std::size_t i = 0; i < spec.trials; ++i) {
    dump::TrialEmbedding trial;
    trial.trial_id = static_cast<std::int64_t>(i);
    GaussianSource values(derive_seed(spec.seed, {1, static_cast<std::int64_t>(i)}));
    std::vector<double> z(spec.samples);
    for (std::size_t s = 0; s < spec.samples; ++s) {
      const auto v = static_cast<std::int64_t>(
          std::llround(values.normal(spec.value_mean, spec.value_sd)));
      trial.numeric_values.push_back(v);
      z[s] = (static_cast<double>(v) - spec.value_mean) / spec.value_sd;
      trial.token_texts.insert(trial.token_texts.end(), {std::to_string(v), ",", " "});
      trial.token_roles.insert(trial.token_roles.end(), {dump::TokenRole::number_part,
                                                         dump::TokenRole::comma,
                                                         dump::TokenRole::space});
    }
    const std::size_t tokens = trial.token_roles.size();
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      GaussianSource noise(derive_seed(spec.seed, {2, static_cast<std::int64_t>(i), spec.layers[l]}));
      dump::EmbeddingMatrix m(tokens, spec.hidden_dim);
      for (std::size_t t = 0; t < tokens; ++t) {
        const std::size_t s = t / 3;
        const double w = spec.ramp ? spec.signal * static_cast<double>(s + 1) /
                                         static_cast<double>(spec.samples)
                                   : spec.signal;
        auto row = m.row(t);
        for (std::size_t j = 0; j < spec.hidden_dim; ++j) {
          double h = spec.noise * noise.standard_normal();
          for (std::size_t k = 1; k <= spec.horizon && s + k < spec.samples; ++k)
            h += w * z[s + k] * directions[l][k - 1][j];
          row[j] = static_cast<float>(h);
        }
      }
      trial.matrices.push_back(std::move(m));
    }
    d.trials.push_back(std::move(trial));
  }
  return d;
}

}  // namespace planprobe::synthetic
