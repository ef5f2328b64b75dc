#pragma once

// Future-token probe: regress numeric samples that appear `offset` tokens
// ahead on the hidden state at the current token, one LASSO fit per offset
// (or per comma position), and report in-sample R^2 curves.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "planprobe/csv.hpp"
#include "planprobe/dump.hpp"
#include "planprobe/error.hpp"
#include "planprobe/lasso.hpp"
#include "planprobe/parallel.hpp"

namespace planprobe::probe {

inline constexpr int kMaxOffset = 172;
inline constexpr int kPositionHorizon = 8;
inline constexpr int kLastPositionIndex = 57;  // q = 3i + 1, 0 <= i <= 57
inline constexpr double kDefaultPenalty = 0.3;

struct Options {
  double penalty = kDefaultPenalty;
  bool standardize = true;
  double tol = 1e-6;
  std::size_t max_sweeps = 1000;
  std::size_t workers = 1;
  // Restrict rows to embeddings taken at tokens of this role.
  std::optional<dump::TokenRole> source_role;

  lasso::Options lasso_options() const { return {penalty, tol, max_sweeps, standardize}; }
};

struct RowKey {
  std::int64_t trial_id = 0;
  std::size_t token = 0;
  bool operator==(const RowKey&) const = default;
};

struct Dataset {
  lasso::DesignMatrix x;
  std::vector<double> y;
  std::vector<RowKey> rows;
};

struct CurvePoint {
  int x = 0;  // offset or position
  double r_squared = 0.0;
  std::size_t n_examples = 0;
  bool operator==(const CurvePoint&) const = default;
};

struct OffsetCurve {
  int layer = 0;
  std::vector<CurvePoint> points;
  std::vector<int> skipped;  // offsets with fewer than 2 examples
};

struct PositionCurve {
  int layer = 0;
  std::vector<CurvePoint> points;
  std::vector<int> skipped;  // positions whose q+8 falls outside the grid
};

inline std::vector<int> comma_positions() {
  std::vector<int> out;
  for (int i = 0; i <= kLastPositionIndex; ++i) out.push_back(3 * i + 1);
  return out;
}

namespace detail {

inline std::vector<const dump::TrialEmbedding*> trials_by_id(const dump::EmbeddingDump& d) {
  std::vector<const dump::TrialEmbedding*> out;
  out.reserve(d.trials.size());
  for (const auto& t : d.trials) out.push_back(&t);
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->trial_id < b->trial_id; });
  return out;
}

inline std::size_t require_layer(const dump::EmbeddingDump& d, int layer) {
  const auto slot = d.layer_slot(layer);
  if (!slot) throw InvalidParameterError(fmt::format("layer {} not present in dump", layer));
  return *slot;
}

struct PendingRow {
  const dump::EmbeddingMatrix* matrix;
  std::size_t token;
  double target;
  RowKey key;
};

inline Dataset materialize(const std::vector<PendingRow>& pending, std::size_t dim) {
  Dataset out;
  out.x = lasso::DesignMatrix(pending.size(), dim);
  out.y.reserve(pending.size());
  out.rows.reserve(pending.size());
  for (std::size_t r = 0; r < pending.size(); ++r) {
    const auto src = pending[r].matrix->row(pending[r].token);
    std::copy(src.begin(), src.end(), out.x.row(r).begin());
    out.y.push_back(pending[r].target);
    out.rows.push_back(pending[r].key);
  }
  return out;
}

}  // namespace detail

/// One row per (trial, t) whose token t+offset is part of a numeric sample;
/// the target is that sample's value. Trials are visited in trial_id order.
inline Dataset build_offset_dataset(const dump::EmbeddingDump& d, int layer, int offset,
                                    std::optional<dump::TokenRole> source_role = std::nullopt) {
  if (offset < 0 || offset > kMaxOffset)
    throw InvalidParameterError(fmt::format("offset {} outside [0, {}]", offset, kMaxOffset));
  const std::size_t slot = detail::require_layer(d, layer);
  std::vector<detail::PendingRow> pending;
  for (const auto* trial : detail::trials_by_id(d)) {
    const auto grid = dump::validate_token_grid(*trial, d.samples_per_trial);
    const std::size_t tokens = trial->token_roles.size();
    const auto& matrix = trial->matrices[slot];
    for (std::size_t t = 0; t + static_cast<std::size_t>(offset) < tokens; ++t) {
      const int sample = grid.sample_of_token[t + static_cast<std::size_t>(offset)];
      if (sample < 0) continue;
      if (source_role && trial->token_roles[t] != *source_role) continue;
      pending.push_back({&matrix, t, static_cast<double>(trial->numeric_values[sample]),
                         {trial->trial_id, t}});
    }
  }
  return detail::materialize(pending, d.hidden_dim);
}

/// One row per trial: embedding at comma position q, target the sample at q+8.
inline Dataset build_position_dataset(const dump::EmbeddingDump& d, int layer, int position) {
  if (position < 0) throw InvalidParameterError("position must be >= 0");
  const std::size_t slot = detail::require_layer(d, layer);
  const auto q = static_cast<std::size_t>(position);
  std::vector<detail::PendingRow> pending;
  for (const auto* trial : detail::trials_by_id(d)) {
    const auto grid = dump::validate_token_grid(*trial, d.samples_per_trial);
    const std::size_t target_token = q + kPositionHorizon;
    if (target_token >= trial->token_roles.size()) continue;
    const int sample = grid.sample_of_token[target_token];
    if (sample < 0) continue;
    pending.push_back({&trial->matrices[slot], q,
                       static_cast<double>(trial->numeric_values[sample]), {trial->trial_id, q}});
  }
  return detail::materialize(pending, d.hidden_dim);
}

inline OffsetCurve fit_offset_curve(const dump::EmbeddingDump& d, int layer,
                                    const std::vector<int>& offsets, const Options& options = {}) {
  detail::require_layer(d, layer);
  for (int offset : offsets)
    if (offset < 0 || offset > kMaxOffset)
      throw InvalidParameterError(fmt::format("offset {} outside [0, {}]", offset, kMaxOffset));

  std::vector<std::optional<CurvePoint>> slots(offsets.size());
  parallel_for(offsets.size(), options.workers, [&](std::size_t i) {
    const auto data = build_offset_dataset(d, layer, offsets[i], options.source_role);
    if (data.y.size() < 2) return;
    const auto result = lasso::fit(data.x, data.y, options.lasso_options());
    slots[i] = CurvePoint{offsets[i], result.report.r_squared, data.y.size()};
  });

  OffsetCurve curve;
  curve.layer = layer;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (slots[i])
      curve.points.push_back(*slots[i]);
    else
      curve.skipped.push_back(offsets[i]);
  }
  return curve;
}

inline std::vector<int> offset_range(int first, int last) {
  if (first > last) throw InvalidParameterError("offset range is empty");
  std::vector<int> out;
  for (int o = first; o <= last; ++o) out.push_back(o);
  return out;
}

inline PositionCurve fit_position_curve(const dump::EmbeddingDump& d, int layer,
                                        const Options& options = {}) {
  detail::require_layer(d, layer);
  if (d.trials.size() < 2)
    throw DegenerateDataError(fmt::format(
        "position curve needs at least 2 trials (one example per trial), dump has {}",
        d.trials.size()));
  const auto positions = comma_positions();
  std::vector<std::optional<CurvePoint>> slots(positions.size());
  parallel_for(positions.size(), options.workers, [&](std::size_t i) {
    const auto data = build_position_dataset(d, layer, positions[i]);
    if (data.y.size() < 2) return;
    const auto result = lasso::fit(data.x, data.y, options.lasso_options());
    slots[i] = CurvePoint{positions[i], result.report.r_squared, data.y.size()};
  });
  PositionCurve curve;
  curve.layer = layer;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (slots[i])
      curve.points.push_back(*slots[i]);
    else
      curve.skipped.push_back(positions[i]);
  }
  return curve;
}

/// Curves for several layers; layers are fitted one after another, offsets
/// within a layer in parallel.
inline std::vector<OffsetCurve> fit_offset_curves(const dump::EmbeddingDump& d,
                                                  const std::vector<int>& layers,
                                                  const std::vector<int>& offsets,
                                                  const Options& options = {}) {
  std::vector<OffsetCurve> out;
  for (int layer : layers) out.push_back(fit_offset_curve(d, layer, offsets, options));
  return out;
}

inline std::vector<PositionCurve> fit_position_curves(const dump::EmbeddingDump& d,
                                                      const std::vector<int>& layers,
                                                      const Options& options = {}) {
  std::vector<PositionCurve> out;
  for (int layer : layers) out.push_back(fit_position_curve(d, layer, options));
  return out;
}

template <typename Curve>
void write_curves_csv(std::ostream& out, std::span<const Curve> curves) {
  if (curves.empty()) throw InvalidDataError("no curves to export");
  csv::write_row(out, {"layer", "x", "r_squared", "n_examples"});
  for (const auto& curve : curves)
    for (const auto& p : curve.points)
      csv::write_row(out, {std::to_string(curve.layer), std::to_string(p.x),
                           csv::format_number(p.r_squared), std::to_string(p.n_examples)});
}

template <typename Curve>
void export_curves(std::span<const Curve> curves, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  write_curves_csv(out, curves);
  if (!out) throw FileError("write failed for " + path.string());
}

/// Parses a curve CSV back into per-layer curves, in order of first appearance.
template <typename Curve>
std::vector<Curve> read_curves_csv(std::istream& in) {
  const auto table = csv::read(in);
  const auto missing = table.missing({"layer", "x", "r_squared", "n_examples"});
  if (!missing.empty())
    throw FormatError("curve csv missing columns: " + fmt::format("{}", fmt::join(missing, ", ")));
  const auto c_layer = *table.column("layer");
  const auto c_x = *table.column("x");
  const auto c_r2 = *table.column("r_squared");
  const auto c_n = *table.column("n_examples");
  std::vector<Curve> out;
  std::map<int, std::size_t> index;
  for (const auto& row : table.rows) {
    const int layer = static_cast<int>(csv::to_integer(row[c_layer]));
    auto [it, inserted] = index.emplace(layer, out.size());
    if (inserted) {
      out.emplace_back();
      out.back().layer = layer;
    }
    out[it->second].points.push_back({static_cast<int>(csv::to_integer(row[c_x])),
                                      csv::to_double(row[c_r2]),
                                      static_cast<std::size_t>(csv::to_integer(row[c_n]))});
  }
  return out;
}

}  // namespace planprobe::probe
