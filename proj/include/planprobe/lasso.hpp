#pragma once

// LASSO linear regression by cyclic coordinate descent.
//
// Minimizes (1/2n) * ||y - X w - b||^2 + penalty * ||w||_1 with an
// unpenalized intercept. Columns are centered always and, by default, scaled
// to unit (population) variance before fitting, so the penalty is comparable
// across features. Weights are stored in that working space together with
// the column means and scales; predict() applies the same transform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "planprobe/error.hpp"

namespace planprobe::lasso {

/// Dense row-major n x d matrix.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols) {}
  DesignMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_)
      throw InvalidDataError(fmt::format("design matrix storage has {} values, expected {}x{}",
                                         values_.size(), rows_, cols_));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  const std::vector<double>& values() const { return values_; }

  void validate() const {
    if (values_.size() != rows_ * cols_) throw InvalidDataError("design matrix storage mismatch");
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (!std::isfinite(values_[k]))
        throw InvalidDataError(fmt::format("non-finite entry at row {}, column {}", k / cols_,
                                           k % cols_));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

namespace detail {

// Exact equality; rounding in the mean would otherwise leave ~1e-17 spread.
inline bool column_is_constant(const DesignMatrix& x, std::size_t j) {
  for (std::size_t i = 1; i < x.rows(); ++i)
    if (x(i, j) != x(0, j)) return false;
  return true;
}

}  // namespace detail

struct Standardized {
  DesignMatrix matrix;
  std::vector<double> means;
  std::vector<double> scales;
  std::vector<bool> constant;  // zero-variance columns; scale is 1, weight pinned at 0
};

inline Standardized standardize(const DesignMatrix& x) {
  if (x.rows() < 2) throw InvalidDataError("standardize needs at least 2 rows");
  x.validate();
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Standardized out{DesignMatrix(n, d), std::vector<double>(d, 0.0), std::vector<double>(d, 1.0),
                   std::vector<bool>(d, false)};
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    const bool flat = detail::column_is_constant(x, j);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    const double scale = std::sqrt(ss / static_cast<double>(n));
    out.means[j] = mean;
    if (!flat && scale > 0.0) {
      out.scales[j] = scale;
    } else {
      out.constant[j] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
      out.matrix(i, j) = out.constant[j] ? 0.0 : (x(i, j) - mean) / out.scales[j];
  }
  return out;
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

struct Options {
  double penalty = 0.3;
  double tol = 1e-6;
  std::size_t max_sweeps = 1000;
  bool standardize = true;
};

struct LassoModel {
  std::vector<double> weights;  // working-space weights
  double intercept = 0.0;       // working-space intercept
  double penalty = 0.0;
  std::size_t n_sweeps = 0;
  // Empty means identity transform.
  std::vector<double> column_means;
  std::vector<double> column_scales;

  /// Weights in the units of the original columns.
  std::vector<double> coefficients() const {
    std::vector<double> out(weights);
    if (!column_scales.empty())
      for (std::size_t j = 0; j < out.size(); ++j) out[j] /= column_scales[j];
    return out;
  }

  /// Intercept in the units of the original columns.
  double original_intercept() const {
    double b = intercept;
    if (!column_means.empty()) {
      const auto coef = coefficients();
      for (std::size_t j = 0; j < coef.size(); ++j) b -= coef[j] * column_means[j];
    }
    return b;
  }
};

struct FitReport {
  double r_squared = 0.0;
  std::size_t nonzero_count = 0;
  bool converged = false;
  double final_max_delta = 0.0;
  std::vector<bool> constant_columns;
  // Objective before the first sweep, then after each sweep.
  std::vector<double> objective_trace;
};

struct Fit {
  LassoModel model;
  FitReport report;
};

inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size())
    throw InvalidDataError(fmt::format("r_squared length mismatch: {} vs {}", y_true.size(),
                                       y_pred.size()));
  if (y_true.size() < 2) throw InvalidDataError("r_squared needs at least 2 values");
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
  }
  if (ss_tot == 0.0) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

inline std::vector<double> predict(const LassoModel& model, const DesignMatrix& x) {
  if (x.cols() != model.weights.size())
    throw InvalidDataError(fmt::format("predict: matrix has {} columns, model has {} weights",
                                       x.cols(), model.weights.size()));
  const bool transform = !model.column_means.empty();
  if (transform && (model.column_means.size() != model.weights.size() ||
                    model.column_scales.size() != model.weights.size()))
    throw InvalidDataError("predict: model standardization does not match its weights");
  std::vector<double> out(x.rows(), model.intercept);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    double acc = model.intercept;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (model.weights[j] == 0.0) continue;
      const double v = transform ? (row[j] - model.column_means[j]) / model.column_scales[j] : row[j];
      acc += model.weights[j] * v;
    }
    out[i] = acc;
  }
  return out;
}

namespace detail {

inline double objective(std::span<const double> residual, std::span<const double> weights,
                        double penalty) {
  double ss = 0.0;
  for (double r : residual) ss += r * r;
  double l1 = 0.0;
  for (double w : weights) l1 += std::abs(w);
  return ss / (2.0 * static_cast<double>(residual.size())) + penalty * l1;
}

}  // namespace detail

inline Fit fit(const DesignMatrix& x, std::span<const double> y, const Options& options = {}) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (y.size() != n)
    throw InvalidDataError(fmt::format("fit: {} targets for {} rows", y.size(), n));
  if (n < 2) throw InvalidDataError("fit needs at least 2 rows");
  if (d < 1) throw InvalidDataError("fit needs at least 1 column");
  if (!(options.penalty >= 0.0) || !std::isfinite(options.penalty))
    throw InvalidParameterError("penalty must be finite and >= 0");
  if (!(options.tol > 0.0)) throw InvalidParameterError("tolerance must be > 0");
  x.validate();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(y[i])) throw InvalidDataError(fmt::format("non-finite target at row {}", i));

  const double inv_n = 1.0 / static_cast<double>(n);

  // Column-major working copy: centered, optionally scaled.
  std::vector<double> z(n * d);
  std::vector<double> means(d, 0.0);
  std::vector<double> scales(d, 1.0);
  std::vector<double> col_sq(d, 0.0);  // (1/n) * ||z_j||^2
  std::vector<bool> constant(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean *= inv_n;
    double* col = z.data() + j * n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = x(i, j) - mean;
      ss += col[i] * col[i];
    }
    means[j] = mean;
    const double var = ss * inv_n;
    if (detail::column_is_constant(x, j) || !(var > 0.0)) {
      constant[j] = true;
      continue;
    }
    if (options.standardize) {
      const double scale = std::sqrt(var);
      scales[j] = scale;
      double ss_scaled = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        col[i] /= scale;
        ss_scaled += col[i] * col[i];
      }
      col_sq[j] = ss_scaled * inv_n;
    } else {
      col_sq[j] = var;
    }
  }

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean *= inv_n;
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - y_mean;

  std::vector<double> w(d, 0.0);
  FitReport report;
  report.objective_trace.push_back(detail::objective(residual, w, options.penalty));

  std::size_t sweeps = 0;
  double max_delta = 0.0;
  bool converged = false;
  while (sweeps < options.max_sweeps) {
    max_delta = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (constant[j]) continue;
      const double* col = z.data() + j * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += col[i] * residual[i];
      const double rho = dot * inv_n + col_sq[j] * w[j];
      const double updated = soft_threshold(rho, options.penalty) / col_sq[j];
      const double delta = updated - w[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * col[i];
        w[j] = updated;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    ++sweeps;
    report.objective_trace.push_back(detail::objective(residual, w, options.penalty));
    if (max_delta < options.tol) {
      converged = true;
      break;
    }
  }

  Fit result;
  result.model.weights = std::move(w);
  result.model.intercept = y_mean;
  result.model.penalty = options.penalty;
  result.model.n_sweeps = sweeps;
  result.model.column_means = std::move(means);
  result.model.column_scales = std::move(scales);

  report.converged = converged;
  report.final_max_delta = max_delta;
  report.nonzero_count = static_cast<std::size_t>(
      std::count_if(result.model.weights.begin(), result.model.weights.end(),
                    [](double v) { return v != 0.0; }));
  report.constant_columns = std::move(constant);
  const auto fitted = predict(result.model, x);
  report.r_squared = r_squared(y, fitted);
  result.report = std::move(report);
  return result;
}

inline Fit fit(const DesignMatrix& x, std::span<const double> y, double penalty, double tol,
               std::size_t max_sweeps) {
  return fit(x, y, Options{penalty, tol, max_sweeps, true});
}

/// Out-of-fold R^2 from contiguous k-fold splits.
inline double cross_validated_r_squared(const DesignMatrix& x, std::span<const double> y,
                                        const Options& options, std::size_t folds) {
  const std::size_t n = x.rows();
  if (folds < 2 || folds > n / 2)
    throw InvalidParameterError(fmt::format("folds must be in [2, {}]", n / 2));
  if (y.size() != n) throw InvalidDataError("cross validation: target length mismatch");
  std::vector<double> oof(n, 0.0);
  for (std::size_t k = 0; k < folds; ++k) {
    const std::size_t lo = k * n / folds;
    const std::size_t hi = (k + 1) * n / folds;
    DesignMatrix train(n - (hi - lo), x.cols());
    DesignMatrix test(hi - lo, x.cols());
    std::vector<double> y_train;
    y_train.reserve(n - (hi - lo));
    std::size_t tr = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto src = x.row(i);
      if (i >= lo && i < hi) {
        std::copy(src.begin(), src.end(), test.row(i - lo).begin());
      } else {
        std::copy(src.begin(), src.end(), train.row(tr++).begin());
        y_train.push_back(y[i]);
      }
    }
    const auto model = fit(train, y_train, options).model;
    const auto pred = predict(model, test);
    std::copy(pred.begin(), pred.end(), oof.begin() + static_cast<std::ptrdiff_t>(lo));
  }
  return r_squared(y, oof);
}

}  // namespace planprobe::lasso
