#pragma once

// First-position bias tables and per-position trajectory summaries for the
// Gaussian-continuation experiment.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "planprobe/csv.hpp"
#include "planprobe/error.hpp"
#include "planprobe/records.hpp"
#include "planprobe/stats.hpp"

namespace planprobe::analysis {

using records::Stage;
using records::TrialRecord;

inline std::vector<double> as_doubles(const std::vector<std::int64_t>& values) {
  return {values.begin(), values.end()};
}

inline std::vector<stats::PositionSummary> position_summaries(
    const std::vector<TrialRecord>& records) {
  if (records.empty()) throw InvalidDataError("no records to summarize");
  std::vector<std::vector<double>> sequences;
  for (const auto& r : records) {
    if (r.condition != records.front().condition)
      throw InvalidDataError(fmt::format("records mix conditions '{}' and '{}'",
                                         records.front().condition, r.condition));
    if (r.parsed_values.empty())
      throw InvalidDataError(fmt::format("record '{}' has no parsed values", r.condition));
    sequences.push_back(as_doubles(r.parsed_values));
  }
  return stats::summarize_positions(sequences);
}

struct StageCell {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  stats::TTestResult vs_mu;
};

struct BiasRow {
  std::int64_t mu = 0;
  StageCell gen1;
  StageCell gen2;
  stats::TTestResult gen1_vs_gen2;
};

struct BiasTable {
  std::vector<BiasRow> rows;
};

/// Records from one stage keyed by mu; failed or empty records are dropped.
inline std::map<std::int64_t, std::vector<double>> first_values_by_mu(
    const std::vector<TrialRecord>& records, Stage stage) {
  std::map<std::int64_t, std::vector<double>> out;
  for (const auto& r : records) {
    if (!r.exp2 || r.exp2->stage != stage) continue;
    if (r.status == records::TrialStatus::failed || r.parsed_values.empty()) continue;
    out[r.exp2->mu].push_back(static_cast<double>(r.parsed_values.front()));
  }
  // sorted so the table does not depend on record order
  for (auto& [mu, values] : out) std::sort(values.begin(), values.end());
  return out;
}

inline StageCell stage_cell(const std::vector<double>& values, std::int64_t mu) {
  StageCell cell;
  const auto m = stats::moments(values);
  cell.n = m.n;
  cell.mean = m.mean;
  cell.std_error = std::sqrt(m.variance / static_cast<double>(m.n));
  cell.vs_mu = stats::one_sample_ttest(values, static_cast<double>(mu));
  return cell;
}

/// `mus` fixes row order; when empty, rows follow descending mu.
inline BiasTable build_bias_table(const std::vector<TrialRecord>& gen1,
                                  const std::vector<TrialRecord>& gen2,
                                  std::vector<std::int64_t> mus = {}) {
  const auto first1 = first_values_by_mu(gen1, Stage::gen1);
  const auto first2 = first_values_by_mu(gen2, Stage::gen2);
  if (mus.empty()) {
    std::set<std::int64_t> all;
    for (const auto& [mu, v] : first1) all.insert(mu);
    for (const auto& [mu, v] : first2) all.insert(mu);
    mus.assign(all.rbegin(), all.rend());
  }
  if (mus.empty()) throw InvalidDataError("no exp2 records to tabulate");
  BiasTable table;
  for (auto mu : mus) {
    const auto a = first1.find(mu);
    const auto b = first2.find(mu);
    if (a == first1.end()) throw LinkageError(fmt::format("no gen1 records for mu={}", mu));
    if (b == first2.end()) throw LinkageError(fmt::format("no gen2 records for mu={}", mu));
    BiasRow row;
    row.mu = mu;
    row.gen1 = stage_cell(a->second, mu);
    row.gen2 = stage_cell(b->second, mu);
    row.gen1_vs_gen2 = stats::welch_ttest(a->second, b->second);
    table.rows.push_back(row);
  }
  return table;
}

/// "**" for p < .001, "*" for p < .05.
inline std::string significance_stars(double p) {
  if (p < 0.001) return "**";
  if (p < 0.05) return "*";
  return "";
}

/// Fixed decimals without a leading zero: 0.53 -> ".53", -0.25 -> "-.25".
inline std::string apa_number(double value, int decimals = 2) {
  std::string s = fmt::format("{:.{}f}", value, decimals);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

inline std::string format_cell(const StageCell& cell) {
  return fmt::format("{} ({}){}", apa_number(cell.mean), apa_number(cell.std_error),
                     significance_stars(cell.vs_mu.p_value));
}

inline std::string format_welch(const stats::TTestResult& t) {
  return fmt::format("t={}{}", apa_number(t.t_statistic), significance_stars(t.p_value));
}

namespace detail {

inline std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s + std::string(width > display_width(s) ? width - display_width(s) : 0, ' ');
}

}  // namespace detail

/// Aligned plain-text rendering with the Conditions / Gen. I / Gen. II /
/// I vs. II columns.
inline std::string render_text(const BiasTable& table, const std::string& title = "") {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Conditions", "Gen. I", "Gen. II", "I vs. II"});
  for (const auto& row : table.rows)
    cells.push_back({fmt::format("\xCE\xBC = {}", row.mu), format_cell(row.gen1),
                     format_cell(row.gen2), format_welch(row.gen1_vs_gen2)});
  std::vector<std::size_t> widths(4, 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < 4; ++c) widths[c] = std::max(widths[c], detail::display_width(line[c]));
  std::size_t total = 0;
  for (std::size_t c = 0; c < 4; ++c) total += widths[c] + (c + 1 < 4 ? 2 : 0);
  const std::string rule(total, '-');

  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  out << rule << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < 4; ++c) {
      line += c + 1 < 4 ? detail::pad(cells[r][c], widths[c] + 2) : cells[r][c];
    }
    out << line << '\n';
    if (r == 0) out << rule << '\n';
  }
  out << rule << '\n';
  out << "Note. Standard errors in parentheses. Gen. I and Gen. II stars: one-sample t-test "
         "against mu; I vs. II: Welch t-test. *p < .05, **p < .001.\n";
  return out.str();
}

inline std::string render_csv(const BiasTable& table) {
  std::ostringstream out;
  csv::write_row(out, {"mu", "gen1_mean", "gen1_se", "gen1_n", "gen1_t", "gen1_df", "gen1_p",
                       "gen2_mean", "gen2_se", "gen2_n", "gen2_t", "gen2_df", "gen2_p",
                       "welch_t", "welch_df", "welch_p"});
  for (const auto& row : table.rows) {
    const auto f = csv::format_number;
    csv::write_row(out, {std::to_string(row.mu), f(row.gen1.mean), f(row.gen1.std_error),
                         std::to_string(row.gen1.n), f(row.gen1.vs_mu.t_statistic),
                         f(row.gen1.vs_mu.degrees_of_freedom), f(row.gen1.vs_mu.p_value),
                         f(row.gen2.mean), f(row.gen2.std_error), std::to_string(row.gen2.n),
                         f(row.gen2.vs_mu.t_statistic), f(row.gen2.vs_mu.degrees_of_freedom),
                         f(row.gen2.vs_mu.p_value), f(row.gen1_vs_gen2.t_statistic),
                         f(row.gen1_vs_gen2.degrees_of_freedom), f(row.gen1_vs_gen2.p_value)});
  }
  return out.str();
}

/// Per-position summaries for the three sample sets of every mu: the Gaussian
/// context, gen1 output and gen2 output. Columns match the bias_trajectory
/// plot kind.
inline std::string trajectory_csv(const std::vector<TrialRecord>& gen1,
                                  const std::vector<TrialRecord>& gen2) {
  std::map<std::int64_t, std::vector<std::vector<double>>> context, out1, out2;
  for (const auto& r : gen1) {
    if (!r.exp2 || r.exp2->stage != Stage::gen1) continue;
    context[r.exp2->mu].push_back(as_doubles(r.exp2->context_values));
    if (!r.parsed_values.empty()) out1[r.exp2->mu].push_back(as_doubles(r.parsed_values));
  }
  for (const auto& r : gen2) {
    if (!r.exp2 || r.exp2->stage != Stage::gen2) continue;
    if (!r.parsed_values.empty()) out2[r.exp2->mu].push_back(as_doubles(r.parsed_values));
  }
  if (context.empty()) throw InvalidDataError("no gen1 records for trajectory summary");
  std::ostringstream out;
  csv::write_row(out, {"mu", "stage", "position", "mean", "ci95_low", "ci95_high", "n"});
  const auto emit = [&](std::int64_t mu, const char* stage,
                        const std::vector<std::vector<double>>& seqs) {
    if (seqs.empty()) return;
    for (const auto& s : stats::summarize_positions(seqs))
      csv::write_row(out, {std::to_string(mu), stage, std::to_string(s.position),
                           csv::format_number(s.mean), csv::format_number(s.ci95_low),
                           csv::format_number(s.ci95_high), std::to_string(s.n)});
  };
  for (auto it = context.rbegin(); it != context.rend(); ++it) {
    const auto mu = it->first;
    emit(mu, "gaussian", it->second);
    emit(mu, "gen1", out1[mu]);
    emit(mu, "gen2", out2[mu]);
  }
  return out.str();
}

}  // namespace planprobe::analysis
