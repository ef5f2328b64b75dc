#pragma once

// Deterministic SVG figures from CSV tables. Output depends only on the
// table contents and the PlotSpec; coordinates are printed with two decimals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "planprobe/csv.hpp"
#include "planprobe/error.hpp"

namespace planprobe::plot {

enum class PlotKind { offset_curve, position_curve, bias_trajectory, simulator_trajectory };

inline PlotKind parse_kind(const std::string& text) {
  if (text == "offset_curve") return PlotKind::offset_curve;
  if (text == "position_curve") return PlotKind::position_curve;
  if (text == "bias_trajectory") return PlotKind::bias_trajectory;
  if (text == "simulator_trajectory") return PlotKind::simulator_trajectory;
  throw InvalidParameterError("unknown plot kind '" + text + "'");
}

struct PlotSpec {
  PlotKind kind = PlotKind::offset_curve;
  std::string input_csv;
  std::string x_label;  // empty: kind default
  std::string y_label;
  std::string group_key = "layer";  // curve kinds only
  std::string title;
};

inline std::vector<std::string> required_columns(const PlotSpec& spec) {
  switch (spec.kind) {
    case PlotKind::offset_curve:
    case PlotKind::position_curve: return {spec.group_key, "x", "r_squared"};
    case PlotKind::bias_trajectory: return {"mu", "stage", "position", "mean", "ci95_low", "ci95_high"};
    case PlotKind::simulator_trajectory: return {"step", "posterior_mean", "emission", "planning_strength"};
  }
  return {};
}

namespace detail {

inline std::string num(double v) {
  if (std::abs(v) < 0.005) v = 0.0;
  return fmt::format("{:.2f}", v);
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0) * mag;
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
    out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return out;
}

inline std::string tick_label(double v) {
  std::string s = fmt::format("{:.6g}", v);
  return s == "-0" ? "0" : s;
}

/// Light to dark blue, for ordered groups.
inline std::string ramp_color(std::size_t i, std::size_t count) {
  const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 1.0;
  const auto lerp = [t](int a, int b) {
    return static_cast<int>(std::lround(a + (b - a) * t));
  };
  return fmt::format("#{:02x}{:02x}{:02x}", lerp(0xa6, 0x08), lerp(0xc8, 0x30), lerp(0xe6, 0x6b));
}

struct Panel {
  double x = 0, y = 0, w = 0, h = 0;
  Range xr, yr;

  Panel(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {}

  double px(double v) const { return x + (v - xr.lo) / (xr.hi - xr.lo) * w; }
  double py(double v) const { return y + h - (v - yr.lo) / (yr.hi - yr.lo) * h; }

  void axes(std::ostringstream& out, const std::string& xlabel, const std::string& ylabel,
            bool x_ticks = true) const {
    out << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>)",
                       num(x), num(y), num(w), num(h))
        << '\n';
    if (x_ticks) {
      for (double t : nice_ticks(xr.lo, xr.hi)) {
        out << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#333"/>)", num(px(t)),
                           num(y + h), num(y + h + 4))
            << '\n';
        out << fmt::format(R"(<text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>)",
                           num(px(t)), num(y + h + 15), tick_label(t))
            << '\n';
      }
    }
    for (double t : nice_ticks(yr.lo, yr.hi, 4)) {
      out << fmt::format(R"(<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#333"/>)", num(x - 4),
                         num(x), num(py(t)))
          << '\n';
      out << fmt::format(R"(<text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>)",
                         num(x - 6), num(py(t) + 3), tick_label(t))
          << '\n';
    }
    if (!xlabel.empty())
      out << fmt::format(R"(<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>)",
                         num(x + w / 2), num(y + h + 32), xml_escape(xlabel))
          << '\n';
    if (!ylabel.empty())
      out << fmt::format(
                 R"svg(<text x="{0}" y="{1}" font-size="12" text-anchor="middle" transform="rotate(-90 {0} {1})">{2}</text>)svg",
                 num(x - 40), num(y + h / 2), xml_escape(ylabel))
          << '\n';
  }

  std::string points(const std::vector<std::pair<double, double>>& xy) const {
    std::string s;
    for (const auto& [a, b] : xy) {
      if (!s.empty()) s += ' ';
      s += num(px(a)) + "," + num(py(b));
    }
    return s;
  }
};

inline std::string header(double width, double height, const std::string& title) {
  std::string s = fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">)",
      num(width), num(height));
  s += "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    s += fmt::format(R"(<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>)",
                     num(width / 2), xml_escape(title)) +
         "\n";
  return s;
}

inline std::string render_curves(const PlotSpec& spec, const csv::Table& table) {
  const auto c_group = *table.column(spec.group_key);
  const auto c_x = *table.column("x");
  const auto c_y = *table.column("r_squared");
  std::map<double, std::vector<std::pair<double, double>>> groups;
  std::map<double, std::string> names;
  Panel panel{80, 40, 560, 320};
  panel.yr.include(0.0);
  panel.yr.include(1.0);
  for (const auto& row : table.rows) {
    const double g = csv::to_double(row[c_group]);
    const double x = csv::to_double(row[c_x]);
    const double y = csv::to_double(row[c_y]);
    groups[g].emplace_back(x, y);
    names.emplace(g, row[c_group]);
    panel.xr.include(x);
    panel.yr.include(y);
  }
  panel.xr.finish();
  panel.yr.finish();
  const bool offsets = spec.kind == PlotKind::offset_curve;
  const std::string xlabel =
      !spec.x_label.empty() ? spec.x_label : offsets ? "offset (tokens)" : "position q";
  const std::string ylabel = !spec.y_label.empty() ? spec.y_label : "R\xC2\xB2";

  std::ostringstream out;
  out << header(760, 420, spec.title);
  panel.axes(out, xlabel, ylabel);
  std::size_t i = 0;
  for (auto& [g, pts] : groups) {
    std::sort(pts.begin(), pts.end());
    const auto color = ramp_color(i, groups.size());
    out << fmt::format(R"(<polyline data-{}="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>)",
                       xml_escape(spec.group_key), xml_escape(names[g]), color, panel.points(pts))
        << '\n';
    const double ly = 50 + 16 * static_cast<double>(i);
    out << fmt::format(R"(<rect x="660" y="{}" width="12" height="3" fill="{}"/>)", num(ly - 4), color)
        << '\n';
    out << fmt::format(R"(<text x="678" y="{}" font-size="10">{} {}</text>)", num(ly),
                       xml_escape(spec.group_key), xml_escape(names[g]))
        << '\n';
    ++i;
  }
  out << "</svg>\n";
  return out.str();
}

inline std::string render_bias(const PlotSpec& spec, const csv::Table& table) {
  const auto c_mu = *table.column("mu");
  const auto c_stage = *table.column("stage");
  const auto c_pos = *table.column("position");
  const auto c_mean = *table.column("mean");
  const auto c_lo = *table.column("ci95_low");
  const auto c_hi = *table.column("ci95_high");

  struct Point {
    double pos, mean, lo, hi;
  };
  static const std::vector<std::string> kStages{"gaussian", "gen1", "gen2"};
  std::map<double, std::map<std::string, std::vector<Point>>> panels;
  std::map<double, std::string> names;
  std::map<std::string, double> stage_len;
  for (const auto& row : table.rows) {
    const double mu = csv::to_double(row[c_mu]);
    const auto& stage = row[c_stage];
    if (std::find(kStages.begin(), kStages.end(), stage) == kStages.end())
      throw FormatError("unknown stage '" + stage + "' in bias trajectory csv");
    Point p{csv::to_double(row[c_pos]), csv::to_double(row[c_mean]), csv::to_double(row[c_lo]),
            csv::to_double(row[c_hi])};
    panels[mu][stage].push_back(p);
    names.emplace(mu, row[c_mu]);
    stage_len[stage] = std::max(stage_len[stage], p.pos);
  }
  // stages laid out left to right on one axis
  std::map<std::string, double> stage_offset;
  double total = 0;
  for (const auto& s : kStages) {
    stage_offset[s] = total;
    total += stage_len.count(s) ? stage_len[s] : 0.0;
  }
  static const std::map<std::string, std::string> kColor{
      {"gaussian", "#7f7f7f"}, {"gen1", "#d62728"}, {"gen2", "#1f77b4"}};

  const double panel_h = 110;
  const double gap = 30;
  const double top = spec.title.empty() ? 20 : 40;
  const double height = top + static_cast<double>(panels.size()) * (panel_h + gap) + 40;
  std::ostringstream out;
  out << header(820, height, spec.title);
  std::size_t k = 0;
  // largest mu on top
  for (auto it = panels.rbegin(); it != panels.rend(); ++it, ++k) {
    const double mu = it->first;
    Panel panel{80, top + static_cast<double>(k) * (panel_h + gap), 680, panel_h};
    panel.xr.include(1.0);
    panel.xr.include(std::max(1.0, total));
    panel.yr.include(mu);
    for (const auto& [stage, pts] : it->second)
      for (const auto& p : pts) {
        panel.yr.include(p.lo);
        panel.yr.include(p.hi);
        panel.yr.include(p.mean);
      }
    panel.xr.finish();
    panel.yr.finish();
    out << fmt::format(R"(<g class="panel" data-mu="{}">)", xml_escape(names[mu])) << '\n';
    const bool last = std::next(it) == panels.rend();
    panel.axes(out, last ? (spec.x_label.empty() ? "generation position" : spec.x_label) : "",
               spec.y_label.empty() ? "value" : spec.y_label);
    out << fmt::format(R"(<text x="{}" y="{}" font-size="12">{}</text>)", num(panel.x + 6),
                       num(panel.y + 14), "\xCE\xBC = " + xml_escape(names[mu]))
        << '\n';
    out << fmt::format(
               R"(<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#555" stroke-dasharray="4 3"/>)",
               num(panel.x), num(panel.x + panel.w), num(panel.py(mu)))
        << '\n';
    for (const auto& stage : kStages) {
      auto found = it->second.find(stage);
      if (found == it->second.end()) continue;
      auto pts = found->second;
      std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.pos < b.pos; });
      const double off = stage_offset[stage];
      std::vector<std::pair<double, double>> mean, band;
      for (const auto& p : pts) {
        mean.emplace_back(off + p.pos, p.mean);
        band.emplace_back(off + p.pos, p.hi);
      }
      for (auto p = pts.rbegin(); p != pts.rend(); ++p) band.emplace_back(off + p->pos, p->lo);
      const auto& color = kColor.at(stage);
      out << fmt::format(R"(<polygon data-stage="{}" fill="{}" fill-opacity="0.2" stroke="none" points="{}"/>)",
                         stage, color, panel.points(band))
          << '\n';
      out << fmt::format(R"(<polyline data-stage="{}" fill="none" stroke="{}" stroke-width="1.2" points="{}"/>)",
                         stage, color, panel.points(mean))
          << '\n';
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline std::string render_simulator(const PlotSpec& spec, const csv::Table& table) {
  const auto c_step = *table.column("step");
  const auto c_mean = *table.column("posterior_mean");
  const auto c_emit = *table.column("emission");
  const auto c_strength = *table.column("planning_strength");
  std::vector<std::pair<double, double>> mean, emission, strength;
  Panel top{80, 40, 600, 220};
  Panel bottom{80, 320, 600, 120};
  for (const auto& row : table.rows) {
    const double step = csv::to_double(row[c_step]);
    mean.emplace_back(step, csv::to_double(row[c_mean]));
    emission.emplace_back(step, csv::to_double(row[c_emit]));
    strength.emplace_back(step, csv::to_double(row[c_strength]));
    top.xr.include(step);
    bottom.xr.include(step);
    top.yr.include(mean.back().second);
    top.yr.include(emission.back().second);
  }
  bottom.yr.include(0.0);
  bottom.yr.include(1.0);
  top.xr.finish();
  top.yr.finish();
  bottom.xr.finish();
  bottom.yr.finish();
  std::ostringstream out;
  out << header(720, 490, spec.title);
  top.axes(out, "", spec.y_label.empty() ? "plan / emission" : spec.y_label);
  for (const auto& [x, y] : emission)
    out << fmt::format(R"(<circle cx="{}" cy="{}" r="2" fill="#d62728"/>)", num(top.px(x)),
                       num(top.py(y)))
        << '\n';
  out << fmt::format(R"(<polyline data-series="posterior_mean" fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>)",
                     top.points(mean))
      << '\n';
  bottom.axes(out, spec.x_label.empty() ? "step" : spec.x_label, "planning strength");
  out << fmt::format(R"(<polyline data-series="planning_strength" fill="none" stroke="#2ca02c" stroke-width="1.5" points="{}"/>)",
                     bottom.points(strength))
      << '\n';
  out << "</svg>\n";
  return out.str();
}

}  // namespace detail

inline std::string render_svg(const PlotSpec& spec, const csv::Table& table) {
  const auto missing = table.missing(required_columns(spec));
  if (!missing.empty())
    throw FormatError(fmt::format("plot input missing columns: {}", fmt::join(missing, ", ")));
  if (table.rows.empty()) throw FormatError("plot input has no data rows");
  switch (spec.kind) {
    case PlotKind::offset_curve:
    case PlotKind::position_curve: return detail::render_curves(spec, table);
    case PlotKind::bias_trajectory: return detail::render_bias(spec, table);
    case PlotKind::simulator_trajectory: return detail::render_simulator(spec, table);
  }
  throw InvalidParameterError("unknown plot kind");
}

inline void render_plot(const PlotSpec& spec, const std::filesystem::path& out_path) {
  const auto table = csv::read_file(spec.input_csv);
  csv::write_file(out_path.string(), render_svg(spec, table));
}

}  // namespace planprobe::plot
