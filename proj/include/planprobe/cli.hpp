#pragma once

// Command-line front end. dispatch() parses, runs one subcommand and maps
// errors to exit codes; it never calls exit() so it can be driven from tests.
//
// Settings resolve flags first, then PLANPROBE_* environment variables, then
// a key=value config file named by --config. The endpoint token is read from
// PLANPROBE_API_KEY only.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "planprobe/bias_table.hpp"
#include "planprobe/dump.hpp"
#include "planprobe/endpoint.hpp"
#include "planprobe/error.hpp"
#include "planprobe/harness.hpp"
#include "planprobe/manifest.hpp"
#include "planprobe/parallel.hpp"
#include "planprobe/planmodel.hpp"
#include "planprobe/probe.hpp"
#include "planprobe/records.hpp"
#include "planprobe/svg_plot.hpp"
#include "planprobe/synthetic.hpp"

namespace planprobe::cli {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kData = 3,
  kTransport = 4,
  kFormat = 5,
  kFile = 6,
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter:
    case ErrorKind::invalid_data:
    case ErrorKind::degenerate_data:
    case ErrorKind::linkage: return kData;
    case ErrorKind::transport: return kTransport;
    case ErrorKind::format:
    case ErrorKind::alignment:
    case ErrorKind::parse: return kFormat;
    case ErrorKind::file: return kFile;
  }
  return kOther;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

// option name -> environment variable
inline const std::map<std::string, std::string> kEnvSettings{
    {"base-url", "PLANPROBE_BASE_URL"},
    {"model", "PLANPROBE_MODEL"},
};

/// key = value lines; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(fmt::format("{}:{}: expected key = value", path.string(), line_no));
    auto key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Parses "15-25", "1,3,5-7" into a sorted list without duplicates.
inline std::vector<int> parse_index_list(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string part;
  const auto to_int = [&text](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvalidParameterError("cannot parse index list '" + text + "'");
    }
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.insert(to_int(part));
    } else {
      const int a = to_int(part.substr(0, dash));
      const int b = to_int(part.substr(dash + 1));
      if (a > b) throw InvalidParameterError("descending range '" + part + "'");
      for (int i = a; i <= b; ++i) out.insert(i);
    }
  }
  if (out.empty()) throw InvalidParameterError("empty index list '" + text + "'");
  return {out.begin(), out.end()};
}

inline std::vector<std::int64_t> parse_value_list(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InvalidParameterError("cannot parse value list '" + text + "'");
    }
  }
  if (out.empty()) throw InvalidParameterError("empty value list '" + text + "'");
  return out;
}

namespace detail {

struct EndpointFlags {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path;
  std::string api = "completions";
  std::string model = "default";
  int max_tokens = 512;
  double temperature = 0.0;
  int timeout_ms = 60000;
  int retries = 3;
  int backoff_ms = 250;
  std::size_t workers = 4;

  void add(CLI::App* sub) {
    sub->add_option("--base-url", base_url, "endpoint base URL (env PLANPROBE_BASE_URL)");
    sub->add_option("--path", path, "request path; default by --api");
    sub->add_option("--api", api, "completions or chat")->check(CLI::IsMember({"completions", "chat"}));
    sub->add_option("--model", model, "model name sent to the endpoint (env PLANPROBE_MODEL)");
    sub->add_option("--max-tokens", max_tokens, "completion token budget");
    sub->add_option("--temperature", temperature, "sampling temperature");
    sub->add_option("--timeout-ms", timeout_ms, "per-request timeout");
    sub->add_option("--retries", retries, "retries on connection errors, 429 and 5xx");
    sub->add_option("--backoff-ms", backoff_ms, "initial retry backoff, doubled per retry");
    sub->add_option("--workers", workers, "concurrent requests per batch");
  }

  endpoint::EndpointConfig config(const EnvLookup& env) const {
    endpoint::EndpointConfig c;
    c.base_url = base_url;
    c.path = path;
    c.api = endpoint::parse_api_kind(api);
    c.model_name = model;
    c.max_tokens = max_tokens;
    c.temperature = temperature;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    c.retry_limit = retries;
    c.initial_backoff = std::chrono::milliseconds(backoff_ms);
    if (auto token = env(endpoint::kTokenEnvVar)) c.auth_token = *token;
    return c;
  }
};

inline std::string option_key(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? opt->get_name() : names.front();
}

/// Effective value of every option on the subcommand, for the manifest.
inline std::map<std::string, std::string> effective_flags(const CLI::App* sub,
                                                          const std::set<std::string>& switches) {
  std::map<std::string, std::string> out;
  for (const auto* opt : sub->get_options()) {
    const auto key = option_key(opt);
    if (key == "help") continue;
    if (switches.count(key)) {
      out[key] = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      std::string joined;
      for (const auto& r : opt->results()) joined += (joined.empty() ? "" : ",") + r;
      out[key] = joined;
    } else {
      out[key] = opt->get_default_str();
    }
  }
  return out;
}

inline bool truthy(const std::string& v) {
  return v == "1" || v == "true" || v == "yes" || v == "on";
}

/// Appends config-file and environment settings for options the command line
/// left unset. Flags given on the command line always win.
inline std::vector<std::string> apply_settings(
    const std::vector<std::string>& args, const CLI::App* sub,
    const std::set<std::string>& switches, const std::map<std::string, std::string>& config,
    const EnvLookup& env) {
  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0) continue;
    given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::map<std::string, std::string> merged = config;
  for (const auto& [key, var] : kEnvSettings)
    if (auto v = env(var)) merged[key] = *v;
  std::vector<std::string> out = args;
  for (const auto* opt : sub->get_options()) {
    const auto key = option_key(opt);
    if (given.count(key)) continue;
    auto it = merged.find(key);
    if (it == merged.end()) continue;
    if (switches.count(key)) {
      if (truthy(it->second)) out.push_back("--" + key);
    } else {
      out.push_back("--" + key + "=" + it->second);
    }
  }
  return out;
}

inline std::filesystem::path resolve_out(const std::string& run_dir, const std::string& out) {
  std::filesystem::path p(out);
  if (!run_dir.empty() && p.is_relative()) p = std::filesystem::path(run_dir) / p;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p;
}

}  // namespace detail

/// Runs one invocation; `args` excludes the program name.
inline int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err,
                    const EnvLookup& env = process_env) {
  CLI::App app{"Planning-probe experiment toolkit", "planprobe"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  app.failure_message(CLI::FailureMessage::help);
  app.footer(
      "Settings: command-line flags override PLANPROBE_BASE_URL / PLANPROBE_MODEL, which "
      "override a key = value file given by --config FILE.\nThe endpoint token is read from "
      "PLANPROBE_API_KEY.\nExit codes: 0 ok, 2 usage, 3 data, 4 transport, 5 format, 6 file.");

  std::map<CLI::App*, std::set<std::string>> switches;
  std::string run_dir;
  const auto add_run_dir = [&run_dir](CLI::App* sub) {
    sub->add_option("--run-dir", run_dir, "directory for relative output paths");
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a planning trajectory to CSV");
  planmodel::DomainPrior sim_prior{-30.0, 0.05};
  planmodel::EvidenceModel sim_ev{0.0, 0.5, 0.2, 0};
  std::size_t sim_steps = 64;
  double sim_variance = 1.0;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("--prior-mean", sim_prior.mean, "domain prior mean");
  sim->add_option("--prior-precision", sim_prior.precision, "domain prior precision");
  sim->add_option("--target", sim_ev.target_estimate, "context target estimate");
  sim->add_option("--base-gain", sim_ev.base_gain, "evidence gain before self tokens");
  sim->add_option("--gain-growth", sim_ev.gain_growth, "gain growth per self token");
  sim->add_option("--self-tokens", sim_ev.self_token_count, "self tokens already in context");
  sim->add_option("--steps", sim_steps, "emission steps");
  sim->add_option("--emission-variance", sim_variance, "emission noise variance");
  sim->add_option("--seed", sim_seed, "noise seed");
  sim->add_option("--out", sim_out, "trajectory CSV")->required();
  add_run_dir(sim);

  // run-exp1
  auto* exp1 = app.add_subcommand("run-exp1", "height-guess generation runs to JSONL");
  detail::EndpointFlags exp1_ep;
  harness::Exp1Plan exp1_plan;
  std::string exp1_out;
  exp1_ep.add(exp1);
  exp1->add_option("--start-min", exp1_plan.start_min, "first starting height");
  exp1->add_option("--start-max", exp1_plan.start_max, "last starting height (inclusive)");
  exp1->add_option("--count", exp1_plan.count, "values per trial including the start");
  exp1->add_option("--out", exp1_out, "records JSONL")->required();
  add_run_dir(exp1);

  // run-exp2
  auto* exp2 = app.add_subcommand("run-exp2", "Gaussian-continuation runs to JSONL");
  detail::EndpointFlags exp2_ep;
  harness::Exp2Plan exp2_plan;
  std::string exp2_stage = "gen1";
  std::string exp2_mus = "50,30,10,0,-10,-30,-50";
  std::string exp2_gen1;
  std::string exp2_out;
  exp2_ep.add(exp2);
  exp2->add_option("--stage", exp2_stage, "gen1 or gen2")->check(CLI::IsMember({"gen1", "gen2"}));
  exp2->add_option("--mus", exp2_mus, "comma-separated means");
  exp2->add_option("--replicates", exp2_plan.replicates, "replicates per mean");
  exp2->add_option("--sigma", exp2_plan.sigma, "context standard deviation");
  exp2->add_option("--context", exp2_plan.context_count, "context values per prompt");
  exp2->add_option("--generate", exp2_plan.generate_count, "values requested per trial");
  exp2->add_option("--seed", exp2_plan.seed, "context sampling seed");
  exp2->add_option("--gen1", exp2_gen1, "gen1 records JSONL (gen2 only)");
  exp2->add_option("--out", exp2_out, "records JSONL")->required();
  add_run_dir(exp2);

  // probe
  auto* prb = app.add_subcommand("probe", "fit LASSO probes on an embedding dump");
  std::string prb_dump;
  std::string prb_mode = "offset";
  std::string prb_layers;
  std::string prb_offsets = "1-172";
  std::string prb_role;
  std::string prb_out;
  probe::Options prb_opts;
  prb_opts.workers = default_worker_count();
  prb->add_option("--dump", prb_dump, "PLND embedding dump")->required();
  prb->add_option("--alpha", prb_opts.penalty, "L1 penalty");
  prb->add_option("--mode", prb_mode, "offset or position")->check(CLI::IsMember({"offset", "position"}));
  prb->add_option("--layers", prb_layers, "layer list, e.g. 15-25; default all");
  prb->add_option("--offsets", prb_offsets, "offset list for offset mode");
  prb->add_option("--role", prb_role, "only embeddings at tokens of this role")
      ->check(CLI::IsMember({"number_part", "comma", "space"}));
  prb->add_option("--tol", prb_opts.tol, "coordinate descent tolerance");
  prb->add_option("--max-sweeps", prb_opts.max_sweeps, "coordinate descent sweep limit");
  prb->add_option("--workers", prb_opts.workers, "parallel fits");
  prb->add_flag("--no-standardize", "fit on raw embedding columns");
  switches[prb].insert("no-standardize");
  prb->add_option("--out", prb_out, "curve CSV")->required();
  add_run_dir(prb);

  // analyze
  auto* ana = app.add_subcommand("analyze", "first-position bias table from gen1/gen2 records");
  std::string ana_gen1, ana_gen2, ana_out, ana_csv, ana_traj, ana_title;
  ana->add_option("--gen1", ana_gen1, "gen1 records JSONL")->required();
  ana->add_option("--gen2", ana_gen2, "gen2 records JSONL")->required();
  ana->add_option("--out", ana_out, "aligned text table")->required();
  ana->add_option("--csv", ana_csv, "table as CSV");
  ana->add_option("--trajectory", ana_traj, "per-position summary CSV");
  ana->add_option("--title", ana_title, "title line above the table");
  add_run_dir(ana);

  // plot
  auto* plt = app.add_subcommand("plot", "render a CSV as SVG");
  std::string plt_kind;
  plot::PlotSpec plt_spec;
  std::string plt_out;
  plt->add_option("--kind", plt_kind, "offset_curve, position_curve, bias_trajectory or simulator_trajectory")
      ->required()
      ->check(CLI::IsMember({"offset_curve", "position_curve", "bias_trajectory", "simulator_trajectory"}));
  plt->add_option("--input", plt_spec.input_csv, "input CSV")->required();
  plt->add_option("--x-label", plt_spec.x_label, "x axis label");
  plt->add_option("--y-label", plt_spec.y_label, "y axis label");
  plt->add_option("--group-key", plt_spec.group_key, "series column for curve kinds");
  plt->add_option("--title", plt_spec.title, "figure title");
  plt->add_option("--out", plt_out, "SVG path")->required();
  add_run_dir(plt);

  // synth-dump
  auto* syn = app.add_subcommand("synth-dump", "write a synthetic PLND dump with a planted code");
  synthetic::DumpSpec syn_spec;
  std::string syn_layers = "0";
  std::string syn_out;
  syn->add_option("--trials", syn_spec.trials, "trials");
  syn->add_option("--samples", syn_spec.samples, "samples per trial");
  syn->add_option("--hidden-dim", syn_spec.hidden_dim, "embedding width");
  syn->add_option("--layers", syn_layers, "layer indices");
  syn->add_option("--horizon", syn_spec.horizon, "future samples encoded; 0 for noise only");
  syn->add_option("--signal", syn_spec.signal, "code amplitude");
  syn->add_option("--noise", syn_spec.noise, "noise amplitude");
  syn->add_flag("--ramp", syn_spec.ramp, "signal grows with position");
  switches[syn].insert("ramp");
  syn->add_option("--seed", syn_spec.seed, "seed");
  syn->add_option("--out", syn_out, "dump path")->required();
  add_run_dir(syn);

  // --config may appear anywhere; it is consumed here rather than by CLI11
  std::vector<std::string> args;
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < raw_args.size(); ++i) {
    const auto& a = raw_args[i];
    if (a == "--config") {
      if (i + 1 >= raw_args.size()) {
        err << "--config requires a file argument\n" << app.help();
        return kUsage;
      }
      config_path = raw_args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
    } else {
      args.push_back(a);
    }
  }
  if (args.empty()) {
    err << app.help();
    return kUsage;
  }

  try {
    std::map<std::string, std::string> config;
    if (config_path) config = read_config_file(*config_path);
    if (auto* sub = app.get_subcommand_no_throw(args.front())) {
      const auto rest = detail::apply_settings(
          std::vector<std::string>(args.begin() + 1, args.end()), sub, switches[sub], config, env);
      args.resize(1);
      args.insert(args.end(), rest.begin(), rest.end());
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  manifest::RunManifest m;
  m.subcommand = sub->get_name();
  m.flags = detail::effective_flags(sub, switches[sub]);
  m.started_at = records::utc_now_iso8601();
  std::vector<std::filesystem::path> artifacts;

  try {
    if (sub == sim) {
      const auto path = detail::resolve_out(run_dir, sim_out);
      const auto traj = planmodel::simulate_trajectory(sim_prior, sim_ev, sim_steps, sim_variance, sim_seed);
      csv::write_file(path.string(), planmodel::trajectory_csv(traj));
      artifacts.push_back(path);
      out << fmt::format("wrote {} steps to {}\n", traj.size(), path.string());
    } else if (sub == exp1) {
      const auto path = detail::resolve_out(run_dir, exp1_out);
      endpoint::HttpCompletionClient client(exp1_ep.config(env));
      records::JsonlWriter writer(path);
      harness::RunOptions ro{exp1_ep.workers, [&writer](const records::TrialRecord& r) { writer.write(r); }};
      exp1_plan.validate();
      m.notes.push_back(fmt::format("start range {}..{} inclusive: {} trials", exp1_plan.start_min,
                                    exp1_plan.start_max, exp1_plan.trials()));
      const auto recs = harness::run_exp1(client, exp1_ep.model, exp1_plan, ro);
      artifacts.push_back(path);
      out << fmt::format("wrote {} records to {}\n", recs.size(), path.string());
    } else if (sub == exp2) {
      const auto stage = records::parse_stage(exp2_stage);
      exp2_plan.mus = parse_value_list(exp2_mus);
      std::vector<records::TrialRecord> gen1;
      if (stage == records::Stage::gen2) {
        if (exp2_gen1.empty()) throw InvalidParameterError("--gen1 is required for --stage gen2");
        gen1 = records::load(exp2_gen1);
        m.add_input(exp2_gen1);
      }
      const auto path = detail::resolve_out(run_dir, exp2_out);
      endpoint::HttpCompletionClient client(exp2_ep.config(env));
      records::JsonlWriter writer(path);
      harness::RunOptions ro{exp2_ep.workers, [&writer](const records::TrialRecord& r) { writer.write(r); }};
      const auto recs = harness::run_exp2(client, exp2_ep.model, exp2_plan, stage, gen1, ro);
      artifacts.push_back(path);
      out << fmt::format("wrote {} records to {}\n", recs.size(), path.string());
    } else if (sub == prb) {
      if (prb->count("--no-standardize")) prb_opts.standardize = false;
      if (!prb_role.empty()) prb_opts.source_role = dump::parse_role(prb_role);
      const auto d = dump::read_dump(prb_dump);
      m.add_input(prb_dump);
      const auto layers = prb_layers.empty() ? d.layer_indices : parse_index_list(prb_layers);
      const auto path = detail::resolve_out(run_dir, prb_out);
      std::ofstream file(path, std::ios::binary | std::ios::trunc);
      if (!file) throw FileError("cannot write " + path.string());
      std::size_t skipped = 0;
      if (prb_mode == "offset") {
        const auto curves = probe::fit_offset_curves(d, layers, parse_index_list(prb_offsets), prb_opts);
        for (const auto& c : curves) skipped += c.skipped.size();
        probe::write_curves_csv<probe::OffsetCurve>(file, curves);
      } else {
        const auto curves = probe::fit_position_curves(d, layers, prb_opts);
        for (const auto& c : curves) skipped += c.skipped.size();
        probe::write_curves_csv<probe::PositionCurve>(file, curves);
      }
      file.close();
      if (!file) throw FileError("write failed for " + path.string());
      if (skipped) m.notes.push_back(fmt::format("{} points skipped for lack of examples", skipped));
      artifacts.push_back(path);
      out << fmt::format("wrote {} curves to {}\n", layers.size(), path.string());
    } else if (sub == ana) {
      const auto gen1 = records::load(ana_gen1);
      const auto gen2 = records::load(ana_gen2);
      m.add_input(ana_gen1);
      m.add_input(ana_gen2);
      const auto table = analysis::build_bias_table(gen1, gen2);
      const auto path = detail::resolve_out(run_dir, ana_out);
      csv::write_file(path.string(), analysis::render_text(table, ana_title));
      artifacts.push_back(path);
      if (!ana_csv.empty()) {
        const auto p = detail::resolve_out(run_dir, ana_csv);
        csv::write_file(p.string(), analysis::render_csv(table));
        artifacts.push_back(p);
      }
      if (!ana_traj.empty()) {
        const auto p = detail::resolve_out(run_dir, ana_traj);
        csv::write_file(p.string(), analysis::trajectory_csv(gen1, gen2));
        artifacts.push_back(p);
      }
      out << analysis::render_text(table, ana_title);
    } else if (sub == plt) {
      plt_spec.kind = plot::parse_kind(plt_kind);
      m.add_input(plt_spec.input_csv);
      const auto path = detail::resolve_out(run_dir, plt_out);
      plot::render_plot(plt_spec, path);
      artifacts.push_back(path);
      out << fmt::format("wrote {}\n", path.string());
    } else if (sub == syn) {
      syn_spec.layers = parse_index_list(syn_layers);
      const auto path = detail::resolve_out(run_dir, syn_out);
      dump::write_dump(synthetic::make_dump(syn_spec), path);
      artifacts.push_back(path);
      out << fmt::format("wrote {} trials to {}\n", syn_spec.trials, path.string());
    }
    for (const auto& a : artifacts) m.add_output(a);
    m.finished_at = records::utc_now_iso8601();
    for (const auto& a : artifacts) manifest::write(m, a);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kFile;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace planprobe::cli
