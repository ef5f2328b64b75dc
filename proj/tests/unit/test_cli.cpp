#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "planprobe/cli.hpp"
#include "planprobe/mock_endpoint.hpp"
#include "support/temp_dir.hpp"

using namespace planprobe;
using test_support::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err, [env](const std::string& name) {
    auto it = env.find(name);
    return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
  });
  return {code, out.str(), err.str()};
}

nlohmann::json manifest_of(const std::filesystem::path& artifact) {
  return nlohmann::json::parse(test_support::slurp(manifest::manifest_path(artifact)));
}

}  // namespace

TEST(Cli, NoArgumentsIsUsage) {
  const auto r = run({});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("simulate"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageWithHelp) {
  const auto r = run({"simulate", "--out", "x.csv", "--bogus", "1"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("--prior-mean"), std::string::npos) << r.err;
}

TEST(Cli, UnknownSubcommandAndMissingRequired) {
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"simulate"}).code, cli::kUsage);
  EXPECT_EQ(run({"probe", "--out", "x.csv"}).code, cli::kUsage);
}

TEST(Cli, HelpIsSuccess) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.out.find("PLANPROBE_API_KEY"), std::string::npos);
}

TEST(Cli, SimulateWritesCsvAndManifest) {
  TempDir dir;
  const auto path = dir / "traj.csv";
  const std::vector<std::string> args{"simulate", "--prior-mean", "-30", "--base-gain", "0.5",
                                      "--steps", "64", "--out", path.string()};
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv_text = test_support::slurp(path);
  EXPECT_EQ(std::count(csv_text.begin(), csv_text.end(), '\n'), 65);
  const auto m = manifest_of(path);
  EXPECT_EQ(m["subcommand"], "simulate");
  EXPECT_EQ(m["tool_version"], manifest::kToolVersion);
  EXPECT_EQ(m["flags"]["prior-mean"], "-30");
  EXPECT_EQ(m["flags"]["prior-precision"], "0.05");
  EXPECT_EQ(m["flags"]["steps"], "64");
  EXPECT_EQ(m["outputs"][path.string()], sha256_file(path.string()));

  ASSERT_EQ(run(args).code, 0);
  const auto again = manifest_of(path);
  EXPECT_EQ(again["content_hash"], m["content_hash"]);
  EXPECT_EQ(test_support::slurp(path), csv_text);
}

TEST(Cli, RunDirResolvesRelativeOutputs) {
  TempDir dir;
  const auto r = run({"simulate", "--steps", "3", "--run-dir", (dir / "runs/a").string(),
                      "--out", "t.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "runs/a/t.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "runs/a/t.csv.manifest.json"));
}

TEST(Cli, SynthDumpThenProbe) {
  TempDir dir;
  const auto dump_path = dir / "d.plnd";
  auto r = run({"synth-dump", "--trials", "20", "--samples", "15", "--hidden-dim", "8",
                "--layers", "1,3", "--out", dump_path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto curve_path = dir / "c.csv";
  r = run({"probe", "--dump", dump_path.string(), "--alpha", "0.3", "--mode", "offset",
           "--layers", "1,3", "--offsets", "0-12", "--workers", "2", "--out", curve_path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(test_support::slurp(curve_path));
  const auto t = csv::read(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"layer", "x", "r_squared", "n_examples"}));
  EXPECT_EQ(t.rows.size(), 26u);
  const auto m = manifest_of(curve_path);
  EXPECT_EQ(m["inputs"][dump_path.string()], sha256_file(dump_path.string()));
  EXPECT_EQ(m["flags"]["alpha"], "0.3");
  EXPECT_EQ(m["flags"]["no-standardize"], "false");

  r = run({"probe", "--dump", dump_path.string(), "--mode", "position", "--layers", "3",
           "--out", (dir / "p.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(manifest_of(dir / "p.csv")["notes"].size(), 1u);
}

TEST(Cli, ProbeRejectsUnknownLayer) {
  TempDir dir;
  ASSERT_EQ(run({"synth-dump", "--trials", "3", "--samples", "4", "--hidden-dim", "2", "--out",
                 (dir / "d.plnd").string()})
                .code,
            0);
  const auto r = run({"probe", "--dump", (dir / "d.plnd").string(), "--layers", "7", "--out",
                      (dir / "c.csv").string()});
  EXPECT_EQ(r.code, cli::kData) << r.err;
}

TEST(Cli, FlagBeatsEnvBeatsConfig) {
  TempDir dir;
  test_support::spit(dir / "cfg", "# settings\nprior-mean = 4\n--steps=5\nseed = 9\n");
  const auto path = dir / "t.csv";
  auto r = run({"simulate", "--config", (dir / "cfg").string(), "--steps", "7", "--out",
                path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto flags = manifest_of(path)["flags"];
  EXPECT_EQ(flags["prior-mean"], "4");
  EXPECT_EQ(flags["steps"], "7");
  EXPECT_EQ(flags["seed"], "9");

  mock::MockCompletionServer server;
  server.start();
  test_support::spit(dir / "cfg2", "model = from-config\nbase-url = http://127.0.0.1:1\n");
  const auto jsonl = dir / "e.jsonl";
  const std::map<std::string, std::string> env{{"PLANPROBE_BASE_URL", server.base_url()},
                                               {"PLANPROBE_MODEL", "from-env"},
                                               {"PLANPROBE_API_KEY", "sk-secret-token"}};
  r = run({"run-exp1", "--config", (dir / "cfg2").string(), "--model", "from-flag",
           "--start-min", "160", "--start-max", "162", "--out", jsonl.string()},
          env);
  ASSERT_EQ(r.code, 0) << r.err;
  flags = manifest_of(jsonl)["flags"];
  EXPECT_EQ(flags["model"], "from-flag");
  EXPECT_EQ(flags["base-url"], server.base_url());
  EXPECT_EQ(records::load(jsonl).front().model_name, "from-flag");
  const auto text = test_support::slurp(manifest::manifest_path(jsonl));
  EXPECT_EQ(text.find("sk-secret-token"), std::string::npos);
  EXPECT_NE(text.find("3 trials"), std::string::npos);
}

TEST(Cli, ConfigErrors) {
  TempDir dir;
  EXPECT_EQ(run({"simulate", "--config", (dir / "none").string(), "--out", "x"}).code, cli::kFile);
  test_support::spit(dir / "bad", "just words\n");
  EXPECT_EQ(run({"simulate", "--config", (dir / "bad").string(), "--out", "x"}).code, cli::kFormat);
  EXPECT_EQ(run({"simulate", "--config"}).code, cli::kUsage);
}

TEST(Cli, ExitCodesForMissingInputs) {
  TempDir dir;
  EXPECT_EQ(run({"probe", "--dump", (dir / "none.plnd").string(), "--out", (dir / "c").string()}).code,
            cli::kFile);
  EXPECT_EQ(run({"analyze", "--gen1", (dir / "a").string(), "--gen2", (dir / "b").string(),
                 "--out", (dir / "t.txt").string()})
                .code,
            cli::kFile);
  test_support::spit(dir / "empty.csv", "layer,x,r_squared\n");
  EXPECT_EQ(run({"plot", "--kind", "offset_curve", "--input", (dir / "empty.csv").string(),
                 "--out", (dir / "p.svg").string()})
                .code,
            cli::kFormat);
  test_support::spit(dir / "junk.plnd", "nope");
  EXPECT_EQ(run({"probe", "--dump", (dir / "junk.plnd").string(), "--out", (dir / "c").string()}).code,
            cli::kFormat);
  EXPECT_EQ(run({"simulate", "--steps", "0", "--out", (dir / "s.csv").string()}).code, cli::kData);
}

TEST(Cli, TransportFailureExitCode) {
  TempDir dir;
  const auto r = run({"run-exp1", "--base-url", "http://127.0.0.1:1", "--retries", "0",
                      "--start-min", "151", "--start-max", "151", "--out",
                      (dir / "e.jsonl").string()});
  EXPECT_EQ(r.code, cli::kTransport);
  EXPECT_NE(r.err.find("start=151"), std::string::npos) << r.err;
}

TEST(Cli, Exp2PipelineThroughAnalyze) {
  TempDir dir;
  mock::MockCompletionServer server;
  server.start();
  const std::map<std::string, std::string> env{{"PLANPROBE_BASE_URL", server.base_url()}};
  auto r = run({"run-exp2", "--stage", "gen1", "--mus", "20,-20", "--replicates", "4", "--seed",
                "3", "--out", (dir / "g1.jsonl").string()},
               env);
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"run-exp2", "--stage", "gen2", "--mus", "20,-20", "--replicates", "4", "--seed", "3",
           "--gen1", (dir / "g1.jsonl").string(), "--out", (dir / "g2.jsonl").string()},
          env);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run({"run-exp2", "--stage", "gen2", "--out", (dir / "g3.jsonl").string()}, env).code,
            cli::kData);
  r = run({"analyze", "--gen1", (dir / "g1.jsonl").string(), "--gen2", (dir / "g2.jsonl").string(),
           "--out", (dir / "t.txt").string(), "--csv", (dir / "t.csv").string(), "--trajectory",
           (dir / "traj.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Gen. II"), std::string::npos);
  EXPECT_EQ(r.out, test_support::slurp(dir / "t.txt"));
  r = run({"plot", "--kind", "bias_trajectory", "--input", (dir / "traj.csv").string(), "--out",
           (dir / "traj.svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(test_support::slurp(dir / "traj.svg").find("data-mu=\"-20\""), std::string::npos);
}

TEST(Cli, IndexLists) {
  EXPECT_EQ(cli::parse_index_list("15-17,3"), (std::vector<int>{3, 15, 16, 17}));
  EXPECT_EQ(cli::parse_index_list("-2"), (std::vector<int>{-2}));
  EXPECT_THROW(cli::parse_index_list("5-3"), InvalidParameterError);
  EXPECT_THROW(cli::parse_index_list("a"), InvalidParameterError);
  EXPECT_EQ(cli::parse_value_list("50,-10"), (std::vector<std::int64_t>{50, -10}));
}
