#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "planprobe/bias_table.hpp"
#include "planprobe/csv.hpp"
#include "support/temp_dir.hpp"

using namespace planprobe;
using namespace planprobe::analysis;
using records::Stage;
using records::TrialRecord;

namespace {

std::string golden_path(const std::string& name) {
  return std::string(PLANPROBE_GOLDEN_DIR) + "/" + name;
}

TrialRecord exp2(std::int64_t mu, Stage stage, std::int64_t replicate,
                 std::vector<std::int64_t> values) {
  TrialRecord r;
  r.experiment = records::Experiment::exp2;
  r.condition = fmt::format("mu={}/{}", mu, records::to_string(stage));
  r.model_name = "synthetic";
  r.parsed_values = std::move(values);
  records::Exp2Condition c;
  c.mu = mu;
  c.stage = stage;
  c.replicate = replicate;
  c.context_count = 2;
  c.generate_count = 3;
  c.context_values = {mu, mu + 2};
  r.exp2 = c;
  return r;
}

/// Records whose first values come from the golden CSV; later values are filler.
std::pair<std::vector<TrialRecord>, std::vector<TrialRecord>> golden_records() {
  const auto table = csv::read_file(golden_path("bias_first_values.csv"));
  std::vector<TrialRecord> gen1, gen2;
  std::map<std::pair<std::int64_t, std::string>, std::int64_t> next_rep;
  for (const auto& row : table.rows) {
    const auto mu = csv::to_integer(row[0]);
    const auto v = csv::to_integer(row[2]);
    const auto rep = next_rep[{mu, row[1]}]++;
    if (row[1] == "gen1")
      gen1.push_back(exp2(mu, Stage::gen1, rep, {v, 1, 2}));
    else
      gen2.push_back(exp2(mu, Stage::gen2, rep, {v, 3}));
  }
  return {gen1, gen2};
}

}  // namespace

TEST(ApaNumber, DropsLeadingZero) {
  EXPECT_EQ(apa_number(0.53), ".53");
  EXPECT_EQ(apa_number(-0.25), "-.25");
  EXPECT_EQ(apa_number(12.345), "12.35");
  EXPECT_EQ(apa_number(-0.001), ".00");
  EXPECT_EQ(apa_number(0.0), ".00");
  EXPECT_EQ(apa_number(-3.0), "-3.00");
  EXPECT_EQ(apa_number(0.5, 3), ".500");
}

TEST(Stars, Thresholds) {
  EXPECT_EQ(significance_stars(0.2), "");
  EXPECT_EQ(significance_stars(0.05), "");
  EXPECT_EQ(significance_stars(0.0499), "*");
  EXPECT_EQ(significance_stars(0.001), "*");
  EXPECT_EQ(significance_stars(0.000999), "**");
}

TEST(BiasTable, MatchesGoldenText) {
  const auto [gen1, gen2] = golden_records();
  ASSERT_EQ(gen1.size(), 140u);
  const auto table = build_bias_table(gen1, gen2);
  ASSERT_EQ(table.rows.size(), 7u);
  EXPECT_EQ(table.rows.front().mu, 50);
  EXPECT_EQ(table.rows.back().mu, -50);
  std::ifstream in(golden_path("bias_table.txt"), std::ios::binary);
  std::stringstream expected;
  expected << in.rdbuf();
  EXPECT_EQ(render_text(table, "Synthetic bias table"), expected.str());
}

TEST(BiasTable, IndependentOfRecordOrder) {
  auto [gen1, gen2] = golden_records();
  const auto a = render_csv(build_bias_table(gen1, gen2));
  std::reverse(gen1.begin(), gen1.end());
  std::rotate(gen2.begin(), gen2.begin() + 17, gen2.end());
  EXPECT_EQ(render_csv(build_bias_table(gen1, gen2)), a);
}

TEST(BiasTable, CsvColumnsAndRows) {
  const auto [gen1, gen2] = golden_records();
  std::istringstream in(render_csv(build_bias_table(gen1, gen2)));
  const auto t = csv::read(in);
  EXPECT_EQ(t.header.size(), 16u);
  EXPECT_EQ(t.header.front(), "mu");
  EXPECT_EQ(t.header.back(), "welch_p");
  ASSERT_EQ(t.rows.size(), 7u);
  EXPECT_EQ(t.rows[0][3], "20");
  EXPECT_EQ(csv::to_double(t.rows[0][5]), 19.0);
}

TEST(BiasTable, ExplicitRowOrderAndMissingMu) {
  const auto [gen1, gen2] = golden_records();
  const auto t = build_bias_table(gen1, gen2, {0, 50});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].mu, 0);
  EXPECT_THROW(build_bias_table(gen1, gen2, {5}), LinkageError);
  EXPECT_THROW(build_bias_table({}, {}), InvalidDataError);
}

TEST(BiasTable, FailedRecordsExcluded) {
  auto [gen1, gen2] = golden_records();
  const auto before = build_bias_table(gen1, gen2).rows[0].gen1.n;
  gen1[0].status = records::TrialStatus::failed;
  EXPECT_EQ(build_bias_table(gen1, gen2).rows[0].gen1.n, before - 1);
}

TEST(Trajectory, StagesPerMu) {
  std::vector<TrialRecord> gen1{exp2(10, Stage::gen1, 0, {1, 2, 3}),
                                exp2(10, Stage::gen1, 1, {3, 4}),
                                exp2(-10, Stage::gen1, 0, {5, 6, 7})};
  std::vector<TrialRecord> gen2{exp2(10, Stage::gen2, 0, {9, 9, 9})};
  std::istringstream in(trajectory_csv(gen1, gen2));
  const auto t = csv::read(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"mu", "stage", "position", "mean", "ci95_low",
                                                "ci95_high", "n"}));
  // mu=10: gaussian 2 + gen1 3 + gen2 3; mu=-10: gaussian 2 + gen1 3
  ASSERT_EQ(t.rows.size(), 13u);
  EXPECT_EQ(t.rows[0][0], "10");
  EXPECT_EQ(t.rows[0][1], "gaussian");
  EXPECT_EQ(t.rows[0][3], "10");
  EXPECT_EQ(t.rows[2][1], "gen1");
  EXPECT_EQ(t.rows[2][3], "2");
  EXPECT_EQ(t.rows[4][6], "1");
  EXPECT_EQ(t.rows[8][0], "-10");
  EXPECT_THROW(trajectory_csv({}, gen2), InvalidDataError);
}
