#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "planprobe/records.hpp"
#include "support/temp_dir.hpp"

using namespace planprobe;
using namespace planprobe::records;

namespace {

TrialRecord exp1_record(std::int64_t start) {
  TrialRecord r;
  r.experiment = Experiment::exp1;
  r.condition = "start=" + std::to_string(start);
  r.model_name = "m";
  r.prompt_text = "prompt \xE2\x80\x99 " + std::to_string(start) + ", ";
  r.raw_completion = "171, 172, \"quoted\"\n";
  r.finish_reason = "stop";
  r.parsed_values = {start, 171, 172};
  r.parse_warnings = {"non-numeric text skipped: '\"quoted\"'"};
  r.start_value = start;
  r.requested_count = 3;
  r.timestamps = {"2026-01-01T00:00:00.000Z", "2026-01-01T00:00:01.000Z"};
  return r;
}

TrialRecord exp2_record(std::int64_t mu, std::int64_t rep) {
  TrialRecord r;
  r.experiment = Experiment::exp2;
  r.condition = "mu=" + std::to_string(mu) + "/gen1";
  r.model_name = "m";
  r.prompt_text = "p";
  r.raw_completion = "1, 2";
  r.finish_reason = "length";
  r.parsed_values = {1};
  r.status = TrialStatus::under_length;
  Exp2Condition c;
  c.mu = mu;
  c.replicate = rep;
  c.context_count = 2;
  c.generate_count = 2;
  c.context_values = {mu, mu + 1};
  c.rng_seed = 0xFFFFFFFFFFFFFFFFULL;
  r.exp2 = c;
  return r;
}

}  // namespace

TEST(Records, WriteThenReadThree) {
  test_support::TempDir dir;
  const std::vector<TrialRecord> recs{exp1_record(151), exp1_record(152), exp2_record(-30, 4)};
  persist(dir / "r.jsonl", recs);
  EXPECT_EQ(load(dir / "r.jsonl"), recs);
  const auto text = test_support::slurp(dir / "r.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Records, TimestampsOutsideContentHash) {
  auto a = exp1_record(160);
  auto b = a;
  b.timestamps = {"1999-01-01T00:00:00.000Z", "1999-01-01T00:00:00.500Z"};
  EXPECT_EQ(content_hash(a), content_hash(b));
  EXPECT_NE(to_jsonl_line(a), to_jsonl_line(b));
  b.parsed_values.back() = 173;
  EXPECT_NE(content_hash(a), content_hash(b));
  EXPECT_EQ(content_hash(a).size(), 64u);
}

TEST(Records, LineHasSchemaVersionFirst) {
  const auto line = to_jsonl_line(exp2_record(0, 0));
  EXPECT_EQ(line.rfind("{\"schema_version\":1,", 0), 0u) << line;
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(Records, MalformedLineNamesLineNumber) {
  std::stringstream in;
  in << to_jsonl_line(exp1_record(151)) << '\n' << "{not json\n";
  try {
    read_jsonl(in, "runs.jsonl");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("runs.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Records, SchemaMismatchIsFormatError) {
  auto j = nlohmann::json::parse(to_jsonl_line(exp1_record(151)));
  j["schema_version"] = 2;
  std::stringstream in;
  in << j.dump() << '\n';
  try {
    read_jsonl(in);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
}

TEST(Records, InvariantViolationsRejectedOnLoad) {
  auto r = exp1_record(151);
  r.parsed_values.front() = 150;
  EXPECT_THROW(validate(r), InvalidDataError);
  std::stringstream in;
  in << to_jsonl_line(r) << '\n';
  EXPECT_THROW(read_jsonl(in), FormatError);

  auto e = exp2_record(10, 1);
  e.exp2->context_values.pop_back();
  EXPECT_THROW(validate(e), InvalidDataError);
  e.status = TrialStatus::failed;
  EXPECT_NO_THROW(validate(e));
}

TEST(Records, MissingFileIsFileError) {
  EXPECT_THROW(load("/nonexistent/dir/x.jsonl"), FileError);
}

TEST(Records, UtcTimestampShape) {
  const auto ts = utc_now_iso8601();
  ASSERT_EQ(ts.size(), 24u) << ts;
  EXPECT_EQ(ts[10], 'T');
  EXPECT_EQ(ts.back(), 'Z');
}
