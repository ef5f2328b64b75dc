#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "planprobe/numeric_stream.hpp"
#include "planprobe/prompts.hpp"
#include "support/temp_dir.hpp"

using namespace planprobe;

namespace {

std::string golden(const std::string& name) {
  return test_support::slurp(std::string(PLANPROBE_GOLDEN_DIR) + "/" + name);
}

using Values = std::vector<std::int64_t>;

}  // namespace

TEST(NumericStream, PlainList) {
  const auto p = parse_numeric_stream("182, 163, 159");
  EXPECT_EQ(p.values, (Values{182, 163, 159}));
  EXPECT_TRUE(p.warnings.empty());
}

TEST(NumericStream, ExampleSamples) {
  EXPECT_EQ(parse_numeric_stream("23, 45, 12, 43, 55, 4").values, (Values{23, 45, 12, 43, 55, 4}));
}

TEST(NumericStream, TruncatedTailDropped) {
  const auto p = parse_numeric_stream("170, 18", StreamEnd::truncated);
  EXPECT_EQ(p.values, (Values{170}));
  ASSERT_EQ(p.warnings.size(), 1u);
  EXPECT_EQ(p.warnings[0], "truncated tail dropped");
}

TEST(NumericStream, TruncatedStreamKeepsTerminatedTail) {
  EXPECT_EQ(parse_numeric_stream("170, 18, ", StreamEnd::truncated).values, (Values{170, 18}));
  EXPECT_EQ(parse_numeric_stream("170, 18,", StreamEnd::truncated).values, (Values{170, 18}));
  EXPECT_TRUE(parse_numeric_stream("170, 18 ", StreamEnd::truncated).warnings.empty());
}

TEST(NumericStream, CompleteStreamKeepsTail) {
  const auto p = parse_numeric_stream("170, 18");
  EXPECT_EQ(p.values, (Values{170, 18}));
  EXPECT_TRUE(p.warnings.empty());
}

TEST(NumericStream, WhitespaceAndTrailingCommas) {
  EXPECT_EQ(parse_numeric_stream("  -5 ,\t7,, 9 ,\n").values, (Values{-5, 7, 9}));
  EXPECT_EQ(parse_numeric_stream("1\n2\n+3").values, (Values{1, 2, 3}));
}

TEST(NumericStream, InterleavedTextWarns) {
  const auto p = parse_numeric_stream("170, about 175, 168, 17a");
  EXPECT_EQ(p.values, (Values{170, 168}));
  ASSERT_EQ(p.warnings.size(), 2u);
  EXPECT_NE(p.warnings[0].find("about 175"), std::string::npos);
}

TEST(NumericStream, OverflowWarns) {
  const auto p = parse_numeric_stream("1, 99999999999999999999999");
  EXPECT_EQ(p.values, (Values{1}));
  EXPECT_EQ(p.warnings.size(), 1u);
}

TEST(NumericStream, NothingNumericIsError) {
  EXPECT_THROW(parse_numeric_stream(""), ParseError);
  EXPECT_THROW(parse_numeric_stream("I cannot do that."), ParseError);
  EXPECT_THROW(parse_numeric_stream("18", StreamEnd::truncated), ParseError);
}

TEST(Prompts, HeightGuessGolden) {
  EXPECT_EQ(prompts::height_guess_prompt(151), golden("exp1_prompt_start151.txt"));
  EXPECT_EQ(prompts::height_guess_prompt(219), golden("exp1_prompt_start219.txt"));
}

TEST(Prompts, SamplingGolden) {
  const Values samples{23, 45, 12, 43, 55, 4};
  EXPECT_EQ(prompts::sampling_prompt(samples), golden("exp2_prompt_example.txt"));
}

TEST(Prompts, ByteStable) {
  const Values samples{-3, 0, 12};
  EXPECT_EQ(prompts::sampling_prompt(samples), prompts::sampling_prompt(samples));
  EXPECT_EQ(prompts::height_guess_prompt(170), prompts::height_guess_prompt(170));
  // the prompt's own list parses back to the samples
  const auto text = prompts::sampling_prompt(samples);
  EXPECT_EQ(parse_numeric_stream(text.substr(text.rfind(": ") + 2)).values, samples);
}
