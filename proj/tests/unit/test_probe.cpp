#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "planprobe/probe.hpp"
#include "planprobe/synthetic.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace planprobe;
using namespace planprobe::probe;

namespace {

synthetic::DumpSpec small_spec() {
  synthetic::DumpSpec s;
  s.trials = 30;
  s.samples = 20;
  s.hidden_dim = 8;
  s.layers = {2, 5};
  s.seed = 4;
  return s;
}

}  // namespace

TEST(OffsetDataset, ZeroOffsetTargetsOwnValue) {
  const auto d = synthetic::make_dump(small_spec());
  const auto data = build_offset_dataset(d, 2, 0);
  ASSERT_EQ(data.y.size(), 30u * 20u);
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    const auto& key = data.rows[r];
    const auto& trial = d.trials[static_cast<std::size_t>(key.trial_id)];
    EXPECT_EQ(key.token % 3, 0u);
    EXPECT_EQ(data.y[r], static_cast<double>(trial.numeric_values[key.token / 3]));
    const auto src = trial.matrices[0].row(key.token);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(data.x(r, j), static_cast<double>(src[j]));
  }
}

TEST(OffsetDataset, RowCountMatchesBruteForce) {
  auto spec = small_spec();
  spec.trials = 2;
  spec.samples = 9;
  auto d = synthetic::make_dump(spec);
  // a truncated final sample exercises the grid edge
  auto& t = d.trials[1];
  t.token_texts.pop_back();
  t.token_roles.pop_back();
  for (auto& m : t.matrices) {
    m.rows -= 1;
    m.data.resize(m.rows * m.cols);
  }
  for (int offset : {0, 1, 2, 3, 4, 7, 25}) {
    std::size_t expected = 0;
    for (const auto& trial : d.trials)
      for (std::size_t a = 0; a < trial.token_roles.size(); ++a)
        for (std::size_t b = a; b < trial.token_roles.size(); ++b)
          if (b - a == static_cast<std::size_t>(offset) &&
              trial.token_roles[b] == dump::TokenRole::number_part)
            ++expected;
    EXPECT_EQ(build_offset_dataset(d, 5, offset).y.size(), expected) << "offset " << offset;
  }
}

TEST(OffsetDataset, MaximalLagOnSixtySamples) {
  auto spec = small_spec();
  spec.samples = 60;
  spec.trials = 3;
  const auto d = synthetic::make_dump(spec);
  const auto data = build_offset_dataset(d, 2, kMaxOffset);
  // t + 172 must hit token 174 or 177
  ASSERT_EQ(data.y.size(), 6u);
  EXPECT_EQ(data.rows[0].token, 2u);
  EXPECT_EQ(data.rows[1].token, 5u);
  EXPECT_EQ(data.y[0], static_cast<double>(d.trials[0].numeric_values[58]));
  EXPECT_EQ(data.y[1], static_cast<double>(d.trials[0].numeric_values[59]));
}

TEST(OffsetDataset, RangeAndLayerErrors) {
  const auto d = synthetic::make_dump(small_spec());
  EXPECT_THROW(build_offset_dataset(d, 2, 173), InvalidParameterError);
  EXPECT_THROW(build_offset_dataset(d, 2, -1), InvalidParameterError);
  EXPECT_THROW(build_offset_dataset(d, 3, 1), InvalidParameterError);
}

TEST(OffsetDataset, RoleFilter) {
  const auto d = synthetic::make_dump(small_spec());
  const auto all = build_offset_dataset(d, 2, 2);
  const auto commas = build_offset_dataset(d, 2, 2, dump::TokenRole::comma);
  EXPECT_EQ(all.y.size(), commas.y.size());  // only commas sit two before a number
  EXPECT_EQ(build_offset_dataset(d, 2, 2, dump::TokenRole::space).y.size(), 0u);
  for (const auto& k : commas.rows) EXPECT_EQ(k.token % 3, 1u);
}

TEST(OffsetDataset, TrialOrderInvariance) {
  const auto d = synthetic::make_dump(small_spec());
  auto shuffled = d;
  std::mt19937 rng(5);
  std::shuffle(shuffled.trials.begin(), shuffled.trials.end(), rng);
  ASSERT_NE(shuffled.trials.front().trial_id, d.trials.front().trial_id);
  for (int offset : {0, 3, 8}) {
    const auto a = build_offset_dataset(d, 5, offset);
    const auto b = build_offset_dataset(shuffled, 5, offset);
    EXPECT_EQ(a.x.values(), b.x.values());
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.rows, b.rows);
  }
  const auto ca = fit_offset_curve(d, 5, offset_range(1, 6));
  const auto cb = fit_offset_curve(shuffled, 5, offset_range(1, 6));
  EXPECT_EQ(ca.points, cb.points);
}

TEST(OffsetCurve, PlantedHorizonRecovered) {
  auto spec = small_spec();
  spec.hidden_dim = 16;
  const auto d = synthetic::make_dump(spec);
  Options opts;
  opts.workers = 2;
  const auto curve = fit_offset_curve(d, 2, offset_range(0, 24), opts);
  ASSERT_EQ(curve.points.size(), 25u);
  for (const auto& p : curve.points) {
    if (p.x >= 1 && p.x <= 9)
      EXPECT_GE(p.r_squared, 0.9) << "offset " << p.x;
    else
      EXPECT_LE(p.r_squared, 0.1) << "offset " << p.x;
  }
}

TEST(OffsetCurve, NoiseDumpStaysNearZero) {
  auto spec = small_spec();
  spec.trials = 80;
  spec.horizon = 0;
  const auto d = synthetic::make_dump(spec);
  const auto curve = fit_offset_curve(d, 5, offset_range(0, 30));
  for (const auto& p : curve.points) EXPECT_LE(p.r_squared, 0.05) << "offset " << p.x;
}

TEST(OffsetCurve, DefaultPenalty) { EXPECT_EQ(Options{}.penalty, 0.3); }

TEST(PositionDataset, OneRowPerTrial) {
  auto spec = small_spec();
  spec.samples = 61;
  const auto d = synthetic::make_dump(spec);
  for (int q : {1, 4, 172}) {
    const auto data = build_position_dataset(d, 2, q);
    ASSERT_EQ(data.y.size(), spec.trials) << "q " << q;
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
      EXPECT_EQ(data.rows[r].token, static_cast<std::size_t>(q));
      EXPECT_EQ(data.y[r], static_cast<double>(d.trials[r].numeric_values[(q + 8) / 3]));
    }
  }
}

TEST(PositionCurve, PositionsAndSkips) {
  EXPECT_EQ(comma_positions().front(), 1);
  EXPECT_EQ(comma_positions().back(), 172);
  EXPECT_EQ(comma_positions().size(), 58u);

  auto spec = small_spec();
  spec.samples = 20;  // tokens 0..59; q + 8 <= 59 holds up to q = 49
  const auto d = synthetic::make_dump(spec);
  const auto curve = fit_position_curve(d, 2);
  EXPECT_EQ(curve.points.size(), 17u);
  EXPECT_EQ(curve.points.back().x, 49);
  EXPECT_EQ(curve.skipped.size(), 58u - 17u);
  EXPECT_EQ(curve.skipped.front(), 52);
  for (const auto& p : curve.points) EXPECT_EQ(p.n_examples, spec.trials);
}

TEST(PositionCurve, SingleTrialIsDegenerate) {
  auto spec = small_spec();
  spec.trials = 1;
  EXPECT_THROW(fit_position_curve(synthetic::make_dump(spec), 2), DegenerateDataError);
}

TEST(PositionCurve, LateSignalRises) {
  synthetic::DumpSpec spec;
  spec.trials = 150;
  spec.samples = 61;
  spec.hidden_dim = 6;
  spec.ramp = true;
  spec.signal = 1.0;
  spec.noise = 0.3;
  spec.seed = 21;
  const auto d = synthetic::make_dump(spec);
  Options opts;
  opts.workers = 2;
  const auto curve = fit_position_curve(d, 0, opts);
  ASSERT_EQ(curve.points.size(), 58u);
  std::vector<double> q, r2;
  for (const auto& p : curve.points) {
    q.push_back(p.x);
    r2.push_back(p.r_squared);
  }
  EXPECT_GT(test_support::spearman(q, r2), 0.9);
  EXPECT_GT(r2.back(), r2.front());
}

TEST(CurveCsv, OnePointTwoLines) {
  OffsetCurve c;
  c.layer = 3;
  c.points.push_back({5, 0.25, 40});
  std::ostringstream out;
  write_curves_csv<OffsetCurve>(out, std::vector<OffsetCurve>{c});
  EXPECT_EQ(out.str(), "layer,x,r_squared,n_examples\n3,5,0.25,40\n");
  EXPECT_THROW(write_curves_csv<OffsetCurve>(out, std::vector<OffsetCurve>{}), InvalidDataError);
}

TEST(CurveCsv, RoundTripElevenLayers) {
  std::vector<PositionCurve> curves;
  for (int layer = 15; layer <= 25; ++layer) {
    PositionCurve c;
    c.layer = layer;
    for (int i = 0; i < 4; ++i)
      c.points.push_back({3 * i + 1, 0.1 * i + 0.01 * layer + 1.0 / 3.0, 69});
    curves.push_back(c);
  }
  test_support::TempDir dir;
  export_curves<PositionCurve>(curves, dir / "c.csv");
  std::istringstream in(test_support::slurp(dir / "c.csv"));
  const auto back = read_curves_csv<PositionCurve>(in);
  ASSERT_EQ(back.size(), 11u);
  for (std::size_t i = 0; i < 11; ++i) {
    EXPECT_EQ(back[i].layer, curves[i].layer);
    EXPECT_EQ(back[i].points, curves[i].points);
  }
  EXPECT_THROW(export_curves<PositionCurve>(curves, dir / "no/such/dir/c.csv"), FileError);
}
