#include "bisense/metrics_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

using namespace bisense;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

EpochRecord random_record(std::mt19937_64& rng, int run, int epoch, double pt, const std::string& mode) {
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  EpochRecord r;
  r.run_id = run;
  r.epoch = epoch;
  r.pt_dbm = pt;
  r.mode = mode;
  r.x_true = u(rng);
  r.y_true = u(rng);
  r.theta_true_deg = u(rng);
  r.x_fused = u(rng) / 3.0;
  r.y_fused = epoch % 5 == 0 ? kNaN : u(rng);
  r.theta_pred_deg = u(rng);
  r.se_bps_hz = std::abs(u(rng)) / 7.0;
  r.pae_deg = epoch % 7 == 0 ? kNaN : u(rng) / 11.0;
  for (int i = 0; i < 3; ++i) {
    ReceiverRecord rr{u(rng), u(rng), (epoch + i) % 2 == 0, std::abs(u(rng)), std::abs(u(rng)), i == 1};
    if (i == 2) rr.gdop_est = std::numeric_limits<double>::infinity();
    if (i == 0 && epoch % 3 == 0) rr.x = rr.y = rr.gdop_act = kNaN;
    r.rx.push_back(rr);
  }
  return r;
}

}  // namespace

TEST(SpectralEfficiency, Examples) {
  SystemParams p;
  p.tx_power_w = dbm_to_watts(5.0);
  const double se = spectral_efficiency(0.4, 0.4, 30.2076, p);
  EXPECT_NEAR(se, std::log2(1.0 + 34.29), 0.005);
  EXPECT_NEAR(se, 5.14, 0.005);
  // Orthogonal pointing: sin difference 2/64 is a null of the 64-element pattern.
  const double th = std::asin(std::sin(0.4) + 2.0 / 64.0);
  EXPECT_NEAR(spectral_efficiency(th, 0.4, 30.2076, p), 0.0, 1e-12);
  p.tx_power_w = 10.0;
  EXPECT_NEAR(spectral_efficiency(0.0, 0.0, 10.0, p) - spectral_efficiency(0.0, 0.0, 20.0, p), 2.0, 0.01);
  EXPECT_THROW(spectral_efficiency(0.0, 0.0, 0.0, p), std::invalid_argument);
}

TEST(Pae, Wrapping) {
  EXPECT_DOUBLE_EQ(predicted_aod_error_deg(0.3, 0.3), 0.0);
  EXPECT_NEAR(predicted_aod_error_deg(deg2rad(10.0), deg2rad(8.0)), 2.0, 1e-12);
  EXPECT_NEAR(predicted_aod_error_deg(deg2rad(179.0), deg2rad(-179.0)), -2.0, 1e-9);
  EXPECT_NEAR(std::abs(predicted_aod_error_deg(deg2rad(179.0), deg2rad(-179.0))), 2.0, 1e-9);
}

TEST(Csv, RoundTripExact) {
  std::mt19937_64 rng(1);
  std::vector<EpochRecord> recs;
  for (int e = 0; e < 30; ++e) recs.push_back(random_record(rng, e / 10, e % 10, -5.0 + e, e % 2 ? "fuse" : "rx1"));
  std::stringstream ss;
  write_epoch_csv(ss, recs, 3);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), epoch_csv_header(3));
  const auto back = read_epoch_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_TRUE(same_record(recs[i], back[i])) << "row " << i;
  std::stringstream again;
  write_epoch_csv(again, back, 3);
  EXPECT_EQ(again.str(), text);
}

TEST(Csv, HeaderColumns) {
  EXPECT_EQ(epoch_csv_header(1),
            "run_id,epoch,pt_dbm,mode,x_true,y_true,theta_true_deg,x_fused,y_fused,theta_pred_deg,se_bps_hz,pae_deg,"
            "x0,y0,valid_0,gdop_est_0,gdop_act_0,selected_0");
}

TEST(Csv, RejectsBadInput) {
  std::stringstream wrong_header("run,epoch\n");
  EXPECT_ANY_THROW(read_epoch_csv(wrong_header));
  std::stringstream bad_row(epoch_csv_header(1) + "\n0,0,5,fuse,1,2,3\n");
  EXPECT_ANY_THROW(read_epoch_csv(bad_row));
}

TEST(Csv, SummaryFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "bisense_summary_test.csv";
  const std::vector<SweepSummary> rows{{-5.0, "fuse", 2.4375, 20}, {5.0, "oracle", 5.1234567890123, 20}};
  write_summary_csv(path, rows);
  const auto back = read_summary_csv(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].pt_dbm, rows[i].pt_dbm);
    EXPECT_EQ(back[i].mode, rows[i].mode);
    EXPECT_EQ(back[i].avg_se, rows[i].avg_se);
    EXPECT_EQ(back[i].n_runs, rows[i].n_runs);
  }
  std::filesystem::remove(path);
}

TEST(BoxStats, TukeyConvention) {
  const BoxStats b = box_stats({1, 2, 3, 4, 5, 6, 7, 8, 100});
  EXPECT_DOUBLE_EQ(b.median, 5.0);
  EXPECT_DOUBLE_EQ(b.q1, 3.0);
  EXPECT_DOUBLE_EQ(b.q3, 7.0);
  EXPECT_DOUBLE_EQ(b.whisker_low, 1.0);
  EXPECT_DOUBLE_EQ(b.whisker_high, 8.0);
  EXPECT_EQ(b.n, 9);
  EXPECT_EQ(b.n_outliers, 1);
  const BoxStats one = box_stats({2.5});
  EXPECT_DOUBLE_EQ(one.median, 2.5);
  EXPECT_DOUBLE_EQ(one.whisker_high, 2.5);
}

TEST(Aggregator, SingleRecordAndDeadEpochs) {
  Aggregator agg(42);
  EpochRecord r;
  r.pt_dbm = 5.0;
  r.mode = "rx2";
  r.se_bps_hz = 3.5;
  r.pae_deg = 0.25;
  agg.add(r);
  auto s = agg.summaries();
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].avg_se, 3.5);
  EXPECT_EQ(s[0].n_runs, 1);
  EpochRecord dead = r;
  dead.epoch = 1;
  dead.se_bps_hz = 0.0;
  dead.pae_deg = kNaN;
  agg.add(dead);
  EXPECT_DOUBLE_EQ(agg.summaries()[0].avg_se, 1.75);
  EXPECT_EQ(agg.pae_stats(5.0, "rx2").n, 1);
  EXPECT_EQ(agg.mean_se_per_epoch(5.0, "rx2"), (std::vector<double>{3.5, 0.0}));
}

TEST(Aggregator, MergeIsAssociativeAndOrderFree) {
  std::mt19937_64 rng(2);
  std::vector<EpochRecord> recs;
  for (int run = 0; run < 6; ++run)
    for (int e = 0; e < 40; ++e)
      for (const char* mode : {"fuse", "rx0"}) recs.push_back(random_record(rng, run, e, 5.0, mode));
  Aggregator whole(7);
  for (const auto& r : recs) whole.add(r);

  Aggregator a(7), b(7), c(7);
  for (std::size_t i = 0; i < recs.size(); ++i) (i % 3 == 0 ? a : i % 3 == 1 ? b : c).add(recs[recs.size() - 1 - i]);
  Aggregator left = a;
  left.merge(b);
  left.merge(c);
  Aggregator bc = b;
  bc.merge(c);
  Aggregator right = a;
  right.merge(bc);
  for (const Aggregator* g : {&left, &right}) {
    const auto s1 = whole.summaries();
    const auto s2 = g->summaries();
    ASSERT_EQ(s1.size(), s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
      EXPECT_EQ(s1[i].avg_se, s2[i].avg_se);
      EXPECT_EQ(s1[i].n_runs, s2[i].n_runs);
    }
    EXPECT_EQ(whole.mean_se_per_epoch(5.0, "fuse"), g->mean_se_per_epoch(5.0, "fuse"));
    EXPECT_EQ(whole.pae_stats(5.0, "rx0").median, g->pae_stats(5.0, "rx0").median);
  }
  Aggregator other(8);
  EXPECT_THROW(left.merge(other), std::invalid_argument);
  EXPECT_THROW(left.merge(a), std::invalid_argument);
}
