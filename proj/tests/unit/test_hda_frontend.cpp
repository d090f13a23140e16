#include "bisense/channel_sim.hpp"
#include "bisense/hda_frontend.hpp"
#include "bisense/rx_estimator.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bisense;

TEST(Dpss, MatchesSincKernelEigenvectors) {
  const int n = 64;
  const double nw = 1.0;
  const double w = nw / n;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      A(i, j) = i == j ? 2.0 * w : std::sin(2.0 * kPi * w * (i - j)) / (kPi * (i - j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const Eigen::MatrixXd tapers = dpss(n, nw, 4);
  for (int k = 0; k < 4; ++k) {
    const Eigen::VectorXd ref = es.eigenvectors().col(n - 1 - k);
    EXPECT_NEAR(std::abs(ref.dot(tapers.col(k))), 1.0, 1e-8) << "taper " << k;
  }
  EXPECT_GT(tapers.col(0).sum(), 0.0);
  EXPECT_THROW(dpss(8, 1.0, 9), std::invalid_argument);
}

TEST(Reduction, Orthonormal) {
  for (double c : {-0.7, 0.0, 0.4}) {
    const ReductionMatrix r = build_reduction(c, 64, 4, 1.0);
    EXPECT_EQ(r.n_antennas(), 64);
    EXPECT_EQ(r.n_rf(), 4);
    EXPECT_NEAR((r.U.adjoint() * r.U - Eigen::MatrixXcd::Identity(4, 4)).norm(), 0.0, 1e-10);
  }
  EXPECT_THROW(build_reduction(0.0, 8, 9, 1.0), std::invalid_argument);
  EXPECT_THROW(build_reduction(0.0, 8, 2, 0.0), std::invalid_argument);
}

TEST(Reduction, CenterCapture) {
  for (double c : {-1.0, -0.3, 0.0, 0.25, 0.9}) {
    const ReductionMatrix r = build_reduction(c, 64, 4, 1.0);
    EXPECT_GE(reduced_steering(r, c).squaredNorm() / 64.0, 0.95) << c;
  }
}

TEST(Reduction, CenterShiftIsPhaseModulation) {
  const ReductionMatrix r0 = build_reduction(0.0, 64, 4, 1.0);
  const double c = 0.37;
  const ReductionMatrix r1 = build_reduction(c, 64, 4, 1.0);
  const Eigen::MatrixXcd shifted = steering_vector(c, 64).asDiagonal() * r0.U;
  EXPECT_NEAR((shifted - r1.U).norm(), 0.0, 1e-8);
}

TEST(Reduction, FarSourceRejected) {
  const ReductionMatrix r = build_reduction(0.0, 64, 4, 1.0);
  EXPECT_LE(reduced_steering(r, 0.5).squaredNorm() / 64.0, 0.05);
  EXPECT_LE(reduced_steering(r, -0.9).squaredNorm() / 64.0, 0.05);
}

TEST(Reduction, NoiseStaysWhite) {
  const ReductionMatrix r = build_reduction(0.2, 64, 4, 1.0);
  Rng rng(1);
  RxFrame fr;
  fr.n_symbols = 64;
  fr.n_subcarriers = 128;
  fr.samples.resize(64, 64 * 128);
  fill_complex_gaussian(fr.samples, 1.0, rng);
  const Eigen::MatrixXcd R = sample_covariance(reduce_frame(fr, r));
  EXPECT_EQ(R.rows(), 4);
  // Entries of a sample covariance from 8192 snapshots deviate by about 1/sqrt(8192).
  EXPECT_LT((R - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff(), 5.0 / std::sqrt(8192.0));
}

TEST(Reduction, MusicInsideSector) {
  const int nr = 64;
  const double phi = 0.21;
  const ReductionMatrix r = build_reduction(0.2, nr, 4, 1.0);
  const Eigen::VectorXcd b = reduced_steering(r, phi);
  const Eigen::MatrixXcd R = b * b.adjoint() + 1e-12 * Eigen::MatrixXcd::Identity(4, 4);
  const SteeringTable full = make_steering_table(make_angle_grid(deg2rad(0.02)), nr);
  const SteeringTable table = reduce_steering_table(full, r);
  ASSERT_FALSE(table.angles_rad.empty());
  EXPECT_LT(table.angles_rad.front(), 0.2);
  EXPECT_GT(table.angles_rad.back(), 0.2);
  const MusicResult m = music_aoa(R, 1, table, 0.2);
  ASSERT_TRUE(m.valid);
  EXPECT_NEAR(rad2deg(m.aoa_rad), rad2deg(phi), 0.1);
}

TEST(Reduction, IdentityLeavesFrameUnchanged) {
  Rng rng(2);
  RxFrame fr;
  fr.n_symbols = 2;
  fr.n_subcarriers = 3;
  fr.samples.resize(5, 6);
  fill_complex_gaussian(fr.samples, 1.0, rng);
  const RxFrame out = reduce_frame(fr, ReductionMatrix::identity(5));
  EXPECT_EQ(out.samples, fr.samples);
  EXPECT_THROW(reduce_frame(fr, ReductionMatrix::identity(4)), std::invalid_argument);
}
