#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "wignerpose/rotations.hpp"

using namespace wignerpose;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(EulerToMatrix, ZeroAnglesGiveIdentity) {
  EXPECT_LT(max_abs_diff(euler_to_matrix(EulerZYZ<double>{0, 0, 0}), Eigen::Matrix3d::Identity()), 1e-15);
}

TEST(EulerToMatrix, HalfTurnAboutY) {
  const Eigen::Matrix3d r = euler_to_matrix(EulerZYZ<double>{0, kPi, 0});
  EXPECT_LT(max_abs_diff(r, Eigen::Vector3d(-1, 1, -1).asDiagonal().toDenseMatrix()), 1e-15);
}

TEST(EulerToMatrix, MatchesProductOfExplicitMatrices) {
  // Rz(pi/5) Ry(pi/4) Rz(pi/3), multiplied out independently.
  Eigen::Matrix3d expected;
  expected << -0.22300625904628493, -0.7893123335109141, 0.5720614028176843, 0.9084427381107636,
      0.044565010575064935, 0.4156269377774534, -0.3535533905932738, 0.6123724356957945, 0.7071067811865476;
  EXPECT_LT(max_abs_diff(euler_to_matrix(EulerZYZ<double>{kPi / 3, kPi / 4, kPi / 5}), expected), 1e-14);
}

TEST(EulerToMatrix, TemplatedOnScalar) {
  const Matrix3<float> r = euler_to_matrix(EulerZYZ<float>{0.3f, 1.1f, -0.7f});
  EXPECT_TRUE(is_rotation<float>(r, 1e-5f));
}

TEST(MatrixToEuler, Identity) {
  const auto e = matrix_to_euler<double>(Eigen::Matrix3d::Identity());
  EXPECT_EQ(e.alpha, 0.0);
  EXPECT_EQ(e.beta, 0.0);
  EXPECT_EQ(e.gamma, 0.0);
}

TEST(MatrixToEuler, RoundTripGeneric) {
  const auto e = matrix_to_euler(euler_to_matrix(EulerZYZ<double>{0.3, 1.1, -0.7}));
  EXPECT_NEAR(e.alpha, 0.3, 1e-12);
  EXPECT_NEAR(e.beta, 1.1, 1e-12);
  EXPECT_NEAR(e.gamma, -0.7, 1e-12);
}

TEST(MatrixToEuler, GimbalFoldsInPlaneAngleIntoAlpha) {
  const auto e = matrix_to_euler(rot_z(0.5));
  EXPECT_NEAR(e.alpha, 0.5, 1e-15);
  EXPECT_EQ(e.beta, 0.0);
  EXPECT_EQ(e.gamma, 0.0);

  const Eigen::Matrix3d flipped = rot_z(0.4) * rot_y(kPi) * rot_z(0.9);
  const auto f = matrix_to_euler(flipped);
  EXPECT_EQ(f.gamma, 0.0);
  EXPECT_NEAR(f.beta, kPi, 1e-15);
  EXPECT_LT(max_abs_diff(euler_to_matrix(f), flipped), 1e-14);
}

TEST(MatrixToEuler, NearGimbalStillRoundTrips) {
  for (double beta : {1e-7, 1e-9, 1e-11, kPi - 1e-8}) {
    const Eigen::Matrix3d r = euler_to_matrix(EulerZYZ<double>{1.2, beta, -2.5});
    EXPECT_LT(max_abs_diff(euler_to_matrix(matrix_to_euler(r)), r), 1e-12) << "beta=" << beta;
  }
}

TEST(MatrixToEuler, RangesAreCanonical) {
  for (const auto& r : sample_uniform(3, 2000)) {
    const auto e = matrix_to_euler(r);
    EXPECT_GE(e.alpha, -kPi);
    EXPECT_LT(e.alpha, kPi);
    EXPECT_GE(e.gamma, -kPi);
    EXPECT_LT(e.gamma, kPi);
    EXPECT_GE(e.beta, 0.0);
    EXPECT_LE(e.beta, kPi);
  }
}

TEST(Quaternion, IdentityAndCanonicalSign) {
  EXPECT_LT(max_abs_diff(quat_to_matrix(UnitQuaternion<double>(1, 0, 0, 0)), Eigen::Matrix3d::Identity()), 1e-15);
  const UnitQuaternion<double> q(-0.5, 0.5, -0.5, 0.5);
  EXPECT_GT(q.w, 0.0);
  const UnitQuaternion<double> t(0.0, 0.0, -1.0, 0.0);
  EXPECT_EQ(t.y, 1.0);
}

TEST(Quaternion, RoundTripUpToSign) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const UnitQuaternion<double> q(n01(rng), n01(rng), n01(rng), n01(rng));
    const UnitQuaternion<double> back = matrix_to_quat(quat_to_matrix(q));
    const double dot = q.w * back.w + q.x * back.x + q.y * back.y + q.z * back.z;
    EXPECT_NEAR(std::abs(dot), 1.0, 1e-12);
    EXPECT_NEAR(back.w, q.w, 1e-9);
    EXPECT_NEAR(back.x, q.x, 1e-9);
  }
}

TEST(AxisAngle, QuarterTurnAboutZ) {
  const Eigen::Matrix3d r = axis_angle_to_matrix(AxisAngle<double>{Eigen::Vector3d::UnitZ(), kPi / 2});
  EXPECT_LT(max_abs_diff(r, rot_z(kPi / 2)), 1e-15);
}

TEST(AxisAngle, ZeroAngleDegenerateConvention) {
  const auto a = matrix_to_axis_angle<double>(Eigen::Matrix3d::Identity());
  EXPECT_EQ(a.angle, 0.0);
  EXPECT_EQ(a.axis, Eigen::Vector3d::UnitZ());
}

TEST(AxisAngle, RoundTripAwayFromDegenerateAngles) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(1e-6, kPi - 1e-6);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 1000; ++i) {
    const AxisAngle<double> a{Eigen::Vector3d(n01(rng), n01(rng), n01(rng)).normalized(), ang(rng)};
    const auto b = matrix_to_axis_angle(axis_angle_to_matrix(a));
    EXPECT_NEAR(b.angle, a.angle, 1e-9);
    EXPECT_LT((b.axis - a.axis).norm(), 1e-9);
  }
}

TEST(AllRepresentations, MatrixRoundTripsAreIdempotent) {
  for (const auto& r : sample_uniform(17, 2000)) {
    EXPECT_LT(max_abs_diff(euler_to_matrix(matrix_to_euler(r)), r), 1e-9);
    EXPECT_LT(max_abs_diff(quat_to_matrix(matrix_to_quat(r)), r), 1e-9);
    EXPECT_LT(max_abs_diff(axis_angle_to_matrix(matrix_to_axis_angle(r)), r), 1e-9);
    EXPECT_TRUE(is_rotation(euler_to_matrix(matrix_to_euler(r))));
  }
}

TEST(Geodesic, Examples) {
  const Eigen::Matrix3d r = euler_to_matrix(EulerZYZ<double>{0.2, 0.9, 2.0});
  EXPECT_NEAR(geodesic_distance(r, r), 0.0, 1e-12);
  EXPECT_NEAR(geodesic_distance<double>(Eigen::Matrix3d::Identity(), rot_z(kPi)), kPi, 1e-15);
  EXPECT_NEAR(geodesic_distance<double>(Eigen::Matrix3d::Identity(), rot_y(0.2)), 0.2, 1e-15);
}

TEST(Geodesic, MetricProperties) {
  const auto a = sample_uniform(1, 500), b = sample_uniform(2, 500), c = sample_uniform(3, 500);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ab = geodesic_distance(a[i], b[i]);
    EXPECT_NEAR(ab, geodesic_distance(b[i], a[i]), 1e-12);
    EXPECT_LE(geodesic_distance(a[i], c[i]), ab + geodesic_distance(b[i], c[i]) + 1e-9);
    EXPECT_NEAR(geodesic_distance<double>(c[i] * a[i], c[i] * b[i]), ab, 1e-9);
  }
}

TEST(SampleUniform, DeterministicAndValid) {
  const auto a = sample_uniform(0, 1);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_TRUE(is_rotation(a[0]));
  const auto b = sample_uniform(42, 50), c = sample_uniform(42, 50);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i], c[i]);
}

TEST(SampleUniform, HaarTraceExpectationIsZero) {
  const auto rs = sample_uniform(7, 100000);
  double sum = 0;
  for (const auto& r : rs) sum += r.trace();
  EXPECT_NEAR(sum / rs.size(), 0.0, 0.02);
}

TEST(SampleUniform, RelativeAngleMedianMatchesHaarDistribution) {
  // Haar angle density (1 - cos w)/pi; median solves w - sin w = pi/2.
  double lo = 0, hi = kPi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - std::sin(mid) < kPi / 2 ? lo : hi) = mid;
  }
  const auto rs = sample_uniform(9, 100000);
  std::vector<double> ang;
  for (const auto& r : rs) ang.push_back(geodesic_distance<double>(Eigen::Matrix3d::Identity(), r));
  std::nth_element(ang.begin(), ang.begin() + ang.size() / 2, ang.end());
  EXPECT_NEAR(deg(ang[ang.size() / 2]), deg(lo), 0.5);
}
