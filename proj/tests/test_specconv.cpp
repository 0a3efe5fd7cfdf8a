#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "wignerpose/specconv.hpp"

using namespace wignerpose;

namespace {

RealCoeffs random_coeffs(int L, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  RealCoeffs c(L, channels);
  for (Eigen::Index i = 0; i < c.data.size(); ++i) c.data.data()[i] = n01(rng);
  return c;
}

SO3Coeffs random_so3(int L, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  SO3Coeffs x(L, channels);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = n01(rng);
  return x;
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

const SO3Sampler& sampler_l4() {
  static const SO3Sampler s(so3_healpix(2), 4);
  return s;
}

}  // namespace

TEST(S2Conv, OuterProductAndZero) {
  S2FilterBank f(2, 1, 1);
  f.spectra.setRandom();
  const RealCoeffs c = random_coeffs(2, 1, 1);
  const SO3Coeffs x = s2_conv(c, f);
  for (int l = 0; l <= 2; ++l) {
    const Eigen::MatrixXd want = c.data.row(0).segment(l * l, 2 * l + 1).transpose() *
                                 f.spectra.row(0).segment(l * l, 2 * l + 1);
    EXPECT_LT((Eigen::MatrixXd(x.block(0, l)) - want).cwiseAbs().maxCoeff(), 1e-15);
  }
  EXPECT_EQ(s2_conv(RealCoeffs(2, 1), f).data.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(s2_conv(RealCoeffs(3, 1), f), ShapeError);
}

TEST(S2Conv, LeftEquivariance) {
  S2FilterBank f(4, 3, 5);
  f.spectra = random_coeffs(4, 15, 2).data;
  const RealCoeffs c = random_coeffs(4, 3, 3);
  for (const auto& r : sample_uniform(4, 20)) {
    const SO3Coeffs a = s2_conv(rotate_coeffs(c, r), f);
    const SO3Coeffs b = left_translate(s2_conv(c, f), r);
    EXPECT_LT(rel(a.data, b.data), 1e-9);
  }
}

TEST(SO3Conv, IdentityTapIsIdentity) {
  LocalSO3Filter f = make_local_filter(4, 1, 1, 1);
  f.weights(0, 0) = 1.0;
  const SO3Coeffs x = random_so3(4, 1, 5);
  EXPECT_LT((so3_conv(x, f).data - x.data).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(so3_conv(SO3Coeffs(4, 1), f).data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SO3Conv, LeftEquivariance) {
  LocalSO3Filter f = make_local_filter(4, 3, 2);
  f.weights = random_coeffs(0, 6 * 32, 6).data.reshaped(6, 32);
  const SO3Coeffs x = random_so3(4, 3, 7);
  for (const auto& r : sample_uniform(8, 20))
    EXPECT_LT(rel(so3_conv(left_translate(x, r), f).data, left_translate(so3_conv(x, f), r).data), 1e-9);
}

TEST(LocalTaps, WithinSupport) {
  const auto taps = local_taps(32, 0.39269908169872414);
  ASSERT_EQ(taps.size(), 32u);
  EXPECT_EQ(taps[0], Eigen::Matrix3d::Identity());
  for (const auto& t : taps) {
    EXPECT_TRUE(is_rotation(t));
    EXPECT_LE(geodesic_distance<double>(t, Eigen::Matrix3d::Identity()), 0.39269908169872414);
  }
}

TEST(LeftTranslate, MatchesPullback) {
  // Left translation by R turns F(g) into F(R^T g).
  const SO3Coeffs x = random_so3(3, 1, 9);
  const auto rs = sample_uniform(10, 2);
  const SO3Coeffs y = left_translate(x, rs[0]);
  const double a = y.data.row(0).dot(rotation_to_psi(rs[1], 3).data.transpose());
  const double b =
      x.data.row(0).dot(rotation_to_psi(Eigen::Matrix3d(rs[0].transpose() * rs[1]), 3).data.transpose());
  EXPECT_NEAR(a, b, 1e-10);
}

TEST(Nonlinearity, NonNegativeInputPassesThrough) {
  SO3Coeffs x = random_so3(4, 2, 11);
  for (int c = 0; c < 2; ++c) {
    double bound = 0;
    for (int l = 1; l <= 4; ++l) bound += x.block(c, l).norm() * std::sqrt(2 * l + 1);
    x.block(c, 0)(0, 0) = bound + 1.0;
  }
  const SO3Coeffs y = so3_nonlinearity(x, sampler_l4());
  EXPECT_LT((y.data - x.data).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(so3_nonlinearity(SO3Coeffs(4, 1), sampler_l4()).data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Nonlinearity, ApproximateEquivariance) {
  const SO3Coeffs x = random_so3(4, 4, 12);
  double worst = 0;
  for (const auto& r : sample_uniform(13, 10)) {
    const SO3Coeffs a = so3_nonlinearity(left_translate(x, r), sampler_l4());
    const SO3Coeffs b = left_translate(so3_nonlinearity(x, sampler_l4()), r);
    worst = std::max(worst, rel(a.data, b.data));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(Sampler, RejectsCoarseGrid) { EXPECT_THROW(SO3Sampler(so3_healpix(0), 4), IllConditionedError); }

namespace {

RealCoeffs template_input(int L, int channels, const RotationMatrix<double>& r) {
  return rotate_coeffs(random_coeffs(L, channels, 21), r);
}

}  // namespace

TEST(Forward, ShapesZeroAndDeterminism) {
  ModelConfig cfg;
  cfg.bandlimit = 6;
  const ToyModel m = make_model(cfg, 1);
  const SO3Sampler s(so3_healpix(2), 6);
  const RealCoeffs in = random_coeffs(6, 3, 2);
  const Eigen::VectorXd a = forward(m, s, in);
  EXPECT_EQ(a.size(), 455);
  EXPECT_TRUE(a.allFinite());
  EXPECT_EQ(a, forward(m, s, in));
  EXPECT_EQ(forward(m, s, RealCoeffs(6, 3)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(forward(m, s, RealCoeffs(6, 2)), ShapeError);
}

TEST(Forward, EndToEndEquivariance) {
  ModelConfig cfg;
  const ToyModel m = make_model(cfg, 3);
  const RealCoeffs c = random_coeffs(4, 3, 4);
  const Eigen::VectorXd base = forward(m, sampler_l4(), c);
  for (double phi : {0.4, 1.3, 2.9}) {
    const Eigen::Matrix3d r = rot_z(phi);
    const Eigen::VectorXd got = forward(m, sampler_l4(), rotate_coeffs(c, r));
    const SO3Coeffs want = left_translate(SO3Coeffs(4, RowMajorMatrixXd(base.transpose())), r);
    EXPECT_LT(rel(got.transpose(), want.data), 0.05);
  }
}

TEST(Backward, MatchesFiniteDifferences) {
  for (HeadKind head : {HeadKind::wigner, HeadKind::rotmat}) {
    ModelConfig cfg;
    cfg.head = head;
    ToyModel m = make_model(cfg, 5);
    const RealCoeffs in = template_input(4, 3, sample_uniform(6, 1)[0]);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    Eigen::VectorXd target(head_dim(head, 4));
    for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = n01(rng);
    auto loss = [&](const ToyModel& mm) { return 0.5 * (forward(mm, sampler_l4(), in) - target).squaredNorm(); };
    ForwardCache cache;
    const Eigen::VectorXd out = forward(m, sampler_l4(), in, &cache);
    const Eigen::VectorXd g = backward(m, sampler_l4(), cache, out - target).flat();
    const Eigen::VectorXd p = m.parameters();
    ASSERT_EQ(g.size(), p.size());
    std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
    double worst = 0;
    const double h = 1e-5;
    for (int k = 0; k < 50; ++k) {
      const Eigen::Index i = pick(rng);
      Eigen::VectorXd q = p;
      q(i) = p(i) + h;
      m.set_parameters(q);
      const double up = loss(m);
      q(i) = p(i) - h;
      m.set_parameters(q);
      const double down = loss(m);
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g(i)) / std::max({std::abs(fd), std::abs(g(i)), 1e-6}));
    }
    m.set_parameters(p);
    EXPECT_LT(worst, 1e-4) << to_string(head);
  }
}

TEST(Backward, ZeroResidualGivesZeroGradient) {
  ToyModel m = make_model(ModelConfig{}, 8);
  ForwardCache cache;
  forward(m, sampler_l4(), random_coeffs(4, 3, 9), &cache);
  EXPECT_EQ(backward(m, sampler_l4(), cache, Eigen::VectorXd::Zero(165)).flat().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, GradientDescentReducesLoss) {
  ToyModel m = make_model(ModelConfig{}, 10);
  const Eigen::Matrix3d r = sample_uniform(11, 1)[0];
  const RealCoeffs in = template_input(4, 3, r);
  const Eigen::VectorXd target = rotation_to_psi(r, 4).data;
  double prev = INFINITY;
  for (int step = 0; step < 200; ++step) {
    ForwardCache cache;
    const Eigen::VectorXd out = forward(m, sampler_l4(), in, &cache);
    const double loss = 0.5 * (out - target).squaredNorm();
    ASSERT_LE(loss, prev + 1e-12) << "step " << step;
    prev = loss;
    m.set_parameters(m.parameters() - 1e-4 * backward(m, sampler_l4(), cache, out - target).flat());
  }
}

TEST(Checkpoint, RoundTrip) {
  ModelConfig cfg;
  cfg.head = HeadKind::quaternion;
  const ToyModel m = make_model(cfg, 12);
  std::stringstream ss;
  save_checkpoint(m, ss);
  const ToyModel n = load_checkpoint(ss);
  EXPECT_EQ(n.cfg.head, HeadKind::quaternion);
  EXPECT_EQ(n.parameters(), m.parameters());
  std::string bytes;
  {
    std::stringstream t;
    save_checkpoint(m, t);
    bytes = t.str();
  }
  bytes[4] = 9;  // layout version
  std::stringstream bad(bytes);
  EXPECT_THROW(load_checkpoint(bad), FormatError);
}
