#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wignerpose/estimation.hpp"

using namespace wignerpose;

namespace {

Eigen::VectorXd psi(const Eigen::Matrix3d& r, int L) { return rotation_to_psi(r, L).data; }

Eigen::VectorXd random_vec(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = n01(rng);
  return v;
}

const SO3Grid& grid_l2_table() {
  static const SO3Grid g = [] {
    SO3Grid x = so3_healpix(2);
    attach_psi_table(x, 3);
    return x;
  }();
  return g;
}

}  // namespace

TEST(MseLoss, Basics) {
  const HarmonicVector a = rotation_to_psi(sample_uniform(1, 1)[0], 4);
  EXPECT_EQ(mse_loss(a, a), 0.0);
  LossConfig one;
  one.level_weights = {1.0};
  EXPECT_DOUBLE_EQ(mse_loss(HarmonicVector(0, Eigen::VectorXd::Constant(1, 2.0)),
                            HarmonicVector(0, Eigen::VectorXd::Constant(1, 1.0)), one),
                   1.0);
  LossConfig bad;
  bad.level_weights = {1.0, -1.0};
  EXPECT_THROW(mse_loss(HarmonicVector(1), HarmonicVector(1), bad), std::domain_error);
}

TEST(MseLoss, BiInvariant) {
  const auto rs = sample_uniform(2, 300);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d &r1 = rs[3 * i], &r2 = rs[3 * i + 1], &q = rs[3 * i + 2];
    const double base = mse_loss(rotation_to_psi(r1, 6), rotation_to_psi(r2, 6));
    EXPECT_NEAR(mse_loss(rotation_to_psi(q * r1, 6), rotation_to_psi(q * r2, 6)), base, 1e-9);
    EXPECT_NEAR(mse_loss(rotation_to_psi(Eigen::Matrix3d::Identity(), 6),
                         rotation_to_psi(Eigen::Matrix3d(r1.transpose() * r2), 6)),
                base, 1e-9);
  }
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  const int L = 3;
  const Eigen::VectorXd gt = psi(sample_uniform(3, 1)[0], L);
  const Eigen::VectorXd pred = gt + 0.3 * random_vec(gt.size(), 4);
  for (LossKind k : {LossKind::mse, LossKind::l1, LossKind::huber, LossKind::cosine, LossKind::distribution_ce,
                     LossKind::mse_plus_ce}) {
    LossConfig cfg;
    cfg.kind = k;
    cfg.huber_delta = 0.2;
    const std::size_t target = nearest_index(grid_l2_table(), sample_uniform(3, 1)[0]);
    const LossValue v = harmonic_loss(pred, gt, L, target, &grid_l2_table(), cfg);
    double worst = 0;
    for (Eigen::Index i = 0; i < pred.size(); i += 7) {
      Eigen::VectorXd up = pred, down = pred;
      up(i) += 1e-6;
      down(i) -= 1e-6;
      const double fd = (harmonic_loss(up, gt, L, target, &grid_l2_table(), cfg).value -
                         harmonic_loss(down, gt, L, target, &grid_l2_table(), cfg).value) /
                        2e-6;
      // Floor 1e-3: log-sum-exp over thousands of logits of size ~100 leaves ~1e-9 of roundoff.
      worst = std::max(worst, std::abs(fd - v.grad(i)) / std::max({std::abs(fd), std::abs(v.grad(i)), 1e-3}));
    }
    EXPECT_LT(worst, 1e-5) << to_string(k);
  }
}

TEST(DistributionLoss, LimitsAndSum) {
  const SO3Grid& g = grid_l2_table();
  LossConfig cfg;
  cfg.kind = LossKind::distribution_ce;
  EXPECT_NEAR(distribution_ce_loss(Eigen::VectorXd::Zero(psi_dim(3)), 3, 5, g, cfg).value,
              std::log(static_cast<double>(g.size())), 1e-12);
  cfg.temperature = 1e-3;
  EXPECT_LT(distribution_ce_loss(psi(g.rotations[17], 3), 3, g.rotations[17], g, cfg).value, 1e-9);
  cfg.temperature = 1.0;
  const Eigen::VectorXd gt = psi(g.rotations[3], 3);
  const Eigen::VectorXd pred = gt + 0.1 * random_vec(gt.size(), 5);
  LossConfig joint = cfg;
  joint.kind = LossKind::mse_plus_ce;
  LossConfig m = cfg;
  m.kind = LossKind::mse;
  EXPECT_NEAR(harmonic_loss(pred, gt, 3, 3, &g, joint).value,
              harmonic_loss(pred, gt, 3, 3, &g, m).value + harmonic_loss(pred, gt, 3, 3, &g, cfg).value, 1e-12);
  SO3Grid bare = so3_healpix(1);
  EXPECT_THROW(distribution_ce_loss(pred, 3, 0, bare, cfg), ShapeError);
}

TEST(GridSimilarity, FastPathsMatchTable) {
  for (int level : {1, 2}) {
    SO3Grid g = so3_healpix(level);
    const Eigen::VectorXd pred = random_vec(psi_dim(4), 6 + level);
    const Eigen::VectorXd fast = grid_similarity(pred, 4, g);
    attach_psi_table(g, 4);
    EXPECT_LT((grid_similarity(pred, 4, g) - fast).cwiseAbs().maxCoeff(), 1e-10);
  }
  SO3Grid r = so3_random(9, 500);
  const Eigen::VectorXd pred = random_vec(psi_dim(3), 10);
  const Eigen::VectorXd fly = grid_similarity(pred, 3, r);
  attach_psi_table(r, 3);
  EXPECT_LT((grid_similarity(pred, 3, r) - fly).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InferDistribution, Properties) {
  const SO3Grid& g = grid_l2_table();
  const PoseDistribution d = infer_distribution(psi(g.rotations[42], 3), 3, g);
  EXPECT_NEAR(d.probs.sum(), 1.0, 1e-9);
  EXPECT_EQ(argmax_index(d.probs), 42u);
  EXPECT_EQ(argmax_pose(d), g.rotations[42]);
  const PoseDistribution flat = infer_distribution(psi(g.rotations[42], 3), 3, g, 1e12);
  EXPECT_LT(flat.probs.maxCoeff() - flat.probs.minCoeff(), 1e-6);
  const Eigen::VectorXd logits = random_vec(100, 11);
  EXPECT_LT((softmax(logits) - softmax((logits.array() + 37.0).matrix())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Argmax, LowestIndexOnTies) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(5);
  v(1) = v(3) = 2.0;
  EXPECT_EQ(argmax_index(v), 1u);
}

TEST(Argmax, PicksNearestGridRotation) {
  // The similarity of clean harmonic vectors falls off monotonically with the
  // relative angle, so argmax is the geodesic nearest neighbour.
  for (int level : {1, 2, 3}) {
    const SO3Grid g = so3_healpix(level);
    const double cr = covering_radius(g, 20000, 100 + static_cast<std::uint64_t>(level));
    double worst = 0;
    for (const auto& r : sample_uniform(200 + static_cast<std::uint64_t>(level), 1000)) {
      const auto q = argmax_index(grid_similarity(psi(r, 4), 4, g));
      const double err = deg(geodesic_distance(g.rotations[q], r));
      EXPECT_NEAR(err, deg(geodesic_distance(g.rotations[nearest_index(g, r)], r)), 1e-9);
      worst = std::max(worst, err);
    }
    // Both are maxima of the nearest-neighbour distance over 1000 vs 20000 random probes.
    EXPECT_NEAR(worst, cr, 0.15 * cr) << "level " << level;
    EXPECT_LE(worst, g.nominal_resolution) << "level " << level;
  }
}

TEST(GradientAscent, ConvergesLocally) {
  const auto rs = sample_uniform(12, 20);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n01;
  for (const auto& r : rs) {
    const Eigen::Vector3d axis(n01(rng), n01(rng), n01(rng));
    const Eigen::Matrix3d start = r * axis_angle_to_matrix<double>({axis, rad(3.0)});
    const Eigen::VectorXd pred = psi(r, 4);
    const Eigen::Matrix3d got = gradient_ascent_pose(pred, 4, start);
    EXPECT_LT(deg(geodesic_distance(got, r)), 0.1);
    EXPECT_GE(similarity(pred, 4, got), similarity(pred, 4, start));
    EXPECT_EQ(gradient_ascent_pose(pred, 4, start, 0), start);
  }
}

TEST(Metrics, Basics) {
  const auto rs = sample_uniform(14, 10);
  const Metrics m = metrics(rs, rs);
  EXPECT_NEAR(m.median_error_deg, 0.0, 1e-12);
  EXPECT_EQ(m.acc3, 1.0);
  EXPECT_EQ(m.acc30, 1.0);
  const Metrics one = metrics({rot_z(rad(20.0))}, {Eigen::Matrix3d::Identity()});
  EXPECT_NEAR(one.median_error_deg, 20.0, 1e-12);
  EXPECT_EQ(one.acc15, 0.0);
  EXPECT_EQ(one.acc30, 1.0);
  EXPECT_DOUBLE_EQ(metrics_from_errors({1, 4, 2, 10}).median_error_deg, 3.0);
  EXPECT_THROW(metrics(rs, {}), ShapeError);
  EXPECT_THROW(metrics({}, {}), std::invalid_argument);
}

TEST(Metrics, UniformMedian) {
  // Relative angle of Haar rotations has density (1 - cos t) / pi; its median is 132.35 deg.
  const Metrics m = metrics(sample_uniform(15, 10000), sample_uniform(16, 10000));
  EXPECT_NEAR(m.median_error_deg, 132.35, 1.0);
}
