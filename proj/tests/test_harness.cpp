#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "wignerpose/harness.hpp"

using namespace wignerpose;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.data.n_train = 12;
  c.data.n_test = 6;
  c.model.bandlimit = 2;
  c.model.hidden_channels = 4;
  c.optimizer.epochs = 3;
  c.optimizer.batch = 4;
  c.inference.level = 1;
  return c;
}

std::string bytes(const SyntheticDataset& d) {
  std::ostringstream os;
  save_dataset(d, os);
  return os.str();
}

}  // namespace

TEST(Dataset, SameSeedSameBytes) {
  DatasetConfig c;
  c.n_train = 5;
  c.n_test = 2;
  EXPECT_EQ(bytes(gen_dataset(c, 9)), bytes(gen_dataset(c, 9)));
  EXPECT_NE(bytes(gen_dataset(c, 9)), bytes(gen_dataset(c, 10)));
}

TEST(Dataset, RoundTripBitExact) {
  DatasetConfig c;
  c.n_train = 4;
  c.n_test = 3;
  c.noise = 0.1;
  const SyntheticDataset d = gen_dataset(c, 3);
  std::istringstream is(bytes(d));
  const SyntheticDataset e = load_dataset(is);
  EXPECT_EQ(bytes(e), bytes(d));
  ASSERT_EQ(e.train.size(), 4u);
  ASSERT_EQ(e.test.size(), 3u);
  EXPECT_TRUE(e.test[2].input == d.test[2].input);
  EXPECT_TRUE(e.templ.data == d.templ.data);
}

TEST(Dataset, SplitsDisjointAndShapes) {
  DatasetConfig c;
  c.n_train = 100;
  c.n_test = 4;
  const SyntheticDataset d = gen_dataset(c, 1);
  for (const auto& a : d.train)
    for (const auto& b : d.test) EXPECT_GT(geodesic_distance(a.rotation, b.rotation), 1e-6);
  EXPECT_EQ(d.train[0].input.rows(), 3);
  EXPECT_EQ(d.train[0].input.cols(), static_cast<Eigen::Index>(healpix_npix(2)));

  c.kind = InputKind::image;
  c.image_size = 16;
  c.n_train = 2;
  const SyntheticDataset im = gen_dataset(c, 1);
  EXPECT_EQ(im.train[0].input.cols(), 256);
}

TEST(Dataset, BadMagicRejected) {
  std::istringstream is("XXXX0000");
  EXPECT_THROW(load_dataset(is), FormatError);
}

TEST(Config, JsonRoundTripAndDefaults) {
  RunConfig c = tiny_config();
  c.model.head = HeadKind::rotmat;
  c.loss.kind = LossKind::huber;
  c.inference.grid_kind = SO3GridKind::super_fibonacci;
  const json j = to_json(c);
  EXPECT_EQ(to_json(run_config_from_json(j)), j);
  EXPECT_EQ(to_json(run_config_from_json(json::object())), to_json(RunConfig{}));
}

TEST(Config, UnknownKeysAndRanges) {
  EXPECT_THROW(run_config_from_json(json{{"modle", json::object()}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(json{{"model", {{"bandlimt", 3}}}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(json{{"inference", {{"level", 5}}}}), std::invalid_argument);
  EXPECT_NO_THROW(run_config_from_json(json{{"inference", {{"level", 5}, {"allow_large", true}}}}));
  EXPECT_THROW(run_config_from_json(json{{"model", {{"in_channels", 2}}}}), std::invalid_argument);
}

TEST(Config, HashIsStableHex) {
  const std::string h = config_hash(to_json(RunConfig{}));
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, config_hash(to_json(RunConfig{})));
  RunConfig c;
  c.seeds.init = 99;
  EXPECT_NE(h, config_hash(to_json(c)));
}

TEST(Spatial, TargetsRoundTrip) {
  const auto rs = sample_uniform(5, 50);
  for (HeadKind h : {HeadKind::euler, HeadKind::quaternion, HeadKind::axis_angle, HeadKind::rotmat}) {
    for (const auto& r : rs) {
      const Eigen::VectorXd t = spatial_target(h, r);
      ASSERT_EQ(t.size(), head_dim(h, 0));
      EXPECT_LT(geodesic_distance(spatial_to_rotation(h, t), r), 1e-9) << to_string(h);
    }
  }
  EXPECT_THROW(spatial_target(HeadKind::wigner, rs[0]), std::invalid_argument);
}

TEST(Spatial, RotmatProjection) {
  const auto r = sample_uniform(8, 1)[0];
  Eigen::VectorXd v = spatial_target(HeadKind::rotmat, r) * 2.5;
  v(1) += 0.01;
  const auto p = spatial_to_rotation(HeadKind::rotmat, v);
  EXPECT_TRUE(is_rotation(p, 1e-12));
  EXPECT_LT(deg(geodesic_distance(p, r)), 1.0);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  RunConfig c = tiny_config();
  c.optimizer.lr = 0;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  const TrainResult r = train(c, d);
  EXPECT_TRUE(r.model.parameters() == make_model(c.model, c.seeds.init).parameters());
  EXPECT_EQ(r.log.size(), 3u);
}

TEST(Train, SmallLearningRateLossNonIncreasing) {
  RunConfig c = tiny_config();
  c.optimizer.lr = 1e-4;
  c.optimizer.momentum = 0;
  c.optimizer.batch = c.data.n_train;
  c.optimizer.epochs = 6;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  const TrainResult r = train(c, d);
  for (std::size_t e = 1; e < r.log.size(); ++e) EXPECT_LE(r.log[e].loss, r.log[e - 1].loss + 1e-12);
}

TEST(Train, Deterministic) {
  RunConfig c = tiny_config();
  const SyntheticDataset d = gen_dataset(c.data, 1);
  EXPECT_TRUE(train(c, d).model.parameters() == train(c, d).model.parameters());
}

TEST(Train, DivergenceGuard) {
  RunConfig c = tiny_config();
  c.optimizer.lr = 1e6;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  EXPECT_THROW(train(c, d), std::runtime_error);
}

TEST(Train, SpatialAndDistributionLossesRun) {
  RunConfig c = tiny_config();
  c.optimizer.epochs = 1;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  c.model.head = HeadKind::quaternion;
  EXPECT_NO_THROW(train(c, d));
  c.model.head = HeadKind::wigner;
  c.loss.kind = LossKind::mse_plus_ce;
  c.ce_level = 1;
  EXPECT_NO_THROW(train(c, d));
  c.model.head = HeadKind::euler;
  EXPECT_THROW(train(c, d), std::invalid_argument);
}

TEST(Evaluate, TrainSplitAtLeastAsGoodAsTest) {
  RunConfig c;
  c.data.n_test = 40;
  c.model.bandlimit = 2;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  const ToyModel m = train(c, d).model;
  const Metrics tr = evaluate(m, c, d, false).argmax;
  const Metrics te = evaluate(m, c, d, true).argmax;
  EXPECT_GE(tr.acc15 + 0.05, te.acc15);
  EXPECT_LT(tr.median_error_deg, 15.0);
}

TEST(Evaluate, EmptySplitIsError) {
  RunConfig c = tiny_config();
  c.data.n_test = 0;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  EXPECT_THROW(evaluate(make_model(c.model, 1), c, d), std::invalid_argument);
}

TEST(Evaluate, BothReadoutsReported) {
  RunConfig c = tiny_config();
  c.inference.gradient_ascent = true;
  c.inference.ga_steps = 5;
  const SyntheticDataset d = gen_dataset(c.data, 1);
  const EvalReport rep = evaluate(make_model(c.model, 1), c, d);
  ASSERT_TRUE(rep.refined.has_value());
  EXPECT_EQ(rep.refined->count, 6u);
  const json j = report_json(rep, c);
  EXPECT_TRUE(j.contains("argmax"));
  EXPECT_TRUE(j.contains("gradient_ascent"));
  EXPECT_EQ(j.at("library_version"), library_version());
  EXPECT_EQ(j.at("config_hash"), config_hash(to_json(c)));
  EXPECT_TRUE(j.contains("seeds"));

  std::ostringstream os;
  write_samples_csv(rep, os);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "index,gt_w,gt_x,gt_y,gt_z,pred_w,pred_x,pred_y,pred_z,error_deg,refined_error_deg");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Ablation, GridTypeUsesCacheOnSecondRun) {
  RunConfig c = tiny_config();
  const auto dir = std::filesystem::temp_directory_path() / "wignerpose_ablation_test";
  std::filesystem::remove_all(dir);
  const auto first = run_ablation(AblationKind::grid_type, c, dir.string());
  ASSERT_EQ(first.size(), 3u);
  EXPECT_FALSE(first[0].cached);
  const auto second = run_ablation(AblationKind::grid_type, c, dir.string());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(second[i].cached);
    EXPECT_EQ(second[i].metrics.median_error_deg, first[i].metrics.median_error_deg);
  }
  const json j = ablation_json(AblationKind::grid_type, second, c);
  EXPECT_EQ(j.at("rows").size(), 3u);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(ablation_kind_from_string("nope"), std::invalid_argument);
}
