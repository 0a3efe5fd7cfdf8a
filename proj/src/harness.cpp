#include "wignerpose/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/SVD>

#include "wignerpose/errors.hpp"
#include "wignerpose/io.hpp"

namespace wignerpose {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string to_string(InputKind k) { return k == InputKind::spherical ? "spherical" : "image"; }

InputKind input_kind_from_string(const std::string& s) {
  if (s == "spherical") return InputKind::spherical;
  if (s == "image") return InputKind::image;
  throw std::invalid_argument("unknown input kind: " + s);
}

std::string to_string(EdgeDecay e) { return e == EdgeDecay::cosine ? "cosine" : "none"; }

EdgeDecay edge_decay_from_string(const std::string& s) {
  if (s == "cosine") return EdgeDecay::cosine;
  if (s == "none") return EdgeDecay::none;
  throw std::invalid_argument("unknown edge decay: " + s);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Eigen::VectorXd target_of(HeadKind h, int L, const RotationMatrix<double>& r) {
  return h == HeadKind::wigner ? rotation_to_psi(r, L).data : spatial_target(h, r);
}

}  // namespace

std::vector<SphericalPoint> SyntheticDataset::points() const { return healpix_s2(cfg.input_level).points; }

SyntheticDataset gen_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  if (cfg.n_train < 0 || cfg.n_test < 0 || cfg.n_train + cfg.n_test == 0)
    throw std::invalid_argument("gen_dataset: need at least one sample");
  if (cfg.channels < 1 || cfg.template_bandlimit < 0) throw std::invalid_argument("gen_dataset: bad shape");
  SyntheticDataset d;
  d.cfg = cfg;
  d.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> n01;
  d.templ = RealCoeffs(cfg.template_bandlimit, cfg.channels);
  for (int c = 0; c < cfg.channels; ++c)
    for (int l = 0; l <= cfg.template_bandlimit; ++l)
      for (int m = -l; m <= l; ++m) d.templ(c, l, m) = n01(rng) / (1.0 + l);

  const auto rotations = sample_uniform(mix_seed(seed, 2), static_cast<std::size_t>(cfg.n_train + cfg.n_test));
  const std::vector<SphericalPoint> pts = cfg.kind == InputKind::spherical ? d.points()
                                                                           : std::vector<SphericalPoint>{};
  std::mt19937_64 noise_rng(mix_seed(seed, 3));
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    const RealCoeffs rc = rotate_coeffs(d.templ, rotations[i]);
    Sample s;
    s.rotation = rotations[i];
    if (cfg.kind == InputKind::spherical) {
      s.input = synthesize(rc, pts).values;
    } else {
      s.input = render_orthographic(rc, cfg.image_size, cfg.image_size).values;
    }
    if (cfg.noise > 0)
      for (Eigen::Index k = 0; k < s.input.size(); ++k) s.input.data()[k] += cfg.noise * n01(noise_rng);
    (static_cast<int>(i) < cfg.n_train ? d.train : d.test).push_back(std::move(s));
  }
  return d;
}

namespace {

json dataset_config_json(const DatasetConfig& c) {
  return {{"kind", to_string(c.kind)},           {"n_train", c.n_train},
          {"n_test", c.n_test},                  {"channels", c.channels},
          {"template_bandlimit", c.template_bandlimit}, {"input_level", c.input_level},
          {"image_size", c.image_size},          {"noise", c.noise}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  check_keys(j, {"kind", "n_train", "n_test", "channels", "template_bandlimit", "input_level", "image_size", "noise"},
             "data");
  DatasetConfig c;
  if (j.contains("kind")) c.kind = input_kind_from_string(j.at("kind").get<std::string>());
  read_opt(j, "n_train", c.n_train);
  read_opt(j, "n_test", c.n_test);
  read_opt(j, "channels", c.channels);
  read_opt(j, "template_bandlimit", c.template_bandlimit);
  read_opt(j, "input_level", c.input_level);
  read_opt(j, "image_size", c.image_size);
  read_opt(j, "noise", c.noise);
  return c;
}

void write_samples(std::ostream& os, const std::vector<Sample>& v) {
  io::write<std::uint64_t>(os, v.size());
  for (const Sample& s : v) {
    io::write_doubles(os, s.rotation.data(), 9);
    io::write<std::int64_t>(os, s.input.rows());
    io::write<std::int64_t>(os, s.input.cols());
    io::write_doubles(os, s.input.data(), static_cast<std::size_t>(s.input.size()));
  }
}

std::vector<Sample> read_samples(std::istream& is) {
  const auto n = io::read<std::uint64_t>(is);
  if (n > (1u << 24)) throw FormatError("WDDS: sample count out of range");
  std::vector<Sample> v(n);
  for (Sample& s : v) {
    io::read_doubles(is, s.rotation.data(), 9);
    const auto r = io::read<std::int64_t>(is);
    const auto c = io::read<std::int64_t>(is);
    if (r < 0 || c < 0 || r * c > (std::int64_t{1} << 28)) throw FormatError("WDDS: input shape out of range");
    s.input.resize(r, c);
    io::read_doubles(is, s.input.data(), static_cast<std::size_t>(s.input.size()));
  }
  return v;
}

}  // namespace

void save_dataset(const SyntheticDataset& d, std::ostream& os) {
  io::write_header(os, "WDDS", kDatasetVersion);
  io::write_string(os, dataset_config_json(d.cfg).dump());
  io::write<std::uint64_t>(os, d.seed);
  io::write<std::int32_t>(os, d.templ.bandlimit);
  io::write<std::int64_t>(os, d.templ.data.rows());
  io::write_doubles(os, d.templ.data.data(), static_cast<std::size_t>(d.templ.data.size()));
  write_samples(os, d.train);
  write_samples(os, d.test);
  if (!os) throw std::runtime_error("save_dataset: write failed");
}

SyntheticDataset load_dataset(std::istream& is) {
  io::expect_header(is, "WDDS", kDatasetVersion);
  SyntheticDataset d;
  d.cfg = dataset_config_from_json(json::parse(io::read_string(is)));
  d.seed = io::read<std::uint64_t>(is);
  const auto L = io::read<std::int32_t>(is);
  const auto rows = io::read<std::int64_t>(is);
  if (L < 0 || L > 20 || rows < 1 || rows > 4096) throw FormatError("WDDS: template shape out of range");
  d.templ = RealCoeffs(L, static_cast<int>(rows));
  io::read_doubles(is, d.templ.data.data(), static_cast<std::size_t>(d.templ.data.size()));
  d.train = read_samples(is);
  d.test = read_samples(is);
  return d;
}

void save_dataset(const SyntheticDataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  save_dataset(d, os);
}

SyntheticDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_dataset(is);
}

json to_json(const RunConfig& c) {
  json lw = json::array();
  for (double w : c.loss.level_weights) lw.push_back(w);
  return {
      {"data", dataset_config_json(c.data)},
      {"model",
       {{"bandlimit", c.model.bandlimit},
        {"in_channels", c.model.in_channels},
        {"mid_channels", c.model.mid_channels},
        {"hidden_channels", c.model.hidden_channels},
        {"nonlin_level", c.model.nonlin_level},
        {"taps", c.model.taps},
        {"support_deg", deg(c.model.support_angle)},
        {"head", to_string(c.model.head)}}},
      {"mapper",
       {{"level", c.mapper_level},
        {"dropout_fraction", c.mapper.dropout_fraction},
        {"edge_decay", to_string(c.mapper.edge_decay)},
        {"sample_count", c.mapper.sample_count}}},
      {"loss",
       {{"kind", to_string(c.loss.kind)},
        {"level_weights", lw},
        {"huber_delta", c.loss.huber_delta},
        {"ce_weight", c.loss.ce_weight},
        {"temperature", c.loss.temperature},
        {"ce_level", c.ce_level}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"momentum", c.optimizer.momentum},
        {"nesterov", c.optimizer.nesterov},
        {"epochs", c.optimizer.epochs},
        {"batch", c.optimizer.batch},
        {"decay_every", c.optimizer.decay_every},
        {"decay_factor", c.optimizer.decay_factor},
        {"clip_norm", c.optimizer.clip_norm}}},
      {"inference",
       {{"grid", to_string(c.inference.grid_kind)},
        {"level", c.inference.level},
        {"count", c.inference.count},
        {"grid_seed", c.inference.grid_seed},
        {"allow_large", c.inference.allow_large},
        {"temperature", c.inference.temperature},
        {"gradient_ascent", c.inference.gradient_ascent},
        {"ga_steps", c.inference.ga_steps},
        {"ga_lr", c.inference.ga_lr}}},
      {"seeds",
       {{"data", c.seeds.data}, {"init", c.seeds.init}, {"shuffle", c.seeds.shuffle}, {"dropout", c.seeds.dropout}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"data", "model", "mapper", "loss", "optimizer", "inference", "seeds"}, "config");
  RunConfig c;
  if (j.contains("data")) c.data = dataset_config_from_json(j.at("data"));
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"bandlimit", "in_channels", "mid_channels", "hidden_channels", "nonlin_level", "taps", "support_deg",
                   "head"},
               "model");
    read_opt(m, "bandlimit", c.model.bandlimit);
    read_opt(m, "in_channels", c.model.in_channels);
    read_opt(m, "mid_channels", c.model.mid_channels);
    read_opt(m, "hidden_channels", c.model.hidden_channels);
    read_opt(m, "nonlin_level", c.model.nonlin_level);
    read_opt(m, "taps", c.model.taps);
    if (m.contains("support_deg")) c.model.support_angle = rad(m.at("support_deg").get<double>());
    if (m.contains("head")) c.model.head = head_kind_from_string(m.at("head").get<std::string>());
  }
  if (j.contains("mapper")) {
    const json& m = j.at("mapper");
    check_keys(m, {"level", "dropout_fraction", "edge_decay", "sample_count"}, "mapper");
    read_opt(m, "level", c.mapper_level);
    read_opt(m, "dropout_fraction", c.mapper.dropout_fraction);
    if (m.contains("edge_decay")) c.mapper.edge_decay = edge_decay_from_string(m.at("edge_decay").get<std::string>());
    read_opt(m, "sample_count", c.mapper.sample_count);
  }
  if (j.contains("loss")) {
    const json& m = j.at("loss");
    check_keys(m, {"kind", "level_weights", "huber_delta", "ce_weight", "temperature", "ce_level"}, "loss");
    if (m.contains("kind")) c.loss.kind = loss_kind_from_string(m.at("kind").get<std::string>());
    read_opt(m, "level_weights", c.loss.level_weights);
    read_opt(m, "huber_delta", c.loss.huber_delta);
    read_opt(m, "ce_weight", c.loss.ce_weight);
    read_opt(m, "temperature", c.loss.temperature);
    read_opt(m, "ce_level", c.ce_level);
  }
  if (j.contains("optimizer")) {
    const json& m = j.at("optimizer");
    check_keys(m, {"lr", "momentum", "nesterov", "epochs", "batch", "decay_every", "decay_factor", "clip_norm"},
               "optimizer");
    read_opt(m, "lr", c.optimizer.lr);
    read_opt(m, "momentum", c.optimizer.momentum);
    read_opt(m, "nesterov", c.optimizer.nesterov);
    read_opt(m, "epochs", c.optimizer.epochs);
    read_opt(m, "batch", c.optimizer.batch);
    read_opt(m, "decay_every", c.optimizer.decay_every);
    read_opt(m, "decay_factor", c.optimizer.decay_factor);
    read_opt(m, "clip_norm", c.optimizer.clip_norm);
  }
  if (j.contains("inference")) {
    const json& m = j.at("inference");
    check_keys(m, {"grid", "level", "count", "grid_seed", "allow_large", "temperature", "gradient_ascent", "ga_steps",
                   "ga_lr"},
               "inference");
    if (m.contains("grid")) c.inference.grid_kind = so3_grid_kind_from_string(m.at("grid").get<std::string>());
    read_opt(m, "level", c.inference.level);
    read_opt(m, "count", c.inference.count);
    read_opt(m, "grid_seed", c.inference.grid_seed);
    read_opt(m, "allow_large", c.inference.allow_large);
    read_opt(m, "temperature", c.inference.temperature);
    read_opt(m, "gradient_ascent", c.inference.gradient_ascent);
    read_opt(m, "ga_steps", c.inference.ga_steps);
    read_opt(m, "ga_lr", c.inference.ga_lr);
  }
  if (j.contains("seeds")) {
    const json& m = j.at("seeds");
    check_keys(m, {"data", "init", "shuffle", "dropout"}, "seeds");
    read_opt(m, "data", c.seeds.data);
    read_opt(m, "init", c.seeds.init);
    read_opt(m, "shuffle", c.seeds.shuffle);
    read_opt(m, "dropout", c.seeds.dropout);
  }
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + msg);
  };
  require(c.model.bandlimit >= 0 && c.model.bandlimit <= 20, "model.bandlimit must be in [0, 20]");
  require(c.model.in_channels == c.data.channels, "model.in_channels must equal data.channels");
  require(c.model.mid_channels >= 1 && c.model.hidden_channels >= 1, "channel counts must be positive");
  require(c.model.nonlin_level >= 0 && c.model.nonlin_level <= 4, "model.nonlin_level must be in [0, 4]");
  require(c.model.taps >= 1, "model.taps must be positive");
  require(c.mapper_level >= 0 && c.mapper_level <= 8, "mapper.level must be in [0, 8]");
  require(c.data.input_level >= 0 && c.data.input_level <= 8, "data.input_level must be in [0, 8]");
  require(c.mapper.dropout_fraction >= 0 && c.mapper.dropout_fraction < 1, "mapper.dropout_fraction in [0, 1)");
  require(c.ce_level >= 0 && c.ce_level <= 3, "loss.ce_level must be in [0, 3]");
  require(c.loss.temperature > 0 && c.inference.temperature > 0, "temperatures must be positive");
  require(c.optimizer.epochs >= 0 && c.optimizer.batch >= 1 && c.optimizer.decay_every >= 1, "optimizer ranges");
  require(c.optimizer.lr >= 0, "optimizer.lr must be non-negative");
  require(c.optimizer.clip_norm >= 0, "optimizer.clip_norm must be non-negative");
  require(c.inference.level >= 0 && c.inference.level <= 5, "inference.level must be in [0, 5]");
  require(c.inference.level < 5 || c.inference.allow_large, "inference.level 5 needs inference.allow_large");
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string library_version() { return WIGNERPOSE_VERSION; }

Eigen::VectorXd spatial_target(HeadKind h, const RotationMatrix<double>& r) {
  switch (h) {
    case HeadKind::euler: {
      const auto e = matrix_to_euler(r);
      return Eigen::Vector3d(e.alpha, e.beta, e.gamma);
    }
    case HeadKind::quaternion: {
      const auto q = matrix_to_quat(r);
      return Eigen::Vector4d(q.w, q.x, q.y, q.z);
    }
    case HeadKind::axis_angle: {
      const auto a = matrix_to_axis_angle(r);
      return Eigen::Vector4d(a.axis.x(), a.axis.y(), a.axis.z(), a.angle);
    }
    case HeadKind::rotmat: return r.reshaped<Eigen::RowMajor>();
    case HeadKind::wigner: break;
  }
  throw std::invalid_argument("spatial_target: not a spatial head");
}

RotationMatrix<double> spatial_to_rotation(HeadKind h, const Eigen::VectorXd& v) {
  if (v.size() != head_dim(h, 0)) throw ShapeError("spatial_to_rotation: length mismatch");
  switch (h) {
    case HeadKind::euler: return euler_to_matrix<double>({v(0), v(1), v(2)});
    case HeadKind::quaternion:
      if (v.norm() == 0.0) return RotationMatrix<double>::Identity();
      return quat_to_matrix(UnitQuaternion<double>(v(0), v(1), v(2), v(3)));
    case HeadKind::axis_angle: {
      const Eigen::Vector3d axis = v.head<3>();
      if (axis.norm() == 0.0) return RotationMatrix<double>::Identity();
      return axis_angle_to_matrix<double>({axis, v(3)});
    }
    case HeadKind::rotmat: {
      const Eigen::Matrix3d m = v.reshaped<Eigen::RowMajor>(3, 3);
      const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
      s(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
      return svd.matrixU() * s * svd.matrixV().transpose();
    }
    case HeadKind::wigner: break;
  }
  throw std::invalid_argument("spatial_to_rotation: not a spatial head");
}

Pipeline::Pipeline(const RunConfig& cfg, const SyntheticDataset& d) : cfg_(cfg) {
  validate(cfg);
  if (d.cfg.channels != cfg.model.in_channels) throw ShapeError("Pipeline: dataset channels != model in_channels");
  cfg_.data = d.cfg;
  cfg_.mapper.grid = healpix_s2(cfg.mapper_level, S2Subset::hemisphere);
  if (d.cfg.kind == InputKind::spherical) {
    full_analyzer_.emplace(d.points(), cfg.model.bandlimit);
  } else {
    height_ = width_ = d.cfg.image_size;
  }
  sampler_.emplace(so3_healpix(cfg.model.nonlin_level), cfg.model.bandlimit);
}

RealCoeffs Pipeline::input_coeffs(const Sample& s, bool train, std::uint64_t seed) const {
  if (full_analyzer_) {
    if (s.input.cols() != static_cast<Eigen::Index>(full_analyzer_->pseudo_inverse().cols()))
      throw ShapeError("input_coeffs: sample size differs from the input grid");
    return full_analyzer_->apply(s.input);
  }
  FeatureMap f;
  f.height = height_;
  f.width = width_;
  f.values = s.input;
  const SphericalSignal sig = project(f, cfg_.mapper, train, seed);
  return analyze(sig, cfg_.model.bandlimit);
}

TrainResult train(const RunConfig& cfg, const SyntheticDataset& d, int eval_every, const EpochCallback& on_epoch) {
  if (d.train.empty()) throw std::invalid_argument("train: empty training split");
  const Pipeline pipe(cfg, d);
  const int L = cfg.model.bandlimit;
  const HeadKind head = cfg.model.head;
  TrainResult res;
  res.model = make_model(cfg.model, cfg.seeds.init);
  ToyModel& m = res.model;

  const bool uses_grid = cfg.loss.kind == LossKind::distribution_ce || cfg.loss.kind == LossKind::mse_plus_ce;
  if (uses_grid && head != HeadKind::wigner) throw std::invalid_argument("train: distribution losses need the wigner head");
  std::optional<SO3Grid> ce_grid;
  if (uses_grid) {
    ce_grid = so3_healpix(cfg.ce_level);
    attach_psi_table(*ce_grid, L);
  }

  const bool fixed_inputs = d.cfg.kind == InputKind::spherical;
  std::vector<RealCoeffs> inputs;
  std::vector<Eigen::VectorXd> targets;
  std::vector<std::size_t> target_index(d.train.size(), 0);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    if (fixed_inputs) inputs.push_back(pipe.input_coeffs(d.train[i], true, 0));
    targets.push_back(target_of(head, L, d.train[i].rotation));
    if (ce_grid) target_index[i] = nearest_index(*ce_grid, d.train[i].rotation);
  }
  LossConfig loss_cfg = cfg.loss;
  int loss_l = L;
  if (head != HeadKind::wigner) {
    loss_cfg.level_weights.clear();
    loss_l = -1;
  }

  Eigen::VectorXd params = m.parameters();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  std::vector<std::size_t> order(d.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(cfg.seeds.shuffle);
  const auto& opt = cfg.optimizer;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const double lr = opt.lr * std::pow(opt.decay_factor, epoch / opt.decay_every);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(opt.batch));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const RealCoeffs in = fixed_inputs
                                  ? inputs[i]
                                  : pipe.input_coeffs(d.train[i], true,
                                                      mix_seed(cfg.seeds.dropout, static_cast<std::uint64_t>(epoch) *
                                                                                          d.train.size() + i));
        ForwardCache cache;
        const Eigen::VectorXd out = forward(m, pipe.sampler(), in, &cache);
        const LossValue lv =
            head == HeadKind::wigner
                ? harmonic_loss(out, targets[i], L, target_index[i], ce_grid ? &*ce_grid : nullptr, loss_cfg)
                : regression_loss(out, targets[i], loss_cfg, loss_l);
        if (!std::isfinite(lv.value)) {
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                   std::to_string(i) + "; lower optimizer.lr");
        }
        epoch_loss += lv.value;
        grad += backward(m, pipe.sampler(), cache, lv.grad).flat();
      }
      grad /= static_cast<double>(stop - start);
      if (opt.clip_norm > 0 && grad.norm() > opt.clip_norm) grad *= opt.clip_norm / grad.norm();
      velocity = opt.momentum * velocity + grad;
      const Eigen::VectorXd step = opt.nesterov ? Eigen::VectorXd(grad + opt.momentum * velocity) : velocity;
      params -= lr * step;
      m.set_parameters(params);
    }
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.loss = epoch_loss / static_cast<double>(d.train.size());
    if (!std::isfinite(log.loss)) throw std::runtime_error("train: non-finite epoch loss");
    if (eval_every > 0 && !d.test.empty() && ((epoch + 1) % eval_every == 0 || epoch + 1 == opt.epochs))
      log.test = evaluate(m, cfg, d).argmax;
    res.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return res;
}

SO3Grid make_inference_grid(const InferenceConfig& c, int bandlimit) {
  (void)bandlimit;
  const std::size_t n = c.count ? c.count : static_cast<std::size_t>(72) << (3 * c.level);
  switch (c.grid_kind) {
    case SO3GridKind::healpix_hopf: return so3_healpix(c.level, c.allow_large);
    case SO3GridKind::random: return so3_random(c.grid_seed, n);
    case SO3GridKind::super_fibonacci: return so3_super_fibonacci(n);
  }
  throw std::invalid_argument("make_inference_grid: unknown kind");
}

EvalReport evaluate(const ToyModel& m, const RunConfig& cfg, const SyntheticDataset& d, bool test_split) {
  const SO3Grid grid = make_inference_grid(cfg.inference, cfg.model.bandlimit);
  return evaluate(m, cfg, d, grid, test_split);
}

EvalReport evaluate(const ToyModel& m, const RunConfig& cfg, const SyntheticDataset& d, const SO3Grid& grid,
                    bool test_split) {
  const std::vector<Sample>& split = test_split ? d.test : d.train;
  if (split.empty()) throw std::invalid_argument("evaluate: empty dataset split");
  RunConfig rc = cfg;
  rc.model = m.cfg;
  const Pipeline pipe(rc, d);
  const int L = m.cfg.bandlimit;
  const bool refine = cfg.inference.gradient_ascent && m.cfg.head == HeadKind::wigner;
  EvalReport rep;
  std::vector<RotationMatrix<double>> preds, gts, refined;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const Eigen::VectorXd out = forward(m, pipe.sampler(), pipe.input_coeffs(split[i], false, 0));
    SampleResult s;
    s.index = i;
    s.gt = split[i].rotation;
    if (m.cfg.head == HeadKind::wigner) {
      s.pred = grid.rotations[argmax_index(grid_similarity(out, L, grid))];
    } else {
      s.pred = spatial_to_rotation(m.cfg.head, out);
    }
    s.error_deg = deg(geodesic_distance(s.pred, s.gt));
    if (refine) {
      s.refined = gradient_ascent_pose(out, L, s.pred, cfg.inference.ga_steps, cfg.inference.ga_lr);
      s.refined_error_deg = deg(geodesic_distance(*s.refined, s.gt));
      refined.push_back(*s.refined);
    }
    preds.push_back(s.pred);
    gts.push_back(s.gt);
    rep.samples.push_back(std::move(s));
  }
  rep.argmax = metrics(preds, gts);
  if (refine) rep.refined = metrics(refined, gts);
  return rep;
}

json metrics_json(const Metrics& m) {
  return {{"median_error_deg", m.median_error_deg},
          {"acc@3", m.acc3},
          {"acc@5", m.acc5},
          {"acc@10", m.acc10},
          {"acc@15", m.acc15},
          {"acc@30", m.acc30},
          {"count", m.count}};
}

json report_json(const EvalReport& r, const RunConfig& cfg) {
  const json c = to_json(cfg);
  json j = {{"config_hash", config_hash(c)},
            {"library_version", library_version()},
            {"seeds", c.at("seeds")},
            {"argmax", metrics_json(r.argmax)}};
  if (r.refined) j["gradient_ascent"] = metrics_json(*r.refined);
  return j;
}

void write_samples_csv(const EvalReport& r, std::ostream& os) {
  os << "index,gt_w,gt_x,gt_y,gt_z,pred_w,pred_x,pred_y,pred_z,error_deg";
  const bool refined = !r.samples.empty() && r.samples.front().refined;
  if (refined) os << ",refined_error_deg";
  os << "\n" << std::setprecision(17);
  for (const SampleResult& s : r.samples) {
    const auto g = matrix_to_quat(s.gt);
    const auto p = matrix_to_quat(s.pred);
    os << s.index << ',' << g.w << ',' << g.x << ',' << g.y << ',' << g.z << ',' << p.w << ',' << p.x << ',' << p.y
       << ',' << p.z << ',' << s.error_deg;
    if (refined) os << ',' << s.refined_error_deg;
    os << "\n";
  }
}

AblationKind ablation_kind_from_string(const std::string& s) {
  if (s == "parametrization") return AblationKind::parametrization;
  if (s == "loss") return AblationKind::loss;
  if (s == "grid_type") return AblationKind::grid_type;
  if (s == "grid_size") return AblationKind::grid_size;
  if (s == "bandlimit") return AblationKind::bandlimit;
  throw std::invalid_argument("unknown ablation kind: " + s);
}

std::string to_string(AblationKind k) {
  switch (k) {
    case AblationKind::parametrization: return "parametrization";
    case AblationKind::loss: return "loss";
    case AblationKind::grid_type: return "grid_type";
    case AblationKind::grid_size: return "grid_size";
    case AblationKind::bandlimit: return "bandlimit";
  }
  return "unknown";
}

namespace {

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.median_error_deg = j.at("median_error_deg").get<double>();
  m.acc3 = j.at("acc@3").get<double>();
  m.acc5 = j.at("acc@5").get<double>();
  m.acc10 = j.at("acc@10").get<double>();
  m.acc15 = j.at("acc@15").get<double>();
  m.acc30 = j.at("acc@30").get<double>();
  m.count = j.at("count").get<std::size_t>();
  return m;
}

std::vector<std::string> default_variants(AblationKind k, const RunConfig& base) {
  switch (k) {
    case AblationKind::parametrization: return {"wigner", "euler", "quaternion", "axis_angle", "rotmat"};
    case AblationKind::loss: return {"mse", "l1", "huber", "cosine"};
    case AblationKind::grid_type: return {"healpix", "random", "super_fibonacci"};
    case AblationKind::grid_size: {
      std::vector<std::string> v;
      for (int r = 0; r <= base.inference.level; ++r) v.push_back(std::to_string(r));
      return v;
    }
    case AblationKind::bandlimit: return {"1", "2", "3", "4", "5", "6"};
  }
  return {};
}

}  // namespace

ToyModel train_cached(const RunConfig& cfg, const SyntheticDataset& d, const std::string& cache_dir) {
  const std::string key = config_hash(to_json(cfg));
  const std::filesystem::path path = cache_dir.empty() ? "" : std::filesystem::path(cache_dir) / ("model_" + key + ".wdck");
  if (!cache_dir.empty() && std::filesystem::exists(path)) return load_checkpoint(path.string());
  ToyModel m = train(cfg, d).model;
  if (!cache_dir.empty()) save_checkpoint(m, path.string());
  return m;
}

std::vector<AblationRow> run_ablation(AblationKind kind, const RunConfig& base, const std::string& cache_dir,
                                      const std::vector<std::string>& variants_in) {
  validate(base);
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  const std::vector<std::string> variants = variants_in.empty() ? default_variants(kind, base) : variants_in;
  const SyntheticDataset data = gen_dataset(base.data, base.seeds.data);
  std::vector<AblationRow> rows;
  for (const std::string& v : variants) {
    RunConfig cfg = base;
    bool eval_only = false;
    switch (kind) {
      case AblationKind::parametrization: cfg.model.head = head_kind_from_string(v); break;
      case AblationKind::loss: cfg.loss.kind = loss_kind_from_string(v); break;
      case AblationKind::grid_type:
        cfg.inference.grid_kind = so3_grid_kind_from_string(v);
        eval_only = true;
        break;
      case AblationKind::grid_size:
        cfg.inference.grid_kind = SO3GridKind::healpix_hopf;
        cfg.inference.level = std::stoi(v);
        cfg.inference.allow_large = cfg.inference.allow_large || cfg.inference.level == 5;
        eval_only = true;
        break;
      case AblationKind::bandlimit: cfg.model.bandlimit = std::stoi(v); break;
    }
    validate(cfg);
    const std::string key = config_hash(to_json(cfg));
    const std::filesystem::path cached =
        cache_dir.empty() ? "" : std::filesystem::path(cache_dir) / (to_string(kind) + "_" + v + "_" + key + ".json");
    AblationRow row;
    row.variant = v;
    if (!cache_dir.empty() && std::filesystem::exists(cached)) {
      std::ifstream is(cached);
      const json j = json::parse(is);
      row.metrics = metrics_from_json(j.at("metrics"));
      row.seconds = j.at("seconds").get<double>();
      row.cached = true;
      rows.push_back(row);
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    // Evaluation-only variants share the base training run.
    RunConfig train_cfg = cfg;
    if (eval_only) train_cfg.inference = base.inference;
    const ToyModel m = train_cached(train_cfg, data, cache_dir);
    row.metrics = evaluate(m, cfg, data).argmax;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!cache_dir.empty()) {
      std::ofstream os(cached);
      os << json{{"variant", v}, {"metrics", metrics_json(row.metrics)}, {"seconds", row.seconds}}.dump(2) << "\n";
    }
    rows.push_back(row);
  }
  return rows;
}

json ablation_json(AblationKind kind, const std::vector<AblationRow>& rows, const RunConfig& base) {
  const json c = to_json(base);
  json out = {{"ablation", to_string(kind)},
              {"config_hash", config_hash(c)},
              {"library_version", library_version()},
              {"seeds", c.at("seeds")},
              {"rows", json::array()}};
  for (const auto& r : rows)
    out["rows"].push_back({{"variant", r.variant}, {"metrics", metrics_json(r.metrics)}, {"seconds", r.seconds}});
  return out;
}

}  // namespace wignerpose
