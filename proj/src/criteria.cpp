#include "wignerpose/criteria.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "wignerpose/harness.hpp"

namespace wignerpose {

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

RealCoeffs random_coeffs(int L, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  RealCoeffs c(L, channels);
  for (Eigen::Index i = 0; i < c.data.size(); ++i) c.data.data()[i] = n01(rng);
  return c;
}

EulerZYZ<double> random_euler(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi), b(0, std::numbers::pi);
  return {a(rng), b(rng), a(rng)};
}

Outcome wigner_correctness() {
  double identity = 0, ortho = 0, homo = 0;
  for (int l = 0; l <= 6; ++l)
    identity = std::max(identity, (small_d_matrix(l, 0.0) - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1))
                                      .cwiseAbs()
                                      .maxCoeff());
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> beta(0, std::numbers::pi);
  for (int t = 0; t < 1000; ++t) {
    const double b = beta(rng);
    for (int l = 0; l <= 6; ++l) {
      const Eigen::MatrixXd d = small_d_matrix(l, b);
      ortho = std::max(ortho, (d * d.transpose() - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)).cwiseAbs().maxCoeff());
    }
  }
  for (int t = 0; t < 1000; ++t) {
    const auto e1 = random_euler(rng), e2 = random_euler(rng);
    const auto e12 = matrix_to_euler(Eigen::Matrix3d(euler_to_matrix(e1) * euler_to_matrix(e2)));
    for (int l = 0; l <= 6; ++l)
      homo = std::max(homo, (wigner_D_complex(l, e1) * wigner_D_complex(l, e2) - wigner_D_complex(l, e12))
                                .cwiseAbs()
                                .maxCoeff());
  }
  return {identity < 1e-10 && ortho < 1e-10 && homo < 1e-9,
          "max|d(0)-I| " + fmt(identity) + ", max|d d^T-I| " + fmt(ortho) + " (< 1e-10), max|D1 D2-D12| " + fmt(homo) +
              " (< 1e-9)"};
}

Outcome shift_theorem() {
  const int L = 4;
  const RealCoeffs c = random_coeffs(L, 3, 102);
  const std::vector<SphericalPoint> pts = healpix_s2(4).points;
  const S2Analyzer<double> analyzer(pts, L);
  const RealCoeffs base = analyzer.apply(synthesize(c, pts).values);
  double worst = 0;
  for (const auto& r : sample_uniform(103, 50)) {
    std::vector<SphericalPoint> pulled;
    pulled.reserve(pts.size());
    for (const auto& p : pts) pulled.push_back(SphericalPoint::from_vector(r.transpose() * p.to_vector()));
    const RealCoeffs rotate_then_analyze = analyzer.apply(synthesize(c, pulled).values);
    const RealCoeffs analyze_then_rotate = rotate_coeffs(base, r);
    worst = std::max(worst, rel(rotate_then_analyze.data, analyze_then_rotate.data));
  }
  return {worst < 1e-6, "max relative L2 " + fmt(worst) + " over 50 rotations, 3072-point grid (< 1e-6)"};
}

Outcome layer_equivariance() {
  const int L = 4;
  S2FilterBank f(L, 3, 5);
  f.spectra = random_coeffs(L, 15, 104).data;
  const RealCoeffs c = random_coeffs(L, 3, 105);
  LocalSO3Filter g = make_local_filter(L, 3, 2);
  g.weights = random_coeffs(0, 6 * 32, 106).data.reshaped(6, 32);
  SO3Coeffs x(L, 3);
  x.data = random_coeffs(0, 3 * psi_dim(L), 107).data.reshaped<Eigen::RowMajor>(3, psi_dim(L));
  double s2 = 0, so3 = 0;
  for (const auto& r : sample_uniform(108, 50)) {
    s2 = std::max(s2, rel(s2_conv(rotate_coeffs(c, r), f).data, left_translate(s2_conv(c, f), r).data));
    so3 = std::max(so3, rel(so3_conv(left_translate(x, r), g).data, left_translate(so3_conv(x, g), r).data));
  }

  RunConfig cfg;
  cfg.data.n_train = 1;
  cfg.data.n_test = 0;
  const SyntheticDataset d = gen_dataset(cfg.data, 109);
  const Pipeline pipe(cfg, d);
  const ToyModel m = make_model(cfg.model, 110);
  const Eigen::VectorXd base = forward(m, pipe.sampler(), pipe.input_coeffs(d.train[0], false, 0));
  double e2e = 0;
  for (double phi : {0.3, 1.1, 2.0, 2.9, 4.4, 5.5}) {
    const Eigen::Matrix3d r = rot_z(phi);
    Sample s = d.train[0];
    s.input = synthesize(rotate_coeffs(d.templ, Eigen::Matrix3d(r * s.rotation)), d.points()).values;
    const Eigen::VectorXd got = forward(m, pipe.sampler(), pipe.input_coeffs(s, false, 0));
    const SO3Coeffs want = left_translate(SO3Coeffs(L, RowMajorMatrixXd(base.transpose())), r);
    e2e = std::max(e2e, rel(got.transpose(), want.data));
  }
  return {s2 < 1e-9 && so3 < 1e-9 && e2e < 0.05, "s2_conv " + fmt(s2) + ", so3_conv " + fmt(so3) +
                                                      " (< 1e-9); end-to-end in-plane " + fmt(e2e) + " (< 0.05)"};
}

Outcome grid_fidelity() {
  const std::size_t expected[] = {72, 576, 4608, 36864, 294912, 2359296};
  bool counts = true;
  std::string count_text;
  for (int r = 0; r <= 4; ++r) {
    const std::size_t n = so3_healpix(r).size();
    counts = counts && n == expected[r];
    count_text += (r ? "," : "") + std::to_string(n);
  }
  // The r = 5 grid is only built by the large inference check; its count follows the same formula.
  const std::size_t n5 = static_cast<std::size_t>(healpix_npix(5)) * 6 * (std::size_t{1} << 5);
  counts = counts && n5 == expected[5];
  count_text += "," + std::to_string(n5);

  double radius[4];
  for (int r = 0; r <= 3; ++r) radius[r] = covering_radius(so3_healpix(r), 20000, 111);
  bool halving = true;
  std::string ratio_text;
  for (int r = 0; r < 3; ++r) {
    const double q = radius[r] / radius[r + 1];
    halving = halving && q >= 1.5 && q <= 2.5;
    ratio_text += (r ? "," : "") + fmt(q);
  }
  return {counts && halving, "counts " + count_text + "; covering radius " + fmt(radius[0]) + "," + fmt(radius[1]) +
                                 "," + fmt(radius[2]) + "," + fmt(radius[3]) + " deg, ratios " + ratio_text +
                                 " (2 +- 25%)"};
}

Outcome inference_precision(bool large) {
  const int L = 4;
  std::vector<double> errors;
  const SO3Grid g = so3_healpix(3);
  for (const auto& r : sample_uniform(112, 1000))
    errors.push_back(deg(geodesic_distance(g.rotations[argmax_index(grid_similarity(rotation_to_psi(r, L).data, L, g))], r)));
  const double worst = *std::max_element(errors.begin(), errors.end());
  const Metrics m = metrics_from_errors(errors);
  bool pass = worst <= 7.5 && m.median_error_deg <= 4.0;
  std::string detail = "r=3 worst " + fmt(worst) + " deg (<= 7.5), median " + fmt(m.median_error_deg) + " deg (<= 4)";
  if (large) {
    const SO3Grid g5 = so3_healpix(5, true);
    double worst5 = 0;
    for (const auto& r : sample_uniform(113, 1000))
      worst5 = std::max(
          worst5, deg(geodesic_distance(g5.rotations[argmax_index(grid_similarity(rotation_to_psi(r, L).data, L, g5))], r)));
    pass = pass && worst5 <= 1.875;
    detail += "; r=5 worst " + fmt(worst5) + " deg (<= 1.875)";
  } else {
    detail += "; r=5 skipped (--large)";
  }
  return {pass, detail};
}

Outcome gradient_fidelity() {
  const int L = 4;
  RunConfig cfg;
  ToyModel m = make_model(cfg.model, 114);
  const SO3Sampler sampler(so3_healpix(cfg.model.nonlin_level), L);
  const auto r = sample_uniform(115, 1)[0];
  const RealCoeffs in = rotate_coeffs(random_coeffs(L, 3, 116), r);
  const Eigen::VectorXd target = rotation_to_psi(r, L).data;
  auto loss = [&](const ToyModel& mm) { return regression_loss(forward(mm, sampler, in), target, cfg.loss, L).value; };
  ForwardCache cache;
  const Eigen::VectorXd out = forward(m, sampler, in, &cache);
  const Eigen::VectorXd grad = backward(m, sampler, cache, regression_loss(out, target, cfg.loss, L).grad).flat();
  const Eigen::VectorXd p = m.parameters();
  std::mt19937_64 rng(117);
  std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
  // Small enough that no sampled ReLU input changes sign inside [p - h, p + h].
  const double h = 1e-6;
  double worst = 0;
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
    worst = std::max(worst, std::abs(fd - grad(i)) / std::max({std::abs(fd), std::abs(grad(i)), 1e-6}));
  }
  return {worst < 1e-4, "max relative error " + fmt(worst) + " over 50 coordinates of " + std::to_string(p.size()) +
                            " (< 1e-4)"};
}

RunConfig toy_config() {
  RunConfig c;
  c.data.n_train = 100;
  c.data.n_test = 20;
  return c;
}

Outcome toy_convergence(const std::string& cache_dir) {
  const RunConfig cfg = toy_config();
  const SyntheticDataset d = gen_dataset(cfg.data, cfg.seeds.data);
  const ToyModel m = train_cached(cfg, d, cache_dir);
  const Metrics t = evaluate(m, cfg, d).argmax;
  return {t.median_error_deg < 5.0 && t.acc15 > 0.9,
          "test median " + fmt(t.median_error_deg) + " deg (< 5), Acc@15 " + fmt(t.acc15) + " (> 0.9)"};
}

double median_of(const std::vector<AblationRow>& rows, const std::string& v) {
  for (const auto& r : rows)
    if (r.variant == v) return r.metrics.median_error_deg;
  throw std::logic_error("missing ablation variant " + v);
}

Outcome ablation_directions(const std::string& cache_dir) {
  const RunConfig base = toy_config();
  const auto par = run_ablation(AblationKind::parametrization, base, cache_dir, {"wigner", "euler"});
  const double wig = median_of(par, "wigner"), eul = median_of(par, "euler");
  const bool head_ok = eul >= 5.0 * wig;

  const auto loss = run_ablation(AblationKind::loss, base, cache_dir);
  bool converge = true;
  double worst_good = 0;
  for (const auto& r : loss) {
    if (r.variant == "cosine") continue;
    converge = converge && r.metrics.median_error_deg < 5.0 && r.metrics.acc15 > 0.9;
    worst_good = std::max(worst_good, r.metrics.median_error_deg);
  }
  const double cos = median_of(loss, "cosine");
  const bool loss_ok = converge && cos > worst_good;

  const auto grid = run_ablation(AblationKind::grid_type, base, cache_dir);
  double lo = 1, hi = 0;
  for (const auto& r : grid) {
    lo = std::min(lo, r.metrics.acc15);
    hi = std::max(hi, r.metrics.acc15);
  }
  const bool grid_ok = hi - lo <= 0.01;

  // Monotone up to the best Acc@15, then a plateau; 0.05 (one test sample of 20) tolerance.
  const auto band = run_ablation(AblationKind::bandlimit, base, cache_dir);
  std::vector<double> acc;
  for (const auto& r : band) acc.push_back(r.metrics.acc15);
  const std::size_t peak = static_cast<std::size_t>(std::max_element(acc.begin(), acc.end()) - acc.begin());
  bool band_ok = true;
  for (std::size_t i = 1; i <= peak; ++i) band_ok = band_ok && acc[i] >= acc[i - 1] - 0.05;
  for (std::size_t i = peak + 1; i < acc.size(); ++i) band_ok = band_ok && acc[i] >= acc[peak] - 0.05;
  std::string band_text;
  for (std::size_t i = 0; i < acc.size(); ++i) band_text += (i ? "," : "") + fmt(acc[i], 2);

  return {head_ok && loss_ok && grid_ok && band_ok,
          std::string(head_ok ? "" : "[head] ") + (loss_ok ? "" : "[loss] ") + (grid_ok ? "" : "[grid] ") +
              (band_ok ? "" : "[bandlimit] ") + "median wigner " + fmt(wig) + " vs euler " + fmt(eul) +
              " deg (>= 5x); mse/l1/huber worst " + fmt(worst_good) + " < cosine " + fmt(cos) +
              " deg; grid Acc@15 spread " + fmt(100 * (hi - lo)) + " pp (<= 1); Acc@15 L=1..6 " + band_text};
}

Outcome rotation_round_trips() {
  const auto rs = sample_uniform(118, 10000);
  double worst = 0;
  auto qvec = [](const UnitQuaternion<double>& q) { return Eigen::Vector4d(q.w, q.x, q.y, q.z); };
  using RoundTrip = std::function<Eigen::Matrix3d(const Eigen::Matrix3d&)>;
  const std::vector<RoundTrip> reps = {
      [](const Eigen::Matrix3d& r) { return r; },
      [](const Eigen::Matrix3d& r) { return Eigen::Matrix3d(quat_to_matrix(matrix_to_quat(r))); },
      [](const Eigen::Matrix3d& r) { return Eigen::Matrix3d(euler_to_matrix(matrix_to_euler(r))); },
      [](const Eigen::Matrix3d& r) { return Eigen::Matrix3d(axis_angle_to_matrix(matrix_to_axis_angle(r))); },
  };
  for (const auto& r : rs) {
    // Every ordered pair A -> B goes through both conversions.
    for (const auto& a : reps)
      for (const auto& b : reps) worst = std::max(worst, (b(a(r)) - r).cwiseAbs().maxCoeff());
    const auto q = matrix_to_quat(r);
    const auto q2 = matrix_to_quat(Eigen::Matrix3d(euler_to_matrix(matrix_to_euler(r))));
    const auto q3 = matrix_to_quat(Eigen::Matrix3d(axis_angle_to_matrix(matrix_to_axis_angle(r))));
    worst = std::max({worst, (qvec(q) - qvec(q2)).cwiseAbs().maxCoeff(),
                      (qvec(q) - qvec(q3)).cwiseAbs().maxCoeff()});
  }
  double invariance = 0;
  const auto qs = sample_uniform(119, 10000);
  for (std::size_t i = 0; i + 1 < rs.size(); i += 2)
    invariance = std::max(invariance, std::abs(geodesic_distance<double>(qs[i] * rs[i], qs[i] * rs[i + 1]) -
                                               geodesic_distance(rs[i], rs[i + 1])));
  const double median = metrics(sample_uniform(120, 100000), sample_uniform(121, 100000)).median_error_deg;
  const bool median_ok = std::abs(median - 126.9) <= 1.0;
  return {worst < 1e-9 && invariance < 1e-9 && median_ok,
          "round trips " + fmt(worst) + " (< 1e-9), left invariance " + fmt(invariance) +
              " (< 1e-9), uniform median " + fmt(median, 5) + " deg (126.9 +- 1)" +
              (median_ok ? "" : "; the Haar relative-angle median is 132.35 deg")};
}

Outcome psi_dimension() {
  double worst = 0;
  bool size_ok = true;
  for (const auto& r : sample_uniform(122, 100)) {
    const HarmonicVector v = rotation_to_psi(r, 6);
    size_ok = size_ok && v.data.size() == 455;
    worst = std::max(worst, std::abs(v.data.squaredNorm() - 49.0));
  }
  return {size_ok && worst < 1e-9, "M = " + std::to_string(rotation_to_psi(Eigen::Matrix3d::Identity(), 6).data.size()) +
                                       " (455), max ||psi|^2 - 49| " + fmt(worst) + " (< 1e-9)"};
}

struct Spec {
  const char* name;
  double limit;
};

constexpr Spec kSpecs[kCriterionCount] = {
    {"wigner correctness", 10},     {"shift theorem", 10},         {"layer equivariance", 60},
    {"grid fidelity", 120},         {"inference precision", 300},  {"gradient fidelity", 120},
    {"toy convergence", 900},       {"ablation directions", 7200}, {"rotation round trips", 30},
    {"M dimension", 10},
};

}  // namespace

CriterionResult check_criterion(int id, const CriteriaOptions& opt) {
  if (id < 1 || id > kCriterionCount) throw std::invalid_argument("criterion id out of range: " + std::to_string(id));
  CriterionResult res;
  res.id = id;
  res.name = kSpecs[id - 1].name;
  res.limit_seconds = kSpecs[id - 1].limit;
  std::filesystem::path tmp;
  std::string cache = opt.cache_dir;
  if (cache.empty() && (id == 7 || id == 8)) {
    tmp = std::filesystem::temp_directory_path() / ("wignerpose_check_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(tmp);
    cache = tmp.string();
  }
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    switch (id) {
      case 1: o = wigner_correctness(); break;
      case 2: o = shift_theorem(); break;
      case 3: o = layer_equivariance(); break;
      case 4: o = grid_fidelity(); break;
      case 5: o = inference_precision(opt.large); break;
      case 6: o = gradient_fidelity(); break;
      case 7: o = toy_convergence(cache); break;
      case 8: o = ablation_directions(cache); break;
      case 9: o = rotation_round_trips(); break;
      case 10: o = psi_dimension(); break;
    }
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!tmp.empty()) std::filesystem::remove_all(tmp);
  // The r = 5 grid alone takes longer than the r <= 3 budget.
  const bool timed = !(id == 5 && opt.large);
  res.pass = o.pass && (!timed || res.seconds < res.limit_seconds);
  res.detail = o.detail;
  if (o.pass && !res.pass) res.detail += "; over the runtime limit";
  return res;
}

std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, const CriteriaOptions& opt) {
  std::vector<CriterionResult> out;
  for (int id : ids) out.push_back(check_criterion(id, opt));
  return out;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream os;
  os << "criterion " << (r.id < 10 ? " " : "") << r.id << ' ' << (r.pass ? "PASS" : "FAIL") << "  " << r.name << ": "
     << r.detail << " [" << fmt(r.seconds) << " s / " << r.limit_seconds << " s]";
  return os.str();
}

}  // namespace wignerpose
