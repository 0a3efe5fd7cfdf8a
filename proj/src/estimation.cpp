#include "wignerpose/estimation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>

#include "wignerpose/errors.hpp"

namespace wignerpose {

namespace {

using cd = std::complex<double>;

// Similarities on a HEALPix-Hopf grid without a table. With G^l = U^dagger P^T U
// the similarity at Euler (alpha, beta, gamma) is
//   Re sum_{k,m} G_km exp(-i m gamma) d_km(beta) exp(-i k alpha);
// the m-sum is done once per pixel and the k-sum once per fiber angle.
Eigen::VectorXd hopf_similarity(const Eigen::VectorXd& pred, int L, const SO3Grid& grid) {
  const auto nfib = static_cast<std::size_t>(grid.fibers());
  const std::size_t npix = grid.size() / nfib;
  std::vector<Eigen::MatrixXcd> g(static_cast<std::size_t>(L + 1));
  for (int l = 0; l <= L; ++l) {
    const int n = 2 * l + 1;
    const Eigen::MatrixXcd u = real_basis_change(l);
    const ConstBlockMap p(pred.data() + psi_offset(l), n, n);
    g[static_cast<std::size_t>(l)] = u.adjoint() * p.transpose().cast<cd>() * u;
  }
  Eigen::MatrixXcd fiber_phase(static_cast<Eigen::Index>(nfib), 2 * L + 1);
  for (std::size_t j = 0; j < nfib; ++j)
    for (int k = -L; k <= L; ++k)
      fiber_phase(static_cast<Eigen::Index>(j), k + L) = std::polar(1.0, -k * grid.angles[j].alpha);

  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
  std::vector<Eigen::MatrixXd> dmats(static_cast<std::size_t>(L + 1));
  std::uint64_t beta_key = ~std::uint64_t{0};
  Eigen::VectorXcd h(2 * L + 1);
  for (std::size_t p = 0; p < npix; ++p) {
    const EulerZYZ<double>& e = grid.angles[p * nfib];
    const auto key = std::bit_cast<std::uint64_t>(e.beta);
    if (key != beta_key) {
      for (int l = 0; l <= L; ++l) dmats[static_cast<std::size_t>(l)] = small_d_matrix(l, e.beta);
      beta_key = key;
    }
    h.setZero();
    for (int l = 0; l <= L; ++l) {
      const Eigen::MatrixXcd& gl = g[static_cast<std::size_t>(l)];
      const Eigen::MatrixXd& d = dmats[static_cast<std::size_t>(l)];
      for (int k = -l; k <= l; ++k) {
        cd acc = 0.0;
        for (int m = -l; m <= l; ++m) acc += gl(k + l, m + l) * std::polar(1.0, -m * e.gamma) * d(k + l, m + l);
        h(k + L) += acc;
      }
    }
    out.segment(static_cast<Eigen::Index>(p * nfib), static_cast<Eigen::Index>(nfib)) = (fiber_phase * h).real();
  }
  return out;
}

}  // namespace

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::l1: return "l1";
    case LossKind::huber: return "huber";
    case LossKind::cosine: return "cosine";
    case LossKind::distribution_ce: return "distribution_ce";
    case LossKind::mse_plus_ce: return "mse_plus_ce";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "l1") return LossKind::l1;
  if (s == "huber") return LossKind::huber;
  if (s == "cosine") return LossKind::cosine;
  if (s == "distribution_ce" || s == "ce") return LossKind::distribution_ce;
  if (s == "mse_plus_ce") return LossKind::mse_plus_ce;
  throw std::invalid_argument("unknown loss kind: " + s);
}

Eigen::VectorXd entry_weights(const LossConfig& cfg, int L) {
  if (!cfg.level_weights.empty() && static_cast<int>(cfg.level_weights.size()) != L + 1)
    throw ShapeError("LossConfig: need L + 1 level weights");
  Eigen::VectorXd w(psi_dim(L));
  for (int l = 0; l <= L; ++l) {
    const double wl = cfg.level_weights.empty() ? 1.0 / (2 * l + 1) : cfg.level_weights[static_cast<std::size_t>(l)];
    if (!(wl > 0)) throw std::domain_error("LossConfig: level weights must be positive");
    w.segment(psi_offset(l), (2 * l + 1) * (2 * l + 1)).setConstant(wl);
  }
  return w;
}

LossValue regression_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt, const LossConfig& cfg, int L) {
  if (pred.size() != gt.size()) throw ShapeError("loss: length mismatch");
  const Eigen::VectorXd w = L >= 0 ? entry_weights(cfg, L) : Eigen::VectorXd::Ones(pred.size());
  if (w.size() != pred.size()) throw ShapeError("loss: length differs from psi_dim(L)");
  const Eigen::ArrayXd r = (pred - gt).array();
  LossValue out;
  switch (cfg.kind) {
    case LossKind::mse:
      out.value = (w.array() * r.square()).sum();
      out.grad = 2.0 * w.array() * r;
      break;
    case LossKind::l1:
      out.value = (w.array() * r.abs()).sum();
      out.grad = w.array() * r.sign();
      break;
    case LossKind::huber: {
      const double d = cfg.huber_delta;
      const Eigen::ArrayXd a = r.abs();
      out.value = (w.array() * (a <= d).select(0.5 * r.square(), d * (a - 0.5 * d))).sum();
      out.grad = w.array() * (a <= d).select(r, d * r.sign());
      break;
    }
    case LossKind::cosine: {
      const double np = pred.norm(), ng = gt.norm();
      if (np == 0.0 || ng == 0.0) {
        out.value = 1.0;
        out.grad = Eigen::VectorXd::Zero(pred.size());
        break;
      }
      const double c = pred.dot(gt) / (np * ng);
      out.value = 1.0 - c;
      out.grad = -(gt / (np * ng) - c * pred / (np * np));
      break;
    }
    default: throw std::invalid_argument("regression_loss: not a regression loss");
  }
  return out;
}

double mse_loss(const HarmonicVector& pred, const HarmonicVector& gt, const LossConfig& cfg) {
  if (pred.bandlimit != gt.bandlimit) throw ShapeError("mse_loss: band limits differ");
  LossConfig c = cfg;
  c.kind = LossKind::mse;
  return regression_loss(pred.data, gt.data, c, pred.bandlimit).value;
}

Eigen::VectorXd grid_similarity(const Eigen::VectorXd& pred, int L, const SO3Grid& grid) {
  if (pred.size() != psi_dim(L)) throw ShapeError("grid_similarity: prediction length != psi_dim(L)");
  if (grid.psi_table && grid.psi_bandlimit == L) return *grid.psi_table * pred;
  if (grid.kind == SO3GridKind::healpix_hopf && grid.level >= 0 &&
      grid.size() == static_cast<std::size_t>(healpix_npix(grid.level) * grid.fibers()))
    return hopf_similarity(pred, L, grid);
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
  constexpr std::size_t chunk = 4096;
  for (std::size_t s = 0; s < grid.size(); s += chunk) {
    const std::size_t e = std::min(grid.size(), s + chunk);
    const std::vector<EulerZYZ<double>> part(grid.angles.begin() + static_cast<std::ptrdiff_t>(s),
                                             grid.angles.begin() + static_cast<std::ptrdiff_t>(e));
    out.segment(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e - s)) = psi_table(part, L) * pred;
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - mx).exp().matrix();
  return p / p.sum();
}

LossValue distribution_ce_loss(const Eigen::VectorXd& pred, int L, std::size_t target, const SO3Grid& grid,
                               const LossConfig& cfg) {
  if (!grid.psi_table || grid.psi_bandlimit != L) throw ShapeError("distribution_ce_loss: grid needs a psi table");
  if (target >= grid.size()) throw std::out_of_range("distribution_ce_loss: target index");
  if (!(cfg.temperature > 0)) throw std::domain_error("LossConfig: temperature must be positive");
  const Eigen::VectorXd logits = (*grid.psi_table * pred) / cfg.temperature;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  LossValue out;
  out.value = lse - logits(static_cast<Eigen::Index>(target));
  Eigen::VectorXd dlogits = softmax(logits);
  dlogits(static_cast<Eigen::Index>(target)) -= 1.0;
  out.grad = grid.psi_table->transpose() * dlogits / cfg.temperature;
  return out;
}

LossValue distribution_ce_loss(const Eigen::VectorXd& pred, int L, const RotationMatrix<double>& gt,
                               const SO3Grid& grid, const LossConfig& cfg) {
  return distribution_ce_loss(pred, L, nearest_index(grid, gt), grid, cfg);
}

LossValue harmonic_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt, int L, std::size_t target_index,
                        const SO3Grid* grid, const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::distribution_ce:
      if (!grid) throw std::invalid_argument("harmonic_loss: distribution loss needs a grid");
      return distribution_ce_loss(pred, L, target_index, *grid, cfg);
    case LossKind::mse_plus_ce: {
      if (!grid) throw std::invalid_argument("harmonic_loss: distribution loss needs a grid");
      LossConfig m = cfg;
      m.kind = LossKind::mse;
      LossValue a = regression_loss(pred, gt, m, L);
      const LossValue b = distribution_ce_loss(pred, L, target_index, *grid, cfg);
      a.value += cfg.ce_weight * b.value;
      a.grad += cfg.ce_weight * b.grad;
      return a;
    }
    default: return regression_loss(pred, gt, cfg, L);
  }
}

PoseDistribution infer_distribution(const Eigen::VectorXd& pred, int L, const SO3Grid& grid, double temperature) {
  if (!(temperature > 0)) throw std::domain_error("infer_distribution: temperature must be positive");
  PoseDistribution d;
  d.grid = &grid;
  d.probs = softmax(grid_similarity(pred, L, grid) / temperature);
  return d;
}

std::size_t argmax_index(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<std::size_t>(best);
}

RotationMatrix<double> argmax_pose(const PoseDistribution& d) {
  if (!d.grid || d.probs.size() == 0) throw std::invalid_argument("argmax_pose: empty distribution");
  return d.grid->rotations[argmax_index(d.probs)];
}

double similarity(const Eigen::VectorXd& pred, int L, const RotationMatrix<double>& r) {
  return pred.dot(rotation_to_psi(r, L).data);
}

RotationMatrix<double> gradient_ascent_pose(const Eigen::VectorXd& pred, int L, const RotationMatrix<double>& start,
                                            int steps, double lr) {
  constexpr double h = 1e-4;
  auto f = [&](const EulerZYZ<double>& e) { return similarity(pred, L, euler_to_matrix(e)); };
  EulerZYZ<double> best = matrix_to_euler(start);
  double best_val = similarity(pred, L, start);
  RotationMatrix<double> best_r = start;
  for (int s = 0; s < steps; ++s) {
    Eigen::Vector3d g;
    for (int k = 0; k < 3; ++k) {
      EulerZYZ<double> up = best, down = best;
      double* pu = k == 0 ? &up.alpha : k == 1 ? &up.beta : &up.gamma;
      double* pd = k == 0 ? &down.alpha : k == 1 ? &down.beta : &down.gamma;
      *pu += h;
      *pd -= h;
      g(k) = (f(up) - f(down)) / (2 * h);
    }
    const EulerZYZ<double> cand{best.alpha + lr * g(0), best.beta + lr * g(1), best.gamma + lr * g(2)};
    const RotationMatrix<double> r = euler_to_matrix(cand);
    const double v = similarity(pred, L, r);
    if (v > best_val) {
      best_val = v;
      best_r = r;
      best = matrix_to_euler(r);
      lr *= 1.2;
    } else {
      lr *= 0.5;
      if (lr < 1e-14) break;
    }
  }
  return best_r;
}

std::vector<double> geodesic_errors_deg(const std::vector<RotationMatrix<double>>& preds,
                                        const std::vector<RotationMatrix<double>>& gts) {
  if (preds.size() != gts.size()) throw ShapeError("metrics: prediction and ground-truth counts differ");
  std::vector<double> e(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) e[i] = deg(geodesic_distance(preds[i], gts[i]));
  return e;
}

Metrics metrics_from_errors(std::vector<double> e) {
  if (e.empty()) throw std::invalid_argument("metrics: no samples");
  Metrics m;
  m.count = e.size();
  std::sort(e.begin(), e.end());
  const std::size_t n = e.size();
  m.median_error_deg = n % 2 ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
  auto acc = [&](double t) {
    return static_cast<double>(std::upper_bound(e.begin(), e.end(), t) - e.begin()) / static_cast<double>(n);
  };
  m.acc3 = acc(3);
  m.acc5 = acc(5);
  m.acc10 = acc(10);
  m.acc15 = acc(15);
  m.acc30 = acc(30);
  return m;
}

Metrics metrics(const std::vector<RotationMatrix<double>>& preds, const std::vector<RotationMatrix<double>>& gts) {
  return metrics_from_errors(geodesic_errors_deg(preds, gts));
}

}  // namespace wignerpose
