#pragma once

// Losses on harmonic vectors, grid queries with softmax, pose readout and metrics.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "wignerpose/grids.hpp"
#include "wignerpose/wigner.hpp"

namespace wignerpose {

enum class LossKind { mse, l1, huber, cosine, distribution_ce, mse_plus_ce };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct LossConfig {
  LossKind kind{LossKind::mse};
  std::vector<double> level_weights;  // empty means 1 / (2l + 1)
  double huber_delta{1.0};
  double ce_weight{1.0};  // lambda of mse_plus_ce
  double temperature{1.0};
};

/// Per-entry weights of a harmonic vector: w_l repeated over block l.
Eigen::VectorXd entry_weights(const LossConfig& cfg, int L);

struct LossValue {
  double value{0};
  Eigen::VectorXd grad;  // d value / d pred
};

/// Weighted regression losses between equal-length vectors (mse, l1, huber,
/// cosine). With L < 0 the weights are all one (spatial parameter vectors).
LossValue regression_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt, const LossConfig& cfg, int L);

double mse_loss(const HarmonicVector& pred, const HarmonicVector& gt, const LossConfig& cfg = {});

/// Similarities <pred, Psi(R_q)> over the grid. Uses the attached table when its
/// band limit matches, a per-fiber evaluation on HEALPix grids, or on-the-fly
/// harmonic vectors otherwise.
Eigen::VectorXd grid_similarity(const Eigen::VectorXd& pred, int L, const SO3Grid& grid);

/// -log softmax(logits / tau) at the grid index nearest to gt. Requires a psi table.
LossValue distribution_ce_loss(const Eigen::VectorXd& pred, int L, const RotationMatrix<double>& gt,
                               const SO3Grid& grid, const LossConfig& cfg);
LossValue distribution_ce_loss(const Eigen::VectorXd& pred, int L, std::size_t target_index, const SO3Grid& grid,
                               const LossConfig& cfg);

/// Dispatch on cfg.kind for harmonic-vector predictions. target_index is used by
/// the distribution losses only.
LossValue harmonic_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& gt, int L, std::size_t target_index,
                        const SO3Grid* grid, const LossConfig& cfg);

struct PoseDistribution {
  const SO3Grid* grid{nullptr};
  Eigen::VectorXd probs;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

PoseDistribution infer_distribution(const Eigen::VectorXd& pred, int L, const SO3Grid& grid, double temperature = 1.0);

/// Grid index of maximal probability, lowest index on ties.
std::size_t argmax_index(const Eigen::VectorXd& v);
RotationMatrix<double> argmax_pose(const PoseDistribution& d);

/// <pred, Psi(R)>.
double similarity(const Eigen::VectorXd& pred, int L, const RotationMatrix<double>& r);

/// Finite-difference ascent of <pred, Psi(R)> over Euler angles. The step halves
/// after a rejected move and grows after an accepted one; the best iterate is returned.
RotationMatrix<double> gradient_ascent_pose(const Eigen::VectorXd& pred, int L, const RotationMatrix<double>& start,
                                            int steps = 100, double lr = 1e-3);

struct Metrics {
  double median_error_deg{0};
  double acc3{0}, acc5{0}, acc10{0}, acc15{0}, acc30{0};
  std::size_t count{0};
};

std::vector<double> geodesic_errors_deg(const std::vector<RotationMatrix<double>>& preds,
                                        const std::vector<RotationMatrix<double>>& gts);
Metrics metrics(const std::vector<RotationMatrix<double>>& preds, const std::vector<RotationMatrix<double>>& gts);
Metrics metrics_from_errors(std::vector<double> errors_deg);

}  // namespace wignerpose
