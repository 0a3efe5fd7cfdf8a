#pragma once

// Spectral S^2 and SO(3) convolutions, the sampled ReLU on SO(3), and the small
// trainable network with hand-written reverse mode.
//
// SO(3) features are stored one channel per row, each row a harmonic vector
// (blocks l = 0..L, row-major, see wigner.hpp). A block X^l represents the
// function g -> sum_l <X^l, D^l(g)>, so left translation by R maps X^l to
// D^l(R) X^l.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wignerpose/grids.hpp"
#include "wignerpose/harmonics.hpp"
#include "wignerpose/wigner.hpp"

namespace wignerpose {

struct SO3Coeffs {
  int bandlimit{0};
  RowMajorMatrixXd data;  // channels x psi_dim(L)

  SO3Coeffs() = default;
  SO3Coeffs(int L, int channels) : bandlimit(L), data(RowMajorMatrixXd::Zero(channels, psi_dim(L))) {}
  SO3Coeffs(int L, RowMajorMatrixXd d) : bandlimit(L), data(std::move(d)) {
    if (data.cols() != psi_dim(L)) throw ShapeError("SO3Coeffs: width != psi_dim(L)");
  }

  int channels() const { return static_cast<int>(data.rows()); }
  BlockMap block(int c, int l) { return {data.row(c).data() + psi_offset(l), 2 * l + 1, 2 * l + 1}; }
  ConstBlockMap block(int c, int l) const { return {data.row(c).data() + psi_offset(l), 2 * l + 1, 2 * l + 1}; }
};

/// Spectra f_oi^l of length 2l+1 for every (out, in) pair: row o * in + i of
/// an (out * in) x (L+1)^2 matrix, real harmonic basis.
struct S2FilterBank {
  int bandlimit{0};
  int in_channels{0};
  int out_channels{0};
  Eigen::MatrixXd spectra;

  S2FilterBank() = default;
  S2FilterBank(int L, int in, int out)
      : bandlimit(L), in_channels(in), out_channels(out), spectra(Eigen::MatrixXd::Zero(in * out, num_coeffs(L))) {}
};

/// Filter on SO(3) made of weighted taps at fixed rotations near the identity.
struct LocalSO3Filter {
  int bandlimit{0};
  int in_channels{0};
  int out_channels{0};
  double support_angle{0};
  std::vector<RotationMatrix<double>> taps;
  RowMajorMatrixXd tap_psi;  // taps x psi_dim(L)
  Eigen::MatrixXd weights;   // (out * in) x taps, row o * in + i

  /// Harmonic blocks of the filter for every channel pair, (out * in) x psi_dim(L).
  RowMajorMatrixXd spectral() const { return weights * tap_psi; }
};

/// Tap rotations: the identity followed by count - 1 super-Fibonacci rotations
/// within support_angle of the identity.
std::vector<RotationMatrix<double>> local_taps(int count, double support_angle);

LocalSO3Filter make_local_filter(int L, int in, int out, int taps = 32, double support_angle = 0.39269908169872414);

/// X_o^l = sum_i c_i^l (f_oi^l)^T.
SO3Coeffs s2_conv(const RealCoeffs& c, const S2FilterBank& f);

/// out_j^l = sum_o x_o^l (K_jo^l)^T with K the filter's spectral blocks.
SO3Coeffs so3_conv(const SO3Coeffs& x, const RowMajorMatrixXd& filter_blocks, int out_channels);
SO3Coeffs so3_conv(const SO3Coeffs& x, const LocalSO3Filter& f);

/// Every block multiplied by D^l(R) on the left.
SO3Coeffs left_translate(const SO3Coeffs& x, const RotationMatrix<double>& r);

/// Sampling and least-squares re-analysis operators for a fixed SO(3) grid.
class SO3Sampler {
 public:
  SO3Sampler(const SO3Grid& grid, int L);

  int bandlimit() const { return bandlimit_; }
  std::size_t size() const { return static_cast<std::size_t>(table_.rows()); }
  const RowMajorMatrixXd& table() const { return table_; }
  const RowMajorMatrixXd& pseudo_inverse() const { return pinv_; }

  /// Channels x grid values.
  Eigen::MatrixXd sample(const SO3Coeffs& x) const { return x.data * table_.transpose(); }
  SO3Coeffs analyze(const Eigen::MatrixXd& values) const;

 private:
  int bandlimit_;
  RowMajorMatrixXd table_;  // Q x M
  RowMajorMatrixXd pinv_;   // M x Q
};

/// Sample, ReLU, re-analyze.
SO3Coeffs so3_nonlinearity(const SO3Coeffs& x, const SO3Sampler& sampler);

enum class HeadKind { wigner, euler, quaternion, axis_angle, rotmat };

std::string to_string(HeadKind h);
HeadKind head_kind_from_string(const std::string& s);
/// Output length of a head at band limit L.
int head_dim(HeadKind h, int L);

struct ModelConfig {
  int bandlimit{4};
  int in_channels{3};
  int mid_channels{4};
  int hidden_channels{8};
  int nonlin_level{2};
  int taps{32};
  double support_angle{0.39269908169872414};
  HeadKind head{HeadKind::wigner};
};

struct ToyModel {
  ModelConfig cfg;
  Eigen::MatrixXd mixer;  // mid x in
  S2FilterBank s2_filters;
  LocalSO3Filter so3_filter;  // hidden -> 1, used by the wigner head
  Eigen::MatrixXd head;       // head_dim x (hidden * M), spatial heads only

  /// Number of trainable scalars.
  Eigen::Index parameter_count() const;
  /// Flat parameter view in a fixed order: mixer, s2 spectra, tap weights, head.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);
};

ToyModel make_model(const ModelConfig& cfg, std::uint64_t seed);

/// Intermediates of one forward pass kept for backward.
struct ForwardCache {
  RealCoeffs raw;     // in x N
  RealCoeffs mixed;   // mid x N
  SO3Coeffs conv;     // hidden x M
  Eigen::MatrixXd pre;  // hidden x Q
  SO3Coeffs act;      // hidden x M
  Eigen::VectorXd output;
};

/// Forward from per-channel input coefficients. The 1x1 mixer is applied in
/// coefficient space, which equals mixing before projection since the lifting
/// and the analysis act on each channel alike.
Eigen::VectorXd forward(const ToyModel& m, const SO3Sampler& sampler, const RealCoeffs& raw,
                        ForwardCache* cache = nullptr);

struct ModelGrad {
  Eigen::MatrixXd mixer;
  Eigen::MatrixXd s2;
  Eigen::MatrixXd taps;
  Eigen::MatrixXd head;

  Eigen::VectorXd flat() const;
};

/// Gradients of a scalar loss given dLoss/dOutput.
ModelGrad backward(const ToyModel& m, const SO3Sampler& sampler, const ForwardCache& cache,
                   const Eigen::VectorXd& d_output);

inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const ToyModel& m, std::ostream& os);
ToyModel load_checkpoint(std::istream& is);
void save_checkpoint(const ToyModel& m, const std::string& path);
ToyModel load_checkpoint(const std::string& path);

}  // namespace wignerpose
