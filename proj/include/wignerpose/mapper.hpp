#pragma once

// Orthographic lifting of planar feature maps onto a hemisphere grid.
//
// Image coordinates span [-1, 1]^2 with the unit disk inscribed; pixel (row, col)
// sits at x = -1 + 2 col / (W-1), y = -1 + 2 row / (H-1). A grid vertex
// (x, y, z) with z >= 0 reads the map at (x, y).

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "wignerpose/grids.hpp"
#include "wignerpose/harmonics.hpp"

namespace wignerpose {

struct FeatureMap {
  int height{0};
  int width{0};
  Eigen::MatrixXd values;  // channels x (height * width), pixel index row * width + col

  FeatureMap() = default;
  FeatureMap(int channels, int h, int w) : height(h), width(w), values(Eigen::MatrixXd::Zero(channels, h * w)) {}

  int channels() const { return static_cast<int>(values.rows()); }
  double& operator()(int c, int row, int col) { return values(c, row * width + col); }
  double operator()(int c, int row, int col) const { return values(c, row * width + col); }
  /// Image-plane coordinates of a pixel.
  double x_of(int col) const { return -1.0 + 2.0 * col / (width - 1); }
  double y_of(int row) const { return -1.0 + 2.0 * row / (height - 1); }
};

enum class EdgeDecay { cosine, none };

struct MapperConfig {
  S2Grid grid = healpix_s2(2, S2Subset::hemisphere);
  double dropout_fraction{0.5};
  EdgeDecay edge_decay{EdgeDecay::cosine};
  int sample_count{0};  // 0 keeps every surviving vertex
};

/// Bilinear interpolation of every channel at image-plane point (x, y).
Eigen::VectorXd bilinear(const FeatureMap& f, double x, double y);

/// ceil((1 - fraction) * grid_size) distinct indices, ascending, chosen by seed.
std::vector<int> dropout_mask(int grid_size, double fraction, std::uint64_t seed);

/// Vertices kept for one projection. Dropout applies in training only; the
/// sample_count cap keeps evenly strided survivors.
std::vector<int> kept_vertices(const MapperConfig& cfg, bool train, std::uint64_t seed);

/// Lift f onto the kept hemisphere vertices, weighting by z under cosine decay.
SphericalSignal project(const FeatureMap& f, const MapperConfig& cfg, bool train, std::uint64_t seed);

/// Orthographic image of a real-basis spherical function: pixels inside the
/// unit disk read f(x, y, sqrt(1 - x^2 - y^2)), the rest are zero.
FeatureMap render_orthographic(const RealCoeffs& c, int height, int width);

}  // namespace wignerpose
