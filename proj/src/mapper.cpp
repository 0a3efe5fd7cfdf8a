#include "wignerpose/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wignerpose/errors.hpp"

namespace wignerpose {

Eigen::VectorXd bilinear(const FeatureMap& f, double x, double y) {
  const double col = std::clamp((x + 1.0) * 0.5 * (f.width - 1), 0.0, static_cast<double>(f.width - 1));
  const double row = std::clamp((y + 1.0) * 0.5 * (f.height - 1), 0.0, static_cast<double>(f.height - 1));
  const int c0 = std::min(static_cast<int>(col), f.width - 2);
  const int r0 = std::min(static_cast<int>(row), f.height - 2);
  const double tx = col - c0;
  const double ty = row - r0;
  const int i00 = r0 * f.width + c0;
  return (1 - ty) * ((1 - tx) * f.values.col(i00) + tx * f.values.col(i00 + 1)) +
         ty * ((1 - tx) * f.values.col(i00 + f.width) + tx * f.values.col(i00 + f.width + 1));
}

std::vector<int> dropout_mask(int grid_size, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::domain_error("dropout_mask: fraction must be in [0, 1)");
  const int keep = static_cast<int>(std::ceil((1.0 - fraction) * grid_size - 1e-9));
  std::vector<int> idx(static_cast<std::size_t>(grid_size));
  std::iota(idx.begin(), idx.end(), 0);
  if (keep == grid_size) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `keep` slots are a uniform subset.
  for (int i = 0; i < keep; ++i) {
    std::uniform_int_distribution<int> pick(i, grid_size - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(keep));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> kept_vertices(const MapperConfig& cfg, bool train, std::uint64_t seed) {
  const int n = static_cast<int>(cfg.grid.points.size());
  if (cfg.sample_count < 0 || cfg.sample_count > n) throw ShapeError("MapperConfig: sample_count exceeds grid size");
  std::vector<int> idx = dropout_mask(n, train ? cfg.dropout_fraction : 0.0, seed);
  const auto kept = static_cast<int>(idx.size());
  if (cfg.sample_count > 0 && cfg.sample_count < kept) {
    std::vector<int> capped;
    for (int i = 0; i < cfg.sample_count; ++i)
      capped.push_back(idx[static_cast<std::size_t>(static_cast<std::int64_t>(i) * kept / cfg.sample_count)]);
    idx = std::move(capped);
  }
  return idx;
}

SphericalSignal project(const FeatureMap& f, const MapperConfig& cfg, bool train, std::uint64_t seed) {
  if (f.width < 2 || f.height < 2) throw ShapeError("project: feature map must be at least 2x2");
  const std::vector<int> idx = kept_vertices(cfg, train, seed);
  SphericalSignal s;
  s.values.resize(f.channels(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const SphericalPoint& p = cfg.grid.points[static_cast<std::size_t>(idx[k])];
    const Eigen::Vector3d v = p.to_vector();
    double w = 1.0;
    if (cfg.edge_decay == EdgeDecay::cosine) w = v.z() < 1e-12 ? 0.0 : v.z();
    s.values.col(static_cast<Eigen::Index>(k)) = w * bilinear(f, v.x(), v.y());
    s.points.push_back(p);
  }
  return s;
}

FeatureMap render_orthographic(const RealCoeffs& c, int height, int width) {
  FeatureMap f(c.channels(), height, width);
  std::vector<SphericalPoint> pts;
  std::vector<int> where;
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const double x = f.x_of(col), y = f.y_of(row);
      const double rr = x * x + y * y;
      if (rr > 1.0) continue;
      pts.push_back(SphericalPoint::from_vector({x, y, std::sqrt(1.0 - rr)}));
      where.push_back(row * width + col);
    }
  }
  const Eigen::MatrixXd v = synthesize(c, pts).values;
  for (std::size_t k = 0; k < where.size(); ++k) f.values.col(where[k]) = v.col(static_cast<Eigen::Index>(k));
  return f;
}

}  // namespace wignerpose
