#pragma once

// Associated Legendre functions, complex and real spherical harmonics, and
// band-limited least-squares analysis / synthesis of sampled S^2 signals.
//
// Coefficient layout: index(l, m) = l*l + l + m, blocks of increasing l and
// m running from -l to l inside a block. N = (L+1)^2 coefficients per channel.
//
// Conventions: P_l^m includes the Condon-Shortley phase (-1)^m. Complex
// harmonics are orthonormal with Y_l^{-m} = (-1)^m conj(Y_l^m). Real harmonics:
//   m > 0: sqrt(2) (-1)^m Re Y_l^m,  m < 0: sqrt(2) (-1)^m Im Y_l^|m|,  m = 0: Y_l^0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "wignerpose/errors.hpp"
#include "wignerpose/rotations.hpp"

namespace wignerpose {

enum class Basis { real, complex };

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

template <typename Scalar>
constexpr Basis basis_of() {
  return is_complex<Scalar>::value ? Basis::complex : Basis::real;
}

inline constexpr int num_coeffs(int bandlimit) { return (bandlimit + 1) * (bandlimit + 1); }
inline constexpr int coeff_index(int l, int m) { return l * l + l + m; }

/// Ridge used by every least-squares analysis in the library.
inline constexpr double kRidge = 1e-8;
/// Largest accepted condition number of a determined design matrix.
inline constexpr double kMaxCondition = 1e8;

struct SphericalPoint {
  double theta{0};  ///< polar angle in [0, pi]
  double phi{0};    ///< azimuth in [0, 2 pi)

  Eigen::Vector3d to_vector() const {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
  }
  static SphericalPoint from_vector(const Eigen::Vector3d& v) {
    const Eigen::Vector3d u = v.normalized();
    double phi = std::atan2(u.y(), u.x());
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    if (phi >= 2.0 * std::numbers::pi) phi = 0.0;
    return {std::acos(std::clamp(u.z(), -1.0, 1.0)), phi};
  }
};

/// Channel-valued samples on a set of S^2 points; values is C x p.
struct SphericalSignal {
  std::vector<SphericalPoint> points;
  Eigen::MatrixXd values;

  int channels() const { return static_cast<int>(values.rows()); }
  int size() const { return static_cast<int>(points.size()); }
};

/// Band-limited harmonic coefficients, C x (L+1)^2. The scalar type fixes the
/// basis: double for real harmonics, std::complex<double> for complex ones.
template <typename Scalar>
struct SphericalCoeffs {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  int bandlimit{0};
  Matrix data;

  SphericalCoeffs() = default;
  SphericalCoeffs(int L, int channels) : bandlimit(L), data(Matrix::Zero(channels, num_coeffs(L))) {}
  SphericalCoeffs(int L, Matrix d) : bandlimit(L), data(std::move(d)) {
    if (data.cols() != num_coeffs(L)) throw ShapeError("SphericalCoeffs: data width != (L+1)^2");
  }

  static constexpr Basis basis() { return basis_of<Scalar>(); }
  int channels() const { return static_cast<int>(data.rows()); }
  Scalar& operator()(int c, int l, int m) { return data(c, coeff_index(l, m)); }
  const Scalar& operator()(int c, int l, int m) const { return data(c, coeff_index(l, m)); }
};

using RealCoeffs = SphericalCoeffs<double>;
using ComplexCoeffs = SphericalCoeffs<std::complex<double>>;

/// P_l^m(x) for 0 <= m <= l by upward recurrence in l, Condon-Shortley phase included.
template <typename Scalar>
Scalar assoc_legendre(int l, int m, Scalar x) {
  using std::abs;
  using std::sqrt;
  if (abs(x) > Scalar(1)) throw std::domain_error("assoc_legendre: |x| > 1");
  if (m < 0 || m > l) throw std::domain_error("assoc_legendre: need 0 <= m <= l");
  Scalar pmm = 1;
  const Scalar s = sqrt((Scalar(1) - x) * (Scalar(1) + x));
  for (int k = 1; k <= m; ++k) pmm *= -Scalar(2 * k - 1) * s;
  if (l == m) return pmm;
  Scalar pm1 = x * Scalar(2 * m + 1) * pmm;
  if (l == m + 1) return pm1;
  Scalar pl = 0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pl = (x * Scalar(2 * ll - 1) * pm1 - Scalar(ll + m - 1) * pmm) / Scalar(ll - m);
    pmm = pm1;
    pm1 = pl;
  }
  return pl;
}

/// sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!) for m >= 0.
template <typename Scalar>
Scalar sph_harm_norm(int l, int m) {
  using std::lgamma;
  using std::exp;
  using std::sqrt;
  const Scalar ratio = exp(lgamma(Scalar(l - m + 1)) - lgamma(Scalar(l + m + 1)));
  return sqrt(Scalar(2 * l + 1) / (Scalar(4) * std::numbers::pi_v<Scalar>) * ratio);
}

template <typename Scalar>
std::complex<Scalar> sph_harm_complex(int l, int m, const SphericalPoint& p) {
  using std::cos;
  if (m < -l || m > l) throw std::domain_error("sph_harm_complex: |m| > l");
  const int am = m < 0 ? -m : m;
  const Scalar mag = sph_harm_norm<Scalar>(l, am) * assoc_legendre<Scalar>(l, am, Scalar(cos(p.theta)));
  const std::complex<Scalar> y = std::polar(mag, Scalar(am) * Scalar(p.phi));
  if (m >= 0) return y;
  return (am % 2 ? Scalar(-1) : Scalar(1)) * std::conj(y);
}

template <typename Scalar>
Scalar sph_harm_real(int l, int m, const SphericalPoint& p) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  if (m < -l || m > l) throw std::domain_error("sph_harm_real: |m| > l");
  const int am = m < 0 ? -m : m;
  const Scalar k = sph_harm_norm<Scalar>(l, am) * assoc_legendre<Scalar>(l, am, Scalar(cos(p.theta)));
  if (m == 0) return k;
  const Scalar sign = am % 2 ? Scalar(-1) : Scalar(1);
  const Scalar s2 = sqrt(Scalar(2));
  return m > 0 ? s2 * sign * k * cos(Scalar(am) * Scalar(p.phi))
               : s2 * sign * k * sin(Scalar(am) * Scalar(p.phi));
}

/// U_l with real coefficients r = U_l c for complex coefficients c of the same
/// real function. Unitary; rows/cols indexed by m + l.
inline Eigen::MatrixXcd real_basis_change(int l) {
  const int n = 2 * l + 1;
  const double h = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, n);
  u(l, l) = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double sign = m % 2 ? -1.0 : 1.0;
    u(l + m, l + m) = sign * h;
    u(l + m, l - m) = h;
    u(l - m, l - m) = -i * h;
    u(l - m, l + m) = i * sign * h;
  }
  return u;
}

namespace detail {

// All P_l^m(cos theta) norms for 0 <= m <= l <= L, packed at l(l+1)/2 + m.
inline std::vector<double> normalized_legendre(int L, double x) {
  std::vector<double> out(static_cast<std::size_t>((L + 1) * (L + 2) / 2));
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double pmm = 1.0;
  for (int m = 0; m <= L; ++m) {
    if (m > 0) pmm *= -static_cast<double>(2 * m - 1) * s;
    double p0 = pmm;
    out[static_cast<std::size_t>(m * (m + 1) / 2 + m)] = p0 * sph_harm_norm<double>(m, m);
    if (m == L) break;
    double p1 = x * (2 * m + 1) * pmm;
    out[static_cast<std::size_t>((m + 1) * (m + 2) / 2 + m)] = p1 * sph_harm_norm<double>(m + 1, m);
    for (int l = m + 2; l <= L; ++l) {
      const double p2 = (x * (2 * l - 1) * p1 - (l + m - 1) * p0) / (l - m);
      out[static_cast<std::size_t>(l * (l + 1) / 2 + m)] = p2 * sph_harm_norm<double>(l, m);
      p0 = p1;
      p1 = p2;
    }
  }
  return out;
}

}  // namespace detail

/// Design matrix of harmonics evaluated at points: p x (L+1)^2.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sh_matrix(const std::vector<SphericalPoint>& points,
                                                                 int L) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a(static_cast<Eigen::Index>(points.size()),
                                                          num_coeffs(L));
  const double s2 = std::sqrt(2.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const std::vector<double> k = detail::normalized_legendre(L, std::cos(points[i].theta));
    for (int l = 0; l <= L; ++l) {
      for (int m = 0; m <= l; ++m) {
        const double v = k[static_cast<std::size_t>(l * (l + 1) / 2 + m)];
        const double sign = m % 2 ? -1.0 : 1.0;
        if constexpr (is_complex<Scalar>::value) {
          const std::complex<double> y = std::polar(v, m * points[i].phi);
          a(row, coeff_index(l, m)) = y;
          if (m > 0) a(row, coeff_index(l, -m)) = sign * std::conj(y);
        } else {
          if (m == 0) {
            a(row, coeff_index(l, 0)) = v;
          } else {
            a(row, coeff_index(l, m)) = s2 * sign * v * std::cos(m * points[i].phi);
            a(row, coeff_index(l, -m)) = s2 * sign * v * std::sin(m * points[i].phi);
          }
        }
      }
    }
  }
  return a;
}

/// Ridge least-squares analysis operator for a fixed point set. Construction
/// factors the design matrix once; apply() is a single matrix product.
template <typename Scalar>
class S2Analyzer {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  S2Analyzer(const std::vector<SphericalPoint>& points, int L) : bandlimit_(L) {
    const Matrix a = sh_matrix<Scalar>(points, L);
    const Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) throw IllConditionedError("S2Analyzer: empty point set");
    underdetermined_ = a.rows() < a.cols();
    condition_ = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!underdetermined_ && condition_ > kMaxCondition) {
      throw IllConditionedError("S2Analyzer: design matrix condition number " + std::to_string(condition_) +
                                " exceeds 1e8");
    }
    Eigen::VectorXd shrink(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) shrink(i) = sv(i) / (sv(i) * sv(i) + kRidge);
    pinv_ = svd.matrixV() * shrink.asDiagonal() * svd.matrixU().adjoint();
  }

  int bandlimit() const { return bandlimit_; }
  double condition() const { return condition_; }
  bool underdetermined() const { return underdetermined_; }
  /// (L+1)^2 x p regularized pseudo-inverse.
  const Matrix& pseudo_inverse() const { return pinv_; }

  SphericalCoeffs<Scalar> apply(const Eigen::MatrixXd& values) const {
    if (values.cols() != pinv_.cols()) throw ShapeError("S2Analyzer: sample count mismatch");
    return SphericalCoeffs<Scalar>(bandlimit_, values.template cast<Scalar>() * pinv_.transpose());
  }

 private:
  int bandlimit_;
  double condition_{0};
  bool underdetermined_{false};
  Matrix pinv_;
};

/// Least-squares fit of harmonic coefficients to a sampled signal, ridge 1e-8.
/// Throws IllConditionedError when a determined system has condition > 1e8;
/// underdetermined systems (p < (L+1)^2) return the ridge-regularized fit.
template <typename Scalar = double>
SphericalCoeffs<Scalar> analyze(const SphericalSignal& signal, int L) {
  return S2Analyzer<Scalar>(signal.points, L).apply(signal.values);
}

/// Pointwise evaluation of the truncated series. Complex-basis coefficients
/// keep the real part of the result.
template <typename Scalar>
SphericalSignal synthesize(const SphericalCoeffs<Scalar>& c, const std::vector<SphericalPoint>& points) {
  const auto a = sh_matrix<Scalar>(points, c.bandlimit);
  SphericalSignal out;
  out.points = points;
  if constexpr (is_complex<Scalar>::value) {
    out.values = (c.data * a.transpose()).real();
  } else {
    out.values = c.data * a.transpose();
  }
  return out;
}

/// Complex-basis coefficients to real-basis coefficients (exact basis change).
inline RealCoeffs to_real_basis(const ComplexCoeffs& c) {
  RealCoeffs out(c.bandlimit, c.channels());
  for (int l = 0; l <= c.bandlimit; ++l) {
    const Eigen::MatrixXcd u = real_basis_change(l);
    const int o = l * l;
    const Eigen::MatrixXcd blk = c.data.middleCols(o, 2 * l + 1) * u.transpose();
    out.data.middleCols(o, 2 * l + 1) = blk.real();
  }
  return out;
}

inline ComplexCoeffs to_complex_basis(const RealCoeffs& r) {
  ComplexCoeffs out(r.bandlimit, r.channels());
  for (int l = 0; l <= r.bandlimit; ++l) {
    const Eigen::MatrixXcd u = real_basis_change(l);
    const int o = l * l;
    out.data.middleCols(o, 2 * l + 1) = r.data.middleCols(o, 2 * l + 1).cast<std::complex<double>>() * u.conjugate();
  }
  return out;
}

}  // namespace wignerpose
