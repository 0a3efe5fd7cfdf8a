#pragma once

// Wigner small-d and full Wigner-D blocks, the flattened harmonic vector of a
// rotation, and rotation of harmonic coefficients.
//
// With R = Rz(gamma) Ry(beta) Rz(alpha) (see rotations.hpp) the complex block is
//   D^l_{mn}(R) = exp(-i m gamma) d^l_{nm}(beta) exp(-i n alpha)
// where d is the explicit factorial sum below. With this pairing
//   c'_m = sum_n D^l_{mn}(R) c_n
// are the coefficients of x -> f(R^-1 x), and D(R1) D(R2) = D(R1 R2).
// Real blocks are U_l D U_l^dagger with U_l from real_basis_change().

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "wignerpose/errors.hpp"
#include "wignerpose/harmonics.hpp"
#include "wignerpose/rotations.hpp"

namespace wignerpose {

/// Number of entries of a harmonic vector with band limit L: sum (2l+1)^2.
inline constexpr int psi_dim(int L) { return (L + 1) * (2 * L + 1) * (2 * L + 3) / 3; }
/// Offset of block l inside a harmonic vector.
inline constexpr int psi_offset(int l) { return l * (2 * l - 1) * (2 * l + 1) / 3; }

/// Layout version written into every serialized harmonic vector.
inline constexpr std::uint32_t kPsiLayoutVersion = 1;

using RowMajorMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BlockMap = Eigen::Map<RowMajorMatrixXd>;
using ConstBlockMap = Eigen::Map<const RowMajorMatrixXd>;

/// Flattened Wigner-D blocks l = 0..L; block l is (2l+1)x(2l+1) row-major
/// (m outer, n inner), blocks in ascending l.
struct HarmonicVector {
  int bandlimit{0};
  Eigen::VectorXd data;

  HarmonicVector() = default;
  explicit HarmonicVector(int L) : bandlimit(L), data(Eigen::VectorXd::Zero(psi_dim(L))) {}
  HarmonicVector(int L, Eigen::VectorXd d) : bandlimit(L), data(std::move(d)) {
    if (data.size() != psi_dim(L)) throw ShapeError("HarmonicVector: length != psi_dim(L)");
  }

  BlockMap block(int l) { return {data.data() + psi_offset(l), 2 * l + 1, 2 * l + 1}; }
  ConstBlockMap block(int l) const { return {data.data() + psi_offset(l), 2 * l + 1, 2 * l + 1}; }
};

namespace detail {

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double factorial(int n) {
  static const std::array<double, 21> table = [] {
    std::array<double, 21> t{};
    std::uint64_t f = 1;
    t[0] = 1.0;
    for (int i = 1; i <= 20; ++i) {
      f *= static_cast<std::uint64_t>(i);
      t[static_cast<std::size_t>(i)] = static_cast<double>(f);
    }
    return t;
  }();
  return table[static_cast<std::size_t>(n)];
}

}  // namespace detail

/// Wigner small-d d^l_{mn}(beta) from the explicit sum over k, with k restricted
/// so that every factorial argument is non-negative. Valid for l <= 20; uses exact
/// integer factorials for l <= 10 and log-space with sign tracking above.
template <typename Scalar>
Scalar small_d(int l, int m, int n, Scalar beta) {
  using std::cos;
  using std::exp;
  using std::pow;
  using std::sin;
  if (l < 0 || l > 20) throw std::domain_error("small_d: need 0 <= l <= 20");
  if (m < -l || m > l || n < -l || n > l) throw std::domain_error("small_d: |m|, |n| must be <= l");
  const Scalar c = cos(beta / Scalar(2));
  const Scalar s = sin(beta / Scalar(2));
  const int kmin = std::max(0, n - m);
  const int kmax = std::min(l - m, l + n);
  Scalar sum = 0;
  for (int k = kmin; k <= kmax; ++k) {
    const int pc = 2 * l - 2 * k + n - m;
    const int ps = 2 * k + m - n;
    Scalar coef;
    if (l <= 10) {
      coef = Scalar(std::sqrt(detail::factorial(l + m) * detail::factorial(l - m) * detail::factorial(l + n) *
                              detail::factorial(l - n)) /
                    (detail::factorial(l - m - k) * detail::factorial(l + n - k) * detail::factorial(k) *
                     detail::factorial(k + m - n)));
    } else {
      const double lg = 0.5 * (detail::log_factorial(l + m) + detail::log_factorial(l - m) +
                               detail::log_factorial(l + n) + detail::log_factorial(l - n)) -
                        detail::log_factorial(l - m - k) - detail::log_factorial(l + n - k) -
                        detail::log_factorial(k) - detail::log_factorial(k + m - n);
      coef = Scalar(exp(lg));
    }
    const Scalar term = coef * (pc ? pow(c, pc) : Scalar(1)) * (ps ? pow(s, ps) : Scalar(1));
    sum += (k % 2) ? -term : term;
  }
  return sum;
}

/// (2l+1)x(2l+1) matrix of small_d(l, m, n, beta), indexed [m+l][n+l].
Eigen::MatrixXd small_d_matrix(int l, double beta);

/// Complex Wigner-D block for the rotation with the given Euler angles.
Eigen::MatrixXcd wigner_D_complex(int l, const EulerZYZ<double>& e);

/// Real-basis Wigner-D block U_l D U_l^dagger (orthogonal).
Eigen::MatrixXd wigner_D_real(int l, const EulerZYZ<double>& e);

/// Stacked real Wigner-D blocks l = 0..L of the rotation, flattened.
HarmonicVector rotation_to_psi(const RotationMatrix<double>& r, int L);

/// Harmonic vectors of many rotations, one per row (Q x psi_dim(L)). Small-d
/// matrices are shared between rotations with bitwise-equal beta.
RowMajorMatrixXd psi_table(const std::vector<RotationMatrix<double>>& rotations, int L);
RowMajorMatrixXd psi_table(const std::vector<EulerZYZ<double>>& angles, int L);

/// Per-degree coefficient rotation c'^l = D^l(R) c^l in the basis of the coefficients.
template <typename Scalar>
SphericalCoeffs<Scalar> rotate_coeffs(const SphericalCoeffs<Scalar>& c, const RotationMatrix<double>& r) {
  const EulerZYZ<double> e = matrix_to_euler(r);
  SphericalCoeffs<Scalar> out(c.bandlimit, c.channels());
  for (int l = 0; l <= c.bandlimit; ++l) {
    const int o = l * l;
    if constexpr (is_complex<Scalar>::value) {
      const Eigen::MatrixXcd d = wigner_D_complex(l, e);
      out.data.middleCols(o, 2 * l + 1) = c.data.middleCols(o, 2 * l + 1) * d.transpose();
    } else {
      const Eigen::MatrixXd d = wigner_D_real(l, e);
      out.data.middleCols(o, 2 * l + 1) = c.data.middleCols(o, 2 * l + 1) * d.transpose();
    }
  }
  return out;
}

}  // namespace wignerpose
