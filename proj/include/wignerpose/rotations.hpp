#pragma once

// Rotation parameterizations of SO(3) and conversions among them.
//
// Euler convention: ZYZ with R(alpha, beta, gamma) = Rz(gamma) * Ry(beta) * Rz(alpha),
// i.e. alpha is applied first to a column vector and gamma last. Angles are radians,
// alpha and gamma wrapped to [-pi, pi), beta in [0, pi].

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wignerpose {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

/// A proper rotation as a 3x3 matrix (columns are the images of the basis vectors).
template <typename Scalar = double>
using RotationMatrix = Matrix3<Scalar>;

template <typename Scalar = double>
struct EulerZYZ {
  Scalar alpha{0};
  Scalar beta{0};
  Scalar gamma{0};
};

/// Unit quaternion with canonical sign: w >= 0, ties broken by the first nonzero
/// component of (x, y, z) being positive.
template <typename Scalar = double>
struct UnitQuaternion {
  Scalar w{1};
  Scalar x{0};
  Scalar y{0};
  Scalar z{0};

  UnitQuaternion() = default;
  UnitQuaternion(Scalar w_, Scalar x_, Scalar y_, Scalar z_) : w(w_), x(x_), y(y_), z(z_) {
    using std::sqrt;
    const Scalar n = sqrt(w * w + x * x + y * y + z * z);
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    if (w < 0 || (w == 0 && (x < 0 || (x == 0 && (y < 0 || (y == 0 && z < 0)))))) {
      w = -w;
      x = -x;
      y = -y;
      z = -z;
    }
  }
};

template <typename Scalar = double>
struct AxisAngle {
  Vector3<Scalar> axis{Vector3<Scalar>::UnitZ()};
  Scalar angle{0};
};

/// Wrap an angle to [-pi, pi).
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  using std::floor;
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  a -= two_pi * floor((a + std::numbers::pi_v<Scalar>) / two_pi);
  if (a >= std::numbers::pi_v<Scalar>) a -= two_pi;
  return a;
}

template <typename Scalar>
Matrix3<Scalar> rot_z(Scalar t) {
  using std::cos;
  using std::sin;
  Matrix3<Scalar> m;
  m << cos(t), -sin(t), 0, sin(t), cos(t), 0, 0, 0, 1;
  return m;
}

template <typename Scalar>
Matrix3<Scalar> rot_y(Scalar t) {
  using std::cos;
  using std::sin;
  Matrix3<Scalar> m;
  m << cos(t), 0, sin(t), 0, 1, 0, -sin(t), 0, cos(t);
  return m;
}

template <typename Scalar>
RotationMatrix<Scalar> euler_to_matrix(const EulerZYZ<Scalar>& e) {
  return rot_z(e.gamma) * rot_y(e.beta) * rot_z(e.alpha);
}

/// Inverse of euler_to_matrix. When beta is 0 or pi (to within 1e-12) the
/// decomposition is degenerate: gamma is set to 0 and the in-plane angle goes to alpha.
template <typename Scalar>
EulerZYZ<Scalar> matrix_to_euler(const RotationMatrix<Scalar>& r) {
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;
  EulerZYZ<Scalar> e;
  const Scalar axial = sqrt(r(0, 2) * r(0, 2) + r(1, 2) * r(1, 2));
  if (axial < Scalar(1e-12)) {
    e.gamma = 0;
    if (r(2, 2) > 0) {
      e.beta = 0;
      e.alpha = atan2(r(1, 0), r(1, 1));
    } else {
      e.beta = std::numbers::pi_v<Scalar>;
      e.alpha = atan2(r(0, 1), r(1, 1));
    }
    e.alpha = wrap_angle(e.alpha);
    return e;
  }
  e.gamma = atan2(r(1, 2), r(0, 2));
  const Scalar cg = cos(e.gamma), sg = sin(e.gamma);
  // Rz(-gamma) * r = Ry(beta) * Rz(alpha); read beta and alpha off its rows.
  e.beta = atan2(cg * r(0, 2) + sg * r(1, 2), r(2, 2));
  e.alpha = atan2(-sg * r(0, 0) + cg * r(1, 0), -sg * r(0, 1) + cg * r(1, 1));
  e.alpha = wrap_angle(e.alpha);
  e.gamma = wrap_angle(e.gamma);
  return e;
}

template <typename Scalar>
RotationMatrix<Scalar> quat_to_matrix(const UnitQuaternion<Scalar>& q) {
  return Eigen::Quaternion<Scalar>(q.w, q.x, q.y, q.z).toRotationMatrix();
}

template <typename Scalar>
UnitQuaternion<Scalar> matrix_to_quat(const RotationMatrix<Scalar>& r) {
  const Eigen::Quaternion<Scalar> q(r);
  return UnitQuaternion<Scalar>(q.w(), q.x(), q.y(), q.z());
}

template <typename Scalar>
RotationMatrix<Scalar> axis_angle_to_matrix(const AxisAngle<Scalar>& a) {
  return Eigen::AngleAxis<Scalar>(a.angle, a.axis.normalized()).toRotationMatrix();
}

/// Angle in [0, pi]. At angle 0 the axis is undefined and (0, 0, 1) is returned.
template <typename Scalar>
AxisAngle<Scalar> matrix_to_axis_angle(const RotationMatrix<Scalar>& r) {
  using std::atan2;
  const UnitQuaternion<Scalar> q = matrix_to_quat(r);
  const Vector3<Scalar> v(q.x, q.y, q.z);
  const Scalar s = v.norm();
  AxisAngle<Scalar> out;
  if (s < Scalar(1e-300)) return out;
  out.axis = v / s;
  out.angle = Scalar(2) * atan2(s, q.w);
  return out;
}

template <typename Scalar>
Scalar geodesic_distance(const RotationMatrix<Scalar>& r1, const RotationMatrix<Scalar>& r2) {
  using std::atan2;
  const Matrix3<Scalar> d = r1 * r2.transpose();
  const Scalar c = (d.trace() - Scalar(1)) / Scalar(2);
  const Vector3<Scalar> ax(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return atan2(ax.norm() / Scalar(2), c);
}

template <typename Scalar>
bool is_rotation(const Matrix3<Scalar>& m, Scalar tol = Scalar(1e-10)) {
  using std::abs;
  return (m.transpose() * m - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() <= tol &&
         abs(m.determinant() - Scalar(1)) <= tol;
}

/// Haar-uniform rotations from normalized 4D Gaussian quaternions. Deterministic in seed.
inline std::vector<RotationMatrix<double>> sample_uniform(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<RotationMatrix<double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = normal(rng), x = normal(rng), y = normal(rng), z = normal(rng);
    out.push_back(quat_to_matrix(UnitQuaternion<double>(w, x, y, z)));
  }
  return out;
}

inline constexpr double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline constexpr double rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace wignerpose
