#include "wignerpose/wigner.hpp"

#include <bit>
#include <unordered_map>

namespace wignerpose {

namespace {

// Powers of cos(beta/2), sin(beta/2) shared by every entry of one small-d matrix.
Eigen::MatrixXd small_d_matrix_fast(int l, double beta) {
  const int n = 2 * l + 1;
  Eigen::MatrixXd d(n, n);
  const double c = std::cos(beta / 2.0);
  const double s = std::sin(beta / 2.0);
  std::vector<double> cp(static_cast<std::size_t>(2 * l + 1), 1.0);
  std::vector<double> sp(static_cast<std::size_t>(2 * l + 1), 1.0);
  for (int i = 1; i <= 2 * l; ++i) {
    cp[static_cast<std::size_t>(i)] = cp[static_cast<std::size_t>(i - 1)] * c;
    sp[static_cast<std::size_t>(i)] = sp[static_cast<std::size_t>(i - 1)] * s;
  }
  for (int m = -l; m <= l; ++m) {
    for (int k2 = -l; k2 <= l; ++k2) {
      const int kmin = std::max(0, k2 - m);
      const int kmax = std::min(l - m, l + k2);
      double sum = 0.0;
      for (int k = kmin; k <= kmax; ++k) {
        double coef;
        if (l <= 10) {
          coef = std::sqrt(detail::factorial(l + m) * detail::factorial(l - m) * detail::factorial(l + k2) *
                           detail::factorial(l - k2)) /
                 (detail::factorial(l - m - k) * detail::factorial(l + k2 - k) * detail::factorial(k) *
                  detail::factorial(k + m - k2));
        } else {
          coef = std::exp(0.5 * (detail::log_factorial(l + m) + detail::log_factorial(l - m) +
                                 detail::log_factorial(l + k2) + detail::log_factorial(l - k2)) -
                          detail::log_factorial(l - m - k) - detail::log_factorial(l + k2 - k) -
                          detail::log_factorial(k) - detail::log_factorial(k + m - k2));
        }
        const double term = coef * cp[static_cast<std::size_t>(2 * l - 2 * k + k2 - m)] *
                            sp[static_cast<std::size_t>(2 * k + m - k2)];
        sum += (k % 2) ? -term : term;
      }
      d(m + l, k2 + l) = sum;
    }
  }
  return d;
}

Eigen::MatrixXcd complex_block(int l, const Eigen::MatrixXd& dmat, double alpha, double gamma) {
  const int n = 2 * l + 1;
  Eigen::MatrixXcd out(n, n);
  for (int m = -l; m <= l; ++m) {
    const std::complex<double> pm = std::polar(1.0, -m * gamma);
    for (int k = -l; k <= l; ++k) {
      out(m + l, k + l) = pm * dmat(k + l, m + l) * std::polar(1.0, -k * alpha);
    }
  }
  return out;
}

// U D U^dagger using the two-nonzeros-per-row structure of U.
void real_block_into(int l, const Eigen::MatrixXcd& d, double* dst) {
  const int n = 2 * l + 1;
  const double h = 1.0 / std::sqrt(2.0);
  const std::complex<double> i(0.0, 1.0);
  struct Row {
    int idx[2];
    std::complex<double> val[2];
    int count;
  };
  std::vector<Row> rows(static_cast<std::size_t>(n));
  rows[static_cast<std::size_t>(l)] = {{l, 0}, {1.0, 0.0}, 1};
  for (int m = 1; m <= l; ++m) {
    const double sign = m % 2 ? -1.0 : 1.0;
    rows[static_cast<std::size_t>(l + m)] = {{l + m, l - m}, {sign * h, h}, 2};
    rows[static_cast<std::size_t>(l - m)] = {{l - m, l + m}, {-i * h, i * sign * h}, 2};
  }
  for (int a = 0; a < n; ++a) {
    const Row& ra = rows[static_cast<std::size_t>(a)];
    for (int b = 0; b < n; ++b) {
      const Row& rb = rows[static_cast<std::size_t>(b)];
      std::complex<double> acc = 0.0;
      for (int p = 0; p < ra.count; ++p) {
        for (int q = 0; q < rb.count; ++q) acc += ra.val[p] * d(ra.idx[p], rb.idx[q]) * std::conj(rb.val[q]);
      }
      dst[a * n + b] = acc.real();
    }
  }
}

void fill_psi(const EulerZYZ<double>& e, const std::vector<Eigen::MatrixXd>& dmats, int L, double* dst) {
  for (int l = 0; l <= L; ++l) {
    real_block_into(l, complex_block(l, dmats[static_cast<std::size_t>(l)], e.alpha, e.gamma),
                    dst + psi_offset(l));
  }
}

}  // namespace

Eigen::MatrixXd small_d_matrix(int l, double beta) {
  if (l < 0 || l > 20) throw std::domain_error("small_d_matrix: need 0 <= l <= 20");
  return small_d_matrix_fast(l, beta);
}

Eigen::MatrixXcd wigner_D_complex(int l, const EulerZYZ<double>& e) {
  return complex_block(l, small_d_matrix(l, e.beta), e.alpha, e.gamma);
}

Eigen::MatrixXd wigner_D_real(int l, const EulerZYZ<double>& e) {
  const int n = 2 * l + 1;
  RowMajorMatrixXd out(n, n);
  real_block_into(l, wigner_D_complex(l, e), out.data());
  return out;
}

HarmonicVector rotation_to_psi(const RotationMatrix<double>& r, int L) {
  const EulerZYZ<double> e = matrix_to_euler(r);
  std::vector<Eigen::MatrixXd> dmats;
  for (int l = 0; l <= L; ++l) dmats.push_back(small_d_matrix(l, e.beta));
  HarmonicVector out(L);
  fill_psi(e, dmats, L, out.data.data());
  return out;
}

RowMajorMatrixXd psi_table(const std::vector<RotationMatrix<double>>& rotations, int L) {
  std::vector<EulerZYZ<double>> angles;
  angles.reserve(rotations.size());
  for (const auto& r : rotations) angles.push_back(matrix_to_euler(r));
  return psi_table(angles, L);
}

RowMajorMatrixXd psi_table(const std::vector<EulerZYZ<double>>& angles, int L) {
  RowMajorMatrixXd table(static_cast<Eigen::Index>(angles.size()), psi_dim(L));
  std::unordered_map<std::uint64_t, std::vector<Eigen::MatrixXd>> cache;
  for (std::size_t q = 0; q < angles.size(); ++q) {
    const EulerZYZ<double>& e = angles[q];
    const auto key = std::bit_cast<std::uint64_t>(e.beta);
    auto it = cache.find(key);
    if (it == cache.end()) {
      if (cache.size() > 4096) cache.clear();
      std::vector<Eigen::MatrixXd> dmats;
      for (int l = 0; l <= L; ++l) dmats.push_back(small_d_matrix(l, e.beta));
      it = cache.emplace(key, std::move(dmats)).first;
    }
    fill_psi(e, it->second, L, table.row(static_cast<Eigen::Index>(q)).data());
  }
  return table;
}

}  // namespace wignerpose
