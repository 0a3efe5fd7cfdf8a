#include "wignerpose/grids.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "wignerpose/errors.hpp"
#include "wignerpose/io.hpp"

namespace wignerpose {

namespace {

constexpr double kPi = std::numbers::pi;

std::int64_t isqrt(std::int64_t v) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

Eigen::Vector4d to_quat4(const RotationMatrix<double>& r) {
  const UnitQuaternion<double> q = matrix_to_quat(r);
  return {q.w, q.x, q.y, q.z};
}

SO3Grid from_rotations(SO3GridKind kind, std::vector<RotationMatrix<double>> rs) {
  SO3Grid g;
  g.kind = kind;
  g.nominal_resolution = nominal_resolution_for_count(rs.size());
  g.angles.reserve(rs.size());
  for (const auto& r : rs) g.angles.push_back(matrix_to_euler(r));
  g.rotations = std::move(rs);
  return g;
}

}  // namespace

SphericalPoint healpix_pix2ang(std::int64_t nside, std::int64_t pix) {
  const std::int64_t npix = 12 * nside * nside;
  const std::int64_t ncap = 2 * nside * (nside - 1);
  if (pix < 0 || pix >= npix) throw std::out_of_range("healpix_pix2ang: pixel out of range");
  const double fact2 = 4.0 / static_cast<double>(npix);
  double z, phi;
  if (pix < ncap) {
    const std::int64_t iring = (1 + isqrt(1 + 2 * pix)) >> 1;
    const std::int64_t iphi = pix + 1 - 2 * iring * (iring - 1);
    z = 1.0 - static_cast<double>(iring * iring) * fact2;
    phi = (static_cast<double>(iphi) - 0.5) * kPi / (2.0 * static_cast<double>(iring));
  } else if (pix < npix - ncap) {
    const std::int64_t ip = pix - ncap;
    const std::int64_t iring = ip / (4 * nside) + nside;
    const std::int64_t iphi = ip % (4 * nside) + 1;
    const double fodd = ((iring + nside) & 1) ? 1.0 : 0.5;
    z = static_cast<double>(2 * nside - iring) * 2.0 / (3.0 * static_cast<double>(nside));
    phi = (static_cast<double>(iphi) - fodd) * kPi / (2.0 * static_cast<double>(nside));
  } else {
    const std::int64_t ip = npix - pix;
    const std::int64_t iring = (1 + isqrt(2 * ip - 1)) >> 1;
    const std::int64_t iphi = 4 * iring + 1 - (ip - 2 * iring * (iring - 1));
    z = -1.0 + static_cast<double>(iring * iring) * fact2;
    phi = (static_cast<double>(iphi) - 0.5) * kPi / (2.0 * static_cast<double>(iring));
  }
  return {std::acos(std::clamp(z, -1.0, 1.0)), phi};
}

std::int64_t healpix_ang2pix(std::int64_t nside, const SphericalPoint& p) {
  const double z = std::cos(p.theta);
  const double za = std::abs(z);
  double tt = std::fmod(p.phi, 2.0 * kPi);
  if (tt < 0) tt += 2.0 * kPi;
  tt *= 2.0 / kPi;  // in [0, 4)
  const std::int64_t ncap = 2 * nside * (nside - 1);
  const std::int64_t npix = 12 * nside * nside;
  if (za <= 2.0 / 3.0) {
    const double t1 = static_cast<double>(nside) * (0.5 + tt);
    const double t2 = static_cast<double>(nside) * z * 0.75;
    const auto jp = static_cast<std::int64_t>(t1 - t2);
    const auto jm = static_cast<std::int64_t>(t1 + t2);
    const std::int64_t ir = nside + 1 + jp - jm;
    const std::int64_t kshift = 1 - (ir & 1);
    std::int64_t ip = (jp + jm - nside + kshift + 1) / 2;
    ip = ((ip % (4 * nside)) + 4 * nside) % (4 * nside);
    return ncap + (ir - 1) * 4 * nside + ip;
  }
  const double tp = tt - std::floor(tt);
  const double tmp = static_cast<double>(nside) * std::sqrt(3.0 * (1.0 - za));
  const auto jp = static_cast<std::int64_t>(tp * tmp);
  const auto jm = static_cast<std::int64_t>((1.0 - tp) * tmp);
  const std::int64_t ir = jp + jm + 1;
  std::int64_t ip = static_cast<std::int64_t>(tt * static_cast<double>(ir));
  ip %= 4 * ir;
  return z > 0 ? 2 * ir * (ir - 1) + ip : npix - 2 * ir * (ir + 1) + ip;
}

S2Grid healpix_s2(int level, S2Subset subset) {
  if (level < 0 || level > 8) throw std::domain_error("healpix_s2: level must be in [0, 8]");
  S2Grid g;
  g.level = level;
  g.subset = subset;
  const std::int64_t nside = healpix_nside(level);
  const std::int64_t npix = healpix_npix(level);
  for (std::int64_t p = 0; p < npix; ++p) {
    const SphericalPoint sp = healpix_pix2ang(nside, p);
    if (subset == S2Subset::hemisphere && sp.theta > kPi / 2) continue;
    g.points.push_back(sp);
  }
  return g;
}

std::string to_string(SO3GridKind k) {
  switch (k) {
    case SO3GridKind::healpix_hopf: return "healpix";
    case SO3GridKind::random: return "random";
    case SO3GridKind::super_fibonacci: return "super_fibonacci";
  }
  return "unknown";
}

SO3GridKind so3_grid_kind_from_string(const std::string& s) {
  if (s == "healpix" || s == "healpix_hopf") return SO3GridKind::healpix_hopf;
  if (s == "random") return SO3GridKind::random;
  if (s == "super_fibonacci" || s == "superfibonacci") return SO3GridKind::super_fibonacci;
  throw std::invalid_argument("unknown grid kind: " + s);
}

double nominal_resolution_for_count(std::size_t n) {
  return 60.0 * std::cbrt(72.0 / static_cast<double>(n));
}

SO3Grid so3_healpix(int level, bool allow_large) {
  if (level < 0) throw std::domain_error("so3_healpix: level must be >= 0");
  if (level >= 6) throw ResourceError("so3_healpix: level >= 6 exceeds the desk-scale budget");
  if (level == 5 && !allow_large) throw ResourceError("so3_healpix: level 5 needs the large-memory flag");
  const std::int64_t nside = healpix_nside(level);
  const std::int64_t npix = healpix_npix(level);
  const std::int64_t nfib = 6 * nside;
  SO3Grid g;
  g.kind = SO3GridKind::healpix_hopf;
  g.level = level;
  g.nominal_resolution = 60.0 / static_cast<double>(nside);
  const auto total = static_cast<std::size_t>(npix * nfib);
  g.rotations.reserve(total);
  g.angles.reserve(total);
  std::vector<double> psis(static_cast<std::size_t>(nfib));
  for (std::int64_t k = 0; k < nfib; ++k)
    psis[static_cast<std::size_t>(k)] = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(nfib);
  for (std::int64_t p = 0; p < npix; ++p) {
    const SphericalPoint sp = healpix_pix2ang(nside, p);
    const Matrix3<double> base = rot_z(sp.phi) * rot_y(sp.theta);
    for (double psi : psis) {
      g.angles.push_back({psi, sp.theta, sp.phi});
      g.rotations.push_back(base * rot_z(psi));
    }
  }
  return g;
}

SO3Grid so3_random(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw std::domain_error("so3_random: n must be >= 1");
  SO3Grid g = from_rotations(SO3GridKind::random, sample_uniform(seed, n));
  g.seed = seed;
  return g;
}

SO3Grid so3_super_fibonacci(std::size_t n) {
  if (n == 0) throw std::domain_error("so3_super_fibonacci: n must be >= 1");
  const double phi = std::sqrt(2.0);
  const double psi = 1.533751168755204288118041;
  std::vector<RotationMatrix<double>> rs;
  rs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) + 0.5;
    const double t = s / static_cast<double>(n);
    const double d = 2.0 * kPi * s;
    const double r = std::sqrt(t);
    const double big_r = std::sqrt(1.0 - t);
    const double a = d / phi;
    const double b = d / psi;
    rs.push_back(quat_to_matrix(
        UnitQuaternion<double>(r * std::sin(a), r * std::cos(a), big_r * std::sin(b), big_r * std::cos(b))));
  }
  return from_rotations(SO3GridKind::super_fibonacci, std::move(rs));
}

void attach_psi_table(SO3Grid& g, int L) {
  g.psi_table = psi_table(g.angles, L);
  g.psi_bandlimit = L;
}

std::size_t nearest_index(const SO3Grid& g, const RotationMatrix<double>& r) {
  const Eigen::Vector4d q = to_quat4(r);
  std::size_t best = 0;
  double best_dot = -1.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = std::abs(to_quat4(g.rotations[i]).dot(q));
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return best;
}

double covering_radius(const SO3Grid& g, std::size_t probes, std::uint64_t seed) {
  if (probes == 0) throw std::domain_error("covering_radius: probes must be >= 1");
  return covering_radius(g, sample_uniform(seed, probes));
}

double covering_radius(const SO3Grid& g, const std::vector<RotationMatrix<double>>& probes) {
  if (probes.empty()) throw std::domain_error("covering_radius: probes must be >= 1");
  if (g.size() == 0) throw std::domain_error("covering_radius: empty grid");
  Eigen::Matrix<double, 4, Eigen::Dynamic> gq(4, static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) gq.col(static_cast<Eigen::Index>(i)) = to_quat4(g.rotations[i]);
  double worst = 0.0;
  for (const auto& p : probes) {
    const Eigen::RowVector4d q = to_quat4(p).transpose();
    const double best = (q * gq).cwiseAbs().maxCoeff();
    worst = std::max(worst, 2.0 * std::acos(std::min(1.0, best)));
  }
  return deg(worst);
}

void save_grid(const SO3Grid& g, std::ostream& os) {
  io::write_header(os, "SO3G", kGridFormatVersion);
  io::write<std::uint32_t>(os, static_cast<std::uint32_t>(g.kind));
  io::write<std::int32_t>(os, g.level);
  io::write<std::uint64_t>(os, g.seed);
  io::write<double>(os, g.nominal_resolution);
  io::write<std::uint64_t>(os, g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const EulerZYZ<double>& e = g.angles[i];
    const double a[3] = {e.alpha, e.beta, e.gamma};
    io::write_doubles(os, a, 3);
    io::write_doubles(os, g.rotations[i].data(), 9);
  }
  if (!os) throw std::runtime_error("save_grid: write failed");
}

SO3Grid load_grid(std::istream& is) {
  io::expect_header(is, "SO3G", kGridFormatVersion);
  SO3Grid g;
  const auto kind = io::read<std::uint32_t>(is);
  if (kind > 2) throw FormatError("SO3G: unknown grid kind");
  g.kind = static_cast<SO3GridKind>(kind);
  g.level = io::read<std::int32_t>(is);
  g.seed = io::read<std::uint64_t>(is);
  g.nominal_resolution = io::read<double>(is);
  const auto n = io::read<std::uint64_t>(is);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("SO3G: rotation count out of range");
  g.rotations.resize(n);
  g.angles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a[3];
    io::read_doubles(is, a, 3);
    g.angles[i] = {a[0], a[1], a[2]};
    io::read_doubles(is, g.rotations[i].data(), 9);
  }
  return g;
}

void save_grid(const SO3Grid& g, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  save_grid(g, os);
}

SO3Grid load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_grid(is);
}

}  // namespace wignerpose
