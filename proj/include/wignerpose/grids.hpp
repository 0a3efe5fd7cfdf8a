#pragma once

// HEALPix S^2 grids (RING order), SO(3) grids lifted along Hopf fibers, and
// random / super-Fibonacci SO(3) grids.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wignerpose/harmonics.hpp"
#include "wignerpose/rotations.hpp"
#include "wignerpose/wigner.hpp"

namespace wignerpose {

enum class S2Subset { full, hemisphere };

struct S2Grid {
  int level{0};
  S2Subset subset{S2Subset::full};
  std::vector<SphericalPoint> points;
};

inline constexpr std::int64_t healpix_nside(int level) { return std::int64_t{1} << level; }
inline constexpr std::int64_t healpix_npix(int level) { return 12 * healpix_nside(level) * healpix_nside(level); }

/// Center of RING pixel `pix` for the given nside.
SphericalPoint healpix_pix2ang(std::int64_t nside, std::int64_t pix);
/// RING pixel containing the direction.
std::int64_t healpix_ang2pix(std::int64_t nside, const SphericalPoint& p);

/// Pixel centers for 0 <= level <= 8. The hemisphere subset keeps z >= 0.
S2Grid healpix_s2(int level, S2Subset subset = S2Subset::full);

enum class SO3GridKind : std::uint32_t { healpix_hopf = 0, random = 1, super_fibonacci = 2 };

std::string to_string(SO3GridKind k);
SO3GridKind so3_grid_kind_from_string(const std::string& s);

struct SO3Grid {
  SO3GridKind kind{SO3GridKind::healpix_hopf};
  int level{-1};           // HEALPix level, -1 for the other kinds
  std::uint64_t seed{0};   // random kind only
  double nominal_resolution{0};  // degrees
  std::vector<RotationMatrix<double>> rotations;
  // Euler angles per rotation. For healpix_hopf these are the generating
  // angles (alpha = fiber angle, beta = theta, gamma = phi).
  std::vector<EulerZYZ<double>> angles;
  std::optional<RowMajorMatrixXd> psi_table;
  int psi_bandlimit{-1};

  std::size_t size() const { return rotations.size(); }
  /// Fibers per S^2 pixel for healpix_hopf; index = pixel * fibers + k.
  std::int64_t fibers() const { return 6 * healpix_nside(level); }
};

/// 72 * 8^level rotations. level >= 5 requires allow_large, otherwise ResourceError.
SO3Grid so3_healpix(int level, bool allow_large = false);
SO3Grid so3_random(std::uint64_t seed, std::size_t n);
SO3Grid so3_super_fibonacci(std::size_t n);

/// Equal-volume resolution assigned to non-HEALPix grids of n rotations.
double nominal_resolution_for_count(std::size_t n);

/// Precompute the harmonic vector of every rotation (size x psi_dim(L) doubles).
void attach_psi_table(SO3Grid& g, int L);

/// Monte Carlo covering radius in degrees: max over Haar probes of the distance
/// to the nearest grid rotation.
double covering_radius(const SO3Grid& g, std::size_t probes, std::uint64_t seed);
/// Same with explicit probe rotations.
double covering_radius(const SO3Grid& g, const std::vector<RotationMatrix<double>>& probes);

/// Index of the grid rotation nearest to r (brute force over quaternions).
std::size_t nearest_index(const SO3Grid& g, const RotationMatrix<double>& r);

inline constexpr std::uint32_t kGridFormatVersion = 1;
void save_grid(const SO3Grid& g, std::ostream& os);
SO3Grid load_grid(std::istream& is);
void save_grid(const SO3Grid& g, const std::string& path);
SO3Grid load_grid(const std::string& path);

}  // namespace wignerpose
