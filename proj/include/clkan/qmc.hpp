#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clkan/algebra.hpp"
#include "clkan/aligned.hpp"

namespace clkan {

inline constexpr int kMaxSobolDimension = 16;
inline constexpr std::size_t kDefaultMaxGridPoints = 1'000'000;

enum class Scramble { None, Owen };

/// First `count` points of the Sobol sequence in [0,1)^d, Gray-code order,
/// starting at index 0. Row-major: point i occupies [i*d, (i+1)*d).
/// With Scramble::Owen every coordinate gets nested uniform scrambling keyed
/// by (seed, coordinate).
std::vector<double> sobol_points(int d, std::size_t count, std::uint64_t seed,
                                 Scramble scramble = Scramble::Owen);

/// Mean of f over row-major points of dimension d.
double qmc_estimate(const std::function<double(std::span<const double>)>& f,
                    std::span<const double> points, int d);

enum class GridKind { Full, Sobol };

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& s);

struct GridSpec {
  GridKind kind = GridKind::Full;
  int points_per_dim = 8;
  double lo = -2.0;
  double hi = 2.0;
  std::uint64_t seed = 0;
  std::size_t max_points = kDefaultMaxGridPoints;

  /// N_g^D, or 0 on overflow.
  std::size_t total_points(std::size_t dim) const;
  /// Throws ConfigError if the spec cannot produce a grid of dimension `dim`.
  void validate(std::size_t dim) const;
  /// Short label such as "F-8" or "S-3".
  std::string label() const;
};

/// RBF centres: |G| points of dimension D stored row-major.
class Grid {
 public:
  Grid() = default;
  /// Wraps existing points, e.g. read back from a checkpoint.
  Grid(GridSpec spec, std::size_t dim, std::vector<double> points);

  const GridSpec& spec() const { return spec_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : points_.size() / dim_; }
  std::span<const double> point(std::size_t g) const {
    return std::span<const double>(points_).subspan(g * dim_, dim_);
  }
  std::span<const double> points() const { return points_; }
  Multivector point(std::size_t g, Signature sig) const;

  /// Full grids only: the shared 1-D lattice; point g has coordinate c equal
  /// to axis()[(g / N_g^c) % N_g].
  const std::vector<double>& axis() const { return axis_; }
  bool is_full() const { return spec_.kind == GridKind::Full; }

 private:
  GridSpec spec_{};
  std::size_t dim_ = 0;
  AlignedVector points_;
  std::vector<double> axis_;
};

/// N_g equally spaced values covering [lo, hi] including both ends.
std::vector<double> lattice(int n, double lo, double hi);

Grid make_grid(const GridSpec& spec, std::size_t dim);
Grid make_grid(const GridSpec& spec, const Algebra& algebra);

}  // namespace clkan
