#include "clkan/qmc.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace clkan {
namespace {

// Primitive polynomial data and initial direction numbers for coordinates
// 2..16 of the Joe-Kuo "new-joe-kuo-6.21201" table. Coordinate 1 is the van der
// Corput sequence.
struct DirectionInit {
  int degree;
  unsigned coeffs;
  std::array<unsigned, 6> m;
};

constexpr std::array<DirectionInit, kMaxSobolDimension - 1> kDirectionInit{{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
}};

constexpr int kBits = 32;

using DirectionNumbers = std::array<std::uint32_t, kBits>;

DirectionNumbers direction_numbers(int coord) {
  DirectionNumbers v{};
  if (coord == 0) {
    for (int k = 0; k < kBits; ++k) v[k] = std::uint32_t{1} << (kBits - 1 - k);
    return v;
  }
  const DirectionInit& init = kDirectionInit[coord - 1];
  const int s = init.degree;
  std::array<std::uint64_t, kBits> m{};
  for (int k = 0; k < s; ++k) m[k] = init.m[k];
  for (int k = s; k < kBits; ++k) {
    std::uint64_t mk = m[k - s] ^ (m[k - s] << s);
    for (int i = 1; i < s; ++i)
      if ((init.coeffs >> (s - 1 - i)) & 1u) mk ^= m[k - i] << i;
    m[k] = mk;
  }
  for (int k = 0; k < kBits; ++k)
    v[k] = static_cast<std::uint32_t>(m[k] << (kBits - 1 - k));
  return v;
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Nested uniform scrambling in base 2: digit k is flipped by a random bit that
// depends only on the digits above it.
std::uint32_t owen_scramble(std::uint32_t x, std::uint64_t key) {
  std::uint32_t out = 0;
  for (int k = 0; k < kBits; ++k) {
    const std::uint64_t prefix = k == 0 ? 0 : (x >> (kBits - k));
    const std::uint64_t h = mix64(key ^ mix64((std::uint64_t(k) << 32) | prefix));
    const std::uint32_t bit = ((x >> (kBits - 1 - k)) ^ h) & 1u;
    out |= bit << (kBits - 1 - k);
  }
  return out;
}

}  // namespace

std::vector<double> sobol_points(int d, std::size_t count, std::uint64_t seed,
                                 Scramble scramble) {
  if (d < 1 || d > kMaxSobolDimension)
    throw ConfigError("Sobol dimension " + std::to_string(d) +
                      " unsupported; supported range is 1.." +
                      std::to_string(kMaxSobolDimension));
  if (count == 0) throw ConfigError("Sobol point count must be at least 1");
  if (count > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError("Sobol point count exceeds 2^32 - 1");

  std::vector<double> out(count * static_cast<std::size_t>(d));
  constexpr double kScale = 1.0 / 4294967296.0;
  for (int c = 0; c < d; ++c) {
    const DirectionNumbers v = direction_numbers(c);
    const std::uint64_t key = mix64(seed ^ mix64(0x5eedULL + std::uint64_t(c)));
    std::uint32_t x = 0;
    for (std::size_t i = 0; i < count; ++i) {
      if (i > 0) x ^= v[std::countr_zero(static_cast<std::uint64_t>(i))];
      const std::uint32_t y =
          scramble == Scramble::Owen ? owen_scramble(x, key) : x;
      out[i * d + c] = y * kScale;
    }
  }
  return out;
}

double qmc_estimate(const std::function<double(std::span<const double>)>& f,
                    std::span<const double> points, int d) {
  const std::size_t n = points.size() / static_cast<std::size_t>(d);
  if (n == 0) throw std::invalid_argument("qmc_estimate needs at least one point");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += f(points.subspan(i * d, d));
  return sum / static_cast<double>(n);
}

std::string to_string(GridKind kind) {
  return kind == GridKind::Full ? "full" : "sobol";
}

GridKind grid_kind_from_string(const std::string& s) {
  if (s == "full" || s == "F") return GridKind::Full;
  if (s == "sobol" || s == "S") return GridKind::Sobol;
  throw ConfigError("unknown grid kind '" + s + "' (expected full or sobol)");
}

std::size_t GridSpec::total_points(std::size_t dim) const {
  if (points_per_dim < 1) return 0;
  std::size_t total = 1;
  for (std::size_t c = 0; c < dim; ++c) {
    if (total > std::numeric_limits<std::size_t>::max() /
                    static_cast<std::size_t>(points_per_dim))
      return 0;
    total *= static_cast<std::size_t>(points_per_dim);
  }
  return total;
}

void GridSpec::validate(std::size_t dim) const {
  if (points_per_dim < 1)
    throw ConfigError("grid points per dimension must be positive");
  if (kind == GridKind::Full && points_per_dim < 2)
    throw ConfigError("a full grid needs at least 2 points per dimension");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ConfigError("grid range must satisfy lo < hi");
  const std::size_t total = total_points(dim);
  if (total == 0 || total > max_points)
    throw ConfigError(
        "grid with " + std::to_string(points_per_dim) + "^" +
        std::to_string(dim) + " points exceeds the cap of " +
        std::to_string(max_points) +
        "; grid size grows exponentially with the algebra dimension, use fewer "
        "points per dimension");
  if (kind == GridKind::Sobol && dim > static_cast<std::size_t>(kMaxSobolDimension))
    throw ConfigError("Sobol grids support at most " +
                      std::to_string(kMaxSobolDimension) + " dimensions");
}

std::string GridSpec::label() const {
  return std::string(kind == GridKind::Full ? "F-" : "S-") +
         std::to_string(points_per_dim);
}

std::vector<double> lattice(int n, double lo, double hi) {
  std::vector<double> v(static_cast<std::size_t>(n));
  if (n == 1) {
    v[0] = 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < n; ++i)
    v[i] = i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
  return v;
}

Grid::Grid(GridSpec spec, std::size_t dim, std::vector<double> points)
    : spec_(spec), dim_(dim), points_(points.begin(), points.end()) {
  if (dim_ == 0 || points_.size() % dim_ != 0)
    throw std::invalid_argument("grid point buffer does not match dimension");
  if (spec_.kind == GridKind::Full) {
    axis_ = lattice(spec_.points_per_dim, spec_.lo, spec_.hi);
    if (points_.size() != spec_.total_points(dim_) * dim_)
      throw std::invalid_argument("full grid has wrong number of points");
  }
}

Multivector Grid::point(std::size_t g, Signature sig) const {
  auto p = point(g);
  return Multivector(sig, std::vector<double>(p.begin(), p.end()));
}

Grid make_grid(const GridSpec& spec, std::size_t dim) {
  spec.validate(dim);
  const std::size_t total = spec.total_points(dim);
  std::vector<double> pts(total * dim);
  if (spec.kind == GridKind::Full) {
    const auto axis = lattice(spec.points_per_dim, spec.lo, spec.hi);
    const auto n = static_cast<std::size_t>(spec.points_per_dim);
    for (std::size_t g = 0; g < total; ++g) {
      std::size_t rest = g;
      for (std::size_t c = 0; c < dim; ++c) {
        pts[g * dim + c] = axis[rest % n];
        rest /= n;
      }
    }
  } else {
    const auto unit = sobol_points(static_cast<int>(dim), total, spec.seed);
    for (std::size_t k = 0; k < pts.size(); ++k)
      pts[k] = spec.lo + (spec.hi - spec.lo) * unit[k];
  }
  return Grid(spec, dim, std::move(pts));
}

Grid make_grid(const GridSpec& spec, const Algebra& algebra) {
  return make_grid(spec, algebra.dimension());
}

}  // namespace clkan
