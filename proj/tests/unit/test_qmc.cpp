#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"

#include "clkan/qmc.hpp"

using namespace clkan;

namespace {

// Unscrambled Sobol points from a reference implementation
// (scipy.stats.qmc.Sobol, scramble=False), indices 0..7, 100, 777, 1023.
const double kReference[][16] = {
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
    {0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25},
    {0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75},
    {0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875, 0.875, 0.625, 0.875, 0.375, 0.375, 0.625, 0.375, 0.875},
    {0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375, 0.125, 0.375, 0.875, 0.875, 0.125, 0.875, 0.375},
    {0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125, 0.125, 0.375, 0.125, 0.625, 0.125, 0.875, 0.625, 0.625},
    {0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625, 0.625, 0.875, 0.625, 0.125, 0.625, 0.375, 0.125, 0.125},
    {0.4140625, 0.2578125, 0.7734375, 0.7265625, 0.8828125, 0.7421875, 0.0234375, 0.4765625, 0.6328125, 0.6953125, 0.4609375, 0.6796875, 0.4765625, 0.8515625, 0.3203125, 0.4921875},
    {0.6923828125, 0.9365234375, 0.1630859375, 0.2744140625, 0.6357421875, 0.3564453125, 0.1904296875, 0.7626953125, 0.3486328125, 0.3232421875, 0.7451171875, 0.6962890625, 0.3837890625, 0.4736328125, 0.5693359375, 0.5146484375},
    {0.0009765625, 0.7529296875, 0.6123046875, 0.1455078125, 0.1865234375, 0.4384765625, 0.1396484375, 0.6181640625, 0.3447265625, 0.8505859375, 0.6787109375, 0.0361328125, 0.1298828125, 0.6650390625, 0.3623046875, 0.4638671875},
};
const std::size_t kReferenceIndex[] = {0, 1, 2, 3, 4, 5, 6, 7, 100, 777, 1023};

double gaussian(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return std::exp(-s);
}

double sample_variance(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace

TEST_CASE("unscrambled Sobol leading points") {
  const auto p = sobol_points(1, 3, 0, Scramble::None);
  CHECK(p == std::vector<double>{0.0, 0.5, 0.75});
}

TEST_CASE("unscrambled Sobol matches the reference direction numbers") {
  const auto p = sobol_points(16, 1024, 0, Scramble::None);
  for (std::size_t r = 0; r < std::size(kReferenceIndex); ++r)
    for (std::size_t c = 0; c < 16; ++c) {
      INFO("index " << kReferenceIndex[r] << " coordinate " << c);
      CHECK(p[kReferenceIndex[r] * 16 + c] == kReference[r][c]);
    }
}

TEST_CASE("unscrambled d=1 is one point per dyadic interval") {
  for (int k = 0; k <= 12; ++k) {
    const std::size_t n = std::size_t{1} << k;
    const auto p = sobol_points(1, n, 0, Scramble::None);
    std::vector<int> bins(n, 0);
    for (double v : p) ++bins[static_cast<std::size_t>(v * static_cast<double>(n))];
    CHECK(std::all_of(bins.begin(), bins.end(), [](int b) { return b == 1; }));
  }
}

TEST_CASE("scrambled Sobol stratifies every coordinate") {
  for (int d = 1; d <= 6; ++d)
    for (int m = 0; m <= 10; ++m)
      for (std::uint64_t seed : {0ull, 42ull, 123456789ull}) {
        const std::size_t n = std::size_t{1} << m;
        const auto p = sobol_points(d, n, seed);
        for (int c = 0; c < d; ++c) {
          std::vector<int> bins(n, 0);
          for (std::size_t i = 0; i < n; ++i)
            ++bins[static_cast<std::size_t>(p[i * d + c] * static_cast<double>(n))];
          INFO("d=" << d << " m=" << m << " c=" << c << " seed=" << seed);
          REQUIRE(std::all_of(bins.begin(), bins.end(), [](int b) { return b == 1; }));
        }
      }
}

TEST_CASE("scrambled points stay in [0,1) and depend on the seed") {
  const auto a = sobol_points(4, 512, 1);
  const auto b = sobol_points(4, 512, 2);
  CHECK(std::all_of(a.begin(), a.end(), [](double v) { return v >= 0.0 && v < 1.0; }));
  CHECK(a != b);
  CHECK(a == sobol_points(4, 512, 1));
  CHECK(a != sobol_points(4, 512, 1, Scramble::None));
}

TEST_CASE("sobol_points rejects unsupported requests") {
  CHECK_THROWS_AS(sobol_points(0, 4, 0), ConfigError);
  CHECK_THROWS_AS(sobol_points(17, 4, 0), ConfigError);
  CHECK_THROWS_AS(sobol_points(2, 0, 0), ConfigError);
}

TEST_CASE("qmc_estimate") {
  const auto p = sobol_points(3, 64, 9);
  CHECK(qmc_estimate([](std::span<const double>) { return 1.0; }, p, 3) == 1.0);
  const auto q = sobol_points(1, 1024, 5);
  CHECK(std::abs(qmc_estimate([](std::span<const double> y) { return y[0]; }, q, 1) - 0.5) <= 1e-3);
  CHECK_THROWS(qmc_estimate(gaussian, std::span<const double>{}, 2));
}

TEST_CASE("scrambled Sobol beats plain Monte Carlo and improves with n") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double previous = 1e300;
  for (std::size_t n : {64u, 256u, 1024u}) {
    std::vector<double> rqmc, mc;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      rqmc.push_back(qmc_estimate(gaussian, sobol_points(2, n, 1000 + rep), 2));
      std::vector<double> pts(2 * n);
      for (double& v : pts) v = u(rng);
      mc.push_back(qmc_estimate(gaussian, pts, 2));
    }
    const double vq = sample_variance(rqmc);
    const double vm = sample_variance(mc);
    INFO("n=" << n << " rqmc " << vq << " mc " << vm);
    CHECK(vq <= vm);
    CHECK(vq < previous);
    previous = vq;
  }
}

TEST_CASE("full grids") {
  GridSpec spec;
  spec.points_per_dim = 3;
  const Grid g1 = make_grid(spec, 1);
  CHECK(std::vector<double>(g1.points().begin(), g1.points().end()) ==
        std::vector<double>{-2.0, 0.0, 2.0});

  spec.points_per_dim = 8;
  const Grid g4 = make_grid(spec, 4);
  CHECK(g4.size() == 4096);

  // Cartesian structure: every coordinate projection holds each lattice value
  // exactly N^(D-1) times and all points are distinct.
  const auto axis = lattice(8, -2.0, 2.0);
  CHECK(axis.front() == -2.0);
  CHECK(axis.back() == 2.0);
  for (std::size_t c = 0; c < 4; ++c) {
    std::map<double, int> counts;
    for (std::size_t i = 0; i < g4.size(); ++i) ++counts[g4.point(i)[c]];
    CHECK(counts.size() == 8);
    for (double v : axis) CHECK(counts[v] == 512);
  }
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < g4.size(); ++i)
    pts.emplace_back(g4.point(i).begin(), g4.point(i).end());
  std::sort(pts.begin(), pts.end());
  CHECK(std::adjacent_find(pts.begin(), pts.end()) == pts.end());
}

TEST_CASE("Sobol grids") {
  GridSpec spec;
  spec.kind = GridKind::Sobol;
  spec.points_per_dim = 2;
  spec.seed = 4;
  const Grid g = make_grid(spec, 2);
  CHECK(g.size() == 4);
  for (double v : g.points()) {
    CHECK(v >= -2.0);
    CHECK(v <= 2.0);
  }
  const Grid same = make_grid(spec, 2);
  CHECK(std::equal(g.points().begin(), g.points().end(), same.points().begin()));
  spec.seed = 5;
  const Grid other = make_grid(spec, 2);
  CHECK(!std::equal(g.points().begin(), g.points().end(), other.points().begin()));

  spec.points_per_dim = 3;
  CHECK(make_grid(spec, 4).size() == 81);
}

TEST_CASE("grid validation") {
  GridSpec spec;
  spec.points_per_dim = 8;
  CHECK_THROWS_WITH_AS(make_grid(spec, 8), doctest::Contains("exponentially"), ConfigError);
  spec.max_points = 1u << 24;
  CHECK_NOTHROW(spec.validate(8));
  spec = GridSpec{};
  spec.lo = 1.0;
  spec.hi = 1.0;
  CHECK_THROWS_AS(make_grid(spec, 2), ConfigError);
  spec = GridSpec{};
  spec.points_per_dim = 0;
  CHECK_THROWS_AS(make_grid(spec, 2), ConfigError);
  CHECK(GridSpec{}.label() == "F-8");
  CHECK(grid_kind_from_string("sobol") == GridKind::Sobol);
  CHECK_THROWS_AS(grid_kind_from_string("halton"), ConfigError);
}
