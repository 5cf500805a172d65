#include <algorithm>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"

#include "clkan/algebra.hpp"

using namespace clkan;

namespace {

// Multiplies blade words generator by generator: appending e_k to a sorted
// word moves it left past every larger generator, one transposition each.
int insertion_sign(const Signature& sig, std::size_t a, std::size_t b) {
  std::vector<int> word;
  for (int i = 0; i < sig.generators(); ++i)
    if (a >> i & 1u) word.push_back(i);
  int sign = 1;
  for (int k = 0; k < sig.generators(); ++k) {
    if (!(b >> k & 1u)) continue;
    std::size_t pos = word.size();
    while (pos > 0 && word[pos - 1] > k) {
      --pos;
      sign = -sign;
    }
    if (pos > 0 && word[pos - 1] == k) {
      sign *= k < sig.p ? 1 : (k < sig.p + sig.q ? -1 : 0);
      word.erase(word.begin() + static_cast<std::ptrdiff_t>(pos - 1));
    } else {
      word.insert(word.begin() + static_cast<std::ptrdiff_t>(pos), k);
    }
  }
  return sign;
}

std::vector<Signature> small_signatures() {
  std::vector<Signature> out;
  for (int n = 1; n <= 4; ++n)
    for (int p = 0; p <= n; ++p)
      for (int q = 0; p + q <= n; ++q) out.push_back({p, q, n - p - q});
  return out;
}

Multivector random_mv(Signature sig, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> c(sig.dimension());
  for (double& v : c) v = u(rng);
  return Multivector(sig, c);
}

Multivector mv(Signature sig, std::vector<double> c) { return Multivector(sig, std::move(c)); }

}  // namespace

TEST_CASE("build_algebra dimensions and generator squares") {
  const Algebra complex({0, 1, 0});
  CHECK(complex.dimension() == 2);
  CHECK(complex.sign(1, 1) == -1);

  const Algebra degenerate({1, 0, 1});
  CHECK(degenerate.dimension() == 4);
  CHECK(degenerate.sign(2, 2) == 0);
  CHECK(degenerate.sign(1, 1) == 1);

  const Algebra plane({2, 0, 0});
  CHECK(plane.sign(3, 3) == -1);

  CHECK(Algebra({3, 2, 3}).dimension() == 256);
}

TEST_CASE("build_algebra rejects bad signatures") {
  CHECK_THROWS_AS(Algebra({0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(Algebra({5, 4, 0}), ConfigError);
  CHECK_THROWS_AS(Algebra({-1, 2, 0}), ConfigError);
}

TEST_CASE("Cayley table matches the insertion oracle for n <= 4") {
  for (const Signature& sig : small_signatures()) {
    const Algebra alg(sig);
    for (std::size_t a = 0; a < alg.dimension(); ++a)
      for (std::size_t b = 0; b < alg.dimension(); ++b) {
        INFO(sig.to_string() << " blades " << a << ", " << b);
        REQUIRE(alg.sign(a, b) == insertion_sign(sig, a, b));
        REQUIRE(blade_product_sign(sig, a, b) == insertion_sign(sig, a, b));
      }
  }
}

TEST_CASE("geometric product examples") {
  const Signature c{0, 1, 0};
  const Algebra complex(c);
  CHECK(complex.product(mv(c, {1, 1}), mv(c, {1, -1})) == mv(c, {2, 0}));

  const Signature h{0, 2, 0};
  const Algebra quat(h);
  CHECK(quat.product(Multivector::blade(h, 1), Multivector::blade(h, 2)) ==
        Multivector::blade(h, 3));
  CHECK(quat.product(Multivector::blade(h, 3), Multivector::blade(h, 3)) ==
        Multivector::scalar(h, -1));

  const Signature g{1, 0, 1};
  const Algebra deg(g);
  CHECK(deg.product(Multivector::blade(g, 2), Multivector::blade(g, 2)) ==
        Multivector::zero(g));
  CHECK(geometric_product(deg, Multivector::blade(g, 1), Multivector::blade(g, 1)) ==
        Multivector::scalar(g, 1));
}

TEST_CASE("geometric product is associative and distributive") {
  std::mt19937_64 rng(7);
  for (const Signature& sig : small_signatures()) {
    const Algebra alg(sig);
    for (int t = 0; t < 1000; ++t) {
      const auto a = random_mv(sig, rng);
      const auto b = random_mv(sig, rng);
      const auto c = random_mv(sig, rng);
      const auto lhs = alg.product(alg.product(a, b), c);
      const auto rhs = alg.product(a, alg.product(b, c));
      for (std::size_t k = 0; k < alg.dimension(); ++k)
        REQUIRE(std::abs(lhs[k] - rhs[k]) <= 1e-10);
      if (t < 50) {
        const auto d1 = alg.product(a, b + c);
        const auto d2 = alg.product(a, b) + alg.product(a, c);
        for (std::size_t k = 0; k < alg.dimension(); ++k)
          REQUIRE(std::abs(d1[k] - d2[k]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("basis vectors anticommute exactly") {
  for (const Signature& sig : small_signatures()) {
    const Algebra alg(sig);
    for (int i = 0; i < sig.generators(); ++i)
      for (int j = 0; j < sig.generators(); ++j) {
        if (i == j) continue;
        const auto ei = Multivector::blade(sig, std::size_t{1} << i);
        const auto ej = Multivector::blade(sig, std::size_t{1} << j);
        CHECK(alg.product(ei, ej) == alg.product(ej, ei) * -1.0);
      }
  }
}

TEST_CASE("Cl(0,1) is the complex numbers") {
  const Signature c{0, 1, 0};
  const Algebra alg(c);
  const double vals[] = {-2.0, -0.5, 0.0, 0.25, 1.0, 3.0};
  for (double a : vals)
    for (double b : vals)
      for (double x : vals)
        for (double y : vals) {
          const std::complex<double> z = std::complex<double>(a, b) * std::complex<double>(x, y);
          const auto p = alg.product(mv(c, {a, b}), mv(c, {x, y}));
          CHECK(p[0] == z.real());
          CHECK(p[1] == z.imag());
        }
}

TEST_CASE("Cl(0,2) reproduces the quaternion table") {
  // i = e1, j = e2, k = e12; quaternion units indexed 0..3 = 1, i, j, k.
  const int table_sign[4][4] = {
      {1, 1, 1, 1}, {1, -1, 1, -1}, {1, -1, -1, 1}, {1, 1, -1, -1}};
  const int table_unit[4][4] = {
      {0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
  const Signature h{0, 2, 0};
  const Algebra alg(h);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      const auto p = alg.product(Multivector::blade(h, a), Multivector::blade(h, b));
      CHECK(p == Multivector::blade(h, static_cast<std::size_t>(table_unit[a][b]),
                                    table_sign[a][b]));
    }
}

TEST_CASE("linear_combine") {
  const Signature c{0, 1, 0};
  const auto x = mv(c, {0.3, -1.7});
  CHECK(linear_combine(c, {{1.0, x}}) == x);
  const Signature s{2, 0, 0};
  const auto e1 = Multivector::blade(s, 1);
  CHECK(linear_combine(s, {{2.0, e1}, {-2.0, e1}}) == Multivector::zero(s));
  CHECK(linear_combine(c, {{0.5, mv(c, {2, 4})}}) == mv(c, {1, 2}));
  CHECK(linear_combine(c, std::span<const std::pair<double, Multivector>>{}) ==
        Multivector::zero(c));
}

TEST_CASE("norm") {
  const Signature c{0, 1, 0};
  CHECK(norm(mv(c, {3, 4})) == 5.0);
  CHECK(norm(Multivector::zero(c)) == 0.0);
  CHECK(norm(mv({0, 2, 0}, {1, 1, 1, 1})) == 2.0);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) CHECK(norm(random_mv({1, 0, 1}, rng)) > 0.0);
  CHECK(norm(Multivector::blade({1, 0, 1}, 2, 1e-300)) > 0.0);
}

TEST_CASE("grade projection") {
  const Signature s{2, 0, 0};
  const auto a = mv(s, {1, 2, 0, 3});
  CHECK(grade_project(a, 1) == mv(s, {0, 2, 0, 0}));
  std::mt19937_64 rng(5);
  for (const Signature& sig : small_signatures()) {
    const auto x = random_mv(sig, rng);
    Multivector sum = Multivector::zero(sig);
    for (int m = 0; m <= sig.generators(); ++m) sum += grade_project(x, m);
    CHECK(sum == x);
  }
  const Signature s3{3, 0, 0};
  CHECK(grade_project(Multivector::blade(s3, 7), 3) == Multivector::blade(s3, 7));
  CHECK_THROWS_AS(grade_project(a, 3), std::out_of_range);
  CHECK_THROWS_AS(grade_project(a, -1), std::out_of_range);
}

TEST_CASE("mixing algebras is a hard failure") {
  const auto a = Multivector::scalar({0, 1, 0}, 1);
  const auto b = Multivector::scalar({1, 0, 0}, 1);
  CHECK_THROWS_AS(a + b, std::logic_error);
  CHECK_THROWS_AS(Algebra({0, 1, 0}).product(a, b), std::logic_error);
}

TEST_CASE("a flipped table sign is visible") {
  const Algebra alg({0, 2, 0});
  const Algebra bad = alg.with_sign_flipped(3, 3);
  CHECK(bad.sign(3, 3) == -alg.sign(3, 3));
  CHECK(bad.sign(1, 2) == alg.sign(1, 2));
}
