#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace clkan {

/// Raised for invalid user-facing configuration (signatures, grid sizes, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest supported generator count n = p + q + r (D = 2^n <= 256).
inline constexpr int kMaxGenerators = 8;

/// Counts of basis vectors squaring to +1, -1 and 0.
struct Signature {
  int p = 0;
  int q = 0;
  int r = 0;

  int generators() const { return p + q + r; }
  std::size_t dimension() const { return std::size_t{1} << generators(); }
  /// Square of basis vector e_{i+1}: +1, -1 or 0.
  int square_of(int i) const { return i < p ? 1 : (i < p + q ? -1 : 0); }

  std::string to_string() const;
  friend bool operator==(const Signature&, const Signature&) = default;
};

/// Dense multivector. Coefficient k belongs to the blade whose generators are
/// the set bits of k, so index 0 is the scalar and D-1 the pseudoscalar.
class Multivector {
 public:
  Multivector() = default;
  Multivector(Signature sig, std::vector<double> coeffs);
  static Multivector zero(Signature sig);
  static Multivector scalar(Signature sig, double value);
  static Multivector blade(Signature sig, std::size_t index, double value = 1.0);

  const Signature& signature() const { return sig_; }
  std::size_t size() const { return coeffs_.size(); }
  double operator[](std::size_t k) const { return coeffs_[k]; }
  double& operator[](std::size_t k) { return coeffs_[k]; }
  std::span<const double> coeffs() const { return coeffs_; }
  std::span<double> coeffs() { return coeffs_; }

  Multivector& operator+=(const Multivector& o);
  Multivector& operator-=(const Multivector& o);
  Multivector& operator*=(double s);
  friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
  friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
  friend Multivector operator*(Multivector a, double s) { return a *= s; }
  friend Multivector operator*(double s, Multivector a) { return a *= s; }
  friend bool operator==(const Multivector&, const Multivector&) = default;

 private:
  void check_same(const Multivector& o) const;

  Signature sig_{};
  std::vector<double> coeffs_;
};

/// Cl(p,q,r) with its precomputed Cayley table. Immutable after construction.
class Algebra {
 public:
  explicit Algebra(Signature sig);

  const Signature& signature() const { return sig_; }
  std::size_t dimension() const { return dim_; }
  int generators() const { return sig_.generators(); }

  /// Sign of e_a e_b = sign * e_{a^b}; zero when a degenerate generator repeats.
  int sign(std::size_t a, std::size_t b) const { return signs_[a * dim_ + b]; }
  std::span<const std::int8_t> signs() const { return signs_; }

  Multivector product(const Multivector& a, const Multivector& b) const;

  // Raw kernels over coefficient spans of length dimension(). These back the
  // network hot loops; they do not check signatures.

  /// out += a b
  void product_add(std::span<const double> a, std::span<const double> b,
                   std::span<double> out) const;
  /// For c = a b and upstream gradient gc: ga += dL/da.
  void pullback_left(std::span<const double> gc, std::span<const double> b,
                     std::span<double> ga) const;
  /// For c = a b and upstream gradient gc: gb += dL/db.
  void pullback_right(std::span<const double> gc, std::span<const double> a,
                      std::span<double> gb) const;

  /// Copy with one table sign negated. Only meant for fault-injection tests.
  Algebra with_sign_flipped(std::size_t a, std::size_t b) const;

 private:
  void check(const Multivector& m) const;

  Signature sig_;
  std::size_t dim_;
  std::vector<std::int8_t> signs_;
};

/// Sign of the product of basis blades a and b via swap counting.
int blade_product_sign(const Signature& sig, std::size_t a, std::size_t b);

Multivector geometric_product(const Algebra& alg, const Multivector& a,
                              const Multivector& b);

/// Weighted sum of multivectors; returns the zero multivector of `sig` when
/// `terms` is empty.
Multivector linear_combine(
    Signature sig, std::span<const std::pair<double, Multivector>> terms);
Multivector linear_combine(
    Signature sig, std::initializer_list<std::pair<double, Multivector>> terms);

/// Euclidean norm of the coefficient vector.
double norm(const Multivector& a);
double norm(std::span<const double> coeffs);

/// Keeps the grade-m part of `a`.
Multivector grade_project(const Multivector& a, int m);

}  // namespace clkan
