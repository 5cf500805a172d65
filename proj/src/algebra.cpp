#include "clkan/algebra.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace clkan {

std::string Signature::to_string() const {
  std::ostringstream os;
  os << "Cl(" << p << "," << q << "," << r << ")";
  return os.str();
}

Multivector::Multivector(Signature sig, std::vector<double> coeffs)
    : sig_(sig), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != sig_.dimension())
    throw std::invalid_argument("multivector for " + sig_.to_string() +
                                " needs " + std::to_string(sig_.dimension()) +
                                " coefficients, got " +
                                std::to_string(coeffs_.size()));
}

Multivector Multivector::zero(Signature sig) {
  return Multivector(sig, std::vector<double>(sig.dimension(), 0.0));
}

Multivector Multivector::scalar(Signature sig, double value) {
  return blade(sig, 0, value);
}

Multivector Multivector::blade(Signature sig, std::size_t index, double value) {
  Multivector m = zero(sig);
  if (index >= m.size()) throw std::out_of_range("blade index out of range");
  m.coeffs_[index] = value;
  return m;
}

void Multivector::check_same(const Multivector& o) const {
  if (!(sig_ == o.sig_) || coeffs_.size() != o.coeffs_.size())
    throw std::logic_error("multivector algebra mismatch: " + sig_.to_string() +
                           " vs " + o.sig_.to_string());
}

Multivector& Multivector::operator+=(const Multivector& o) {
  check_same(o);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
  return *this;
}

Multivector& Multivector::operator-=(const Multivector& o) {
  check_same(o);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
  return *this;
}

Multivector& Multivector::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

int blade_product_sign(const Signature& sig, std::size_t a, std::size_t b) {
  // Each generator of b has to move left past every higher generator of a.
  int swaps = 0;
  for (std::size_t s = a >> 1; s != 0; s >>= 1) swaps += std::popcount(s & b);
  int sign = (swaps & 1) ? -1 : 1;
  for (std::size_t common = a & b; common != 0; common &= common - 1) {
    sign *= sig.square_of(std::countr_zero(common));
    if (sign == 0) break;
  }
  return sign;
}

Algebra::Algebra(Signature sig) : sig_(sig), dim_(0) {
  if (sig.p < 0 || sig.q < 0 || sig.r < 0)
    throw ConfigError("signature counts must be non-negative, got " +
                      sig.to_string());
  const int n = sig.generators();
  if (n < 1 || n > kMaxGenerators)
    throw ConfigError("signature " + sig.to_string() + " has " +
                      std::to_string(n) + " generators; supported range is 1.." +
                      std::to_string(kMaxGenerators));
  dim_ = sig.dimension();
  signs_.resize(dim_ * dim_);
  for (std::size_t a = 0; a < dim_; ++a)
    for (std::size_t b = 0; b < dim_; ++b)
      signs_[a * dim_ + b] =
          static_cast<std::int8_t>(blade_product_sign(sig, a, b));
}

void Algebra::check(const Multivector& m) const {
  if (!(m.signature() == sig_) || m.size() != dim_)
    throw std::logic_error("multivector from " + m.signature().to_string() +
                           " used with " + sig_.to_string());
}

Multivector Algebra::product(const Multivector& a, const Multivector& b) const {
  check(a);
  check(b);
  Multivector out = Multivector::zero(sig_);
  product_add(a.coeffs(), b.coeffs(), out.coeffs());
  return out;
}

void Algebra::product_add(std::span<const double> a, std::span<const double> b,
                          std::span<double> out) const {
  const std::int8_t* s = signs_.data();
  for (std::size_t i = 0; i < dim_; ++i, s += dim_) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    for (std::size_t j = 0; j < dim_; ++j) out[i ^ j] += s[j] * ai * b[j];
  }
}

void Algebra::pullback_left(std::span<const double> gc,
                            std::span<const double> b,
                            std::span<double> ga) const {
  const std::int8_t* s = signs_.data();
  for (std::size_t i = 0; i < dim_; ++i, s += dim_) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) acc += s[j] * gc[i ^ j] * b[j];
    ga[i] += acc;
  }
}

void Algebra::pullback_right(std::span<const double> gc,
                             std::span<const double> a,
                             std::span<double> gb) const {
  const std::int8_t* s = signs_.data();
  for (std::size_t i = 0; i < dim_; ++i, s += dim_) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    for (std::size_t j = 0; j < dim_; ++j) gb[j] += s[j] * gc[i ^ j] * ai;
  }
}

Algebra Algebra::with_sign_flipped(std::size_t a, std::size_t b) const {
  Algebra copy = *this;
  auto& s = copy.signs_.at(a * dim_ + b);
  s = static_cast<std::int8_t>(s == 0 ? 1 : -s);
  return copy;
}

Multivector geometric_product(const Algebra& alg, const Multivector& a,
                              const Multivector& b) {
  return alg.product(a, b);
}

Multivector linear_combine(
    Signature sig, std::span<const std::pair<double, Multivector>> terms) {
  Multivector out = Multivector::zero(sig);
  for (const auto& [w, m] : terms) {
    if (!(m.signature() == sig))
      throw std::logic_error("linear_combine: term from " +
                             m.signature().to_string() + " in " +
                             sig.to_string());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * m[k];
  }
  return out;
}

Multivector linear_combine(
    Signature sig, std::initializer_list<std::pair<double, Multivector>> terms) {
  return linear_combine(
      sig, std::span<const std::pair<double, Multivector>>(terms.begin(),
                                                           terms.size()));
}

double norm(std::span<const double> coeffs) {
  double big = 0.0;
  for (double c : coeffs) big = std::max(big, std::abs(c));
  if (big == 0.0 || !std::isfinite(big)) return big;
  double s = 0.0;
  if (big > 1e-150 && big < 1e150) {
    for (double c : coeffs) s += c * c;
    return std::sqrt(s);
  }
  for (double c : coeffs) s += (c / big) * (c / big);
  return big * std::sqrt(s);
}

double norm(const Multivector& a) { return norm(a.coeffs()); }

Multivector grade_project(const Multivector& a, int m) {
  const int n = a.signature().generators();
  if (m < 0 || m > n)
    throw std::out_of_range("grade " + std::to_string(m) + " outside 0.." +
                            std::to_string(n));
  Multivector out = a;
  for (std::size_t k = 0; k < out.size(); ++k)
    if (std::popcount(k) != m) out[k] = 0.0;
  return out;
}

}  // namespace clkan
