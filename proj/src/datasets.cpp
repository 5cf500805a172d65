#include "clkan/datasets.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "clkan/random.hpp"

namespace clkan {
namespace {

constexpr double kSampleLo = -2.0;
constexpr double kSampleHi = 2.0;
constexpr Signature kComplex{0, 1, 0};

std::uint64_t split_seed(std::uint64_t seed, Split split) {
  return split == Split::TrainVal ? seed : ~seed;
}

Multivector complex_sin(const Multivector& x) {
  const double a = x[0];
  const double b = x[1];
  return Multivector(kComplex,
                     {std::sin(a) * std::cosh(b), std::cos(a) * std::sinh(b)});
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::Square: return "square";
    case Task::Sin: return "sin";
    case Task::Mult: return "mult";
    case Task::SquareSquare: return "squaresquare";
    case Task::Holography: return "holography";
  }
  return "square";
}

Task task_from_string(const std::string& s) {
  if (s == "square") return Task::Square;
  if (s == "sin") return Task::Sin;
  if (s == "mult") return Task::Mult;
  if (s == "squaresquare") return Task::SquareSquare;
  if (s == "holography") return Task::Holography;
  throw ConfigError("unknown task '" + s +
                    "' (expected square, sin, mult, squaresquare or holography)");
}

std::size_t task_arity(Task task) {
  switch (task) {
    case Task::Square:
    case Task::Sin: return 1;
    case Task::Mult:
    case Task::SquareSquare: return 2;
    case Task::Holography: return 3;
  }
  return 1;
}

Multivector Dataset::input(std::size_t sample, std::size_t slot) const {
  const auto row = input_row(sample).subspan(slot * dim(), dim());
  return Multivector(signature, std::vector<double>(row.begin(), row.end()));
}

Multivector Dataset::target(std::size_t sample) const {
  const auto row = target_row(sample);
  return Multivector(signature, std::vector<double>(row.begin(), row.end()));
}

std::span<const double> Dataset::input_row(std::size_t sample) const {
  return std::span<const double>(inputs).subspan(sample * arity * dim(),
                                                 arity * dim());
}

std::span<const double> Dataset::target_row(std::size_t sample) const {
  return std::span<const double>(targets).subspan(sample * dim(), dim());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.signature = signature;
  out.arity = arity;
  out.name = name;
  out.seed = seed;
  out.inputs.reserve(indices.size() * arity * dim());
  out.targets.reserve(indices.size() * dim());
  for (std::size_t i : indices) {
    const auto in = input_row(i);
    const auto t = target_row(i);
    out.inputs.insert(out.inputs.end(), in.begin(), in.end());
    out.targets.insert(out.targets.end(), t.begin(), t.end());
  }
  return out;
}

Multivector evaluate_formula(const Algebra& alg, Task task,
                             std::span<const Multivector> in) {
  if (in.size() != task_arity(task))
    throw std::invalid_argument(to_string(task) + " takes " +
                                std::to_string(task_arity(task)) + " inputs");
  switch (task) {
    case Task::Square: return alg.product(in[0], in[0]);
    case Task::Sin:
      if (!(alg.signature() == kComplex))
        throw ConfigError("sin is only defined for the complex algebra Cl(0,1,0)");
      return complex_sin(in[0]);
    case Task::Mult: return alg.product(in[0], in[1]);
    case Task::SquareSquare: {
      const Multivector s = alg.product(in[0], in[0]) + alg.product(in[1], in[1]);
      return alg.product(s, s);
    }
    case Task::Holography: {
      if (!(alg.signature() == kComplex))
        throw ConfigError("holography is defined over Cl(0,1,0) only");
      const Multivector sum = in[1] + in[2];
      const double intensity = sum[0] * sum[0] + sum[1] * sum[1];
      return in[0] * intensity;
    }
  }
  throw std::logic_error("unhandled task");
}

Dataset gen_formula(Task task, Signature sig, std::size_t n_samples,
                    std::uint64_t seed, Split split) {
  if (task == Task::Sin && !(sig == kComplex))
    throw ConfigError("sin is only defined for the complex algebra Cl(0,1,0), got " +
                      sig.to_string());
  if (task == Task::Holography) return gen_holography(n_samples, seed, split);
  if (n_samples < 1) throw ConfigError("dataset needs at least one sample");
  const Algebra alg(sig);
  const std::size_t d = alg.dimension();
  const std::size_t arity = task_arity(task);
  Dataset data;
  data.signature = sig;
  data.arity = arity;
  data.name = to_string(task);
  data.seed = seed;
  data.inputs.resize(n_samples * arity * d);
  data.targets.resize(n_samples * d);

  auto rng = make_rng(split_seed(seed, split), Stream::Data);
  std::uniform_real_distribution<double> uniform(kSampleLo, kSampleHi);
  for (double& v : data.inputs) v = uniform(rng);

  std::vector<Multivector> in(arity);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t a = 0; a < arity; ++a) in[a] = data.input(s, a);
    const Multivector t = evaluate_formula(alg, task, in);
    std::copy(t.coeffs().begin(), t.coeffs().end(),
              data.targets.begin() + static_cast<std::ptrdiff_t>(s * d));
  }
  return data;
}

Dataset gen_holography(std::size_t n_samples, std::uint64_t seed, Split split) {
  if (n_samples < 1) throw ConfigError("dataset needs at least one sample");
  const Algebra alg(kComplex);
  Dataset data;
  data.signature = kComplex;
  data.arity = 3;
  data.name = "holography";
  data.seed = seed;
  data.inputs.resize(n_samples * 3 * 2);
  data.targets.resize(n_samples * 2);
  auto rng = make_rng(split_seed(seed, split), Stream::Data);
  std::uniform_real_distribution<double> uniform(kSampleLo, kSampleHi);
  for (double& v : data.inputs) v = uniform(rng);
  std::vector<Multivector> in(3);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t a = 0; a < 3; ++a) in[a] = data.input(s, a);
    const Multivector t = evaluate_formula(alg, Task::Holography, in);
    data.targets[s * 2] = t[0];
    data.targets[s * 2 + 1] = t[1];
  }
  return data;
}

Dataset generate(Task task, Signature sig, std::size_t n_samples,
                 std::uint64_t seed, Split split) {
  if (task == Task::Holography) {
    if (!(sig == kComplex))
      throw ConfigError("holography is defined over Cl(0,1,0) only, got " +
                        sig.to_string());
    return gen_holography(n_samples, seed, split);
  }
  return gen_formula(task, sig, n_samples, seed, split);
}

SampleCounts sample_counts(Signature sig, Task task) {
  if (task == Task::Holography) return {100000, 100000};
  // 5000 samples over [-2,2]^2; same density in D dimensions.
  const int d = static_cast<int>(sig.dimension());
  const double n = 5000.0 * std::pow(4.0, d - 2);
  const auto count = static_cast<std::size_t>(std::llround(std::max(n, 1.0)));
  return {count, count};
}

void write_csv(const Dataset& data, std::ostream& os) {
  const std::size_t d = data.dim();
  for (std::size_t a = 0; a < data.arity; ++a)
    for (std::size_t c = 0; c < d; ++c) os << 'x' << a << '_' << c << ',';
  for (std::size_t c = 0; c < d; ++c) os << 'y' << '_' << c << (c + 1 < d ? "," : "\n");
  const auto old = os.precision(17);
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (double v : data.input_row(s)) os << v << ',';
    const auto t = data.target_row(s);
    for (std::size_t c = 0; c < d; ++c) os << t[c] << (c + 1 < d ? "," : "\n");
  }
  os.precision(old);
}

Dataset read_csv(std::istream& is, Signature sig) {
  const std::size_t d = sig.dimension();
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("CSV is empty");
  std::size_t columns = 1;
  for (char ch : line) columns += ch == ',';
  if (columns < 2 * d || columns % d != 0)
    throw std::runtime_error("CSV header has " + std::to_string(columns) +
                             " columns, not a multiple of D=" + std::to_string(d));
  Dataset data;
  data.signature = sig;
  data.arity = columns / d - 1;
  data.name = "csv";
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("CSV row " + std::to_string(row) +
                                 ": bad number '" + cell + "'");
      }
      (col < data.arity * d ? data.inputs : data.targets).push_back(v);
      ++col;
    }
    if (col != columns)
      throw std::runtime_error("CSV row " + std::to_string(row) + " has " +
                               std::to_string(col) + " cells, expected " +
                               std::to_string(columns));
  }
  return data;
}

}  // namespace clkan
