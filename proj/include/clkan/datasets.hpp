#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clkan/algebra.hpp"

namespace clkan {

enum class Task { Square, Sin, Mult, SquareSquare, Holography };

std::string to_string(Task task);
Task task_from_string(const std::string& s);
/// Number of multivector inputs the task's formula takes.
std::size_t task_arity(Task task);

/// Which split a generated dataset is for; splits draw from separate streams.
enum class Split { TrainVal, Test };

/// Samples with `arity` multivector inputs and one multivector target, stored
/// flat: inputs are N x arity x D, targets N x D.
struct Dataset {
  Signature signature{0, 1, 0};
  std::size_t arity = 1;
  std::vector<double> inputs;
  std::vector<double> targets;
  std::string name;
  std::uint64_t seed = 0;

  std::size_t dim() const { return signature.dimension(); }
  std::size_t size() const { return targets.size() / dim(); }
  Multivector input(std::size_t sample, std::size_t slot) const;
  Multivector target(std::size_t sample) const;
  std::span<const double> input_row(std::size_t sample) const;
  std::span<const double> target_row(std::size_t sample) const;
  /// Samples in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Inputs i.i.d. uniform over [-2, 2] per coefficient; targets from the
/// formula evaluated with the geometric product.
Dataset gen_formula(Task task, Signature sig, std::size_t n_samples,
                    std::uint64_t seed, Split split = Split::TrainVal);
/// H = E_hat * |E_R + E_0|^2 over the complex numbers Cl(0,1); inputs are
/// (E_hat, E_R, E_0).
Dataset gen_holography(std::size_t n_samples, std::uint64_t seed,
                       Split split = Split::TrainVal);
/// Dispatches to gen_formula or gen_holography.
Dataset generate(Task task, Signature sig, std::size_t n_samples,
                 std::uint64_t seed, Split split = Split::TrainVal);

/// Reference target for one sample, computed from multivectors.
Multivector evaluate_formula(const Algebra& alg, Task task,
                             std::span<const Multivector> inputs);

struct SampleCounts {
  std::size_t train_val = 0;
  std::size_t test = 0;
};

/// Default dataset sizes: 5000 per split for 2-D synthetic tasks, scaled by
/// 4^(D-2) to keep the sampling density of [-2,2]^D, and 100000 for
/// holography.
SampleCounts sample_counts(Signature sig, Task task);

/// One row per sample: inputs in blade order per input, then the target.
/// Floats are written with 17 significant digits.
void write_csv(const Dataset& data, std::ostream& os);
Dataset read_csv(std::istream& is, Signature sig);

}  // namespace clkan
