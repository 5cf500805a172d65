#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "clkan/datasets.hpp"
#include "clkan/network.hpp"

namespace clkan {

/// Thrown when a training step produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { Adam, GradientDescent };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
  double initial_lr = 0.1;
  double plateau_factor = 0.9;
  int plateau_patience = 20;
  double plateau_threshold = 0.001;
  int early_stop_window = 200;
  double early_stop_delta = 0.001;
  int folds = 5;
  std::size_t batch_size = 1024;
  int max_epochs = 2000;
  std::uint64_t base_seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  /// Evaluate the test split with the parameters of the best validation epoch.
  bool restore_best = true;

  void validate() const;
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
};

/// MSE = mean |pred - target|^2, MAE = mean |pred - target|, with the
/// coefficient norm.
Metrics mse_mae(std::span<const Multivector> pred,
                std::span<const Multivector> target);
/// Same on flat rows of D coefficients.
Metrics mse_mae(std::span<const double> pred, std::span<const double> target,
                std::size_t dim);

/// Loss and gradient of one batch; grads follow Model::parameters() layout.
struct GradientSet {
  double loss = 0.0;
  std::vector<double> grads;
};

/// Batch MSE and its exact gradient w.r.t. every trainable parameter. Runs a
/// training-mode forward pass (batch statistics; running estimates are
/// updated). Throws TrainingError on a non-finite loss. A workspace kept
/// across calls lets the forward pass reuse its buffers.
GradientSet backward(Model& model, std::span<const double> inputs,
                     std::span<const double> targets, std::size_t batch,
                     ForwardCache* workspace = nullptr);

/// Per-parameter optimiser state.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t size, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grads, double lr);
  OptimizerKind kind() const { return kind_; }
  std::size_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// Reduce-on-plateau: once the loss has gone `patience` epochs past the last
/// improvement (by more than `threshold` over the best so far), lr *= factor.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor = 0.9, int patience = 20,
                   double threshold = 0.001);

  double step(double val_loss);
  double lr() const { return lr_; }
  int reductions() const { return reductions_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double threshold_;
  double best_;
  int bad_epochs_ = 0;
  int reductions_ = 0;
};

/// True when the best loss of the last `window` epochs fails to improve on
/// the best loss before them by at least `min_delta`.
bool early_stop_check(std::span<const double> history, int window = 200,
                      double min_delta = 0.001);

struct FoldResult {
  int fold = 0;
  int epochs = 0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double best_val = 0.0;
  double test_mse = 0.0;
  double test_mae = 0.0;
};

struct Aggregate {
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  Aggregate aggregate;
};

struct EpochReport {
  int fold;
  int epoch;
  double train_loss;
  double val_loss;
  double lr;
};
using EpochCallback = std::function<void(const EpochReport&)>;
/// Receives each fold's model after training (best parameters restored).
using ModelCallback = std::function<void(int fold, const Model& model)>;

/// Mean and sample standard deviation of per-fold test metrics.
Aggregate aggregate(std::span<const FoldResult> folds);

/// Evaluation-mode metrics of a model on a dataset, chunked to bound memory.
Metrics evaluate(const Model& model, const Dataset& data,
                 std::size_t chunk = 1024);

/// Trains one model on `train`, scheduling and stopping on `val`, and scores
/// it on `test`. `seed` drives init, shuffling and the Sobol scramble.
FoldResult train_fold(const ModelConfig& model_config, const TrainConfig& cfg,
                      const Dataset& train, const Dataset& val,
                      const Dataset& test, int fold, std::uint64_t seed,
                      const EpochCallback& on_epoch = {},
                      Model* trained = nullptr);

/// k-fold cross-validation: the train/val set is permuted once with the base
/// seed and cut into k contiguous folds; fold i is trained from seed
/// base_seed + i and scored on the shared test set.
CrossValidation cross_validate(const ModelConfig& model_config,
                               const TrainConfig& cfg, const Dataset& train_val,
                               const Dataset& test,
                               const EpochCallback& on_epoch = {},
                               const ModelCallback& on_model = {});

}  // namespace clkan
