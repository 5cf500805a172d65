#include "clkan/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "clkan/random.hpp"

namespace clkan {
namespace {

struct Snapshot {
  std::vector<double> params;
  std::vector<std::vector<double>> running_mean;
  std::vector<std::vector<double>> running_var;

  static Snapshot of(const Model& model) {
    Snapshot s;
    s.params.assign(model.parameters().begin(), model.parameters().end());
    for (std::size_t l = 0; l <= model.layer_count(); ++l) {
      s.running_mean.push_back(model.running_mean(l));
      s.running_var.push_back(model.running_var(l));
    }
    return s;
  }

  void restore(Model& model) const {
    std::copy(params.begin(), params.end(), model.parameters().begin());
    for (std::size_t l = 0; l <= model.layer_count(); ++l) {
      model.running_mean(l) = running_mean[l];
      model.running_var(l) = running_var[l];
    }
  }
};

void gather(const Dataset& data, std::span<const std::size_t> rows,
            std::vector<double>& inputs, std::vector<double>& targets) {
  inputs.clear();
  targets.clear();
  for (std::size_t r : rows) {
    const auto in = data.input_row(r);
    const auto t = data.target_row(r);
    inputs.insert(inputs.end(), in.begin(), in.end());
    targets.insert(targets.end(), t.begin(), t.end());
  }
}

// Batch boundaries over n samples; a trailing batch of one sample is merged
// into its predecessor so batch statistics stay defined.
std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> bounds{0};
  for (std::size_t start = 0; start < n; start += batch)
    bounds.push_back(std::min(n, start + batch));
  if (bounds.size() > 2 && bounds[bounds.size() - 1] - bounds[bounds.size() - 2] < 2)
    bounds.erase(bounds.end() - 2);
  return bounds;
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd" || s == "gd") return OptimizerKind::GradientDescent;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
    throw ConfigError("plateau factor must lie in (0, 1)");
  if (plateau_patience < 0) throw ConfigError("plateau patience must be >= 0");
  if (!(plateau_threshold >= 0.0))
    throw ConfigError("plateau threshold must be >= 0");
  if (early_stop_window < 1) throw ConfigError("early-stop window must be >= 1");
  if (!(early_stop_delta >= 0.0)) throw ConfigError("early-stop delta must be >= 0");
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
}

Metrics mse_mae(std::span<const double> pred, std::span<const double> target,
                std::size_t dim) {
  if (pred.size() != target.size())
    throw std::invalid_argument("prediction and target sizes differ");
  if (pred.empty() || dim == 0) throw std::invalid_argument("empty batch");
  const std::size_t n = pred.size() / dim;
  double se = 0.0;
  double ae = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double e = pred[s * dim + c] - target[s * dim + c];
      sq += e * e;
    }
    se += sq;
    ae += std::sqrt(sq);
  }
  return {se / static_cast<double>(n), ae / static_cast<double>(n)};
}

Metrics mse_mae(std::span<const Multivector> pred,
                std::span<const Multivector> target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("prediction and target counts differ");
  if (pred.empty()) throw std::invalid_argument("empty batch");
  double se = 0.0;
  double ae = 0.0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const double e = norm(pred[s] - target[s]);
    se += e * e;
    ae += e;
  }
  const auto n = static_cast<double>(pred.size());
  return {se / n, ae / n};
}

GradientSet backward(Model& model, std::span<const double> inputs,
                     std::span<const double> targets, std::size_t batch,
                     ForwardCache* workspace) {
  const std::size_t out_size = batch * model.width(model.layer_count()) * model.dim();
  if (targets.size() != out_size)
    throw std::invalid_argument("targets have " + std::to_string(targets.size()) +
                                " values; expected " + std::to_string(out_size));
  ForwardCache local;
  ForwardCache& cache = workspace ? *workspace : local;
  const auto pred = model.forward(inputs, batch, Mode::Train, &cache);
  GradientSet out;
  std::vector<double> gout(pred.size());
  const double scale = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - targets[i];
    out.loss += e * e;
    gout[i] = 2.0 * e * scale;
  }
  out.loss *= scale;
  if (!std::isfinite(out.loss))
    throw TrainingError("non-finite training loss (" + std::to_string(out.loss) +
                        ") on a batch of " + std::to_string(batch));
  out.grads.assign(model.parameters().size(), 0.0);
  model.backward(cache, gout, out.grads);
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, std::size_t size, double beta1,
                     double beta2, double eps)
    : kind_(kind), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (kind_ == OptimizerKind::Adam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grads,
                     double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: parameter and gradient sizes differ");
  ++t_;
  if (kind_ == OptimizerKind::GradientDescent) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    return;
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("optimizer state does not match parameters");
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double mh = m_[i] / c1;
    const double vh = v_[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps_);
  }
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience,
                                   double threshold)
    : lr_(lr),
      factor_(factor),
      patience_(patience),
      threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ - threshold_) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ > patience_) {
    lr_ *= factor_;
    ++reductions_;
    bad_epochs_ = 0;
  }
  return lr_;
}

bool early_stop_check(std::span<const double> history, int window,
                      double min_delta) {
  const auto w = static_cast<std::size_t>(window);
  if (history.size() <= w) return false;
  const auto split = history.end() - static_cast<std::ptrdiff_t>(w);
  const double prior = *std::min_element(history.begin(), split);
  const double recent = *std::min_element(split, history.end());
  return !(recent <= prior - min_delta);
}

Aggregate aggregate(std::span<const FoldResult> folds) {
  Aggregate a;
  if (folds.empty()) return a;
  const auto n = static_cast<double>(folds.size());
  for (const auto& f : folds) {
    a.mse_mean += f.test_mse;
    a.mae_mean += f.test_mae;
  }
  a.mse_mean /= n;
  a.mae_mean /= n;
  if (folds.size() > 1) {
    for (const auto& f : folds) {
      a.mse_std += (f.test_mse - a.mse_mean) * (f.test_mse - a.mse_mean);
      a.mae_std += (f.test_mae - a.mae_mean) * (f.test_mae - a.mae_mean);
    }
    a.mse_std = std::sqrt(a.mse_std / (n - 1.0));
    a.mae_std = std::sqrt(a.mae_std / (n - 1.0));
  }
  return a;
}

Metrics evaluate(const Model& model, const Dataset& data, std::size_t chunk) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if (data.arity != model.width(0))
    throw std::invalid_argument("dataset has " + std::to_string(data.arity) +
                                " inputs per sample, model expects " +
                                std::to_string(model.width(0)));
  if (model.width(model.layer_count()) != 1)
    throw std::invalid_argument("evaluation needs a single-output model");
  const std::size_t d = data.dim();
  const std::size_t in_row = data.arity * d;
  std::vector<double> pred;
  pred.reserve(data.targets.size());
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t b = std::min(chunk, data.size() - start);
    const auto out = model.predict(
        std::span<const double>(data.inputs).subspan(start * in_row, b * in_row), b);
    pred.insert(pred.end(), out.begin(), out.end());
  }
  return mse_mae(pred, data.targets, d);
}

FoldResult train_fold(const ModelConfig& model_config, const TrainConfig& cfg,
                      const Dataset& train, const Dataset& val,
                      const Dataset& test, int fold, std::uint64_t seed,
                      const EpochCallback& on_epoch, Model* trained) {
  cfg.validate();
  if (train.size() < 2) throw ConfigError("training split needs at least 2 samples");
  ModelConfig mc = model_config;
  mc.seed = seed;
  mc.grid.seed = seed;
  Model model = Model::create(mc);
  Optimizer opt(cfg.optimizer, model.parameters().size());
  PlateauScheduler sched(cfg.initial_lr, cfg.plateau_factor, cfg.plateau_patience,
                         cfg.plateau_threshold);
  auto rng = make_rng(seed, Stream::Shuffle);

  FoldResult result;
  result.fold = fold;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bounds = batch_bounds(train.size(), cfg.batch_size);
  std::vector<double> inputs, targets;
  ForwardCache workspace;
  double best = std::numeric_limits<double>::infinity();
  Snapshot best_state = Snapshot::of(model);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = sched.lr();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::span<const std::size_t> rows(order.data() + bounds[b],
                                              bounds[b + 1] - bounds[b]);
      gather(train, rows, inputs, targets);
      const GradientSet gs = backward(model, inputs, targets, rows.size(), &workspace);
      opt.step(model.parameters(), gs.grads, lr);
      loss_sum += gs.loss * static_cast<double>(rows.size());
    }
    const double train_loss = loss_sum / static_cast<double>(train.size());
    const double val_loss = evaluate(model, val).mse;
    if (!std::isfinite(val_loss))
      throw TrainingError("non-finite validation loss in fold " +
                          std::to_string(fold) + " at epoch " +
                          std::to_string(epoch));
    result.train_loss.push_back(train_loss);
    result.val_loss.push_back(val_loss);
    result.epochs = epoch + 1;
    if (val_loss < best) {
      best = val_loss;
      if (cfg.restore_best) best_state = Snapshot::of(model);
    }
    sched.step(val_loss);
    if (on_epoch) on_epoch({fold, epoch, train_loss, val_loss, lr});
    if (early_stop_check(result.val_loss, cfg.early_stop_window,
                         cfg.early_stop_delta))
      break;
  }

  if (cfg.restore_best) best_state.restore(model);
  result.best_val = best;
  const Metrics m = evaluate(model, test);
  result.test_mse = m.mse;
  result.test_mae = m.mae;
  if (trained) *trained = std::move(model);
  return result;
}

CrossValidation cross_validate(const ModelConfig& model_config,
                               const TrainConfig& cfg, const Dataset& train_val,
                               const Dataset& test, const EpochCallback& on_epoch,
                               const ModelCallback& on_model) {
  cfg.validate();
  model_config.validate();
  const std::size_t n = train_val.size();
  const auto k = static_cast<std::size_t>(cfg.folds);
  if (k > n)
    throw ConfigError(std::to_string(k) + " folds requested for " +
                      std::to_string(n) + " samples");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_rng(cfg.base_seed, Stream::Split);
  std::shuffle(perm.begin(), perm.end(), rng);

  CrossValidation cv;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t lo = i * n / k;
    const std::size_t hi = (i + 1) * n / k;
    std::vector<std::size_t> val_idx(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                     perm.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<std::size_t> train_idx;
    train_idx.reserve(n - val_idx.size());
    train_idx.insert(train_idx.end(), perm.begin(),
                     perm.begin() + static_cast<std::ptrdiff_t>(lo));
    train_idx.insert(train_idx.end(), perm.begin() + static_cast<std::ptrdiff_t>(hi),
                     perm.end());
    const Dataset train = train_val.subset(train_idx);
    const Dataset val = train_val.subset(val_idx);
    if (on_model) {
      Model model = Model::create(model_config);
      cv.folds.push_back(train_fold(model_config, cfg, train, val, test,
                                    static_cast<int>(i), cfg.base_seed + i,
                                    on_epoch, &model));
      on_model(static_cast<int>(i), model);
    } else {
      cv.folds.push_back(train_fold(model_config, cfg, train, val, test,
                                    static_cast<int>(i), cfg.base_seed + i,
                                    on_epoch));
    }
  }
  cv.aggregate = aggregate(cv.folds);
  return cv;
}

}  // namespace clkan
