#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clkan/algebra.hpp"
#include "clkan/qmc.hpp"

namespace clkan {

enum class RbfKind { Naive, Clifford };
enum class NormKind { None, NodeWise, DimWise, ComponentWise };
enum class Mode { Train, Eval };
/// Distance inside the RBF kernel. NonDegenerate leaves out the blades that
/// square to zero, so it equals Euclidean whenever r = 0.
enum class RbfDistance { Euclidean, NonDegenerate };

std::string to_string(RbfKind kind);
std::string to_string(NormKind kind);
std::string to_string(RbfDistance distance);
RbfKind rbf_kind_from_string(const std::string& s);
NormKind norm_kind_from_string(const std::string& s);
RbfDistance rbf_distance_from_string(const std::string& s);

/// 1 for every coefficient that enters the kernel distance, 0 otherwise.
std::vector<double> rbf_mask(const Signature& sig, RbfDistance distance);

inline double silu(double t) { return t / (1.0 + std::exp(-t)); }

/// exp(-|x - g|^2)
double rbf_naive(const Multivector& x, const Multivector& g,
                 RbfDistance distance = RbfDistance::NonDegenerate);
/// (x - g) exp(-|x - g|^2)
Multivector rbf_clifford(const Multivector& x, const Multivector& g,
                         RbfDistance distance = RbfDistance::NonDegenerate);
/// w SiLU(x) + b, SiLU applied per coefficient, product is geometric.
Multivector clsilu(const Algebra& alg, const Multivector& x,
                   const Multivector& w, const Multivector& b);

/// Learnable function on one edge.
struct EdgeParams {
  std::vector<Multivector> rbf_weights;
  Multivector silu_w;
  Multivector silu_b;
  RbfKind rbf_kind = RbfKind::Clifford;
  RbfDistance distance = RbfDistance::NonDegenerate;
};

/// Per-g reference evaluation of one edge; the batched engine in Model is
/// checked against this.
Multivector edge_forward(const Algebra& alg, const EdgeParams& edge,
                         const Grid& grid, const Multivector& x);

/// Sizes of the normalisation blocks for one layer of `nodes` nodes.
struct NormShape {
  NormKind kind = NormKind::None;
  std::size_t nodes = 0;
  std::size_t dim = 0;

  std::size_t learnable_count() const;  // gamma and beta together
  std::size_t mean_count() const;
  std::size_t var_count() const;
  /// Number of values pooled into one variance estimate for a batch of B.
  std::size_t var_pool(std::size_t batch) const;
};

/// Batch normalisation state of one hidden layer.
struct NormState {
  NormShape shape;
  double epsilon = 1e-5;
  double momentum = 0.1;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  /// gamma = 1, beta = 0, running mean 0 and variance 1.
  static NormState fresh(NormShape shape, double epsilon = 1e-5,
                         double momentum = 0.1);
};

/// batch[s][k] is node k of sample s. Training mode normalises with batch
/// statistics and updates the running estimates; Eval uses the running ones.
std::vector<std::vector<Multivector>> batchnorm_forward(
    const std::vector<std::vector<Multivector>>& batch, NormState& state,
    Mode mode);

struct ModelConfig {
  Signature signature{0, 1, 0};
  std::vector<int> widths{1, 2, 1};
  GridSpec grid{};
  RbfKind rbf = RbfKind::Clifford;
  NormKind norm = NormKind::NodeWise;
  std::uint64_t seed = 0;
  double norm_epsilon = 1e-5;
  double norm_momentum = 0.1;
  RbfDistance distance = RbfDistance::NonDegenerate;

  void validate() const;
  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t edge_count() const;
};

/// Number of trainable reals: edge blocks of |G| D + 2 D plus the
/// normalisation learnables of every hidden layer.
std::size_t param_count(const ModelConfig& config);
std::size_t param_count(const ModelConfig& config, std::size_t grid_size);

struct EdgeView {
  std::span<double> rbf;     // |G| x D, row g = w_g
  std::span<double> silu_w;  // D
  std::span<double> silu_b;  // D
};

struct ConstEdgeView {
  std::span<const double> rbf;
  std::span<const double> silu_w;
  std::span<const double> silu_b;
};

struct NormParamView {
  std::span<double> gamma;
  std::span<double> beta;
};

struct ForwardCache;

/// A ClKAN: layers of edges carrying learnable Clifford-valued functions,
/// nodes summing their incoming edges, optional batch normalisation after
/// every hidden layer.
///
/// All trainable reals live in one flat vector: for each layer, edges ordered
/// by (source, target), each as [rbf weights | silu_w | silu_b]; after all
/// edges, for each hidden layer, [gamma... | beta...].
class Model {
 public:
  /// Parameters start at zero and normalisation at its fresh state.
  Model(ModelConfig config, Grid grid);

  /// Builds the grid from config.grid and initialises from config.seed.
  static Model create(const ModelConfig& config);

  /// RBF weights ~ N(0, 1/sqrt|G|) per coefficient, silu_w = 1, silu_b = 0,
  /// gamma = 1, beta = 0.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Algebra& algebra() const { return algebra_; }
  const Grid& grid() const { return grid_; }
  std::size_t dim() const { return algebra_.dimension(); }
  std::size_t layer_count() const { return config_.layer_count(); }
  std::size_t width(std::size_t layer) const {
    return static_cast<std::size_t>(config_.widths[layer]);
  }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t edge_size() const { return grid_.size() * dim() + 2 * dim(); }
  std::size_t edge_offset(std::size_t layer, std::size_t from,
                          std::size_t to) const;
  EdgeView edge(std::size_t layer, std::size_t from, std::size_t to);
  ConstEdgeView edge(std::size_t layer, std::size_t from, std::size_t to) const;
  EdgeParams edge_params(std::size_t layer, std::size_t from,
                         std::size_t to) const;
  void set_edge(std::size_t layer, std::size_t from, std::size_t to,
                const EdgeParams& edge);

  /// Hidden layers are 1..L-1; `layer` names the layer whose node values
  /// get normalised.
  bool has_norm(std::size_t layer) const;
  NormShape norm_shape(std::size_t layer) const;
  std::size_t norm_offset(std::size_t layer) const;
  NormParamView norm_params(std::size_t layer);
  std::vector<double>& running_mean(std::size_t layer) {
    return running_mean_[layer];
  }
  std::vector<double>& running_var(std::size_t layer) {
    return running_var_[layer];
  }
  const std::vector<double>& running_mean(std::size_t layer) const {
    return running_mean_[layer];
  }
  const std::vector<double>& running_var(std::size_t layer) const {
    return running_var_[layer];
  }
  void reset_running_stats();

  /// Batched forward pass. `inputs` holds B x n_0 x D values, the result
  /// B x n_L x D. Training mode updates running statistics; when `cache` is
  /// given it is filled for backward().
  std::vector<double> forward(std::span<const double> inputs, std::size_t batch,
                              Mode mode, ForwardCache* cache = nullptr);
  /// Inference-only forward; never touches running statistics.
  std::vector<double> predict(std::span<const double> inputs,
                              std::size_t batch) const;

  /// Accumulates dL/dparams into `grad` given dL/doutput (B x n_L x D) for
  /// the pass recorded in `cache`.
  void backward(const ForwardCache& cache, std::span<const double> grad_output,
                std::span<double> grad) const;

 private:
  struct BatchStats {
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> var;
  };
  std::vector<double> run(std::span<const double> inputs, std::size_t batch,
                          Mode mode, ForwardCache* cache,
                          BatchStats* stats) const;

  // Centres as seen by the kernel: only the coordinates that enter the
  // distance. A full grid collapses along the other axes, so several centres
  // share one kernel column; group[g] names it.
  struct KernelGrid {
    std::vector<std::size_t> coords;
    AlignedVector points;  // size x coords
    std::vector<double> axis;
    std::vector<std::size_t> group;
    std::size_t size = 0;
    bool full = false;
    bool collapsed = false;
  };
  void build_kernel();

  ModelConfig config_;
  Algebra algebra_;
  Grid grid_;
  KernelGrid kernel_;
  std::vector<double> params_;
  std::vector<std::size_t> layer_offset_;
  std::vector<std::size_t> norm_offset_;
  std::vector<std::vector<double>> running_mean_;
  std::vector<std::vector<double>> running_var_;
};

/// Intermediate values of one batched forward pass.
struct ForwardCache {
  struct Layer {
    std::vector<double> x;     // B x n x D layer input
    AlignedVector phi;  // n x B x K kernel values, K kernel columns
    AlignedVector act;   // n x B x cols, phi times stacked weights
    std::vector<double> silu;  // B x n x D
    std::vector<double> xhat;  // B x m x D normalised output (hidden only)
    std::vector<double> inv_std;
  };
  std::size_t batch = 0;
  std::vector<Layer> layers;
  /// Per layer, per source node: stacked weight matrix K x cols.
  std::vector<std::vector<AlignedVector>> stacked;
};

/// Convenience wrapper over Model::forward for multivector tuples.
/// inputs[s] holds n_0 multivectors; returns n_L multivectors per sample.
std::vector<std::vector<Multivector>> model_forward(
    Model& model, const std::vector<std::vector<Multivector>>& inputs,
    Mode mode = Mode::Eval);

}  // namespace clkan
