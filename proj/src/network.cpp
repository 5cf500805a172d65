#include "clkan/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <random>
#include <stdexcept>

#include "clkan/random.hpp"

namespace clkan {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

double silu_grad(double t) {
  const double sig = 1.0 / (1.0 + std::exp(-t));
  return sig * (1.0 + t * (1.0 - sig));
}

void check_same_algebra(const Multivector& a, const Multivector& b) {
  if (!(a.signature() == b.signature()))
    throw std::logic_error("multivectors from " + a.signature().to_string() +
                           " and " + b.signature().to_string());
}

// Index helpers shared by the normalisation kernels. Entry (s, k, c) of a
// B x m x D block belongs to one mean unit, one variance unit and one affine
// unit depending on the scheme.
struct NormIndex {
  NormShape shape;

  std::size_t mean(std::size_t k, std::size_t c) const {
    return shape.kind == NormKind::DimWise ? c : k * shape.dim + c;
  }
  std::size_t var(std::size_t k, std::size_t c) const {
    switch (shape.kind) {
      case NormKind::NodeWise: return k;
      case NormKind::DimWise: return c;
      default: return k * shape.dim + c;
    }
  }
  std::size_t affine(std::size_t k, std::size_t c) const { return var(k, c); }
  bool shifts(std::size_t c) const {
    return shape.kind != NormKind::NodeWise || c == 0;
  }
  std::size_t mean_pool(std::size_t batch) const {
    return shape.kind == NormKind::DimWise ? batch * shape.nodes : batch;
  }
};

// Normalises z (B x m x D) into y. In training mode batch statistics are used
// and returned through batch_mean / batch_var (unbiased); otherwise the
// running statistics are applied. xhat and inv_std are filled for backward.
void norm_forward(const NormShape& shape, std::size_t batch,
                  std::span<const double> z, std::span<const double> gamma,
                  std::span<const double> beta, double eps, Mode mode,
                  std::span<const double> running_mean,
                  std::span<const double> running_var, std::span<double> y,
                  std::span<double> xhat, std::span<double> inv_std,
                  std::span<double> batch_mean, std::span<double> batch_var) {
  const NormIndex idx{shape};
  const std::size_t m = shape.nodes;
  const std::size_t dim = shape.dim;
  std::vector<double> mean(shape.mean_count(), 0.0);
  std::vector<double> var(shape.var_count(), 0.0);

  if (mode == Mode::Train) {
    if (batch < 2)
      throw std::invalid_argument(
          "batch normalisation in training mode needs at least 2 samples");
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t c = 0; c < dim; ++c)
          mean[idx.mean(k, c)] += z[(s * m + k) * dim + c];
    const double inv_mean_pool = 1.0 / static_cast<double>(idx.mean_pool(batch));
    for (double& v : mean) v *= inv_mean_pool;
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t c = 0; c < dim; ++c) {
          const double d = z[(s * m + k) * dim + c] - mean[idx.mean(k, c)];
          var[idx.var(k, c)] += d * d;
        }
    const double pool = static_cast<double>(shape.var_pool(batch));
    for (std::size_t u = 0; u < var.size(); ++u) {
      var[u] /= pool;
      if (!batch_var.empty()) batch_var[u] = var[u] * pool / (pool - 1.0);
    }
    if (!batch_mean.empty()) std::copy(mean.begin(), mean.end(), batch_mean.begin());
  } else {
    std::copy(running_mean.begin(), running_mean.end(), mean.begin());
    std::copy(running_var.begin(), running_var.end(), var.begin());
  }

  for (std::size_t u = 0; u < var.size(); ++u)
    inv_std[u] = 1.0 / std::sqrt(var[u] + eps);

  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t c = 0; c < dim; ++c) {
        const std::size_t e = (s * m + k) * dim + c;
        const double h = (z[e] - mean[idx.mean(k, c)]) * inv_std[idx.var(k, c)];
        xhat[e] = h;
        const std::size_t a = idx.affine(k, c);
        y[e] = gamma[a] * h + (idx.shifts(c) ? beta[a] : 0.0);
      }
}

// Backward of norm_forward in training mode.
void norm_backward(const NormShape& shape, std::size_t batch,
                   std::span<const double> gy, std::span<const double> xhat,
                   std::span<const double> inv_std,
                   std::span<const double> gamma, std::span<double> gz,
                   std::span<double> ggamma, std::span<double> gbeta) {
  const NormIndex idx{shape};
  const std::size_t m = shape.nodes;
  const std::size_t dim = shape.dim;
  std::vector<double> mean_g(shape.mean_count(), 0.0);
  std::vector<double> mean_gx(shape.var_count(), 0.0);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t c = 0; c < dim; ++c) {
        const std::size_t e = (s * m + k) * dim + c;
        const std::size_t a = idx.affine(k, c);
        ggamma[a] += gy[e] * xhat[e];
        if (idx.shifts(c)) gbeta[a] += gy[e];
        const double g = gamma[a] * gy[e];
        mean_g[idx.mean(k, c)] += g;
        mean_gx[idx.var(k, c)] += g * xhat[e];
      }
  const double inv_mean_pool = 1.0 / static_cast<double>(idx.mean_pool(batch));
  const double inv_var_pool = 1.0 / static_cast<double>(shape.var_pool(batch));
  for (double& v : mean_g) v *= inv_mean_pool;
  for (double& v : mean_gx) v *= inv_var_pool;
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t c = 0; c < dim; ++c) {
        const std::size_t e = (s * m + k) * dim + c;
        const std::size_t a = idx.affine(k, c);
        const std::size_t v = idx.var(k, c);
        gz[e] = inv_std[v] * (gamma[a] * gy[e] - mean_g[idx.mean(k, c)] -
                              xhat[e] * mean_gx[v]);
      }
}

// phi[s][g] = exp(-|x_s - g|^2) for one node over a batch; x_s is found at
// x + s * stride and only the coordinates in `coords` count. Centres are
// given in the same reduced coordinates. Full grids factorise the Gaussian
// over coordinates.
struct PhiScratch {
  AlignedVector axis_exp;
  std::vector<double> current;
  std::vector<double> next;
};

struct KernelSpec {
  std::span<const std::size_t> coords;
  std::span<const double> points;
  std::span<const double> axis;
  std::size_t size = 0;
  bool full = false;
};

void compute_phi(const KernelSpec& kernel, const double* x, std::size_t stride,
                 std::size_t batch, double* phi, PhiScratch& scratch) {
  const std::size_t dim = kernel.coords.size();
  const std::size_t size = kernel.size;
  const std::size_t* coords = kernel.coords.data();
  if (!kernel.full) {
    const double* points = kernel.points.data();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* xs = x + s * stride;
      const double* p = points;
      double* row = phi + s * size;
      for (std::size_t g = 0; g < size; ++g, p += dim) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          const double d = xs[coords[c]] - p[c];
          d2 += d * d;
        }
        row[g] = -d2;
      }
    }
    Eigen::Map<Eigen::ArrayXd> all(phi, static_cast<Eigen::Index>(batch * size));
    all = all.exp();
    return;
  }

  const auto& axis = kernel.axis;
  const std::size_t n = axis.size();
  auto& e = scratch.axis_exp;
  e.resize(batch * dim * n);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t c = 0; c < dim; ++c) {
      const double xc = x[s * stride + coords[c]];
      double* out = e.data() + (s * dim + c) * n;
      for (std::size_t i = 0; i < n; ++i) out[i] = -(xc - axis[i]) * (xc - axis[i]);
    }
  Eigen::Map<Eigen::ArrayXd> ev(e.data(), static_cast<Eigen::Index>(e.size()));
  ev = ev.exp();

  // Expand from the last coordinate so that g = sum_c i_c n^c.
  auto& cur = scratch.current;
  auto& next = scratch.next;
  for (std::size_t s = 0; s < batch; ++s) {
    const double* es = e.data() + s * dim * n;
    cur.assign(1, 1.0);
    for (std::size_t c = dim; c-- > 0;) {
      const double* ec = es + c * n;
      const std::size_t len = cur.size();
      double* out = phi + s * size;
      if (c != 0) {
        next.resize(len * n);
        out = next.data();
      }
      for (std::size_t r = 0; r < len; ++r) {
        const double base = cur[r];
        for (std::size_t i = 0; i < n; ++i) out[r * n + i] = base * ec[i];
      }
      if (c != 0) cur.swap(next);
    }
  }
}

}  // namespace

std::string to_string(RbfKind kind) {
  return kind == RbfKind::Naive ? "naive" : "clifford";
}

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::None: return "none";
    case NormKind::NodeWise: return "node";
    case NormKind::DimWise: return "dim";
    case NormKind::ComponentWise: return "component";
  }
  return "none";
}

RbfKind rbf_kind_from_string(const std::string& s) {
  if (s == "naive") return RbfKind::Naive;
  if (s == "clifford") return RbfKind::Clifford;
  throw ConfigError("unknown rbf kind '" + s + "' (expected naive or clifford)");
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "none" || s == "no") return NormKind::None;
  if (s == "node" || s == "nodewise") return NormKind::NodeWise;
  if (s == "dim" || s == "dimwise") return NormKind::DimWise;
  if (s == "component" || s == "componentwise") return NormKind::ComponentWise;
  throw ConfigError("unknown norm kind '" + s +
                    "' (expected none, node, dim or component)");
}

std::string to_string(RbfDistance distance) {
  return distance == RbfDistance::Euclidean ? "euclidean" : "nondegenerate";
}

RbfDistance rbf_distance_from_string(const std::string& s) {
  if (s == "euclidean") return RbfDistance::Euclidean;
  if (s == "nondegenerate") return RbfDistance::NonDegenerate;
  throw ConfigError("unknown RBF distance '" + s +
                    "' (expected euclidean or nondegenerate)");
}

std::vector<double> rbf_mask(const Signature& sig, RbfDistance distance) {
  const std::size_t d = sig.dimension();
  std::vector<double> mask(d, 1.0);
  if (distance == RbfDistance::NonDegenerate)
    for (std::size_t a = 0; a < d; ++a)
      if (blade_product_sign(sig, a, a) == 0) mask[a] = 0.0;
  return mask;
}

double rbf_naive(const Multivector& x, const Multivector& g,
                 RbfDistance distance) {
  check_same_algebra(x, g);
  const Multivector v = x - g;
  if (distance == RbfDistance::Euclidean) {
    const double d = norm(v);
    return std::exp(-d * d);
  }
  const auto mask = rbf_mask(v.signature(), distance);
  double d2 = 0.0;
  for (std::size_t a = 0; a < mask.size(); ++a) d2 += mask[a] * v[a] * v[a];
  return std::exp(-d2);
}

Multivector rbf_clifford(const Multivector& x, const Multivector& g,
                         RbfDistance distance) {
  return (x - g) * rbf_naive(x, g, distance);
}

Multivector clsilu(const Algebra& alg, const Multivector& x,
                   const Multivector& w, const Multivector& b) {
  Multivector act = x;
  for (double& c : act.coeffs()) c = silu(c);
  return alg.product(w, act) + b;
}

Multivector edge_forward(const Algebra& alg, const EdgeParams& edge,
                         const Grid& grid, const Multivector& x) {
  if (edge.rbf_weights.size() != grid.size())
    throw std::invalid_argument("edge has " +
                                std::to_string(edge.rbf_weights.size()) +
                                " RBF weights for a grid of " +
                                std::to_string(grid.size()));
  const Signature sig = alg.signature();
  Multivector out = Multivector::zero(sig);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Multivector centre = grid.point(g, sig);
    if (edge.rbf_kind == RbfKind::Naive)
      out += edge.rbf_weights[g] * rbf_naive(x, centre, edge.distance);
    else
      out += alg.product(edge.rbf_weights[g],
                         rbf_clifford(x, centre, edge.distance));
  }
  return out + clsilu(alg, x, edge.silu_w, edge.silu_b);
}

std::size_t NormShape::learnable_count() const {
  switch (kind) {
    case NormKind::None: return 0;
    case NormKind::NodeWise: return 2 * nodes;
    case NormKind::DimWise: return 2 * dim;
    case NormKind::ComponentWise: return 2 * nodes * dim;
  }
  return 0;
}

std::size_t NormShape::mean_count() const {
  switch (kind) {
    case NormKind::None: return 0;
    case NormKind::DimWise: return dim;
    default: return nodes * dim;
  }
}

std::size_t NormShape::var_count() const {
  switch (kind) {
    case NormKind::None: return 0;
    case NormKind::NodeWise: return nodes;
    case NormKind::DimWise: return dim;
    case NormKind::ComponentWise: return nodes * dim;
  }
  return 0;
}

std::size_t NormShape::var_pool(std::size_t batch) const {
  switch (kind) {
    case NormKind::NodeWise: return batch * dim;
    case NormKind::DimWise: return batch * nodes;
    default: return batch;
  }
}

NormState NormState::fresh(NormShape shape, double epsilon, double momentum) {
  NormState st;
  st.shape = shape;
  st.epsilon = epsilon;
  st.momentum = momentum;
  st.gamma.assign(shape.learnable_count() / 2, 1.0);
  st.beta.assign(shape.learnable_count() / 2, 0.0);
  st.running_mean.assign(shape.mean_count(), 0.0);
  st.running_var.assign(shape.var_count(), 1.0);
  return st;
}

std::vector<std::vector<Multivector>> batchnorm_forward(
    const std::vector<std::vector<Multivector>>& batch, NormState& state,
    Mode mode) {
  if (state.shape.kind == NormKind::None) return batch;
  const std::size_t b = batch.size();
  const std::size_t m = state.shape.nodes;
  const std::size_t dim = state.shape.dim;
  if (b == 0) return batch;
  const Signature sig = batch[0].at(0).signature();
  std::vector<double> z(b * m * dim);
  for (std::size_t s = 0; s < b; ++s) {
    if (batch[s].size() != m)
      throw std::invalid_argument("batchnorm: sample has wrong node count");
    for (std::size_t k = 0; k < m; ++k) {
      if (batch[s][k].size() != dim)
        throw std::invalid_argument("batchnorm: multivector has wrong dimension");
      std::copy(batch[s][k].coeffs().begin(), batch[s][k].coeffs().end(),
                z.begin() + static_cast<std::ptrdiff_t>((s * m + k) * dim));
    }
  }
  std::vector<double> y(z.size()), xhat(z.size()), inv(state.shape.var_count());
  std::vector<double> bm(state.shape.mean_count()), bv(state.shape.var_count());
  norm_forward(state.shape, b, z, state.gamma, state.beta, state.epsilon, mode,
               state.running_mean, state.running_var, y, xhat, inv, bm, bv);
  if (mode == Mode::Train) {
    const double mom = state.momentum;
    for (std::size_t u = 0; u < bm.size(); ++u)
      state.running_mean[u] = (1.0 - mom) * state.running_mean[u] + mom * bm[u];
    for (std::size_t u = 0; u < bv.size(); ++u)
      state.running_var[u] = (1.0 - mom) * state.running_var[u] + mom * bv[u];
  }
  std::vector<std::vector<Multivector>> out(b);
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t k = 0; k < m; ++k) {
      auto first = y.begin() + static_cast<std::ptrdiff_t>((s * m + k) * dim);
      out[s].emplace_back(sig, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(dim)));
    }
  return out;
}

void ModelConfig::validate() const {
  if (widths.size() < 2)
    throw ConfigError("a model needs at least two layer widths");
  for (int w : widths)
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  Algebra probe(signature);
  grid.validate(probe.dimension());
  if (!(norm_epsilon > 0.0))
    throw ConfigError("normalisation epsilon must be positive");
  if (!(norm_momentum > 0.0 && norm_momentum <= 1.0))
    throw ConfigError("normalisation momentum must lie in (0, 1]");
}

std::size_t ModelConfig::edge_count() const {
  std::size_t edges = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    edges += static_cast<std::size_t>(widths[l]) *
             static_cast<std::size_t>(widths[l + 1]);
  return edges;
}

std::size_t param_count(const ModelConfig& config, std::size_t grid_size) {
  const std::size_t dim = config.signature.dimension();
  std::size_t total = config.edge_count() * (grid_size * dim + 2 * dim);
  for (std::size_t l = 1; l + 1 < config.widths.size(); ++l)
    total += NormShape{config.norm, static_cast<std::size_t>(config.widths[l]), dim}
                 .learnable_count();
  return total;
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  return param_count(config,
                     config.grid.total_points(config.signature.dimension()));
}

Model::Model(ModelConfig config, Grid grid)
    : config_(std::move(config)),
      algebra_(config_.signature),
      grid_(std::move(grid)) {
  if (config_.widths.size() < 2)
    throw ConfigError("a model needs at least two layer widths");
  for (int w : config_.widths)
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  if (grid_.dim() != algebra_.dimension())
    throw std::invalid_argument("grid dimension does not match the algebra");
  const std::size_t layers = layer_count();
  std::size_t offset = 0;
  layer_offset_.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    layer_offset_[l] = offset;
    offset += width(l) * width(l + 1) * edge_size();
  }
  norm_offset_.assign(layers + 1, offset);
  running_mean_.resize(layers + 1);
  running_var_.resize(layers + 1);
  for (std::size_t l = 1; l < layers; ++l) {
    norm_offset_[l] = offset;
    offset += norm_shape(l).learnable_count();
  }
  params_.assign(offset, 0.0);
  reset_running_stats();
  build_kernel();
  for (std::size_t l = 1; l < layers; ++l) {
    auto view = norm_params(l);
    std::fill(view.gamma.begin(), view.gamma.end(), 1.0);
  }
}

Model Model::create(const ModelConfig& config) {
  config.validate();
  Algebra alg(config.signature);
  Model model(config, make_grid(config.grid, alg));
  model.initialize(config.seed);
  return model;
}

void Model::initialize(std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::Init);
  std::normal_distribution<double> normal(
      0.0, 1.0 / std::sqrt(static_cast<double>(grid_.size())));
  std::fill(params_.begin(), params_.end(), 0.0);
  for (std::size_t l = 0; l < layer_count(); ++l)
    for (std::size_t j = 0; j < width(l); ++j)
      for (std::size_t k = 0; k < width(l + 1); ++k) {
        EdgeView e = edge(l, j, k);
        for (double& w : e.rbf) w = normal(rng);
        e.silu_w[0] = 1.0;
      }
  for (std::size_t l = 1; l < layer_count(); ++l) {
    auto view = norm_params(l);
    std::fill(view.gamma.begin(), view.gamma.end(), 1.0);
  }
  reset_running_stats();
}

std::size_t Model::edge_offset(std::size_t layer, std::size_t from,
                               std::size_t to) const {
  if (layer >= layer_count() || from >= width(layer) || to >= width(layer + 1))
    throw std::out_of_range("edge index out of range");
  return layer_offset_[layer] + (from * width(layer + 1) + to) * edge_size();
}

EdgeView Model::edge(std::size_t layer, std::size_t from, std::size_t to) {
  const std::size_t off = edge_offset(layer, from, to);
  const std::size_t rbf = grid_.size() * dim();
  std::span<double> block(params_.data() + off, edge_size());
  return {block.subspan(0, rbf), block.subspan(rbf, dim()),
          block.subspan(rbf + dim(), dim())};
}

ConstEdgeView Model::edge(std::size_t layer, std::size_t from,
                          std::size_t to) const {
  const std::size_t off = edge_offset(layer, from, to);
  const std::size_t rbf = grid_.size() * dim();
  std::span<const double> block(params_.data() + off, edge_size());
  return {block.subspan(0, rbf), block.subspan(rbf, dim()),
          block.subspan(rbf + dim(), dim())};
}

EdgeParams Model::edge_params(std::size_t layer, std::size_t from,
                              std::size_t to) const {
  const ConstEdgeView v = edge(layer, from, to);
  const Signature sig = config_.signature;
  const std::size_t d = dim();
  EdgeParams out;
  out.rbf_kind = config_.rbf;
  out.distance = config_.distance;
  for (std::size_t g = 0; g < grid_.size(); ++g) {
    auto w = v.rbf.subspan(g * d, d);
    out.rbf_weights.emplace_back(sig, std::vector<double>(w.begin(), w.end()));
  }
  out.silu_w = Multivector(sig, {v.silu_w.begin(), v.silu_w.end()});
  out.silu_b = Multivector(sig, {v.silu_b.begin(), v.silu_b.end()});
  return out;
}

void Model::set_edge(std::size_t layer, std::size_t from, std::size_t to,
                     const EdgeParams& params) {
  EdgeView v = edge(layer, from, to);
  const std::size_t d = dim();
  if (params.rbf_weights.size() != grid_.size())
    throw std::invalid_argument("set_edge: RBF weight count mismatch");
  for (std::size_t g = 0; g < grid_.size(); ++g)
    std::copy(params.rbf_weights[g].coeffs().begin(),
              params.rbf_weights[g].coeffs().end(), v.rbf.begin() + static_cast<std::ptrdiff_t>(g * d));
  std::copy(params.silu_w.coeffs().begin(), params.silu_w.coeffs().end(),
            v.silu_w.begin());
  std::copy(params.silu_b.coeffs().begin(), params.silu_b.coeffs().end(),
            v.silu_b.begin());
}

bool Model::has_norm(std::size_t layer) const {
  return config_.norm != NormKind::None && layer >= 1 && layer < layer_count();
}

NormShape Model::norm_shape(std::size_t layer) const {
  if (!has_norm(layer)) return NormShape{NormKind::None, 0, dim()};
  return NormShape{config_.norm, width(layer), dim()};
}

std::size_t Model::norm_offset(std::size_t layer) const {
  return norm_offset_.at(layer);
}

NormParamView Model::norm_params(std::size_t layer) {
  const std::size_t half = norm_shape(layer).learnable_count() / 2;
  std::span<double> block(params_.data() + norm_offset(layer), 2 * half);
  return {block.subspan(0, half), block.subspan(half, half)};
}

void Model::reset_running_stats() {
  for (std::size_t l = 0; l < running_mean_.size(); ++l) {
    const NormShape shape = l < layer_count() ? norm_shape(l) : NormShape{};
    running_mean_[l].assign(shape.mean_count(), 0.0);
    running_var_[l].assign(shape.var_count(), 1.0);
  }
}

void Model::build_kernel() {
  const std::size_t d = dim();
  const auto mask = rbf_mask(config_.signature, config_.distance);
  KernelGrid k;
  for (std::size_t c = 0; c < d; ++c)
    if (mask[c] != 0.0) k.coords.push_back(c);
  const std::size_t kd = k.coords.size();
  const std::size_t gsize = grid_.size();
  k.full = grid_.is_full();
  k.collapsed = k.full && kd < d;
  k.group.resize(gsize);
  if (k.collapsed) {
    k.axis = grid_.axis();
    const std::size_t n = k.axis.size();
    k.size = 1;
    for (std::size_t i = 0; i < kd; ++i) k.size *= n;
    k.points.resize(k.size * kd);
    for (std::size_t r = 0; r < k.size; ++r)
      for (std::size_t i = 0, rest = r; i < kd; ++i, rest /= n)
        k.points[r * kd + i] = k.axis[rest % n];
    for (std::size_t g = 0; g < gsize; ++g) {
      std::size_t r = 0;
      std::size_t scale = 1;
      for (std::size_t c = 0, rest = g; c < d; ++c, rest /= n)
        if (mask[c] != 0.0) {
          r += (rest % n) * scale;
          scale *= n;
        }
      k.group[g] = r;
    }
  } else {
    if (k.full) k.axis = grid_.axis();
    k.size = gsize;
    k.points.resize(gsize * kd);
    for (std::size_t g = 0; g < gsize; ++g) {
      k.group[g] = g;
      for (std::size_t i = 0; i < kd; ++i)
        k.points[g * kd + i] = grid_.point(g)[k.coords[i]];
    }
  }
  kernel_ = std::move(k);
}

std::vector<double> Model::forward(std::span<const double> inputs,
                                   std::size_t batch, Mode mode,
                                   ForwardCache* cache) {
  BatchStats stats;
  auto out = run(inputs, batch, mode, cache, mode == Mode::Train ? &stats : nullptr);
  if (mode == Mode::Train) {
    const double mom = config_.norm_momentum;
    for (std::size_t l = 1; l < layer_count(); ++l) {
      if (!has_norm(l)) continue;
      for (std::size_t u = 0; u < running_mean_[l].size(); ++u)
        running_mean_[l][u] =
            (1.0 - mom) * running_mean_[l][u] + mom * stats.mean[l][u];
      for (std::size_t u = 0; u < running_var_[l].size(); ++u)
        running_var_[l][u] =
            (1.0 - mom) * running_var_[l][u] + mom * stats.var[l][u];
    }
  }
  return out;
}

std::vector<double> Model::predict(std::span<const double> inputs,
                                   std::size_t batch) const {
  return run(inputs, batch, Mode::Eval, nullptr, nullptr);
}

std::vector<double> Model::run(std::span<const double> inputs,
                               std::size_t batch, Mode mode,
                               ForwardCache* cache, BatchStats* stats) const {
  const std::size_t d = dim();
  const std::size_t layers = layer_count();
  const std::size_t gsize = grid_.size();
  const bool clifford = config_.rbf == RbfKind::Clifford;
  if (inputs.size() != batch * width(0) * d)
    throw std::invalid_argument(
        "model input has " + std::to_string(inputs.size()) + " values; expected " +
        std::to_string(batch) + " samples x " + std::to_string(width(0)) +
        " inputs x " + std::to_string(d) + " coefficients");

  if (cache) {
    cache->batch = batch;
    // Buffers from a previous pass are recycled; every one is overwritten.
    cache->layers.resize(layers);
    cache->stacked.resize(layers);
  }
  if (stats) {
    stats->mean.assign(layers + 1, {});
    stats->var.assign(layers + 1, {});
  }

  std::vector<double> x(inputs.begin(), inputs.end());
  PhiScratch scratch;
  const KernelSpec kernel{kernel_.coords, kernel_.points, kernel_.axis,
                          kernel_.size, kernel_.full};
  const std::size_t ksize = kernel_.size;
  AlignedVector full_rows;

  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n = width(l);
    const std::size_t m = width(l + 1);
    const std::size_t per_edge = clifford ? 2 * d : d;
    const std::size_t cols = m * per_edge;

    std::vector<AlignedVector> stacked;
    if (cache) stacked = std::move(cache->stacked[l]);
    stacked.resize(n);
    for (auto& block : stacked) block.resize(ksize * cols);
    for (std::size_t j = 0; j < n; ++j) {
      AlignedVector& sj = kernel_.collapsed ? full_rows : stacked[j];
      sj.resize(gsize * cols);
      for (std::size_t k = 0; k < m; ++k) {
        const ConstEdgeView e = edge(l, j, k);
        for (std::size_t g = 0; g < gsize; ++g) {
          double* row = sj.data() + g * cols;
          std::copy_n(e.rbf.data() + g * d, d, row + k * d);
          if (clifford) {
            double* wg = row + m * d + k * d;
            std::fill_n(wg, d, 0.0);
            algebra_.product_add(e.rbf.subspan(g * d, d), grid_.point(g),
                                 std::span<double>(wg, d));
          }
        }
      }
      if (kernel_.collapsed) {
        // Centres sharing a kernel column act as one weight row.
        std::fill(stacked[j].begin(), stacked[j].end(), 0.0);
        for (std::size_t g = 0; g < gsize; ++g) {
          const double* row = full_rows.data() + g * cols;
          double* out = stacked[j].data() + kernel_.group[g] * cols;
          for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
        }
      }
    }

    AlignedVector phi, act;
    if (cache) {
      phi = std::move(cache->layers[l].phi);
      act = std::move(cache->layers[l].act);
    }
    phi.resize(n * batch * ksize);
    act.resize(n * batch * cols);
    for (std::size_t j = 0; j < n; ++j) {
      double* phij = phi.data() + j * batch * ksize;
      compute_phi(kernel, x.data() + j * d, n * d, batch, phij, scratch);
      MatMap a(act.data() + j * batch * cols, static_cast<Eigen::Index>(batch),
               static_cast<Eigen::Index>(cols));
      a.noalias() = ConstMatMap(phij, static_cast<Eigen::Index>(batch),
                                static_cast<Eigen::Index>(ksize)) *
                    ConstMatMap(stacked[j].data(), static_cast<Eigen::Index>(ksize),
                                static_cast<Eigen::Index>(cols));
    }

    std::vector<double> sl(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sl[i] = silu(x[i]);

    std::vector<ConstEdgeView> views;
    views.reserve(n * m);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < m; ++k) views.push_back(edge(l, j, k));

    std::vector<double> z(batch * m * d, 0.0);
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t j = 0; j < n; ++j) {
        const std::span<const double> xj(x.data() + (s * n + j) * d, d);
        const std::span<const double> sj(sl.data() + (s * n + j) * d, d);
        const double* arow = act.data() + (j * batch + s) * cols;
        for (std::size_t k = 0; k < m; ++k) {
          std::span<double> zk(z.data() + (s * m + k) * d, d);
          if (clifford) {
            algebra_.product_add(std::span<const double>(arow + k * d, d), xj, zk);
            const double* bk = arow + m * d + k * d;
            for (std::size_t c = 0; c < d; ++c) zk[c] -= bk[c];
          } else {
            for (std::size_t c = 0; c < d; ++c) zk[c] += arow[k * d + c];
          }
          const ConstEdgeView& e = views[j * m + k];
          algebra_.product_add(e.silu_w, sj, zk);
          for (std::size_t c = 0; c < d; ++c) zk[c] += e.silu_b[c];
        }
      }

    std::vector<double> next;
    std::vector<double> xhat, inv_std;
    if (has_norm(l + 1)) {
      const NormShape shape = norm_shape(l + 1);
      const std::size_t off = norm_offset(l + 1);
      const std::size_t half = shape.learnable_count() / 2;
      const std::span<const double> gamma(params_.data() + off, half);
      const std::span<const double> beta(params_.data() + off + half, half);
      next.resize(z.size());
      xhat.resize(z.size());
      inv_std.resize(shape.var_count());
      std::span<double> bm, bv;
      if (stats) {
        stats->mean[l + 1].resize(shape.mean_count());
        stats->var[l + 1].resize(shape.var_count());
        bm = stats->mean[l + 1];
        bv = stats->var[l + 1];
      }
      norm_forward(shape, batch, z, gamma, beta, config_.norm_epsilon, mode,
                   running_mean_[l + 1], running_var_[l + 1], next, xhat,
                   inv_std, bm, bv);
    } else {
      next = std::move(z);
    }

    if (cache) {
      auto& lc = cache->layers[l];
      lc.x = std::move(x);
      lc.phi = std::move(phi);
      lc.act = std::move(act);
      lc.silu = std::move(sl);
      lc.xhat = std::move(xhat);
      lc.inv_std = std::move(inv_std);
      cache->stacked[l] = std::move(stacked);
    }
    x = std::move(next);
  }
  return x;
}

void Model::backward(const ForwardCache& cache,
                     std::span<const double> grad_output,
                     std::span<double> grad) const {
  const std::size_t d = dim();
  const std::size_t layers = layer_count();
  const std::size_t gsize = grid_.size();
  const std::size_t batch = cache.batch;
  const bool clifford = config_.rbf == RbfKind::Clifford;
  if (grad.size() != params_.size())
    throw std::invalid_argument("gradient buffer does not match parameters");
  if (cache.layers.size() != layers)
    throw std::invalid_argument("forward cache does not belong to this model");
  if (grad_output.size() != batch * width(layers) * d)
    throw std::invalid_argument("output gradient has wrong size");

  const std::size_t ksize = kernel_.size;
  const std::size_t kd = kernel_.coords.size();
  const ConstMatMap centres(kernel_.points.data(), static_cast<Eigen::Index>(ksize),
                            static_cast<Eigen::Index>(kd));
  std::vector<double> gz(grad_output.begin(), grad_output.end());

  for (std::size_t l = layers; l-- > 0;) {
    const auto& lc = cache.layers[l];
    const std::size_t n = width(l);
    const std::size_t m = width(l + 1);
    const std::size_t per_edge = clifford ? 2 * d : d;
    const std::size_t cols = m * per_edge;

    std::vector<double> gx(batch * n * d, 0.0);
    std::vector<double> gsilu(batch * n * d, 0.0);
    AlignedVector ga(batch * cols);
    AlignedVector dstack(ksize * cols);
    AlignedVector dphi(batch * ksize);
    AlignedVector tg(batch * kd);
    RowMat corr(d, d);
    const std::int8_t* signs = algebra_.signs().data();
    RowMat right(d, d);

    std::vector<std::size_t> offsets;
    std::vector<ConstEdgeView> views;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < m; ++k) {
        offsets.push_back(edge_offset(l, j, k));
        views.push_back(edge(l, j, k));
      }

    for (std::size_t j = 0; j < n; ++j) {
      const double* phij = lc.phi.data() + j * batch * ksize;
      const double* actj = lc.act.data() + j * batch * cols;
      const auto rows = static_cast<Eigen::Index>(batch);
      const auto cd = static_cast<Eigen::Index>(d);
      const ConstStridedMap sm(lc.silu.data() + j * d, rows, cd,
                               Eigen::OuterStride<>(static_cast<Eigen::Index>(n * d)));
      StridedMap gsm(gsilu.data() + j * d, rows, cd,
                     Eigen::OuterStride<>(static_cast<Eigen::Index>(n * d)));
      for (std::size_t k = 0; k < m; ++k) {
        const ConstStridedMap gzm(gz.data() + k * d, rows, cd,
                                  Eigen::OuterStride<>(static_cast<Eigen::Index>(m * d)));
        const std::size_t off = offsets[j * m + k];
        const ConstEdgeView& e = views[j * m + k];
        double* gw = grad.data() + off + gsize * d;
        double* gb = gw + d;
        corr.noalias() = gzm.transpose() * sm;
        for (std::size_t a = 0; a < d; ++a) {
          double acc = 0.0;
          for (std::size_t b = 0; b < d; ++b)
            acc += algebra_.sign(a, b) * corr(static_cast<Eigen::Index>(a ^ b),
                                              static_cast<Eigen::Index>(b));
          gw[a] += acc;
          gb[a] += gzm.col(static_cast<Eigen::Index>(a)).sum();
        }
        // right multiplication by silu_w as a d x d matrix acting on rows
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b)
            right(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                algebra_.sign(a ^ b, b) * e.silu_w[a ^ b];
        gsm.noalias() += gzm * right;
      }

      for (std::size_t s = 0; s < batch; ++s) {
        const double* xj = lc.x.data() + (s * n + j) * d;
        double* gxj = gx.data() + (s * n + j) * d;
        double* garow = ga.data() + s * cols;
        const double* arow = actj + s * cols;
        for (std::size_t k = 0; k < m; ++k) {
          const double* gzk = gz.data() + (s * m + k) * d;
          if (clifford) {
            double* gak = garow + k * d;
            const double* ak = arow + k * d;
            for (std::size_t a = 0; a < d; ++a) {
              const std::int8_t* sa = signs + a * d;
              double acc = 0.0;
              for (std::size_t b = 0; b < d; ++b) {
                acc += sa[b] * gzk[a ^ b] * xj[b];
                gxj[b] += sa[b] * gzk[a ^ b] * ak[a];
              }
              gak[a] = acc;
              garow[m * d + k * d + a] = -gzk[a];
            }
          } else {
            std::copy(gzk, gzk + d, garow + k * d);
          }
        }
      }

      const ConstMatMap phim(phij, static_cast<Eigen::Index>(batch),
                             static_cast<Eigen::Index>(ksize));
      const ConstMatMap gam(ga.data(), static_cast<Eigen::Index>(batch),
                            static_cast<Eigen::Index>(cols));
      MatMap ds(dstack.data(), static_cast<Eigen::Index>(ksize),
                static_cast<Eigen::Index>(cols));
      ds.noalias() = phim.transpose() * gam;
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t off = edge_offset(l, j, k);
        double* gw = grad.data() + off;
        for (std::size_t g = 0; g < gsize; ++g) {
          const double* row = dstack.data() + kernel_.group[g] * cols;
          for (std::size_t c = 0; c < d; ++c) gw[g * d + c] += row[k * d + c];
          if (clifford)
            algebra_.pullback_left(
                std::span<const double>(row + m * d + k * d, d), grid_.point(g),
                std::span<double>(gw + g * d, d));
        }
      }

      MatMap dp(dphi.data(), static_cast<Eigen::Index>(batch),
                static_cast<Eigen::Index>(ksize));
      dp.noalias() = gam * ConstMatMap(cache.stacked[l][j].data(),
                                       static_cast<Eigen::Index>(ksize),
                                       static_cast<Eigen::Index>(cols))
                               .transpose();
      dp.array() *= phim.array();
      MatMap tgm(tg.data(), static_cast<Eigen::Index>(batch),
                 static_cast<Eigen::Index>(kd));
      tgm.noalias() = dp * centres;
      for (std::size_t s = 0; s < batch; ++s) {
        const double t = dp.row(static_cast<Eigen::Index>(s)).sum();
        const double* xj = lc.x.data() + (s * n + j) * d;
        double* gxj = gx.data() + (s * n + j) * d;
        for (std::size_t i = 0; i < kd; ++i) {
          const std::size_t c = kernel_.coords[i];
          gxj[c] += -2.0 * (t * xj[c] - tg[s * kd + i]);
        }
      }
    }

    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += gsilu[i] * silu_grad(lc.x[i]);

    if (l == 0) break;
    if (has_norm(l)) {
      const NormShape shape = norm_shape(l);
      const std::size_t off = norm_offset(l);
      const std::size_t half = shape.learnable_count() / 2;
      const auto& prev = cache.layers[l - 1];
      std::vector<double> gprev(gx.size());
      norm_backward(shape, batch, gx, prev.xhat, prev.inv_std,
                    std::span<const double>(params_.data() + off, half), gprev,
                    std::span<double>(grad.data() + off, half),
                    std::span<double>(grad.data() + off + half, half));
      gz = std::move(gprev);
    } else {
      gz = std::move(gx);
    }
  }
}

std::vector<std::vector<Multivector>> model_forward(
    Model& model, const std::vector<std::vector<Multivector>>& inputs,
    Mode mode) {
  const std::size_t d = model.dim();
  const std::size_t n0 = model.width(0);
  const std::size_t nl = model.width(model.layer_count());
  const Signature sig = model.config().signature;
  std::vector<double> flat;
  flat.reserve(inputs.size() * n0 * d);
  for (const auto& sample : inputs) {
    if (sample.size() != n0)
      throw std::invalid_argument("model expects " + std::to_string(n0) +
                                  " inputs per sample, got " +
                                  std::to_string(sample.size()));
    for (const auto& mv : sample) {
      if (!(mv.signature() == sig))
        throw std::logic_error("input from " + mv.signature().to_string() +
                               " fed to a model over " + sig.to_string());
      flat.insert(flat.end(), mv.coeffs().begin(), mv.coeffs().end());
    }
  }
  const auto out = mode == Mode::Eval ? model.predict(flat, inputs.size())
                                      : model.forward(flat, inputs.size(), mode);
  std::vector<std::vector<Multivector>> result(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s)
    for (std::size_t k = 0; k < nl; ++k) {
      auto first = out.begin() + static_cast<std::ptrdiff_t>((s * nl + k) * d);
      result[s].emplace_back(
          sig, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(d)));
    }
  return result;
}

}  // namespace clkan
