#include "clkan/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "clkan/qmc.hpp"
#include "clkan/random.hpp"
#include "clkan/training.hpp"

namespace clkan {

int bubble_sort_sign(const Signature& sig, std::size_t a, std::size_t b) {
  std::vector<int> word;
  for (int i = 0; i < sig.generators(); ++i)
    if (a >> i & 1u) word.push_back(i);
  for (int i = 0; i < sig.generators(); ++i)
    if (b >> i & 1u) word.push_back(i);
  int sign = 1;
  for (std::size_t pass = 0; pass < word.size(); ++pass)
    for (std::size_t i = 0; i + 1 < word.size(); ++i)
      if (word[i] > word[i + 1]) {
        std::swap(word[i], word[i + 1]);
        sign = -sign;
      }
  for (std::size_t i = 0; i + 1 < word.size();) {
    if (word[i] == word[i + 1]) {
      sign *= sig.square_of(word[i]);
      word.erase(word.begin() + static_cast<std::ptrdiff_t>(i),
                 word.begin() + static_cast<std::ptrdiff_t>(i + 2));
    } else {
      ++i;
    }
  }
  return sign;
}

CheckResult check_cayley(const Algebra& alg) {
  const Signature sig = alg.signature();
  const std::size_t d = alg.dimension();
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      const int expected = bubble_sort_sign(sig, a, b);
      if (alg.sign(a, b) != expected)
        return {"cayley " + sig.to_string(), false,
                "blade pair (" + std::to_string(a) + ", " + std::to_string(b) +
                    "): table sign " + std::to_string(alg.sign(a, b)) +
                    ", oracle " + std::to_string(expected)};
    }
  return {"cayley " + sig.to_string(), true, std::to_string(d * d) + " blade pairs"};
}

GradCheckReport gradient_check(const GradCheckSpec& spec, double floor) {
  ModelConfig cfg;
  cfg.signature = spec.signature;
  cfg.widths = spec.widths;
  cfg.rbf = spec.rbf;
  cfg.norm = spec.norm;
  cfg.distance = spec.distance;
  cfg.grid.kind = spec.grid;
  cfg.grid.points_per_dim = spec.points_per_dim;
  cfg.grid.seed = spec.seed;
  cfg.seed = spec.seed;
  Model model = Model::create(cfg);

  auto rng = make_rng(spec.seed, Stream::Check);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (double& p : model.parameters()) p += noise(rng);

  const std::size_t d = model.dim();
  std::uniform_real_distribution<double> uniform(-1.5, 1.5);
  std::vector<double> inputs(spec.batch * model.width(0) * d);
  std::vector<double> targets(spec.batch * model.width(model.layer_count()) * d);
  for (double& v : inputs) v = uniform(rng);
  for (double& v : targets) v = uniform(rng);

  const GradientSet analytic = backward(model, inputs, targets, spec.batch);
  auto loss = [&]() { return backward(model, inputs, targets, spec.batch).loss; };

  GradCheckReport report;
  report.parameters = analytic.grads.size();
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + spec.step;
    const double up = loss();
    params[i] = saved - spec.step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * spec.step);
    const double a = analytic.grads[i];
    const double scale = std::max({std::abs(a), std::abs(numeric), floor});
    const double err = std::abs(a - numeric) / scale;
    if (i == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

std::vector<ParamCountCase> param_count_table() {
  std::vector<ParamCountCase> cases;
  auto add = [&](const std::string& table, Signature sig, std::vector<int> widths,
                 GridKind kind, int ng, std::size_t expected) {
    ModelConfig c;
    c.signature = sig;
    c.widths = std::move(widths);
    c.grid.kind = kind;
    c.grid.points_per_dim = ng;
    c.norm = NormKind::NodeWise;
    cases.push_back({table, c, expected});
  };
  const Signature complex{0, 1, 0};
  const Signature degenerate{1, 0, 1};
  add("II", complex, {3, 10, 3, 1}, GridKind::Full, 8, 8342);
  const std::size_t small[] = {782, 1412, 2294, 3428, 4814, 6452, 8342};
  const std::size_t large[] = {1212, 2192, 3564, 5328, 7484, 10032, 12972};
  for (int ng = 2; ng <= 8; ++ng)
    add("II", complex, {3, 10, 3, 1}, GridKind::Sobol, ng,
        small[ng - 2]);
  add("II", complex, {3, 10, 5, 3, 1}, GridKind::Full, 8, 12972);
  for (int ng = 2; ng <= 8; ++ng)
    add("II", complex, {3, 10, 5, 3, 1}, GridKind::Sobol, ng, large[ng - 2]);
  const std::size_t square[] = {292, 1332, 4132, 10036, 20772, 38452, 65572};
  const std::size_t squaresquare[] = {1308, 5988, 18588, 45156, 93468, 173028, 295068};
  add("IV", degenerate, {1, 2, 1}, GridKind::Full, 8, 65572);
  for (int ng = 2; ng <= 8; ++ng)
    add("IV", degenerate, {1, 2, 1}, GridKind::Sobol, ng, square[ng - 2]);
  add("IV", degenerate, {2, 4, 2, 1}, GridKind::Full, 8, 295068);
  for (int ng = 2; ng <= 8; ++ng)
    add("IV", degenerate, {2, 4, 2, 1}, GridKind::Sobol, ng, squaresquare[ng - 2]);
  return cases;
}

CheckResult verify_cayley(const VerifyOptions& opts) {
  std::size_t algebras = 0;
  for (int n = 1; n <= 4; ++n)
    for (int p = 0; p <= n; ++p)
      for (int q = 0; p + q <= n; ++q) {
        Algebra alg(Signature{p, q, n - p - q});
        if (opts.inject_cayley_fault && n == 2 && p == 0 && q == 2)
          alg = alg.with_sign_flipped(3, 3);
        const CheckResult r = check_cayley(alg);
        if (!r.passed) return {"cayley oracle", false, r.name + ": " + r.detail};
        ++algebras;
      }
  return {"cayley oracle", true,
          std::to_string(algebras) + " signatures with n <= 4 match the bubble-sort oracle"};
}

CheckResult verify_gradients() {
  const Signature sigs[] = {{0, 1, 0}, {0, 2, 0}, {1, 0, 1}};
  const RbfKind rbfs[] = {RbfKind::Naive, RbfKind::Clifford};
  const NormKind norms[] = {NormKind::None, NormKind::NodeWise, NormKind::DimWise,
                            NormKind::ComponentWise};
  double worst = 0.0;
  std::string where;
  std::size_t runs = 0;
  for (const auto& sig : sigs)
    for (auto rbf : rbfs)
      for (auto nk : norms) {
        GradCheckSpec spec;
        spec.signature = sig;
        spec.rbf = rbf;
        spec.norm = nk;
        spec.points_per_dim = sig.dimension() == 2 ? 4 : 2;
        spec.seed = 11 + runs;
        const GradCheckReport r = gradient_check(spec);
        ++runs;
        if (r.max_rel_error > worst) {
          worst = r.max_rel_error;
          where = sig.to_string() + "/" + to_string(rbf) + "/" + to_string(nk);
        }
      }
  std::ostringstream os;
  os << runs << " models, worst relative error " << worst;
  if (!where.empty()) os << " (" << where << ")";
  return {"gradients", worst <= 1e-4, os.str()};
}

CheckResult verify_sobol_stratification() {
  for (int d = 1; d <= 6; ++d)
    for (int m = 0; m <= 10; ++m)
      for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        const std::size_t n = std::size_t{1} << m;
        const auto pts = sobol_points(d, n, seed);
        for (int c = 0; c < d; ++c) {
          std::vector<int> bins(n, 0);
          for (std::size_t i = 0; i < n; ++i) {
            const double v = pts[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
            if (!(v >= 0.0 && v < 1.0))
              return {"sobol stratification", false, "point outside [0,1)"};
            ++bins[static_cast<std::size_t>(v * static_cast<double>(n))];
          }
          if (std::any_of(bins.begin(), bins.end(), [](int b) { return b != 1; }))
            return {"sobol stratification", false,
                    "d=" + std::to_string(d) + " m=" + std::to_string(m) +
                        " coordinate " + std::to_string(c) + " seed " +
                        std::to_string(seed)};
        }
      }
  return {"sobol stratification", true,
          "one point per dyadic bin for m <= 10, d <= 6, 3 seeds"};
}

CheckResult verify_param_counts() {
  const auto cases = param_count_table();
  for (const auto& c : cases) {
    const std::size_t got = param_count(c.config);
    if (got != c.expected)
      return {"parameter counts", false,
              "table " + c.table + " " + c.config.grid.label() + ": got " +
                  std::to_string(got) + ", expected " + std::to_string(c.expected)};
  }
  return {"parameter counts", true,
          std::to_string(cases.size()) + " table entries reproduced exactly"};
}

bool run_verify(std::ostream& os, const VerifyOptions& opts) {
  const CheckResult results[] = {verify_cayley(opts), verify_gradients(),
                                 verify_sobol_stratification(), verify_param_counts()};
  bool ok = true;
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  os << (ok ? "all checks passed" : "verification FAILED") << '\n';
  return ok;
}

}  // namespace clkan
