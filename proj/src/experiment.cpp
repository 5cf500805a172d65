#include "clkan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>

#include "clkan/checkpoint.hpp"

namespace clkan {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) fail(join(path, key), "unknown key");
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t get_count(const json& j, const std::string& path) {
  const auto v = get_integer(j, path);
  if (v < 0) fail(path, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t get_seed(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    fail(path, "expected a non-negative integer seed");
  return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

// Runs a parser that throws ConfigError without a path and prefixes one.
template <typename F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    fail(path, msg);
  }
}

TrainConfig train_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path,
                 {"lr", "plateau_factor", "plateau_patience", "plateau_threshold",
                  "early_stop_window", "early_stop_delta", "folds", "batch_size",
                  "max_epochs", "seed", "optimizer", "restore_best"});
  TrainConfig t;
  if (j.contains("lr")) t.initial_lr = get_number(j["lr"], join(path, "lr"));
  if (j.contains("plateau_factor"))
    t.plateau_factor = get_number(j["plateau_factor"], join(path, "plateau_factor"));
  if (j.contains("plateau_patience"))
    t.plateau_patience = static_cast<int>(
        get_integer(j["plateau_patience"], join(path, "plateau_patience")));
  if (j.contains("plateau_threshold"))
    t.plateau_threshold =
        get_number(j["plateau_threshold"], join(path, "plateau_threshold"));
  if (j.contains("early_stop_window"))
    t.early_stop_window = static_cast<int>(
        get_integer(j["early_stop_window"], join(path, "early_stop_window")));
  if (j.contains("early_stop_delta"))
    t.early_stop_delta =
        get_number(j["early_stop_delta"], join(path, "early_stop_delta"));
  if (j.contains("folds"))
    t.folds = static_cast<int>(get_integer(j["folds"], join(path, "folds")));
  if (j.contains("batch_size"))
    t.batch_size = get_count(j["batch_size"], join(path, "batch_size"));
  if (j.contains("max_epochs"))
    t.max_epochs = static_cast<int>(get_integer(j["max_epochs"], join(path, "max_epochs")));
  if (j.contains("seed")) t.base_seed = get_seed(j["seed"], join(path, "seed"));
  if (j.contains("optimizer")) {
    const std::string p = join(path, "optimizer");
    t.optimizer = with_path(p, [&] { return optimizer_from_string(get_string(j["optimizer"], p)); });
  }
  if (j.contains("restore_best"))
    t.restore_best = get_bool(j["restore_best"], join(path, "restore_best"));
  with_path(path, [&] { t.validate(); return 0; });
  return t;
}

std::string fixed(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string widths_string(const std::vector<int>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i)
    s += (i ? "x" : "") + std::to_string(widths[i]);
  return s;
}

json fold_to_json(const FoldResult& f) {
  return {{"fold", f.fold},           {"epochs", f.epochs},
          {"best_val", f.best_val},   {"test_mse", f.test_mse},
          {"test_mae", f.test_mae},   {"train_loss", f.train_loss},
          {"val_loss", f.val_loss}};
}

FoldResult fold_from_json(const json& j) {
  FoldResult f;
  f.fold = j.at("fold").get<int>();
  f.epochs = j.at("epochs").get<int>();
  f.best_val = j.at("best_val").get<double>();
  f.test_mse = j.at("test_mse").get<double>();
  f.test_mae = j.at("test_mae").get<double>();
  f.train_loss = j.value("train_loss", std::vector<double>{});
  f.val_loss = j.value("val_loss", std::vector<double>{});
  return f;
}

}  // namespace

Signature parse_signature(const std::string& text) {
  static const std::regex re(R"(^\s*(?:[Cc][Ll])?\s*\(?\s*(\d+)\s*,\s*(\d+)\s*(?:,\s*(\d+))?\s*\)?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re))
    throw ConfigError("cannot parse signature '" + text +
                      "' (expected p,q,r or Cl(p,q,r))");
  Signature sig{std::stoi(m[1]), std::stoi(m[2]), m[3].matched ? std::stoi(m[3]) : 0};
  Algebra probe(sig);
  return sig;
}

GridSpec parse_grid_label(const std::string& s) {
  static const std::regex re(R"(^\s*([A-Za-z]+)\s*-\s*(\d+)\s*$)");
  std::smatch m;
  if (!std::regex_match(s, m, re))
    throw ConfigError("cannot parse grid '" + s + "' (expected F-8 or S-3)");
  GridSpec spec;
  spec.kind = grid_kind_from_string(m[1]);
  spec.points_per_dim = std::stoi(m[2]);
  return spec;
}

json to_json(const Signature& sig) { return json::array({sig.p, sig.q, sig.r}); }

json to_json(const GridSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"points_per_dim", spec.points_per_dim},
          {"range", json::array({spec.lo, spec.hi})},
          {"seed", spec.seed},
          {"max_points", spec.max_points}};
}

json to_json(const ModelConfig& cfg) {
  return {{"signature", to_json(cfg.signature)},
          {"widths", cfg.widths},
          {"grid", to_json(cfg.grid)},
          {"rbf", to_string(cfg.rbf)},
          {"rbf_distance", to_string(cfg.distance)},
          {"norm", to_string(cfg.norm)},
          {"seed", cfg.seed},
          {"norm_epsilon", cfg.norm_epsilon},
          {"norm_momentum", cfg.norm_momentum}};
}

json to_json(const TrainConfig& t) {
  return {{"lr", t.initial_lr},
          {"plateau_factor", t.plateau_factor},
          {"plateau_patience", t.plateau_patience},
          {"plateau_threshold", t.plateau_threshold},
          {"early_stop_window", t.early_stop_window},
          {"early_stop_delta", t.early_stop_delta},
          {"folds", t.folds},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"seed", t.base_seed},
          {"optimizer", to_string(t.optimizer)},
          {"restore_best", t.restore_best}};
}

Signature signature_from_json(const json& j, const std::string& path) {
  return with_path(path, [&] {
    if (j.is_string()) return parse_signature(j.get<std::string>());
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
      fail(path, "expected [p, q, r] or a string such as \"Cl(0,1,0)\"");
    int v[3] = {0, 0, 0};
    for (std::size_t i = 0; i < j.size(); ++i)
      v[i] = static_cast<int>(get_integer(j[i], index_path(path, i)));
    Signature sig{v[0], v[1], v[2]};
    Algebra probe(sig);
    return sig;
  });
}

GridSpec grid_from_json(const json& j, const std::string& path) {
  if (j.is_string()) return with_path(path, [&] { return parse_grid_label(j.get<std::string>()); });
  require_object(j, path);
  reject_unknown(j, path, {"kind", "points_per_dim", "range", "seed", "max_points"});
  GridSpec spec;
  if (j.contains("kind")) {
    const std::string p = join(path, "kind");
    spec.kind = with_path(p, [&] { return grid_kind_from_string(get_string(j["kind"], p)); });
  }
  if (j.contains("points_per_dim"))
    spec.points_per_dim = static_cast<int>(
        get_integer(j["points_per_dim"], join(path, "points_per_dim")));
  if (j.contains("range")) {
    const std::string p = join(path, "range");
    const json& r = j["range"];
    if (!r.is_array() || r.size() != 2) fail(p, "expected [lo, hi]");
    spec.lo = get_number(r[0], index_path(p, 0));
    spec.hi = get_number(r[1], index_path(p, 1));
  }
  if (j.contains("seed")) spec.seed = get_seed(j["seed"], join(path, "seed"));
  if (j.contains("max_points"))
    spec.max_points = get_count(j["max_points"], join(path, "max_points"));
  return spec;
}

ModelConfig model_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path,
                 {"signature", "widths", "grid", "rbf", "rbf_distance", "norm", "seed",
                  "norm_epsilon", "norm_momentum"});
  ModelConfig m;
  if (j.contains("signature"))
    m.signature = signature_from_json(j["signature"], join(path, "signature"));
  if (j.contains("widths")) {
    const std::string p = join(path, "widths");
    if (!j["widths"].is_array()) fail(p, "expected an array of layer widths");
    m.widths.clear();
    for (std::size_t i = 0; i < j["widths"].size(); ++i)
      m.widths.push_back(static_cast<int>(get_integer(j["widths"][i], index_path(p, i))));
  }
  if (j.contains("grid")) m.grid = grid_from_json(j["grid"], join(path, "grid"));
  if (j.contains("rbf")) {
    const std::string p = join(path, "rbf");
    m.rbf = with_path(p, [&] { return rbf_kind_from_string(get_string(j["rbf"], p)); });
  }
  if (j.contains("rbf_distance")) {
    const std::string p = join(path, "rbf_distance");
    m.distance = with_path(
        p, [&] { return rbf_distance_from_string(get_string(j["rbf_distance"], p)); });
  }
  if (j.contains("norm")) {
    const std::string p = join(path, "norm");
    m.norm = with_path(p, [&] { return norm_kind_from_string(get_string(j["norm"], p)); });
  }
  if (j.contains("seed")) m.seed = get_seed(j["seed"], join(path, "seed"));
  if (j.contains("norm_epsilon"))
    m.norm_epsilon = get_number(j["norm_epsilon"], join(path, "norm_epsilon"));
  if (j.contains("norm_momentum"))
    m.norm_momentum = get_number(j["norm_momentum"], join(path, "norm_momentum"));
  with_path(path, [&] { m.validate(); return 0; });
  return m;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name: must not be empty");
  for (const auto& c : expand_sweep(*this)) {
    c.model.validate();
    train.validate();
    if (c.model.widths.front() != static_cast<int>(task_arity(task)))
      throw ConfigError("model.widths: " + to_string(task) + " takes " +
                        std::to_string(task_arity(task)) +
                        " inputs but the first layer has width " +
                        std::to_string(c.model.widths.front()));
    if (c.model.widths.back() != 1)
      throw ConfigError("model.widths: the last layer must have width 1");
    if (task == Task::Sin && !(model.signature == Signature{0, 1, 0}))
      throw ConfigError("task: sin is only defined for Cl(0,1,0)");
    if (task == Task::Holography && !(model.signature == Signature{0, 1, 0}))
      throw ConfigError("task: holography is only defined for Cl(0,1,0)");
    const SampleCounts n = samples();
    if (n.train_val < static_cast<std::size_t>(train.folds) * 2)
      throw ConfigError("samples.train_val: " + std::to_string(n.train_val) +
                        " samples cannot fill " + std::to_string(train.folds) +
                        " folds");
    if (n.test < 1) throw ConfigError("samples.test: must be >= 1");
  }
}

SampleCounts ExperimentConfig::samples() const {
  SampleCounts n = sample_counts(model.signature, task);
  if (train_val_samples) n.train_val = train_val_samples;
  if (test_samples) n.test = test_samples;
  return n;
}

std::string ExperimentConfig::label() const {
  std::string s = model.grid.label();
  if (!sweep_norms.empty()) s += "_" + to_string(model.norm);
  if (!sweep_rbfs.empty()) s += "_" + to_string(model.rbf);
  return s;
}

ExperimentConfig parse_config(const json& root) {
  if (root.is_object() && root.contains("config") && root.contains("param_count"))
    return parse_config(root["config"]);
  require_object(root, "config");
  reject_unknown(root, "",
                 {"name", "task", "model", "train", "samples", "data_seed",
                  "output_dir", "checkpoints", "sweep"});
  ExperimentConfig cfg;
  if (root.contains("name")) cfg.name = get_string(root["name"], "name");
  if (root.contains("task"))
    cfg.task = with_path("task", [&] { return task_from_string(get_string(root["task"], "task")); });
  if (root.contains("model")) cfg.model = model_from_json(root["model"], "model");
  if (root.contains("train")) cfg.train = train_from_json(root["train"], "train");
  if (root.contains("samples")) {
    const json& s = root["samples"];
    require_object(s, "samples");
    reject_unknown(s, "samples", {"train_val", "test"});
    if (s.contains("train_val"))
      cfg.train_val_samples = get_count(s["train_val"], "samples.train_val");
    if (s.contains("test")) cfg.test_samples = get_count(s["test"], "samples.test");
  }
  if (root.contains("data_seed")) cfg.data_seed = get_seed(root["data_seed"], "data_seed");
  if (root.contains("output_dir"))
    cfg.output_dir = get_string(root["output_dir"], "output_dir");
  if (root.contains("checkpoints"))
    cfg.save_checkpoints = get_bool(root["checkpoints"], "checkpoints");
  if (root.contains("sweep")) {
    const json& s = root["sweep"];
    require_object(s, "sweep");
    reject_unknown(s, "sweep", {"grids", "norms", "rbfs"});
    auto list = [&](const char* key) -> const json& {
      const json& v = s[key];
      if (!v.is_array() || v.empty())
        fail(join("sweep", key), "expected a non-empty array");
      return v;
    };
    if (s.contains("grids")) {
      const json& g = list("grids");
      for (std::size_t i = 0; i < g.size(); ++i) {
        GridSpec spec = grid_from_json(g[i], index_path("sweep.grids", i));
        if (g[i].is_string()) {
          spec.lo = cfg.model.grid.lo;
          spec.hi = cfg.model.grid.hi;
          spec.seed = cfg.model.grid.seed;
          spec.max_points = cfg.model.grid.max_points;
        }
        cfg.sweep_grids.push_back(spec);
      }
    }
    if (s.contains("norms")) {
      const json& g = list("norms");
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string p = index_path("sweep.norms", i);
        cfg.sweep_norms.push_back(
            with_path(p, [&] { return norm_kind_from_string(get_string(g[i], p)); }));
      }
    }
    if (s.contains("rbfs")) {
      const json& g = list("rbfs");
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string p = index_path("sweep.rbfs", i);
        cfg.sweep_rbfs.push_back(
            with_path(p, [&] { return rbf_kind_from_string(get_string(g[i], p)); }));
      }
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  json j = {{"name", cfg.name},
            {"task", to_string(cfg.task)},
            {"model", to_json(cfg.model)},
            {"train", to_json(cfg.train)},
            {"samples", {{"train_val", cfg.samples().train_val},
                         {"test", cfg.samples().test}}},
            {"data_seed", cfg.data_seed},
            {"output_dir", cfg.output_dir},
            {"checkpoints", cfg.save_checkpoints}};
  if (cfg.has_sweep()) {
    json s = json::object();
    if (!cfg.sweep_grids.empty()) {
      s["grids"] = json::array();
      for (const auto& g : cfg.sweep_grids) s["grids"].push_back(to_json(g));
    }
    if (!cfg.sweep_norms.empty()) {
      s["norms"] = json::array();
      for (auto n : cfg.sweep_norms) s["norms"].push_back(to_string(n));
    }
    if (!cfg.sweep_rbfs.empty()) {
      s["rbfs"] = json::array();
      for (auto r : cfg.sweep_rbfs) s["rbfs"].push_back(to_string(r));
    }
    j["sweep"] = s;
  }
  return j;
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
  if (!cfg.has_sweep()) return {cfg};
  const auto grids = cfg.sweep_grids.empty() ? std::vector<GridSpec>{cfg.model.grid}
                                             : cfg.sweep_grids;
  const auto norms = cfg.sweep_norms.empty() ? std::vector<NormKind>{cfg.model.norm}
                                             : cfg.sweep_norms;
  const auto rbfs =
      cfg.sweep_rbfs.empty() ? std::vector<RbfKind>{cfg.model.rbf} : cfg.sweep_rbfs;
  std::vector<ExperimentConfig> out;
  for (const auto& g : grids)
    for (auto n : norms)
      for (auto r : rbfs) {
        ExperimentConfig c = cfg;
        c.sweep_grids.clear();
        c.sweep_norms.clear();
        c.sweep_rbfs.clear();
        c.model.grid = g;
        c.model.norm = n;
        c.model.rbf = r;
        if (!cfg.sweep_norms.empty() || !cfg.sweep_rbfs.empty()) {
          c.name = cfg.name;
          if (!cfg.sweep_norms.empty()) c.name += "_" + to_string(n);
          if (!cfg.sweep_rbfs.empty()) c.name += "_" + to_string(r);
        }
        out.push_back(std::move(c));
      }
  return out;
}

json to_json(const ResultRecord& r) {
  json folds = json::array();
  for (const auto& f : r.cv.folds) folds.push_back(fold_to_json(f));
  return {{"version", r.version},
          {"config", to_json(r.config)},
          {"label", r.config.label()},
          {"param_count", r.param_count},
          {"folds", folds},
          {"aggregate",
           {{"mse_mean", r.cv.aggregate.mse_mean},
            {"mse_std", r.cv.aggregate.mse_std},
            {"mae_mean", r.cv.aggregate.mae_mean},
            {"mae_std", r.cv.aggregate.mae_std}}},
          {"wall_clock_s", r.wall_clock_s}};
}

ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  try {
    r.config = parse_config(j.at("config"));
    r.param_count = j.at("param_count").get<std::size_t>();
    for (const auto& f : j.at("folds")) r.cv.folds.push_back(fold_from_json(f));
    const json& a = j.at("aggregate");
    r.cv.aggregate = {a.at("mse_mean").get<double>(), a.at("mse_std").get<double>(),
                      a.at("mae_mean").get<double>(), a.at("mae_std").get<double>()};
    r.wall_clock_s = j.value("wall_clock_s", 0.0);
    r.version = j.value("version", std::string{});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed result record: ") + e.what());
  }
  return r;
}

fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_relative())
    if (const char* root = std::getenv(kOutputRootEnv); root && *root)
      p = fs::path(root) / p;
  return p;
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path record_path(const ExperimentConfig& cfg) {
  return resolve_output_dir(cfg.output_dir) / (cfg.name + "_" + cfg.label() + ".json");
}

void write_record(const ResultRecord& record) {
  write_atomic(record_path(record.config), to_json(record).dump(2) + "\n");
}

std::string summary_header() {
  return "name,task,signature,widths,grid_kind,points_per_dim,grid_lo,grid_hi,rbf,"
         "norm,train_val,test,folds,lr,batch_size,max_epochs,seed,optimizer,"
         "param_count,mse_mean,mse_std,mae_mean,mae_std,wall_clock_s";
}

std::string summary_row(const ResultRecord& r) {
  const auto& c = r.config;
  const auto& m = c.model;
  const auto n = c.samples();
  const auto& a = r.cv.aggregate;
  std::ostringstream os;
  os << c.name << ',' << to_string(c.task) << ',' << '"' << m.signature.to_string()
     << '"' << ',' << widths_string(m.widths) << ',' << to_string(m.grid.kind) << ','
     << m.grid.points_per_dim << ',' << fixed(m.grid.lo) << ',' << fixed(m.grid.hi)
     << ',' << to_string(m.rbf) << ',' << to_string(m.norm) << ',' << n.train_val
     << ',' << n.test << ',' << c.train.folds << ',' << fixed(c.train.initial_lr)
     << ',' << c.train.batch_size << ',' << c.train.max_epochs << ','
     << c.train.base_seed << ',' << to_string(c.train.optimizer) << ','
     << r.param_count << ',' << fixed(a.mse_mean) << ',' << fixed(a.mse_std) << ','
     << fixed(a.mae_mean) << ',' << fixed(a.mae_std) << ',' << fixed(r.wall_clock_s);
  return os.str();
}

void append_summary(const ResultRecord& record) {
  const fs::path dir = resolve_output_dir(record.config.output_dir);
  fs::create_directories(dir);
  const fs::path path = dir / "summary.csv";
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  if (fresh) out << summary_header() << '\n';
  out << summary_row(record) << '\n';
}

ResultRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (cfg.has_sweep())
    throw ConfigError("run_experiment takes one expanded config; call expand_sweep");
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ResultRecord record;
  record.config = cfg;
  record.param_count = param_count(cfg.model);

  const SampleCounts n = cfg.samples();
  const Dataset train_val =
      generate(cfg.task, cfg.model.signature, n.train_val, cfg.data_seed, Split::TrainVal);
  const Dataset test =
      generate(cfg.task, cfg.model.signature, n.test, cfg.data_seed, Split::Test);

  std::ostream* log = opts.log;
  if (log)
    *log << cfg.name << " " << cfg.label() << ": " << record.param_count
         << " parameters, " << n.train_val << " train/val, " << n.test << " test" << std::endl;
  EpochCallback on_epoch;
  if (log && opts.log_every > 0)
    on_epoch = [&](const EpochReport& e) {
      if (e.epoch % opts.log_every == 0)
        *log << "  fold " << e.fold << " epoch " << e.epoch << " train "
             << e.train_loss << " val " << e.val_loss << " lr " << e.lr << std::endl;
    };
  ModelCallback on_model;
  if (cfg.save_checkpoints && opts.write_outputs)
    on_model = [&](int fold, const Model& model) {
      const fs::path p = resolve_output_dir(cfg.output_dir) /
                         (cfg.name + "_" + cfg.label() + "_fold" +
                          std::to_string(fold) + ".ckpt");
      save_checkpoint(model, p);
    };

  record.cv = cross_validate(cfg.model, cfg.train, train_val, test, on_epoch, on_model);
  record.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (log) {
    for (const auto& f : record.cv.folds)
      *log << "  fold " << f.fold << ": " << f.epochs << " epochs, test MSE "
           << f.test_mse << ", MAE " << f.test_mae << '\n';
    *log << "  mean test MSE " << record.cv.aggregate.mse_mean << " +- "
         << record.cv.aggregate.mse_std << ", MAE " << record.cv.aggregate.mae_mean
         << " +- " << record.cv.aggregate.mae_std << " (" << record.wall_clock_s
         << " s)" << std::endl;
  }
  if (opts.write_outputs) {
    write_record(record);
    append_summary(record);
  }
  return record;
}

std::string plot_table(const std::vector<ResultRecord>& records) {
  std::vector<const ResultRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return a->param_count < b->param_count;
  });
  std::ostringstream os;
  os << "# name\tlabel\tgrid_kind\tpoints_per_dim\tparam_count\tmse_mean\tmse_std"
        "\tmae_mean\tmae_std\n";
  for (const auto* r : sorted) {
    const auto& a = r->cv.aggregate;
    os << r->config.name << '\t' << r->config.label() << '\t'
       << to_string(r->config.model.grid.kind) << '\t'
       << r->config.model.grid.points_per_dim << '\t' << r->param_count << '\t'
       << fixed(a.mse_mean) << '\t' << fixed(a.mse_std) << '\t' << fixed(a.mae_mean)
       << '\t' << fixed(a.mae_std) << '\n';
  }
  return os.str();
}

}  // namespace clkan
