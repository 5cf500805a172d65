#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "clkan/checkpoint.hpp"
#include "clkan/datasets.hpp"
#include "clkan/experiment.hpp"
#include "clkan/verify.hpp"

using namespace clkan;

namespace {

struct RunFlags {
  std::string config;
  std::string output_dir;
  int max_epochs = 0;
  int log_every = 50;
  bool quiet = false;
  std::vector<std::string> grids;
};

void apply_overrides(ExperimentConfig& cfg, const RunFlags& f) {
  if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
  if (f.max_epochs > 0) cfg.train.max_epochs = f.max_epochs;
  if (!f.grids.empty()) {
    cfg.sweep_grids.clear();
    for (const auto& g : f.grids) {
      GridSpec spec = parse_grid_label(g);
      spec.lo = cfg.model.grid.lo;
      spec.hi = cfg.model.grid.hi;
      spec.max_points = cfg.model.grid.max_points;
      cfg.sweep_grids.push_back(spec);
    }
  }
  cfg.validate();
}

int run_all(const ExperimentConfig& cfg, const RunFlags& f) {
  RunOptions opts;
  opts.log = f.quiet ? nullptr : &std::cout;
  opts.log_every = f.log_every;
  int failures = 0;
  for (const auto& one : expand_sweep(cfg)) {
    try {
      run_experiment(one, opts);
      std::cout << record_path(one).string() << '\n';
    } catch (const TrainingError& e) {
      std::cerr << "error: " << one.name << " " << one.label() << ": " << e.what() << '\n';
      ++failures;
    }
  }
  return failures ? 1 : 0;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("config", f.config, "Experiment config or result record (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", f.output_dir, "Override the config's output directory");
  cmd->add_option("--max-epochs", f.max_epochs, "Override train.max_epochs");
  cmd->add_option("--log-every", f.log_every, "Progress line every N epochs (0: off)");
  cmd->add_flag("-q,--quiet", f.quiet, "Only print record paths");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clifford Kolmogorov-Arnold networks: experiments and checks"};
  app.set_version_flag("--version", std::string(CLKAN_VERSION));
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Cross-validate one config (every sweep entry)");
  add_run_flags(run, run_flags);

  RunFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Run a grid sweep, one record per grid");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--grids", sweep_flags.grids, "Grid labels, e.g. S-2 S-4 F-8")
      ->delimiter(',');

  bool inject = false;
  auto* verify = app.add_subcommand("verify", "Run the fast invariant checks");
  verify->add_flag("--inject-cayley-fault", inject,
                   "Negate one Cayley sign first; the oracle check must fail");

  std::string pc_config;
  auto* pcount = app.add_subcommand("param-count", "Print N_p for a config");
  pcount->add_option("config", pc_config, "Experiment config")
      ->required()
      ->check(CLI::ExistingFile);

  std::string task, sig, out, split = "trainval";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen->add_option("task", task, "square, sin, mult, squaresquare or holography")->required();
  gen->add_option("signature", sig, "e.g. 0,1,0 or Cl(1,0,1)")->required();
  gen->add_option("n", n, "Number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("seed", seed, "Data seed")->required();
  gen->add_option("out", out, "Output CSV path")->required();
  gen->add_option("--split", split, "trainval or test")
      ->check(CLI::IsMember({"trainval", "test"}));

  std::vector<std::string> records;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Tabulate MSE vs. grid size from records");
  plot->add_option("records", records, "Result record files")
      ->required()
      ->check(CLI::ExistingFile);
  plot->add_option("-o,--out", plot_out, "Write the table here instead of stdout");

  std::string ckpt;
  auto* inspect = app.add_subcommand("inspect", "Summarise a model checkpoint");
  inspect->add_option("checkpoint", ckpt, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = load_config(run_flags.config);
      apply_overrides(cfg, run_flags);
      return run_all(cfg, run_flags);
    }
    if (*sweep) {
      ExperimentConfig cfg = load_config(sweep_flags.config);
      apply_overrides(cfg, sweep_flags);
      if (!cfg.has_sweep()) {
        std::cerr << "error: config has no sweep block and no --grids were given\n";
        return 2;
      }
      return run_all(cfg, sweep_flags);
    }
    if (*verify) {
      VerifyOptions opts;
      opts.inject_cayley_fault = inject;
      return run_verify(std::cout, opts) ? 0 : 1;
    }
    if (*pcount) {
      const ExperimentConfig cfg = load_config(pc_config);
      for (const auto& one : expand_sweep(cfg))
        std::cout << one.name << '\t' << one.label() << '\t' << param_count(one.model)
                  << '\n';
      return 0;
    }
    if (*gen) {
      const Dataset data = generate(task_from_string(task), parse_signature(sig), n,
                                    seed, split == "test" ? Split::Test : Split::TrainVal);
      std::ofstream os(out);
      if (!os) throw std::runtime_error("cannot write " + out);
      write_csv(data, os);
      std::cout << "wrote " << data.size() << " samples to " << out << '\n';
      return 0;
    }
    if (*plot) {
      std::vector<ResultRecord> loaded;
      for (const auto& path : records) {
        std::ifstream in(path);
        loaded.push_back(record_from_json(json::parse(in)));
      }
      const std::string table = plot_table(loaded);
      if (plot_out.empty()) {
        std::cout << table;
      } else {
        write_atomic(plot_out, table);
      }
      return 0;
    }
    if (*inspect) {
      const Model model = load_checkpoint(std::filesystem::path(ckpt));
      std::cout << to_json(model.config()).dump(2) << '\n'
                << "grid points: " << model.grid().size() << '\n'
                << "parameters: " << model.parameters().size() << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
