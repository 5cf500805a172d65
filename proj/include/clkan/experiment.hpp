#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "clkan/datasets.hpp"
#include "clkan/network.hpp"
#include "clkan/training.hpp"

namespace clkan {

using nlohmann::json;

/// Environment variable naming the root that relative output directories
/// are resolved against.
inline constexpr const char* kOutputRootEnv = "CLKAN_OUTPUT_ROOT";

/// One experiment: data, model, training protocol and where results go.
/// A sweep block expands it into one experiment per grid / norm / rbf choice.
struct ExperimentConfig {
  std::string name = "experiment";
  Task task = Task::Square;
  ModelConfig model;
  TrainConfig train;
  /// Zero means the default from sample_counts().
  std::size_t train_val_samples = 0;
  std::size_t test_samples = 0;
  std::uint64_t data_seed = 0;
  std::string output_dir = "results";
  bool save_checkpoints = false;

  std::vector<GridSpec> sweep_grids;
  std::vector<NormKind> sweep_norms;
  std::vector<RbfKind> sweep_rbfs;

  bool has_sweep() const {
    return !sweep_grids.empty() || !sweep_norms.empty() || !sweep_rbfs.empty();
  }
  /// Every model / task / sample-count precondition, checked up front.
  void validate() const;
  SampleCounts samples() const;
  /// "F-8" style grid label, plus norm and rbf when they are swept.
  std::string label() const;
};

/// Parses a JSON config; errors name the offending key path, e.g.
/// "train.lr: expected a number". A result record is accepted too and
/// yields the config it was produced from.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
json to_json(const ExperimentConfig& cfg);

json to_json(const Signature& sig);
json to_json(const GridSpec& spec);
json to_json(const ModelConfig& cfg);
json to_json(const TrainConfig& cfg);
Signature signature_from_json(const json& j, const std::string& path = "signature");
GridSpec grid_from_json(const json& j, const std::string& path = "grid");
ModelConfig model_from_json(const json& j, const std::string& path = "model");

/// Accepts "0,1,0", "(0,1,0)", "Cl(0,1,0)" and "Cl(0,1)".
Signature parse_signature(const std::string& s);
/// "F-8" or "S-3".
GridSpec parse_grid_label(const std::string& s);

/// Cartesian product of the sweep axes; a config without a sweep expands to
/// itself.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg);

struct ResultRecord {
  ExperimentConfig config;
  std::size_t param_count = 0;
  CrossValidation cv;
  double wall_clock_s = 0.0;
  std::string version = CLKAN_VERSION;
};

json to_json(const ResultRecord& record);
ResultRecord record_from_json(const json& j);

/// Output directory with CLKAN_OUTPUT_ROOT applied to relative paths.
std::filesystem::path resolve_output_dir(const std::string& dir);

/// Writes via a temporary file in the same directory and renames it over
/// the target.
void write_atomic(const std::filesystem::path& path, const std::string& text);
std::filesystem::path record_path(const ExperimentConfig& cfg);
void write_record(const ResultRecord& record);
/// Appends one row to summary.csv in the output directory, writing the
/// header first when the file is new.
void append_summary(const ResultRecord& record);
std::string summary_header();
std::string summary_row(const ResultRecord& record);

struct RunOptions {
  std::ostream* log = nullptr;
  /// Print a progress line every this many epochs (0: never).
  int log_every = 0;
  bool write_outputs = true;
};

/// Generates data, cross-validates, and (optionally) writes the record,
/// summary row and fold checkpoints.
ResultRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Tab-separated series of grid size vs. error, one line per record sorted
/// by parameter count, for plotting MSE-vs-grid-size figures.
std::string plot_table(const std::vector<ResultRecord>& records);

}  // namespace clkan
