#include "clkan/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "clkan/experiment.hpp"

namespace clkan {
namespace {

constexpr std::array<char, 8> kMagic{'C', 'L', 'K', 'A', 'N', 'C', 'K', 'P'};
constexpr std::array<char, 8> kEnd{'C', 'K', 'P', 'T', 'E', 'N', 'D', '!'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_doubles(std::ostream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  read_exact(is, reinterpret_cast<char*>(&v), sizeof v, what);
  return v;
}

void get_doubles(std::istream& is, std::span<double> v, const char* what) {
  read_exact(is, reinterpret_cast<char*>(v.data()), v.size() * sizeof(double), what);
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& os) {
  const std::size_t layers = model.layer_count();
  json stats = json::array();
  for (std::size_t l = 0; l <= layers; ++l)
    stats.push_back({model.running_mean(l).size(), model.running_var(l).size()});
  const json meta = {{"library_version", CLKAN_VERSION},
                     {"model", to_json(model.config())},
                     {"grid", to_json(model.grid().spec())},
                     {"grid_points", model.grid().size()},
                     {"grid_dim", model.grid().dim()},
                     {"param_count", model.parameters().size()},
                     {"running_stats", stats}};
  const std::string text = meta.dump();
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_doubles(os, model.grid().points());
  put_doubles(os, model.parameters());
  for (std::size_t l = 0; l <= layers; ++l) {
    put_doubles(os, model.running_mean(l));
    put_doubles(os, model.running_var(l));
  }
  os.write(kEnd.data(), kEnd.size());
  if (!os) throw CheckpointError("failed writing checkpoint");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  save_checkpoint(model, buf);
  write_atomic(path, buf.str());
}

Model load_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  read_exact(is, magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw CheckpointError("not a clkan checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          "; expected version " + std::to_string(kCheckpointVersion));
  const auto len = get<std::uint64_t>(is, "metadata length");
  if (len > (1u << 26)) throw CheckpointError("checkpoint metadata length is implausible");
  std::string text(len, '\0');
  read_exact(is, text.data(), text.size(), "metadata");

  json meta;
  ModelConfig cfg;
  GridSpec spec;
  std::size_t points = 0, dim = 0, count = 0;
  try {
    meta = json::parse(text);
    cfg = model_from_json(meta.at("model"));
    spec = grid_from_json(meta.at("grid"));
    points = meta.at("grid_points").get<std::size_t>();
    dim = meta.at("grid_dim").get<std::size_t>();
    count = meta.at("param_count").get<std::size_t>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  if (dim != cfg.signature.dimension())
    throw CheckpointError("checkpoint grid dimension does not match its algebra");

  std::vector<double> pts(points * dim);
  get_doubles(is, pts, "grid points");
  Model model(cfg, Grid(spec, dim, std::move(pts)));
  if (model.parameters().size() != count)
    throw CheckpointError("checkpoint parameter count " + std::to_string(count) +
                          " does not match its config (" +
                          std::to_string(model.parameters().size()) + ")");
  get_doubles(is, model.parameters(), "parameters");
  const json& stats = meta.at("running_stats");
  if (stats.size() != model.layer_count() + 1)
    throw CheckpointError("checkpoint running statistics do not match the model");
  for (std::size_t l = 0; l <= model.layer_count(); ++l) {
    auto& mean = model.running_mean(l);
    auto& var = model.running_var(l);
    if (stats[l][0].get<std::size_t>() != mean.size() ||
        stats[l][1].get<std::size_t>() != var.size())
      throw CheckpointError("checkpoint running statistics do not match the model");
    get_doubles(is, mean, "running mean");
    get_doubles(is, var, "running variance");
  }
  std::array<char, 8> end{};
  read_exact(is, end.data(), end.size(), "end marker");
  if (end != kEnd) throw CheckpointError("checkpoint end marker missing");
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace clkan
