#include "gridrl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace gridrl::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError(path.string() + ": truncated checkpoint");
  return v;
}

CheckpointHeader read_header(std::istream& is, const std::filesystem::path& path) {
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint file");
  }
  CheckpointHeader h;
  h.version = get<std::uint32_t>(is, path);
  if (h.version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(h.version));
  }
  h.schema_hash = get<std::uint64_t>(is, path);
  h.step = get<std::int64_t>(is, path);
  h.parameter_count = get<std::uint64_t>(is, path);
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyNetwork& net, std::int64_t step) {
  const Eigen::VectorXd params = net.flat_parameters();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write " + tmp.string());
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint64_t>(os, net.schema_hash());
    put<std::int64_t>(os, step);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(params.size()));
    os.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!os) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  return read_header(is, path);
}

std::int64_t load_checkpoint(const std::filesystem::path& path, PolicyNetwork& net) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  const CheckpointHeader h = read_header(is, path);
  if (h.schema_hash != net.schema_hash()) {
    throw CheckpointError(path.string() + ": schema hash mismatch (checkpoint was written for another layout or encoder)");
  }
  if (h.parameter_count != net.parameter_count()) {
    throw CheckpointError(path.string() + ": parameter count mismatch");
  }
  Eigen::VectorXd params(static_cast<Eigen::Index>(h.parameter_count));
  if (!is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)))) {
    throw CheckpointError(path.string() + ": truncated parameter payload");
  }
  net.set_flat_parameters(params);
  return h.step;
}

}  // namespace gridrl::nn
