#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qtrack/net.hpp"

namespace qtrack {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_config(std::ostream& os, const ModelConfig& c) {
  write_pod<std::int32_t>(os, c.hidden_dim);
  write_pod<std::int32_t>(os, c.num_heads);
  write_pod<std::int32_t>(os, c.num_encoder_layers);
  write_pod<std::int32_t>(os, c.num_decoder_layers);
  write_pod<std::int32_t>(os, c.ffn_dim);
  write_pod<std::int32_t>(os, c.num_det_queries);
  write_pod<std::int32_t>(os, c.category_range);
  write_pod<std::int32_t>(os, c.grid_channels);
  write_pod<double>(os, c.dropout);
  write_pod<double>(os, c.pe_scale);
}

ModelConfig read_config(std::istream& is) {
  ModelConfig c;
  c.hidden_dim = read_pod<std::int32_t>(is);
  c.num_heads = read_pod<std::int32_t>(is);
  c.num_encoder_layers = read_pod<std::int32_t>(is);
  c.num_decoder_layers = read_pod<std::int32_t>(is);
  c.ffn_dim = read_pod<std::int32_t>(is);
  c.num_det_queries = read_pod<std::int32_t>(is);
  c.category_range = read_pod<std::int32_t>(is);
  c.grid_channels = read_pod<std::int32_t>(is);
  c.dropout = read_pod<double>(is);
  c.pe_scale = read_pod<double>(is);
  return c;
}

}  // namespace

template <typename S>
void save_checkpoint(ModelParams<S>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(sizeof(S)));
  write_config(os, params.config);
  auto reg = params.registry();
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(reg.size()));
  for (auto& [name, mat] : reg) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(mat->rows()));
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(mat->cols()));
    for (Eigen::Index r = 0; r < mat->rows(); ++r) {
      for (Eigen::Index c = 0; c < mat->cols(); ++c) {
        write_pod<double>(os, static_cast<double>((*mat)(r, c)));
      }
    }
  }
  if (!os) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

template <typename S>
ModelParams<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  read_pod<std::uint32_t>(is);  // scalar width of the writer; values stored as f64 either way
  const ModelConfig config = read_config(is);
  config.validate();

  ModelParams<S> params = init_model<S>(config, 0);
  auto reg = params.registry();
  const auto count = read_pod<std::uint32_t>(is);
  if (count != reg.size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch");
  }
  for (auto& [name, mat] : reg) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string got(name_len, '\0');
    is.read(got.data(), name_len);
    const auto rows = read_pod<std::uint64_t>(is);
    const auto cols = read_pod<std::uint64_t>(is);
    if (got != name || rows != static_cast<std::uint64_t>(mat->rows()) ||
        cols != static_cast<std::uint64_t>(mat->cols())) {
      throw std::runtime_error("checkpoint: shape table mismatch at tensor '" + got +
                               "', expected '" + name + "'");
    }
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (std::uint64_t c = 0; c < cols; ++c) {
        (*mat)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            static_cast<S>(read_pod<double>(is));
      }
    }
  }
  return params;
}

template void save_checkpoint<float>(ModelParams<float>&, const std::string&);
template void save_checkpoint<double>(ModelParams<double>&, const std::string&);
template ModelParams<float> load_checkpoint<float>(const std::string&);
template ModelParams<double> load_checkpoint<double>(const std::string&);

}  // namespace qtrack
