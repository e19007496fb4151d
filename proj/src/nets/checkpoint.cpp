#include "rlnst/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rlnst {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename I>
void put(std::string& buf, I v) {
  char bytes[sizeof(I)];
  std::memcpy(bytes, &v, sizeof(I));
  buf.append(bytes, sizeof(I));
}

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  template <typename I>
  I get() {
    I v;
    std::memcpy(&v, take(sizeof(I)), sizeof(I));
    return v;
  }
  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw CheckpointError(CheckpointError::Kind::truncated, origin_ + ": file ends unexpectedly");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

template <typename S, typename T>
void read_values(Reader& in, std::vector<T>& out) {
  const char* raw = in.take(out.size() * sizeof(S));
  for (std::size_t i = 0; i < out.size(); ++i) {
    S v;
    std::memcpy(&v, raw + i * sizeof(S), sizeof(S));
    out[i] = static_cast<T>(v);
  }
}

}  // namespace

template <typename T>
void save_checkpoint(const ParamRegistry<T>& reg, const std::filesystem::path& path) {
  std::string buf(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint8_t>(buf, std::is_same_v<T, float> ? 0 : 1);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(reg.size()));
  for (const auto& e : reg.entries()) {
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(e.name.size()));
    buf.append(e.name);
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(e.tensor.rank()));
    for (auto extent : e.tensor.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(extent));
    const auto values = e.tensor.data();
    buf.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write checkpoint " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "short write to " + path.string());
}

template <typename T>
ParamRegistry<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path.string());
  Reader in(std::string(std::istreambuf_iterator<char>(file), {}), path.string());

  if (std::memcmp(in.take(sizeof(kCheckpointMagic)), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError(CheckpointError::Kind::bad_magic, path.string() + ": not an RLNST1 checkpoint");
  }
  const auto dtype = in.get<std::uint8_t>();
  if (dtype > 1) {
    throw CheckpointError(CheckpointError::Kind::bad_version,
                          path.string() + ": unsupported dtype code " + std::to_string(dtype));
  }
  const auto count = in.get<std::uint32_t>();
  ParamRegistry<T> reg;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint16_t>();
    std::string name(in.take(name_len), name_len);
    const auto rank = in.get<std::uint8_t>();
    Shape shape(rank);
    for (auto& extent : shape) extent = in.get<std::uint32_t>();
    std::vector<T> values(static_cast<std::size_t>(numel_of(shape)));
    if (dtype == 0) {
      read_values<float>(in, values);
    } else {
      read_values<double>(in, values);
    }
    try {
      reg.add(name, Tensor<T>::from(shape, std::move(values)));
    } catch (const ArgumentError& e) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch, path.string() + ": " + e.what());
    }
  }
  if (!in.done()) {
    throw CheckpointError(CheckpointError::Kind::truncated, path.string() + ": trailing bytes after last entry");
  }
  return reg;
}

template <typename T, typename U>
void apply_checkpoint(Networks<T>& nets, const ParamRegistry<U>& loaded) {
  bool only_features = true;
  for (const auto& e : loaded.entries()) only_features = only_features && e.owner == Owner::featnet;
  for (const auto& e : nets.params.entries()) {
    if (only_features && e.owner != Owner::featnet) continue;
    if (!loaded.contains(e.name)) {
      throw CheckpointError(CheckpointError::Kind::missing_entry, "checkpoint lacks parameter '" + e.name + "'");
    }
    if (loaded.at(e.name).shape() != e.tensor.shape()) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "parameter '" + e.name + "' has shape " + to_string(loaded.at(e.name).shape()) +
                                " in checkpoint but " + to_string(e.tensor.shape()) + " in the network");
    }
  }
  for (const auto& e : loaded.entries()) {
    if (!nets.params.contains(e.name)) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "checkpoint parameter '" + e.name + "' does not exist in this architecture");
    }
  }
  nets.params.assign_from(loaded);
}

template void save_checkpoint(const ParamRegistry<float>&, const std::filesystem::path&);
template void save_checkpoint(const ParamRegistry<double>&, const std::filesystem::path&);
template ParamRegistry<float> load_checkpoint(const std::filesystem::path&);
template ParamRegistry<double> load_checkpoint(const std::filesystem::path&);
template void apply_checkpoint(Networks<float>&, const ParamRegistry<float>&);
template void apply_checkpoint(Networks<double>&, const ParamRegistry<float>&);
template void apply_checkpoint(Networks<double>&, const ParamRegistry<double>&);
template void apply_checkpoint(Networks<float>&, const ParamRegistry<double>&);

}  // namespace rlnst
