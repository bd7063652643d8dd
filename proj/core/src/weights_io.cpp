#include <fstream>
#include <limits>

#include "shredder/byte_io.hpp"
#include "shredder/network.hpp"

namespace shredder {

namespace {
constexpr char kWeightsMagic[4] = {'S', 'H', 'R', 'W'};
constexpr std::uint8_t kWeightsVersion = 0x01;
}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void Weights::insert(std::string name, Tensor tensor) {
  if (find(name)) throw FormatError("duplicate weight tensor '" + name + "'");
  entries_.emplace_back(std::move(name), std::make_shared<const Tensor>(std::move(tensor)));
}

std::shared_ptr<const Tensor> Weights::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_weights(const Weights& weights) {
  ByteWriter w;
  w.text({kWeightsMagic, 4});
  w.u8(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, tensor] : weights.entries()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("weight name too long");
    if (tensor->rank() > std::numeric_limits<std::uint8_t>::max()) throw FormatError("tensor rank too large");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
    w.u8(static_cast<std::uint8_t>(tensor->rank()));
    for (auto e : tensor->shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : tensor->values()) w.f32(v);
  }
  return w.release();
}

Weights decode_weights(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "weights file");
  if (r.text(4) != std::string_view(kWeightsMagic, 4)) throw FormatError("weights file: bad magic");
  if (const auto v = r.u8(); v != kWeightsVersion) {
    throw FormatError("weights file: unsupported version " + std::to_string(v));
  }
  const std::uint32_t count = r.u32();
  Weights weights;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.text(r.u16());
    const std::uint8_t rank = r.u8();
    if (rank == 0) throw FormatError("weights file: tensor '" + name + "' has rank 0");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = r.u32();
      if (e == 0) throw FormatError("weights file: tensor '" + name + "' has a zero extent");
      n *= e;
    }
    if (n > r.remaining() / sizeof(float)) throw FormatError("weights file: truncated payload for '" + name + "'");
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32();
    weights.insert(name, Tensor(std::move(shape), std::move(data)));
  }
  r.expect_end();
  return weights;
}

Weights load_weights(const std::filesystem::path& path) { return decode_weights(read_file_bytes(path)); }

void save_weights(const std::filesystem::path& path, const Weights& weights) {
  write_file_bytes(path, encode_weights(weights));
}

Digest weights_digest(const Weights& weights) { return sha256(encode_weights(weights)); }

}  // namespace shredder
