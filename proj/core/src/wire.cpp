#include "shredder/wire.hpp"

#include <limits>
#include <string_view>

#include "shredder/byte_io.hpp"
#include "shredder/error.hpp"

namespace shredder::wire {

std::vector<std::uint8_t> encode_message(const Message& message) {
  if (message.payload.size() > kMaxPayload) throw FormatError("frame payload exceeds the 64 MiB cap");
  ByteWriter w;
  w.text({kMagic, 4});
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(message.kind));
  w.u32(static_cast<std::uint32_t>(message.payload.size()));
  w.bytes(message.payload);
  return w.release();
}

Header decode_header(std::span<const std::uint8_t> header, std::size_t max_payload) {
  ByteReader r(header, "frame header");
  if (r.text(4) != std::string_view(kMagic, 4)) throw FormatError("frame: bad magic");
  if (const auto v = r.u8(); v != kVersion) throw FormatError("frame: unsupported version " + std::to_string(v));
  const auto kind = r.u8();
  if (kind != 0x01 && kind != 0x02 && kind != 0x7F) throw FormatError("frame: unknown kind " + std::to_string(kind));
  const auto length = r.u32();
  if (length > max_payload) {
    throw FormatError("frame: declared payload " + std::to_string(length) + " exceeds cap " +
                      std::to_string(max_payload));
  }
  return {static_cast<Kind>(kind), length};
}

Message decode_message(std::span<const std::uint8_t> frame, std::size_t max_payload) {
  if (frame.size() < kHeaderSize) throw FormatError("frame: truncated header");
  const auto header = decode_header(frame.first(kHeaderSize), max_payload);
  ByteReader r(frame.subspan(kHeaderSize), "frame payload");
  const auto payload = r.bytes(header.payload_length);
  r.expect_end();
  return {header.kind, {payload.begin(), payload.end()}};
}

std::vector<std::uint8_t> encode_activation(const Tensor& activation) {
  if (activation.rank() == 0 || activation.empty()) throw ShapeError("cannot encode an empty (rank 0) activation");
  if (activation.rank() > std::numeric_limits<std::uint8_t>::max()) throw ShapeError("activation rank too large");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(activation.rank()));
  for (auto e : activation.shape()) w.u32(static_cast<std::uint32_t>(e));
  for (float v : activation.values()) w.f32(v);
  return w.release();
}

Tensor decode_activation(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "activation payload");
  const auto rank = r.u8();
  if (rank == 0) throw FormatError("activation payload: rank 0");
  Shape shape(rank);
  std::size_t n = 1;
  for (auto& e : shape) {
    e = r.u32();
    if (e == 0) throw FormatError("activation payload: zero extent");
    if (n > r.remaining() / e) throw FormatError("activation payload: extents exceed payload");
    n *= e;
  }
  if (r.remaining() != n * sizeof(float)) {
    throw FormatError("activation payload: expected " + std::to_string(n * sizeof(float)) + " value bytes, got " +
                      std::to_string(r.remaining()));
  }
  std::vector<float> values(n);
  for (auto& v : values) v = r.f32();
  return Tensor(std::move(shape), std::move(values));
}

std::vector<std::uint8_t> encode_label(const LabelResponse& response) {
  ByteWriter w;
  w.u32(response.label);
  w.u32(static_cast<std::uint32_t>(response.logits.size()));
  for (float v : response.logits) w.f32(v);
  return w.release();
}

LabelResponse decode_label(std::span<const std::uint8_t> payload) {
  ByteReader r(payload, "label payload");
  LabelResponse out;
  out.label = r.u32();
  const auto count = r.u32();
  if (r.remaining() != static_cast<std::size_t>(count) * sizeof(float)) {
    throw FormatError("label payload: logit count does not match payload size");
  }
  if (count > 0 && out.label >= count) throw FormatError("label payload: label outside logit range");
  out.logits.resize(count);
  for (auto& v : out.logits) v = r.f32();
  return out;
}

std::size_t activation_frame_size(const Shape& shape) {
  return kHeaderSize + 1 + 4 * shape.size() + sizeof(float) * element_count(shape);
}

Message make_error(const std::string& reason) { return {Kind::error, {reason.begin(), reason.end()}}; }

}  // namespace shredder::wire
