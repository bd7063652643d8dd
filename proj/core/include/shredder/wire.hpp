#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shredder/tensor.hpp"

namespace shredder::wire {

// Frame: "SHRP" | version u8 | kind u8 | payload length u32 | payload.
inline constexpr char kMagic[4] = {'S', 'H', 'R', 'P'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kMaxPayload = 64u << 20;

enum class Kind : std::uint8_t { activation_request = 0x01, label_response = 0x02, error = 0x7F };

struct Message {
  Kind kind = Kind::error;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Header {
  Kind kind;
  std::uint32_t payload_length;
};

std::vector<std::uint8_t> encode_message(const Message& message);
// Parses the fixed-size header; rejects bad magic, version, kind or a
// declared length above `max_payload`.
Header decode_header(std::span<const std::uint8_t> header, std::size_t max_payload = kMaxPayload);
// Decodes exactly one complete frame. Never reads past the declared length.
Message decode_message(std::span<const std::uint8_t> frame, std::size_t max_payload = kMaxPayload);

// Activation payload: rank u8 | extents u32 each | f32 values.
std::vector<std::uint8_t> encode_activation(const Tensor& activation);
Tensor decode_activation(std::span<const std::uint8_t> payload);

struct LabelResponse {
  std::uint32_t label = 0;
  std::vector<float> logits;
  friend bool operator==(const LabelResponse&, const LabelResponse&) = default;
};
// Label payload: class index u32 | logit count u32 | f32 logits.
std::vector<std::uint8_t> encode_label(const LabelResponse& response);
LabelResponse decode_label(std::span<const std::uint8_t> payload);

// Bytes on the wire for one activation request carrying `shape`.
std::size_t activation_frame_size(const Shape& shape);

Message make_error(const std::string& reason);

}  // namespace shredder::wire
