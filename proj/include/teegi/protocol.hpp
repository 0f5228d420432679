#pragma once

// Host -> puppet wire frame (1242 bytes, little-endian) and the puppet-side
// ingest rule.
//
//   off  size  field
//     0     2  magic "TG"
//     2     1  version (1)
//     3     1  flags: bit0 mode (1 = puppet), bit1 eyes closed, bits2-7 zero
//     4     4  seq
//     8     8  4 servo angles, u16 in 0.1 degree units (<= 3000)
//    16    16  two 8x8 eye bitmaps, row-major, MSB = leftmost column
//    32  1206  402 RGB triplets in lattice index order
//  1238     4  CRC-32 (IEEE, reflected) over bytes [0, 1238)

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teegi/avatar.hpp"

namespace teegi {

inline constexpr std::size_t kWireLedCount = 402;
inline constexpr std::size_t kFrameSize = 1242;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint16_t kMaxServoWord = 3000;
inline constexpr std::uint16_t kDefaultPuppetPort = 5454;

inline constexpr std::uint8_t kFlagPuppetMode = 0x01;
inline constexpr std::uint8_t kFlagEyesClosed = 0x02;
inline constexpr std::uint8_t kFlagReservedMask = 0xFC;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

struct PuppetFrame {
  std::uint8_t version{kProtocolVersion};
  std::uint8_t flags{0};
  std::uint32_t seq{0};
  std::array<std::uint16_t, 4> servo{};  // 0.1 degree
  std::array<EyeBitmap, 2> eyes{kEyeOpenBitmap, kEyeOpenBitmap};
  std::array<std::uint8_t, kWireLedCount * 3> led_rgb{};
  std::uint32_t crc{0};

  Mode mode() const noexcept { return (flags & kFlagPuppetMode) ? Mode::Puppet : Mode::Avatar; }
  bool eyes_closed() const noexcept { return (flags & kFlagEyesClosed) != 0; }
  Rgb led(std::size_t i) const { return {led_rgb[3 * i], led_rgb[3 * i + 1], led_rgb[3 * i + 2]}; }
  double servo_deg(std::size_t i) const { return servo[i] / 10.0; }

  // Field equality; the CRC is derived.
  bool same_fields(const PuppetFrame& o) const {
    return version == o.version && flags == o.flags && seq == o.seq && servo == o.servo && eyes == o.eyes &&
           led_rgb == o.led_rgb;
  }
};

class ProtocolError : public std::runtime_error {
 public:
  enum class Kind { Protocol, Truncation, Integrity, UnsupportedVersion, Validation };

  ProtocolError(Kind kind, std::string field, const std::string& what)
      : std::runtime_error(std::string(kind_name(kind)) + " (" + field + "): " + what),
        kind_(kind),
        field_(std::move(field)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

  static constexpr const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Protocol: return "protocol-error";
      case Kind::Truncation: return "truncation-error";
      case Kind::Integrity: return "integrity-error";
      case Kind::UnsupportedVersion: return "unsupported-version";
      case Kind::Validation: return "validation-error";
    }
    return "?";
  }

 private:
  Kind kind_;
  std::string field_;
};

inline std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

namespace detail {

inline void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

inline void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

inline std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// Quantize an avatar snapshot into wire fields.
inline PuppetFrame frame_from_state(const AvatarState& state, std::uint32_t seq) {
  PuppetFrame f;
  f.seq = seq;
  f.flags = static_cast<std::uint8_t>((state.mode == Mode::Puppet ? kFlagPuppetMode : 0) |
                                      (state.eyes == Eyes::Closed ? kFlagEyesClosed : 0));
  for (std::size_t i = 0; i < 4; ++i) {
    const double a = state.servo_angles[i];
    if (!(a >= 0.0 && a <= 300.0)) {
      throw std::invalid_argument("encode: servo " + std::to_string(i) + " angle out of [0, 300]");
    }
    f.servo[i] = static_cast<std::uint16_t>(std::lround(a * 10.0));
  }
  f.eyes = state.eye_bitmaps;
  if (state.led_field.colors.size() != kWireLedCount) {
    throw std::invalid_argument("encode: LED field must hold exactly 402 colors");
  }
  for (std::size_t i = 0; i < kWireLedCount; ++i) {
    const auto& c = state.led_field.colors[i];
    f.led_rgb[3 * i] = c.r;
    f.led_rgb[3 * i + 1] = c.g;
    f.led_rgb[3 * i + 2] = c.b;
  }
  return f;
}

inline FrameBytes encode_frame(const PuppetFrame& f) {
  if (f.flags & kFlagReservedMask) throw std::invalid_argument("encode: reserved flag bits set");
  FrameBytes out{};
  std::uint8_t* p = out.data();
  p[0] = 0x54;
  p[1] = 0x47;
  p[2] = f.version;
  p[3] = f.flags;
  detail::put_u32(p + 4, f.seq);
  for (std::size_t i = 0; i < 4; ++i) {
    if (f.servo[i] > kMaxServoWord) throw std::invalid_argument("encode: servo word exceeds 3000");
    detail::put_u16(p + 8 + 2 * i, f.servo[i]);
  }
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t r = 0; r < 8; ++r) p[16 + 8 * e + r] = f.eyes[e][r];
  }
  std::copy(f.led_rgb.begin(), f.led_rgb.end(), p + 32);
  detail::put_u32(p + 1238, crc32_ieee(std::span<const std::uint8_t>(p, 1238)));
  return out;
}

inline FrameBytes encode(const AvatarState& state, std::uint32_t seq) { return encode_frame(frame_from_state(state, seq)); }

/// Validate and parse one datagram. Checks run length, magic, version, CRC,
/// then field ranges.
inline PuppetFrame decode(std::span<const std::uint8_t> bytes) {
  using K = ProtocolError::Kind;
  if (bytes.size() != kFrameSize) {
    throw ProtocolError(K::Truncation, "length", "expected 1242 bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint8_t* p = bytes.data();
  if (p[0] != 0x54 || p[1] != 0x47) throw ProtocolError(K::Protocol, "magic", "bad magic");
  if (p[2] != kProtocolVersion) {
    throw ProtocolError(K::UnsupportedVersion, "version", "version " + std::to_string(p[2]));
  }
  const std::uint32_t crc = detail::get_u32(p + 1238);
  if (crc != crc32_ieee(bytes.first(1238))) throw ProtocolError(K::Integrity, "crc", "checksum mismatch");

  PuppetFrame f;
  f.version = p[2];
  f.flags = p[3];
  if (f.flags & kFlagReservedMask) throw ProtocolError(K::Validation, "flags", "reserved bits set");
  f.seq = detail::get_u32(p + 4);
  for (std::size_t i = 0; i < 4; ++i) {
    f.servo[i] = detail::get_u16(p + 8 + 2 * i);
    if (f.servo[i] > kMaxServoWord) {
      throw ProtocolError(K::Validation, "servo[" + std::to_string(i) + "]", "exceeds 300.0 degrees");
    }
  }
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t r = 0; r < 8; ++r) f.eyes[e][r] = p[16 + 8 * e + r];
  }
  std::copy(p + 32, p + 1238, f.led_rgb.begin());
  f.crc = crc;
  return f;
}

// ---------------------------------------------------------------------------
// Puppet-side ingest

struct EmulatorState {
  std::optional<PuppetFrame> displayed;
  std::uint32_t last_seq{0};
  std::uint64_t accepted{0};
  std::uint64_t dropped{0};
  std::uint64_t errors{0};
  double last_update{0.0};
};

/// True when `seq` is ahead of `last` within half the 32-bit range.
inline constexpr bool seq_newer(std::uint32_t seq, std::uint32_t last) {
  const std::uint32_t diff = seq - last;
  return diff != 0 && diff < 0x80000000u;
}

/// Last-writer-wins ingest. Stale or duplicate sequence numbers count as
/// dropped; undecodable datagrams count as errors. Never throws.
inline EmulatorState emulator_ingest(EmulatorState state, std::span<const std::uint8_t> datagram, double now = 0.0) {
  PuppetFrame f;
  try {
    f = decode(datagram);
  } catch (const ProtocolError&) {
    ++state.errors;
    return state;
  }
  if (state.displayed && !seq_newer(f.seq, state.last_seq)) {
    ++state.dropped;
    return state;
  }
  state.displayed = f;
  state.last_seq = f.seq;
  ++state.accepted;
  state.last_update = now;
  return state;
}

}  // namespace teegi
