#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hyperdrive/cube.hpp"
#include "hyperdrive/radiometry.hpp"

namespace hyperdrive::wire {

// Byte layouts are documented in docs/wire.md. Everything is little-endian.

inline constexpr char kCubeMagic[4] = {'H', 'D', 'C', '1'};
inline constexpr char kSpectrumMagic[4] = {'H', 'D', 'S', '1'};
inline constexpr std::uint16_t kVersion = 1;

enum class DType : std::uint8_t { u16 = 0, f32 = 1 };

/// Encode a cube as an HDC1 message. Optional per-channel quantum-efficiency
/// table; u16 payloads require all values in [0, 65535].
std::vector<std::byte> encode_cube(const cube::DataCube& cube, DType dtype,
                                   const std::vector<float>* qe = nullptr);

struct DecodedCube {
  cube::DataCube cube;
  DType dtype;
  std::optional<std::vector<float>> qe;
};

DecodedCube decode_cube(const std::vector<std::byte>& bytes);

std::vector<std::byte> encode_spectrum(const radiometry::SpectrometerReading& reading);
radiometry::SpectrometerReading decode_spectrum(const std::vector<std::byte>& bytes);

/// Peek at a message's magic without a full decode.
enum class MessageKind { cube, spectrum };
MessageKind classify(const std::vector<std::byte>& bytes);
std::int64_t peek_timestamp(const std::vector<std::byte>& bytes);

/// Append a length-prefixed record (u32 length + message bytes).
void append_capture_record(const std::string& path, const std::vector<std::byte>& message);

/// Streaming reader over a capture file; holds at most one record in memory.
class CaptureReader {
 public:
  explicit CaptureReader(const std::string& path);
  ~CaptureReader();
  CaptureReader(CaptureReader&&) noexcept;
  CaptureReader& operator=(CaptureReader&&) noexcept;

  /// Next record, or nullopt at clean end-of-file. Throws a length error
  /// identifying the byte offset on a truncated record.
  std::optional<std::vector<std::byte>> next();

  std::size_t max_buffer_bytes() const;  // peak single-record allocation

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Replay every record through `fn` without loading the whole file.
void stream_capture_file(const std::string& path,
                         const std::function<void(const std::vector<std::byte>&)>& fn);

/// Human-readable header dump for `hyperdrive wire inspect`.
std::string describe_message(const std::vector<std::byte>& bytes);

}  // namespace hyperdrive::wire
