#include "hyperdrive/wire.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace hyperdrive::wire {

namespace {

// Little-endian primitive writers/readers. The reader throws a length error
// whenever a read would pass the end of the declared buffer.

class Writer {
 public:
  explicit Writer(std::vector<std::byte>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    // Host is little-endian on every supported target; keep the byte order
    // explicit anyway for integer types.
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::byte>(raw[i]));
  }

  void put_bytes(const char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out_.push_back(static_cast<std::byte>(p[i]));
  }

 private:
  std::vector<std::byte>& out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::byte>& in) : in_(in) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > in_.size())
      fail(Errc::length, "message truncated at byte " + std::to_string(pos_));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void get_bytes(char* p, std::size_t n) {
    if (pos_ + n > in_.size())
      fail(Errc::length, "message truncated at byte " + std::to_string(pos_));
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::byte>& in_;
  std::size_t pos_ = 0;
};

bool magic_is(const std::vector<std::byte>& bytes, const char (&magic)[4]) {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), magic, 4) == 0;
}

constexpr std::uint8_t kFlagHumidity = 0x01;
constexpr std::uint8_t kFlagTemperature = 0x02;
constexpr std::uint8_t kFlagIntegrationTime = 0x04;

}  // namespace

std::vector<std::byte> encode_cube(const cube::DataCube& cube, DType dtype,
                                   const std::vector<float>* qe) {
  if (cube.height <= 0 || cube.width <= 0 || cube.channels <= 0)
    fail(Errc::invalid_argument, "cannot encode an empty cube");
  if (qe && static_cast<int>(qe->size()) != cube.channels)
    fail(Errc::invalid_argument, "QE table length must match channel count");
  const std::size_t count =
      static_cast<std::size_t>(cube.height) * cube.width * cube.channels;

  std::vector<std::byte> out;
  out.reserve(64 + cube.channels * 8 + count * (dtype == DType::u16 ? 2 : 4));
  Writer w(out);
  w.put_bytes(kCubeMagic, 4);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(cube.timestamp_ns));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cube.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cube.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cube.channels));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
  for (int c = 0; c < cube.channels; ++c) w.put<float>(static_cast<float>(cube.wavelengths_nm[c]));
  for (int c = 0; c < cube.channels; ++c) w.put<float>(static_cast<float>(cube.fwhm_nm[c]));
  w.put<std::uint8_t>(qe ? 1 : 0);
  if (qe)
    for (float v : *qe) w.put<float>(v);

  if (dtype == DType::u16) {
    for (std::size_t i = 0; i < count; ++i) {
      const double v = cube.data[i];
      if (!(v >= 0.0 && v <= 65535.0))
        fail(Errc::encoding, "value out of u16 range at element " + std::to_string(i));
      w.put<std::uint16_t>(static_cast<std::uint16_t>(std::lround(v)));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) w.put<float>(static_cast<float>(cube.data[i]));
  }
  return out;
}

DecodedCube decode_cube(const std::vector<std::byte>& bytes) {
  if (!magic_is(bytes, kCubeMagic)) fail(Errc::format, "bad cube message magic");
  Reader r(bytes);
  char magic[4];
  r.get_bytes(magic, 4);
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion)
    fail(Errc::version, "unknown cube message version " + std::to_string(version));
  const auto timestamp = r.get<std::uint64_t>();
  const auto h = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  const auto c = r.get<std::uint32_t>();
  if (h == 0 || w == 0 || c == 0 || h > (1u << 24) || w > (1u << 24) || c > (1u << 16))
    fail(Errc::format, "implausible cube dimensions");
  const auto dtype_code = r.get<std::uint8_t>();
  if (dtype_code > 1) fail(Errc::format, "unknown dtype code");
  const DType dtype = static_cast<DType>(dtype_code);

  DecodedCube out;
  out.dtype = dtype;
  out.cube = cube::DataCube(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  out.cube.timestamp_ns = static_cast<std::int64_t>(timestamp);
  for (std::uint32_t i = 0; i < c; ++i) out.cube.wavelengths_nm[i] = r.get<float>();
  for (std::uint32_t i = 0; i < c; ++i) out.cube.fwhm_nm[i] = r.get<float>();
  const auto qe_flag = r.get<std::uint8_t>();
  if (qe_flag > 1) fail(Errc::format, "bad QE flag");
  if (qe_flag) {
    out.qe.emplace(c);
    for (std::uint32_t i = 0; i < c; ++i) (*out.qe)[i] = r.get<float>();
  }

  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  const std::size_t payload = count * (dtype == DType::u16 ? 2 : 4);
  if (r.remaining() != payload)
    fail(Errc::length, "payload length mismatch: expected " + std::to_string(payload) +
                           " bytes, have " + std::to_string(r.remaining()));
  if (dtype == DType::u16) {
    for (std::size_t i = 0; i < count; ++i) out.cube.data[i] = r.get<std::uint16_t>();
  } else {
    for (std::size_t i = 0; i < count; ++i) out.cube.data[i] = r.get<float>();
  }
  return out;
}

std::vector<std::byte> encode_spectrum(const radiometry::SpectrometerReading& reading) {
  reading.validate();
  const std::size_t n = reading.wavelengths_nm.size();
  if (n > 65535) fail(Errc::invalid_argument, "spectrum too long for u16 sample count");

  std::vector<std::byte> out;
  Writer w(out);
  w.put_bytes(kSpectrumMagic, 4);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(reading.timestamp_ns));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(n));
  for (double v : reading.wavelengths_nm) w.put<float>(static_cast<float>(v));
  for (double v : reading.counts) w.put<float>(static_cast<float>(v));
  std::uint8_t flags = 0;
  if (reading.humidity_pct) flags |= kFlagHumidity;
  if (reading.temperature_c) flags |= kFlagTemperature;
  if (reading.integration_time_us != 1.0) flags |= kFlagIntegrationTime;
  w.put<std::uint8_t>(flags);
  if (reading.humidity_pct) w.put<float>(static_cast<float>(*reading.humidity_pct));
  if (reading.temperature_c) w.put<float>(static_cast<float>(*reading.temperature_c));
  if (flags & kFlagIntegrationTime) w.put<float>(static_cast<float>(reading.integration_time_us));
  return out;
}

radiometry::SpectrometerReading decode_spectrum(const std::vector<std::byte>& bytes) {
  if (!magic_is(bytes, kSpectrumMagic)) fail(Errc::format, "bad spectrum message magic");
  Reader r(bytes);
  char magic[4];
  r.get_bytes(magic, 4);
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion)
    fail(Errc::version, "unknown spectrum message version " + std::to_string(version));
  radiometry::SpectrometerReading out;
  out.timestamp_ns = static_cast<std::int64_t>(r.get<std::uint64_t>());
  const auto n = r.get<std::uint16_t>();
  if (n == 0) fail(Errc::format, "spectrum message with zero samples");
  out.wavelengths_nm.resize(n);
  out.counts.resize(n);
  for (std::uint16_t i = 0; i < n; ++i) out.wavelengths_nm[i] = r.get<float>();
  for (std::uint16_t i = 0; i < n; ++i) out.counts[i] = r.get<float>();
  const auto flags = r.get<std::uint8_t>();
  if (flags & ~(kFlagHumidity | kFlagTemperature | kFlagIntegrationTime))
    fail(Errc::format, "unknown spectrum metadata flags");
  if (flags & kFlagHumidity) out.humidity_pct = r.get<float>();
  if (flags & kFlagTemperature) out.temperature_c = r.get<float>();
  if (flags & kFlagIntegrationTime) out.integration_time_us = r.get<float>();
  if (r.remaining() != 0) fail(Errc::length, "trailing bytes after spectrum message");
  out.validate();
  return out;
}

MessageKind classify(const std::vector<std::byte>& bytes) {
  if (magic_is(bytes, kCubeMagic)) return MessageKind::cube;
  if (magic_is(bytes, kSpectrumMagic)) return MessageKind::spectrum;
  fail(Errc::format, "unknown message magic");
}

std::int64_t peek_timestamp(const std::vector<std::byte>& bytes) {
  classify(bytes);
  Reader r(bytes);
  char magic[4];
  r.get_bytes(magic, 4);
  r.get<std::uint16_t>();
  return static_cast<std::int64_t>(r.get<std::uint64_t>());
}

void append_capture_record(const std::string& path, const std::vector<std::byte>& message) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) fail(Errc::storage, "cannot open capture file for append: " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(message.size());
  bool ok = std::fwrite(&len, sizeof(len), 1, f) == 1 &&
            (message.empty() || std::fwrite(message.data(), 1, message.size(), f) == message.size());
  std::fclose(f);
  if (!ok) fail(Errc::storage, "failed appending capture record: " + path);
}

struct CaptureReader::Impl {
  std::FILE* f = nullptr;
  std::string path;
  std::size_t offset = 0;
  std::size_t max_buffer = 0;
};

CaptureReader::CaptureReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->f = std::fopen(path.c_str(), "rb");
  if (!impl_->f) fail(Errc::storage, "cannot open capture file: " + path);
  impl_->path = path;
}

CaptureReader::~CaptureReader() {
  if (impl_ && impl_->f) std::fclose(impl_->f);
}

CaptureReader::CaptureReader(CaptureReader&&) noexcept = default;
CaptureReader& CaptureReader::operator=(CaptureReader&&) noexcept = default;

std::optional<std::vector<std::byte>> CaptureReader::next() {
  std::uint32_t len;
  const std::size_t got = std::fread(&len, 1, sizeof(len), impl_->f);
  if (got == 0) return std::nullopt;  // clean end of file
  if (got != sizeof(len))
    fail(Errc::length, "truncated record length at offset " + std::to_string(impl_->offset));
  std::vector<std::byte> buf(len);
  if (len > 0 && std::fread(buf.data(), 1, len, impl_->f) != len)
    fail(Errc::length, "truncated record payload at offset " + std::to_string(impl_->offset));
  impl_->max_buffer = std::max(impl_->max_buffer, buf.capacity());
  impl_->offset += sizeof(len) + len;
  return buf;
}

std::size_t CaptureReader::max_buffer_bytes() const { return impl_->max_buffer; }

void stream_capture_file(const std::string& path,
                         const std::function<void(const std::vector<std::byte>&)>& fn) {
  CaptureReader reader(path);
  while (auto msg = reader.next()) fn(*msg);
}

std::string describe_message(const std::vector<std::byte>& bytes) {
  std::ostringstream out;
  switch (classify(bytes)) {
    case MessageKind::cube: {
      auto d = decode_cube(bytes);
      out << "HDC1 cube ts=" << d.cube.timestamp_ns << " dims=" << d.cube.height << "x"
          << d.cube.width << "x" << d.cube.channels
          << " dtype=" << (d.dtype == DType::u16 ? "u16" : "f32")
          << " qe=" << (d.qe ? "yes" : "no") << " bytes=" << bytes.size() << "\n";
      break;
    }
    case MessageKind::spectrum: {
      auto s = decode_spectrum(bytes);
      out << "HDS1 spectrum ts=" << s.timestamp_ns << " n=" << s.wavelengths_nm.size()
          << " range=[" << s.wavelengths_nm.front() << ", " << s.wavelengths_nm.back() << "] nm"
          << " humidity=" << (s.humidity_pct ? "yes" : "no")
          << " temperature=" << (s.temperature_c ? "yes" : "no") << " bytes=" << bytes.size() << "\n";
      break;
    }
  }
  return out.str();
}

}  // namespace hyperdrive::wire
