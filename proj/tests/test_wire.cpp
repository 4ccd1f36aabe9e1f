#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "hyperdrive/wire.hpp"

using namespace hyperdrive;
using namespace hyperdrive::wire;

namespace {

cube::DataCube random_cube(std::mt19937_64& rng, bool u16_friendly) {
  std::uniform_int_distribution<int> dim(1, 8);
  const int h = dim(rng), w = dim(rng), c = dim(rng);
  cube::DataCube cube(h, w, c);
  cube.timestamp_ns = static_cast<std::int64_t>(rng());
  std::uniform_real_distribution<float> wf(400.0f, 1700.0f);
  for (int i = 0; i < c; ++i) {
    cube.wavelengths_nm[i] = wf(rng);
    cube.fwhm_nm[i] = wf(rng) / 50.0f;
  }
  if (u16_friendly) {
    std::uniform_int_distribution<int> v(0, 65535);
    for (double& d : cube.data) d = v(rng);
  } else {
    std::uniform_real_distribution<float> v(-1e4f, 1e4f);
    for (double& d : cube.data) d = v(rng);
  }
  return cube;
}

radiometry::SpectrometerReading random_spectrum(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 300);
  const int n = len(rng);
  radiometry::SpectrometerReading r;
  r.timestamp_ns = static_cast<std::int64_t>(rng());
  std::uniform_real_distribution<float> cf(0.0f, 1e5f);
  double w = 400.0;
  for (int i = 0; i < n; ++i) {
    w += 1.0 + (rng() % 8);
    r.wavelengths_nm.push_back(static_cast<float>(w));
    r.counts.push_back(cf(rng));
  }
  if (rng() % 2) r.humidity_pct = static_cast<float>(cf(rng) / 1e3f);
  if (rng() % 2) r.temperature_c = static_cast<float>(cf(rng) / 1e4f);
  if (rng() % 2) r.integration_time_us = static_cast<float>(1.0f + cf(rng));
  return r;
}

}  // namespace

TEST_CASE("1000 randomized messages round-trip bit-exactly") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 500; ++i) {
    const bool u16 = i % 2 == 0;
    cube::DataCube cube = random_cube(rng, u16);
    std::optional<std::vector<float>> qe;
    if (rng() % 2) {
      qe.emplace(cube.channels);
      std::uniform_real_distribution<float> qf(0.0f, 1.0f);
      for (float& q : *qe) q = qf(rng);
    }
    auto bytes = encode_cube(cube, u16 ? DType::u16 : DType::f32, qe ? &*qe : nullptr);
    DecodedCube back = decode_cube(bytes);
    CHECK(back.dtype == (u16 ? DType::u16 : DType::f32));
    CHECK(back.cube.height == cube.height);
    CHECK(back.cube.width == cube.width);
    CHECK(back.cube.channels == cube.channels);
    CHECK(back.cube.timestamp_ns == cube.timestamp_ns);
    CHECK(back.cube.data == cube.data);  // values chosen exactly representable
    CHECK(back.cube.wavelengths_nm == cube.wavelengths_nm);
    CHECK(back.qe == qe);
    CHECK(classify(bytes) == MessageKind::cube);
    CHECK(peek_timestamp(bytes) == cube.timestamp_ns);
  }
  for (int i = 0; i < 500; ++i) {
    radiometry::SpectrometerReading r = random_spectrum(rng);
    auto bytes = encode_spectrum(r);
    radiometry::SpectrometerReading back = decode_spectrum(bytes);
    CHECK(back.timestamp_ns == r.timestamp_ns);
    CHECK(back.wavelengths_nm == r.wavelengths_nm);
    CHECK(back.counts == r.counts);
    CHECK(back.integration_time_us == r.integration_time_us);
    CHECK(back.humidity_pct == r.humidity_pct);
    CHECK(back.temperature_c == r.temperature_c);
    CHECK(classify(bytes) == MessageKind::spectrum);
  }
}

TEST_CASE("u16 encoding rejects out-of-range values") {
  cube::DataCube cube(2, 2, 1);
  cube.wavelengths_nm = {700};
  cube.fwhm_nm = {10};
  cube.data = {1, 2, 3, 70000};
  try {
    encode_cube(cube, DType::u16);
    FAIL("expected encoding error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::encoding);
  }
  cube.data = {1, 2, 3, -1};
  CHECK_THROWS_AS(encode_cube(cube, DType::u16), Error);
}

TEST_CASE("every truncation of a valid message throws, never crashes") {
  std::mt19937_64 rng(7);
  cube::DataCube cube = random_cube(rng, true);
  auto full = encode_cube(cube, DType::u16);
  for (std::size_t n = 0; n < full.size(); ++n) {
    std::vector<std::byte> cut(full.begin(), full.begin() + n);
    CHECK_THROWS_AS(decode_cube(cut), Error);
  }
  auto spec = encode_spectrum(random_spectrum(rng));
  for (std::size_t n = 0; n < spec.size(); ++n) {
    std::vector<std::byte> cut(spec.begin(), spec.begin() + n);
    CHECK_THROWS_AS(decode_spectrum(cut), Error);
  }
}

TEST_CASE("random bit flips decode cleanly or throw, never crash") {
  std::mt19937_64 rng(99);
  auto cube_bytes = encode_cube(random_cube(rng, false), DType::f32);
  auto spec_bytes = encode_spectrum(random_spectrum(rng));
  std::size_t threw = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto corrupt = trial % 2 ? cube_bytes : spec_bytes;
    const int flips = 1 + static_cast<int>(rng() % 4);
    for (int f = 0; f < flips; ++f) {
      const std::size_t pos = rng() % corrupt.size();
      corrupt[pos] ^= static_cast<std::byte>(1u << (rng() % 8));
    }
    try {
      if (classify(corrupt) == MessageKind::cube)
        (void)decode_cube(corrupt);
      else
        (void)decode_spectrum(corrupt);
    } catch (const Error&) {
      ++threw;
    }
  }
  CHECK(threw > 0);  // corruption is actually detected sometimes
}

TEST_CASE("version and magic are enforced") {
  std::mt19937_64 rng(3);
  auto bytes = encode_cube(random_cube(rng, true), DType::u16);
  auto wrong_version = bytes;
  wrong_version[4] = static_cast<std::byte>(9);
  try {
    decode_cube(wrong_version);
    FAIL("expected version error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::version);
  }
  auto wrong_magic = bytes;
  wrong_magic[0] = static_cast<std::byte>('X');
  CHECK_THROWS_AS(classify(wrong_magic), Error);
}

TEST_CASE("capture files append, stream, and detect truncation") {
  const std::string path = "test_capture.tmp.hds";
  std::remove(path.c_str());
  std::mt19937_64 rng(11);
  std::vector<std::vector<std::byte>> messages;
  for (int i = 0; i < 20; ++i) {
    messages.push_back(i % 2 ? encode_cube(random_cube(rng, true), DType::u16)
                             : encode_spectrum(random_spectrum(rng)));
    append_capture_record(path, messages.back());
  }

  std::size_t biggest = 0;
  for (const auto& m : messages) biggest = std::max(biggest, m.size());
  {
    CaptureReader reader(path);
    std::size_t i = 0;
    while (auto rec = reader.next()) {
      REQUIRE(i < messages.size());
      CHECK(*rec == messages[i]);
      ++i;
    }
    CHECK(i == messages.size());
    // Streaming reader never holds more than one record.
    CHECK(reader.max_buffer_bytes() >= biggest);
    CHECK(reader.max_buffer_bytes() <= 2 * biggest);
  }

  // Chop the last record's payload: the reader must throw with an offset.
  {
    std::FILE* f = std::fopen(path.c_str(), "rb+");
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fclose(f);
    std::error_code ec;
    std::filesystem::resize_file(path, static_cast<std::uintmax_t>(size - 5), ec);
    REQUIRE_FALSE(ec);
  }
  {
    CaptureReader reader(path);
    std::size_t ok = 0;
    try {
      while (reader.next()) ++ok;
      FAIL("expected truncation error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::length);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    CHECK(ok == messages.size() - 1);
  }
  std::remove(path.c_str());

  // Empty file reads cleanly as zero records.
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fclose(f);
  CaptureReader empty(path);
  CHECK_FALSE(empty.next().has_value());
  std::remove(path.c_str());
}

TEST_CASE("describe_message names the key header fields") {
  std::mt19937_64 rng(5);
  cube::DataCube cube = random_cube(rng, true);
  auto text = describe_message(encode_cube(cube, DType::u16));
  CHECK(text.find("HDC1") != std::string::npos);
  CHECK(text.find("u16") != std::string::npos);
  auto stext = describe_message(encode_spectrum(random_spectrum(rng)));
  CHECK(stext.find("HDS1") != std::string::npos);
}

TEST_CASE("encoded size formula: header + tables + payload") {
  cube::DataCube cube(3, 5, 7);
  for (int i = 0; i < 7; ++i) cube.wavelengths_nm[i] = 700 + i;
  for (int i = 0; i < 7; ++i) cube.fwhm_nm[i] = 10;
  auto bytes = encode_cube(cube, DType::u16);
  // magic(4) + version(2) + ts(8) + dims(12) + dtype(1) + wl(4C) + fwhm(4C)
  // + qe flag(1) + payload(2 H W C)
  CHECK(bytes.size() == 4 + 2 + 8 + 12 + 1 + 4 * 7 + 4 * 7 + 1 + 2ull * 3 * 5 * 7);
}
