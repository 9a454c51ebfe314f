// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// RIFF/WAVE mono reader and writer: PCM 16-bit and IEEE float32, little-endian.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/signal/waveform.hpp"

namespace septfa::wav {

enum class SampleFormat { kPcm16, kFloat32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
inline void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace detail

/// Parses a WAV image held in memory. `expected_rate`, when set, rejects any
/// other rate; no resampling is ever done.
inline Waveform decode(const std::vector<unsigned char>& bytes, const std::string& name,
                       std::optional<int> expected_rate = std::nullopt) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError(name + ": not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int format_tag = -1, channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t len = read_u32(hdr + 4);
    std::size_t body = pos + 8;
    if (body + len > bytes.size()) len = static_cast<std::uint32_t>(bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) throw IoError(name + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format_tag = read_u16(f);
      channels = read_u16(f + 2);
      rate = static_cast<int>(read_u32(f + 4));
      bits = read_u16(f + 14);
      if (format_tag == 0xFFFE && len >= 26) format_tag = read_u16(f + 24);  // extensible
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (format_tag < 0) throw IoError(name + ": missing fmt chunk");
  if (data == nullptr) throw IoError(name + ": missing data chunk");
  if (channels != 1) {
    throw IoError(name + ": expected mono, got " + std::to_string(channels) + " channels");
  }
  if (expected_rate && rate != *expected_rate) {
    throw IoError(name + ": sample rate " + std::to_string(rate) + " Hz, expected " +
                  std::to_string(*expected_rate) + " Hz");
  }
  Waveform w;
  w.sample_rate = rate;
  if (format_tag == 1 && bits == 16) {
    const std::size_t n = data_len / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
      w.samples[i] = static_cast<Real>(v) / 32768.0;
    }
  } else if (format_tag == 3 && bits == 32) {
    const std::size_t n = data_len / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      w.samples[i] = static_cast<Real>(f);
    }
  } else {
    throw IoError(name + ": unsupported encoding (format " + std::to_string(format_tag) +
                  ", " + std::to_string(bits) + " bits)");
  }
  return w;
}

inline Waveform read(const std::string& path, std::optional<int> expected_rate = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode(bytes, path, expected_rate);
}

inline std::vector<unsigned char> encode(const Waveform& w,
                                         SampleFormat fmt = SampleFormat::kFloat32) {
  using namespace detail;
  const bool is_float = fmt == SampleFormat::kFloat32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.size() * (bits / 8));
  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, is_float ? 3 : 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_len);
  for (Real v : w.samples) {
    if (is_float) {
      float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    } else {
      double c = std::clamp(v, -1.0, 32767.0 / 32768.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    }
  }
  return out;
}

inline void write(const std::string& path, const Waveform& w,
                  SampleFormat fmt = SampleFormat::kFloat32) {
  const auto bytes = encode(w, fmt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path);
}

}  // namespace septfa::wav
