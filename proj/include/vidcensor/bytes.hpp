#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "vidcensor/errors.hpp"

namespace vidcensor {

// Little-endian, bounds-checked byte stream helpers shared by the media and
// model-file parsers. A reader never walks past the end of its buffer; short
// input raises InputError with the caller-supplied context string.

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw InputError(std::string("truncated stream: ") + what);
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void skip(std::size_t n, const char* what) { take(n, what); }

  std::uint8_t read_u8(const char* what) { return take(1, what)[0]; }

  std::uint16_t read_u16le(const char* what) {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(b[0] | (std::uint16_t(b[1]) << 8));
  }

  std::uint32_t read_u32le(const char* what) {
    auto b = take(4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }

  std::uint64_t read_u64le(const char* what) {
    const std::uint64_t lo = read_u32le(what);
    const std::uint64_t hi = read_u32le(what);
    return lo | (hi << 32);
  }

  std::int16_t read_i16le(const char* what) {
    return static_cast<std::int16_t>(read_u16le(what));
  }

  float read_f32le(const char* what) {
    const std::uint32_t raw = read_u32le(what);
    return std::bit_cast<float>(raw);
  }

  double read_f64le(const char* what) {
    const std::uint64_t raw = read_u64le(what);
    return std::bit_cast<double>(raw);
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  std::vector<std::uint8_t>& bytes() { return out_; }
  const std::vector<std::uint8_t>& bytes() const { return out_; }

  void write_raw(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

  void write_text(std::string_view s) {
    out_.insert(out_.end(), s.begin(), s.end());
  }

  void write_u8(std::uint8_t v) { out_.push_back(v); }

  void write_u16le(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }

  void write_u32le(std::uint32_t v) {
    write_u16le(static_cast<std::uint16_t>(v));
    write_u16le(static_cast<std::uint16_t>(v >> 16));
  }

  void write_u64le(std::uint64_t v) {
    write_u32le(static_cast<std::uint32_t>(v));
    write_u32le(static_cast<std::uint32_t>(v >> 32));
  }

  void write_i16le(std::int16_t v) {
    write_u16le(static_cast<std::uint16_t>(v));
  }

  void write_f32le(float v) { write_u32le(std::bit_cast<std::uint32_t>(v)); }

  void write_f64le(double v) { write_u64le(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::vector<std::uint8_t> out_;
};

}  // namespace vidcensor
