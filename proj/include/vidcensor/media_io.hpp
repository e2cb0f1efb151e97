#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vidcensor/bytes.hpp"
#include "vidcensor/errors.hpp"
#include "vidcensor/media_model.hpp"

namespace vidcensor {

// Bit-exact readers/writers for the two uncompressed interchange formats the
// pipeline consumes and produces.
//
// Video is YUV4MPEG2. Reading accepts C444p16, C444 and the C420 family;
// writing always emits C444p16 (16-bit planes, 8 fractional bits). Color is
// BT.601 full range in both directions. The 16-bit planes matter: quantizing
// full-range BT.601 to 8 bits only represents about a quarter of the RGB
// cube, so an 8-bit C444 file cannot reproduce arbitrary RGB frames, while
// with 8 fractional bits the inverse lands well inside half an 8-bit step
// and the RGB roundtrip is exact for every pixel value.
//
// Audio is RIFF/WAVE, PCM format 1, 16-bit mono, stored verbatim.

namespace bt601 {

struct Ycc {
  double y, cb, cr;
};

inline Ycc from_rgb(double r, double g, double b) {
  return {0.299 * r + 0.587 * g + 0.114 * b,
          128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b,
          128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b};
}

inline std::uint8_t to_u8(double v) {
  const long r = std::llround(v);  // llround: halfway cases away from zero
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

inline void to_rgb(double y, double cb, double cr, std::uint8_t* rgb) {
  const double r = y + 1.402 * (cr - 128.0);
  const double g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0);
  const double b = y + 1.772 * (cb - 128.0);
  rgb[0] = to_u8(r);
  rgb[1] = to_u8(g);
  rgb[2] = to_u8(b);
}

}  // namespace bt601

namespace detail {

enum class Y4mColorspace { C444p16, C444, C420 };

struct Y4mHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  FrameRate rate;
  Y4mColorspace colorspace = Y4mColorspace::C420;
};

// Consumes bytes up to and including the next '\n' and returns the line
// without it. Header lines are short in any well-formed stream, so a modest
// bound doubles as a malformed-input guard.
inline std::string_view read_line(ByteReader& r, const char* what) {
  static constexpr std::size_t kMaxLine = 4096;
  const char* begin = nullptr;
  std::size_t len = 0;
  while (true) {
    if (len >= kMaxLine) {
      throw InputError("not a Y4M stream: unterminated header line");
    }
    auto byte = r.take(1, what);
    if (byte[0] == '\n') break;
    if (begin == nullptr) begin = reinterpret_cast<const char*>(byte.data());
    ++len;
  }
  return begin == nullptr ? std::string_view{} : std::string_view(begin, len);
}

inline std::uint32_t parse_u32(std::string_view s, const char* what) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
    throw InputError(std::string("not a Y4M stream: bad ") + what);
  }
  return v;
}

inline Y4mHeader parse_y4m_header(std::string_view line) {
  Y4mHeader h;
  bool have_w = false, have_h = false, have_f = false;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ') ++end;
    const std::string_view tok = line.substr(pos, end - pos);
    pos = end;
    if (tok.empty()) continue;
    const std::string_view val = tok.substr(1);
    switch (tok[0]) {
      case 'W':
        h.width = parse_u32(val, "width");
        have_w = true;
        break;
      case 'H':
        h.height = parse_u32(val, "height");
        have_h = true;
        break;
      case 'F': {
        const std::size_t colon = val.find(':');
        if (colon == std::string_view::npos) {
          throw InputError("not a Y4M stream: bad frame rate");
        }
        h.rate.num = parse_u32(val.substr(0, colon), "frame rate");
        h.rate.den = parse_u32(val.substr(colon + 1), "frame rate");
        have_f = true;
        break;
      }
      case 'C':
        if (val == "444p16") {
          h.colorspace = Y4mColorspace::C444p16;
        } else if (val == "444") {
          h.colorspace = Y4mColorspace::C444;
        } else if (val == "420" || val == "420jpeg" || val == "420mpeg2" ||
                   val == "420paldv") {
          h.colorspace = Y4mColorspace::C420;
        } else {
          throw InputError("unsupported colorspace C" + std::string(val));
        }
        break;
      case 'I':
      case 'A':
      case 'X':
        break;  // interlacing, aspect and extensions are ignored
      default:
        throw InputError("not a Y4M stream: unknown parameter '" +
                         std::string(tok) + "'");
    }
  }
  if (!have_w || !have_h || !have_f) {
    throw InputError("not a Y4M stream: missing W/H/F parameters");
  }
  // Caps keep the per-frame size arithmetic far from overflow and bound
  // allocations for hostile headers.
  static constexpr std::uint32_t kMaxDimension = 1u << 16;
  if (h.width > kMaxDimension || h.height > kMaxDimension) {
    throw InputError("not a Y4M stream: dimensions out of range");
  }
  return h;
}

inline std::size_t y4m_frame_bytes(const Y4mHeader& h) {
  const std::size_t px = std::size_t(h.width) * h.height;
  switch (h.colorspace) {
    case Y4mColorspace::C444p16:
      return px * 6;
    case Y4mColorspace::C444:
      return px * 3;
    case Y4mColorspace::C420:
      return px + 2 * ((h.width / 2) * std::size_t(h.height / 2));
  }
  return 0;
}

inline Frame decode_y4m_frame(const Y4mHeader& h,
                              std::span<const std::uint8_t> payload) {
  Frame f = make_frame(h.width, h.height);
  const std::size_t px = std::size_t(h.width) * h.height;
  switch (h.colorspace) {
    case Y4mColorspace::C444p16: {
      const std::uint8_t* p = payload.data();
      auto u16at = [&](std::size_t plane, std::size_t i) {
        const std::size_t off = (plane * px + i) * 2;
        return double(p[off] | (std::uint32_t(p[off + 1]) << 8)) / 256.0;
      };
      for (std::size_t i = 0; i < px; ++i) {
        bt601::to_rgb(u16at(0, i), u16at(1, i), u16at(2, i), &f.pixels[i * 3]);
      }
      break;
    }
    case Y4mColorspace::C444: {
      for (std::size_t i = 0; i < px; ++i) {
        bt601::to_rgb(payload[i], payload[px + i], payload[2 * px + i],
                      &f.pixels[i * 3]);
      }
      break;
    }
    case Y4mColorspace::C420: {
      const std::size_t cw = h.width / 2;
      const std::uint8_t* yp = payload.data();
      const std::uint8_t* cbp = yp + px;
      const std::uint8_t* crp = cbp + cw * (h.height / 2);
      for (std::uint32_t yy = 0; yy < h.height; ++yy) {
        for (std::uint32_t xx = 0; xx < h.width; ++xx) {
          const std::size_t ci = (yy / 2) * cw + (xx / 2);
          const std::size_t i = std::size_t(yy) * h.width + xx;
          bt601::to_rgb(yp[i], cbp[ci], crp[ci], &f.pixels[i * 3]);
        }
      }
      break;
    }
  }
  return f;
}

}  // namespace detail

struct Y4mStream {
  FrameRate frame_rate;
  std::vector<Frame> frames;
};

inline Y4mStream read_y4m(std::span<const std::uint8_t> bytes) {
  static constexpr std::string_view kMagic = "YUV4MPEG2";
  if (bytes.size() < kMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()),
                       kMagic.size()) != kMagic) {
    throw InputError("not a Y4M stream");
  }
  ByteReader r(bytes);
  r.skip(kMagic.size(), "Y4M magic");
  const auto header =
      detail::parse_y4m_header(detail::read_line(r, "Y4M header"));
  if (header.colorspace == detail::Y4mColorspace::C420 &&
      (header.width % 2 != 0 || header.height % 2 != 0)) {
    throw InputError("unsupported colorspace: C420 requires even dimensions");
  }
  const std::size_t frame_bytes = detail::y4m_frame_bytes(header);

  Y4mStream out;
  out.frame_rate = header.rate;
  while (!r.at_end()) {
    static constexpr std::string_view kFrame = "FRAME";
    auto marker = r.take(kFrame.size(), "frame marker");
    if (std::string_view(reinterpret_cast<const char*>(marker.data()),
                         marker.size()) != kFrame) {
      throw InputError("truncated stream: expected FRAME marker");
    }
    (void)detail::read_line(r, "frame header");
    auto payload = r.take(frame_bytes, "frame payload");
    out.frames.push_back(detail::decode_y4m_frame(header, payload));
  }
  return out;
}

inline std::vector<std::uint8_t> write_y4m(FrameRate rate,
                                           const std::vector<Frame>& frames) {
  if (frames.empty() || rate.num == 0 || rate.den == 0) {
    throw InputError("empty input: no frames to encode");
  }
  const std::uint32_t w = frames.front().width;
  const std::uint32_t h = frames.front().height;
  for (const Frame& f : frames) {
    if (f.width != w || f.height != h ||
        f.pixels.size() != std::size_t(w) * h * 3) {
      throw InputError("incompatible frames: mixed dimensions");
    }
  }

  ByteWriter out;
  out.write_text("YUV4MPEG2 W" + std::to_string(w) + " H" +
                 std::to_string(h) + " F" + std::to_string(rate.num) + ":" +
                 std::to_string(rate.den) + " Ip A0:0 C444p16\n");
  const std::size_t px = std::size_t(w) * h;
  std::vector<std::uint8_t> planes(px * 6);
  for (const Frame& f : frames) {
    out.write_text("FRAME\n");
    for (std::size_t i = 0; i < px; ++i) {
      const auto ycc = bt601::from_rgb(f.pixels[i * 3], f.pixels[i * 3 + 1],
                                       f.pixels[i * 3 + 2]);
      const auto put = [&](std::size_t plane, double v) {
        const auto q = static_cast<std::uint16_t>(std::llround(v * 256.0));
        planes[(plane * px + i) * 2] = static_cast<std::uint8_t>(q);
        planes[(plane * px + i) * 2 + 1] = static_cast<std::uint8_t>(q >> 8);
      };
      put(0, ycc.y);
      put(1, ycc.cb);
      put(2, ycc.cr);
    }
    out.write_raw(planes);
  }
  return std::move(out.bytes());
}

inline AudioTrack read_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 12) throw InputError("not a WAV file");
  auto tag = [&](const char* what) {
    auto b = r.take(4, what);
    return std::string(reinterpret_cast<const char*>(b.data()), 4);
  };
  if (tag("RIFF tag") != "RIFF") throw InputError("not a WAV file");
  (void)r.read_u32le("RIFF size");
  if (tag("WAVE tag") != "WAVE") throw InputError("not a WAV file");

  bool have_fmt = false;
  bool have_data = false;
  std::uint32_t sample_rate = 0;
  std::span<const std::uint8_t> data;
  while (!r.at_end()) {
    if (r.remaining() < 8) throw InputError("truncated stream: WAV chunk");
    const std::string id = tag("chunk id");
    const std::uint32_t size = r.read_u32le("chunk size");
    auto payload = r.take(size, "chunk payload");
    if (id == "fmt ") {
      ByteReader fr(payload);
      const std::uint16_t format = fr.read_u16le("fmt format");
      const std::uint16_t channels = fr.read_u16le("fmt channels");
      sample_rate = fr.read_u32le("fmt sample rate");
      (void)fr.read_u32le("fmt byte rate");
      (void)fr.read_u16le("fmt block align");
      const std::uint16_t bits = fr.read_u16le("fmt bits");
      if (format != 1 || channels != 1 || bits != 16) {
        throw InputError("unsupported WAV variant: need PCM 16-bit mono");
      }
      if (sample_rate == 0) {
        throw InputError("unsupported WAV variant: zero sample rate");
      }
      have_fmt = true;
    } else if (id == "data") {
      data = payload;
      have_data = true;
    }
    if (size % 2 == 1 && !r.at_end()) r.skip(1, "chunk padding");
  }
  if (!have_fmt || !have_data) {
    throw InputError("not a WAV file: missing fmt or data chunk");
  }
  if (data.size() % 2 != 0) {
    throw InputError("unsupported WAV variant: odd data size");
  }

  AudioTrack track;
  track.sample_rate = sample_rate;
  track.samples.resize(data.size() / 2);
  for (std::size_t i = 0; i < track.samples.size(); ++i) {
    track.samples[i] = static_cast<std::int16_t>(
        std::uint16_t(data[i * 2]) | (std::uint16_t(data[i * 2 + 1]) << 8));
  }
  return track;
}

inline std::vector<std::uint8_t> write_wav(const AudioTrack& track) {
  if (track.sample_rate == 0) {
    throw InputError("unsupported WAV variant: zero sample rate");
  }
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(track.samples.size() * 2);
  ByteWriter out;
  out.write_text("RIFF");
  out.write_u32le(36 + data_size);
  out.write_text("WAVE");
  out.write_text("fmt ");
  out.write_u32le(16);
  out.write_u16le(1);  // PCM
  out.write_u16le(1);  // mono
  out.write_u32le(track.sample_rate);
  out.write_u32le(track.sample_rate * 2);  // byte rate
  out.write_u16le(2);                      // block align
  out.write_u16le(16);                     // bits per sample
  out.write_text("data");
  out.write_u32le(data_size);
  for (std::int16_t s : track.samples) out.write_i16le(s);
  return std::move(out.bytes());
}

}  // namespace vidcensor
