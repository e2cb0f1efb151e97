#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vidcensor/errors.hpp"
#include "vidcensor/media_model.hpp"

namespace vidcensor {

// Censorship of a flagged segment: every frame is blurred with a sampled
// Gaussian and the audio is silenced (samples zeroed rather than removed, so
// the merged timeline keeps its length). The scene report serializes to a
// small XML document.

/// Sampled 1-D Gaussian, e^(-x^2 / (2 sigma^2)), normalized to sum 1. The
/// 2-D blur is the outer product, applied as two separable passes.
struct BlurKernel {
  double sigma = 0.0;
  int radius = 0;                  // ceil(3 sigma)
  std::vector<double> taps;        // 2*radius + 1 entries, symmetric
};

inline BlurKernel gaussian_kernel(double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive");
  BlurKernel k;
  k.sigma = sigma;
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  k.taps.resize(2 * k.radius + 1);
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.taps[k.radius + i] =
        std::exp(-static_cast<double>(i) * i / (2.0 * sigma * sigma));
  }
  // Smallest-first summation keeps the normalized sum within 1e-12 of 1.
  double sum = 0.0;
  for (int i = k.radius; i >= 1; --i) sum += 2.0 * k.taps[k.radius + i];
  sum += k.taps[k.radius];
  for (double& t : k.taps) t /= sum;
  return k;
}

namespace detail {

inline std::size_t clamp_index(long v, std::size_t count) {
  if (v < 0) return 0;
  if (static_cast<std::size_t>(v) >= count) return count - 1;
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Separable Gaussian blur with replicate-edge padding. The horizontal pass
/// stays in doubles, so the result matches direct 2-D convolution up to the
/// final rounding step.
inline Frame blur_frame(const Frame& frame, double sigma) {
  const BlurKernel k = gaussian_kernel(sigma);
  const std::size_t w = frame.width;
  const std::size_t h = frame.height;

  std::vector<double> horizontal(frame.pixels.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (int i = -k.radius; i <= k.radius; ++i) {
        const std::size_t sx = detail::clamp_index(long(x) + i, w);
        const double tap = k.taps[k.radius + i];
        const std::uint8_t* px = &frame.pixels[(y * w + sx) * 3];
        acc[0] += tap * px[0];
        acc[1] += tap * px[1];
        acc[2] += tap * px[2];
      }
      double* dst = &horizontal[(y * w + x) * 3];
      dst[0] = acc[0];
      dst[1] = acc[1];
      dst[2] = acc[2];
    }
  }

  Frame out = frame;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (int i = -k.radius; i <= k.radius; ++i) {
        const std::size_t sy = detail::clamp_index(long(y) + i, h);
        const double tap = k.taps[k.radius + i];
        const double* px = &horizontal[(sy * w + x) * 3];
        acc[0] += tap * px[0];
        acc[1] += tap * px[1];
        acc[2] += tap * px[2];
      }
      std::uint8_t* dst = &out.pixels[(y * w + x) * 3];
      for (int c = 0; c < 3; ++c) {
        dst[c] = static_cast<std::uint8_t>(
            std::clamp(std::llround(acc[c]), 0LL, 255LL));
      }
    }
  }
  return out;
}

/// Silence with the original timing: same rate, same sample count, all zero.
inline AudioTrack mute_audio(const AudioTrack& track) {
  AudioTrack out;
  out.sample_rate = track.sample_rate;
  out.samples.assign(track.samples.size(), 0);
  return out;
}

/// Blurs every frame and mutes the audio of a segment flagged Inappropriate;
/// timeline fields are preserved. Calling this on anything else is a bug in
/// the caller.
inline Segment censor_segment(const Segment& segment, double sigma) {
  if (!segment.verdict.has_value() ||
      segment.verdict->label != Label::Inappropriate) {
    throw InputError("censoring appropriate segment");
  }
  Segment out = segment;
  for (Frame& f : out.frames) f = blur_frame(f, sigma);
  out.audio = mute_audio(segment.audio);
  return out;
}

// ---------------------------------------------------------------------------
// Scene report
// ---------------------------------------------------------------------------

struct Scene {
  double start = 0.0;     // seconds
  double duration = 0.0;  // seconds
  double score = 0.0;     // max decision value over the coalesced segments

  bool operator==(const Scene&) const = default;
};

struct CensorReport {
  std::string video_name;
  double total_duration = 0.0;
  std::vector<Scene> scenes;  // sorted by start, non-overlapping

  bool operator==(const CensorReport&) const = default;
};

/// Collapses maximal runs of adjacent flagged segments into single scenes;
/// the reported score is the largest decision value in the run.
inline CensorReport build_report(const std::vector<Segment>& segments,
                                 std::string video_name,
                                 double total_duration) {
  CensorReport report;
  report.video_name = std::move(video_name);
  report.total_duration = total_duration;
  for (const Segment& seg : segments) {
    const bool flagged = seg.verdict.has_value() &&
                         seg.verdict->label == Label::Inappropriate;
    if (!flagged) continue;
    const double score = seg.verdict->score;
    if (!report.scenes.empty()) {
      Scene& last = report.scenes.back();
      if (std::abs(last.start + last.duration - seg.start) < 1e-6) {
        last.duration = seg.start + seg.duration - last.start;
        last.score = std::max(last.score, score);
        continue;
      }
    }
    report.scenes.push_back(Scene{seg.start, seg.duration, score});
  }
  return report;
}

namespace detail {

inline void validate_report(const CensorReport& report) {
  if (report.total_duration < 0.0) throw InputError("negative times in report");
  double cursor = 0.0;
  for (const Scene& s : report.scenes) {
    if (s.start < 0.0 || s.duration < 0.0) {
      throw InputError("negative times in report");
    }
    if (s.start + 1e-9 < cursor) throw InputError("overlapping scenes");
    if (s.start + s.duration > report.total_duration + 1e-9) {
      throw InputError("scene extends past total duration");
    }
    cursor = s.start + s.duration;
  }
}

inline std::string xml_escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string format_fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

/// Minimal parser for exactly the documents emit_xml produces (plus
/// whitespace freedom). Anything else is rejected as malformed.
class XmlCursor {
 public:
  explicit XmlCursor(std::string_view text) : text_(text) {}

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool try_consume(std::string_view token) {
    if (text_.substr(pos_).starts_with(token)) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token, const char* what) {
    if (!try_consume(token)) {
      throw InputError(std::string("malformed XML: expected ") + what);
    }
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  bool exhausted() const { return pos_ >= text_.size(); }

  void advance() {
    if (!exhausted()) ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  std::string read_name() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_' || text_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) throw InputError("malformed XML: expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string read_attribute_value() {
    expect("\"", "attribute value quote");
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      const char c = text_[pos_];
      if (c == '&') {
        const std::string_view rest = text_.substr(pos_);
        if (rest.starts_with("&amp;")) {
          out += '&';
          pos_ += 5;
        } else if (rest.starts_with("&lt;")) {
          out += '<';
          pos_ += 4;
        } else if (rest.starts_with("&gt;")) {
          out += '>';
          pos_ += 4;
        } else if (rest.starts_with("&quot;")) {
          out += '"';
          pos_ += 6;
        } else if (rest.starts_with("&apos;")) {
          out += '\'';
          pos_ += 6;
        } else {
          throw InputError("malformed XML: unknown entity");
        }
      } else if (c == '<') {
        throw InputError("malformed XML: '<' in attribute value");
      } else {
        out += c;
        ++pos_;
      }
    }
    expect("\"", "closing attribute quote");
    return out;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

inline double parse_xml_number(const std::string& s, const char* what) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw InputError(std::string("malformed XML: bad number in ") + what);
  }
  return v;
}

struct XmlAttributes {
  std::vector<std::pair<std::string, std::string>> items;

  const std::string& get(const std::string& name, const char* element) const {
    for (const auto& [k, v] : items) {
      if (k == name) return v;
    }
    throw InputError(std::string("malformed XML: missing attribute '") +
                     name + "' on <" + element + ">");
  }
};

/// Reads attributes up to (not including) '>' or '/>'.
inline XmlAttributes read_attributes(XmlCursor& c) {
  XmlAttributes attrs;
  while (true) {
    c.skip_space();
    const char next = c.peek();
    if (next == '>' || next == '/') return attrs;
    if (next == '\0') throw InputError("malformed XML: unterminated tag");
    std::string name = c.read_name();
    c.expect("=", "'=' after attribute name");
    attrs.items.emplace_back(std::move(name), c.read_attribute_value());
  }
}

}  // namespace detail

/// Serializes a report. Seconds and scores are printed with exactly three
/// decimal places; only inappropriate scenes appear.
inline std::vector<std::uint8_t> emit_xml(const CensorReport& report) {
  detail::validate_report(report);
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<censorship video=\"" + detail::xml_escape(report.video_name) +
         "\" duration=\"" + detail::format_fixed3(report.total_duration) +
         "\"";
  if (report.scenes.empty()) {
    out += "/>\n";
  } else {
    out += ">\n";
    for (const Scene& s : report.scenes) {
      out += "  <scene start=\"" + detail::format_fixed3(s.start) +
             "\" duration=\"" + detail::format_fixed3(s.duration) +
             "\" score=\"" + detail::format_fixed3(s.score) + "\"/>\n";
    }
    out += "</censorship>\n";
  }
  return std::vector<std::uint8_t>(out.begin(), out.end());
}

inline CensorReport parse_xml(std::span<const std::uint8_t> bytes) {
  detail::XmlCursor c(std::string_view(
      reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  c.skip_space();
  if (c.try_consume("<?xml")) {
    bool closed = false;
    while (!c.exhausted()) {
      if (c.try_consume("?>")) {
        closed = true;
        break;
      }
      c.advance();
    }
    if (!closed) throw InputError("malformed XML: unterminated prolog");
  }
  c.skip_space();
  c.expect("<censorship", "<censorship> root element");
  const auto attrs = detail::read_attributes(c);

  CensorReport report;
  report.video_name = attrs.get("video", "censorship");
  report.total_duration = detail::parse_xml_number(
      attrs.get("duration", "censorship"), "duration");

  c.skip_space();
  if (c.try_consume("/>")) {
    // no scenes
  } else {
    c.expect(">", "end of <censorship> tag");
    while (true) {
      c.skip_space();
      if (c.try_consume("</censorship>")) break;
      c.expect("<scene", "<scene> element");
      const auto scene_attrs = detail::read_attributes(c);
      c.skip_space();
      c.expect("/>", "self-closing <scene>");
      Scene s;
      s.start =
          detail::parse_xml_number(scene_attrs.get("start", "scene"), "start");
      s.duration = detail::parse_xml_number(
          scene_attrs.get("duration", "scene"), "duration");
      s.score =
          detail::parse_xml_number(scene_attrs.get("score", "scene"), "score");
      report.scenes.push_back(s);
    }
  }
  if (!c.at_end()) throw InputError("malformed XML: trailing content");
  detail::validate_report(report);
  return report;
}

}  // namespace vidcensor
