#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vidcensor/errors.hpp"

namespace vidcensor {

enum class Label : std::uint8_t { Appropriate = 0, Inappropriate = 1 };

inline const char* to_string(Label l) {
  return l == Label::Appropriate ? "Appropriate" : "Inappropriate";
}

/// One decoded picture: 8-bit RGB, row-major, three interleaved channels.
struct Frame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // size == width * height * 3

  bool operator==(const Frame&) const = default;
};

inline Frame make_frame(std::uint32_t width, std::uint32_t height,
                        std::uint8_t fill = 0) {
  Frame f;
  f.width = width;
  f.height = height;
  f.pixels.assign(std::size_t(width) * height * 3, fill);
  return f;
}

/// Mono 16-bit PCM audio.
struct AudioTrack {
  std::uint32_t sample_rate = 0;
  std::vector<std::int16_t> samples;

  double duration_seconds() const {
    return sample_rate == 0
               ? 0.0
               : static_cast<double>(samples.size()) / sample_rate;
  }

  bool operator==(const AudioTrack&) const = default;
};

/// Exact frames-per-second as a positive rational (Y4M style N:D).
struct FrameRate {
  std::uint32_t num = 0;
  std::uint32_t den = 1;

  double fps() const { return static_cast<double>(num) / den; }
  double frame_period() const { return static_cast<double>(den) / num; }

  bool operator==(const FrameRate&) const = default;
};

struct Verdict {
  Label label = Label::Appropriate;
  double score = 0.0;  // signed classifier decision value

  bool operator==(const Verdict&) const = default;
};

/// A whole decoded clip: uniform frames plus the mono audio track.
struct VideoAsset {
  FrameRate frame_rate;
  std::vector<Frame> frames;
  AudioTrack audio;
  std::string name;

  double duration_seconds() const {
    return frame_rate.num == 0
               ? 0.0
               : static_cast<double>(frames.size()) * frame_rate.den /
                     frame_rate.num;
  }
};

/// A contiguous slice of an asset's timeline, the unit of classification and
/// censorship. Segments of one asset tile [0, duration) with no gaps.
struct Segment {
  std::size_t index = 0;
  double start = 0.0;     // seconds
  double duration = 0.0;  // seconds, timeline length (not content length)
  FrameRate frame_rate;
  std::vector<Frame> frames;
  AudioTrack audio;
  std::optional<Verdict> verdict;
};

namespace detail {

// Index of the first frame/sample at or after time t. The 1e-9 slack keeps
// boundaries stable when t*rate lands a few ulps above an integer.
inline std::size_t boundary_index(double t, double rate) {
  const double x = t * rate;
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

inline std::size_t sample_boundary(double t, double sample_rate) {
  const double x = t * sample_rate;
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(x));
}

}  // namespace detail

/// Cuts `asset` into consecutive segments of at most `max_len` seconds.
/// Frames and audio samples are partitioned exactly: every frame and sample
/// lands in exactly one segment, so a later merge is bit-exact.
inline std::vector<Segment> split_segments(const VideoAsset& asset,
                                           double max_len) {
  if (max_len <= 0.0) throw std::invalid_argument("max_len must be positive");
  if (asset.frames.empty() || asset.frame_rate.num == 0) {
    throw InputError("empty input: asset has no frames");
  }

  const double total = asset.duration_seconds();
  const double fps = asset.frame_rate.fps();
  const double sr = static_cast<double>(asset.audio.sample_rate);
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(total / max_len - 1e-9));

  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t0 = static_cast<double>(i) * max_len;
    const double t1 = std::min(total, t0 + max_len);

    Segment seg;
    seg.index = i;
    seg.start = t0;
    seg.duration = t1 - t0;
    seg.frame_rate = asset.frame_rate;

    std::size_t f0 = detail::boundary_index(t0, fps);
    std::size_t f1 = (i + 1 == count) ? asset.frames.size()
                                      : detail::boundary_index(t1, fps);
    f0 = std::min(f0, asset.frames.size());
    f1 = std::min(std::max(f1, f0), asset.frames.size());
    seg.frames.assign(asset.frames.begin() + f0, asset.frames.begin() + f1);

    seg.audio.sample_rate = asset.audio.sample_rate;
    std::size_t s0 = detail::sample_boundary(t0, sr);
    std::size_t s1 = (i + 1 == count) ? asset.audio.samples.size()
                                      : detail::sample_boundary(t1, sr);
    s0 = std::min(s0, asset.audio.samples.size());
    s1 = std::min(std::max(s1, s0), asset.audio.samples.size());
    seg.audio.samples.assign(asset.audio.samples.begin() + s0,
                             asset.audio.samples.begin() + s1);

    out.push_back(std::move(seg));
  }
  return out;
}

/// Reassembles segments into one asset. Inverse of split_segments when no
/// segment content was altered.
inline VideoAsset merge_segments(const std::vector<Segment>& segments,
                                 std::string name = {}) {
  if (segments.empty()) throw InputError("empty input: no segments to merge");

  constexpr double kTimelineTol = 1e-6;
  double cursor = 0.0;
  for (const Segment& seg : segments) {
    if (std::abs(seg.start - cursor) > kTimelineTol) {
      throw InputError("non-contiguous segments");
    }
    cursor = seg.start + seg.duration;
  }

  const Segment& first = segments.front();
  std::uint32_t w = 0, h = 0;
  bool have_dims = false;
  for (const Segment& seg : segments) {
    if (seg.frame_rate != first.frame_rate ||
        seg.audio.sample_rate != first.audio.sample_rate) {
      throw InputError("incompatible segments: mixed rates");
    }
    for (const Frame& f : seg.frames) {
      if (!have_dims) {
        w = f.width;
        h = f.height;
        have_dims = true;
      } else if (f.width != w || f.height != h) {
        throw InputError("incompatible segments: mixed frame dimensions");
      }
    }
  }

  VideoAsset out;
  out.frame_rate = first.frame_rate;
  out.name = std::move(name);
  out.audio.sample_rate = first.audio.sample_rate;
  for (const Segment& seg : segments) {
    out.frames.insert(out.frames.end(), seg.frames.begin(), seg.frames.end());
    out.audio.samples.insert(out.audio.samples.end(),
                             seg.audio.samples.begin(),
                             seg.audio.samples.end());
  }
  return out;
}

/// Picks frames at timestamps 0, 1/rate, 2/rate, ... strictly below
/// min(duration, cap); each timestamp maps to the nearest decoded frame at or
/// before it.
inline std::vector<Frame> sample_frames(const std::vector<Frame>& frames,
                                        FrameRate source_rate, double rate,
                                        double cap) {
  if (rate <= 0.0) throw std::invalid_argument("rate must be positive");
  if (cap <= 0.0) throw std::invalid_argument("cap must be positive");
  if (frames.empty() || source_rate.num == 0) return {};

  const double duration =
      static_cast<double>(frames.size()) * source_rate.den / source_rate.num;
  const double horizon = std::min(duration, cap);
  std::size_t count =
      static_cast<std::size_t>(std::ceil(horizon * rate - 1e-9));
  count = std::min(count, frames.size());

  std::vector<Frame> out;
  out.reserve(count);
  const double fps = source_rate.fps();
  for (std::size_t j = 0; j < count; ++j) {
    const double t = static_cast<double>(j) / rate;
    std::size_t idx = static_cast<std::size_t>(std::floor(t * fps + 1e-9));
    idx = std::min(idx, frames.size() - 1);
    out.push_back(frames[idx]);
  }
  return out;
}

inline std::vector<Frame> sample_frames(const VideoAsset& asset, double rate,
                                        double cap) {
  return sample_frames(asset.frames, asset.frame_rate, rate, cap);
}

inline std::vector<Frame> sample_frames(const Segment& segment, double rate,
                                        double cap) {
  return sample_frames(segment.frames, segment.frame_rate, rate, cap);
}

/// Builds an asset and validates the A/V agreement invariant: frame count and
/// audio length must describe the same duration to within one frame period.
inline VideoAsset make_video_asset(FrameRate rate, std::vector<Frame> frames,
                                   AudioTrack audio, std::string name) {
  if (frames.empty() || rate.num == 0) {
    throw InputError("empty input: asset has no frames");
  }
  const std::uint32_t w = frames.front().width;
  const std::uint32_t h = frames.front().height;
  for (const Frame& f : frames) {
    if (f.width != w || f.height != h) {
      throw InputError("incompatible frames: mixed dimensions");
    }
  }
  VideoAsset asset;
  asset.frame_rate = rate;
  asset.frames = std::move(frames);
  asset.audio = std::move(audio);
  asset.name = std::move(name);
  const double video_dur = asset.duration_seconds();
  const double audio_dur = asset.audio.duration_seconds();
  if (std::abs(video_dur - audio_dur) > rate.frame_period() + 1e-9) {
    throw InputError("incompatible streams: audio/video durations disagree");
  }
  return asset;
}

}  // namespace vidcensor
