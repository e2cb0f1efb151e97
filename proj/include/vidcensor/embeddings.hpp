#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vidcensor/bytes.hpp"
#include "vidcensor/errors.hpp"
#include "vidcensor/matrix.hpp"
#include "vidcensor/media_io.hpp"
#include "vidcensor/media_model.hpp"
#include "vidcensor/pca.hpp"
#include "vidcensor/rng.hpp"
#include "vidcensor/subprocess.hpp"

namespace vidcensor {

// Per-frame image embeddings and per-window audio embeddings come from
// pluggable providers; a provider only has to be deterministic (same bytes
// in, same vector out). fuse() pools them and applies the whitening
// transforms to build the final segment feature.

inline constexpr std::size_t kDefaultImageDim = 2048;
inline constexpr std::size_t kDefaultAudioDim = 128;
inline constexpr double kDefaultAudioWindowSeconds = 1.0;

/// Deterministic pseudo-embedding: FNV-1a of the content seeds a SplitMix64
/// stream whose draws fill the vector with values in [-1, 1). Reproducible
/// bit-for-bit across platforms.
inline std::vector<double> synthetic_embedding(
    std::span<const std::uint8_t> content, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  SplitMix64 rng(fnv1a64(content));
  std::vector<double> out(dim);
  for (double& v : out) v = rng.next_symmetric();
  return out;
}

/// Half-open sample ranges of the non-overlapping embedding windows: full
/// windows first, then the final partial window when it covers at least half
/// a window (shorter tails are dropped).
inline std::vector<std::pair<std::size_t, std::size_t>> audio_windows(
    const AudioTrack& track, double window_seconds) {
  if (window_seconds <= 0.0) {
    throw std::invalid_argument("window must be positive");
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (track.sample_rate == 0 || track.samples.empty()) return out;
  const double sr = static_cast<double>(track.sample_rate);
  const std::size_t total = track.samples.size();
  const std::size_t full = static_cast<std::size_t>(
      std::floor(track.duration_seconds() / window_seconds + 1e-9));
  for (std::size_t i = 0; i < full; ++i) {
    const std::size_t s0 = detail::sample_boundary(i * window_seconds, sr);
    const std::size_t s1 =
        std::min(total, detail::sample_boundary((i + 1) * window_seconds, sr));
    out.emplace_back(s0, s1);
  }
  const std::size_t tail_start =
      detail::sample_boundary(full * window_seconds, sr);
  if (tail_start < total) {
    const double tail_seconds = static_cast<double>(total - tail_start) / sr;
    if (tail_seconds >= 0.5 * window_seconds - 1e-9) {
      out.emplace_back(tail_start, total);
    }
  }
  return out;
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t image_dim() const = 0;
  virtual std::size_t audio_dim() const = 0;

  /// One embedding per frame, in order.
  virtual std::vector<std::vector<double>> image_rows(
      std::span<const Frame> frames) = 0;

  /// One embedding per window, in order; frame_rate is provided so media
  /// formats can be written for external backends.
  virtual std::vector<std::vector<double>> audio_rows(
      const AudioTrack& track,
      std::span<const std::pair<std::size_t, std::size_t>> windows) = 0;
};

inline std::vector<std::vector<double>> embed_frames(
    EmbeddingProvider& provider, std::span<const Frame> frames) {
  if (frames.empty()) throw InputError("empty input: no frames to embed");
  auto rows = provider.image_rows(frames);
  if (rows.size() != frames.size()) {
    throw InputError("embedding count mismatch: got " +
                     std::to_string(rows.size()) + " rows for " +
                     std::to_string(frames.size()) + " frames");
  }
  for (const auto& row : rows) {
    if (row.size() != provider.image_dim()) {
      throw InputError("feature dimension mismatch");
    }
  }
  return rows;
}

inline std::vector<std::vector<double>> embed_audio(
    EmbeddingProvider& provider, const AudioTrack& track,
    double window_seconds) {
  const auto windows = audio_windows(track, window_seconds);
  if (windows.empty()) return {};
  auto rows = provider.audio_rows(track, windows);
  if (rows.size() != windows.size()) {
    throw InputError("embedding count mismatch: got " +
                     std::to_string(rows.size()) + " rows for " +
                     std::to_string(windows.size()) + " windows");
  }
  for (const auto& row : rows) {
    if (row.size() != provider.audio_dim()) {
      throw InputError("feature dimension mismatch");
    }
  }
  return rows;
}

namespace detail {

inline std::vector<double> mean_rows(
    const std::vector<std::vector<double>>& rows, std::size_t dim) {
  std::vector<double> mean(dim, 0.0);
  if (rows.empty()) return mean;  // the zero vector stands in for no audio
  for (const auto& row : rows) {
    if (row.size() != dim) throw InputError("feature dimension mismatch");
    for (std::size_t j = 0; j < dim; ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace detail

/// Fusion of already-pooled modality vectors: whitened image part first,
/// whitened audio part appended (1024 + 128 = 1152 at default dimensions).
inline std::vector<double> fuse_pooled(std::span<const double> img_mean,
                                       std::span<const double> aud_mean,
                                       const PcaModel& pca_img,
                                       const PcaModel& pca_aud) {
  std::vector<double> out = transform(pca_img, img_mean);
  const auto aud = transform(pca_aud, aud_mean);
  out.insert(out.end(), aud.begin(), aud.end());
  return out;
}

/// Segment feature: mean-pool each modality's rows, then whiten and
/// concatenate. A segment with no audio windows contributes the transform of
/// the zero vector.
inline std::vector<double> fuse(
    const std::vector<std::vector<double>>& frame_rows,
    const std::vector<std::vector<double>>& audio_rows,
    const PcaModel& pca_img, const PcaModel& pca_aud) {
  if (frame_rows.empty()) {
    throw InputError("empty input: fuse needs at least one frame embedding");
  }
  const auto img_mean = detail::mean_rows(frame_rows, pca_img.in_dim);
  const auto aud_mean = detail::mean_rows(audio_rows, pca_aud.in_dim);
  return fuse_pooled(img_mean, aud_mean, pca_img, pca_aud);
}

// ---------------------------------------------------------------------------
// EMB1: precomputed embedding file. Magic "EMB1", then u32 dim, u32 rows,
// then rows*dim little-endian f32 values.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> read_emb1(
    std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4, "EMB1 magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) !=
      "EMB1") {
    throw InputError("not an EMB1 file");
  }
  const std::uint32_t dim = r.read_u32le("EMB1 dim");
  const std::uint32_t rows = r.read_u32le("EMB1 row count");
  if (dim == 0) throw InputError("not an EMB1 file: zero dimension");
  if (r.remaining() != std::uint64_t(dim) * rows * 4) {
    throw InputError("not an EMB1 file: size does not match header");
  }
  std::vector<std::vector<double>> out(rows);
  for (auto& row : out) {
    row.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      row[j] = r.read_f32le("EMB1 value");
    }
  }
  return out;
}

inline std::vector<std::uint8_t> write_emb1(
    const std::vector<std::vector<double>>& rows, std::size_t dim) {
  ByteWriter out;
  out.write_text("EMB1");
  out.write_u32le(static_cast<std::uint32_t>(dim));
  out.write_u32le(static_cast<std::uint32_t>(rows.size()));
  for (const auto& row : rows) {
    if (row.size() != dim) throw InputError("feature dimension mismatch");
    for (double v : row) out.write_f32le(static_cast<float>(v));
  }
  return std::move(out.bytes());
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

/// Hash-based stand-in for the CNN backbones: deterministic, dependency-free
/// and dimension-configurable. Carries no semantic signal.
class SyntheticProvider final : public EmbeddingProvider {
 public:
  explicit SyntheticProvider(std::size_t image_dim = kDefaultImageDim,
                             std::size_t audio_dim = kDefaultAudioDim)
      : image_dim_(image_dim), audio_dim_(audio_dim) {}

  std::size_t image_dim() const override { return image_dim_; }
  std::size_t audio_dim() const override { return audio_dim_; }

  std::vector<std::vector<double>> image_rows(
      std::span<const Frame> frames) override {
    std::vector<std::vector<double>> rows;
    rows.reserve(frames.size());
    for (const Frame& f : frames) {
      ByteWriter content;
      content.write_u32le(f.width);
      content.write_u32le(f.height);
      content.write_raw(f.pixels);
      rows.push_back(synthetic_embedding(content.bytes(), image_dim_));
    }
    return rows;
  }

  std::vector<std::vector<double>> audio_rows(
      const AudioTrack& track,
      std::span<const std::pair<std::size_t, std::size_t>> windows) override {
    std::vector<std::vector<double>> rows;
    rows.reserve(windows.size());
    for (const auto& [s0, s1] : windows) {
      ByteWriter content;
      content.write_u32le(track.sample_rate);
      for (std::size_t i = s0; i < s1; ++i) {
        content.write_i16le(track.samples[i]);
      }
      rows.push_back(synthetic_embedding(content.bytes(), audio_dim_));
    }
    return rows;
  }

 private:
  std::size_t image_dim_;
  std::size_t audio_dim_;
};

/// Serves rows recorded in a pair of EMB1 files; row counts must match the
/// frame/window counts exactly.
class PrecomputedProvider final : public EmbeddingProvider {
 public:
  PrecomputedProvider(std::vector<std::vector<double>> image_rows,
                      std::vector<std::vector<double>> audio_rows,
                      std::size_t image_dim, std::size_t audio_dim)
      : image_rows_(std::move(image_rows)),
        audio_rows_(std::move(audio_rows)),
        image_dim_(image_dim),
        audio_dim_(audio_dim) {}

  static PrecomputedProvider from_files(const std::filesystem::path& image,
                                        const std::filesystem::path& audio,
                                        std::size_t image_dim,
                                        std::size_t audio_dim) {
    auto img = read_emb1(read_file(image));
    auto aud = read_emb1(read_file(audio));
    return PrecomputedProvider(std::move(img), std::move(aud), image_dim,
                               audio_dim);
  }

  std::size_t image_dim() const override { return image_dim_; }
  std::size_t audio_dim() const override { return audio_dim_; }

  std::vector<std::vector<double>> image_rows(
      std::span<const Frame> frames) override {
    if (image_rows_.size() != frames.size()) {
      throw InputError("embedding count mismatch: stored " +
                       std::to_string(image_rows_.size()) + " rows for " +
                       std::to_string(frames.size()) + " frames");
    }
    return image_rows_;
  }

  std::vector<std::vector<double>> audio_rows(
      const AudioTrack&,
      std::span<const std::pair<std::size_t, std::size_t>> windows) override {
    if (audio_rows_.size() != windows.size()) {
      throw InputError("embedding count mismatch: stored " +
                       std::to_string(audio_rows_.size()) + " rows for " +
                       std::to_string(windows.size()) + " windows");
    }
    return audio_rows_;
  }

  static std::vector<std::uint8_t> read_file(
      const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    return bytes;
  }

 private:
  std::vector<std::vector<double>> image_rows_;
  std::vector<std::vector<double>> audio_rows_;
  std::size_t image_dim_;
  std::size_t audio_dim_;
};

/// Bridges to a real backbone in a child process. Frames are piped in as
/// Y4M (`<cmd> image`), audio as WAV (`<cmd> audio`); the child answers with
/// raw little-endian f32 rows, one per frame or window. Access to the child
/// is serialized. `frame_rate` is the sampling cadence stamped into the Y4M
/// header.
class ExternalProvider final : public EmbeddingProvider {
 public:
  ExternalProvider(std::vector<std::string> command, std::size_t image_dim,
                   std::size_t audio_dim, FrameRate frame_rate = {1, 1})
      : command_(std::move(command)),
        image_dim_(image_dim),
        audio_dim_(audio_dim),
        frame_rate_(frame_rate) {
    if (command_.empty()) throw InputError("empty external provider command");
  }

  std::size_t image_dim() const override { return image_dim_; }
  std::size_t audio_dim() const override { return audio_dim_; }

  std::vector<std::vector<double>> image_rows(
      std::span<const Frame> frames) override {
    const std::vector<Frame> copy(frames.begin(), frames.end());
    const auto payload = write_y4m(frame_rate_, copy);
    return exchange("image", payload, frames.size(), image_dim_);
  }

  std::vector<std::vector<double>> audio_rows(
      const AudioTrack& track,
      std::span<const std::pair<std::size_t, std::size_t>> windows) override {
    const auto payload = write_wav(track);
    return exchange("audio", payload, windows.size(), audio_dim_);
  }

 private:
  std::vector<std::vector<double>> exchange(
      const std::string& mode, std::span<const std::uint8_t> payload,
      std::size_t expected_rows, std::size_t dim) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::string> argv = command_;
    argv.push_back(mode);
    const auto raw = run_process(argv, payload);
    if (raw.size() != expected_rows * dim * 4) {
      throw InputError("embedding count mismatch: external provider wrote " +
                       std::to_string(raw.size()) + " bytes, expected " +
                       std::to_string(expected_rows * dim * 4));
    }
    ByteReader r(raw);
    std::vector<std::vector<double>> rows(expected_rows);
    for (auto& row : rows) {
      row.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        row[j] = r.read_f32le("external embedding value");
      }
    }
    return rows;
  }

  std::vector<std::string> command_;
  std::size_t image_dim_;
  std::size_t audio_dim_;
  FrameRate frame_rate_;
  std::mutex mutex_;
};

}  // namespace vidcensor
