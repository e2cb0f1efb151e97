// Generates a self-contained demo data set: a synthetic media pair, a
// two-cluster training manifest with EMB1 files, and per-segment precomputed
// embeddings that flag the 10s..20s range of the demo clip.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vidcensor/embeddings.hpp"
#include "vidcensor/fsio.hpp"
#include "vidcensor/media_io.hpp"
#include "vidcensor/media_model.hpp"
#include "vidcensor/pipeline.hpp"
#include "vidcensor/rng.hpp"

namespace {

namespace fs = std::filesystem;
namespace vc = vidcensor;

constexpr std::size_t kImageDim = 256;
constexpr std::size_t kAudioDim = 64;
constexpr double kSeparation = 10.0;
constexpr std::size_t kItemsPerClass = 100;
constexpr std::size_t kRowsPerItem = 5;

struct Clusters {
  std::vector<double> img_a, img_b;  // image-space centers
  std::vector<double> aud_a, aud_b;  // audio-space centers
};

std::vector<double> unit_direction(std::size_t dim, vc::SplitMix64& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.next_gaussian();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Clusters make_clusters(vc::SplitMix64& rng) {
  Clusters c;
  c.img_a.assign(kImageDim, 0.0);
  c.aud_a.assign(kAudioDim, 0.0);
  const auto img_dir = unit_direction(kImageDim, rng);
  const auto aud_dir = unit_direction(kAudioDim, rng);
  c.img_b.resize(kImageDim);
  c.aud_b.resize(kAudioDim);
  for (std::size_t j = 0; j < kImageDim; ++j) {
    c.img_b[j] = kSeparation * img_dir[j];
  }
  for (std::size_t j = 0; j < kAudioDim; ++j) {
    c.aud_b[j] = kSeparation * aud_dir[j];
  }
  return c;
}

std::vector<std::vector<double>> noisy_rows(const std::vector<double>& center,
                                            std::size_t count,
                                            vc::SplitMix64& rng) {
  std::vector<std::vector<double>> rows(count);
  for (auto& row : rows) {
    row.resize(center.size());
    for (std::size_t j = 0; j < center.size(); ++j) {
      row[j] = center[j] + rng.next_gaussian();
    }
  }
  return rows;
}

vc::VideoAsset make_demo_clip(vc::SplitMix64& rng) {
  const std::uint32_t w = 64, h = 48, fps = 10, sr = 8000, seconds = 60;
  std::vector<vc::Frame> frames;
  frames.reserve(std::size_t(fps) * seconds);
  for (std::uint32_t t = 0; t < fps * seconds; ++t) {
    vc::Frame f = vc::make_frame(w, h);
    for (std::uint32_t y = 0; y < h; ++y) {
      for (std::uint32_t x = 0; x < w; ++x) {
        std::uint8_t* px = &f.pixels[(std::size_t(y) * w + x) * 3];
        px[0] = static_cast<std::uint8_t>((x * 4 + t) & 0xFF);
        px[1] = static_cast<std::uint8_t>((y * 5 + 2 * t) & 0xFF);
        px[2] = static_cast<std::uint8_t>(
            (x + y + 3 * t + (rng.next_u64() & 0x1F)) & 0xFF);
      }
    }
    frames.push_back(std::move(f));
  }
  vc::AudioTrack audio;
  audio.sample_rate = sr;
  audio.samples.resize(std::size_t(sr) * seconds);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    const double tone = 8000.0 * std::sin(2.0 * 3.14159265358979 * 440.0 * t);
    const double noise = 500.0 * rng.next_symmetric();
    audio.samples[i] = static_cast<std::int16_t>(
        std::clamp(std::llround(tone + noise), -32768LL, 32767LL));
  }
  return vc::make_video_asset(vc::FrameRate{fps, 1}, std::move(frames),
                              std::move(audio), "demo");
}

void write_emb1_file(const fs::path& path,
                     const std::vector<std::vector<double>>& rows,
                     std::size_t dim) {
  vc::atomic_write_file(path, vc::write_emb1(rows, dim));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate demo data for the censorship pipeline"};
  std::string out = "demo";
  std::uint64_t seed = 7;
  app.add_option("out_dir", out, "Output directory");
  app.add_option("--seed", seed, "Random seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const fs::path root(out);
    fs::create_directories(root / "media");
    fs::create_directories(root / "train" / "emb");
    fs::create_directories(root / "segments");

    vc::SplitMix64 rng(seed);
    const auto clusters = make_clusters(rng);

    // Training manifest: two well-separated clusters.
    std::string manifest = "id,label,image_emb,audio_emb\n";
    for (std::size_t i = 0; i < 2 * kItemsPerClass; ++i) {
      const bool inappropriate = i >= kItemsPerClass;
      const std::string id =
          (inappropriate ? "inap-" : "appr-") + std::to_string(i);
      const auto& img_center =
          inappropriate ? clusters.img_b : clusters.img_a;
      const auto& aud_center =
          inappropriate ? clusters.aud_b : clusters.aud_a;
      write_emb1_file(root / "train" / "emb" / (id + ".image.emb1"),
                      noisy_rows(img_center, kRowsPerItem, rng), kImageDim);
      write_emb1_file(root / "train" / "emb" / (id + ".audio.emb1"),
                      noisy_rows(aud_center, kRowsPerItem, rng), kAudioDim);
      manifest += id + "," +
                  (inappropriate ? "Inappropriate" : "Appropriate") +
                  ",emb/" + id + ".image.emb1,emb/" + id + ".audio.emb1\n";
    }
    vc::atomic_write_file(root / "train" / "manifest.csv",
                          std::vector<std::uint8_t>(manifest.begin(),
                                                    manifest.end()));

    // Demo clip plus per-segment precomputed embeddings; segments covering
    // 10s..20s draw from the inappropriate cluster.
    const auto clip = make_demo_clip(rng);
    vc::atomic_write_file(root / "media" / "demo.y4m",
                          vc::write_y4m(clip.frame_rate, clip.frames));
    vc::atomic_write_file(root / "media" / "demo.wav",
                          vc::write_wav(clip.audio));

    const auto segments = vc::split_segments(clip, 5.0);
    for (const auto& seg : segments) {
      const bool flagged = seg.start >= 10.0 - 1e-9 && seg.start < 20.0 - 1e-9;
      const auto& img_center = flagged ? clusters.img_b : clusters.img_a;
      const auto& aud_center = flagged ? clusters.aud_b : clusters.aud_a;
      const std::size_t image_rows =
          vc::sample_frames(seg, 1.0, 360.0).size();
      const std::size_t audio_rows =
          vc::audio_windows(seg.audio, 1.0).size();
      write_emb1_file(
          root / "segments" / vc::precomputed_basename(seg.index, "image"),
          noisy_rows(img_center, image_rows, rng), kImageDim);
      write_emb1_file(
          root / "segments" / vc::precomputed_basename(seg.index, "audio"),
          noisy_rows(aud_center, audio_rows, rng), kAudioDim);
    }

    std::cout << "demo data written to " << root.string() << "\n\n"
              << "next steps:\n"
              << "  vidcensor train --manifest " << (root / "train" / "manifest.csv").string()
              << " --out " << (root / "model.icmb").string() << " --kernel linear\n"
              << "  vidcensor eval --manifest " << (root / "train" / "manifest.csv").string()
              << " --model " << (root / "model.icmb").string() << " --k 10\n"
              << "  vidcensor censor " << (root / "media" / "demo.y4m").string()
              << " " << (root / "media" / "demo.wav").string()
              << " --model " << (root / "model.icmb").string()
              << " --provider precomputed:" << (root / "segments").string()
              << " --out " << (root / "censored").string()
              << " --report " << (root / "report.xml").string() << "\n";
    return 0;
  } catch (const vc::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
