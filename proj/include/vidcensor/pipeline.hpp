#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "vidcensor/bundle.hpp"
#include "vidcensor/censor.hpp"
#include "vidcensor/embeddings.hpp"
#include "vidcensor/errors.hpp"
#include "vidcensor/fsio.hpp"
#include "vidcensor/manifest.hpp"
#include "vidcensor/media_io.hpp"
#include "vidcensor/media_model.hpp"
#include "vidcensor/metrics.hpp"
#include "vidcensor/pca.hpp"
#include "vidcensor/svm.hpp"

namespace vidcensor {

// End-to-end flows: train a model bundle from an embedding manifest,
// evaluate it, and censor a media pair. Everything here is deterministic
// under a fixed seed, including the parallel censoring pass: worker results
// land in index-addressed slots, so thread scheduling cannot reorder them.

/// On-disk input pair for run_censor.
struct MediaPair {
  std::filesystem::path video_path;  // Y4M
  std::filesystem::path audio_path;  // WAV
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (n == 0) return;
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding dataset (manifest + EMB1 files, pooled per item)
// ---------------------------------------------------------------------------

struct EmbeddingDataset {
  std::vector<std::string> ids;
  std::vector<Label> labels;
  Matrix pooled_img;  // N x image_dim
  Matrix pooled_aud;  // N x audio_dim
};

inline EmbeddingDataset load_embedding_dataset(const DatasetManifest& manifest) {
  if (!manifest.embedding_based) {
    throw InputError("manifest must reference embedding files (image_emb/audio_emb)");
  }
  const std::size_t n = manifest.rows.size();
  std::vector<std::vector<double>> img(n), aud(n);
  std::vector<std::string> problems;
  std::size_t img_dim = 0, aud_dim = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ManifestRow& row = manifest.rows[i];
    try {
      const auto img_rows = read_emb1(read_file(row.first));
      if (img_rows.empty()) {
        throw InputError("empty image embedding file");
      }
      const auto aud_rows = read_emb1(read_file(row.second));
      if (img_dim == 0) img_dim = img_rows.front().size();
      if (aud_dim == 0 && !aud_rows.empty()) aud_dim = aud_rows.front().size();
      for (const auto& r : img_rows) {
        if (r.size() != img_dim) throw InputError("feature dimension mismatch");
      }
      for (const auto& r : aud_rows) {
        if (r.size() != aud_dim) throw InputError("feature dimension mismatch");
      }
      img[i] = detail::mean_rows(img_rows, img_dim);
      aud[i] = detail::mean_rows(aud_rows, aud_dim == 0 ? 1 : aud_dim);
    } catch (const InputError& e) {
      problems.push_back("entry '" + row.id + "': " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "unreadable manifest entries:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InputError(msg);
  }
  if (aud_dim == 0) aud_dim = 1;  // every audio file was empty

  EmbeddingDataset ds;
  ds.pooled_img = Matrix(n, img_dim);
  ds.pooled_aud = Matrix(n, aud_dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(img[i].begin(), img[i].end(), ds.pooled_img.row(i).begin());
    if (aud[i].size() == aud_dim) {
      std::copy(aud[i].begin(), aud[i].end(), ds.pooled_aud.row(i).begin());
    }
    ds.ids.push_back(manifest.rows[i].id);
    ds.labels.push_back(manifest.rows[i].label);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dual-modality model fitting shared by train and eval
// ---------------------------------------------------------------------------

namespace detail {

struct ModalModels {
  PcaModel img;
  PcaModel aud;
  SvmModel svm;
};

inline ModalModels fit_modal(const EmbeddingDataset& ds,
                             std::span<const std::size_t> idx,
                             const PipelineConfig& cfg) {
  if (idx.size() < 2) throw InputError("insufficient data: need at least 2 rows");
  Matrix img(idx.size(), ds.pooled_img.cols);
  Matrix aud(idx.size(), ds.pooled_aud.cols);
  std::vector<double> y(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto is = ds.pooled_img.row(idx[r]);
    auto as = ds.pooled_aud.row(idx[r]);
    std::copy(is.begin(), is.end(), img.row(r).begin());
    std::copy(as.begin(), as.end(), aud.row(r).begin());
    y[r] = label_sign(ds.labels[idx[r]]);
  }
  // The requested output dimensions are capped by the rank bound so small
  // manifests stay trainable.
  const std::size_t img_out =
      std::min({cfg.pca_image_dim, idx.size() - 1, ds.pooled_img.cols});
  const std::size_t aud_out =
      std::min({cfg.pca_audio_dim, idx.size() - 1, ds.pooled_aud.cols});

  ModalModels m;
  m.img = fit_pca(img, img_out, cfg.pca_epsilon);
  m.aud = fit_pca(aud, aud_out, cfg.pca_epsilon);

  Matrix features(idx.size(), img_out + aud_out);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto f = fuse_pooled(img.row(r), aud.row(r), m.img, m.aud);
    std::copy(f.begin(), f.end(), features.row(r).begin());
  }
  m.svm = train_smo(features, y, cfg.svm_config(), cfg.kernel);
  return m;
}

inline Verdict predict_modal(const ModalModels& m,
                             std::span<const double> img_pooled,
                             std::span<const double> aud_pooled) {
  const auto f = fuse_pooled(img_pooled, aud_pooled, m.img, m.aud);
  const double score = decision(m.svm, f);
  return Verdict{score >= 0.0 ? Label::Inappropriate : Label::Appropriate,
                 score};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run_train
// ---------------------------------------------------------------------------

struct TrainResult {
  ModelBundle bundle;
  std::array<ClassReport, 2> test;  // indexed by Label; valid if has_test
  bool has_test = false;
};

/// Fits the PCA pair and the SVM on a stratified training split, scores the
/// held-out split, and (optionally) writes the bundle file atomically.
inline TrainResult run_train(const std::filesystem::path& manifest_path,
                             PipelineConfig cfg,
                             const std::filesystem::path& bundle_out,
                             std::ostream* log = nullptr) {
  const auto manifest = load_manifest(manifest_path);
  const auto ds = load_embedding_dataset(manifest);

  bool pos = false, neg = false;
  for (Label l : ds.labels) (l == Label::Inappropriate ? pos : neg) = true;
  if (!pos || !neg) throw InputError("degenerate labels: need both classes");

  auto [train_idx, test_idx] =
      stratified_holdout(ds.labels, cfg.holdout_fraction, cfg.seed);

  cfg.image_dim = ds.pooled_img.cols;
  cfg.audio_dim = ds.pooled_aud.cols;
  const auto models = detail::fit_modal(ds, train_idx, cfg);

  TrainResult result;
  result.bundle = ModelBundle{models.img, models.aud, models.svm, cfg};
  if (!bundle_out.empty()) save_bundle(result.bundle, bundle_out);

  if (!test_idx.empty()) {
    std::vector<Label> truth, pred;
    for (std::size_t i : test_idx) {
      truth.push_back(ds.labels[i]);
      pred.push_back(detail::predict_modal(models, ds.pooled_img.row(i),
                                           ds.pooled_aud.row(i))
                         .label);
    }
    for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
      result.test[static_cast<std::size_t>(cls)] =
          class_report(truth, pred, cls);
    }
    result.has_test = true;
    if (log != nullptr) {
      *log << "held-out test split (" << test_idx.size() << " items)\n"
           << render_class_reports(result.test);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// run_eval
// ---------------------------------------------------------------------------

struct EvalResult {
  CvReport cv;
  std::array<ClassReport, 2> test;  // bundle scored on the whole manifest
};

/// Scores the trained bundle on every manifest item, and separately runs
/// k-fold cross-validation over the manifest refitting PCA + SVM inside each
/// training fold with the bundle's configuration.
inline EvalResult run_eval(const std::filesystem::path& manifest_path,
                           const ModelBundle& bundle, std::size_t k,
                           std::uint64_t seed, std::ostream* log = nullptr) {
  const auto manifest = load_manifest(manifest_path);
  const auto ds = load_embedding_dataset(manifest);
  if (ds.pooled_img.cols != bundle.pca_img.in_dim ||
      ds.pooled_aud.cols != bundle.pca_aud.in_dim) {
    throw InputError(
        "feature dimension mismatch between bundle and manifest embeddings");
  }

  EvalResult result;
  {
    std::vector<Label> truth, pred;
    detail::ModalModels models{bundle.pca_img, bundle.pca_aud, bundle.svm};
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      truth.push_back(ds.labels[i]);
      pred.push_back(detail::predict_modal(models, ds.pooled_img.row(i),
                                           ds.pooled_aud.row(i))
                         .label);
    }
    for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
      result.test[static_cast<std::size_t>(cls)] =
          class_report(truth, pred, cls);
    }
  }

  result.cv = cross_validate_with(
      ds.labels.size(), ds.labels, k, seed,
      [&](std::span<const std::size_t> train_idx) {
        auto models = std::make_shared<detail::ModalModels>(
            detail::fit_modal(ds, train_idx, bundle.config));
        return [models, &ds](std::size_t i) {
          return detail::predict_modal(*models, ds.pooled_img.row(i),
                                       ds.pooled_aud.row(i))
              .label;
        };
      });

  if (log != nullptr) {
    *log << "bundle scored on the manifest (" << ds.labels.size()
         << " items)\n"
         << render_class_reports(result.test) << "\n"
         << render_cv_report(result.cv);
  }
  return result;
}

// ---------------------------------------------------------------------------
// run_censor
// ---------------------------------------------------------------------------

/// Per-segment labeling strategy; implementations must be safe to call from
/// multiple worker threads.
class SegmentClassifier {
 public:
  virtual ~SegmentClassifier() = default;
  virtual Verdict classify(const Segment& segment) = 0;
};

struct ProviderSpec {
  enum class Kind { Synthetic, Precomputed, External };
  Kind kind = Kind::Synthetic;
  std::filesystem::path directory;   // Precomputed
  std::vector<std::string> command;  // External
};

/// "synthetic" | "precomputed:<dir>" | "external:<cmd ...>"
inline ProviderSpec parse_provider_spec(const std::string& text) {
  ProviderSpec spec;
  if (text == "synthetic") {
    spec.kind = ProviderSpec::Kind::Synthetic;
    return spec;
  }
  if (text.starts_with("precomputed:")) {
    spec.kind = ProviderSpec::Kind::Precomputed;
    spec.directory = text.substr(12);
    if (spec.directory.empty()) {
      throw InputError("precomputed provider needs a directory");
    }
    return spec;
  }
  if (text.starts_with("external:")) {
    spec.kind = ProviderSpec::Kind::External;
    std::string rest = text.substr(9);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      while (pos < rest.size() && rest[pos] == ' ') ++pos;
      std::size_t end = pos;
      while (end < rest.size() && rest[end] != ' ') ++end;
      if (end > pos) spec.command.push_back(rest.substr(pos, end - pos));
      pos = end;
    }
    if (spec.command.empty()) {
      throw InputError("external provider needs a command");
    }
    return spec;
  }
  throw InputError("unknown provider '" + text +
                   "' (expected synthetic, precomputed:<dir> or "
                   "external:<cmd>)");
}

/// Name of the per-segment EMB1 file served by the precomputed provider.
inline std::string precomputed_basename(std::size_t segment_index,
                                        const char* modality) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "segment-%06zu.%s.emb1", segment_index,
                modality);
  return buf;
}

/// Production classifier: embeds a segment with the configured provider and
/// applies the bundle's whitening + SVM chain.
class BundleClassifier final : public SegmentClassifier {
 public:
  BundleClassifier(const ModelBundle& bundle, ProviderSpec provider)
      : bundle_(bundle), provider_(std::move(provider)) {
    switch (provider_.kind) {
      case ProviderSpec::Kind::Synthetic:
        shared_provider_ = std::make_unique<SyntheticProvider>(
            bundle_.config.image_dim, bundle_.config.audio_dim);
        break;
      case ProviderSpec::Kind::External: {
        // Stamp the sampling cadence into the Y4M sent to the backend.
        const auto num = static_cast<std::uint32_t>(
            std::llround(bundle_.config.frame_sample_rate * 1000.0));
        shared_provider_ = std::make_unique<ExternalProvider>(
            provider_.command, bundle_.config.image_dim,
            bundle_.config.audio_dim,
            FrameRate{num == 0 ? 1 : num, num == 0 ? 1 : 1000});
        break;
      }
      case ProviderSpec::Kind::Precomputed:
        break;  // one provider per segment, constructed in classify()
    }
  }

  Verdict classify(const Segment& segment) override {
    const auto frames =
        sample_frames(segment, bundle_.config.frame_sample_rate,
                      bundle_.config.frame_sample_cap);
    if (frames.empty()) {
      // Shorter than one frame period; nothing to classify, pass through.
      return Verdict{Label::Appropriate, 0.0};
    }

    std::unique_ptr<EmbeddingProvider> local;
    EmbeddingProvider* provider = shared_provider_.get();
    if (provider_.kind == ProviderSpec::Kind::Precomputed) {
      local = std::make_unique<PrecomputedProvider>(
          PrecomputedProvider::from_files(
              provider_.directory /
                  precomputed_basename(segment.index, "image"),
              provider_.directory /
                  precomputed_basename(segment.index, "audio"),
              bundle_.config.image_dim, bundle_.config.audio_dim));
      provider = local.get();
    }

    const auto img_rows = embed_frames(*provider, frames);
    const auto aud_rows =
        embed_audio(*provider, segment.audio, bundle_.config.audio_window);
    const auto feature = fuse(img_rows, aud_rows, bundle_.pca_img,
                              bundle_.pca_aud);
    const double score = decision(bundle_.svm, feature);
    return Verdict{score >= 0.0 ? Label::Inappropriate : Label::Appropriate,
                   score};
  }

 private:
  const ModelBundle& bundle_;
  ProviderSpec provider_;
  std::unique_ptr<EmbeddingProvider> shared_provider_;
};

struct CensorOptions {
  double segment_len = 0.0;  // <= 0: use the bundle's configured default
  double sigma = 0.0;        // <= 0: use the bundle's configured default
  std::size_t jobs = 0;      // 0: hardware concurrency
  std::filesystem::path out_dir;
  std::filesystem::path report_path;
};

struct CensorOutcome {
  CensorReport report;
  std::filesystem::path video_out;
  std::filesystem::path audio_out;
  std::filesystem::path report_out;
  std::size_t segment_count = 0;
  std::size_t flagged_count = 0;
};

/// Split -> classify -> censor flagged -> merge -> write, with the classifier
/// injected (tests use stubs, the CLI uses BundleClassifier). Outputs are
/// written atomically; a failing segment aborts before anything is written.
inline CensorOutcome run_censor_with_classifier(const MediaPair& media,
                                                SegmentClassifier& classifier,
                                                double segment_len,
                                                double sigma,
                                                const CensorOptions& opts) {
  if (segment_len <= 0.0) throw std::invalid_argument("segment_len must be positive");
  if (sigma <= 0.0) throw std::invalid_argument("sigma must be positive");

  Y4mStream video;
  try {
    video = read_y4m(read_file(media.video_path));
  } catch (const InputError& e) {
    throw InputError(media.video_path.string() + ": " + e.what());
  }
  AudioTrack audio;
  try {
    audio = read_wav(read_file(media.audio_path));
  } catch (const InputError& e) {
    throw InputError(media.audio_path.string() + ": " + e.what());
  }

  const auto asset =
      make_video_asset(video.frame_rate, std::move(video.frames),
                       std::move(audio), media.video_path.stem().string());
  auto segments = split_segments(asset, segment_len);

  const std::size_t jobs =
      opts.jobs != 0 ? opts.jobs
                     : std::max(1u, std::thread::hardware_concurrency());
  detail::parallel_for(segments.size(), jobs, [&](std::size_t i) {
    try {
      Segment& seg = segments[i];
      seg.verdict = classifier.classify(seg);
      if (seg.verdict->label == Label::Inappropriate) {
        seg = censor_segment(seg, sigma);
      }
    } catch (const InputError& e) {
      throw InputError("segment " + std::to_string(i) + ": " + e.what());
    }
  });

  const VideoAsset merged = merge_segments(segments, asset.name);
  CensorOutcome outcome;
  outcome.report =
      build_report(segments, asset.name, asset.duration_seconds());
  outcome.segment_count = segments.size();
  for (const Segment& seg : segments) {
    if (seg.verdict->label == Label::Inappropriate) ++outcome.flagged_count;
  }

  std::filesystem::create_directories(opts.out_dir);
  outcome.video_out = opts.out_dir / (asset.name + ".y4m");
  outcome.audio_out = opts.out_dir / (asset.name + ".wav");
  outcome.report_out = opts.report_path;
  atomic_write_file(outcome.video_out,
                    write_y4m(merged.frame_rate, merged.frames));
  atomic_write_file(outcome.audio_out, write_wav(merged.audio));
  if (!opts.report_path.empty()) {
    std::filesystem::create_directories(
        opts.report_path.parent_path().empty()
            ? std::filesystem::path(".")
            : opts.report_path.parent_path());
    atomic_write_file(opts.report_path, emit_xml(outcome.report));
  }
  return outcome;
}

inline CensorOutcome run_censor(const MediaPair& media,
                                const ModelBundle& bundle,
                                const ProviderSpec& provider,
                                const CensorOptions& opts) {
  BundleClassifier classifier(bundle, provider);
  const double seg_len = opts.segment_len > 0.0
                             ? opts.segment_len
                             : bundle.config.max_segment_len;
  const double sigma = opts.sigma > 0.0 ? opts.sigma : bundle.config.sigma;
  return run_censor_with_classifier(media, classifier, seg_len, sigma, opts);
}

}  // namespace vidcensor
