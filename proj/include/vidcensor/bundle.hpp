#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vidcensor/bytes.hpp"
#include "vidcensor/errors.hpp"
#include "vidcensor/fsio.hpp"
#include "vidcensor/pca.hpp"
#include "vidcensor/svm.hpp"

namespace vidcensor {

/// Everything run_censor needs to reproduce a training configuration:
/// censoring defaults, provider dimensions, and the training fingerprint.
struct PipelineConfig {
  double sigma = 10.0;            // blur strength, pixels
  double max_segment_len = 5.0;   // seconds
  std::size_t image_dim = 2048;   // provider image-embedding dimension
  std::size_t audio_dim = 128;    // provider audio-embedding dimension
  std::uint64_t seed = 1;
  double audio_window = 1.0;      // seconds per audio embedding
  double frame_sample_rate = 1.0; // frames/second fed to the image backbone
  double frame_sample_cap = 360.0;  // seconds of whole-video sampling

  // Training fingerprint
  double c = 1.0;
  double tol = 1e-3;
  std::size_t max_passes = 10000;
  KernelSpec kernel{KernelKind::Rbf, 0.0};
  std::size_t pca_image_dim = 1024;  // requested; capped by the rank bound
  std::size_t pca_audio_dim = 128;
  double pca_epsilon = kDefaultPcaEpsilon;
  double holdout_fraction = 0.1;

  TrainConfig svm_config() const {
    return TrainConfig{c, tol, max_passes, seed};
  }
};

/// Trained model file contents: the two whitening transforms, the SVM, and
/// the configuration fingerprint.
struct ModelBundle {
  PcaModel pca_img;
  PcaModel pca_aud;
  SvmModel svm;
  PipelineConfig config;
};

// ---------------------------------------------------------------------------
// ICMB container: magic "ICMB", u16 version, then length-prefixed sections
// (u32 name length, name, u64 payload length, payload). Numbers are
// little-endian; floats are 64-bit. Unknown sections are skipped on read.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_section(ByteWriter& out, std::string_view name,
                          const std::vector<std::uint8_t>& payload) {
  out.write_u32le(static_cast<std::uint32_t>(name.size()));
  out.write_text(name);
  out.write_u64le(payload.size());
  out.write_raw(payload);
}

inline std::vector<std::uint8_t> encode_pca(const PcaModel& m) {
  ByteWriter w;
  w.write_u32le(static_cast<std::uint32_t>(m.in_dim));
  w.write_u32le(static_cast<std::uint32_t>(m.out_dim));
  w.write_f64le(m.epsilon);
  for (double v : m.mean) w.write_f64le(v);
  for (double v : m.eigenvalues) w.write_f64le(v);
  for (double v : m.components.data) w.write_f64le(v);
  return std::move(w.bytes());
}

inline PcaModel decode_pca(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PcaModel m;
  m.in_dim = r.read_u32le("pca in_dim");
  m.out_dim = r.read_u32le("pca out_dim");
  m.epsilon = r.read_f64le("pca epsilon");
  if (m.out_dim == 0 || m.out_dim > m.in_dim) {
    throw InputError("model bundle: invalid pca dimensions");
  }
  const std::uint64_t expected =
      (std::uint64_t(m.in_dim) + m.out_dim +
       std::uint64_t(m.out_dim) * m.in_dim) *
      8;
  if (r.remaining() != expected) {
    throw InputError("model bundle: pca section size mismatch");
  }
  m.mean.resize(m.in_dim);
  for (double& v : m.mean) v = r.read_f64le("pca mean");
  m.eigenvalues.resize(m.out_dim);
  for (double& v : m.eigenvalues) v = r.read_f64le("pca eigenvalue");
  m.components = Matrix(m.out_dim, m.in_dim);
  for (double& v : m.components.data) v = r.read_f64le("pca component");
  if (!r.at_end()) throw InputError("model bundle: trailing pca bytes");
  return m;
}

inline std::vector<std::uint8_t> encode_svm(const SvmModel& m) {
  ByteWriter w;
  w.write_u8(static_cast<std::uint8_t>(m.kernel.kind));
  w.write_f64le(m.kernel.gamma);
  w.write_f64le(m.bias);
  w.write_u32le(static_cast<std::uint32_t>(m.support_vectors.rows));
  w.write_u32le(static_cast<std::uint32_t>(m.support_vectors.cols));
  for (double v : m.dual_coefs) w.write_f64le(v);
  for (double v : m.support_vectors.data) w.write_f64le(v);
  return std::move(w.bytes());
}

inline SvmModel decode_svm(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  SvmModel m;
  const std::uint8_t kind = r.read_u8("svm kernel kind");
  if (kind > 1) throw InputError("model bundle: unknown kernel kind");
  m.kernel.kind = static_cast<KernelKind>(kind);
  m.kernel.gamma = r.read_f64le("svm gamma");
  m.bias = r.read_f64le("svm bias");
  const std::uint32_t count = r.read_u32le("svm sv count");
  const std::uint32_t dim = r.read_u32le("svm dim");
  const std::uint64_t expected =
      (std::uint64_t(count) + std::uint64_t(count) * dim) * 8;
  if (r.remaining() != expected) {
    throw InputError("model bundle: svm section size mismatch");
  }
  m.dual_coefs.resize(count);
  for (double& v : m.dual_coefs) v = r.read_f64le("svm coef");
  m.support_vectors = Matrix(count, dim);
  for (double& v : m.support_vectors.data) v = r.read_f64le("svm vector");
  if (!r.at_end()) throw InputError("model bundle: trailing svm bytes");
  return m;
}

inline std::vector<std::uint8_t> encode_config(const PipelineConfig& c) {
  ByteWriter w;
  w.write_f64le(c.sigma);
  w.write_f64le(c.max_segment_len);
  w.write_u32le(static_cast<std::uint32_t>(c.image_dim));
  w.write_u32le(static_cast<std::uint32_t>(c.audio_dim));
  w.write_u64le(c.seed);
  w.write_f64le(c.audio_window);
  w.write_f64le(c.frame_sample_rate);
  w.write_f64le(c.frame_sample_cap);
  w.write_f64le(c.c);
  w.write_f64le(c.tol);
  w.write_u64le(c.max_passes);
  w.write_u8(static_cast<std::uint8_t>(c.kernel.kind));
  w.write_f64le(c.kernel.gamma);
  w.write_u32le(static_cast<std::uint32_t>(c.pca_image_dim));
  w.write_u32le(static_cast<std::uint32_t>(c.pca_audio_dim));
  w.write_f64le(c.pca_epsilon);
  w.write_f64le(c.holdout_fraction);
  return std::move(w.bytes());
}

inline PipelineConfig decode_config(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PipelineConfig c;
  c.sigma = r.read_f64le("config sigma");
  c.max_segment_len = r.read_f64le("config segment length");
  c.image_dim = r.read_u32le("config image dim");
  c.audio_dim = r.read_u32le("config audio dim");
  c.seed = r.read_u64le("config seed");
  c.audio_window = r.read_f64le("config audio window");
  c.frame_sample_rate = r.read_f64le("config frame sample rate");
  c.frame_sample_cap = r.read_f64le("config frame sample cap");
  c.c = r.read_f64le("config C");
  c.tol = r.read_f64le("config tol");
  c.max_passes = r.read_u64le("config max passes");
  const std::uint8_t kind = r.read_u8("config kernel kind");
  if (kind > 1) throw InputError("model bundle: unknown kernel kind");
  c.kernel.kind = static_cast<KernelKind>(kind);
  c.kernel.gamma = r.read_f64le("config gamma");
  c.pca_image_dim = r.read_u32le("config pca image dim");
  c.pca_audio_dim = r.read_u32le("config pca audio dim");
  c.pca_epsilon = r.read_f64le("config pca epsilon");
  c.holdout_fraction = r.read_f64le("config holdout fraction");
  if (!r.at_end()) throw InputError("model bundle: trailing config bytes");
  return c;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_bundle(const ModelBundle& bundle) {
  ByteWriter out;
  out.write_text("ICMB");
  out.write_u16le(1);
  detail::write_section(out, "PCA_IMG", detail::encode_pca(bundle.pca_img));
  detail::write_section(out, "PCA_AUD", detail::encode_pca(bundle.pca_aud));
  detail::write_section(out, "SVM", detail::encode_svm(bundle.svm));
  detail::write_section(out, "CONFIG", detail::encode_config(bundle.config));
  return std::move(out.bytes());
}

inline ModelBundle decode_bundle(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4, "bundle magic");
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) !=
      "ICMB") {
    throw InputError("not a model bundle (bad magic)");
  }
  const std::uint16_t version = r.read_u16le("bundle version");
  if (version != 1) {
    throw InputError("unsupported model bundle version " +
                     std::to_string(version));
  }

  std::map<std::string, std::vector<std::uint8_t>> sections;
  while (!r.at_end()) {
    const std::uint32_t name_len = r.read_u32le("section name length");
    if (name_len > 256) throw InputError("model bundle: oversized section name");
    auto name_bytes = r.take(name_len, "section name");
    const std::uint64_t payload_len = r.read_u64le("section length");
    auto payload = r.take(payload_len, "section payload");
    sections.emplace(
        std::string(reinterpret_cast<const char*>(name_bytes.data()),
                    name_len),
        std::vector<std::uint8_t>(payload.begin(), payload.end()));
  }
  for (const char* required : {"PCA_IMG", "PCA_AUD", "SVM", "CONFIG"}) {
    if (!sections.contains(required)) {
      throw InputError(std::string("model bundle: missing section ") +
                       required);
    }
  }

  ModelBundle bundle;
  bundle.pca_img = detail::decode_pca(sections.at("PCA_IMG"));
  bundle.pca_aud = detail::decode_pca(sections.at("PCA_AUD"));
  bundle.svm = detail::decode_svm(sections.at("SVM"));
  bundle.config = detail::decode_config(sections.at("CONFIG"));

  if (bundle.pca_img.out_dim + bundle.pca_aud.out_dim !=
      bundle.svm.support_vectors.cols) {
    throw InputError(
        "model bundle dimensions inconsistent: pca outputs do not sum to the "
        "svm input dimension");
  }
  return bundle;
}

inline void save_bundle(const ModelBundle& bundle,
                        const std::filesystem::path& path) {
  atomic_write_file(path, encode_bundle(bundle));
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
  return decode_bundle(read_file(path));
}

}  // namespace vidcensor
