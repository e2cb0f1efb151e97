// Command-line front end: train, eval, censor.
//
// Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vidcensor/bundle.hpp"
#include "vidcensor/metrics.hpp"
#include "vidcensor/pipeline.hpp"

namespace {

using nlohmann::json;
namespace vc = vidcensor;

json class_report_json(const vc::ClassReport& r) {
  return json{{"f1", r.f1},
              {"precision", r.precision},
              {"recall", r.recall},
              {"support", r.support}};
}

json cv_report_json(const vc::CvReport& r) {
  json per_class;
  for (vc::Label cls : {vc::Label::Appropriate, vc::Label::Inappropriate}) {
    const auto& s = r.for_label(cls);
    per_class[vc::to_string(cls)] = {
        {"f1", {{"mean", s.f1.mean}, {"std", s.f1.stddev}}},
        {"precision", {{"mean", s.precision.mean}, {"std", s.precision.stddev}}},
        {"recall", {{"mean", s.recall.mean}, {"std", s.recall.stddev}}},
        {"support", s.support}};
  }
  return json{{"folds", r.folds}, {"classes", per_class}};
}

void write_json_report(const std::filesystem::path& path, const json& doc) {
  const std::string text = doc.dump(2) + "\n";
  vc::atomic_write_file(
      path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

vc::KernelKind parse_kernel_name(const std::string& name) {
  if (name == "rbf") return vc::KernelKind::Rbf;
  if (name == "linear") return vc::KernelKind::Linear;
  throw std::invalid_argument("--kernel must be rbf or linear");
}

int run(int argc, char** argv) {
  CLI::App app{"Detects and censors inappropriate scenes in video files"};
  app.require_subcommand(1);

  // --- train ---
  auto* train = app.add_subcommand(
      "train", "Fit the PCA/SVM model from an embedding manifest");
  std::string train_manifest, train_out, train_kernel = "rbf";
  std::string train_json;
  vc::PipelineConfig cfg;
  train->add_option("--manifest", train_manifest, "Dataset manifest CSV")
      ->required();
  train->add_option("--out", train_out, "Output bundle path")->required();
  train->add_option("--C", cfg.c, "SVM box constraint")
      ->check(CLI::PositiveNumber);
  train->add_option("--kernel", train_kernel, "Kernel: rbf or linear");
  train->add_option("--seed", cfg.seed, "Random seed");
  train->add_option("--gamma", cfg.kernel.gamma,
                    "RBF gamma (default: 1/(d*var))");
  train->add_option("--tol", cfg.tol, "SMO KKT tolerance")
      ->check(CLI::PositiveNumber);
  train->add_option("--pca-img-dim", cfg.pca_image_dim,
                    "Image components (capped by the rank bound)");
  train->add_option("--pca-aud-dim", cfg.pca_audio_dim,
                    "Audio components (capped by the rank bound)");
  train->add_option("--epsilon", cfg.pca_epsilon, "Whitening regularizer");
  train->add_option("--holdout", cfg.holdout_fraction,
                    "Held-out test fraction");
  train->add_option("--audio-window", cfg.audio_window,
                    "Audio embedding window, seconds");
  train->add_option("--sigma", cfg.sigma, "Default censoring blur sigma");
  train->add_option("--seg-len", cfg.max_segment_len,
                    "Default censoring segment length, seconds");
  train->add_option("--json", train_json, "Write the test report as JSON");

  // --- eval ---
  auto* eval = app.add_subcommand(
      "eval", "Score a bundle on a manifest and cross-validate its config");
  std::string eval_manifest, eval_model, eval_json;
  std::size_t eval_k = 20;
  std::uint64_t eval_seed = 1;
  eval->add_option("--manifest", eval_manifest, "Dataset manifest CSV")
      ->required();
  eval->add_option("--model", eval_model, "Trained bundle")->required();
  eval->add_option("--k", eval_k, "Cross-validation folds");
  eval->add_option("--seed", eval_seed, "Random seed");
  eval->add_option("--json", eval_json, "Write the reports as JSON");

  // --- censor ---
  auto* censor = app.add_subcommand(
      "censor", "Blur and mute inappropriate segments of a media pair");
  std::string in_video, in_audio, censor_model, provider = "synthetic";
  std::string out_dir, report_path;
  double seg_len = 0.0, sigma = 0.0;
  std::size_t jobs = 0;
  censor->add_option("video", in_video, "Input Y4M file")->required();
  censor->add_option("audio", in_audio, "Input WAV file")->required();
  censor->add_option("--model", censor_model, "Trained bundle")->required();
  censor->add_option("--seg-len", seg_len,
                     "Segment length, seconds (default: bundle setting)")
      ->check(CLI::PositiveNumber);
  censor->add_option("--sigma", sigma,
                     "Blur sigma, pixels (default: bundle setting)")
      ->check(CLI::PositiveNumber);
  censor->add_option("--provider", provider,
                     "synthetic | precomputed:<dir> | external:<cmd>");
  censor->add_option("--out", out_dir, "Output directory")->required();
  censor->add_option("--report", report_path, "XML report path")->required();
  censor->add_option("--jobs", jobs, "Worker threads (default: cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Prints help or the parse diagnostic; anything but help is an error.
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (train->parsed()) {
    cfg.kernel.kind = parse_kernel_name(train_kernel);
    const auto result = vc::run_train(train_manifest, cfg, train_out,
                                      &std::cout);
    std::cout << "bundle written to " << train_out << "\n";
    if (!train_json.empty() && result.has_test) {
      json doc;
      for (vc::Label cls :
           {vc::Label::Appropriate, vc::Label::Inappropriate}) {
        doc["test"][vc::to_string(cls)] = class_report_json(
            result.test[static_cast<std::size_t>(cls)]);
      }
      write_json_report(train_json, doc);
    }
    return 0;
  }

  if (eval->parsed()) {
    const auto bundle = vc::load_bundle(eval_model);
    const auto result =
        vc::run_eval(eval_manifest, bundle, eval_k, eval_seed, &std::cout);
    if (!eval_json.empty()) {
      json doc;
      doc["cv"] = cv_report_json(result.cv);
      for (vc::Label cls :
           {vc::Label::Appropriate, vc::Label::Inappropriate}) {
        doc["test"][vc::to_string(cls)] = class_report_json(
            result.test[static_cast<std::size_t>(cls)]);
      }
      write_json_report(eval_json, doc);
    }
    return 0;
  }

  vc::ProviderSpec provider_spec;
  try {
    provider_spec = vc::parse_provider_spec(provider);
  } catch (const vc::InputError& e) {
    throw std::invalid_argument(e.what());  // malformed flag value
  }
  const auto bundle = vc::load_bundle(censor_model);
  vc::CensorOptions opts;
  opts.segment_len = seg_len;
  opts.sigma = sigma;
  opts.jobs = jobs;
  opts.out_dir = out_dir;
  opts.report_path = report_path;
  const auto outcome = vc::run_censor(vc::MediaPair{in_video, in_audio},
                                      bundle, provider_spec, opts);
  std::cout << "segments: " << outcome.segment_count
            << ", censored: " << outcome.flagged_count << "\n"
            << "video:  " << outcome.video_out.string() << "\n"
            << "audio:  " << outcome.audio_out.string() << "\n"
            << "report: " << outcome.report_out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const vidcensor::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
