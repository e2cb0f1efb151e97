#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vidcensor/errors.hpp"
#include "vidcensor/matrix.hpp"
#include "vidcensor/media_model.hpp"
#include "vidcensor/pca.hpp"
#include "vidcensor/rng.hpp"
#include "vidcensor/svm.hpp"

namespace vidcensor {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const Label> truth,
                                 std::span<const Label> pred,
                                 Label positive) {
  if (truth.size() != pred.size() || truth.empty()) {
    throw InputError("label sequence length mismatch");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool is_pos = truth[i] == positive;
    const bool said_pos = pred[i] == positive;
    if (is_pos && said_pos) {
      ++c.tp;
    } else if (is_pos) {
      ++c.fn;
    } else if (said_pos) {
      ++c.fp;
    } else {
      ++c.tn;
    }
  }
  return c;
}

struct ClassReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  bool operator==(const ClassReport&) const = default;
};

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); degenerate denominators
/// yield 0 by convention.
inline ClassReport precision_recall_f1(const ConfusionCounts& c) {
  ClassReport r;
  r.support = c.tp + c.fn;
  r.precision = (c.tp + c.fp) == 0
                    ? 0.0
                    : static_cast<double>(c.tp) / (c.tp + c.fp);
  r.recall =
      (c.tp + c.fn) == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

inline ClassReport class_report(std::span<const Label> truth,
                                std::span<const Label> pred, Label positive) {
  return precision_recall_f1(confusion(truth, pred, positive));
}

/// Stratified k folds: indices of each class are shuffled and dealt
/// round-robin, with the dealing position carried across classes so fold
/// sizes differ by at most one overall as well as per class.
inline std::vector<std::vector<std::size_t>> kfold_split(
    std::size_t n, std::size_t k, std::span<const Label> labels,
    std::uint64_t seed) {
  if (labels.size() != n) throw InputError("label sequence length mismatch");
  if (k < 2) throw InputError("k must be at least 2");
  if (k > n) throw InputError("k exceeds item count");

  SplitMix64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    shuffle_in_place(members, rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      folds[(offset + j) % k].push_back(members[j]);
    }
    offset = (offset + members.size()) % k;
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

/// Stratified train/test split; test takes round(fraction * class size) of
/// each class, always leaving at least one training item per class.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_holdout(std::span<const Label> labels, double test_fraction,
                   std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw std::invalid_argument("test_fraction must be in [0, 1)");
  }
  SplitMix64 rng(seed);
  std::vector<std::size_t> train, test;
  for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.empty()) continue;
    shuffle_in_place(members, rng);
    std::size_t take = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    take = std::min(take, members.size() - 1);
    test.insert(test.end(), members.begin(), members.begin() + take);
    train.insert(train.end(), members.begin() + take, members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (k-1 divisor)

  bool operator==(const MetricStats&) const = default;
};

struct ClassCvStats {
  MetricStats precision;
  MetricStats recall;
  MetricStats f1;
  std::size_t support = 0;

  bool operator==(const ClassCvStats&) const = default;
};

struct CvReport {
  std::size_t folds = 0;
  std::array<ClassCvStats, 2> per_class;  // indexed by Label

  const ClassCvStats& for_label(Label l) const {
    return per_class[static_cast<std::size_t>(l)];
  }
  bool operator==(const CvReport&) const = default;
};

namespace detail {

inline MetricStats stats_of(std::span<const double> values) {
  MetricStats s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace detail

/// Fold mechanics with an injectable trainer. `make_predictor` receives the
/// training indices and returns a callable mapping an item index to a Label;
/// training state must depend only on the given indices (no leakage).
template <typename TrainFn>
CvReport cross_validate_with(std::size_t n, std::span<const Label> labels,
                             std::size_t k, std::uint64_t seed,
                             TrainFn&& make_predictor) {
  const auto folds = kfold_split(n, k, labels, seed);

  std::array<std::vector<double>, 2> precisions, recalls, f1s;
  std::array<std::size_t, 2> supports{0, 0};
  for (const auto& fold : folds) {
    std::vector<std::size_t> train_idx;
    train_idx.reserve(n - fold.size());
    std::vector<bool> in_fold(n, false);
    for (std::size_t i : fold) in_fold[i] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_fold[i]) train_idx.push_back(i);
    }
    bool pos = false, neg = false;
    for (std::size_t i : train_idx) {
      (labels[i] == Label::Inappropriate ? pos : neg) = true;
    }
    if (!pos || !neg) {
      throw InputError("degenerate fold composition: single-class training fold");
    }

    auto predictor = make_predictor(std::span<const std::size_t>(train_idx));
    std::vector<Label> truth, pred;
    truth.reserve(fold.size());
    pred.reserve(fold.size());
    for (std::size_t i : fold) {
      truth.push_back(labels[i]);
      pred.push_back(predictor(i));
    }
    for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
      const auto rep = class_report(truth, pred, cls);
      const auto slot = static_cast<std::size_t>(cls);
      precisions[slot].push_back(rep.precision);
      recalls[slot].push_back(rep.recall);
      f1s[slot].push_back(rep.f1);
      supports[slot] += rep.support;
    }
  }

  CvReport report;
  report.folds = k;
  for (std::size_t slot = 0; slot < 2; ++slot) {
    report.per_class[slot].precision = detail::stats_of(precisions[slot]);
    report.per_class[slot].recall = detail::stats_of(recalls[slot]);
    report.per_class[slot].f1 = detail::stats_of(f1s[slot]);
    report.per_class[slot].support = supports[slot];
  }
  return report;
}

/// PCA + SVM settings for feature-matrix cross-validation.
struct CvConfig {
  TrainConfig svm;
  KernelSpec kernel;
  std::size_t pca_out_dim = 0;  // 0 = as many components as the rank allows
  double pca_epsilon = kDefaultPcaEpsilon;
};

inline double label_sign(Label l) {
  return l == Label::Inappropriate ? 1.0 : -1.0;
}

namespace detail {

struct FittedClassifier {
  PcaModel pca;
  SvmModel svm;

  Label classify(std::span<const double> x) const {
    return predict(svm, transform(pca, x));
  }
};

inline FittedClassifier fit_pca_svm(const Matrix& features,
                                    std::span<const Label> labels,
                                    std::span<const std::size_t> idx,
                                    const CvConfig& cfg) {
  Matrix sub(idx.size(), features.cols);
  std::vector<double> y(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = features.row(idx[r]);
    std::copy(src.begin(), src.end(), sub.row(r).begin());
    y[r] = label_sign(labels[idx[r]]);
  }
  std::size_t out_dim =
      cfg.pca_out_dim == 0 ? features.cols : cfg.pca_out_dim;
  out_dim = std::min({out_dim, idx.size() - 1, features.cols});

  FittedClassifier fitted;
  fitted.pca = fit_pca(sub, out_dim, cfg.pca_epsilon);
  const Matrix whitened = transform_rows(fitted.pca, sub);
  fitted.svm = train_smo(whitened, y, cfg.svm, cfg.kernel);
  return fitted;
}

}  // namespace detail

/// K-fold cross-validation of the PCA + SVM chain over a feature matrix;
/// both stages are fitted inside each training fold.
inline CvReport cross_validate(const Matrix& features,
                               std::span<const Label> labels,
                               const CvConfig& cfg, std::size_t k,
                               std::uint64_t seed) {
  return cross_validate_with(
      features.rows, labels, k, seed,
      [&](std::span<const std::size_t> train_idx) {
        auto fitted = std::make_shared<detail::FittedClassifier>(
            detail::fit_pca_svm(features, labels, train_idx, cfg));
        return [fitted, &features](std::size_t i) {
          return fitted->classify(features.row(i));
        };
      });
}

struct ProtocolReport {
  CvReport cv;
  std::array<ClassReport, 2> test;  // indexed by Label

  const ClassReport& test_for(Label l) const {
    return test[static_cast<std::size_t>(l)];
  }
};

/// The experiment protocol: hold out a stratified test fraction, run k-fold
/// cross-validation inside the training split, then fit on the whole
/// training split and score the held-out items.
inline ProtocolReport evaluate_protocol(const Matrix& features,
                                        std::span<const Label> labels,
                                        const CvConfig& cfg, std::size_t k,
                                        double test_fraction,
                                        std::uint64_t seed) {
  const auto [train_idx, test_idx] =
      stratified_holdout(labels, test_fraction, seed);

  Matrix train_features(train_idx.size(), features.cols);
  std::vector<Label> train_labels(train_idx.size());
  for (std::size_t r = 0; r < train_idx.size(); ++r) {
    auto src = features.row(train_idx[r]);
    std::copy(src.begin(), src.end(), train_features.row(r).begin());
    train_labels[r] = labels[train_idx[r]];
  }

  ProtocolReport report;
  report.cv = cross_validate(train_features, train_labels, cfg, k, seed);

  std::vector<std::size_t> all_train(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) all_train[i] = i;
  const auto fitted =
      detail::fit_pca_svm(train_features, train_labels, all_train, cfg);
  std::vector<Label> truth, pred;
  for (std::size_t i : test_idx) {
    truth.push_back(labels[i]);
    pred.push_back(fitted.classify(features.row(i)));
  }
  for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
    report.test[static_cast<std::size_t>(cls)] =
        class_report(truth, pred, cls);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Text rendering (the tables printed by the CLI)
// ---------------------------------------------------------------------------

inline std::string render_class_reports(
    const std::array<ClassReport, 2>& reports) {
  char line[160];
  std::string out =
      "class            f1-score   precision  recall     support\n";
  for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
    const auto& r = reports[static_cast<std::size_t>(cls)];
    std::snprintf(line, sizeof(line), "%-16s %-10.4f %-10.4f %-10.4f %zu\n",
                  to_string(cls), r.f1, r.precision, r.recall, r.support);
    out += line;
  }
  return out;
}

inline std::string render_cv_report(const CvReport& report) {
  char line[240];
  std::string out = "k-fold cross-validation (k=" +
                    std::to_string(report.folds) + ")\n";
  out +=
      "class            f1-score            precision           recall     "
      "         support\n";
  for (Label cls : {Label::Appropriate, Label::Inappropriate}) {
    const auto& s = report.for_label(cls);
    std::snprintf(line, sizeof(line),
                  "%-16s %.4f +/- %.4f   %.4f +/- %.4f   %.4f +/- %.4f   %zu\n",
                  to_string(cls), s.f1.mean, s.f1.stddev, s.precision.mean,
                  s.precision.stddev, s.recall.mean, s.recall.stddev,
                  s.support);
    out += line;
  }
  return out;
}

}  // namespace vidcensor
