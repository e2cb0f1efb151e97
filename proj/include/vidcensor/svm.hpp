#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "vidcensor/errors.hpp"
#include "vidcensor/matrix.hpp"
#include "vidcensor/media_model.hpp"
#include "vidcensor/rng.hpp"

namespace vidcensor {

enum class KernelKind : std::uint8_t { Linear = 0, Rbf = 1 };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 0.0;  // Rbf only; <= 0 requests the 1/(d*var) heuristic

  bool operator==(const KernelSpec&) const = default;
};

struct TrainConfig {
  double C = 1.0;
  double tol = 1e-3;          // KKT tolerance
  std::size_t max_passes = 10000;  // cap on outer sweeps
  std::uint64_t seed = 1;
};

/// Trained two-class decision function: f(x) = sum_i coef_i K(sv_i, x) + b,
/// Appropriate <-> -1, Inappropriate <-> +1.
struct SvmModel {
  KernelSpec kernel;
  Matrix support_vectors;          // M x d
  std::vector<double> dual_coefs;  // alpha_i * y_i, all nonzero
  double bias = 0.0;
};

/// Optional training instrumentation (used by tests).
struct TrainDiagnostics {
  std::vector<double> objective_trace;  // dual objective after each step
  std::size_t steps = 0;
  std::size_t sweeps = 0;
};

inline double kernel_eval(const KernelSpec& k, std::span<const double> a,
                          std::span<const double> b) {
  switch (k.kind) {
    case KernelKind::Linear:
      return dot(a, b);
    case KernelKind::Rbf:
      return std::exp(-k.gamma * squared_distance(a, b));
  }
  return 0.0;
}

/// gamma = 1 / (d * mean per-feature variance); falls back to 1/d for
/// constant data.
inline double heuristic_gamma(const Matrix& x) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  if (n == 0 || d == 0) return 1.0;
  double var_sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    var_sum += var / static_cast<double>(n);
  }
  const double mean_var = var_sum / static_cast<double>(d);
  if (mean_var <= 0.0) return 1.0 / static_cast<double>(d);
  return 1.0 / (static_cast<double>(d) * mean_var);
}

namespace detail {

/// Kernel rows, fully materialized for small problems and kept in an LRU row
/// cache for large ones.
class KernelCache {
 public:
  static constexpr std::size_t kFullGramLimit = 8192;

  KernelCache(const Matrix& x, const KernelSpec& kernel)
      : x_(x), kernel_(kernel), n_(x.rows) {
    if (n_ <= kFullGramLimit) {
      full_.assign(n_ * n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
          const double v = kernel_eval(kernel_, x_.row(i), x_.row(j));
          full_[i * n_ + j] = v;
          full_[j * n_ + i] = v;
        }
      }
    } else {
      max_rows_ = std::max<std::size_t>(64, (256u << 20) / (n_ * 8));
    }
  }

  std::span<const double> row(std::size_t i) {
    if (!full_.empty()) {
      return std::span<const double>(full_).subspan(i * n_, n_);
    }
    auto it = cache_.find(i);
    if (it != cache_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.first);
      return it->second.second;
    }
    std::vector<double> values(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      values[j] = kernel_eval(kernel_, x_.row(i), x_.row(j));
    }
    lru_.push_front(i);
    auto [pos, inserted] =
        cache_.emplace(i, std::make_pair(lru_.begin(), std::move(values)));
    if (cache_.size() > max_rows_) {
      cache_.erase(lru_.back());
      lru_.pop_back();
    }
    return pos->second.second;
  }

  double at(std::size_t i, std::size_t j) { return row(i)[j]; }

 private:
  const Matrix& x_;
  KernelSpec kernel_;
  std::size_t n_;
  std::vector<double> full_;
  std::size_t max_rows_ = 0;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t,
                     std::pair<std::list<std::size_t>::iterator,
                               std::vector<double>>>
      cache_;
};

class SmoSolver {
 public:
  SmoSolver(const Matrix& x, const std::vector<double>& y,
            const TrainConfig& cfg, const KernelSpec& kernel,
            TrainDiagnostics* diag)
      : x_(x),
        y_(y),
        cfg_(cfg),
        kernel_(kernel),
        diag_(diag),
        n_(x.rows),
        cache_(x, kernel),
        rng_(cfg.seed) {
    alpha_.assign(n_, 0.0);
    errors_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) errors_[i] = -y_[i];  // f == 0
  }

  void solve() {
    bool examine_all = true;
    std::size_t sweeps = 0;
    while (true) {
      if (++sweeps > cfg_.max_passes) {
        throw std::runtime_error("SMO did not converge within max_passes");
      }
      std::size_t changed = 0;
      for (std::size_t i : shuffled_indices(n_, rng_)) {
        if (examine_all || is_free(alpha_[i])) changed += examine(i) ? 1 : 0;
      }
      if (changed > 0) {
        examine_all = false;
        continue;
      }
      if (!examine_all) {
        examine_all = true;
        continue;
      }
      // A full pass made no progress. The in-loop bias and the incremental
      // error cache are both approximate (the midpoint bias rule can leave a
      // stale offset when the last step ends on the box boundary), so settle
      // the bias from the converged alphas and verify with exact errors
      // before accepting convergence.
      finalize_bias();
      if (!has_violation()) break;
    }
    if (diag_ != nullptr) diag_->sweeps = sweeps;
  }

  SvmModel extract_model() const {
    SvmModel model;
    model.kernel = kernel_;
    model.bias = b_;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n_; ++i) {
      if (alpha_[i] > 1e-12) kept.push_back(i);
    }
    model.support_vectors = Matrix(kept.size(), x_.cols);
    model.dual_coefs.resize(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
      const std::size_t i = kept[r];
      model.dual_coefs[r] = alpha_[i] * y_[i];
      auto src = x_.row(i);
      std::copy(src.begin(), src.end(),
                model.support_vectors.row(r).begin());
    }
    return model;
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return b_; }

 private:
  bool is_free(double a) const { return a > snap_ && a < cfg_.C - snap_; }

  bool examine(std::size_t i2) {
    const double y2 = y_[i2];
    const double a2 = alpha_[i2];
    const double e2 = errors_[i2];
    const double r2 = e2 * y2;
    const bool violates = (r2 < -cfg_.tol && a2 < cfg_.C - snap_) ||
                          (r2 > cfg_.tol && a2 > snap_);
    if (!violates) return false;

    // Second-choice heuristic: the free point with the largest |E1 - E2|.
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i2 || !is_free(alpha_[j])) continue;
      const double gap = std::abs(errors_[j] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = j;
      }
    }
    if (best < n_ && take_step(best, i2)) return true;

    for (std::size_t j : shuffled_indices(n_, rng_)) {
      if (j != i2 && is_free(alpha_[j]) && take_step(j, i2)) return true;
    }
    for (std::size_t j : shuffled_indices(n_, rng_)) {
      if (j != i2 && take_step(j, i2)) return true;
    }
    return false;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double y1 = y_[i1];
    const double y2 = y_[i2];
    const double a1 = alpha_[i1];
    const double a2 = alpha_[i2];
    const double e1 = errors_[i1];
    const double e2 = errors_[i2];
    const double s = y1 * y2;
    const double c = cfg_.C;

    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c, c + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c);
      hi = std::min(c, a1 + a2);
    }
    if (lo >= hi) return false;

    auto row1 = cache_.row(i1);
    const double k11 = row1[i1];
    const double k12 = row1[i2];
    const double k22 = cache_.at(i2, i2);
    const double eta = 2.0 * k12 - k11 - k22;

    double a2_new;
    if (eta < 0.0) {
      a2_new = std::clamp(a2 - y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Degenerate curvature: the subproblem is linear in a2, evaluate the
      // objective at both clip ends.
      const double f1 = y1 * (e1 + b_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 + b_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo);
      const double h1 = a1 + s * (a2 - hi);
      const double psi_l = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 +
                           0.5 * lo * lo * k22 + s * lo * l1 * k12;
      const double psi_h = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 +
                           0.5 * hi * hi * k22 + s * hi * h1 * k12;
      if (psi_l < psi_h - 1e-12) {
        a2_new = lo;
      } else if (psi_l > psi_h + 1e-12) {
        a2_new = hi;
      } else {
        return false;
      }
    }
    if (std::abs(a2_new - a2) < 1e-14 * (a2_new + a2 + 1e-14)) return false;

    double a1_new = a1 + s * (a2 - a2_new);
    a1_new = std::clamp(a1_new, 0.0, c);
    const double d1 = a1_new - a1;
    const double d2 = a2_new - a2;

    const double b1 = b_ - e1 - y1 * d1 * k11 - y2 * d2 * k12;
    const double b2 = b_ - e2 - y1 * d1 * k12 - y2 * d2 * k22;
    double b_new;
    if (a1_new > snap_ && a1_new < c - snap_) {
      b_new = b1;
    } else if (a2_new > snap_ && a2_new < c - snap_) {
      b_new = b2;
    } else {
      b_new = 0.5 * (b1 + b2);
    }

    alpha_[i1] = snap_bound(a1_new);
    alpha_[i2] = snap_bound(a2_new);
    auto row2 = cache_.row(i2);
    row1 = cache_.row(i1);
    const double db = b_new - b_;
    for (std::size_t k = 0; k < n_; ++k) {
      errors_[k] += y1 * d1 * row1[k] + y2 * d2 * row2[k] + db;
    }
    b_ = b_new;

    if (diag_ != nullptr) {
      diag_->objective_trace.push_back(objective());
      ++diag_->steps;
    }
    return true;
  }

  double snap_bound(double a) const {
    if (a < snap_) return 0.0;
    if (a > cfg_.C - snap_) return cfg_.C;
    return a;
  }

  void refresh_errors() {
    for (std::size_t i = 0; i < n_; ++i) {
      errors_[i] = decision_value(i) - y_[i];
    }
  }

  /// Recomputes the bias from the current alphas: the mean over free support
  /// vectors, or the midpoint of the KKT-feasible interval when every alpha
  /// sits on the box boundary. Also rebuilds the error cache exactly.
  void finalize_bias() {
    std::vector<double> g(n_, 0.0);  // decision values without bias
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = cache_.row(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (alpha_[j] > 0.0) g[i] += alpha_[j] * y_[j] * row[j];
      }
    }
    double sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (is_free(alpha_[i])) {
        sum += y_[i] - g[i];
        ++free_count;
      }
    }
    if (free_count > 0) {
      b_ = sum / static_cast<double>(free_count);
    } else {
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n_; ++i) {
        const bool at_zero = alpha_[i] <= snap_;
        // alpha == 0 wants y(g+b) >= 1, alpha == C wants y(g+b) <= 1.
        if ((at_zero && y_[i] > 0) || (!at_zero && y_[i] < 0)) {
          lo = std::max(lo, y_[i] - g[i]);
        } else {
          hi = std::min(hi, y_[i] - g[i]);
        }
      }
      if (!std::isfinite(lo)) {
        b_ = std::isfinite(hi) ? hi : 0.0;
      } else if (!std::isfinite(hi)) {
        b_ = lo;
      } else {
        b_ = 0.5 * (lo + hi);
      }
    }
    for (std::size_t i = 0; i < n_; ++i) errors_[i] = g[i] + b_ - y_[i];
  }

  double decision_value(std::size_t i) {
    double f = b_;
    auto row = cache_.row(i);
    for (std::size_t j = 0; j < n_; ++j) {
      if (alpha_[j] > 0.0) f += alpha_[j] * y_[j] * row[j];
    }
    return f;
  }

  bool has_violation() {
    for (std::size_t i = 0; i < n_; ++i) {
      const double margin = y_[i] * (errors_[i] + y_[i]);  // y_i * f(x_i)
      if (alpha_[i] < cfg_.C - snap_ && margin < 1.0 - cfg_.tol) return true;
      if (alpha_[i] > snap_ && margin > 1.0 + cfg_.tol) return true;
    }
    return false;
  }

  double objective() {
    double linear = 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (alpha_[i] == 0.0) continue;
      linear += alpha_[i];
      auto row = cache_.row(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (alpha_[j] == 0.0) continue;
        quad += alpha_[i] * alpha_[j] * y_[i] * y_[j] * row[j];
      }
    }
    return linear - 0.5 * quad;
  }

  const Matrix& x_;
  const std::vector<double>& y_;
  TrainConfig cfg_;
  KernelSpec kernel_;
  TrainDiagnostics* diag_;
  std::size_t n_;
  KernelCache cache_;
  SplitMix64 rng_;
  std::vector<double> alpha_;
  std::vector<double> errors_;
  double b_ = 0.0;
  double snap_ = 1e-12;
};

}  // namespace detail

/// Solves the SVM dual with sequential minimal optimization. Labels must map
/// Appropriate -> -1, Inappropriate -> +1 and both classes must be present.
inline SvmModel train_smo(const Matrix& x, const std::vector<double>& y,
                          const TrainConfig& cfg, KernelSpec kernel,
                          TrainDiagnostics* diag = nullptr) {
  if (x.rows != y.size()) throw InputError("labels/features length mismatch");
  if (x.rows < 2) throw InputError("degenerate labels: need both classes");
  if (cfg.C <= 0.0) throw std::invalid_argument("C must be positive");
  if (cfg.tol <= 0.0) throw std::invalid_argument("tol must be positive");
  bool has_pos = false, has_neg = false;
  for (double v : y) {
    if (v == 1.0) {
      has_pos = true;
    } else if (v == -1.0) {
      has_neg = true;
    } else {
      throw InputError("labels must be -1 or +1");
    }
  }
  if (!has_pos || !has_neg) {
    throw InputError("degenerate labels: need both classes");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) {
      throw InputError("invalid feature: non-finite value");
    }
  }
  if (kernel.kind == KernelKind::Rbf && kernel.gamma <= 0.0) {
    kernel.gamma = heuristic_gamma(x);
  }

  detail::SmoSolver solver(x, y, cfg, kernel, diag);
  solver.solve();
  return solver.extract_model();
}

/// Signed distance from the decision surface.
inline double decision(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.support_vectors.cols) {
    throw InputError("feature dimension mismatch");
  }
  double f = model.bias;
  for (std::size_t i = 0; i < model.dual_coefs.size(); ++i) {
    f += model.dual_coefs[i] *
         kernel_eval(model.kernel, model.support_vectors.row(i), x);
  }
  return f;
}

/// Inappropriate iff decision >= 0 (exact ties censor rather than pass).
inline Label predict(const SvmModel& model, std::span<const double> x) {
  return decision(model, x) >= 0.0 ? Label::Inappropriate
                                   : Label::Appropriate;
}

}  // namespace vidcensor
