#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vidcensor/errors.hpp"
#include "vidcensor/matrix.hpp"
#include "vidcensor/svm.hpp"

namespace vidcensor {

// Reference solver for the SVM dual, used to verify SMO results. It shares
// no code path with the SMO solver: its own kernel evaluation, its own Gram
// matrix, and a completely different optimization method (projected gradient
// ascent with Barzilai-Borwein steps). Desk scale only (N <= 200).

namespace oracle_detail {

inline double kernel_value(const KernelSpec& k, std::span<const double> a,
                           std::span<const double> b) {
  if (k.kind == KernelKind::Linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-k.gamma * d2);
}

/// Euclidean projection onto {0 <= a <= C, y.a = 0} by bisection on the
/// hyperplane multiplier; the constraint sum is monotone in the multiplier.
inline std::vector<double> project(const std::vector<double>& v,
                                   const std::vector<double>& y, double c) {
  const std::size_t n = v.size();
  double bound = c + 1.0;
  for (double x : v) bound = std::max(bound, std::abs(x) + c + 1.0);

  auto constraint = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += y[i] * std::clamp(v[i] - mu * y[i], 0.0, c);
    }
    return s;
  };

  double lo = -bound, hi = bound;
  for (int it = 0; it < 128; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (constraint(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mu = 0.5 * (lo + hi);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(v[i] - mu * y[i], 0.0, c);
  }
  return out;
}

}  // namespace oracle_detail

/// Maximizes the dual W(a) = 1.a - a'Qa/2 over {0 <= a <= C, y.a = 0},
/// stopping when the projected-gradient norm drops below 1e-10.
inline std::vector<double> qp_oracle(const Matrix& x,
                                     const std::vector<double>& y, double c,
                                     const KernelSpec& kernel) {
  const std::size_t n = x.rows;
  if (n > 200) throw std::invalid_argument("qp_oracle: N must be <= 200");
  if (n != y.size()) throw InputError("labels/features length mismatch");
  bool pos = false, neg = false;
  for (double v : y) (v > 0 ? pos : neg) = true;
  if (!pos || !neg) throw InputError("degenerate labels: need both classes");

  Matrix q(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v =
          y[i] * y[j] * oracle_detail::kernel_value(kernel, x.row(i), x.row(j));
      q.at(i, j) = v;
      q.at(j, i) = v;
    }
  }

  // Minimize h(a) = a'Qa/2 - 1.a with spectral projected gradient.
  auto grad = [&](const std::vector<double>& a) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = -1.0;
      auto row = q.row(i);
      for (std::size_t j = 0; j < n; ++j) s += row[j] * a[j];
      g[i] = s;
    }
    return g;
  };
  auto value = [&](const std::vector<double>& a) {
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lin += a[i];
      auto row = q.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * a[j];
      quad += a[i] * s;
    }
    return 0.5 * quad - lin;
  };

  std::vector<double> a =
      oracle_detail::project(std::vector<double>(n, 0.0), y, c);
  std::vector<double> g = grad(a);
  double diag_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_max = std::max(diag_max, q.at(i, i));
  double step = diag_max > 0.0 ? 1.0 / diag_max : 1.0;

  std::deque<double> recent{value(a)};
  std::vector<double> prev_a, prev_g;
  constexpr std::size_t kMaxIters = 200000;
  for (std::size_t iter = 0; iter < kMaxIters; ++iter) {
    std::vector<double> towards(n);
    for (std::size_t i = 0; i < n; ++i) towards[i] = a[i] - g[i];
    const std::vector<double> pg_point = oracle_detail::project(towards, y, c);
    double pg_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pg_point[i] - a[i];
      pg_norm += d * d;
    }
    if (std::sqrt(pg_norm) < 1e-10) return a;

    if (!prev_a.empty()) {
      double ss = 0.0, sz = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double si = a[i] - prev_a[i];
        ss += si * si;
        sz += si * (g[i] - prev_g[i]);
      }
      step = (sz > 1e-300) ? std::clamp(ss / sz, 1e-12, 1e12) : 1e12;
    }

    const double fmax = *std::max_element(recent.begin(), recent.end());
    double lambda = step;
    std::vector<double> cand;
    double cand_value = 0.0;
    for (int back = 0; back < 80; ++back) {
      std::vector<double> moved(n);
      for (std::size_t i = 0; i < n; ++i) moved[i] = a[i] - lambda * g[i];
      cand = oracle_detail::project(moved, y, c);
      double descent = 0.0;
      for (std::size_t i = 0; i < n; ++i) descent += g[i] * (cand[i] - a[i]);
      cand_value = value(cand);
      if (cand_value <= fmax + 1e-4 * descent) break;
      lambda *= 0.5;
    }

    prev_a = std::move(a);
    prev_g = std::move(g);
    a = std::move(cand);
    g = grad(a);
    recent.push_back(cand_value);
    if (recent.size() > 10) recent.pop_front();
  }
  throw std::runtime_error("qp_oracle did not converge");
}

/// Dual objective of an alpha vector under the given instance.
inline double oracle_objective(const Matrix& x, const std::vector<double>& y,
                               const std::vector<double>& alphas,
                               const KernelSpec& kernel) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    lin += alphas[i];
    if (alphas[i] == 0.0) continue;
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (alphas[j] == 0.0) continue;
      quad += alphas[i] * alphas[j] * y[i] * y[j] *
              oracle_detail::kernel_value(kernel, x.row(i), x.row(j));
    }
  }
  return lin - 0.5 * quad;
}

/// Bias recovered from the KKT conditions: mean over free vectors when any
/// exist, otherwise the midpoint of the feasible interval.
inline double oracle_bias(const Matrix& x, const std::vector<double>& y,
                          const std::vector<double>& alphas, double c,
                          const KernelSpec& kernel) {
  const std::size_t n = x.rows;
  std::vector<double> f(n, 0.0);  // decision values without bias
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (alphas[j] == 0.0) continue;
      f[i] += alphas[j] * y[j] *
              oracle_detail::kernel_value(kernel, x.row(j), x.row(i));
    }
  }
  const double tau = 1e-8 * std::max(1.0, c);
  double sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (alphas[i] > tau && alphas[i] < c - tau) {
      sum += y[i] - f[i];
      ++free_count;
    }
  }
  if (free_count > 0) return sum / static_cast<double>(free_count);

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const bool at_zero = alphas[i] <= tau;
    // alpha == 0 requires y(f+b) >= 1, alpha == C requires y(f+b) <= 1.
    if ((at_zero && y[i] > 0) || (!at_zero && y[i] < 0)) {
      lo = std::max(lo, y[i] - f[i]);
    } else {
      hi = std::min(hi, y[i] - f[i]);
    }
  }
  if (!std::isfinite(lo)) return std::isfinite(hi) ? hi : 0.0;
  if (!std::isfinite(hi)) return lo;
  return 0.5 * (lo + hi);
}

inline double oracle_decision(const Matrix& x, const std::vector<double>& y,
                              const std::vector<double>& alphas, double bias,
                              const KernelSpec& kernel,
                              std::span<const double> query) {
  double f = bias;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (alphas[i] == 0.0) continue;
    f += alphas[i] * y[i] *
         oracle_detail::kernel_value(kernel, x.row(i), query);
  }
  return f;
}

}  // namespace vidcensor
