#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vidcensor/errors.hpp"
#include "vidcensor/matrix.hpp"

namespace vidcensor {

/// Principal-component projection with whitening: center, project onto the
/// leading principal directions, divide each coordinate by the square root
/// of its variance (plus epsilon).
struct PcaModel {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> mean;         // in_dim
  Matrix components;                // out_dim x in_dim, orthonormal rows
  std::vector<double> eigenvalues;  // out_dim, non-increasing, >= 0
  double epsilon = 1e-8;
};

inline constexpr double kDefaultPcaEpsilon = 1e-8;

namespace detail {

struct SymmetricEigen {
  std::vector<double> values;  // unsorted
  Matrix vectors;              // column j is the eigenvector of values[j]
};

inline double offdiag_frobenius(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = i + 1; j < a.cols; ++j) {
      s += 2.0 * a.at(i, j) * a.at(i, j);
    }
  }
  return std::sqrt(s);
}

/// Cyclic Jacobi rotations on a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm drops below 1e-12 (relative to the input
/// scale, so large covariances terminate at the same relative accuracy).
inline SymmetricEigen jacobi_eigendecompose(Matrix a) {
  const std::size_t n = a.rows;
  SymmetricEigen out;
  out.vectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, i) = 1.0;

  double scale = 0.0;
  for (double v : a.data) scale += v * v;
  scale = std::sqrt(scale);
  const double stop = 1e-12 * std::max(1.0, scale);

  constexpr int kMaxSweeps = 64;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (offdiag_frobenius(a) < stop) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double app = a.at(p, p);
        const double aqq = a.at(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0)
                             ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                             : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a.at(p, p) = app - t * apq;
        a.at(q, q) = aqq + t * apq;
        a.at(p, q) = 0.0;
        a.at(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a.at(k, p);
          const double akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(p, k) = a.at(k, p);
          a.at(k, q) = s * akp + c * akq;
          a.at(q, k) = a.at(k, q);
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = out.vectors.at(k, p);
          const double vkq = out.vectors.at(k, q);
          out.vectors.at(k, p) = c * vkp - s * vkq;
          out.vectors.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (offdiag_frobenius(a) > 1e-9 * std::max(1.0, scale)) {
    throw std::runtime_error("eigendecomposition failed to converge");
  }

  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a.at(i, i);
  return out;
}

/// Flips each component row so its largest-magnitude entry is positive
/// (first index wins ties); makes fitted models platform-stable.
inline void apply_sign_convention(Matrix& components) {
  for (std::size_t r = 0; r < components.rows; ++r) {
    auto row = components.row(r);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (std::abs(row[j]) > std::abs(row[best])) best = j;
    }
    if (row[best] < 0.0) {
      for (double& v : row) v = -v;
    }
  }
}

// Fills component row `r` with a unit vector orthogonal to rows [0, r).
// Only reached when the data has fewer nonzero-variance directions than
// out_dim (e.g. duplicated rows); any orthonormal completion is valid.
inline void orthonormal_completion(Matrix& components, std::size_t r) {
  const std::size_t d = components.cols;
  for (std::size_t basis = 0; basis < d; ++basis) {
    std::vector<double> v(d, 0.0);
    v[basis] = 1.0;
    for (std::size_t prev = 0; prev < r; ++prev) {
      const double proj = dot(components.row(prev), v);
      auto p = components.row(prev);
      for (std::size_t j = 0; j < d; ++j) v[j] -= proj * p[j];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm > 0.5) {
      for (std::size_t j = 0; j < d; ++j) components.at(r, j) = v[j] / norm;
      return;
    }
  }
  throw std::runtime_error("orthonormal completion failed");
}

}  // namespace detail

/// Fits mean/components/eigenvalues from the sample covariance (divisor N-1)
/// of `data`, keeping the out_dim largest eigenpairs. When the data has
/// fewer rows than columns the eigenproblem is solved on the N x N Gram
/// matrix of the centered rows, which has the same nonzero spectrum.
inline PcaModel fit_pca(const Matrix& data, std::size_t out_dim,
                        double epsilon = kDefaultPcaEpsilon) {
  const std::size_t n = data.rows;
  const std::size_t d = data.cols;
  if (n < 2) throw InputError("insufficient data: need at least 2 rows");
  if (out_dim == 0 || out_dim > std::min(n - 1, d)) {
    throw InputError("rank bound exceeded: out_dim must be in [1, min(N-1, in_dim)]");
  }
  for (double v : data.data) {
    if (!std::isfinite(v)) throw InputError("invalid feature: non-finite value");
  }

  PcaModel model;
  model.in_dim = d;
  model.out_dim = out_dim;
  model.epsilon = epsilon;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.row(i);
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += row[j];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = data.row(i);
    auto dst = centered.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] - model.mean[j];
  }

  std::vector<std::pair<double, std::size_t>> ranked;  // (eigenvalue, column)
  model.components = Matrix(out_dim, d);

  if (d <= n) {
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = centered.row(i);
      for (std::size_t a = 0; a < d; ++a) {
        const double ra = row[a];
        for (std::size_t b = a; b < d; ++b) {
          cov.at(a, b) += ra * row[b];
        }
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) {
        cov.at(a, b) /= static_cast<double>(n - 1);
        cov.at(b, a) = cov.at(a, b);
      }
    }
    auto eig = detail::jacobi_eigendecompose(std::move(cov));
    ranked.reserve(d);
    for (std::size_t j = 0; j < d; ++j) ranked.emplace_back(eig.values[j], j);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    model.eigenvalues.resize(out_dim);
    for (std::size_t r = 0; r < out_dim; ++r) {
      model.eigenvalues[r] = std::max(0.0, ranked[r].first);
      for (std::size_t j = 0; j < d; ++j) {
        model.components.at(r, j) = eig.vectors.at(j, ranked[r].second);
      }
    }
  } else {
    // Snapshot route: G = Xc Xc^T / (N-1); eigenvector u of G maps to the
    // covariance eigenvector Xc^T u / ||Xc^T u|| with the same eigenvalue.
    Matrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        gram.at(i, j) = dot(centered.row(i), centered.row(j)) /
                        static_cast<double>(n - 1);
        gram.at(j, i) = gram.at(i, j);
      }
    }
    auto eig = detail::jacobi_eigendecompose(std::move(gram));
    ranked.reserve(n);
    for (std::size_t j = 0; j < n; ++j) ranked.emplace_back(eig.values[j], j);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    model.eigenvalues.resize(out_dim);
    for (std::size_t r = 0; r < out_dim; ++r) {
      const double lambda = std::max(0.0, ranked[r].first);
      model.eigenvalues[r] = lambda;
      std::vector<double> w(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = eig.vectors.at(i, ranked[r].second);
        if (u == 0.0) continue;
        auto row = centered.row(i);
        for (std::size_t j = 0; j < d; ++j) w[j] += u * row[j];
      }
      const double norm = std::sqrt(dot(w, w));
      if (norm > 1e-150) {
        for (std::size_t j = 0; j < d; ++j) {
          model.components.at(r, j) = w[j] / norm;
        }
      } else {
        detail::orthonormal_completion(model.components, r);
      }
    }
  }

  detail::apply_sign_convention(model.components);
  return model;
}

/// y_i = components_i . (x - mean) / sqrt(eigenvalues_i + epsilon)
inline std::vector<double> transform(const PcaModel& model,
                                     std::span<const double> x) {
  if (x.size() != model.in_dim) {
    throw InputError("feature dimension mismatch");
  }
  std::vector<double> centered(model.in_dim);
  for (std::size_t j = 0; j < model.in_dim; ++j) {
    centered[j] = x[j] - model.mean[j];
  }
  std::vector<double> out(model.out_dim);
  for (std::size_t r = 0; r < model.out_dim; ++r) {
    out[r] = dot(model.components.row(r), centered) /
             std::sqrt(model.eigenvalues[r] + model.epsilon);
  }
  return out;
}

inline Matrix transform_rows(const PcaModel& model, const Matrix& data) {
  Matrix out(data.rows, model.out_dim);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto y = transform(model, data.row(i));
    std::copy(y.begin(), y.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace vidcensor
