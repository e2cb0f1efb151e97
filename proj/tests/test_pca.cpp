#include "vidcensor/pca.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support/test_util.hpp"
#include "vidcensor/rng.hpp"

namespace vc = vidcensor;

namespace {

vc::Matrix four_point_data() {
  // {(-1,0),(1,0),(0,-2),(0,2)}: mean (0,0), sample covariance
  // diag(2/3, 8/3), so the top eigenpair is (8/3, (0,1)).
  vc::Matrix data(4, 2);
  data.at(0, 0) = -1.0;
  data.at(1, 0) = 1.0;
  data.at(2, 1) = -2.0;
  data.at(3, 1) = 2.0;
  return data;
}

TEST(FitPca, HandComputedFourPointExample) {
  const auto model = vc::fit_pca(four_point_data(), 2, 0.0);
  EXPECT_NEAR(model.mean[0], 0.0, 1e-12);
  EXPECT_NEAR(model.mean[1], 0.0, 1e-12);
  ASSERT_EQ(model.eigenvalues.size(), 2u);
  EXPECT_NEAR(model.eigenvalues[0], 8.0 / 3.0, 1e-10);
  EXPECT_NEAR(model.eigenvalues[1], 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(model.components.at(0, 0), 0.0, 1e-10);
  EXPECT_NEAR(model.components.at(0, 1), 1.0, 1e-10);
  EXPECT_NEAR(model.components.at(1, 0), 1.0, 1e-10);
  EXPECT_NEAR(model.components.at(1, 1), 0.0, 1e-10);
}

TEST(FitPca, WhiteDataKeepsUnitEigenvalues) {
  // Zero-mean points with identity sample covariance: 2a^2/3 == 1.
  vc::Matrix data(4, 2);
  const double a = std::sqrt(1.5);
  data.at(0, 0) = a;
  data.at(1, 0) = -a;
  data.at(2, 1) = a;
  data.at(3, 1) = -a;
  const auto model = vc::fit_pca(data, 2, 0.0);
  EXPECT_NEAR(model.eigenvalues[0], 1.0, 1e-10);
  EXPECT_NEAR(model.eigenvalues[1], 1.0, 1e-10);
}

TEST(FitPca, SingleRowIsRejected) {
  vc::Matrix data(1, 3);
  try {
    vc::fit_pca(data, 1, 0.0);
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient data"),
              std::string::npos);
  }
}

TEST(FitPca, RankBoundIsEnforced) {
  vc::Matrix data(3, 5);
  try {
    vc::fit_pca(data, 3, 0.0);  // out_dim > N-1
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("rank bound exceeded"),
              std::string::npos);
  }
}

TEST(FitPca, NonFiniteValuesRejected) {
  vc::Matrix data(3, 2);
  data.at(1, 1) = std::nan("");
  EXPECT_THROW(vc::fit_pca(data, 1, 0.0), vc::InputError);
}

TEST(Transform, MeanMapsToZero) {
  const auto model = vc::fit_pca(four_point_data(), 2, 0.0);
  const std::vector<double> x = {0.0, 0.0};
  for (double v : vc::transform(model, x)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Transform, HandComputedCoordinate) {
  const auto model = vc::fit_pca(four_point_data(), 2, 0.0);
  const std::vector<double> x = {0.0, 2.0};
  const auto y = vc::transform(model, x);
  // First coordinate: 2 / sqrt(8/3) = sqrt(3/2).
  EXPECT_NEAR(y[0], std::sqrt(1.5), 1e-10);
  EXPECT_NEAR(y[1], 0.0, 1e-10);
}

TEST(Transform, DimensionMismatchRejected) {
  const auto model = vc::fit_pca(four_point_data(), 2, 0.0);
  const std::vector<double> x = {1.0, 2.0, 3.0};
  try {
    vc::transform(model, x);
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("feature dimension mismatch"),
              std::string::npos);
  }
}

// Brute-force covariance of the transformed training data; whitening should
// produce the identity.
void expect_whitened(const vc::Matrix& data, std::size_t out_dim) {
  const auto model = vc::fit_pca(data, out_dim, 0.0);
  const auto mapped = vc::transform_rows(model, data);
  for (std::size_t a = 0; a < out_dim; ++a) {
    for (std::size_t b = a; b < out_dim; ++b) {
      double cov = 0.0;
      for (std::size_t i = 0; i < mapped.rows; ++i) {
        cov += mapped.at(i, a) * mapped.at(i, b);
      }
      cov /= static_cast<double>(mapped.rows - 1);
      EXPECT_NEAR(cov, a == b ? 1.0 : 0.0, 1e-6)
          << "entry (" << a << "," << b << ")";
    }
  }
}

TEST(Whitening, TrainingCovarianceBecomesIdentity) {
  vc::SplitMix64 rng(21);
  vc::Matrix data(60, 7);
  for (double& v : data.data) v = rng.next_gaussian() * 3.0 + 1.0;
  expect_whitened(data, 7);
}

TEST(Whitening, GramRouteMatchesWhenRowsAreFewerThanColumns) {
  vc::SplitMix64 rng(22);
  vc::Matrix data(20, 64);
  for (double& v : data.data) v = rng.next_gaussian();
  expect_whitened(data, 19);
}

TEST(Components, OrthonormalForRandomShapes) {
  vc::SplitMix64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng.next_below(40);
    const std::size_t d = 2 + rng.next_below(24);
    vc::Matrix data(n, d);
    for (double& v : data.data) v = rng.next_gaussian() * 2.0;
    const std::size_t out = std::min(n - 1, d);
    const auto model = vc::fit_pca(data, out, 1e-8);
    for (std::size_t a = 0; a < out; ++a) {
      for (std::size_t b = a; b < out; ++b) {
        const double g =
            vc::dot(model.components.row(a), model.components.row(b));
        EXPECT_NEAR(g, a == b ? 1.0 : 0.0, 1e-8);
      }
    }
    for (std::size_t a = 0; a + 1 < out; ++a) {
      EXPECT_GE(model.eigenvalues[a], model.eigenvalues[a + 1]);
    }
  }
}

TEST(Transform, IsAffine) {
  vc::SplitMix64 rng(24);
  vc::Matrix data(30, 6);
  for (double& v : data.data) v = rng.next_gaussian();
  const auto model = vc::fit_pca(data, 5, 1e-8);

  std::vector<double> a(6), b(6), diff(6);
  for (int trial = 0; trial < 5; ++trial) {
    for (std::size_t j = 0; j < 6; ++j) {
      a[j] = rng.next_gaussian();
      b[j] = rng.next_gaussian();
      diff[j] = model.mean[j] + (a[j] - b[j]);
    }
    const auto ta = vc::transform(model, a);
    const auto tb = vc::transform(model, b);
    const auto tdiff = vc::transform(model, diff);
    for (std::size_t r = 0; r < 5; ++r) {
      EXPECT_NEAR(ta[r] - tb[r], tdiff[r], 1e-9);
    }
  }
}

TEST(FitPca, DeterministicSignConvention) {
  vc::SplitMix64 rng(25);
  vc::Matrix data(40, 5);
  for (double& v : data.data) v = rng.next_gaussian();
  const auto model = vc::fit_pca(data, 4, 1e-8);
  for (std::size_t r = 0; r < 4; ++r) {
    auto row = model.components.row(r);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (std::abs(row[j]) > std::abs(row[best])) best = j;
    }
    EXPECT_GT(row[best], 0.0);
  }
}

TEST(FitPca, ConstantDataGetsZeroEigenvalues) {
  vc::Matrix data(5, 130);
  for (double& v : data.data) v = 2.5;
  const auto model = vc::fit_pca(data, 4, 1e-8);
  for (double ev : model.eigenvalues) EXPECT_NEAR(ev, 0.0, 1e-12);
  const std::vector<double> x(130, 2.5);
  for (double v : vc::transform(model, x)) EXPECT_NEAR(v, 0.0, 1e-9);
}

}  // namespace
