#include "vidcensor/svm.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support/test_util.hpp"
#include "vidcensor/svm_oracle.hpp"

namespace vc = vidcensor;

namespace {

struct Instance {
  vc::Matrix x;
  std::vector<double> y;
};

Instance symmetric_pair() {
  Instance inst;
  inst.x = vc::Matrix(2, 1);
  inst.x.at(0, 0) = -1.0;
  inst.x.at(1, 0) = 1.0;
  inst.y = {-1.0, 1.0};
  return inst;
}

Instance xor_instance() {
  Instance inst;
  inst.x = vc::Matrix(4, 2);
  inst.x.at(1, 0) = 1.0;
  inst.x.at(1, 1) = 1.0;
  inst.x.at(2, 1) = 1.0;
  inst.x.at(3, 0) = 1.0;
  inst.y = {-1.0, -1.0, 1.0, 1.0};
  return inst;
}

/// Overlapping two-blob instance; guaranteed to contain both labels.
Instance random_instance(vc::SplitMix64& rng, std::size_t n, std::size_t d,
                         double gap) {
  Instance inst;
  inst.x = vc::Matrix(n, d);
  inst.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i < n / 2 ? false : true;
    inst.y[i] = positive ? 1.0 : -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      inst.x.at(i, j) = rng.next_gaussian() + (positive ? gap : -gap);
    }
  }
  return inst;
}

void expect_kkt(const Instance& inst, const vc::SvmModel& model, double c,
                double tol) {
  // Rebuild alphas from the model is lossy; check KKT via decision values on
  // the training points directly.
  for (std::size_t i = 0; i < inst.x.rows; ++i) {
    const double margin = inst.y[i] * vc::decision(model, inst.x.row(i));
    // Recover this point's alpha if it is a support vector.
    double alpha = 0.0;
    for (std::size_t s = 0; s < model.support_vectors.rows; ++s) {
      bool same = true;
      for (std::size_t j = 0; j < inst.x.cols; ++j) {
        if (model.support_vectors.at(s, j) != inst.x.at(i, j)) {
          same = false;
          break;
        }
      }
      if (same) {
        alpha = std::abs(model.dual_coefs[s]);
        break;
      }
    }
    if (alpha < 1e-12) {
      EXPECT_GE(margin, 1.0 - tol - 1e-9) << "point " << i;
    } else if (alpha > c - 1e-9) {
      EXPECT_LE(margin, 1.0 + tol + 1e-9) << "point " << i;
    } else {
      EXPECT_NEAR(margin, 1.0, tol + 1e-9) << "point " << i;
    }
  }
}

TEST(TrainSmo, SymmetricPairHasZeroBoundary) {
  const auto inst = symmetric_pair();
  vc::TrainConfig cfg;
  cfg.C = 10.0;
  cfg.tol = 1e-6;
  const auto model =
      vc::train_smo(inst.x, inst.y, cfg, {vc::KernelKind::Linear, 0.0});
  EXPECT_NEAR(model.bias, 0.0, 1e-6);
  const std::vector<double> left = {-1.0}, right = {1.0}, mid = {0.0};
  EXPECT_NEAR(vc::decision(model, left), -1.0, 1e-6);
  EXPECT_NEAR(vc::decision(model, right), 1.0, 1e-6);
  EXPECT_NEAR(vc::decision(model, mid), 0.0, 1e-6);
  // Analytic dual: alpha = (0.5, 0.5).
  ASSERT_EQ(model.dual_coefs.size(), 2u);
  EXPECT_NEAR(std::abs(model.dual_coefs[0]), 0.5, 1e-6);
  EXPECT_NEAR(std::abs(model.dual_coefs[1]), 0.5, 1e-6);
}

TEST(TrainSmo, XorIsSeparatedByRbf) {
  const auto inst = xor_instance();
  vc::TrainConfig cfg;
  cfg.C = 10.0;
  cfg.tol = 1e-8;
  const vc::KernelSpec kernel{vc::KernelKind::Rbf, 1.0};
  const auto model = vc::train_smo(inst.x, inst.y, cfg, kernel);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GT(inst.y[i] * vc::decision(model, inst.x.row(i)), 0.0);
  }

  // Independent check against the projected-gradient dual solver.
  const auto alphas = vc::qp_oracle(inst.x, inst.y, cfg.C, kernel);
  const double oracle_obj =
      vc::oracle_objective(inst.x, inst.y, alphas, kernel);
  const double oracle_b =
      vc::oracle_bias(inst.x, inst.y, alphas, cfg.C, kernel);
  const std::vector<double> probe = {0.5, 0.5};
  EXPECT_NEAR(
      vc::decision(model, probe),
      vc::oracle_decision(inst.x, inst.y, alphas, oracle_b, kernel, probe),
      1e-4);

  vc::TrainDiagnostics diag;
  const auto model2 = vc::train_smo(inst.x, inst.y, cfg, kernel, &diag);
  ASSERT_FALSE(diag.objective_trace.empty());
  EXPECT_NEAR(diag.objective_trace.back(), oracle_obj, 1e-6);
}

TEST(TrainSmo, LinearlySeparablePointsMatchOracle) {
  vc::SplitMix64 rng(42);
  const auto inst = random_instance(rng, 20, 2, 2.5);
  vc::TrainConfig cfg;
  cfg.C = 1000.0;
  cfg.tol = 1e-9;
  const vc::KernelSpec kernel{vc::KernelKind::Linear, 0.0};
  const auto model = vc::train_smo(inst.x, inst.y, cfg, kernel);

  const auto alphas = vc::qp_oracle(inst.x, inst.y, cfg.C, kernel);
  const double oracle_b =
      vc::oracle_bias(inst.x, inst.y, alphas, cfg.C, kernel);
  for (std::size_t i = 0; i < inst.x.rows; ++i) {
    EXPECT_NEAR(vc::decision(model, inst.x.row(i)),
                vc::oracle_decision(inst.x, inst.y, alphas, oracle_b, kernel,
                                    inst.x.row(i)),
                1e-4);
  }
}

TEST(TrainSmo, SingleClassRejected) {
  vc::Matrix x(3, 1);
  const std::vector<double> y = {1.0, 1.0, 1.0};
  try {
    vc::train_smo(x, y, {}, {vc::KernelKind::Linear, 0.0});
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate labels"),
              std::string::npos);
  }
}

TEST(TrainSmo, NonFiniteFeatureRejected) {
  vc::Matrix x(2, 1);
  x.at(0, 0) = std::nan("");
  x.at(1, 0) = 1.0;
  const std::vector<double> y = {-1.0, 1.0};
  try {
    vc::train_smo(x, y, {}, {vc::KernelKind::Linear, 0.0});
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid feature"),
              std::string::npos);
  }
}

TEST(TrainSmo, DualConstraintsHoldAfterTraining) {
  vc::SplitMix64 rng(43);
  for (int trial = 0; trial < 8; ++trial) {
    const auto inst = random_instance(rng, 14 + rng.next_below(20),
                                      1 + rng.next_below(4), 0.8);
    vc::TrainConfig cfg;
    cfg.C = 0.5 + rng.next_unit() * 20.0;
    cfg.tol = 1e-6;
    cfg.seed = trial + 1;
    const auto model =
        vc::train_smo(inst.x, inst.y, cfg,
                      {trial % 2 == 0 ? vc::KernelKind::Linear
                                      : vc::KernelKind::Rbf,
                       0.7});
    double coef_sum = 0.0;
    for (double coef : model.dual_coefs) {
      EXPECT_GT(std::abs(coef), 0.0);
      EXPECT_LE(std::abs(coef), cfg.C + 1e-9);
      coef_sum += coef;
    }
    EXPECT_NEAR(coef_sum, 0.0, 1e-6);
    expect_kkt(inst, model, cfg.C, cfg.tol);
  }
}

TEST(TrainSmo, ObjectiveIsNonDecreasing) {
  vc::SplitMix64 rng(44);
  const auto inst = random_instance(rng, 24, 3, 0.6);
  vc::TrainConfig cfg;
  cfg.C = 5.0;
  cfg.tol = 1e-8;
  vc::TrainDiagnostics diag;
  vc::train_smo(inst.x, inst.y, cfg, {vc::KernelKind::Rbf, 0.5}, &diag);
  ASSERT_GT(diag.objective_trace.size(), 1u);
  for (std::size_t i = 1; i < diag.objective_trace.size(); ++i) {
    EXPECT_GE(diag.objective_trace[i],
              diag.objective_trace[i - 1] -
                  1e-9 * (1.0 + std::abs(diag.objective_trace[i - 1])));
  }
}

TEST(TrainSmo, MarginIsOneAtFreeSupportVectors) {
  vc::SplitMix64 rng(45);
  const auto inst = random_instance(rng, 30, 2, 0.7);
  vc::TrainConfig cfg;
  cfg.C = 3.0;
  cfg.tol = 1e-7;
  const auto model =
      vc::train_smo(inst.x, inst.y, cfg, {vc::KernelKind::Rbf, 0.8});
  std::size_t free_checked = 0;
  for (std::size_t s = 0; s < model.support_vectors.rows; ++s) {
    const double alpha = std::abs(model.dual_coefs[s]);
    if (alpha > 1e-7 && alpha < cfg.C - 1e-7) {
      EXPECT_NEAR(std::abs(vc::decision(model, model.support_vectors.row(s))),
                  1.0, cfg.tol * 10 + 1e-6);
      ++free_checked;
    }
  }
  EXPECT_GT(free_checked, 0u);
}

TEST(Decision, DimensionMismatchRejected) {
  const auto inst = symmetric_pair();
  const auto model =
      vc::train_smo(inst.x, inst.y, {}, {vc::KernelKind::Linear, 0.0});
  const std::vector<double> wrong = {1.0, 2.0};
  EXPECT_THROW(vc::decision(model, wrong), vc::InputError);
}

TEST(Predict, SignConventionAndTies) {
  const auto inst = symmetric_pair();
  vc::TrainConfig cfg;
  cfg.C = 10.0;
  const auto model =
      vc::train_smo(inst.x, inst.y, cfg, {vc::KernelKind::Linear, 0.0});
  const std::vector<double> pos = {2.0}, neg = {-2.0}, tie = {0.0};
  EXPECT_EQ(vc::predict(model, pos), vc::Label::Inappropriate);
  EXPECT_EQ(vc::predict(model, neg), vc::Label::Appropriate);
  // decision(0) == 0 exactly by symmetry: ties censor.
  EXPECT_EQ(vc::predict(model, tie), vc::Label::Inappropriate);
}

TEST(Predict, StableUnderPositiveRescaling) {
  vc::SplitMix64 rng(46);
  const auto inst = random_instance(rng, 16, 2, 1.0);
  auto model = vc::train_smo(inst.x, inst.y, {}, {vc::KernelKind::Rbf, 0.5});
  auto scaled = model;
  for (double& c : scaled.dual_coefs) c *= 7.5;
  scaled.bias *= 7.5;
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> probe = {rng.next_gaussian() * 2,
                                       rng.next_gaussian() * 2};
    EXPECT_EQ(vc::predict(model, probe), vc::predict(scaled, probe));
  }
}

TEST(QpOracle, SymmetricPairAnalyticSolution) {
  const auto inst = symmetric_pair();
  // Dual reduces to max over alpha of 2a - 2a^2 (a1 = a2 = a), peak at 0.5.
  const auto alphas =
      vc::qp_oracle(inst.x, inst.y, 10.0, {vc::KernelKind::Linear, 0.0});
  EXPECT_NEAR(alphas[0], 0.5, 1e-8);
  EXPECT_NEAR(alphas[1], 0.5, 1e-8);
}

TEST(QpOracle, TinyCClipsAllAlphas) {
  vc::SplitMix64 rng(47);
  const auto inst = random_instance(rng, 12, 2, 1.5);
  const double c = 1e-4;
  const auto alphas =
      vc::qp_oracle(inst.x, inst.y, c, {vc::KernelKind::Linear, 0.0});
  for (double a : alphas) EXPECT_NEAR(a, c, 1e-9);
}

TEST(QpOracle, ObjectiveAtLeastSmoObjective) {
  vc::SplitMix64 rng(48);
  for (int trial = 0; trial < 6; ++trial) {
    const auto inst = random_instance(rng, 10 + rng.next_below(16),
                                      1 + rng.next_below(3), 0.8);
    const double c = 0.2 + rng.next_unit() * 8.0;
    const vc::KernelSpec kernel{
        trial % 2 == 0 ? vc::KernelKind::Linear : vc::KernelKind::Rbf, 0.9};
    vc::TrainConfig cfg;
    cfg.C = c;
    cfg.tol = 1e-9;
    cfg.seed = trial + 100;
    vc::TrainDiagnostics diag;
    vc::train_smo(inst.x, inst.y, cfg, kernel, &diag);
    const auto alphas = vc::qp_oracle(inst.x, inst.y, c, kernel);
    const double oracle_obj =
        vc::oracle_objective(inst.x, inst.y, alphas, kernel);
    ASSERT_FALSE(diag.objective_trace.empty());
    EXPECT_GE(oracle_obj, diag.objective_trace.back() - 1e-8);
  }
}

}  // namespace
