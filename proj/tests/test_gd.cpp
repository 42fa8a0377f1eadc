#include <gtest/gtest.h>

#include <cmath>

#include "lofi/errors.hpp"
#include "lofi/gd.hpp"
#include "lofi/lofi.hpp"

using namespace lofi;

namespace {

const std::vector<Index> kDims{20, 16, 12, 1};

GdTask small_task(std::uint64_t seed, Index n = 60) {
  Rng rng(seed);
  return make_even_task(n, 20, rng);
}

Matrix finite_difference_gradient(const Mlp& mlp, const Matrix& x, const Vector& y, Index layer,
                                  double h) {
  const Matrix& w = mlp.weights[layer - 1];
  Matrix g(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      Mlp plus = mlp, minus = mlp;
      plus.weights[layer - 1](i, j) += h;
      minus.weights[layer - 1](i, j) -= h;
      g(i, j) = (mlp_loss(plus, x, y) - mlp_loss(minus, x, y)) / (2 * h);
    }
  }
  return g;
}

}  // namespace

TEST(InitHierarchical, RecordedScalesFollowRatio) {
  Rng rng(3);
  const Mlp mlp = init_hierarchical(kDims, 1e-2, 0.4, rng);
  ASSERT_EQ(mlp.scales.size(), 3u);
  for (std::size_t l = 0; l + 1 < mlp.scales.size(); ++l) {
    EXPECT_NEAR(mlp.scales[l + 1] / mlp.scales[l], 0.4, 1e-12);
  }
  for (Index l = 0; l < mlp.depth(); ++l) {
    const Matrix& w = mlp.weights[l];
    EXPECT_NEAR(w.rowwise().norm().maxCoeff(), mlp.scales[l], 1e-15);
  }
  EXPECT_NEAR(mlp.readout.norm(), mlp.scales.back(), 1e-15);
  EXPECT_EQ(mlp.weights[0].rows(), 16);
  EXPECT_EQ(mlp.weights[1].cols(), 16);
  EXPECT_EQ(mlp.readout.size(), 12);
}

TEST(InitHierarchical, SeedDeterminism) {
  Rng a(11), b(11);
  const Mlp m1 = init_hierarchical(kDims, 1e-2, 0.5, a);
  const Mlp m2 = init_hierarchical(kDims, 1e-2, 0.5, b);
  for (Index l = 0; l < m1.depth(); ++l) EXPECT_EQ(m1.weights[l], m2.weights[l]);
  EXPECT_EQ(m1.readout, m2.readout);
}

TEST(InitHierarchical, RejectsBadArguments) {
  Rng rng(0);
  EXPECT_THROW(init_hierarchical({20, 16, 2}, 1e-2, 0.5, rng), InvalidInput);
  EXPECT_THROW(init_hierarchical({20, 1}, 1e-2, 0.5, rng), InvalidInput);
  EXPECT_THROW(init_hierarchical(kDims, 1e-2, 1.0, rng), InvalidInput);
  EXPECT_THROW(init_hierarchical(kDims, 1e-2, 0.0, rng), InvalidInput);
  const Mlp mlp = init_hierarchical(kDims, 1e-2, 0.5, rng);
  EXPECT_THROW(mlp_predict(mlp, Matrix::Zero(3, 7)), InvalidInput);
}

TEST(LayerwiseGd, ZeroStepIsIdentity) {
  Rng rng(1);
  const Mlp mlp = init_hierarchical(kDims, 0.5, 0.5, rng);
  const GdTask t = small_task(2);
  const Mlp next = layerwise_gd_step(mlp, t.x, t.y, 1, 0.0);
  for (Index l = 0; l < mlp.depth(); ++l) EXPECT_EQ(next.weights[l], mlp.weights[l]);
}

TEST(LayerwiseGd, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const Mlp mlp = init_hierarchical(kDims, 1.0, 0.7, rng);
    const GdTask t = small_task(seed + 10);
    for (Index layer = 1; layer <= mlp.depth(); ++layer) {
      const Matrix g = layer_gradient(mlp, t.x, t.y, layer);
      const Matrix fd = finite_difference_gradient(mlp, t.x, t.y, layer, 1e-5);
      EXPECT_LE((g - fd).norm(), 1e-5 * fd.norm()) << "seed " << seed << " layer " << layer;
    }
  }
}

TEST(LayerwiseGd, ZeroLabelsAndZeroOutputGiveZeroGradient) {
  Rng rng(4);
  Mlp mlp = init_hierarchical(kDims, 0.3, 0.5, rng);
  mlp.readout.setZero();
  const GdTask t = small_task(5);
  const Vector zeros = Vector::Zero(t.y.size());
  for (Index layer = 1; layer <= mlp.depth(); ++layer) {
    EXPECT_EQ(layer_gradient(mlp, t.x, zeros, layer).norm(), 0.0);
  }
}

TEST(LayerwiseGd, OnlyTheChosenLayerMoves) {
  Rng rng(6);
  const Mlp mlp = init_hierarchical(kDims, 0.5, 0.5, rng);
  const GdTask t = small_task(7);
  for (Index layer = 1; layer <= mlp.depth(); ++layer) {
    const Mlp next = layerwise_gd_step(mlp, t.x, t.y, layer, 0.1);
    for (Index m = 1; m <= mlp.depth(); ++m) {
      if (m == layer) {
        EXPECT_NE(next.weights[m - 1], mlp.weights[m - 1]);
      } else {
        EXPECT_EQ(next.weights[m - 1], mlp.weights[m - 1]);
      }
    }
    EXPECT_EQ(next.readout, mlp.readout);
  }
}

TEST(LayerwiseGd, Horizon) {
  Rng rng(0);
  const Mlp mlp = init_hierarchical(kDims, 0.5, 0.5, rng);
  EXPECT_EQ(layer_horizon(mlp, 1, 2.0, 0.01), 100);
  EXPECT_EQ(layer_horizon(mlp, 2, 2.0, 0.01), 50);
  EXPECT_THROW(layer_horizon(mlp, 3, 2.0, 0.01), InvalidInput);
}

TEST(EffectiveReadout, MatchesJacobianForLinearNetwork) {
  // With the identity activation f is linear in z_1, so d f / d z_1 is exactly
  // the effective readout.
  Rng rng(8);
  const Mlp mlp = init_hierarchical({5, 4, 3, 1}, 0.7, 0.5, rng, Activation::identity);
  const Vector abar = effective_readout(mlp, 1);
  Vector jac(4);
  for (Index i = 0; i < 4; ++i) {
    Vector e = Vector::Zero(4);
    e(i) = 1.0;
    jac(i) = mlp.readout.dot(mlp.weights[1] * e);
  }
  EXPECT_LE((abar - jac).norm(), 1e-15);
  EXPECT_LE((effective_readout(mlp, 2) - mlp.readout).norm(), 0.0);
}

TEST(LofiPrediction, ZeroLabelsGiveZero) {
  Rng rng(9);
  const Mlp mlp = init_hierarchical(kDims, 1e-2, 0.5, rng);
  const GdTask t = small_task(10);
  const PredictedUpdate p =
      lofi_predicted_update(mlp, t.x, Vector::Zero(t.y.size()), 1, 0, 1.0);
  EXPECT_EQ(p.delta.norm(), 0.0);
}

TEST(LofiPrediction, RejectsBadNeuron) {
  Rng rng(9);
  const Mlp mlp = init_hierarchical(kDims, 1e-2, 0.5, rng);
  const GdTask t = small_task(10);
  EXPECT_THROW(lofi_predicted_update(mlp, t.x, t.y, 1, 16, 1.0), InvalidInput);
  EXPECT_THROW(lofi_predicted_update(mlp, t.x, t.y, 0, 0, 1.0), InvalidInput);
}

TEST(LofiPrediction, EvenTaskHasNoLinearSpike) {
  const GdTask t = small_task(12, 200);
  EXPECT_LE(linear_moment(t.x, t.y).norm(), 1e-13);
  for (Index i = 0; i < 100; ++i) {
    EXPECT_NEAR(t.y(i), t.y(i + 100), 1e-14);
    EXPECT_EQ(t.x.row(i), -t.x.row(i + 100));
  }
  Rng rng(0);
  EXPECT_THROW(make_even_task(7, 20, rng), InvalidInput);
}

TEST(LofiPrediction, RelativeErrorShrinksLinearlyWithScale) {
  // err(alpha) <= C alpha: err / alpha stays bounded as alpha shrinks.
  GdScalingConfig cfg;
  cfg.alphas = {4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3, 1.25e-3};
  cfg.seeds = 2;
  const GdScalingReport r = gd_scaling_experiment(cfg, 21);
  const double c = r.mean_errors.front() / cfg.alphas.front();
  for (std::size_t j = 0; j < cfg.alphas.size(); ++j) {
    EXPECT_LE(r.mean_errors[j], 1.5 * c * cfg.alphas[j]) << cfg.alphas[j];
  }
  EXPECT_LT(r.mean_errors.back(), 1e-2);
}

TEST(LofiPrediction, ScalingRatioNearTwo) {
  const GdScalingReport r = gd_scaling_experiment(GdScalingConfig{}, 0);
  ASSERT_EQ(r.error_ratios.size(), 2u);
  for (double ratio : r.error_ratios) {
    EXPECT_GE(ratio, 1.5);
    EXPECT_LE(ratio, 3.0);
  }
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.neurons + r.degenerate, 5 * 16);
}

TEST(LofiPrediction, DegenerateReadoutFlagged) {
  Rng rng(13);
  Mlp mlp = init_hierarchical(kDims, 1e-2, 0.5, rng);
  // Make column 0 of W_2 orthogonal to the readout so a_bar_0 = 0.
  Vector col = mlp.weights[1].col(0);
  const Vector a = mlp.readout / mlp.readout.norm();
  mlp.weights[1].col(0) = col - a.dot(col) * a;
  const GdTask t = small_task(14);
  EXPECT_TRUE(lofi_predicted_update(mlp, t.x, t.y, 1, 0, 1.0).degenerate);
}

TEST(FeatureOverlap, SelfCorrelationDiagonal) {
  Rng rng(15);
  const Matrix z = gaussian_matrix(300, 6, rng);
  const FeatureOverlap f = feature_overlap_matrix(z, z);
  for (Index j = 0; j < 6; ++j) EXPECT_NEAR(f.correlation(j, j), 1.0, 1e-14);
  EXPECT_EQ(f.excluded, 0);
}

TEST(FeatureOverlap, IndependentFeaturesNearZero) {
  // Null distribution: each entry is approximately N(0, 1/n).
  Rng rng(16);
  const Index n = 20000;
  const Matrix a = gaussian_matrix(n, 8, rng);
  const Matrix b = gaussian_matrix(n, 8, rng);
  const Matrix c = feature_overlap_matrix(a, b).correlation;
  EXPECT_LE(c.cwiseAbs().maxCoeff(), 4.5 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(c.squaredNorm() / 64.0 * n, 1.0, 0.35);
}

TEST(FeatureOverlap, InvariantToColumnAffineMaps) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = gaussian_matrix(50, 4, rng);
    Matrix b = gaussian_matrix(50, 4, rng) + 0.5 * a;
    const Matrix base = feature_overlap_matrix(a, b).correlation;
    Matrix a2 = a, b2 = b;
    for (Index j = 0; j < 4; ++j) {
      a2.col(j) = a2.col(j) * (0.1 + rng.uniform() * 5) + Vector::Constant(50, rng.normal());
      b2.col(j) = b2.col(j) * (0.1 + rng.uniform() * 5) + Vector::Constant(50, rng.normal());
    }
    EXPECT_LE((feature_overlap_matrix(a2, b2).correlation - base).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FeatureOverlap, ConstantColumnsExcluded) {
  Rng rng(18);
  Matrix a = gaussian_matrix(40, 3, rng);
  a.col(1).setConstant(2.0);
  const FeatureOverlap f = feature_overlap_matrix(a, a);
  EXPECT_EQ(f.excluded, 2);
  EXPECT_EQ(f.correlation.rows(), 2);
  EXPECT_EQ(f.kept_a, (std::vector<Index>{0, 2}));
  EXPECT_THROW(feature_overlap_matrix(Matrix::Ones(10, 2), Matrix::Ones(10, 2)),
               DegenerateFeatures);
}

TEST(FeatureOverlap, NormalizedOverlap) {
  const Matrix f0 = Matrix::Identity(2, 2);
  EXPECT_NEAR(normalized_overlap(2.0 * f0, f0), 1.0, 1e-15);
  EXPECT_EQ(normalized_overlap(f0, f0), 0.0);
  EXPECT_THROW(normalized_overlap(f0, Matrix::Zero(2, 2)), DegenerateFeatures);
}
