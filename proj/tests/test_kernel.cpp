#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lofi/errors.hpp"
#include "lofi/kernel.hpp"
#include "lofi/lofi.hpp"

using namespace lofi;

namespace {

Vector gaussian_vector(Index n, Rng& rng) { return gaussian_matrix(n, 1, rng).col(0); }

struct McEstimate {
  double mean;
  double se;
};

// Independent Monte-Carlo oracle with its standard error.
McEstimate mc_relu(const Vector& g, const Vector& gp, int samples, Rng& rng) {
  double s = 0.0, q = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vector r = gaussian_vector(g.size(), rng);
    const double v = std::max(0.0, r.dot(g)) * std::max(0.0, r.dot(gp));
    s += v;
    q += v * v;
  }
  const double m = s / samples;
  return {m, std::sqrt((q / samples - m * m) / samples)};
}

Dataset quadratic_task(Index n, Index d, Rng& rng) {
  Dataset ds;
  ds.x = gaussian_matrix(n, d, rng);
  ds.y = ds.x.col(0).array().square() - ds.x.col(1).array() * ds.x.col(2).array();
  return center_labels(ds);
}

}  // namespace

TEST(ArcCos, ClosedFormCases) {
  Vector g(3);
  g << 1, -2, 0.5;
  EXPECT_NEAR(relu_arccos_kernel(g, g), g.squaredNorm() / 2.0, 1e-14);
  EXPECT_NEAR(relu_arccos_kernel(g, -g), 0.0, 1e-14);
  EXPECT_EQ(relu_arccos_kernel(Vector::Zero(3), g), 0.0);
  EXPECT_NEAR(relu_arccos_kernel(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)),
              1.0 / (2.0 * std::numbers::pi), 1e-15);
}

TEST(ArcCos, OrthogonalMatchesMonteCarlo) {
  Rng rng(1);
  const McEstimate mc = mc_relu(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), 1000000, rng);
  EXPECT_LE(std::abs(mc.mean - 1.0 / (2.0 * std::numbers::pi)), 3.0 * mc.se);
}

TEST(MonteCarloKernel, IdentityConvergesToDot) {
  Rng rng(2);
  const Vector g = Eigen::Vector3d(0.3, -1.0, 0.7);
  const Vector gp = Eigen::Vector3d(1.1, 0.2, -0.4);
  // Var[(r.g)(r.g')] = |g|^2 |g'|^2 + (g.g')^2.
  const double se = std::sqrt((g.squaredNorm() * gp.squaredNorm() + std::pow(g.dot(gp), 2)) / 1e6);
  const double k = monte_carlo_kernel(Activation::identity, g, gp, 1000000, rng);
  EXPECT_LE(std::abs(k - g.dot(gp)), 4.0 * se);
}

TEST(MonteCarloKernel, ZeroArgumentAndDeterminism) {
  Rng a(3), b(3);
  const Vector g = Eigen::Vector2d(1, 2);
  EXPECT_EQ(monte_carlo_kernel(Activation::relu, Vector::Zero(2), g, 100, a), 0.0);
  Rng c(4), d(4);
  EXPECT_EQ(monte_carlo_kernel(Activation::relu, g, g, 100, c),
            monte_carlo_kernel(Activation::relu, g, g, 100, d));
}

TEST(KernelMatrix, MonteCarloApproachesArcCos) {
  Rng rng(5);
  const Matrix a = gaussian_matrix(6, 4, rng);
  KernelSpec mc{KernelKind::monte_carlo, Activation::relu, 200000, 11};
  const Matrix km = kernel_matrix(mc, a, a);
  const Matrix ka = kernel_matrix(KernelSpec{}, a, a);
  EXPECT_LE((km - ka).cwiseAbs().maxCoeff(), 0.05 * ka.cwiseAbs().maxCoeff());
  EXPECT_EQ(kernel_matrix(mc, a, a), km);
}

TEST(KernelLayer, TwoByTwoClosedForm) {
  const Matrix g = Matrix::Identity(2, 2);
  const KernelLayer layer = kernel_lofi_layer(g, Eigen::Vector2d(1, -1), 1);
  ASSERT_EQ(layer.directions(), 1);
  EXPECT_NEAR(layer.eigenvalues(0), 0.5, 1e-15);
  EXPECT_NEAR(layer.alpha(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(layer.alpha(1, 0), 0.0, 1e-15);
}

TEST(KernelLayer, ZeroLabelsFlagged) {
  Rng rng(6);
  const Matrix x = gaussian_matrix(5, 3, rng);
  const KernelLayer layer = kernel_lofi_layer(x * x.transpose(), Vector::Zero(5), 2);
  EXPECT_TRUE(layer.rank_deficient);
  EXPECT_EQ(layer.directions(), 0);
}

TEST(KernelLayer, NotPsdRejected) {
  Matrix g = Eigen::Vector2d(1, -1).asDiagonal();
  EXPECT_THROW(kernel_lofi_layer(g, Eigen::Vector2d(1, -1), 1), NotPSD);
}

TEST(KernelLayerProperty, NormEquivalenceAndOrthonormality) {
  Rng gen(7);
  for (int t = 0; t < 15; ++t) {
    const Index n = 5 + static_cast<Index>(gen.below(40));
    const Index d = 1 + static_cast<Index>(gen.below(60));
    const Matrix x = gaussian_matrix(n, d, gen);
    const Matrix g = kernel_matrix(KernelSpec{}, x, x);
    const Vector y = gaussian_vector(n, gen);
    const Index k = std::min<Index>(3, n);
    const KernelLayer layer = kernel_lofi_layer(g, y, k);
    const Index kk = layer.directions();
    EXPECT_LE((layer.beta.transpose() * layer.beta - Matrix::Identity(kk, kk)).norm(), 1e-8);
    const Matrix rkhs = layer.alpha.transpose() * g * layer.alpha;
    for (Index j = 0; j < kk; ++j) EXPECT_NEAR(rkhs(j, j), 1.0, 1e-8);

    // beta_1 maximizes |b^T B b| over unit b.
    const PsdRoots roots = psd_sqrt_and_pinv_sqrt(g);
    const Matrix b = roots.sqrt * y.asDiagonal() * roots.sqrt / static_cast<double>(n);
    const double q1 = std::abs(layer.beta.col(0).dot(b * layer.beta.col(0)));
    for (int s = 0; s < 200; ++s) {
      Vector u = gaussian_vector(n, gen);
      u.normalize();
      EXPECT_GE(q1, std::abs(u.dot(b * u)) - 1e-10);
    }
  }
}

TEST(KernelFeatures, ReproduceTrainingRows) {
  Rng rng(8);
  const Matrix x = gaussian_matrix(20, 6, rng);
  const Matrix g = x * x.transpose();
  const KernelLayer layer = kernel_lofi_layer(g, gaussian_vector(20, rng), 3);
  const Matrix eval = kernel_feature_eval(layer, g);
  EXPECT_LE((eval - layer.features).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(kernel_feature_eval(layer, Matrix::Zero(20, 2)), Matrix::Zero(2, 3));
  const Matrix s1 = gaussian_matrix(20, 2, rng), s2 = gaussian_matrix(20, 2, rng);
  EXPECT_LE((kernel_feature_eval(layer, 2.0 * s1 - s2) -
             (2.0 * kernel_feature_eval(layer, s1) - kernel_feature_eval(layer, s2)))
                .norm(),
            1e-12);
  EXPECT_THROW(kernel_feature_eval(layer, Matrix::Zero(19, 1)), InvalidInput);
}

TEST(KernelFeatures, LinearKernelMatchesFiniteLayerOne) {
  // With K0 = X X^T the dual features G alpha equal X v for the eigenvectors
  // v of the primal moment operator, up to sign.
  Rng rng(9);
  const Dataset ds = quadratic_task(150, 8, rng);
  const LayerFit finite = fit_layer(ds.x, ds.y, LayerSpec{10, 3}, rng);
  const KernelLayer dual = kernel_lofi_layer(ds.x * ds.x.transpose(), ds.y, 3);
  const Matrix primal = ds.x * finite.layer.projection;
  for (Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(dual.eigenvalues(j), finite.layer.eigenvalues(j), 1e-10);
    const double s = primal.col(j).dot(dual.features.col(j)) > 0 ? 1.0 : -1.0;
    EXPECT_LE((primal.col(j) - s * dual.features.col(j)).norm(), 1e-8 * primal.col(j).norm());
  }
}

TEST(KernelRidge, AgreesWithPrimalRidgeCv) {
  Rng rng(10);
  const Matrix z = gaussian_matrix(60, 8, rng);
  const Vector y = z.col(0) + 0.3 * gaussian_vector(60, rng);
  const std::vector<double> grid = log_grid(1e-3, 1e2, 12);
  Rng a(4), b(4);
  const RidgeCvResult primal = ridge_cv(z, y, grid, 5, a);
  const KernelRidgeCvResult dual = kernel_ridge_cv(z * z.transpose(), y, grid, 5, b);
  EXPECT_EQ(primal.lambda, dual.lambda);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    EXPECT_NEAR(primal.cv_errors[g], dual.cv_errors[g], 1e-9);
  }
  EXPECT_LE((z.transpose() * dual.coefficients - primal.weights).norm(), 1e-9);
}

TEST(KernelModel, DepthZeroIsLinearKernelRidge) {
  Rng rng(11);
  Dataset ds = quadratic_task(50, 5, rng);
  KernelModelConfig cfg;
  Rng a(1);
  const KernelModel m = fit_kernel_model(ds, cfg, a);
  Rng b = Rng(1).fork(kReadoutStream);
  const KernelRidgeCvResult r =
      kernel_ridge_cv(ds.x * ds.x.transpose(), ds.y, default_kernel_ridge_grid(), 5, b);
  EXPECT_EQ(m.lambda, r.lambda);
  const Matrix test = gaussian_matrix(7, 5, rng);
  EXPECT_LE((predict(m, test) - test * ds.x.transpose() * r.coefficients).norm(), 1e-10);
}

TEST(KernelModel, DeterministicAndConsistent) {
  Rng rng(12);
  const Dataset ds = quadratic_task(80, 6, rng);
  KernelModelConfig cfg;
  cfg.ranks = {3, 2};
  cfg.normalize_features = true;
  Rng a(5), b(5);
  const KernelModel m1 = fit_kernel_model(ds, cfg, a);
  const KernelModel m2 = fit_kernel_model(ds, cfg, b);
  EXPECT_EQ(predict(m1, ds.x), predict(m2, ds.x));
  // Features at the training inputs replay the stored training features.
  for (Index depth = 1; depth <= 2; ++depth) {
    const Matrix f = kernel_features(m1, ds.x, depth);
    EXPECT_LE((f - m1.layers[static_cast<std::size_t>(depth - 1)].features).cwiseAbs().maxCoeff(),
              1e-8);
  }
}

TEST(KernelModelProperty, RecursiveGramsStayPsd) {
  Rng gen(13);
  for (int t = 0; t < 8; ++t) {
    const Dataset ds = quadratic_task(30 + static_cast<Index>(gen.below(40)), 5, gen);
    Matrix gram = ds.x * ds.x.transpose();
    for (int level = 0; level < 3; ++level) {
      const KernelLayer layer = kernel_lofi_layer(gram, ds.y, 3);
      gram = kernel_matrix(KernelSpec{}, layer.features, layer.features);
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * es.eigenvalues().maxCoeff());
    }
  }
}

TEST(KernelModel, FiniteGramApproachesKernelGram) {
  // Z Z^T of a wide finite layer concentrates around the arc-cosine Gram of
  // the normalized projected features.
  Rng rng(14);
  const Dataset ds = quadratic_task(40, 6, rng);
  const LayerFit fit = fit_layer(ds.x, ds.y, LayerSpec{20000, 3}, rng);
  const Matrix g = ds.x * fit.layer.projection / fit.layer.rms_norm;
  const Matrix kg = kernel_matrix(KernelSpec{}, g, g);
  const Matrix zz = fit.next * fit.next.transpose();
  EXPECT_LE((zz - kg).norm(), 0.05 * kg.norm());
}
