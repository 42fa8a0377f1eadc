#include <gtest/gtest.h>

#include <cmath>

#include "lofi/emergence.hpp"
#include "lofi/errors.hpp"

using namespace lofi;

TEST(EffectiveDimension, Examples) {
  EXPECT_NEAR(effective_dimension(Eigen::Vector3d(1, 1, 1), 1.0), 1.5, 1e-15);
  EXPECT_LE(effective_dimension(Eigen::Vector2d(1, 1), 1e12), 2e-12);
  EXPECT_NEAR(effective_dimension(Eigen::Vector3d(4, 1, 0.25), 1.0), 1.5, 1e-15);
  EXPECT_THROW(effective_dimension(Eigen::Vector2d(1, 1), 0.0), InvalidInput);
}

TEST(EffectiveDimension, FlatClosedForm) {
  for (Index m : {1, 7, 64}) {
    for (double a : {0.1, 1.0, 3.5}) {
      for (double r : {1e-3, 0.5, 2.0}) {
        EXPECT_NEAR(effective_dimension(Vector::Constant(m, a), r), m * a / (a + r),
                    1e-14 * m);
      }
    }
  }
}

TEST(EffectiveDimensionProperty, MonotoneAndBounded) {
  Rng gen(1);
  for (int t = 0; t < 50; ++t) {
    const Index m = 1 + static_cast<Index>(gen.below(20));
    Vector spec(m);
    for (Index i = 0; i < m; ++i) spec(i) = gen.uniform() < 0.2 ? 0.0 : std::exp(3 * gen.normal());
    const Index rank = (spec.array() > 0).count();
    double prev = effective_dimension(spec, 1e-14);
    EXPECT_LE(prev, static_cast<double>(rank) + 1e-12);
    if (rank > 0) EXPECT_GE(prev, rank - 1e-3 * rank);
    for (double r = 1e-10; r < 1e10; r *= 3.7) {
      const double cur = effective_dimension(spec, r);
      if (rank > 0) EXPECT_LT(cur, prev);
      prev = cur;
    }
  }
}

// Oracle: dense grid search of r sqrt(D(r)) at 1e4 resolution in log r.
double grid_argmax(const Vector& spec) {
  const double top = spec.maxCoeff();
  double best_r = 0.0, best = -1.0;
  for (int i = 1; i <= 10000; ++i) {
    const double r = top * std::pow(10.0, -12.0 + 12.0 * i / 10000.0);
    const double v = r * std::sqrt(effective_dimension(spec, r));
    if (v >= best) {
      best = v;
      best_r = r;
    }
  }
  return best_r;
}

TEST(RStar, FlatSpectrum) {
  for (Index m : {1, 3, 40}) {
    const double a = 0.7;
    const RStar rs = r_star(Vector::Constant(m, a));
    EXPECT_EQ(rs.r, a);
    EXPECT_NEAR(rs.value, a * std::sqrt(m / 2.0), 1e-14);
    EXPECT_NEAR(rs.r, grid_argmax(Vector::Constant(m, a)), 1e-12);
  }
}

TEST(RStar, MatchesGridOracle) {
  Rng gen(2);
  for (int t = 0; t < 20; ++t) {
    Vector spec(30);
    for (Index i = 0; i < 30; ++i) spec(i) = std::exp(2.0 * gen.normal());
    const RStar rs = r_star(spec);
    const double oracle = grid_argmax(spec);
    const double f_oracle = oracle * std::sqrt(effective_dimension(spec, oracle));
    EXPECT_GE(rs.value, f_oracle * (1 - 1e-6));
    EXPECT_LE(rs.r, spec.maxCoeff());
  }
}

TEST(RStar, Homogeneity) {
  const Vector spec = Eigen::Vector4d(5, 2, 1, 0.1);
  const RStar a = r_star(spec);
  const RStar b = r_star(3.0 * spec);
  EXPECT_NEAR(b.r, 3.0 * a.r, 1e-6 * a.r);
  EXPECT_NEAR(b.value, 3.0 * a.value, 1e-9 * a.value);
}

TEST(RStar, ZeroSpectrum) {
  EXPECT_THROW(r_star(Vector::Zero(3)), ZeroSpectrum);
}

TEST(Deflate, Examples) {
  Rng rng(3);
  const Matrix b = gaussian_matrix(6, 6, rng);
  const Matrix sigma = b * b.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  const Vector v = es.eigenvectors().col(2);
  const double mu = es.eigenvalues()(2);
  EXPECT_LE((residual_deflate(sigma, v) - (sigma - mu * v * v.transpose())).norm(),
            1e-12 * sigma.norm());
  Vector u = Vector::Ones(6) / std::sqrt(6.0);
  EXPECT_LE((residual_deflate(Matrix::Identity(6, 6), u) -
             (Matrix::Identity(6, 6) - u * u.transpose()))
                .norm(),
            1e-15);
  EXPECT_THROW(residual_deflate(sigma, Vector::Ones(6)), InvalidInput);
}

TEST(DeflateProperty, StaysPsd) {
  Rng gen(4);
  for (int t = 0; t < 30; ++t) {
    const Index d = 2 + static_cast<Index>(gen.below(15));
    const Matrix b = gaussian_matrix(d, 1 + static_cast<Index>(gen.below(d)), gen);
    Vector v = gaussian_matrix(d, 1, gen).col(0);
    v.normalize();
    const Matrix r = residual_deflate(b * b.transpose(), v);
    Eigen::SelfAdjointEigenSolver<Matrix> es(r);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    EXPECT_LE((r * v).norm(), 1e-10 * (1 + b.squaredNorm()));
  }
}

TEST(Thresholds, HandEvaluatedRecipe) {
  const Matrix c = Eigen::Vector2d(1, 0.5).asDiagonal();
  const EmergenceReport rep = predict_thresholds(c, Matrix::Identity(2, 2), 2);
  ASSERT_EQ(rep.size(), 2u);
  EXPECT_EQ(rep.rho[0], 1.0);
  EXPECT_EQ(rep.r_star[0], 1.0);
  EXPECT_NEAR(rep.d_eff[0], 1.0, 1e-15);
  EXPECT_NEAR(rep.n_threshold[0], 1.0, 1e-15);
  EXPECT_EQ(rep.rho[1], 0.5);
  EXPECT_NEAR(rep.r_star[1], 1.0, 1e-15);
  EXPECT_NEAR(rep.d_eff[1], 0.5, 1e-15);
  EXPECT_NEAR(rep.n_threshold[1], 2.0, 1e-14);
}

TEST(Thresholds, FlatScaling) {
  const Matrix c = Eigen::Vector3d(2, 1, 0.5).asDiagonal();
  const EmergenceReport a = predict_thresholds(c, Matrix::Identity(3, 3), 3);
  const EmergenceReport b = predict_thresholds(c, 4.0 * Matrix::Identity(3, 3), 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(b.n_threshold[k], 16.0 * a.n_threshold[k], 1e-12);
}

TEST(Thresholds, ZeroRhoUnresolved) {
  const Matrix c = Eigen::Vector2d(1, 0).asDiagonal();
  const EmergenceReport rep = predict_thresholds(c, Matrix::Identity(2, 2), 2);
  EXPECT_FALSE(rep.unresolved[0]);
  EXPECT_TRUE(rep.unresolved[1]);
  EXPECT_TRUE(std::isinf(rep.n_threshold[1]));
  EXPECT_EQ(predict_thresholds(c, Matrix::Identity(2, 2), 1).size(), 1u);
}

TEST(Thresholds, SpikeModelOrdering) {
  // Population operators: C has eigenvalues sqrt(2) c_j, Sigma = I.
  Rng rng(5);
  const SpikeModel m = make_spike_model(30, Eigen::Vector3d(1, 0.5, 0.25), rng);
  const EmergenceReport rep =
      predict_thresholds(spike_population_operator(m), Matrix::Identity(30, 30), 3);
  EXPECT_LT(rep.n_threshold[0], rep.n_threshold[1]);
  EXPECT_LT(rep.n_threshold[1], rep.n_threshold[2]);
  // Flat residual of d - k + 1 unit eigenvalues: r* = 1, D = (d - k + 1) / 2.
  for (std::size_t k = 0; k < 3; ++k) {
    const double rho = std::sqrt(2.0) * m.correlations(static_cast<Index>(k));
    EXPECT_NEAR(rep.n_threshold[k], (30.0 - k) / 2.0 / (rho * rho), 1e-9);
  }
}

TEST(Thresholds, EmpiricalSpikeOperatorConverges) {
  Rng rng(6);
  const SpikeModel m = make_spike_model(10, Eigen::Vector2d(1, 0.5), rng);
  const Dataset ds = sample_spike_model(m, 200000, rng);
  Matrix c = Matrix::Zero(10, 10);
  for (Index i = 0; i < ds.size(); ++i) c += ds.y(i) * ds.x.row(i).transpose() * ds.x.row(i);
  c /= static_cast<double>(ds.size());
  EXPECT_LE((c - spike_population_operator(m)).norm(), 0.05);
}

TEST(EigvecOverlap, Examples) {
  const Vector a = Eigen::Vector2d(0.6, 0.8);
  EXPECT_NEAR(eigvec_overlap(a, a), 1.0, 1e-15);
  EXPECT_NEAR(eigvec_overlap(a, -a), 1.0, 1e-15);
  EXPECT_NEAR(eigvec_overlap(a, Eigen::Vector2d(-0.8, 0.6)), 0.0, 1e-30);
}
