#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "lofi/errors.hpp"
#include "lofi/importance.hpp"

using namespace lofi;

namespace {

LofiModel fitted_model(Activation act, std::uint64_t seed, Index d = 6) {
  Rng rng(seed);
  Dataset ds;
  ds.x = gaussian_matrix(300, d, rng);
  ds.y = ds.x.col(0).array().square() - 1.0 + ds.x.col(1).array() * ds.x.col(2).array();
  ds.y.array() -= ds.y.mean();
  ds.centered = true;
  std::vector<LayerSpec> specs(2);
  specs[0] = {40, 3, act, true};
  specs[1] = {30, 2, act, false};
  ReadoutConfig readout;
  readout.lambda_grid = {1e-2};
  return fit_model(ds, specs, readout, rng);
}

Vector finite_difference(const LofiModel& model, const Vector& x, Index layer, const Vector& v,
                         double h) {
  Vector g(x.size());
  for (Index d = 0; d < x.size(); ++d) {
    Matrix plus = x.transpose(), minus = x.transpose();
    plus(0, d) += h;
    minus(0, d) -= h;
    g(d) = (represent(model, plus, layer).row(0).dot(v) -
            represent(model, minus, layer).row(0).dot(v)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Importance, InputLayerIsSquaredDirection) {
  const LofiModel model = fitted_model(Activation::relu, 1);
  Rng rng(2);
  const Matrix x = gaussian_matrix(25, 6, rng);
  for (Index k = 0; k < model.layers[0].directions(); ++k) {
    const Vector expected = model.layers[0].projection.col(k).array().square();
    EXPECT_EQ(importance_map(model, x, 0, k), expected);
  }
}

TEST(Importance, JacobianMatchesFiniteDifferences) {
  const LofiModel model = fitted_model(Activation::smooth_test, 3);
  Rng rng(4);
  const Matrix x = gaussian_matrix(10, 6, rng);
  for (Index layer = 1; layer <= 2; ++layer) {
    const Index width = model.layers[layer - 1].width();
    const Vector v = gaussian_matrix(width, 1, rng).col(0);
    const Matrix j = representation_vjp(model, x, layer, v);
    for (Index i = 0; i < x.rows(); ++i) {
      const Vector fd = finite_difference(model, x.row(i).transpose(), layer, v, 1e-5);
      EXPECT_LE((j.row(i).transpose() - fd).norm(), 1e-4 * fd.norm())
          << "layer " << layer << " sample " << i;
    }
  }
}

TEST(Importance, MapAveragesSquaredJvp) {
  const LofiModel model = fitted_model(Activation::smooth_test, 5);
  Rng rng(6);
  const Matrix x = gaussian_matrix(8, 6, rng);
  const Vector v = model.layers[1].projection.col(1);
  Vector expected = Vector::Zero(6);
  for (Index i = 0; i < 8; ++i) {
    expected += finite_difference(model, x.row(i).transpose(), 1, v, 1e-5).array().square().matrix();
  }
  expected /= 8.0;
  EXPECT_LE((importance_map(model, x, 1, 1) - expected).norm(), 1e-4 * expected.norm());
}

TEST(Importance, EqualWeightsGiveUnweightedMean) {
  LofiModel model = fitted_model(Activation::smooth_test, 7);
  Rng rng(8);
  const Matrix x = gaussian_matrix(12, 6, rng);
  FittedLayer& fl = model.layers[1];
  for (Index k = 0; k < fl.directions(); ++k) fl.eigenvalues(k) = (k % 2 == 0) ? 0.3 : -0.3;
  Vector mean = Vector::Zero(6);
  for (Index k = 0; k < fl.directions(); ++k) mean += importance_map(model, x, 1, k);
  mean /= static_cast<double>(fl.directions());
  EXPECT_LE((aggregate_importance(model, x, 1) - mean).norm(), 1e-14 * mean.norm());
}

TEST(Importance, LinearDirectionSkippedInAggregate) {
  const LofiModel model = fitted_model(Activation::relu, 9);
  ASSERT_TRUE(model.layers[0].has_linear);
  Rng rng(10);
  const Matrix x = gaussian_matrix(5, 6, rng);
  const FittedLayer& fl = model.layers[0];
  Vector expected = Vector::Zero(6);
  double w = 0.0;
  for (Index k = 1; k < fl.directions(); ++k) {
    expected += std::abs(fl.eigenvalues(k)) * fl.projection.col(k).array().square().matrix();
    w += std::abs(fl.eigenvalues(k));
  }
  EXPECT_LE((aggregate_importance(model, x, 0) - expected / w).norm(), 1e-15);
}

TEST(Importance, RejectsBadIndices) {
  const LofiModel model = fitted_model(Activation::relu, 11);
  const Matrix x = Matrix::Zero(3, 6);
  EXPECT_THROW(importance_map(model, x, 2, 0), InvalidInput);
  EXPECT_THROW(importance_map(model, x, 0, 9), InvalidInput);
  EXPECT_THROW(importance_map(model, Matrix::Zero(3, 5), 0, 0), InvalidInput);
}

TEST(LowPass, ConstantMapUnchanged) {
  const Vector map = Vector::Constant(4 * 6 * 2, 0.7);
  EXPECT_LE((low_pass_smooth(map, {4, 6, 2}) - map).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LowPass, PlaneWaveScaledByMask) {
  // A single Fourier mode is an eigenfunction: it comes back scaled by m(f).
  const Index h = 8, w = 8;
  const double f0 = 0.15, a = 3.0;
  for (auto [kr, kc] : std::vector<std::pair<Index, Index>>{{0, 1}, {2, 3}, {4, 4}}) {
    Vector map(h * w);
    for (Index r = 0; r < h; ++r) {
      for (Index c = 0; c < w; ++c) {
        map(r * w + c) = std::cos(2 * M_PI * (double(kr * r) / h + double(kc * c) / w));
      }
    }
    const double f = std::hypot(double(kr) / h, double(kc) / w);
    const double m = std::pow(1.0 + f / f0, -a);
    EXPECT_LE((low_pass_smooth(map, {h, w, 1}, f0, a) - m * map).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LowPass, MatchesDirectDft) {
  // Direct O(n^2) transform as the oracle, including odd and one-wide grids.
  const double f0 = 0.2, a = 2.0;
  auto freq = [](Index k, Index n) { return double(k <= (n - 1) / 2 ? k : k - n) / n; };
  Rng rng(14);
  for (auto [h, w] : std::vector<std::pair<Index, Index>>{{5, 6}, {7, 1}, {1, 4}, {1, 1}}) {
    const Vector map = gaussian_matrix(h * w, 1, rng).col(0);
    Vector expected = Vector::Zero(h * w);
    for (Index kr = 0; kr < h; ++kr) {
      for (Index kc = 0; kc < w; ++kc) {
        std::complex<double> coef = 0.0;
        for (Index r = 0; r < h; ++r) {
          for (Index c = 0; c < w; ++c) {
            coef += map(r * w + c) *
                    std::polar(1.0, -2 * M_PI * (double(kr * r) / h + double(kc * c) / w));
          }
        }
        const double m = std::pow(1.0 + std::hypot(freq(kr, h), freq(kc, w)) / f0, -a);
        for (Index r = 0; r < h; ++r) {
          for (Index c = 0; c < w; ++c) {
            expected(r * w + c) +=
                (m * coef * std::polar(1.0, 2 * M_PI * (double(kr * r) / h + double(kc * c) / w)))
                    .real() / double(h * w);
          }
        }
      }
    }
    EXPECT_LE((low_pass_smooth(map, {h, w, 1}, f0, a) - expected).cwiseAbs().maxCoeff(), 1e-12)
        << h << "x" << w;
  }
}

TEST(LowPass, ZeroExponentIsIdentity) {
  Rng rng(12);
  const Vector map = gaussian_matrix(5 * 7 * 3, 1, rng).col(0);
  EXPECT_LE((low_pass_smooth(map, {5, 7, 3}, 0.15, 0.0) - map).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LowPass, ChannelsSmoothedIndependently) {
  Rng rng(13);
  const Vector map = gaussian_matrix(6 * 6 * 2, 1, rng).col(0);
  const Vector both = low_pass_smooth(map, {6, 6, 2});
  Vector ch0(36);
  for (Index i = 0; i < 36; ++i) ch0(i) = map(2 * i);
  const Vector single = low_pass_smooth(ch0, {6, 6, 1});
  for (Index i = 0; i < 36; ++i) EXPECT_NEAR(both(2 * i), single(i), 1e-13);
}

TEST(LowPass, GridMismatchRejected) {
  EXPECT_THROW(low_pass_smooth(Vector::Zero(10), {3, 3, 1}), InvalidInput);
  EXPECT_THROW(low_pass_smooth(Vector::Zero(9), {3, 3, 1}, 0.0), InvalidInput);
}
