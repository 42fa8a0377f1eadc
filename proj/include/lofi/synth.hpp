#pragma once

#include <string_view>

#include "lofi/dataset.hpp"
#include "lofi/linalg.hpp"

namespace lofi {

inline Index hermite2_dim(Index d) { return d * (d + 1) / 2; }

/// Flattened H_2(x) = (x x^T - I) / sqrt(2): the d diagonal coordinates
/// (x_i^2 - 1) / sqrt(2) first, then x_i x_j for i < j in lexicographic order.
/// Orthonormal under the standard Gaussian measure.
Vector hermite2_features(const Vector& x);
Matrix hermite2_feature_rows(const Matrix& x);

/// Flattening of a symmetric matrix in the same coordinates, scaled so that
/// <flatten(A), flatten(B)> = <A, B>_F.
Vector flatten_symmetric(const Matrix& a);
Matrix unflatten_symmetric(const Vector& v, Index d);

enum class Link { tanh, identity };
Link parse_link(std::string_view name);
std::string to_string(Link link);

/// Two-level teacher y = g*(h2), h2 = <A2, H_2(h1)>, h1 = A1 H_2(x).
struct HierTeacher {
  Index d = 0;
  Index d1 = 0;
  double epsilon = 0.5;
  Link link = Link::tanh;
  Matrix a1;  // d1 x D2, unit rows
  Matrix a2;  // d1 x d1, symmetric, unit Frobenius norm
};

/// floor(d^epsilon) with a small guard against pow rounding below an integer.
Index latent_dim(Index d, double epsilon);

HierTeacher gen_teacher(Index d, double epsilon, Link link, Rng& rng);

struct SynthSample {
  Dataset data;  // labels centered over the sample
  Matrix h1;     // n x d1
  Vector h2;
};

SynthSample sample_synth(const HierTeacher& teacher, Index n, Rng& rng);

/// Normalized overlap between two representations of the same n samples:
/// columns are centered and orthonormalized, then ||Q_H^T Q_Hhat||_F^2 is
/// divided by max(k, k'). Equals 1 iff the column spans coincide and k = k'.
double representation_overlap(const Matrix& h, const Matrix& h_hat);

/// The random-feature hierarchical estimator: spherical relu_perp01 features,
/// a rank-d1 spectral filter at layer one, the first-moment direction at
/// layer two, and a polynomial ridge readout of the scalar feature.
struct RfConfig {
  Index p1 = 0;
  Index p2 = 0;
  Index rank = 0;  // 0 means d1 of the teacher
  bool batch_norm = true;
  int poly_degree = 5;
  double ridge = 1e-6;
  Index batch_rows = 4096;
  Index spectrum_size = 0;  // 0 keeps every eigenvalue of C1, else only the leading ones
};

struct RfEstimator {
  Matrix w1;  // p1 x d, unit rows
  Matrix v1;  // p1 x k
  Vector spectrum;  // every eigenvalue of C1, ordered by decreasing |lambda|
  Vector bn_mean, bn_scale;
  Matrix w2;  // p2 x k, unit rows
  Vector v2;  // p2
  double h2_mean = 0.0, h2_scale = 1.0;
  Vector poly;  // readout weights on 1, t, ..., t^degree
};

RfEstimator fit_rf_estimator(const SynthSample& train, const RfConfig& config, Index rank,
                             Rng& rng);

struct RfOutput {
  Matrix h1_hat;  // after batch normalization when enabled
  Vector h2_hat;
  Vector prediction;
};

RfOutput rf_forward(const RfEstimator& est, const RfConfig& config, const Matrix& x);

struct RfMetrics {
  double test_mse = 0.0;
  double label_variance = 0.0;
  double overlap = 0.0;    // representation_overlap(H1, H1_hat) on the test set
  double gap_ratio = 0.0;  // |lambda_k| / |lambda_{k+1}| of C1
  Vector spectrum;
};

RfMetrics evaluate_rf(const RfEstimator& est, const RfConfig& config, const SynthSample& test,
                      Index rank);

/// floor(d^alpha), guarded so integer powers come out exact.
Index synth_sample_size(Index d, double alpha);

/// Full experiment at one sample size n = floor(d^alpha).
struct SynthExperiment {
  Index d = 40;
  double epsilon = 0.5;
  Link link = Link::tanh;
  double alpha = 3.0;
  Index n_test = 4000;
  RfConfig rf;
};

RfMetrics run_synth_experiment(const SynthExperiment& exp, std::uint64_t seed);

}  // namespace lofi
