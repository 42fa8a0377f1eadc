#pragma once

#include <vector>

#include "lofi/activation.hpp"
#include "lofi/linalg.hpp"

namespace lofi {

/// Fully connected network f(x) = <a, z_L(x)>, z_l = sigma(W_l z_{l-1}),
/// trained one layer at a time with the readout a frozen.
struct Mlp {
  std::vector<Matrix> weights;  // W_1..W_L, W_l is p_l x p_{l-1}
  Vector readout;
  std::vector<double> scales;   // alpha_1..alpha_L then alpha_{L+1} = ||a||
  Activation activation = Activation::smooth_test;

  Index depth() const { return static_cast<Index>(weights.size()); }
  Index input_dim() const { return weights.front().cols(); }
};

/// dims = {d, p_1, ..., p_L, 1}. Rows of W_l are Gaussian directions of norm
/// alpha * ratio^(l-1); the readout has norm alpha * ratio^L.
Mlp init_hierarchical(const std::vector<Index>& dims, double alpha, double ratio, Rng& rng,
                      Activation activation = Activation::smooth_test);

/// Per-layer representations z_0 = x, ..., z_L (rows are samples).
std::vector<Matrix> forward_layers(const Mlp& mlp, const Matrix& x);
Vector mlp_predict(const Mlp& mlp, const Matrix& x);

/// (1/2n) sum (y - f(x))^2
double mlp_loss(const Mlp& mlp, const Matrix& x, const Vector& y);

/// Exact gradient of the loss with respect to W_layer (1-based).
Matrix layer_gradient(const Mlp& mlp, const Matrix& x, const Vector& y, Index layer);

/// Full-batch step on W_layer only.
Mlp layerwise_gd_step(const Mlp& mlp, const Matrix& x, const Vector& y, Index layer, double eta);

/// floor(tau * alpha_layer / eta)
Index layer_horizon(const Mlp& mlp, Index layer, double tau, double eta);

/// sigma'(0)^(L-l) [(W_L(0) ... W_{l+1}(0))^T a]
Vector effective_readout(const Mlp& mlp, Index layer);

struct PredictedUpdate {
  Vector delta;
  double effective_readout = 0.0;
  bool degenerate = false;  // |a_bar| < c_rd * alpha_{L+1} prod_{m>l} alpha_m
};

/// eta c0 a_bar u + eta a_bar c1 C w for neuron `neuron` (0-based) of layer
/// `layer`, with u and C the label-weighted moments of z_{layer-1}.
PredictedUpdate lofi_predicted_update(const Mlp& mlp, const Matrix& x, const Vector& y,
                                      Index layer, Index neuron, double eta,
                                      double readout_threshold = 0.02);

struct FeatureOverlap {
  Matrix correlation;                 // kept columns of a x kept columns of b
  std::vector<Index> kept_a, kept_b;
  Index excluded = 0;                 // constant columns dropped from either side
};

/// Pearson correlations between every column of za and every column of zb.
FeatureOverlap feature_overlap_matrix(const Matrix& za, const Matrix& zb);

/// (||F_t||_F - ||F_0||_F) / ||F_0||_F
double normalized_overlap(const Matrix& f_t, const Matrix& f_0);

/// Antithetic Gaussian sample (x, -x) with an even target, so the first
/// moment vanishes and the covariance term drives the first GD step.
struct GdTask {
  Matrix x;
  Vector y;
};
GdTask make_even_task(Index n, Index d, Rng& rng);

struct GdScalingConfig {
  std::vector<Index> dims{20, 16, 12, 1};
  std::vector<double> alphas{1e-2, 5e-3, 2.5e-3};
  double ratio = 0.5;
  Index samples = 500;
  Index seeds = 5;
  Index layer = 1;
  double eta = 1.0;
  double readout_threshold = 0.02;
  double ratio_lo = 1.5;
  double ratio_hi = 3.0;
};

struct GdScalingReport {
  std::vector<double> alphas;
  std::vector<double> mean_errors;   // one per alpha
  std::vector<double> error_ratios;  // err(alpha_j) / err(alpha_{j+1})
  Index neurons = 0;                 // neurons averaged per alpha
  Index degenerate = 0;              // neurons skipped for a degenerate readout
  bool pass = false;
};

/// Relative error ||dW_gd - dW_pred|| / ||dW_pred|| of one step, averaged over
/// the neurons of `layer` and over seeds 0..seeds-1. The same directions and
/// data are reused across alphas so only the scale changes.
GdScalingReport gd_scaling_experiment(const GdScalingConfig& cfg, std::uint64_t seed);

}  // namespace lofi
