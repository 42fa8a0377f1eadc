#pragma once

#include <vector>

#include "lofi/dataset.hpp"
#include "lofi/linalg.hpp"

namespace lofi {

/// Nonnegative eigenvalues in descending order; tiny negative values from
/// rounding (above -1e-10 relative) are clipped to zero.
Vector psd_spectrum(const Matrix& sigma);

/// D(r) = sum_j lambda_j / (lambda_j + r).
double effective_dimension(const Vector& spectrum, double r);

struct RStar {
  double r = 0.0;
  double value = 0.0;  // r sqrt(D(r))
};

/// argmax of r sqrt(D(r)) over (1e-12 lambda_1, lambda_1]: 200-point log grid
/// followed by golden-section refinement around the best grid point; ties go
/// to the larger r.
RStar r_star(const Vector& spectrum);

/// (I - v v^T) Sigma (I - v v^T) for a unit vector v.
Matrix residual_deflate(const Matrix& sigma, const Vector& v);

struct EmergenceReport {
  std::vector<double> rho;          // |lambda_k(C)|
  std::vector<double> r_star;
  std::vector<double> d_eff;        // D(r*) of the deflated covariance
  std::vector<double> n_threshold;  // (r* / rho)^2 D(r*), +inf when rho = 0
  std::vector<bool> unresolved;     // rho = 0 or the residual spectrum vanished
  Matrix deflation;                 // eigenvectors of C used for deflation, one per column

  std::size_t size() const { return rho.size(); }
};

/// Sample-size thresholds for the first k_max eigendirections of the signed
/// operator C, using the spectrum of Sigma deflated by the preceding ones.
EmergenceReport predict_thresholds(const Matrix& c_hat, const Matrix& sigma_hat, Index k_max);

/// |<a, b>|^2 for unit vectors.
double eigvec_overlap(const Vector& a, const Vector& b);

/// y = sum_j c_j He_2(<v_j, x>) / sqrt(2) with orthonormal v_j and Gaussian x.
struct SpikeModel {
  Matrix directions;  // d x m, orthonormal columns
  Vector correlations;
};

SpikeModel make_spike_model(Index d, const Vector& correlations, Rng& rng);
Dataset sample_spike_model(const SpikeModel& model, Index n, Rng& rng);

/// Population operators of the spike model: C = sqrt(2) sum_j c_j v_j v_j^T, Sigma = I.
Matrix spike_population_operator(const SpikeModel& model);

}  // namespace lofi
