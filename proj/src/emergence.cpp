#include "lofi/emergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lofi/errors.hpp"

namespace lofi {

Vector psd_spectrum(const Matrix& sigma) {
  require_finite(sigma, "covariance");
  require_symmetric(sigma);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sigma + sigma.transpose()),
                                           Eigen::EigenvaluesOnly);
  Vector lam = es.eigenvalues().reverse();
  const double scale = std::max(lam.size() > 0 ? lam(0) : 0.0, 1.0);
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10 * scale) throw NotPSD("covariance has a negative eigenvalue");
    lam(i) = std::max(lam(i), 0.0);
  }
  return lam;
}

double effective_dimension(const Vector& spectrum, double r) {
  if (!(r > 0.0)) throw InvalidInput("effective_dimension needs r > 0");
  double d = 0.0;
  for (Index i = 0; i < spectrum.size(); ++i) d += spectrum(i) / (spectrum(i) + r);
  return d;
}

RStar r_star(const Vector& spectrum) {
  const double top = spectrum.size() > 0 ? spectrum.maxCoeff() : 0.0;
  if (!(top > 0.0)) throw ZeroSpectrum("r_star needs a spectrum with a positive eigenvalue");

  const auto f = [&](double log_r) {
    const double r = std::exp(log_r);
    return r * std::sqrt(effective_dimension(spectrum, r));
  };
  constexpr int kGrid = 200;
  const double lo = std::log(top) + std::log(1e-12);
  const double hi = std::log(top);
  std::vector<double> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) grid[i] = lo + (hi - lo) * (i + 1) / kGrid;
  grid.back() = hi;

  int best = 0;
  double best_val = f(grid[0]);
  for (int i = 1; i < kGrid; ++i) {
    const double v = f(grid[i]);
    if (v >= best_val) {
      best = i;
      best_val = v;
    }
  }

  RStar out{std::exp(grid[best]), best_val};
  if (best == kGrid - 1) out.r = top;

  // Golden-section refinement on the bracket around the best grid point.
  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, kGrid - 1)];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  const double xr = 0.5 * (a + b);
  const double fr = f(xr);
  if (fr > out.value) out = RStar{std::exp(xr), fr};
  return out;
}

Matrix residual_deflate(const Matrix& sigma, const Vector& v) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != v.size()) {
    throw InvalidInput("residual_deflate: dimension mismatch");
  }
  if (std::abs(v.norm() - 1.0) > 1e-8) throw InvalidInput("residual_deflate needs a unit vector");
  const Vector sv = sigma * v;
  const double vsv = v.dot(sv);
  // (I - vv^T) S (I - vv^T) = S - v (Sv)^T - (Sv) v^T + (v^T S v) v v^T
  Matrix out = sigma - v * sv.transpose() - sv * v.transpose() + vsv * v * v.transpose();
  return 0.5 * (out + out.transpose());
}

EmergenceReport predict_thresholds(const Matrix& c_hat, const Matrix& sigma_hat, Index k_max) {
  if (c_hat.rows() != sigma_hat.rows() || c_hat.cols() != sigma_hat.cols()) {
    throw InvalidInput("predict_thresholds: C and Sigma differ in shape");
  }
  if (k_max < 1 || k_max > c_hat.rows()) throw InvalidInput("k_max must lie in [1, dim]");

  const SymEig eig = sym_eig_topk(c_hat, k_max);
  EmergenceReport rep;
  rep.deflation = eig.vectors;
  Matrix residual = sigma_hat;
  for (Index k = 0; k < k_max; ++k) {
    if (k > 0) residual = residual_deflate(residual, eig.vectors.col(k - 1));
    const double rho = std::abs(eig.values(k));
    const Vector spec = psd_spectrum(residual);
    rep.rho.push_back(rho);
    if (spec.size() == 0 || !(spec(0) > 0.0)) {
      rep.r_star.push_back(0.0);
      rep.d_eff.push_back(0.0);
      rep.n_threshold.push_back(std::numeric_limits<double>::infinity());
      rep.unresolved.push_back(true);
      continue;
    }
    const RStar rs = r_star(spec);
    const double d = effective_dimension(spec, rs.r);
    rep.r_star.push_back(rs.r);
    rep.d_eff.push_back(d);
    if (rho > 0.0) {
      rep.n_threshold.push_back((rs.r / rho) * (rs.r / rho) * d);
      rep.unresolved.push_back(false);
    } else {
      rep.n_threshold.push_back(std::numeric_limits<double>::infinity());
      rep.unresolved.push_back(true);
    }
  }
  return rep;
}

double eigvec_overlap(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InvalidInput("eigvec_overlap: dimension mismatch");
  const double d = a.dot(b);
  return std::min(1.0, d * d);
}

SpikeModel make_spike_model(Index d, const Vector& correlations, Rng& rng) {
  const Index m = correlations.size();
  if (m < 1 || m > d) throw InvalidInput("spike model needs 1 <= spikes <= d");
  const Matrix g = gaussian_matrix(d, m, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  SpikeModel model;
  model.directions = qr.householderQ() * Matrix::Identity(d, m);
  model.correlations = correlations;
  return model;
}

Dataset sample_spike_model(const SpikeModel& model, Index n, Rng& rng) {
  if (n < 1) throw InvalidInput("spike model sample size must be positive");
  Dataset ds;
  ds.x = gaussian_matrix(n, model.directions.rows(), rng);
  const Matrix h = ds.x * model.directions;
  ds.y = ((h.array().square() - 1.0).matrix() * model.correlations) / std::sqrt(2.0);
  ds.name = "spikes";
  return center_labels(std::move(ds));
}

Matrix spike_population_operator(const SpikeModel& model) {
  // E[He_2(h) h^2] = 2, so each spike contributes 2 c_j / sqrt(2).
  return model.directions * (std::sqrt(2.0) * model.correlations).asDiagonal() *
         model.directions.transpose();
}

}  // namespace lofi
