#pragma once

#include <cstdint>
#include <vector>

#include "lofi/activation.hpp"
#include "lofi/dataset.hpp"
#include "lofi/linalg.hpp"

namespace lofi {

enum class KernelKind { relu_arccos, monte_carlo };

struct KernelSpec {
  KernelKind kind = KernelKind::relu_arccos;
  // Monte-Carlo kernels only: lift activation, number of Gaussian directions
  // and the seed that fixes them (the same directions serve every entry, so
  // Grams stay PSD and test sections agree with training ones).
  Activation activation = Activation::relu;
  Index samples = 4096;
  std::uint64_t seed = 0;
};

KernelKind parse_kernel_kind(std::string_view name);
std::string to_string(KernelKind k);

/// E[relu(r.g) relu(r.g')] = |g||g'| (sin t + (pi - t) cos t) / (2 pi).
double relu_arccos_kernel(const Vector& g, const Vector& gp);

/// Empirical mean of sigma(r.g) sigma(r.g') over `samples` Gaussian r.
double monte_carlo_kernel(Activation a, const Vector& g, const Vector& gp, Index samples,
                          Rng& rng);

/// Kernel matrix between the rows of `a` and the rows of `b`.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b);

/// One LoFi layer in dual form: alpha_j = G^{+/2} beta_j where beta_j are the
/// top-|lambda| eigenvectors of B = (1/n) G^{1/2} diag(y) G^{1/2}.
struct KernelLayer {
  Matrix alpha;          // n x k dual coefficients
  Matrix beta;           // n x k, orthonormal
  Vector eigenvalues;
  Matrix features;       // n x k projected training features G alpha
  double rms_norm = 1.0; // features are divided by this before the next kernel
  bool rank_deficient = false;

  Index directions() const { return alpha.cols(); }
};

KernelLayer kernel_lofi_layer(const Matrix& gram, const Vector& y, Index k,
                              double rank_tol = 1e-10);

/// g_j(x) = <alpha_j, k(x)> for a column of kernel sections per point
/// (`sections` is n x m for m points; returns m x k).
Matrix kernel_feature_eval(const KernelLayer& layer, const Matrix& sections);

struct KernelRidgeCvResult {
  Vector coefficients;
  double lambda = 0.0;
  std::vector<double> cv_errors;
};

/// Kernel ridge coef = (K + lambda I)^{-1} y with the fold convention of
/// ridge_cv, so a Gram K = Z Z^T selects the same lambda as ridge_cv on Z.
KernelRidgeCvResult kernel_ridge_cv(const Matrix& gram, const Vector& y,
                                    const std::vector<double>& lambda_grid, Index folds, Rng& rng);

/// Default kernel-ridge grid: 20 points in [1e-5, 1].
std::vector<double> default_kernel_ridge_grid();

struct KernelModelConfig {
  std::vector<Index> ranks;  // one entry per layer
  KernelSpec kernel;
  bool normalize_features = false;  // divide projected features by their RMS row norm
  std::vector<double> lambda_grid = default_kernel_ridge_grid();
  Index folds = 5;
};

struct KernelModel {
  Matrix anchors;  // training inputs
  std::vector<KernelLayer> layers;
  KernelSpec kernel;
  bool normalize_features = false;
  Vector coefficients;  // dual readout
  double lambda = 0.0;
  double label_offset = 0.0;  // added to every prediction

  Index input_dim() const { return anchors.cols(); }
};

KernelModel fit_kernel_model(const Dataset& train, const KernelModelConfig& config, Rng& rng);

/// Projected features of `depth` (1-based) layers at new points, m x k.
Matrix kernel_features(const KernelModel& model, const Matrix& x, Index depth);
/// Sections of the final kernel at new points, n x m.
Matrix kernel_sections(const KernelModel& model, const Matrix& x);
Vector predict(const KernelModel& model, const Matrix& x);

}  // namespace lofi
