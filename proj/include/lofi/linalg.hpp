#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string_view>
#include <vector>

#include "lofi/rng.hpp"

namespace lofi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Throws InvalidInput if any entry of `m` is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);

enum class EigMethod { dense, lanczos, automatic };

/// Eigenpairs ordered by decreasing |lambda|.
///
/// Ordering convention: magnitudes that agree to 1e-12 relative are treated as
/// tied; ties put the positive eigenvalue first, then the lower index in the
/// solver's ascending-eigenvalue order. Each eigenvector is flipped so that
/// its largest-magnitude entry (first such entry on near-ties) is positive.
struct SymEig {
  Vector values;
  Matrix vectors;  // one eigenvector per column
};

struct LanczosOptions {
  Index max_iterations = 0;  // 0 means the operator dimension
  double tolerance = 1e-10;  // residual relative to the largest Ritz value
};

/// y = A x for a symmetric operator of fixed dimension.
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

/// Dimension at or below which `automatic` always uses the dense solver.
inline constexpr Index kDenseEigenThreshold = 2048;

SymEig sym_eig_topk(const Matrix& a, Index k, EigMethod method = EigMethod::automatic,
                    const LanczosOptions& options = {});

/// Every eigenvalue, in the same order as sym_eig_topk, without vectors.
Vector sym_eigenvalues(const Matrix& a);

/// Lanczos with full reorthogonalization and start vector 1/sqrt(dim).
/// Throws ConvergenceError when the top-k residuals do not meet the tolerance
/// within the iteration budget.
SymEig lanczos_topk(const LinearOperator& op, Index dim, Index k,
                    const LanczosOptions& options = {});

/// Applies the ordering and sign conventions to a full set of eigenpairs and
/// keeps the first k.
SymEig order_eigenpairs(const Vector& values, const Matrix& vectors, Index k);

/// Solves (Z^T Z + lambda I) w = Z^T y. lambda is not scaled by n.
Vector ridge_solve(const Matrix& z, const Vector& y, double lambda);

struct RidgeCvResult {
  Vector weights;
  double lambda = 0.0;
  std::vector<double> cv_errors;  // one mean held-out MSE per grid entry
};

/// K-fold cross-validated ridge; the fold assignment is a seeded permutation.
/// Picks the lambda with lowest mean held-out squared error (ties go to the
/// larger lambda) and refits on all rows.
RidgeCvResult ridge_cv(const Matrix& z, const Vector& y, const std::vector<double>& lambda_grid,
                       Index folds, Rng& rng);

/// `count` log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, Index count);

/// Default readout grid: 500 points in [1e-6, 1e6].
std::vector<double> default_ridge_grid();

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng);

struct PsdRoots {
  Matrix sqrt;
  Matrix pinv_sqrt;
  Index rank = 0;
};

/// Square root and pseudo-inverse square root of a PSD matrix. Eigenvalues
/// below rank_tol * lambda_max are treated as zero; an eigenvalue below
/// -rank_tol * lambda_max raises NotPSD.
PsdRoots psd_sqrt_and_pinv_sqrt(const Matrix& a, double rank_tol = 1e-10);

/// Throws InvalidInput unless ||A - A^T||_F <= tol * ||A||_F.
void require_symmetric(const Matrix& a, double tol = 1e-9);

}  // namespace lofi
