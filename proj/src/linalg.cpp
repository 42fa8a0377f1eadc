#include "lofi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lofi/errors.hpp"

namespace lofi {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + " contains non-finite entries");
}

void require_finite(const Vector& v, std::string_view what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + " contains non-finite entries");
}

void require_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) throw InvalidInput("matrix is not square");
  const double asym = (a - a.transpose()).norm();
  if (asym > tol * a.norm()) {
    throw InvalidInput("matrix is not symmetric (||A - A^T||_F = " + std::to_string(asym) + ")");
  }
}

SymEig order_eigenpairs(const Vector& values, const Matrix& vectors, Index k) {
  const Index m = values.size();
  k = std::min(k, m);
  const double scale = m > 0 ? values.cwiseAbs().maxCoeff() : 0.0;
  const double tie = 1e-12 * scale;

  std::vector<bool> taken(static_cast<std::size_t>(m), false);
  SymEig out;
  out.values.resize(k);
  out.vectors.resize(vectors.rows(), k);
  for (Index slot = 0; slot < k; ++slot) {
    double best_mag = -1.0;
    for (Index i = 0; i < m; ++i) {
      if (!taken[i]) best_mag = std::max(best_mag, std::abs(values(i)));
    }
    // Among candidates tied with the best magnitude: positive first, then index.
    Index pick = -1;
    for (Index i = 0; i < m; ++i) {
      if (taken[i] || std::abs(values(i)) < best_mag - tie) continue;
      if (pick < 0 || (values(i) > 0.0 && values(pick) <= 0.0)) pick = i;
    }
    taken[pick] = true;
    out.values(slot) = values(pick);
    if (vectors.rows() == 0) continue;

    Vector v = vectors.col(pick);
    v /= v.norm();
    const double vmax = v.cwiseAbs().maxCoeff();
    for (Index r = 0; r < v.size(); ++r) {
      if (std::abs(v(r)) >= vmax * (1.0 - 1e-12)) {
        if (v(r) < 0.0) v = -v;
        break;
      }
    }
    out.vectors.col(slot) = v;
  }
  return out;
}

namespace {

SymEig dense_topk(const Matrix& a, Index k) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("dense symmetric eigensolver failed", {});
  }
  return order_eigenpairs(solver.eigenvalues(), solver.eigenvectors(), k);
}

}  // namespace

Vector sym_eigenvalues(const Matrix& a) {
  require_finite(a, "eigen input");
  require_symmetric(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("dense symmetric eigensolver failed", {});
  }
  const Index n = a.rows();
  // Ordering only needs the values; a zero-column placeholder skips the vectors.
  return order_eigenpairs(solver.eigenvalues(), Matrix(0, n), n).values;
}

SymEig lanczos_topk(const LinearOperator& op, Index dim, Index k, const LanczosOptions& options) {
  if (dim < 1 || k < 1 || k > dim) throw InvalidInput("lanczos: need 1 <= k <= dim");
  const Index max_steps =
      options.max_iterations > 0 ? std::min(options.max_iterations, dim) : dim;

  std::vector<Vector> basis;
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples basis[j] and basis[j + 1]
  basis.reserve(static_cast<std::size_t>(std::min<Index>(max_steps, 512)));

  Vector q = Vector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  Vector w(dim);
  std::uint64_t restarts = 0;
  double op_scale = 0.0;

  auto orthogonalize = [&](Vector& v) {
    // Classical Gram-Schmidt applied twice keeps the basis orthogonal to
    // working precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& b : basis) v -= b.dot(v) * b;
    }
  };

  std::vector<double> last_residuals;
  for (Index j = 0; j < max_steps; ++j) {
    basis.push_back(q);
    op(q, w);
    const double a_j = q.dot(w);
    alpha.push_back(a_j);
    w -= a_j * q;
    if (j > 0) w -= beta.back() * basis[j - 1];
    orthogonalize(w);
    double b_j = w.norm();
    op_scale = std::max(op_scale, std::abs(a_j) + b_j);

    const Index steps = j + 1;
    const bool breakdown = b_j <= 1e-13 * std::max(op_scale, 1e-300);
    const bool last = steps == max_steps;
    // Check every 5 steps at first, then every ~5% of the Krylov dimension so
    // the tridiagonal solves stay cheap relative to the operator applications.
    const Index interval = std::max<Index>(5, steps / 20);
    const bool check = last || (steps >= k && !breakdown && (steps - k) % interval == 0);

    if (check) {
      Vector diag = Eigen::Map<const Vector>(alpha.data(), steps);
      Vector sub(std::max<Index>(steps - 1, 0));
      for (Index i = 0; i + 1 < steps; ++i) sub(i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Matrix> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      const Vector& theta = tri.eigenvalues();
      const Matrix& s = tri.eigenvectors();

      // Rank Ritz values with the public ordering rule, tracking their columns.
      const SymEig ranked = order_eigenpairs(theta, Matrix::Identity(steps, steps), k);
      const double scale = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);
      const double b_res = (breakdown || steps == dim) ? 0.0 : b_j;
      last_residuals.clear();
      bool converged = steps >= k;
      Matrix ritz_coeffs(steps, std::min(k, steps));
      for (Index c = 0; c < ritz_coeffs.cols(); ++c) {
        Index col = 0;
        ranked.vectors.col(c).cwiseAbs().maxCoeff(&col);
        ritz_coeffs.col(c) = s.col(col);
        const double res = std::abs(b_res * s(steps - 1, col));
        last_residuals.push_back(res);
        if (res > options.tolerance * scale) converged = false;
      }
      if (converged) {
        Matrix q_mat(dim, steps);
        for (Index i = 0; i < steps; ++i) q_mat.col(i) = basis[static_cast<std::size_t>(i)];
        const Matrix ritz = q_mat * ritz_coeffs;
        return order_eigenpairs(ranked.values, ritz, k);
      }
      if (last) break;
    }

    if (breakdown) {
      // Invariant subspace: continue from a fresh deterministic direction.
      Rng restart(0x5eedf00dULL + restarts++);
      for (Index i = 0; i < dim; ++i) q(i) = restart.normal();
      orthogonalize(q);
      const double nq = q.norm();
      if (nq <= 1e-10) break;
      q /= nq;
      beta.push_back(0.0);
    } else {
      q = w / b_j;
      beta.push_back(b_j);
    }
  }
  throw ConvergenceError("lanczos did not converge within " + std::to_string(max_steps) +
                             " iterations",
                         last_residuals);
}

SymEig sym_eig_topk(const Matrix& a, Index k, EigMethod method, const LanczosOptions& options) {
  require_finite(a, "eigen input");
  require_symmetric(a);
  const Index n = a.rows();
  if (k < 1 || k > n) throw InvalidInput("sym_eig_topk: need 1 <= k <= dim");

  if (method == EigMethod::automatic) {
    method = (n <= kDenseEigenThreshold || 4 * k >= n) ? EigMethod::dense : EigMethod::lanczos;
  }
  if (method == EigMethod::dense) return dense_topk(a, k);

  const Matrix sym = 0.5 * (a + a.transpose());
  return lanczos_topk([&sym](const Vector& x, Vector& y) { y.noalias() = sym * x; }, n, k,
                      options);
}

Vector ridge_solve(const Matrix& z, const Vector& y, double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) throw InvalidInput("ridge lambda must be >= 0");
  if (z.rows() != y.size()) throw InvalidInput("ridge: row count of Z differs from length of y");
  const Index n = z.rows();
  const Index p = z.cols();

  if (p <= n) {
    Matrix gram = z.transpose() * z;
    gram.diagonal().array() += lambda;
    const Vector rhs = z.transpose() * y;
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector d = ldlt.vectorD().cwiseAbs();
    const bool degenerate = d.maxCoeff() == 0.0 || d.minCoeff() < 1e-13 * d.maxCoeff() ||
                            ldlt.rcond() < 1e-13;
    if (ldlt.info() != Eigen::Success || (lambda == 0.0 && degenerate)) {
      throw SingularSystem("ridge system is singular at lambda = " + std::to_string(lambda));
    }
    return ldlt.solve(rhs);
  }
  // Dual form: w = Z^T (Z Z^T + lambda I)^{-1} y; Z^T Z is rank-deficient at lambda = 0.
  if (lambda == 0.0) {
    throw SingularSystem("ridge with lambda = 0 and more columns than rows is singular");
  }
  Matrix gram = z * z.transpose();
  gram.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw SingularSystem("ridge dual system is singular");
  return z.transpose() * ldlt.solve(y);
}

std::vector<double> log_grid(double lo, double hi, Index count) {
  if (count < 1 || lo <= 0.0 || hi < lo) throw InvalidInput("log_grid: bad range");
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (Index i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] =
        std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> default_ridge_grid() { return log_grid(1e-6, 1e6, 500); }

namespace {

/// Held-out predictions of one fold for every lambda, through a single
/// eigendecomposition of the smaller Gram matrix.
void accumulate_fold_errors(const Matrix& z_tr, const Vector& y_tr, const Matrix& z_val,
                            const Vector& y_val, const std::vector<double>& grid,
                            std::vector<double>& sq_err) {
  Matrix proj;    // maps spectral coefficients to validation predictions
  Vector coeff;   // spectral coefficients of the right-hand side
  Vector spectrum;
  if (z_tr.cols() <= z_tr.rows()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(z_tr.transpose() * z_tr);
    spectrum = es.eigenvalues().cwiseMax(0.0);
    coeff = es.eigenvectors().transpose() * (z_tr.transpose() * y_tr);
    proj = z_val * es.eigenvectors();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(z_tr * z_tr.transpose());
    spectrum = es.eigenvalues().cwiseMax(0.0);
    coeff = es.eigenvectors().transpose() * y_tr;
    proj = (z_val * z_tr.transpose()) * es.eigenvectors();
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Vector scaled = coeff.array() / (spectrum.array() + grid[g]);
    sq_err[g] += (proj * scaled - y_val).squaredNorm();
  }
}

}  // namespace

RidgeCvResult ridge_cv(const Matrix& z, const Vector& y, const std::vector<double>& lambda_grid,
                       Index folds, Rng& rng) {
  if (lambda_grid.empty()) throw InvalidInput("ridge_cv: empty lambda grid");
  if (folds < 2) throw InvalidInput("ridge_cv: need at least 2 folds");
  if (z.rows() != y.size()) throw InvalidInput("ridge_cv: row count of Z differs from length of y");
  const Index n = z.rows();
  if (n < folds) throw InvalidInput("ridge_cv: fewer rows than folds");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidInput("ridge_cv: lambda must be >= 0");
  }

  RidgeCvResult result;
  if (lambda_grid.size() == 1) {
    result.lambda = lambda_grid.front();
    result.weights = ridge_solve(z, y, result.lambda);
    result.cv_errors.assign(1, std::numeric_limits<double>::quiet_NaN());
    return result;
  }

  const auto perm = rng.permutation(static_cast<std::size_t>(n));
  std::vector<double> sq_err(lambda_grid.size(), 0.0);
  for (Index f = 0; f < folds; ++f) {
    const Index lo = f * n / folds;
    const Index hi = (f + 1) * n / folds;
    const Index n_val = hi - lo;
    Matrix z_tr(n - n_val, z.cols()), z_val(n_val, z.cols());
    Vector y_tr(n - n_val), y_val(n_val);
    Index it = 0, iv = 0;
    for (Index i = 0; i < n; ++i) {
      const Index r = static_cast<Index>(perm[static_cast<std::size_t>(i)]);
      if (i >= lo && i < hi) {
        z_val.row(iv) = z.row(r);
        y_val(iv++) = y(r);
      } else {
        z_tr.row(it) = z.row(r);
        y_tr(it++) = y(r);
      }
    }
    accumulate_fold_errors(z_tr, y_tr, z_val, y_val, lambda_grid, sq_err);
  }

  result.cv_errors.resize(lambda_grid.size());
  std::size_t best = 0;
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    result.cv_errors[g] = sq_err[g] / static_cast<double>(n);
  }
  for (std::size_t g = 1; g < lambda_grid.size(); ++g) {
    const double e = result.cv_errors[g];
    const double b = result.cv_errors[best];
    const bool tied = std::abs(e - b) <= 1e-12 * std::max(std::abs(b), 1e-300);
    if (e < b && !tied) {
      best = g;
    } else if (tied && lambda_grid[g] > lambda_grid[best]) {
      best = g;
    }
  }
  result.lambda = lambda_grid[best];
  result.weights = ridge_solve(z, y, result.lambda);
  return result;
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw InvalidInput("gaussian_matrix: dimensions must be positive");
  Matrix m(rows, cols);
  // Fill row-major so the stream order matches the on-disk layout.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

PsdRoots psd_sqrt_and_pinv_sqrt(const Matrix& a, double rank_tol) {
  require_finite(a, "psd input");
  require_symmetric(a);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  const Vector& lam = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  const Index n = a.rows();

  PsdRoots out;
  out.sqrt = Matrix::Zero(n, n);
  out.pinv_sqrt = Matrix::Zero(n, n);
  if (n == 0) return out;
  const double scale = std::max(lam.maxCoeff(), 0.0);
  const double lam_min = lam.minCoeff();
  if ((scale == 0.0 && lam_min < 0.0) || lam_min < -rank_tol * scale) {
    throw NotPSD("matrix has eigenvalue " + std::to_string(lam_min) + " below tolerance");
  }
  if (scale == 0.0) return out;

  Vector s = Vector::Zero(n), si = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (lam(i) > rank_tol * scale) {
      s(i) = std::sqrt(lam(i));
      si(i) = 1.0 / s(i);
      ++out.rank;
    }
  }
  out.sqrt = v * s.asDiagonal() * v.transpose();
  out.pinv_sqrt = v * si.asDiagonal() * v.transpose();
  return out;
}

}  // namespace lofi
