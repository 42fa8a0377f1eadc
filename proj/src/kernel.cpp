#include "lofi/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lofi/errors.hpp"
#include "lofi/lofi.hpp"

namespace lofi {

namespace {

double arccos_from_parts(double na, double nb, double dot) {
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double cos_t = std::clamp(dot / (na * nb), -1.0, 1.0);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double theta = std::acos(cos_t);
  return na * nb * (sin_t + (std::numbers::pi - theta) * cos_t) / (2.0 * std::numbers::pi);
}

double rms_row_norm(const Matrix& g) {
  if (g.rows() == 0 || g.cols() == 0) return 1.0;
  const double rms = std::sqrt(g.squaredNorm() / static_cast<double>(g.rows()));
  return rms > 0.0 ? rms : 1.0;
}

}  // namespace

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "relu_arccos" || name == "arccos") return KernelKind::relu_arccos;
  if (name == "monte_carlo" || name == "mc") return KernelKind::monte_carlo;
  throw InvalidInput("unknown kernel '" + std::string(name) + "'");
}

std::string to_string(KernelKind k) {
  return k == KernelKind::relu_arccos ? "relu_arccos" : "monte_carlo";
}

double relu_arccos_kernel(const Vector& g, const Vector& gp) {
  if (g.size() != gp.size()) throw InvalidInput("kernel arguments differ in dimension");
  return arccos_from_parts(g.norm(), gp.norm(), g.dot(gp));
}

double monte_carlo_kernel(Activation a, const Vector& g, const Vector& gp, Index samples,
                          Rng& rng) {
  if (g.size() != gp.size()) throw InvalidInput("kernel arguments differ in dimension");
  if (samples < 1) throw InvalidInput("monte_carlo_kernel needs at least one sample");
  double sum = 0.0;
  for (Index s = 0; s < samples; ++s) {
    double u = 0.0, v = 0.0;
    for (Index i = 0; i < g.size(); ++i) {
      const double r = rng.normal();
      u += r * g(i);
      v += r * gp(i);
    }
    sum += activate(a, u) * activate(a, v);
  }
  return sum / static_cast<double>(samples);
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidInput("kernel arguments differ in dimension");
  if (spec.kind == KernelKind::relu_arccos) {
    const Vector na = a.rowwise().norm();
    const Vector nb = b.rowwise().norm();
    const Matrix dots = a * b.transpose();
    Matrix k(a.rows(), b.rows());
    for (Index j = 0; j < b.rows(); ++j) {
      for (Index i = 0; i < a.rows(); ++i) k(i, j) = arccos_from_parts(na(i), nb(j), dots(i, j));
    }
    return k;
  }
  if (spec.samples < 1) throw InvalidInput("monte-carlo kernel needs at least one sample");
  if (a.cols() == 0) return Matrix::Zero(a.rows(), b.rows());
  Rng rng(spec.seed);
  const Matrix r = gaussian_matrix(spec.samples, a.cols(), rng);
  const auto act = [&](const Matrix& m) {
    Matrix f = m * r.transpose();
    return Matrix(f.unaryExpr([&](double v) { return activate(spec.activation, v); }));
  };
  return act(a) * act(b).transpose() / static_cast<double>(spec.samples);
}

KernelLayer kernel_lofi_layer(const Matrix& gram, const Vector& y, Index k, double rank_tol) {
  const Index n = gram.rows();
  if (gram.cols() != n) throw InvalidInput("Gram matrix must be square");
  if (y.size() != n) throw InvalidInput("Gram matrix and labels differ in size");
  if (k < 1 || k > n) throw InvalidInput("kernel layer rank must lie in [1, n]");
  require_finite(gram, "Gram matrix");

  const PsdRoots roots = psd_sqrt_and_pinv_sqrt(gram, rank_tol);
  Matrix b = roots.sqrt * y.asDiagonal() * roots.sqrt / static_cast<double>(n);
  b = 0.5 * (b + b.transpose());

  KernelLayer layer;
  SymEig eig;
  if (b.isZero(0.0)) {
    eig.values = Vector::Zero(k);
    eig.vectors = Matrix::Zero(n, k);
  } else {
    eig = sym_eig_topk(b, k);
  }
  const double top = std::abs(eig.values(0));
  Index kept = 0;
  while (kept < k && top > 0.0 && std::abs(eig.values(kept)) > 1e-12 * top) ++kept;
  layer.rank_deficient = kept < k;
  layer.eigenvalues = eig.values.head(kept);
  layer.beta = eig.vectors.leftCols(kept);
  layer.alpha = roots.pinv_sqrt * layer.beta;
  layer.features = gram * layer.alpha;
  return layer;
}

Matrix kernel_feature_eval(const KernelLayer& layer, const Matrix& sections) {
  if (sections.rows() != layer.alpha.rows()) {
    throw InvalidInput("expected " + std::to_string(layer.alpha.rows()) + " kernel sections, got " +
                       std::to_string(sections.rows()));
  }
  return sections.transpose() * layer.alpha;
}

std::vector<double> default_kernel_ridge_grid() { return log_grid(1e-5, 1.0, 20); }

KernelRidgeCvResult kernel_ridge_cv(const Matrix& gram, const Vector& y,
                                    const std::vector<double>& lambda_grid, Index folds, Rng& rng) {
  const Index n = gram.rows();
  if (gram.cols() != n || y.size() != n) throw InvalidInput("kernel ridge: shape mismatch");
  if (lambda_grid.empty()) throw InvalidInput("kernel ridge: empty lambda grid");
  if (folds < 2) throw InvalidInput("kernel ridge: need at least 2 folds");
  if (n < folds) throw InvalidInput("kernel ridge: fewer rows than folds");
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidInput("kernel ridge: lambda must be > 0");
  }

  const auto solve = [&](double lambda) {
    Matrix a = gram;
    a.diagonal().array() += lambda;
    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw SingularSystem("kernel ridge system is singular");
    return Vector(ldlt.solve(y));
  };

  KernelRidgeCvResult result;
  if (lambda_grid.size() == 1) {
    result.lambda = lambda_grid.front();
    result.coefficients = solve(result.lambda);
    result.cv_errors.assign(1, std::numeric_limits<double>::quiet_NaN());
    return result;
  }

  const auto perm = rng.permutation(static_cast<std::size_t>(n));
  std::vector<double> sq_err(lambda_grid.size(), 0.0);
  for (Index f = 0; f < folds; ++f) {
    const Index lo = f * n / folds;
    const Index hi = (f + 1) * n / folds;
    std::vector<Index> tr, va;
    for (Index i = 0; i < n; ++i) {
      const auto r = static_cast<Index>(perm[static_cast<std::size_t>(i)]);
      (i >= lo && i < hi ? va : tr).push_back(r);
    }
    const Matrix k_tr = gram(tr, tr);
    const Matrix k_va = gram(va, tr);
    const Vector y_tr = y(tr);
    const Vector y_va = y(va);
    Eigen::SelfAdjointEigenSolver<Matrix> es(k_tr);
    const Vector proj = es.eigenvectors().transpose() * y_tr;
    const Matrix k_va_q = k_va * es.eigenvectors();
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
      const Vector scaled = proj.array() / (es.eigenvalues().array() + lambda_grid[g]);
      sq_err[g] += (k_va_q * scaled - y_va).squaredNorm();
    }
  }
  result.cv_errors.resize(lambda_grid.size());
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    result.cv_errors[g] = sq_err[g] / static_cast<double>(n);
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < lambda_grid.size(); ++g) {
    const double e = result.cv_errors[g];
    const double b = result.cv_errors[best];
    const bool tied = std::abs(e - b) <= 1e-12 * std::max(std::abs(b), 1e-300);
    if ((e < b && !tied) || (tied && lambda_grid[g] > lambda_grid[best])) best = g;
  }
  result.lambda = lambda_grid[best];
  result.coefficients = solve(result.lambda);
  return result;
}

KernelModel fit_kernel_model(const Dataset& train, const KernelModelConfig& config, Rng& rng) {
  validate(train);
  if (!train.centered) throw InvalidInput("fit_kernel_model requires centered labels");

  KernelModel model;
  model.anchors = train.x;
  model.kernel = config.kernel;
  model.normalize_features = config.normalize_features;

  Matrix gram = train.x * train.x.transpose();
  for (Index k : config.ranks) {
    KernelLayer layer = kernel_lofi_layer(gram, train.y, k);
    layer.rms_norm = config.normalize_features ? rms_row_norm(layer.features) : 1.0;
    const Matrix g = layer.features / layer.rms_norm;
    gram = kernel_matrix(config.kernel, g, g);
    model.layers.push_back(std::move(layer));
  }

  Rng readout_rng = rng.fork(kReadoutStream);
  KernelRidgeCvResult cv =
      kernel_ridge_cv(gram, train.y, config.lambda_grid, config.folds, readout_rng);
  model.coefficients = std::move(cv.coefficients);
  model.lambda = cv.lambda;
  return model;
}

namespace {

/// Walks the kernel recursion for new points; stops after `depth` layers and
/// returns that layer's features (depth >= 1) or the final sections.
struct Walk {
  Matrix features;
  Matrix sections;
};

Walk walk(const KernelModel& model, const Matrix& x, Index depth) {
  if (x.cols() != model.input_dim()) {
    throw InvalidInput("kernel model expects input dimension " +
                       std::to_string(model.input_dim()) + ", got " + std::to_string(x.cols()));
  }
  Walk w;
  w.sections = model.anchors * x.transpose();
  for (Index l = 0; l < depth; ++l) {
    const KernelLayer& layer = model.layers[static_cast<std::size_t>(l)];
    w.features = kernel_feature_eval(layer, w.sections);
    w.sections = kernel_matrix(model.kernel, layer.features / layer.rms_norm,
                               w.features / layer.rms_norm);
  }
  return w;
}

}  // namespace

Matrix kernel_features(const KernelModel& model, const Matrix& x, Index depth) {
  if (depth < 1 || depth > static_cast<Index>(model.layers.size())) {
    throw InvalidInput("kernel feature depth out of range");
  }
  return walk(model, x, depth).features;
}

Matrix kernel_sections(const KernelModel& model, const Matrix& x) {
  return walk(model, x, static_cast<Index>(model.layers.size())).sections;
}

Vector predict(const KernelModel& model, const Matrix& x) {
  const Matrix s = kernel_sections(model, x);
  if (s.rows() != model.coefficients.size()) throw InvalidInput("readout dimension mismatch");
  return (s.transpose() * model.coefficients).array() + model.label_offset;
}

}  // namespace lofi
