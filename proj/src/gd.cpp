#include "lofi/gd.hpp"

#include <cmath>
#include <string>

#include "lofi/errors.hpp"
#include "lofi/lofi.hpp"

namespace lofi {
namespace {

Matrix apply_activation(Activation a, const Matrix& h) {
  return h.unaryExpr([a](double v) { return activate(a, v); });
}

Matrix apply_derivative(Activation a, const Matrix& h) {
  return h.unaryExpr([a](double v) { return activate_derivative(a, v); });
}

void check_layer(const Mlp& mlp, Index layer) {
  if (layer < 1 || layer > mlp.depth()) {
    throw InvalidInput("layer " + std::to_string(layer) + " outside 1.." +
                       std::to_string(mlp.depth()));
  }
}

void check_data(const Mlp& mlp, const Matrix& x, const Vector& y) {
  if (x.cols() != mlp.input_dim()) throw InvalidInput("input dimension does not match the network");
  if (x.rows() != y.size()) throw InvalidInput("row count differs from label count");
  if (x.rows() == 0) throw InvalidInput("empty dataset");
}

// Pre-activations h_1..h_L and representations z_0..z_L.
void forward_full(const Mlp& mlp, const Matrix& x, std::vector<Matrix>& pre,
                  std::vector<Matrix>& z) {
  z.assign(1, x);
  pre.clear();
  for (const Matrix& w : mlp.weights) {
    pre.push_back(z.back() * w.transpose());
    z.push_back(apply_activation(mlp.activation, pre.back()));
  }
}

}  // namespace

Mlp init_hierarchical(const std::vector<Index>& dims, double alpha, double ratio, Rng& rng,
                      Activation activation) {
  if (dims.size() < 3 || dims.back() != 1) {
    throw InvalidInput("dims must list the input, at least one hidden width, and a final 1");
  }
  for (Index d : dims) {
    if (d < 1) throw InvalidInput("every dimension must be positive");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidInput("ratio must lie in (0, 1)");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be positive");

  Mlp mlp;
  mlp.activation = activation;
  double scale = alpha;
  for (std::size_t l = 1; l + 1 < dims.size(); ++l) {
    Matrix w = gaussian_matrix(dims[l], dims[l - 1], rng);
    for (Index i = 0; i < w.rows(); ++i) w.row(i) *= scale / w.row(i).norm();
    mlp.weights.push_back(std::move(w));
    mlp.scales.push_back(scale);
    scale *= ratio;
  }
  Vector a = gaussian_matrix(dims[dims.size() - 2], 1, rng).col(0);
  mlp.readout = a * (scale / a.norm());
  mlp.scales.push_back(scale);
  return mlp;
}

std::vector<Matrix> forward_layers(const Mlp& mlp, const Matrix& x) {
  if (x.cols() != mlp.input_dim()) throw InvalidInput("input dimension does not match the network");
  std::vector<Matrix> pre, z;
  forward_full(mlp, x, pre, z);
  return z;
}

Vector mlp_predict(const Mlp& mlp, const Matrix& x) {
  return forward_layers(mlp, x).back() * mlp.readout;
}

double mlp_loss(const Mlp& mlp, const Matrix& x, const Vector& y) {
  check_data(mlp, x, y);
  return 0.5 * (y - mlp_predict(mlp, x)).squaredNorm() / static_cast<double>(y.size());
}

Matrix layer_gradient(const Mlp& mlp, const Matrix& x, const Vector& y, Index layer) {
  check_layer(mlp, layer);
  check_data(mlp, x, y);
  std::vector<Matrix> pre, z;
  forward_full(mlp, x, pre, z);
  const Vector residual = y - z.back() * mlp.readout;

  // back[mu, :] = d f(x_mu) / d z_m for the current m.
  Matrix back = Vector::Ones(x.rows()) * mlp.readout.transpose();
  for (Index m = mlp.depth(); m >= layer; --m) {
    Matrix delta = apply_derivative(mlp.activation, pre[m - 1]).cwiseProduct(back);
    if (m == layer) {
      delta.array().colwise() *= residual.array();
      return -(delta.transpose() * z[m - 1]) / static_cast<double>(x.rows());
    }
    back = delta * mlp.weights[m - 1];
  }
  return {};
}

Mlp layerwise_gd_step(const Mlp& mlp, const Matrix& x, const Vector& y, Index layer, double eta) {
  Mlp next = mlp;
  if (eta == 0.0) {
    check_layer(mlp, layer);
    return next;
  }
  next.weights[layer - 1] -= eta * layer_gradient(mlp, x, y, layer);
  return next;
}

Index layer_horizon(const Mlp& mlp, Index layer, double tau, double eta) {
  check_layer(mlp, layer);
  if (!(tau > 0.0) || !(eta > 0.0)) throw InvalidInput("tau and eta must be positive");
  return static_cast<Index>(std::floor(tau * mlp.scales[layer - 1] / eta));
}

Vector effective_readout(const Mlp& mlp, Index layer) {
  check_layer(mlp, layer);
  const double c0 = activate_derivative(mlp.activation, 0.0);
  Vector v = mlp.readout;
  for (Index m = mlp.depth(); m > layer; --m) v = c0 * (mlp.weights[m - 1].transpose() * v);
  return v;
}

PredictedUpdate lofi_predicted_update(const Mlp& mlp, const Matrix& x, const Vector& y,
                                      Index layer, Index neuron, double eta,
                                      double readout_threshold) {
  check_layer(mlp, layer);
  check_data(mlp, x, y);
  if (neuron < 0 || neuron >= mlp.weights[layer - 1].rows()) {
    throw InvalidInput("neuron index out of range");
  }
  if (activate(mlp.activation, 0.0) != 0.0) throw InvalidInput("activation must vanish at 0");

  const double c0 = activate_derivative(mlp.activation, 0.0);
  const double c1 = activate_second_derivative(mlp.activation, 0.0);
  const Matrix z = forward_layers(mlp, x)[layer - 1];
  const Vector w = mlp.weights[layer - 1].row(neuron).transpose();

  PredictedUpdate out;
  out.effective_readout = effective_readout(mlp, layer)(neuron);
  double floor = mlp.scales.back();
  for (Index m = layer + 1; m <= mlp.depth(); ++m) floor *= mlp.scales[m - 1];
  out.degenerate = std::abs(out.effective_readout) < readout_threshold * floor;

  const Vector u = linear_moment(z, y);
  // C w without forming C: (1/n) sum y_mu z_mu <z_mu, w>
  const Vector zw = z * w;
  const Vector cw = z.transpose() * y.cwiseProduct(zw) / static_cast<double>(z.rows());
  out.delta = eta * out.effective_readout * (c0 * u + c1 * cw);
  return out;
}

FeatureOverlap feature_overlap_matrix(const Matrix& za, const Matrix& zb) {
  if (za.rows() != zb.rows()) throw InvalidInput("feature matrices need the same row count");
  if (za.rows() < 2) throw InvalidInput("need at least two samples");

  auto standardize = [](const Matrix& z, std::vector<Index>& kept) {
    Matrix out(z.rows(), z.cols());
    Index k = 0;
    for (Index j = 0; j < z.cols(); ++j) {
      Vector c = z.col(j).array() - z.col(j).mean();
      const double norm = c.norm();
      if (norm <= 1e-12 * std::max(1.0, z.col(j).cwiseAbs().maxCoeff())) continue;
      out.col(k++) = c / norm;
      kept.push_back(j);
    }
    return Matrix(out.leftCols(k));
  };

  FeatureOverlap out;
  const Matrix a = standardize(za, out.kept_a);
  const Matrix b = standardize(zb, out.kept_b);
  out.excluded = (za.cols() - a.cols()) + (zb.cols() - b.cols());
  if (a.cols() == 0 || b.cols() == 0) throw DegenerateFeatures("every feature column is constant");
  out.correlation = a.transpose() * b;
  return out;
}

double normalized_overlap(const Matrix& f_t, const Matrix& f_0) {
  const double base = f_0.norm();
  if (base == 0.0) throw DegenerateFeatures("reference overlap matrix is zero");
  return (f_t.norm() - base) / base;
}

GdTask make_even_task(Index n, Index d, Rng& rng) {
  if (n < 2 || n % 2 != 0) throw InvalidInput("sample count must be even and positive");
  if (d < 2) throw InvalidInput("need at least two input dimensions");
  const Index half = n / 2;
  GdTask task;
  task.x.resize(n, d);
  task.x.topRows(half) = gaussian_matrix(half, d, rng);
  task.x.bottomRows(half) = -task.x.topRows(half);

  Matrix dirs = gaussian_matrix(d, 2, rng);
  dirs.col(0).normalize();
  dirs.col(1) -= dirs.col(0).dot(dirs.col(1)) * dirs.col(0);
  dirs.col(1).normalize();
  const Matrix proj = task.x * dirs;
  const Vector s = proj.col(0);
  const Vector t = proj.col(1);
  task.y = (s.array().square() - 1.0) / std::sqrt(2.0) + s.array() * t.array();
  task.y.array() -= task.y.mean();
  return task;
}

GdScalingReport gd_scaling_experiment(const GdScalingConfig& cfg, std::uint64_t seed) {
  if (cfg.alphas.size() < 2) throw InvalidInput("need at least two alphas");
  if (cfg.seeds < 1) throw InvalidInput("need at least one seed");
  GdScalingReport report;
  report.alphas = cfg.alphas;
  report.mean_errors.assign(cfg.alphas.size(), 0.0);

  const Rng root(seed);
  for (Index s = 0; s < cfg.seeds; ++s) {
    const Rng stream = root.fork(static_cast<std::uint64_t>(s));
    Rng data_rng = stream.fork(0);
    const GdTask task = make_even_task(cfg.samples, cfg.dims.front(), data_rng);

    for (std::size_t j = 0; j < cfg.alphas.size(); ++j) {
      Rng net_rng = stream.fork(1);
      const Mlp mlp = init_hierarchical(cfg.dims, cfg.alphas[j], cfg.ratio, net_rng);
      const Matrix step =
          layerwise_gd_step(mlp, task.x, task.y, cfg.layer, cfg.eta).weights[cfg.layer - 1] -
          mlp.weights[cfg.layer - 1];
      for (Index i = 0; i < step.rows(); ++i) {
        const PredictedUpdate pred = lofi_predicted_update(mlp, task.x, task.y, cfg.layer, i,
                                                           cfg.eta, cfg.readout_threshold);
        if (pred.degenerate) {
          if (j == 0) ++report.degenerate;
          continue;
        }
        const double err = (step.row(i).transpose() - pred.delta).norm() / pred.delta.norm();
        report.mean_errors[j] += err;
        if (j == 0) ++report.neurons;
      }
    }
  }
  if (report.neurons == 0) throw DegenerateFeatures("every effective readout is degenerate");
  for (double& e : report.mean_errors) e /= static_cast<double>(report.neurons);

  report.pass = true;
  for (std::size_t j = 0; j + 1 < report.mean_errors.size(); ++j) {
    const double r = report.mean_errors[j] / report.mean_errors[j + 1];
    report.error_ratios.push_back(r);
    report.pass = report.pass && r >= cfg.ratio_lo && r <= cfg.ratio_hi;
  }
  return report;
}

}  // namespace lofi
