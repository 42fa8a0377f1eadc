#include "lofi/importance.hpp"

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "lofi/errors.hpp"

namespace lofi {
namespace {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

void require_dense_prefix(const LofiModel& model, Index layers) {
  for (Index l = 0; l < layers; ++l) {
    if (model.layers[l].kind != LayerKind::dense) {
      throw InvalidInput("importance maps need dense layers");
    }
  }
}

// 2-D transform of a row-major grid, one axis at a time.
ComplexMatrix fft2(const ComplexMatrix& in, bool inverse) {
  Eigen::FFT<double> fft;
  ComplexMatrix out = in;
  std::vector<Complex> src, dst;
  // Length-1 axes are left alone: their transform is the identity.
  for (Index r = 0; r < out.rows() && out.cols() > 1; ++r) {
    src.resize(static_cast<std::size_t>(out.cols()));
    for (Index c = 0; c < out.cols(); ++c) src[static_cast<std::size_t>(c)] = out(r, c);
    inverse ? fft.inv(dst, src) : fft.fwd(dst, src);
    for (Index c = 0; c < out.cols(); ++c) out(r, c) = dst[static_cast<std::size_t>(c)];
  }
  for (Index c = 0; c < out.cols() && out.rows() > 1; ++c) {
    src.resize(static_cast<std::size_t>(out.rows()));
    for (Index r = 0; r < out.rows(); ++r) src[static_cast<std::size_t>(r)] = out(r, c);
    inverse ? fft.inv(dst, src) : fft.fwd(dst, src);
    for (Index r = 0; r < out.rows(); ++r) out(r, c) = dst[static_cast<std::size_t>(r)];
  }
  return out;
}

// numpy.fft.fftfreq convention.
double frequency(Index k, Index n) {
  const Index signed_k = k <= (n - 1) / 2 ? k : k - n;
  return static_cast<double>(signed_k) / static_cast<double>(n);
}

}  // namespace

Matrix representation_vjp(const LofiModel& model, const Matrix& x, Index layer, const Vector& v) {
  const Index depth = static_cast<Index>(model.layers.size());
  if (layer < 0 || layer > depth) throw InvalidInput("layer " + std::to_string(layer) + " out of range");
  if (x.cols() != model.input_dim) throw InvalidInput("input dimension does not match the model");
  require_dense_prefix(model, layer);

  std::vector<Matrix> pre;
  Matrix z = x;
  for (Index m = 0; m < layer; ++m) {
    const FittedLayer& fl = model.layers[m];
    pre.push_back((z * fl.projection) * fl.lift.transpose() / fl.rms_norm);
    z = pre.back().unaryExpr([&](double t) { return activate(fl.activation, t); }) /
        std::sqrt(static_cast<double>(fl.width()));
  }
  if (v.size() != z.cols()) throw InvalidInput("direction length does not match the representation");

  Matrix back = Vector::Ones(x.rows()) * v.transpose();
  for (Index m = layer - 1; m >= 0; --m) {
    const FittedLayer& fl = model.layers[m];
    const Matrix s = pre[m].unaryExpr([&](double t) { return activate_derivative(fl.activation, t); })
                         .cwiseProduct(back) /
                     std::sqrt(static_cast<double>(fl.width()));
    back = (s * fl.lift / fl.rms_norm) * fl.projection.transpose();
  }
  return back;
}

Vector importance_map(const LofiModel& model, const Matrix& x, Index layer, Index k) {
  if (layer < 0 || layer >= static_cast<Index>(model.layers.size())) {
    throw InvalidInput("layer " + std::to_string(layer) + " has no fitted directions");
  }
  const FittedLayer& fl = model.layers[layer];
  if (k < 0 || k >= fl.directions()) throw InvalidInput("direction index out of range");
  if (x.rows() == 0) throw InvalidInput("empty dataset");
  if (x.cols() != model.input_dim) throw InvalidInput("input dimension does not match the model");
  // The Jacobian of phi_0 is the identity for every sample.
  if (layer == 0) return fl.projection.col(k).array().square();
  const Matrix j = representation_vjp(model, x, layer, fl.projection.col(k));
  return j.colwise().squaredNorm().transpose() / static_cast<double>(x.rows());
}

Vector aggregate_importance(const LofiModel& model, const Matrix& x, Index layer) {
  if (layer < 0 || layer >= static_cast<Index>(model.layers.size())) {
    throw InvalidInput("layer " + std::to_string(layer) + " has no fitted directions");
  }
  const FittedLayer& fl = model.layers[layer];
  Vector total = Vector::Zero(model.input_dim);
  double weight = 0.0;
  for (Index k = 0; k < fl.directions(); ++k) {
    const double lambda = fl.eigenvalues(k);
    if (std::isnan(lambda)) continue;
    total += std::abs(lambda) * importance_map(model, x, layer, k);
    weight += std::abs(lambda);
  }
  if (weight == 0.0) throw ZeroSpectrum("layer has no eigendirections with nonzero eigenvalue");
  return total / weight;
}

Vector low_pass_smooth(const Vector& map, const Grid& grid, double f0, double a) {
  if (grid.height < 1 || grid.width < 1 || grid.channels < 1) {
    throw InvalidInput("grid dimensions must be positive");
  }
  if (map.size() != grid.height * grid.width * grid.channels) {
    throw InvalidInput("map length " + std::to_string(map.size()) + " does not match the grid");
  }
  if (!(f0 > 0.0) || !(a >= 0.0)) throw InvalidInput("need f0 > 0 and a >= 0");

  Matrix mask(grid.height, grid.width);
  for (Index r = 0; r < grid.height; ++r) {
    for (Index c = 0; c < grid.width; ++c) {
      const double f = std::hypot(frequency(r, grid.height), frequency(c, grid.width));
      mask(r, c) = std::pow(1.0 + f / f0, -a);
    }
  }

  Vector out(map.size());
  for (Index ch = 0; ch < grid.channels; ++ch) {
    ComplexMatrix img(grid.height, grid.width);
    for (Index r = 0; r < grid.height; ++r) {
      for (Index c = 0; c < grid.width; ++c) {
        img(r, c) = map((r * grid.width + c) * grid.channels + ch);
      }
    }
    ComplexMatrix spec = fft2(img, false);
    spec.array() *= mask.array().cast<Complex>();
    const ComplexMatrix back = fft2(spec, true);
    for (Index r = 0; r < grid.height; ++r) {
      for (Index c = 0; c < grid.width; ++c) {
        out((r * grid.width + c) * grid.channels + ch) = back(r, c).real();
      }
    }
  }
  return out;
}

}  // namespace lofi
