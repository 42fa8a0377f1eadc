#include "lofi/lofi.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lofi/errors.hpp"

namespace lofi {

namespace {

void activate_inplace(Matrix& m, Activation a) {
  if (a == Activation::identity) return;
  m = m.unaryExpr([a](double v) { return activate(a, v); });
}

void require_rows(const Matrix& z, const Vector& y) {
  if (z.rows() != y.size()) {
    throw InvalidInput("representation has " + std::to_string(z.rows()) + " rows but " +
                       std::to_string(y.size()) + " labels");
  }
  if (z.rows() < 1) throw InvalidInput("empty representation");
}

struct Directions {
  Matrix vectors;
  Vector values;
  bool deficient = false;
};

/// Top-|lambda| eigendirections of the moment operator of (z, y), optionally
/// preceded by the normalized first moment with the eigenproblem deflated
/// against it.
Directions spectral_filter(const Matrix& z, const Vector& y, Index rank, bool include_linear) {
  const Index p = z.cols();
  const Index n = z.rows();
  const Index max_rank = include_linear ? p - 1 : p;
  if (rank < 1 || rank > max_rank) {
    throw InvalidInput("layer rank " + std::to_string(rank) + " exceeds available dimension " +
                       std::to_string(max_rank));
  }

  Vector v0;
  if (include_linear) {
    const Vector u = linear_moment(z, y);
    const double scale = y.cwiseAbs().maxCoeff() * z.rowwise().norm().maxCoeff();
    if (u.norm() <= 1e-14 * scale || u.norm() == 0.0) {
      throw ZeroLinearComponent("first moment vanishes; cannot form the linear direction");
    }
    v0 = u / u.norm();
  }

  Directions out;
  SymEig eig;
  if (y.isZero(0.0)) {
    eig.values = Vector::Zero(rank);
    eig.vectors = Matrix::Zero(p, rank);
  } else {
    const bool lanczos = p > kDenseEigenThreshold && 4 * rank < p;
    if (!lanczos) {
      Matrix c = moment_operator(z, y);
      if (include_linear) {
        const Matrix proj = Matrix::Identity(p, p) - v0 * v0.transpose();
        c = proj * c * proj;
        c = 0.5 * (c + c.transpose());
      }
      eig = sym_eig_topk(c, rank, EigMethod::dense);
    } else {
      const double inv_n = 1.0 / static_cast<double>(n);
      LinearOperator op;
      Matrix c;
      if (n < p) {
        op = [&](const Vector& x, Vector& out_vec) {
          Vector xin = x;
          if (include_linear) xin -= v0.dot(xin) * v0;
          const Vector zx = z * xin;
          out_vec.noalias() = z.transpose() * (zx.cwiseProduct(y)) * inv_n;
          if (include_linear) out_vec -= v0.dot(out_vec) * v0;
        };
      } else {
        c = moment_operator(z, y);
        op = [&](const Vector& x, Vector& out_vec) {
          Vector xin = x;
          if (include_linear) xin -= v0.dot(xin) * v0;
          out_vec.noalias() = c * xin;
          if (include_linear) out_vec -= v0.dot(out_vec) * v0;
        };
      }
      eig = lanczos_topk(op, p, rank);
    }
  }

  const double top = eig.values.size() > 0 ? std::abs(eig.values(0)) : 0.0;
  Index kept = 0;
  while (kept < eig.values.size() && top > 0.0 &&
         std::abs(eig.values(kept)) > 1e-12 * top) {
    ++kept;
  }
  out.deficient = kept < rank;

  const Index lin = include_linear ? 1 : 0;
  out.vectors.resize(p, kept + lin);
  out.values.resize(kept + lin);
  if (include_linear) {
    out.vectors.col(0) = v0;
    out.values(0) = std::numeric_limits<double>::quiet_NaN();
  }
  out.vectors.rightCols(kept) = eig.vectors.leftCols(kept);
  out.values.tail(kept) = eig.values.head(kept);
  return out;
}

double rms_row_norm(const Matrix& g) {
  if (g.rows() == 0) return 1.0;
  const double rms = std::sqrt(g.squaredNorm() / static_cast<double>(g.rows()));
  return rms > 0.0 ? rms : 1.0;
}

Matrix lift(const Matrix& lift_input, const FittedLayer& layer) {
  Matrix pre = lift_input * layer.lift.transpose();
  pre /= layer.rms_norm;
  activate_inplace(pre, layer.activation);
  return pre / std::sqrt(static_cast<double>(layer.width()));
}

/// Zero-padded k x k neighbourhoods of every location, ordered (dr, dc, channel).
Matrix gather_patches(const ConvRepresentation& rep, Index kernel) {
  if (kernel == 1) return rep.data;
  const Index half = kernel / 2;
  const Index ch = rep.channels;
  Matrix patches = Matrix::Zero(rep.data.rows(), kernel * kernel * ch);
  for (Index s = 0; s < rep.samples; ++s) {
    for (Index r = 0; r < rep.height; ++r) {
      for (Index c = 0; c < rep.width; ++c) {
        const Index row = (s * rep.height + r) * rep.width + c;
        for (Index dr = 0; dr < kernel; ++dr) {
          const Index rr = r + dr - half;
          if (rr < 0 || rr >= rep.height) continue;
          for (Index dc = 0; dc < kernel; ++dc) {
            const Index cc = c + dc - half;
            if (cc < 0 || cc >= rep.width) continue;
            const Index src = (s * rep.height + rr) * rep.width + cc;
            patches.block(row, (dr * kernel + dc) * ch, 1, ch) = rep.data.row(src);
          }
        }
      }
    }
  }
  return patches;
}

ConvRepresentation max_pool_2x2(const ConvRepresentation& rep) {
  if (rep.height % 2 != 0 || rep.width % 2 != 0) {
    throw InvalidInput("2x2 max pooling needs even grid dimensions");
  }
  ConvRepresentation out;
  out.samples = rep.samples;
  out.height = rep.height / 2;
  out.width = rep.width / 2;
  out.channels = rep.channels;
  out.data.resize(out.samples * out.height * out.width, out.channels);
  for (Index s = 0; s < out.samples; ++s) {
    for (Index r = 0; r < out.height; ++r) {
      for (Index c = 0; c < out.width; ++c) {
        const Index dst = (s * out.height + r) * out.width + c;
        const Index a = (s * rep.height + 2 * r) * rep.width + 2 * c;
        const Index b = a + rep.width;
        out.data.row(dst) = rep.data.row(a)
                                .cwiseMax(rep.data.row(a + 1))
                                .cwiseMax(rep.data.row(b))
                                .cwiseMax(rep.data.row(b + 1));
      }
    }
  }
  return out;
}

void l2_normalize_rows(Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const double nr = m.row(r).norm();
    if (nr > 0.0) m.row(r) /= nr;
  }
}

ConvRepresentation conv_lift(const FittedLayer& layer, const ConvRepresentation& z) {
  ConvRepresentation g;
  g.samples = z.samples;
  g.height = z.height;
  g.width = z.width;
  g.channels = layer.directions();
  g.data = z.data * layer.projection;

  ConvRepresentation out;
  out.samples = z.samples;
  out.height = z.height;
  out.width = z.width;
  out.channels = layer.width();
  out.data = lift(gather_patches(g, layer.conv.kernel_size), layer);
  if (layer.conv.max_pool) out = max_pool_2x2(out);
  if (layer.conv.l2_normalize) l2_normalize_rows(out.data);
  return out;
}

}  // namespace

void validate(const LayerSpec& spec) {
  if (spec.rank < 1) throw InvalidInput("layer rank must be at least 1");
  if (spec.width < spec.rank) throw InvalidInput("layer width must be at least its rank");
  if (spec.kind == LayerKind::conv &&
      (spec.conv.kernel_size < 1 || spec.conv.kernel_size % 2 == 0)) {
    throw InvalidInput("conv kernel size must be a positive odd number");
  }
}

ConvRepresentation ConvRepresentation::from_images(const Matrix& x, Index height, Index width,
                                                   Index channels) {
  if (height < 1 || width < 1 || channels < 1 || x.cols() != height * width * channels) {
    throw InvalidInput("image shape does not match the input dimension");
  }
  ConvRepresentation rep;
  rep.samples = x.rows();
  rep.height = height;
  rep.width = width;
  rep.channels = channels;
  rep.data.resize(x.rows() * height * width, channels);
  for (Index s = 0; s < x.rows(); ++s) {
    for (Index loc = 0; loc < height * width; ++loc) {
      rep.data.row(s * height * width + loc) = x.block(s, loc * channels, 1, channels);
    }
  }
  return rep;
}

Matrix ConvRepresentation::flatten() const {
  Matrix out(samples, locations() * channels);
  for (Index s = 0; s < samples; ++s) {
    for (Index loc = 0; loc < locations(); ++loc) {
      out.block(s, loc * channels, 1, channels) = data.row(s * locations() + loc);
    }
  }
  return out;
}

Vector linear_moment(const Matrix& z, const Vector& y) {
  require_rows(z, y);
  return z.transpose() * y / static_cast<double>(z.rows());
}

MomentAccumulator::MomentAccumulator(Index dim) : sum_(Matrix::Zero(dim, dim)) {}

void MomentAccumulator::add(const Matrix& z_batch, const Vector& y_batch) {
  require_rows(z_batch, y_batch);
  if (z_batch.cols() != sum_.rows()) throw InvalidInput("moment batch has the wrong width");
  // Only the lower triangle is accumulated; result() mirrors it.
  const Matrix weighted = y_batch.asDiagonal() * z_batch;
  sum_.triangularView<Eigen::Lower>() += weighted.transpose() * z_batch;
  count_ += z_batch.rows();
}

Matrix MomentAccumulator::result() const {
  if (count_ == 0) throw InvalidInput("moment accumulator is empty");
  Matrix c = sum_.selfadjointView<Eigen::Lower>();
  return c / static_cast<double>(count_);
}

Matrix moment_operator(const Matrix& z, const Vector& y, Index batch_rows) {
  require_rows(z, y);
  if (batch_rows < 1) throw InvalidInput("batch size must be positive");
  MomentAccumulator acc(z.cols());
  for (Index start = 0; start < z.rows(); start += batch_rows) {
    const Index len = std::min(batch_rows, z.rows() - start);
    acc.add(z.middleRows(start, len), y.segment(start, len));
  }
  return acc.result();
}

Matrix conv_moment_operator(const ConvRepresentation& z, const Vector& y) {
  if (z.samples != y.size()) throw InvalidInput("conv representation and labels differ in length");
  Vector y_loc(z.data.rows());
  for (Index s = 0; s < z.samples; ++s) y_loc.segment(s * z.locations(), z.locations()).setConstant(y(s));
  return moment_operator(z.data, y_loc);
}

Matrix project(const FittedLayer& layer, const Matrix& z) {
  if (z.cols() != layer.input_dim()) {
    throw InvalidInput("layer expects input dimension " + std::to_string(layer.input_dim()) +
                       ", got " + std::to_string(z.cols()));
  }
  return z * layer.projection;
}

LayerFit fit_layer(const Matrix& z_prev, const Vector& y, const LayerSpec& spec, Rng& rng,
                   const FitOverrides& overrides) {
  validate(spec);
  require_rows(z_prev, y);
  if (spec.kind != LayerKind::dense) throw InvalidInput("fit_layer expects a dense layer spec");

  Directions dirs = spectral_filter(z_prev, y, spec.rank, spec.include_linear);
  LayerFit fit;
  FittedLayer& layer = fit.layer;
  layer.kind = LayerKind::dense;
  layer.activation = spec.activation;
  layer.has_linear = spec.include_linear;
  layer.rank_deficient = dirs.deficient;
  layer.projection = std::move(dirs.vectors);
  layer.eigenvalues = std::move(dirs.values);

  const Matrix g = z_prev * layer.projection;
  layer.rms_norm = overrides.rms_norm.value_or(rms_row_norm(g));
  if (overrides.lift) {
    if (overrides.lift->rows() != spec.width || overrides.lift->cols() != layer.directions()) {
      throw InvalidInput("injected lift matrix has the wrong shape");
    }
    layer.lift = *overrides.lift;
  } else {
    layer.lift = layer.directions() > 0 ? gaussian_matrix(spec.width, layer.directions(), rng)
                                        : Matrix(spec.width, 0);
  }
  fit.next = lift(g, layer);
  return fit;
}

Matrix apply_layer(const FittedLayer& layer, const Matrix& z) {
  if (layer.kind != LayerKind::dense) throw InvalidInput("apply_layer expects a dense layer");
  return lift(project(layer, z), layer);
}

ConvLayerFit fit_conv_layer(const ConvRepresentation& z_prev, const Vector& y,
                            const LayerSpec& spec, Rng& rng, const FitOverrides& overrides) {
  validate(spec);
  if (spec.kind != LayerKind::conv) throw InvalidInput("fit_conv_layer expects a conv layer spec");
  if (z_prev.samples != y.size()) throw InvalidInput("conv representation and labels differ");

  Vector y_loc(z_prev.data.rows());
  for (Index s = 0; s < z_prev.samples; ++s) {
    y_loc.segment(s * z_prev.locations(), z_prev.locations()).setConstant(y(s));
  }
  Directions dirs = spectral_filter(z_prev.data, y_loc, spec.rank, spec.include_linear);

  ConvLayerFit fit;
  FittedLayer& layer = fit.layer;
  layer.kind = LayerKind::conv;
  layer.conv = spec.conv;
  layer.activation = spec.activation;
  layer.has_linear = spec.include_linear;
  layer.rank_deficient = dirs.deficient;
  layer.projection = std::move(dirs.vectors);
  layer.eigenvalues = std::move(dirs.values);

  const Index lift_in = layer.directions() * spec.conv.kernel_size * spec.conv.kernel_size;
  if (overrides.lift) {
    if (overrides.lift->rows() != spec.width || overrides.lift->cols() != lift_in) {
      throw InvalidInput("injected lift matrix has the wrong shape");
    }
    layer.lift = *overrides.lift;
  } else {
    layer.lift = lift_in > 0 ? gaussian_matrix(spec.width, lift_in, rng) : Matrix(spec.width, 0);
  }

  ConvRepresentation g;
  g.samples = z_prev.samples;
  g.height = z_prev.height;
  g.width = z_prev.width;
  g.channels = layer.directions();
  g.data = z_prev.data * layer.projection;
  layer.rms_norm = overrides.rms_norm.value_or(rms_row_norm(gather_patches(g, spec.conv.kernel_size)));

  fit.next = conv_lift(layer, z_prev);
  return fit;
}

ConvRepresentation conv_forward(const FittedLayer& layer, const ConvRepresentation& z) {
  if (layer.kind != LayerKind::conv) throw InvalidInput("conv_forward expects a conv layer");
  if (z.channels != layer.input_dim() || z.data.cols() != layer.input_dim()) {
    throw InvalidInput("conv layer expects " + std::to_string(layer.input_dim()) + " channels");
  }
  return conv_lift(layer, z);
}

LofiModel fit_model(const Dataset& train, const std::vector<LayerSpec>& specs,
                    const ReadoutConfig& readout, Rng& rng, std::optional<ImageShape> input_shape,
                    Task task) {
  validate(train);
  if (!train.centered) throw InvalidInput("fit_model requires centered labels");

  LofiModel model;
  model.task = task;
  model.input_dim = train.dim();

  Matrix z = train.x;
  std::size_t idx = 0;
  if (!specs.empty() && specs.front().kind == LayerKind::conv) {
    if (!input_shape) throw InvalidInput("convolutional layers need an input image shape");
    model.input_shape = input_shape;
    ConvRepresentation rep = ConvRepresentation::from_images(
        train.x, input_shape->height, input_shape->width, input_shape->channels);
    for (; idx < specs.size() && specs[idx].kind == LayerKind::conv; ++idx) {
      Rng layer_rng = rng.fork(idx);
      ConvLayerFit fit = fit_conv_layer(rep, train.y, specs[idx], layer_rng);
      model.layers.push_back(std::move(fit.layer));
      rep = std::move(fit.next);
    }
    z = rep.flatten();
  }
  for (; idx < specs.size(); ++idx) {
    if (specs[idx].kind == LayerKind::conv) {
      throw InvalidInput("convolutional layers must precede dense layers");
    }
    Rng layer_rng = rng.fork(idx);
    LayerFit fit = fit_layer(z, train.y, specs[idx], layer_rng);
    model.layers.push_back(std::move(fit.layer));
    z = std::move(fit.next);
  }

  Rng readout_rng = rng.fork(kReadoutStream);
  RidgeCvResult cv = ridge_cv(z, train.y, readout.lambda_grid, readout.folds, readout_rng);
  model.readout = std::move(cv.weights);
  model.lambda = cv.lambda;
  return model;
}

Matrix represent(const LofiModel& model, const Matrix& x, Index depth) {
  if (x.cols() != model.input_dim) {
    throw InvalidInput("model expects input dimension " + std::to_string(model.input_dim) +
                       ", got " + std::to_string(x.cols()));
  }
  const auto total = static_cast<Index>(model.layers.size());
  if (depth < 0 || depth > total) depth = total;

  Matrix z = x;
  Index idx = 0;
  if (model.input_shape && depth > 0 && model.layers.front().kind == LayerKind::conv) {
    const ImageShape& s = *model.input_shape;
    ConvRepresentation rep = ConvRepresentation::from_images(x, s.height, s.width, s.channels);
    for (; idx < depth && model.layers[idx].kind == LayerKind::conv; ++idx) {
      rep = conv_forward(model.layers[idx], rep);
    }
    z = rep.flatten();
  }
  for (; idx < depth; ++idx) z = apply_layer(model.layers[idx], z);
  return z;
}

Vector predict(const LofiModel& model, const Matrix& x) {
  const Matrix z = represent(model, x);
  if (z.cols() != model.readout.size()) throw InvalidInput("readout dimension mismatch");
  return (z * model.readout).array() + model.label_offset;
}

Vector classify(const LofiModel& model, const Matrix& x) {
  return predict(model, x).unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

}  // namespace lofi
