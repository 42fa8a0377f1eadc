#pragma once

#include <optional>
#include <vector>

#include "lofi/activation.hpp"
#include "lofi/dataset.hpp"
#include "lofi/linalg.hpp"

namespace lofi {

enum class LayerKind { dense, conv };

struct ConvOptions {
  Index kernel_size = 1;  // odd; zero padding keeps the grid size
  bool max_pool = false;  // 2x2, stride 2
  bool l2_normalize = false;
};

/// One layer of the pipeline: keep `rank` eigendirections of the label-weighted
/// moment operator, then lift to `width` random features.
struct LayerSpec {
  Index width = 0;
  Index rank = 0;
  Activation activation = Activation::relu;
  bool include_linear = false;  // prepend the normalized first moment
  LayerKind kind = LayerKind::dense;
  ConvOptions conv;
};

void validate(const LayerSpec& spec);

struct FittedLayer {
  LayerKind kind = LayerKind::dense;
  ConvOptions conv;
  Activation activation = Activation::relu;
  bool has_linear = false;      // first projection column is the linear direction
  bool rank_deficient = false;  // fewer directions survived than requested
  Matrix projection;            // input_dim x directions
  Vector eigenvalues;           // NaN marks the linear direction
  Matrix lift;                  // width x (directions * kernel_size^2)
  double rms_norm = 1.0;        // pre-activations are divided by this

  Index input_dim() const { return projection.rows(); }
  Index directions() const { return projection.cols(); }
  Index width() const { return lift.rows(); }
};

/// Spatial feature maps: row (sample * height + r) * width + c holds the
/// channel vector of one location.
struct ConvRepresentation {
  Index samples = 0;
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  Matrix data;

  Index locations() const { return height * width; }
  static ConvRepresentation from_images(const Matrix& x, Index height, Index width,
                                        Index channels);
  /// One row per sample: (r, c, channel) flattened, channel fastest.
  Matrix flatten() const;
};

enum class Task { regression, binary };

struct ImageShape {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
};

/// fit_model forks layer l's generator as rng.fork(l) and the readout's as
/// rng.fork(kReadoutStream).
inline constexpr std::uint64_t kReadoutStream = 0x7265616430ULL;

struct ReadoutConfig {
  std::vector<double> lambda_grid = default_ridge_grid();
  Index folds = 5;
};

struct LofiModel {
  std::vector<FittedLayer> layers;
  Vector readout;
  double lambda = 0.0;
  double label_offset = 0.0;  // added to every prediction (the training label mean)
  Task task = Task::regression;
  std::optional<ImageShape> input_shape;  // set when the first layer is convolutional
  Index input_dim = 0;
};

// Moment operators.
Vector linear_moment(const Matrix& z, const Vector& y);
/// (1/n) sum_mu y_mu z_mu z_mu^T accumulated over row batches of `batch_rows`.
Matrix moment_operator(const Matrix& z, const Vector& y, Index batch_rows = 4096);
/// Channel-space operator averaged over samples and locations.
Matrix conv_moment_operator(const ConvRepresentation& z, const Vector& y);

/// Streaming accumulator for the moment operator when the representation is
/// produced in batches.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Index dim);
  void add(const Matrix& z_batch, const Vector& y_batch);
  Index count() const { return count_; }
  Matrix result() const;

 private:
  Matrix sum_;
  Index count_ = 0;
};

/// Test hooks: inject the lift matrix or pin the normalization constant.
struct FitOverrides {
  std::optional<Matrix> lift;
  std::optional<double> rms_norm;
};

struct LayerFit {
  FittedLayer layer;
  Matrix next;
};

LayerFit fit_layer(const Matrix& z_prev, const Vector& y, const LayerSpec& spec, Rng& rng,
                   const FitOverrides& overrides = {});
Matrix apply_layer(const FittedLayer& layer, const Matrix& z);

/// Projected features g = z V (before the lift).
Matrix project(const FittedLayer& layer, const Matrix& z);

struct ConvLayerFit {
  FittedLayer layer;
  ConvRepresentation next;
};

ConvLayerFit fit_conv_layer(const ConvRepresentation& z_prev, const Vector& y,
                            const LayerSpec& spec, Rng& rng, const FitOverrides& overrides = {});
ConvRepresentation conv_forward(const FittedLayer& layer, const ConvRepresentation& z);

/// Sequential layer fits followed by a cross-validated ridge readout.
LofiModel fit_model(const Dataset& train, const std::vector<LayerSpec>& specs,
                    const ReadoutConfig& readout, Rng& rng,
                    std::optional<ImageShape> input_shape = std::nullopt,
                    Task task = Task::regression);

/// Representation after the first `depth` layers (all layers when depth < 0).
Matrix represent(const LofiModel& model, const Matrix& x, Index depth = -1);

Vector predict(const LofiModel& model, const Matrix& x);
/// sign of the prediction with sign(0) = +1.
Vector classify(const LofiModel& model, const Matrix& x);

}  // namespace lofi
