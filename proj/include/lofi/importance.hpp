#pragma once

#include "lofi/lofi.hpp"

namespace lofi {

/// Row mu holds d/dx (v^T phi_layer(x_mu)), where phi_layer is the
/// representation after `layer` fitted layers (phi_0 = x). Dense layers only;
/// relu uses derivative 0 at 0.
Matrix representation_vjp(const LofiModel& model, const Matrix& x, Index layer, const Vector& v);

/// I_k(d) = (1/N) sum_i (J_layer(x_i)^T v_k)_d^2 where v_k is column k of the
/// projection fitted on phi_layer. At layer 0 this is (v_k)_d^2.
Vector importance_map(const LofiModel& model, const Matrix& x, Index layer, Index k);

/// sum_k |lambda_k| I_k / sum_k |lambda_k| over the eigendirections of the
/// layer. A prepended linear direction carries no eigenvalue and is skipped.
Vector aggregate_importance(const LofiModel& model, const Matrix& x, Index layer);

struct Grid {
  Index height = 0;
  Index width = 0;
  Index channels = 1;
};

/// Multiplies each channel's 2-D spectrum by m(f) = (1 + |f| / f0)^(-a), f in
/// cycles per pixel. The map is laid out (row, column, channel), channel fastest.
Vector low_pass_smooth(const Vector& map, const Grid& grid, double f0 = 0.15, double a = 3.0);

}  // namespace lofi
