#include "lofi/activation.hpp"

#include <cmath>
#include <numbers>

#include "lofi/errors.hpp"

namespace lofi {

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "relu_perp01") return Activation::relu_perp01;
  if (name == "smooth_test") return Activation::smooth_test;
  if (name == "identity") return Activation::identity;
  throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::relu_perp01: return "relu_perp01";
    case Activation::smooth_test: return "smooth_test";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::relu_perp01:
      return (z > 0.0 ? z : 0.0) - kReluHermite0 - kReluHermite1 * z;
    case Activation::smooth_test: return std::sin(z) + 1.0 - std::cos(z);
    case Activation::identity: return z;
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::relu_perp01: return (z > 0.0 ? 1.0 : 0.0) - kReluHermite1;
    case Activation::smooth_test: return std::cos(z) + std::sin(z);
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

double activate_second_derivative(Activation a, double z) {
  switch (a) {
    case Activation::smooth_test: return std::cos(z) - std::sin(z);
    default: return 0.0;
  }
}

namespace {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    nodes[i] = -x;
    nodes[order - 1 - i] = x;
    weights[i] = weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

}  // namespace

std::vector<double> hermite_coeffs(Activation a, int max_degree) {
  if (max_degree < 0) throw InvalidInput("hermite_coeffs: negative degree");
  constexpr int kOrder = 20;
  constexpr int kPanels = 200;
  constexpr double kCutoff = 14.0;
  std::vector<double> nodes, weights;
  gauss_legendre(kOrder, nodes, weights);

  std::vector<double> coeffs(static_cast<std::size_t>(max_degree) + 1, 0.0);
  std::vector<double> he(coeffs.size());
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double h = kCutoff / kPanels;
  // Panels on [-cutoff, 0] and [0, cutoff] so the kink at 0 sits on a boundary.
  for (int side = -1; side <= 1; side += 2) {
    for (int p = 0; p < kPanels; ++p) {
      const double lo = side * p * h;
      const double hi = side * (p + 1) * h;
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * (hi - lo);
      for (int q = 0; q < kOrder; ++q) {
        const double z = mid + half * nodes[q];
        const double w = std::abs(half) * weights[q] * norm * std::exp(-0.5 * z * z);
        const double s = activate(a, z);
        he[0] = 1.0;
        if (max_degree >= 1) he[1] = z;
        for (int r = 2; r <= max_degree; ++r) he[r] = z * he[r - 1] - (r - 1) * he[r - 2];
        double fact = 1.0;
        for (int r = 0; r <= max_degree; ++r) {
          if (r > 0) fact *= r;
          coeffs[r] += w * s * he[r] / std::sqrt(fact);
        }
      }
    }
  }
  return coeffs;
}

}  // namespace lofi
