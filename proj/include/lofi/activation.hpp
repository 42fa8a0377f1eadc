#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lofi {

/// Pointwise nonlinearities available to the random lifts.
///
///  - relu
///  - relu_perp01: relu with its degree-0 and degree-1 Hermite components
///    removed, relu(z) - c0 - c1 z with c0 = 1/sqrt(2 pi), c1 = 1/2
///  - smooth_test: sin z + 1 - cos z; sigma(0) = 0, sigma'(0) = sigma''(0) = 1,
///    every derivative bounded
///  - identity
enum class Activation { relu, relu_perp01, smooth_test, identity };

Activation parse_activation(std::string_view name);
std::string to_string(Activation a);

double activate(Activation a, double z);
/// First derivative; relu uses derivative 0 at z = 0.
double activate_derivative(Activation a, double z);
double activate_second_derivative(Activation a, double z);

/// Normalized (probabilists') Hermite coefficients c_r = E[sigma(G) He_r(G)] / sqrt(r!)
/// for r = 0..max_degree, G standard normal, by composite Gauss-Legendre
/// quadrature split at the origin.
std::vector<double> hermite_coeffs(Activation a, int max_degree);

/// c_r of relu in closed form for r = 0, 1.
inline constexpr double kReluHermite0 = 0.398942280401432677939946;  // 1/sqrt(2 pi)
inline constexpr double kReluHermite1 = 0.5;

}  // namespace lofi
