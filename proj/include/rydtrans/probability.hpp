#pragma once

// Counting-statistics and quadrature helpers shared by the simulation and
// analysis code.

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace rydtrans::fitkit {

double poisson_log_pmf(double mu, long k);
double poisson_pmf(double mu, long k);
/// P(X <= k), cumulative sum from 0 so it is monotone in k.
double poisson_cdf(double mu, long k);
/// P(X > k), summed upward until the terms are negligible.
double poisson_sf(double mu, long k);
/// pmf(0..k_max) as a vector.
std::vector<double> poisson_pmf_table(double mu, long k_max);

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// n-point Gauss-Legendre on [-1, 1] (Golub-Welsch).
QuadratureRule gauss_legendre(int n);
/// n-point Gauss-Hermite for the standard normal density:
/// E[f(Z)] ~ sum w_i f(z_i), sum w_i = 1.
QuadratureRule gauss_hermite_normal(int n);

struct IntegrationReport {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
  int max_depth_reached = 0;
};

/// Adaptive Gauss-Kronrod (7/15) with bisection. Throws NumericalError with
/// the interval diagnostics if the tolerance cannot be met.
IntegrationReport integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                     double rel_tol = 1e-10, double abs_tol = 1e-300,
                                     int max_depth = 40);

/// Iterated adaptive integral over a rectangle; inner tolerance is tightened
/// so the outer estimate meets rel_tol.
IntegrationReport integrate_adaptive_2d(const std::function<double(double, double)>& f,
                                        double x0, double x1, double y0, double y1,
                                        double rel_tol = 1e-6);

}  // namespace rydtrans::fitkit
