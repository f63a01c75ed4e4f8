#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) least squares on Eigen types.
//
// Minimises 0.5 * sum_i w_i (f(x_i; p) - y_i)^2. Each iteration first tries
// the undamped Gauss-Newton step; if that does not lower the cost, the
// Marquardt system (J^T W J + lambda diag(J^T W J)) dp = -J^T W r is solved
// with lambda starting at 1e-3, x10 after a rejected step and /10 after an
// accepted one.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

namespace rydtrans::fitkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ModelKind { lorentzian, exponential_recovery, scaled_pmf, user };

class Model {
 public:
  using UserFn = std::function<double(double x, const Vector& params)>;
  using ShapeFn = std::function<double(double x)>;

  /// offset + amplitude / (1 + (2 (x - center) / fwhm)^2);
  /// params (center, fwhm, amplitude, offset).
  static Model lorentzian();
  /// 1 - depth * exp(-t / tau); params (depth, tau).
  static Model exponential_recovery();
  /// scale * shape(x); params (scale).
  static Model scaled_pmf(ShapeFn shape);
  /// Arbitrary model; Jacobian by central differences.
  static Model user(UserFn fn, int n_params);

  ModelKind kind() const { return kind_; }
  int n_params() const { return n_params_; }
  double value(double x, const Vector& p) const;
  /// d value / d p, analytic for built-in models.
  Eigen::RowVectorXd gradient(double x, const Vector& p) const;

 private:
  Model(ModelKind kind, int n_params) : kind_(kind), n_params_(n_params) {}

  ModelKind kind_;
  int n_params_;
  UserFn user_;
  ShapeFn shape_;
};

/// Rows are data points, columns parameters.
Matrix model_jacobian(const Model& model, const Vector& x, const Vector& p);
/// Central differences with step h * max(1, |p_j|).
Matrix numeric_jacobian(const Model& model, const Vector& x, const Vector& p, double h = 1e-6);

struct Bounds {
  Vector lower;
  Vector upper;
};

struct FitProblem {
  Model model;
  Vector x;
  Vector y;
  Vector weight;  // empty -> all ones
  Vector init;
  std::optional<Bounds> bounds;
};

struct FitOptions {
  double gradient_tol = 1e-8;
  double step_tol = 1e-10;
  double value_tol = 1e-12;  // relative cost reduction predicted by the Gauss-Newton step
  int max_iter = 200;
};

struct FitResult {
  Vector params;
  Matrix covariance;
  double residual_norm = 0.0;  // sqrt(sum w r^2)
  double gradient_norm = 0.0;  // scaled, see nlls_fit
  int iterations = 0;
  bool converged = false;
  std::string message;

  double stderr_of(Eigen::Index i) const;
};

/// Convergence is declared when the largest cosine between the residual and
/// any Jacobian column is below gradient_tol, when the Gauss-Newton step
/// predicts a relative cost reduction below value_tol, when an accepted step
/// is below step_tol relative to the parameters, or when the weighted
/// residual is at round-off level. Running out of iterations or stalling returns
/// converged == false with the reason in message; it never throws for that.
/// Invalid problems (size mismatch, bad weights, init out of bounds,
/// non-finite residual at init) throw ConfigError / NumericalError.
///
/// The covariance is s^2 (J^T W J)^+, s^2 the reduced chi-square when there
/// are more points than parameters, 1 otherwise.
FitResult nlls_fit(const FitProblem& problem, const FitOptions& options = {});

}  // namespace rydtrans::fitkit
