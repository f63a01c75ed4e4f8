#include "rydtrans/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rydtrans/errors.hpp"

namespace rydtrans::fitkit {

Model Model::lorentzian() { return Model(ModelKind::lorentzian, 4); }

Model Model::exponential_recovery() { return Model(ModelKind::exponential_recovery, 2); }

Model Model::scaled_pmf(ShapeFn shape) {
  Model m(ModelKind::scaled_pmf, 1);
  m.shape_ = std::move(shape);
  return m;
}

Model Model::user(UserFn fn, int n_params) {
  if (n_params <= 0) throw ConfigError("user model needs at least one parameter");
  Model m(ModelKind::user, n_params);
  m.user_ = std::move(fn);
  return m;
}

double Model::value(double x, const Vector& p) const {
  switch (kind_) {
    case ModelKind::lorentzian: {
      const double u = 2.0 * (x - p[0]) / p[1];
      return p[3] + p[2] / (1.0 + u * u);
    }
    case ModelKind::exponential_recovery:
      return 1.0 - p[0] * std::exp(-x / p[1]);
    case ModelKind::scaled_pmf:
      return p[0] * shape_(x);
    case ModelKind::user:
      return user_(x, p);
  }
  return 0.0;
}

Eigen::RowVectorXd Model::gradient(double x, const Vector& p) const {
  Eigen::RowVectorXd g(n_params_);
  switch (kind_) {
    case ModelKind::lorentzian: {
      const double u = 2.0 * (x - p[0]) / p[1];
      const double d = 1.0 + u * u;
      g[0] = 4.0 * p[2] * u / (p[1] * d * d);
      g[1] = 2.0 * p[2] * u * u / (p[1] * d * d);
      g[2] = 1.0 / d;
      g[3] = 1.0;
      return g;
    }
    case ModelKind::exponential_recovery: {
      const double e = std::exp(-x / p[1]);
      g[0] = -e;
      g[1] = -p[0] * e * x / (p[1] * p[1]);
      return g;
    }
    case ModelKind::scaled_pmf:
      g[0] = shape_(x);
      return g;
    case ModelKind::user: {
      Vector q = p;
      for (int j = 0; j < n_params_; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
        q[j] = p[j] + h;
        const double up = user_(x, q);
        q[j] = p[j] - h;
        const double down = user_(x, q);
        q[j] = p[j];
        g[j] = (up - down) / (2.0 * h);
      }
      return g;
    }
  }
  return g;
}

Matrix model_jacobian(const Model& model, const Vector& x, const Vector& p) {
  Matrix jac(x.size(), model.n_params());
  for (Eigen::Index i = 0; i < x.size(); ++i) jac.row(i) = model.gradient(x[i], p);
  return jac;
}

Matrix numeric_jacobian(const Model& model, const Vector& x, const Vector& p, double h) {
  Matrix jac(x.size(), p.size());
  Vector q = p;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(p[j]));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      q[j] = p[j] + step;
      const double up = model.value(x[i], q);
      q[j] = p[j] - step;
      const double down = model.value(x[i], q);
      jac(i, j) = (up - down) / (2.0 * step);
    }
    q[j] = p[j];
  }
  return jac;
}

double FitResult::stderr_of(Eigen::Index i) const {
  if (i < 0 || i >= covariance.rows()) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(std::max(0.0, covariance(i, i)));
}

namespace {

struct Workspace {
  const FitProblem& problem;
  Vector sqrt_w;

  Vector residual(const Vector& p) const {
    Vector r(problem.x.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      r[i] = sqrt_w[i] * (problem.model.value(problem.x[i], p) - problem.y[i]);
    }
    return r;
  }

  Matrix jacobian(const Vector& p) const {
    return sqrt_w.asDiagonal() * model_jacobian(problem.model, problem.x, p);
  }

  Vector project(Vector p) const {
    if (problem.bounds) {
      p = p.cwiseMax(problem.bounds->lower).cwiseMin(problem.bounds->upper);
    }
    return p;
  }
};

// Largest |cos| between the residual and a nonzero Jacobian column.
double scaled_gradient(const Matrix& jac, const Vector& r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    const double cn = jac.col(j).norm();
    if (cn == 0.0) continue;
    worst = std::max(worst, std::abs(jac.col(j).dot(r)) / (cn * rn));
  }
  return worst;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

Matrix pseudo_inverse_psd(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const Vector& ev = eig.eigenvalues();
  const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * h.rows() *
                        std::numeric_limits<double>::epsilon();
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
  }
  Matrix out = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

void validate(const FitProblem& pr) {
  const Eigen::Index m = pr.x.size();
  if (m == 0) throw ConfigError("fit problem has no data");
  if (pr.y.size() != m) throw ConfigError("fit problem: x and y sizes differ");
  if (pr.weight.size() != 0 && pr.weight.size() != m) {
    throw ConfigError("fit problem: weight size differs from data size");
  }
  if (pr.weight.size() != 0 && !(pr.weight.array() > 0.0).all()) {
    throw ConfigError("fit problem: weights must be positive");
  }
  if (pr.init.size() != pr.model.n_params()) {
    throw ConfigError("fit problem: init has " + std::to_string(pr.init.size()) +
                      " parameters, model needs " + std::to_string(pr.model.n_params()));
  }
  if (pr.bounds) {
    const auto& b = *pr.bounds;
    if (b.lower.size() != pr.init.size() || b.upper.size() != pr.init.size()) {
      throw ConfigError("fit problem: bounds size mismatch");
    }
    if ((pr.init.array() < b.lower.array()).any() || (pr.init.array() > b.upper.array()).any()) {
      throw ConfigError("fit problem: init outside bounds");
    }
  }
}

}  // namespace

FitResult nlls_fit(const FitProblem& problem, const FitOptions& options) {
  validate(problem);
  Workspace ws{problem, problem.weight.size() == 0 ? Vector::Ones(problem.x.size())
                                                    : Vector(problem.weight.cwiseSqrt())};

  Vector p = problem.init;
  Vector r = ws.residual(p);
  if (!all_finite(r)) throw NumericalError("residual is not finite at the initial parameters");
  double cost = r.squaredNorm();
  double lambda = 1e-3;

  // A residual this small is round-off; the cosine test is meaningless there.
  const double roundoff_cost = std::pow(64.0 * std::numeric_limits<double>::epsilon() *
                                            ws.sqrt_w.cwiseProduct(problem.y).norm(), 2);

  FitResult out;
  bool stalled = false;
  const char* reason = "scaled gradient below tolerance";
  for (;;) {
    const Matrix jac = ws.jacobian(p);
    out.gradient_norm = scaled_gradient(jac, r);
    if (out.gradient_norm <= options.gradient_tol) {
      out.converged = true;
      break;
    }
    if (cost <= roundoff_cost) {
      out.converged = true;
      reason = "residual at round-off level";
      break;
    }
    if (out.iterations >= options.max_iter || stalled) break;
    ++out.iterations;

    const Matrix h = jac.transpose() * jac;
    const Vector g = jac.transpose() * r;

    bool accepted = false;
    Vector step;
    // Undamped step first.
    {
      Eigen::LDLT<Matrix> ldlt(h);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        step = -ldlt.solve(g);
        // Gauss-Newton predicted cost reduction; below value_tol nothing
        // left to gain is resolvable in double precision.
        const double predicted = -g.dot(step);
        if (std::isfinite(predicted) && predicted <= options.value_tol * cost) {
          out.converged = true;
          reason = "predicted reduction below value_tol";
          break;
        }
        if (all_finite(step)) {
          const Vector trial = ws.project(p + step);
          const Vector rt = ws.residual(trial);
          if (all_finite(rt) && rt.squaredNorm() < cost) {
            step = trial - p;
            p = trial;
            r = rt;
            cost = r.squaredNorm();
            lambda = std::max(lambda / 10.0, 1e-12);
            accepted = true;
          }
        }
      }
    }
    while (!accepted) {
      Vector diag = h.diagonal();
      const double dmax = std::max(diag.maxCoeff(), 1e-300);
      diag = diag.cwiseMax(1e-12 * dmax);
      Matrix damped = h;
      damped.diagonal() += lambda * diag;
      step = -damped.ldlt().solve(g);
      if (all_finite(step)) {
        const Vector trial = ws.project(p + step);
        const Vector rt = ws.residual(trial);
        if (all_finite(rt) && rt.squaredNorm() < cost) {
          step = trial - p;
          p = trial;
          r = rt;
          cost = r.squaredNorm();
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          break;
        }
      }
      lambda *= 10.0;
      if (lambda > 1e16) {
        stalled = true;
        break;
      }
    }
    if (accepted && step.norm() <= options.step_tol * (p.norm() + options.step_tol)) {
      out.converged = true;
      reason = "relative step below step_tol";
      break;
    }
  }
  if (!out.converged && cost <= roundoff_cost) {
    out.converged = true;
    reason = "residual at round-off level";
  }

  out.params = p;
  out.residual_norm = std::sqrt(cost);
  const Matrix jac = ws.jacobian(p);
  const Eigen::Index dof = problem.x.size() - p.size();
  const double s2 = dof > 0 ? cost / static_cast<double>(dof) : 1.0;
  out.covariance = s2 * pseudo_inverse_psd(jac.transpose() * jac);
  if (!out.converged) {
    std::ostringstream msg;
    msg << (stalled ? "stalled" : "max_iter exceeded") << " after " << out.iterations
        << " iterations; residual " << out.residual_norm << ", scaled gradient "
        << out.gradient_norm;
    out.message = msg.str();
  } else {
    out.message = std::string("converged: ") + reason;
  }
  return out;
}

}  // namespace rydtrans::fitkit
