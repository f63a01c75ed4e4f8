#include "rydtrans/probability.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "rydtrans/errors.hpp"

namespace rydtrans::fitkit {

double poisson_log_pmf(double mu, long k) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  if (mu == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double kd = static_cast<double>(k);
  return kd * std::log(mu) - mu - std::lgamma(kd + 1.0);
}

double poisson_pmf(double mu, long k) {
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  return std::exp(poisson_log_pmf(mu, k));
}

double poisson_cdf(double mu, long k) {
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  if (k < 0) return 0.0;
  long double sum = 0.0L;
  for (long i = 0; i <= k; ++i) {
    const long double term = std::exp(static_cast<long double>(poisson_log_pmf(mu, i)));
    sum += term;
    // Past the mode and below double resolution: the rest cannot move the sum.
    if (i > mu && term < 1e-40L * sum) break;
  }
  return static_cast<double>(std::min(sum, 1.0L));
}

double poisson_sf(double mu, long k) {
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  if (k < 0) return 1.0;
  long double sum = 0.0L;
  for (long i = k + 1;; ++i) {
    const long double term = std::exp(static_cast<long double>(poisson_log_pmf(mu, i)));
    sum += term;
    if (i > mu && (term <= 1e-40L * sum || term == 0.0L)) break;
  }
  return static_cast<double>(std::min(sum, 1.0L));
}

std::vector<double> poisson_pmf_table(double mu, long k_max) {
  std::vector<double> out(static_cast<std::size_t>(std::max(k_max + 1, 0L)));
  for (long k = 0; k <= k_max; ++k) out[static_cast<std::size_t>(k)] = poisson_pmf(mu, k);
  return out;
}

namespace {

QuadratureRule golub_welsch(const Eigen::VectorXd& off_diagonal, double mass) {
  const Eigen::Index n = off_diagonal.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = off_diagonal[i];
    jacobi(i + 1, i) = off_diagonal[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = mass * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw ConfigError("Gauss-Legendre needs n >= 1");
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(b, 2.0);
}

QuadratureRule gauss_hermite_normal(int n) {
  if (n < 1) throw ConfigError("Gauss-Hermite needs n >= 1");
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b[k - 1] = std::sqrt(static_cast<double>(k));
  return golub_welsch(b, 1.0);
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  int depth;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment kronrod15(const std::function<double(double)>& f, double a, double b, int depth) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = kWgk[7] * fc;
  double gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double pair = f(c - dx) + f(c + dx);
    kronrod += kWgk[j] * pair;
    if (j % 2 == 1) gauss += kWg[j / 2] * pair;
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h), depth};
}

}  // namespace

IntegrationReport integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                     double rel_tol, double abs_tol, int max_depth) {
  IntegrationReport rep;
  if (a == b) return rep;
  std::priority_queue<Segment> heap;
  heap.push(kronrod15(f, a, b, 0));
  rep.evaluations = 15;
  double total = heap.top().value;
  double error = heap.top().error;
  while (!(error <= std::max(abs_tol, rel_tol * std::abs(total)))) {
    const Segment worst = heap.top();
    if (worst.depth >= max_depth || !std::isfinite(total)) {
      std::ostringstream msg;
      msg << "adaptive quadrature did not converge on [" << a << ", " << b << "]: estimate "
          << total << " +- " << error << " after " << rep.evaluations
          << " evaluations; worst segment [" << worst.a << ", " << worst.b << "] at depth "
          << worst.depth;
      throw NumericalError(msg.str());
    }
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = kronrod15(f, worst.a, mid, worst.depth + 1);
    const Segment right = kronrod15(f, mid, worst.b, worst.depth + 1);
    rep.evaluations += 30;
    rep.max_depth_reached = std::max(rep.max_depth_reached, worst.depth + 1);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to drop the accumulated update round-off.
  total = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  rep.value = total;
  rep.error_estimate = error;
  return rep;
}

IntegrationReport integrate_adaptive_2d(const std::function<double(double, double)>& f,
                                        double x0, double x1, double y0, double y1,
                                        double rel_tol) {
  IntegrationReport rep;
  double inner_error = 0.0;
  const auto inner = [&](double x) {
    const auto r = integrate_adaptive([&](double y) { return f(x, y); }, y0, y1, 0.1 * rel_tol);
    rep.evaluations += r.evaluations;
    rep.max_depth_reached = std::max(rep.max_depth_reached, r.max_depth_reached);
    inner_error = std::max(inner_error, r.error_estimate / std::max(std::abs(r.value), 1e-300));
    return r.value;
  };
  const auto outer = integrate_adaptive(inner, x0, x1, rel_tol);
  rep.value = outer.value;
  rep.error_estimate = outer.error_estimate + inner_error * std::abs(outer.value);
  rep.max_depth_reached = std::max(rep.max_depth_reached, outer.max_depth_reached);
  return rep;
}

}  // namespace rydtrans::fitkit
