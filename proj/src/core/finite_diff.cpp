#include "lopt/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lopt/error.hpp"

namespace lopt {
namespace {

double checked(const ScalarFn& f, const Vec& x, long coordinate) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw EvaluationError("finite_diff: non-finite function value at coordinate " +
                              std::to_string(coordinate),
                          coordinate);
  }
  return v;
}

}  // namespace

Vec finite_diff_grad(const ScalarFn& f, const Vec& x, double eps) {
  Vec grad(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + eps;
    const double up = checked(f, probe, i);
    probe(i) = x(i) - eps;
    const double down = checked(f, probe, i);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * eps);
  }
  return grad;
}

double finite_diff_partial5(const ScalarFn& f, const Vec& x, long i, double eps) {
  Vec probe = x;
  auto at = [&](double offset) {
    probe(i) = x(i) + offset;
    return checked(f, probe, i);
  };
  const double p2 = at(2.0 * eps);
  const double p1 = at(eps);
  const double m1 = at(-eps);
  const double m2 = at(-2.0 * eps);
  return (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * eps);
}

double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

double max_relative_error(const Vec& a, const Vec& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, relative_error(a(i), b(i), floor));
  }
  return worst;
}

}  // namespace lopt
