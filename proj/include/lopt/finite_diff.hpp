#pragma once

#include <functional>

#include "lopt/tensor.hpp"

namespace lopt {

using ScalarFn = std::function<double(const Vec&)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
/// Throws EvaluationError naming the coordinate if f is not finite.
Vec finite_diff_grad(const ScalarFn& f, const Vec& x, double eps);

/// Fourth-order central stencil along one coordinate. Used by the
/// meta-gradient checks where the second-order stencil is too coarse.
double finite_diff_partial5(const ScalarFn& f, const Vec& x, long i, double eps);

/// Relative error |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 0.0);

/// Max over entries of relative_error, with the floor applied per entry.
double max_relative_error(const Vec& a, const Vec& b, double floor = 0.0);

}  // namespace lopt
