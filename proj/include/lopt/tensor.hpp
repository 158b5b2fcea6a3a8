#pragma once

#include <Eigen/Core>

namespace lopt {

// Dense float64 storage. Eigen is column-major internally; every API in this
// project indexes logically as (row, col).
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

}  // namespace lopt
