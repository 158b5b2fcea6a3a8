#include "lopt/gru.hpp"

#include <Eigen/QR>
#include <string>

#include "lopt/error.hpp"

namespace lopt {
namespace {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  return 1.0 / (1.0 + (-a).exp());
}

void check_len(const Vec& v, long n, const char* name) {
  if (v.size() != n) {
    throw DimensionError(std::string("GRU: ") + name + " has length " + std::to_string(v.size()) +
                         ", expected " + std::to_string(n));
  }
}

void check_square(const Mat& m, long n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(std::string("GRU: ") + name + " must be " + std::to_string(n) + "x" +
                         std::to_string(n));
  }
}

}  // namespace

GruParams GruParams::zeros(long n) {
  GruParams p;
  p.w_z = p.w_r = p.w_c = Vec::Zero(n);
  p.u_z = p.u_r = p.u_c = Mat::Zero(n, n);
  p.b_z = p.b_r = p.b_c = Vec::Zero(n);
  return p;
}

void GruParams::validate() const {
  const long n = hidden_size();
  check_len(w_z, n, "w_z");
  check_len(w_r, n, "w_r");
  check_len(w_c, n, "w_c");
  check_len(b_r, n, "b_r");
  check_len(b_c, n, "b_c");
  check_square(u_z, n, "U_z");
  check_square(u_r, n, "U_r");
  check_square(u_c, n, "U_c");
}

OptimizerParams OptimizerParams::zeros(long n) {
  return {GruParams::zeros(n), Vec::Zero(n), Vec::Zero(n)};
}

void OptimizerParams::validate() const {
  gru.validate();
  check_len(readout, hidden_size(), "readout");
  check_len(h0, hidden_size(), "h0");
}

long OptimizerParams::flat_size() const {
  const long n = hidden_size();
  return 3 * n + 3 * n * n + 3 * n + 2 * n;
}

Vec OptimizerParams::flatten() const {
  const long n = hidden_size();
  Vec flat(flat_size());
  long at = 0;
  auto put_vec = [&](const Vec& v) {
    flat.segment(at, n) = v;
    at += n;
  };
  auto put_mat = [&](const Mat& m) {
    for (long i = 0; i < n; ++i) {
      flat.segment(at, n) = m.row(i).transpose();
      at += n;
    }
  };
  put_vec(gru.w_z);
  put_vec(gru.w_r);
  put_vec(gru.w_c);
  put_mat(gru.u_z);
  put_mat(gru.u_r);
  put_mat(gru.u_c);
  put_vec(gru.b_z);
  put_vec(gru.b_r);
  put_vec(gru.b_c);
  put_vec(readout);
  put_vec(h0);
  return flat;
}

OptimizerParams OptimizerParams::unflatten(const Vec& flat, long n) {
  OptimizerParams p = zeros(n);
  if (flat.size() != p.flat_size()) {
    throw DimensionError("OptimizerParams::unflatten: expected " + std::to_string(p.flat_size()) +
                         " values, got " + std::to_string(flat.size()));
  }
  long at = 0;
  auto get_vec = [&](Vec& v) {
    v = flat.segment(at, n);
    at += n;
  };
  auto get_mat = [&](Mat& m) {
    for (long i = 0; i < n; ++i) {
      m.row(i) = flat.segment(at, n).transpose();
      at += n;
    }
  };
  get_vec(p.gru.w_z);
  get_vec(p.gru.w_r);
  get_vec(p.gru.w_c);
  get_mat(p.gru.u_z);
  get_mat(p.gru.u_r);
  get_mat(p.gru.u_c);
  get_vec(p.gru.b_z);
  get_vec(p.gru.b_r);
  get_vec(p.gru.b_c);
  get_vec(p.readout);
  get_vec(p.h0);
  return p;
}

OptimizerParams init_optimizer_params(long n, RngStream& rng) {
  OptimizerParams p = OptimizerParams::zeros(n);
  auto normal_vec = [&](Vec& v, double std) {
    for (long i = 0; i < v.size(); ++i) v(i) = std * rng.normal();
  };
  auto orthogonal = [&](Mat& m) {
    Mat gauss(n, n);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) gauss(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(gauss);
    Mat q = qr.householderQ() * Mat::Identity(n, n);
    // Sign fix so the result is Haar distributed.
    const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (long j = 0; j < n; ++j) {
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    m = q;
  };
  normal_vec(p.gru.w_z, 0.01);
  normal_vec(p.gru.w_r, 0.01);
  normal_vec(p.gru.w_c, 0.01);
  orthogonal(p.gru.u_z);
  orthogonal(p.gru.u_r);
  orthogonal(p.gru.u_c);
  normal_vec(p.gru.b_z, 0.01);
  normal_vec(p.gru.b_r, 0.01);
  normal_vec(p.gru.b_c, 0.01);
  normal_vec(p.readout, 1e-3);
  p.h0.setZero();
  return p;
}

Mat gru_step(const GruParams& p, const Mat& h, const Vec& g, GruGates* gates) {
  const long n = p.hidden_size();
  if (h.rows() != n) throw DimensionError("gru_step: state rows must equal hidden size");
  if (g.size() != h.cols()) throw DimensionError("gru_step: one input per state column");

  Mat az = p.u_z * h + p.w_z * g.transpose();
  az.colwise() += p.b_z;
  Mat ar = p.u_r * h + p.w_r * g.transpose();
  ar.colwise() += p.b_r;
  const Mat z = sigmoid(az.array()).matrix();
  const Mat r = sigmoid(ar.array()).matrix();
  Mat ac = p.u_c * r.cwiseProduct(h) + p.w_c * g.transpose();
  ac.colwise() += p.b_c;
  Mat c = ac.array().tanh().matrix();
  Mat out = ((1.0 - z.array()) * h.array() + z.array() * c.array()).matrix();
  if (gates != nullptr) {
    gates->z = z;
    gates->r = r;
    gates->c = std::move(c);
  }
  return out;
}

Vec gru_cell(const GruParams& p, const Vec& h, double g) {
  Vec gv(1);
  gv(0) = g;
  return gru_step(p, h, gv);
}

Mat gru_state_jacobian(const GruParams& p, const Vec& h, double g) {
  const long n = p.hidden_size();
  if (h.size() != n) throw DimensionError("gru_state_jacobian: state length mismatch");
  GruGates gates;
  Vec gv(1);
  gv(0) = g;
  gru_step(p, h, gv, &gates);
  const auto z = gates.z.col(0).array();
  const auto r = gates.r.col(0).array();
  const auto c = gates.c.col(0).array();
  const auto ha = h.array();

  // dz/dh = diag(z(1-z)) U_z, dr/dh = diag(r(1-r)) U_r
  const Mat dz = (z * (1.0 - z)).matrix().asDiagonal() * p.u_z;
  const Mat dr = (r * (1.0 - r)).matrix().asDiagonal() * p.u_r;
  // d(r*h)/dh = diag(r) + diag(h) dr/dh
  Mat drh = ha.matrix().asDiagonal() * dr;
  drh.diagonal() += r.matrix();
  const Mat dc = (1.0 - c.square()).matrix().asDiagonal() * (p.u_c * drh);

  Mat jac = (c - ha).matrix().asDiagonal() * dz + z.matrix().asDiagonal() * dc;
  jac.diagonal() += (1.0 - z).matrix();
  return jac;
}

Vec gru_input_jacobian(const GruParams& p, const Vec& h, double g) {
  const long n = p.hidden_size();
  if (h.size() != n) throw DimensionError("gru_input_jacobian: state length mismatch");
  GruGates gates;
  Vec gv(1);
  gv(0) = g;
  gru_step(p, h, gv, &gates);
  const auto z = gates.z.col(0).array();
  const auto r = gates.r.col(0).array();
  const auto c = gates.c.col(0).array();

  const Vec dz = (z * (1.0 - z) * p.w_z.array()).matrix();
  const Vec dr = (r * (1.0 - r) * p.w_r.array()).matrix();
  const Vec dc = ((1.0 - c.square()) *
                  (p.w_c + p.u_c * (h.array() * dr.array()).matrix()).array())
                     .matrix();
  return ((c - h.array()) * dz.array() + z * dc.array()).matrix();
}

double apply_readout(const Vec& w, const Vec& h) {
  if (w.size() != h.size()) throw DimensionError("apply_readout: length mismatch");
  return w.dot(h);
}

}  // namespace lopt
