#pragma once

#include <cstdint>
#include <string>

#include "lopt/rng.hpp"
#include "lopt/tensor.hpp"

namespace lopt {

/// GRU with a scalar input:
///   z  = sigmoid(w_z g + U_z h + b_z)
///   r  = sigmoid(w_r g + U_r h + b_r)
///   c  = tanh(w_c g + U_c (r * h) + b_c)
///   h' = (1 - z) * h + z * c
struct GruParams {
  Vec w_z, w_r, w_c;
  Mat u_z, u_r, u_c;
  Vec b_z, b_r, b_c;

  static GruParams zeros(long n);
  long hidden_size() const { return b_z.size(); }
  void validate() const;
};

/// Everything meta-training updates: the cell, the readout and the shared
/// initial state.
struct OptimizerParams {
  GruParams gru;
  Vec readout;
  Vec h0;

  static OptimizerParams zeros(long n);
  long hidden_size() const { return gru.hidden_size(); }
  void validate() const;

  long flat_size() const;
  /// Order: w_z w_r w_c U_z U_r U_c (row-major) b_z b_r b_c readout h0.
  Vec flatten() const;
  static OptimizerParams unflatten(const Vec& flat, long n);
};

/// Orthogonal recurrent matrices, N(0, 0.01^2) input weights and biases,
/// N(0, 1e-3^2) readout, zero initial state.
OptimizerParams init_optimizer_params(long n, RngStream& rng);

/// Gate activations for a batch of columns (one column per coordinate).
struct GruGates {
  Mat z, r, c;
};

Vec gru_cell(const GruParams& p, const Vec& h, double g);

/// Advances every column of `h` (n x d) with its own scalar input g(j).
/// Gate activations are written to `gates` when non-null.
Mat gru_step(const GruParams& p, const Mat& h, const Vec& g, GruGates* gates = nullptr);

/// dh'/dh at (h, g), n x n.
Mat gru_state_jacobian(const GruParams& p, const Vec& h, double g);
/// dh'/dg at (h, g), length n.
Vec gru_input_jacobian(const GruParams& p, const Vec& h, double g);

/// x update from a post-step state.
double apply_readout(const Vec& w, const Vec& h);

}  // namespace lopt
