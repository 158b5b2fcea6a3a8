#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lopt/error.hpp"
#include "lopt/tasks.hpp"

namespace lopt {
namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajorMat>;
using Weights = Eigen::Map<RowMajorMat>;

struct LayerView {
  long weight_offset;
  long bias_offset;
  long fan_in;
  long fan_out;
};

std::vector<LayerView> layout(const MlpSpec& spec) {
  std::vector<LayerView> layers;
  long offset = 0;
  for (std::size_t l = 1; l < spec.widths.size(); ++l) {
    LayerView v{offset, 0, spec.widths[l - 1], spec.widths[l]};
    offset += v.fan_in * v.fan_out;
    v.bias_offset = offset;
    offset += v.fan_out;
    layers.push_back(v);
  }
  return layers;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Activations per layer: acts[0] is the input (width x n), acts[l] = tanh(Z_l)
// for hidden layers and the raw logits for the last layer.
std::vector<Mat> forward(const Vec& x, const std::vector<LayerView>& layers, const Mat& input) {
  std::vector<Mat> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerView& v = layers[l];
    ConstWeights w(x.data() + v.weight_offset, v.fan_out, v.fan_in);
    Mat z = w * acts.back();
    z.colwise() += x.segment(v.bias_offset, v.fan_out);
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

long MlpSpec::parameter_count() const {
  long count = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) count += widths[l - 1] * widths[l] + widths[l];
  return count;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw DimensionError("MlpSpec: need at least input and output widths");
  if (widths.front() != 2) throw DimensionError("MlpSpec: input width must be 2 (two moons)");
  if (widths.back() != 1) throw DimensionError("MlpSpec: output width must be 1 (binary logit)");
  for (int w : widths) {
    if (w < 1) throw DimensionError("MlpSpec: widths must be positive");
  }
}

MlpObjective::MlpObjective(std::shared_ptr<const TwoMoonsDataset> data, MlpSpec spec)
    : data_(std::move(data)), spec_(std::move(spec)) {
  spec_.validate();
  if (!data_ || data_->size() == 0) throw DimensionError("MlpObjective: empty dataset");
}

Vec MlpObjective::logits(const Vec& x) const {
  const auto layers = layout(spec_);
  const Mat input = data_->points.transpose();
  return forward(x, layers, input).back().row(0).transpose();
}

double MlpObjective::loss(const Vec& x) const {
  const Vec z = logits(x);
  const Vec& y = data_->labels;
  double total = 0.0;
  for (long i = 0; i < z.size(); ++i) total += softplus(z(i)) - y(i) * z(i);
  return total / static_cast<double>(z.size());
}

Vec MlpObjective::gradient(const Vec& x) const {
  Vec grad;
  loss_and_gradient(x, grad);
  return grad;
}

double MlpObjective::loss_and_gradient(const Vec& x, Vec& grad) const {
  const auto layers = layout(spec_);
  const Mat input = data_->points.transpose();
  const std::vector<Mat> acts = forward(x, layers, input);
  const Vec& y = data_->labels;
  const long n = input.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  double total = 0.0;
  Mat delta(1, n);
  for (long i = 0; i < n; ++i) {
    const double z = acts.back()(0, i);
    total += softplus(z) - y(i) * z;
    delta(0, i) = (sigmoid(z) - y(i)) * inv_n;
  }

  grad.setZero(x.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerView& v = layers[l];
    const Mat& a_prev = acts[l];
    Weights(grad.data() + v.weight_offset, v.fan_out, v.fan_in) = delta * a_prev.transpose();
    grad.segment(v.bias_offset, v.fan_out) = delta.rowwise().sum();
    if (l > 0) {
      ConstWeights w(x.data() + v.weight_offset, v.fan_out, v.fan_in);
      delta = ((w.transpose() * delta).array() * (1.0 - a_prev.array().square())).matrix();
    }
  }
  return total * inv_n;
}

Vec MlpObjective::hvp(const Vec& x, const Vec& dir) const {
  if (dir.size() != x.size()) throw DimensionError("MlpObjective::hvp: direction length mismatch");
  const auto layers = layout(spec_);
  const Mat input = data_->points.transpose();
  const std::vector<Mat> acts = forward(x, layers, input);
  const Vec& y = data_->labels;
  const long n = input.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Tangent forward pass: r_acts[l] = directional derivative of acts[l].
  std::vector<Mat> r_acts;
  r_acts.reserve(acts.size());
  r_acts.push_back(Mat::Zero(input.rows(), n));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerView& v = layers[l];
    ConstWeights w(x.data() + v.weight_offset, v.fan_out, v.fan_in);
    ConstWeights dw(dir.data() + v.weight_offset, v.fan_out, v.fan_in);
    Mat rz = dw * acts[l] + w * r_acts[l];
    rz.colwise() += dir.segment(v.bias_offset, v.fan_out);
    if (l + 1 < layers.size()) {
      rz = ((1.0 - acts[l + 1].array().square()) * rz.array()).matrix();
    }
    r_acts.push_back(std::move(rz));
  }

  // Reverse pass carrying both the adjoint and its tangent.
  Mat delta(1, n);
  Mat r_delta(1, n);
  for (long i = 0; i < n; ++i) {
    const double s = sigmoid(acts.back()(0, i));
    delta(0, i) = (s - y(i)) * inv_n;
    r_delta(0, i) = s * (1.0 - s) * r_acts.back()(0, i) * inv_n;
  }

  Vec out = Vec::Zero(x.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerView& v = layers[l];
    const Mat& a_prev = acts[l];
    const Mat& ra_prev = r_acts[l];
    Weights(out.data() + v.weight_offset, v.fan_out, v.fan_in) =
        r_delta * a_prev.transpose() + delta * ra_prev.transpose();
    out.segment(v.bias_offset, v.fan_out) = r_delta.rowwise().sum();
    if (l > 0) {
      ConstWeights w(x.data() + v.weight_offset, v.fan_out, v.fan_in);
      ConstWeights dw(dir.data() + v.weight_offset, v.fan_out, v.fan_in);
      const Mat back = w.transpose() * delta;
      const Mat r_back = dw.transpose() * delta + w.transpose() * r_delta;
      const auto deriv = 1.0 - a_prev.array().square();
      r_delta = (r_back.array() * deriv - 2.0 * back.array() * a_prev.array() * ra_prev.array())
                    .matrix();
      delta = (back.array() * deriv).matrix();
    }
  }
  return out;
}

}  // namespace lopt
