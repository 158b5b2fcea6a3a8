#include "lopt/checkpoint.hpp"

#include <json.hpp>
#include <string>

#include "lopt/base64.hpp"
#include "lopt/error.hpp"
#include "lopt/io.hpp"

namespace lopt {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;
constexpr const char* kEncoding = "base64-float64-le";

json encode_vec(const Vec& v) {
  return {{"shape", {v.size()}}, {"data", encode_f64({v.data(), static_cast<std::size_t>(v.size())})}};
}

json encode_mat(const Mat& m) {
  // Row-major on disk.
  std::vector<double> values;
  values.reserve(m.size());
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  return {{"shape", {m.rows(), m.cols()}}, {"data", encode_f64(values)}};
}

Vec decode_vec(const json& node, long n, const std::string& name) {
  const auto shape = node.at("shape").get<std::vector<long>>();
  const auto values = decode_f64(node.at("data").get<std::string>());
  if (shape.size() != 1 || shape[0] != n || static_cast<long>(values.size()) != n) {
    throw FormatError("checkpoint: array '" + name + "' has the wrong shape");
  }
  return Eigen::Map<const Vec>(values.data(), n);
}

Mat decode_mat(const json& node, long n, const std::string& name) {
  const auto shape = node.at("shape").get<std::vector<long>>();
  const auto values = decode_f64(node.at("data").get<std::string>());
  if (shape.size() != 2 || shape[0] != n || shape[1] != n ||
      static_cast<long>(values.size()) != n * n) {
    throw FormatError("checkpoint: array '" + name + "' has the wrong shape");
  }
  Mat m(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) m(i, j) = values[i * n + j];
  return m;
}

}  // namespace

void LearnedOptimizerCheckpoint::validate() const {
  params.validate();
  if (meta.hidden_size != params.hidden_size()) {
    throw DimensionError("checkpoint: metadata hidden_size " + std::to_string(meta.hidden_size) +
                         " does not match parameters (" + std::to_string(params.hidden_size()) +
                         ")");
  }
}

std::string checkpoint_to_json(const LearnedOptimizerCheckpoint& ckpt) {
  ckpt.validate();
  const GruParams& g = ckpt.params.gru;
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["encoding"] = kEncoding;
  doc["metadata"] = {{"task", ckpt.meta.task},
                     {"seed", ckpt.meta.seed},
                     {"meta_step", ckpt.meta.meta_step},
                     {"hidden_size", ckpt.meta.hidden_size}};
  doc["arrays"] = {{"w_z", encode_vec(g.w_z)},          {"w_r", encode_vec(g.w_r)},
                   {"w_c", encode_vec(g.w_c)},          {"u_z", encode_mat(g.u_z)},
                   {"u_r", encode_mat(g.u_r)},          {"u_c", encode_mat(g.u_c)},
                   {"b_z", encode_vec(g.b_z)},          {"b_r", encode_vec(g.b_r)},
                   {"b_c", encode_vec(g.b_c)},          {"readout", encode_vec(ckpt.params.readout)},
                   {"h0", encode_vec(ckpt.params.h0)}};
  return doc.dump(1) + "\n";
}

LearnedOptimizerCheckpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw FormatError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    if (doc.at("encoding").get<std::string>() != kEncoding) {
      throw FormatError("checkpoint: unsupported array encoding");
    }
    LearnedOptimizerCheckpoint ckpt;
    const json& meta = doc.at("metadata");
    ckpt.meta.format_version = version;
    ckpt.meta.task = meta.at("task").get<std::string>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.meta.meta_step = meta.at("meta_step").get<long>();
    ckpt.meta.hidden_size = meta.at("hidden_size").get<long>();
    const long n = ckpt.meta.hidden_size;
    if (n < 1) throw FormatError("checkpoint: hidden_size must be positive");

    const json& arrays = doc.at("arrays");
    GruParams& g = ckpt.params.gru;
    g.w_z = decode_vec(arrays.at("w_z"), n, "w_z");
    g.w_r = decode_vec(arrays.at("w_r"), n, "w_r");
    g.w_c = decode_vec(arrays.at("w_c"), n, "w_c");
    g.u_z = decode_mat(arrays.at("u_z"), n, "u_z");
    g.u_r = decode_mat(arrays.at("u_r"), n, "u_r");
    g.u_c = decode_mat(arrays.at("u_c"), n, "u_c");
    g.b_z = decode_vec(arrays.at("b_z"), n, "b_z");
    g.b_r = decode_vec(arrays.at("b_r"), n, "b_r");
    g.b_c = decode_vec(arrays.at("b_c"), n, "b_c");
    ckpt.params.readout = decode_vec(arrays.at("readout"), n, "readout");
    ckpt.params.h0 = decode_vec(arrays.at("h0"), n, "h0");
    ckpt.validate();
    return ckpt;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: missing or malformed field: ") + e.what());
  }
}

void save_checkpoint(const LearnedOptimizerCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_json(ckpt));
}

LearnedOptimizerCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path));
}

}  // namespace lopt
