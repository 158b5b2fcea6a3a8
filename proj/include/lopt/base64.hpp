#pragma once

#include <span>
#include <string>
#include <vector>

#include "lopt/tensor.hpp"

namespace lopt {

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

/// Little-endian float64 payload, independent of host byte order.
std::string encode_f64(std::span<const double> values);
std::vector<double> decode_f64(const std::string& text);

}  // namespace lopt
