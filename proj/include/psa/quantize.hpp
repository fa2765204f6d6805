#pragma once

#include <Eigen/Core>

#include "psa/workload.hpp"

namespace psa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Linear (uniform, symmetric) quantizer configuration.  Signed mode is for
/// weights, unsigned for post-ReLU activations.  Rounding is fixed to
/// half-away-from-zero for cross-platform reproducibility.
struct QuantizerConfig {
  int bits = 8;
  bool is_signed = true;

  QuantizerConfig() = default;
  QuantizerConfig(int b, bool s) : bits(b), is_signed(s) {
    if (bits < 1 || bits > 16)
      throw std::invalid_argument("quantizer bits must be in [1,16]");
  }

  static QuantizerConfig weights(int bits) { return {bits, true}; }
  static QuantizerConfig activations(int bits) { return {bits, false}; }

  /// Largest representable integer level.
  std::int64_t max_level() const {
    const std::int64_t d =
        is_signed ? ((std::int64_t{1} << (bits - 1)) - 1)
                  : ((std::int64_t{1} << bits) - 1);
    return d > 0 ? d : 0;
  }
};

struct QuantResult {
  Matrix values;  // dequantized: round(v/scale)*scale
  double scale = 1.0;
};

/// Signed: scale = max|v| / (2^(bits-1)-1); unsigned: scale = max(v) /
/// (2^bits-1).  All-zero input returns zeros with scale 1.  Unsigned mode
/// rejects negative input.
QuantResult quantize_tensor(const Eigen::Ref<const Matrix>& values,
                            const QuantizerConfig& cfg);

/// Fixed-grid unsigned quantization of [0,1]-domain data (network inputs):
/// scale = 1/(2^bits - 1) independent of the values, so a sample quantizes
/// identically in any batch.
Matrix quantize_domain01(const Eigen::Ref<const Matrix>& values, int bits);

}  // namespace psa
