#include "psa/quantize.hpp"

#include <cmath>

namespace psa {

QuantResult quantize_tensor(const Eigen::Ref<const Matrix>& values,
                            const QuantizerConfig& cfg) {
  if (values.size() == 0)
    throw std::invalid_argument("quantize_tensor: empty tensor");
  if (!cfg.is_signed && (values.array() < 0.0).any())
    throw std::invalid_argument(
        "quantize_tensor: negative input in unsigned mode");

  QuantResult out;
  const double vmax =
      cfg.is_signed ? values.array().abs().maxCoeff() : values.maxCoeff();
  if (vmax == 0.0) {
    out.values = Matrix::Zero(values.rows(), values.cols());
    out.scale = 1.0;
    return out;
  }

  // Signed 1-bit has no nonzero level (2^0-1 = 0); the clip bound collapses
  // everything to zero.
  const std::int64_t level = cfg.max_level();
  if (level == 0) {
    out.values = Matrix::Zero(values.rows(), values.cols());
    out.scale = vmax;
    return out;
  }

  const double scale = vmax / static_cast<double>(level);
  const double lo = cfg.is_signed ? -static_cast<double>(level) : 0.0;
  const double hi = static_cast<double>(level);
  out.scale = scale;
  // std::round is half-away-from-zero.
  out.values = values.unaryExpr([&](double v) {
    double q = std::round(v / scale);
    if (q < lo) q = lo;
    if (q > hi) q = hi;
    return q * scale;
  });
  return out;
}

Matrix quantize_domain01(const Eigen::Ref<const Matrix>& values, int bits) {
  if (bits < 1 || bits > 16)
    throw std::invalid_argument("quantize_domain01: bits must be in [1,16]");
  const double levels = static_cast<double>((std::int64_t{1} << bits) - 1);
  return values.unaryExpr([&](double v) {
    double q = std::round(v * levels);
    if (q < 0.0) q = 0.0;
    if (q > levels) q = levels;
    return q / levels;
  });
}

}  // namespace psa
