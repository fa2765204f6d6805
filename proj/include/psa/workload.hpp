#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "psa/rng.hpp"

namespace psa {

/// Execution precision: weight and activation bit-widths, each in [1,16].
struct Precision {
  int weight_bits = 8;
  int act_bits = 8;

  Precision() = default;
  Precision(int w, int a) : weight_bits(w), act_bits(a) { validate(); }

  /// Symmetric precision (same weight/activation width).
  static Precision sym(int bits) { return Precision(bits, bits); }

  void validate() const {
    if (weight_bits < 1 || weight_bits > 16 || act_bits < 1 || act_bits > 16)
      throw std::invalid_argument("precision bits must be in [1,16]");
  }

  bool operator==(const Precision& o) const {
    return weight_bits == o.weight_bits && act_bits == o.act_bits;
  }
  bool operator!=(const Precision& o) const { return !(*this == o); }
  bool operator<(const Precision& o) const {
    if (weight_bits != o.weight_bits) return weight_bits < o.weight_bits;
    return act_bits < o.act_bits;
  }

  std::string str() const {
    return "w" + std::to_string(weight_bits) + "a" + std::to_string(act_bits);
  }
  /// Inverse of str(); accepts "w4a8" and the symmetric shorthand "4".
  static Precision parse(const std::string& s);
};

/// Ordered, duplicate-free set of candidate precisions.
class PrecisionSet {
 public:
  PrecisionSet() = default;
  explicit PrecisionSet(std::vector<Precision> members)
      : members_(std::move(members)) {
    if (members_.empty())
      throw std::invalid_argument("precision set must be nonempty");
    for (std::size_t i = 0; i < members_.size(); ++i)
      for (std::size_t j = i + 1; j < members_.size(); ++j)
        if (members_[i] == members_[j])
          throw std::invalid_argument("duplicate precision " +
                                      members_[i].str());
  }

  /// Symmetric set from a list of bit-widths, e.g. {4,6,8,16}.
  static PrecisionSet symmetric(const std::vector<int>& bits) {
    std::vector<Precision> m;
    m.reserve(bits.size());
    for (int b : bits) m.push_back(Precision::sym(b));
    return PrecisionSet(std::move(m));
  }

  /// Parse comma-separated members, e.g. "4,6,8,16" or "w4a4,w8a8".
  static PrecisionSet parse(const std::string& s);

  const std::vector<Precision>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const Precision& operator[](std::size_t i) const { return members_[i]; }

  bool contains(const Precision& p) const {
    for (const auto& m : members_)
      if (m == p) return true;
    return false;
  }

  /// Uniform draw.
  const Precision& sample(Rng& rng) const {
    return members_[rng.uniform_int(static_cast<std::uint64_t>(members_.size()))];
  }

  std::string str() const;

 private:
  std::vector<Precision> members_;
};

/// One convolution or fully-connected workload layer.  FC layers are stored
/// as degenerate convolutions (R=S=E=F=1) so the cost model has one path.
struct LayerShape {
  enum class Kind { conv, fc };
  Kind kind = Kind::conv;
  std::string name;
  std::int64_t N = 1;  // batch
  std::int64_t K = 1;  // output channels
  std::int64_t C = 1;  // input channels
  std::int64_t R = 1, S = 1;  // kernel height/width
  std::int64_t E = 1, F = 1;  // output height/width
  std::int64_t stride = 1;

  void validate() const;

  /// Total multiply-accumulates: N*K*C*R*S*E*F.
  std::int64_t mac_count() const { return N * K * C * R * S * E * F; }

  /// Input spatial extent implied by output size, kernel and stride.
  std::int64_t input_h() const { return (E - 1) * stride + R; }
  std::int64_t input_w() const { return (F - 1) * stride + S; }
};

struct Network {
  std::string name;
  std::vector<LayerShape> layers;

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (const auto& l : layers) l.validate();
  }
};

/// Parse a workload document (JSON, schema in README).  Throws
/// std::runtime_error with a field locus on malformed input.
Network parse_workload(const std::string& path);
Network parse_workload_text(const std::string& text);

/// Serialize back to the same document form; parse(serialize(n)) == n.
std::string serialize_workload(const Network& net);

}  // namespace psa
