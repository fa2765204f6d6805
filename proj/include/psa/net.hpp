#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psa/quantize.hpp"
#include "psa/rng.hpp"
#include "psa/workload.hpp"

namespace psa {

/// One batch-norm statistics/affine entry.  Switchable batch normalization
/// keeps an independent entry per trained precision.
struct SbnEntry {
  Vector running_mean;
  Vector running_var;
  Vector gamma;
  Vector beta;

  static SbnEntry identity(int features);
};

struct SbnLayer {
  std::map<std::string, SbnEntry> entries;  // keyed by Precision::str()
  double momentum = 0.1;
  double epsilon = 1e-5;

  SbnEntry& at(const Precision& q);
  const SbnEntry& at(const Precision& q) const;
};

enum class Mode { train, eval };

/// Fixed-architecture MLP: input D -> hidden H -> hidden H -> classes, SBN
/// and ReLU after each hidden affine layer, hand-written forward/backward.
/// Weights quantize at weight_bits, hidden activations at act_bits; the
/// backward pass treats both quantizers as identity (straight-through).
struct TinyNet {
  int input_dim = 2;
  int hidden = 64;
  int classes = 2;
  PrecisionSet trained_set;

  Matrix W1, W2, W3;
  Vector b1, b2, b3;
  SbnLayer sbn1, sbn2;

  std::uint64_t version = 0;  // bumped on every parameter update

  static TinyNet init(int input_dim, int hidden, int classes,
                      const PrecisionSet& set, Rng& rng);

  /// Nearest trained precision by L1 distance in (weight_bits, act_bits).
  Precision nearest_trained(const Precision& q) const;
};

struct ForwardCache {
  std::optional<Precision> q;  // nullopt = float reference path
  Mode mode = Mode::eval;
  std::uint64_t net_version = 0;

  Matrix input;
  // Quantized weights actually used by each affine layer.
  Matrix Wq1, Wq2, Wq3;
  // Pre-BN activations, normalized activations, post-ReLU/quantized inputs
  // of the next layer.
  Matrix z1, xhat1, a1;
  Matrix z2, xhat2, a2;
  // ReLU pass-through masks taken before activation quantization.
  Matrix mask1, mask2;
  Matrix logits;
  // Batch statistics each SBN consumed (batch moments in train mode,
  // running stats in eval mode).
  Vector mean1, var1, mean2, var2;
};

struct Gradients {
  Matrix dW1, dW2, dW3;
  Vector db1, db2, db3;
  Vector dgamma1, dbeta1, dgamma2, dbeta2;
  Matrix dinput;
};

/// Forward pass.  q == nullopt runs the float reference path (no
/// quantization).  Train mode uses batch statistics and updates the running
/// stats of entry q; eval mode reads running stats and never mutates.
/// Throws if q is not in the trained set.
std::pair<Matrix, ForwardCache> forward(TinyNet& net,
                                        const Eigen::Ref<const Matrix>& x,
                                        const std::optional<Precision>& q,
                                        Mode mode);

/// Cross-entropy loss (mean over batch) and its logit gradient.
double cross_entropy(const Eigen::Ref<const Matrix>& logits,
                     const std::vector<int>& labels, Matrix* dlogits = nullptr);

/// Backward from an arbitrary dlogits; gradients of every parameter plus the
/// input.  The cache must come from a forward on the current net state.
Gradients backward_from_logits(const TinyNet& net, const ForwardCache& cache,
                               const Eigen::Ref<const Matrix>& dlogits);

/// Cross-entropy backward against integer labels.
Gradients backward(const TinyNet& net, const ForwardCache& cache,
                   const std::vector<int>& labels);

/// theta <- theta - lr * grad on weights, biases, and SBN affine parameters
/// of entry q; running statistics untouched.
void sgd_step(TinyNet& net, const Gradients& g, double lr, const Precision& q);
void sgd_step_float(TinyNet& net, const Gradients& g, double lr);

/// Inference-only network with the SBN of one precision folded into
/// per-layer scales and biases (no normalization modules left).
struct FoldedNet {
  Precision q;
  int act_bits = 8;
  Matrix W1, W2, W3;  // effective real weights (quantized values x fold)
  Vector b1, b2, b3;
};

FoldedNet fold_sbn(TinyNet& net, const Precision& q);
Matrix forward_folded(const FoldedNet& net, const Eigen::Ref<const Matrix>& x);

/// Accuracy of argmax(logits) against labels.
double accuracy(const Eigen::Ref<const Matrix>& logits,
                const std::vector<int>& labels);

/// Checkpoint round trip (JSON; doubles serialized losslessly).
void save_checkpoint(const TinyNet& net, const std::string& path);
TinyNet load_checkpoint(const std::string& path);
std::string checkpoint_text(const TinyNet& net);
TinyNet checkpoint_from_text(const std::string& text);

}  // namespace psa
