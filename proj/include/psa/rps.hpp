#pragma once

#include <functional>
#include <optional>

#include "psa/attacks.hpp"
#include "psa/dataset.hpp"
#include "psa/net.hpp"

namespace psa {

/// Random-precision-switch adversarial training configuration.  Every batch
/// draws one precision uniformly from the set, generates the inner-loop
/// adversary at that precision, and updates the model at it.
struct RPSTrainConfig {
  PrecisionSet precision_set;
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.05;
  AttackConfig attack;   // inner maximization (PGD-7 style)
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    attack.validate();
  }
};

/// Robust accuracy grid: rows = attack precision, cols = inference precision.
struct TransferMatrix {
  std::vector<Precision> precisions;
  Matrix robust_acc;           // |P| x |P|
  std::vector<double> natural_acc;  // per inference precision

  double mean_diagonal() const;
  double mean_off_diagonal() const;
  std::string to_csv() const;
};

/// Adversarial training with a per-batch random precision switch.  The
/// attack runs in eval mode against the current weights; the parameter
/// update runs in train mode (batch stats + running-stat update) at the
/// same precision.
TinyNet rps_train(const Dataset& data, TinyNet net, const RPSTrainConfig& cfg);

/// One uniform precision draw per input column, eval at that precision.
struct RpsInference {
  std::vector<int> predictions;
  std::vector<Precision> chosen;
};
RpsInference rps_infer(TinyNet& net, const Eigen::Ref<const Matrix>& x,
                       const PrecisionSet& set, Rng& rng);

/// Entry (i,j): accuracy on PGD examples generated at precision i and
/// evaluated at precision j.  Diagonal = white-box robust accuracy.  Rows
/// use seed-derived streams, so the result is independent of `jobs`.
TransferMatrix transfer_matrix(TinyNet& net, const Dataset& data,
                               const AttackConfig& attack,
                               const PrecisionSet& set, std::uint64_t seed,
                               int jobs = 1);

/// Attack / inference precision policies for robust_accuracy.
struct PrecisionPolicy {
  enum class Kind { fixed, random } kind = Kind::random;
  Precision fixed_q = Precision::sym(8);
  PrecisionSet set;  // used by random

  static PrecisionPolicy fixed(const Precision& q);
  static PrecisionPolicy random(const PrecisionSet& s);
};

/// Per-inference energy proxy: bit-operations (weight_bits x act_bits x MAC
/// count of the MLP) unless a caller supplies a hardware-backed evaluator.
using EnergyFn = std::function<double(const Precision&)>;
double bitops_energy_proxy(const TinyNet& net, const Precision& q);

struct RobustAccuracyReport {
  double natural_acc = 0.0;
  double robust_acc = 0.0;
  double mean_energy = 0.0;  // mean over per-sample inference draws
};

/// Per-sample independent draws of attack precision and inference precision
/// per the two policies.
RobustAccuracyReport robust_accuracy(TinyNet& net, const Dataset& data,
                                     const AttackConfig& attack,
                                     const PrecisionPolicy& attack_policy,
                                     const PrecisionPolicy& infer_policy,
                                     Rng& rng,
                                     const EnergyFn& energy = nullptr);

}  // namespace psa
