#pragma once

#include <vector>

#include "psa/net.hpp"

namespace psa {

enum class AttackLoss { cross_entropy, cw_margin };
enum class AttackInit { zero, random_uniform };

/// L-inf attack configuration.  Epsilon and alpha are in input units (the
/// CLI quotes them in /255 pixel units and converts).
struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int steps = 20;
  int restarts = 1;
  AttackInit init = AttackInit::random_uniform;
  AttackLoss loss = AttackLoss::cross_entropy;

  void validate() const {
    if (epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
    if (steps > 0 && alpha <= 0)
      throw std::invalid_argument("alpha must be > 0 when steps > 0");
    if (steps < 0) throw std::invalid_argument("steps must be >= 0");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  }
};

/// Attack objective value per sample plus its logit gradient; attacks ascend
/// this.  cross_entropy is the CE loss; cw_margin is -max(z_y - max_{j!=y}
/// z_j, 0), which pushes the margin down and goes flat once the sample is
/// misclassified.
void attack_loss(AttackLoss kind, const Eigen::Ref<const Matrix>& logits,
                 const std::vector<int>& labels, Vector* per_sample,
                 Matrix* dlogits);

/// Single-step sign attack: clamp_01(x + eps * sign(grad_x loss)).
Matrix fgsm(TinyNet& net, const Precision& q,
            const Eigen::Ref<const Matrix>& x, const std::vector<int>& labels,
            double epsilon, AttackLoss loss = AttackLoss::cross_entropy);

/// Projected gradient descent within the eps ball, clamped to [0,1].
/// With restarts > 1 keeps, per sample, the restart with the highest final
/// loss (ties to the first).  Forward passes run in eval mode.
Matrix pgd(TinyNet& net, const Precision& q, const Eigen::Ref<const Matrix>& x,
           const std::vector<int>& labels, const AttackConfig& cfg, Rng& rng);

/// Ensemble PGD: each gradient step ascends the loss of the mean logits
/// over every precision in the set (precision-aware adaptive attack).
Matrix e_pgd(TinyNet& net, const PrecisionSet& set,
             const Eigen::Ref<const Matrix>& x, const std::vector<int>& labels,
             const AttackConfig& cfg, Rng& rng);

}  // namespace psa
