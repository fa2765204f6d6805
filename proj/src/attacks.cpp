#include "psa/attacks.hpp"

#include <cmath>

namespace psa {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Matrix clamp01(Matrix m) {
  return m.cwiseMax(0.0).cwiseMin(1.0);
}

/// Loss gradient w.r.t. the input for the averaged logits over `qs`.
/// Returns the per-sample loss values of the ensemble as well.
Matrix input_gradient(TinyNet& net, const std::vector<Precision>& qs,
                      const Eigen::Ref<const Matrix>& x,
                      const std::vector<int>& labels, AttackLoss loss,
                      Vector* per_sample) {
  Matrix mean_logits;
  std::vector<ForwardCache> caches;
  caches.reserve(qs.size());
  for (const auto& q : qs) {
    auto [logits, cache] = forward(net, x, q, Mode::eval);
    if (mean_logits.size() == 0)
      mean_logits = logits;
    else
      mean_logits += logits;
    caches.push_back(std::move(cache));
  }
  mean_logits /= static_cast<double>(qs.size());

  Matrix dlogits;
  attack_loss(loss, mean_logits, labels, per_sample, &dlogits);
  dlogits /= static_cast<double>(qs.size());

  Matrix grad = Matrix::Zero(x.rows(), x.cols());
  for (const auto& cache : caches)
    grad += backward_from_logits(net, cache, dlogits).dinput;
  return grad;
}

/// Forward-only per-sample ensemble loss.
Vector ensemble_loss(TinyNet& net, const std::vector<Precision>& qs,
                     const Eigen::Ref<const Matrix>& x,
                     const std::vector<int>& labels, AttackLoss loss) {
  Matrix mean_logits;
  for (const auto& q : qs) {
    auto [logits, cache] = forward(net, x, q, Mode::eval);
    if (mean_logits.size() == 0)
      mean_logits = logits;
    else
      mean_logits += logits;
  }
  mean_logits /= static_cast<double>(qs.size());
  Vector values;
  attack_loss(loss, mean_logits, labels, &values, nullptr);
  return values;
}

}  // namespace

void attack_loss(AttackLoss kind, const Eigen::Ref<const Matrix>& logits,
                 const std::vector<int>& labels, Vector* per_sample,
                 Matrix* dlogits) {
  const auto B = logits.cols();
  if (static_cast<std::size_t>(B) != labels.size())
    throw std::invalid_argument("attack_loss: label count mismatch");
  if (per_sample) per_sample->resize(B);
  if (dlogits) *dlogits = Matrix::Zero(logits.rows(), logits.cols());

  if (kind == AttackLoss::cross_entropy) {
    for (Eigen::Index i = 0; i < B; ++i) {
      const double m = logits.col(i).maxCoeff();
      Vector e = (logits.col(i).array() - m).exp();
      const double Z = e.sum();
      if (per_sample)
        (*per_sample)(i) = -std::log(e(labels[i]) / Z);
      if (dlogits) {
        dlogits->col(i) = e / Z;
        (*dlogits)(labels[i], i) -= 1.0;
      }
    }
    return;
  }

  // cw_margin: -max(z_y - max_{j!=y} z_j, 0); kappa fixed at 0.
  for (Eigen::Index i = 0; i < B; ++i) {
    const int y = labels[i];
    Eigen::Index best_other = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
      if (static_cast<int>(j) == y) continue;
      if (logits(j, i) > best) {
        best = logits(j, i);
        best_other = j;
      }
    }
    const double margin = logits(y, i) - best;
    if (per_sample) (*per_sample)(i) = -std::max(margin, 0.0);
    if (dlogits && margin > 0.0) {
      (*dlogits)(y, i) = -1.0;
      (*dlogits)(best_other, i) = 1.0;
    }
  }
}

Matrix fgsm(TinyNet& net, const Precision& q,
            const Eigen::Ref<const Matrix>& x, const std::vector<int>& labels,
            double epsilon, AttackLoss loss) {
  if (epsilon < 0) throw std::invalid_argument("epsilon must be >= 0");
  Matrix grad = input_gradient(net, {q}, x, labels, loss, nullptr);
  return clamp01(x + epsilon * grad.unaryExpr(&sign_of));
}

namespace {

Matrix pgd_impl(TinyNet& net, const std::vector<Precision>& qs,
                const Eigen::Ref<const Matrix>& x,
                const std::vector<int>& labels, const AttackConfig& cfg,
                Rng& rng) {
  cfg.validate();
  Matrix best_adv = x;
  Vector best_loss =
      Vector::Constant(x.cols(), -std::numeric_limits<double>::infinity());

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Rng stream = rng.split();
    Matrix delta = Matrix::Zero(x.rows(), x.cols());
    if (cfg.init == AttackInit::random_uniform) {
      for (Eigen::Index j = 0; j < delta.cols(); ++j)
        for (Eigen::Index i = 0; i < delta.rows(); ++i)
          delta(i, j) = stream.uniform(-cfg.epsilon, cfg.epsilon);
    }
    // delta = clip_eps(delta + alpha*sign(grad)) with the gradient taken at
    // the domain-clamped point; the domain clamp itself is applied at
    // evaluation time, not folded back into delta.
    for (int step = 0; step < cfg.steps; ++step) {
      Matrix x_cur = clamp01(x + delta);
      Matrix grad = input_gradient(net, qs, x_cur, labels, cfg.loss, nullptr);
      delta += cfg.alpha * grad.unaryExpr(&sign_of);
      delta = delta.cwiseMax(-cfg.epsilon).cwiseMin(cfg.epsilon);
    }
    Matrix x_adv = clamp01(x + delta);
    Vector loss = ensemble_loss(net, qs, x_adv, labels, cfg.loss);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      if (loss(i) > best_loss(i)) {  // strict: ties keep the first restart
        best_loss(i) = loss(i);
        best_adv.col(i) = x_adv.col(i);
      }
    }
  }
  return best_adv;
}

}  // namespace

Matrix pgd(TinyNet& net, const Precision& q, const Eigen::Ref<const Matrix>& x,
           const std::vector<int>& labels, const AttackConfig& cfg, Rng& rng) {
  return pgd_impl(net, {q}, x, labels, cfg, rng);
}

Matrix e_pgd(TinyNet& net, const PrecisionSet& set,
             const Eigen::Ref<const Matrix>& x, const std::vector<int>& labels,
             const AttackConfig& cfg, Rng& rng) {
  return pgd_impl(net, set.members(), x, labels, cfg, rng);
}

}  // namespace psa
