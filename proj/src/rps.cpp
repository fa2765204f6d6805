#include "psa/rps.hpp"

#include <future>
#include <numeric>
#include <sstream>

namespace psa {

double TransferMatrix::mean_diagonal() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < robust_acc.rows(); ++i) s += robust_acc(i, i);
  return s / static_cast<double>(robust_acc.rows());
}

double TransferMatrix::mean_off_diagonal() const {
  const Eigen::Index n = robust_acc.rows();
  if (n < 2) throw std::logic_error("no off-diagonal entries in a 1x1 matrix");
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) s += robust_acc(i, j);
  return s / static_cast<double>(n * (n - 1));
}

std::string TransferMatrix::to_csv() const {
  std::ostringstream out;
  out << "attack_precision";
  for (const auto& p : precisions) out << "," << p.str();
  out << ",natural_acc_row_na\n";
  for (std::size_t i = 0; i < precisions.size(); ++i) {
    out << precisions[i].str();
    for (std::size_t j = 0; j < precisions.size(); ++j)
      out << "," << robust_acc(i, j);
    out << ",\n";
  }
  out << "natural";
  for (std::size_t j = 0; j < precisions.size(); ++j)
    out << "," << natural_acc[j];
  out << ",\n";
  return out.str();
}

TinyNet rps_train(const Dataset& data, TinyNet net, const RPSTrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("rps_train: empty dataset");
  for (const auto& q : cfg.precision_set.members())
    if (!net.trained_set.contains(q))
      throw std::invalid_argument("rps_train: net lacks SBN entry for " +
                                  q.str());

  Rng rng(cfg.seed);
  std::vector<std::int64_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::int64_t start = 0; start < data.size();
         start += cfg.batch_size) {
      const std::int64_t count =
          std::min<std::int64_t>(cfg.batch_size, data.size() - start);
      Matrix xb(data.dim(), count);
      std::vector<int> yb(count);
      for (std::int64_t i = 0; i < count; ++i) {
        xb.col(i) = data.X.col(order[start + i]);
        yb[i] = data.y[order[start + i]];
      }

      const Precision q = cfg.precision_set.sample(rng);
      Rng attack_rng = rng.split();
      Matrix x_adv = cfg.attack.steps > 0
                         ? pgd(net, q, xb, yb, cfg.attack, attack_rng)
                         : xb;

      auto [logits, cache] = forward(net, x_adv, q, Mode::train);
      Gradients g = backward(net, cache, yb);
      sgd_step(net, g, cfg.lr, q);
    }
  }
  return net;
}

RpsInference rps_infer(TinyNet& net, const Eigen::Ref<const Matrix>& x,
                       const PrecisionSet& set, Rng& rng) {
  RpsInference out;
  out.predictions.resize(x.cols());
  out.chosen.reserve(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Precision q = set.sample(rng);
    out.chosen.push_back(q);
    auto [logits, cache] = forward(net, x.col(i), q, Mode::eval);
    Eigen::Index arg;
    logits.col(0).maxCoeff(&arg);
    out.predictions[i] = static_cast<int>(arg);
  }
  return out;
}

TransferMatrix transfer_matrix(TinyNet& net, const Dataset& data,
                               const AttackConfig& attack,
                               const PrecisionSet& set, std::uint64_t seed,
                               int jobs) {
  TransferMatrix tm;
  tm.precisions = set.members();
  const std::size_t n = set.size();
  tm.robust_acc = Matrix::Zero(n, n);
  tm.natural_acc.resize(n);

  // Natural accuracy per inference precision.
  for (std::size_t j = 0; j < n; ++j) {
    auto [logits, cache] = forward(net, data.X, tm.precisions[j], Mode::eval);
    tm.natural_acc[j] = accuracy(logits, data.y);
  }

  // Row i: adversarial examples generated at precision i (one seeded stream
  // per row, so rows are independent of evaluation order), evaluated at
  // every precision j.
  auto run_row = [&](std::size_t i, TinyNet net_copy) {
    Rng row_rng(seed ^ (0x9e3779b97f4a7c15ull * (i + 1)));
    Matrix x_adv =
        pgd(net_copy, tm.precisions[i], data.X, data.y, attack, row_rng);
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) {
      auto [logits, cache] =
          forward(net_copy, x_adv, tm.precisions[j], Mode::eval);
      row[j] = accuracy(logits, data.y);
    }
    return row;
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = run_row(i, net);
      for (std::size_t j = 0; j < n; ++j) tm.robust_acc(i, j) = row[j];
    }
  } else {
    std::vector<std::future<std::vector<double>>> futures;
    for (std::size_t i = 0; i < n; ++i)
      futures.push_back(
          std::async(std::launch::async, run_row, i, net));
    for (std::size_t i = 0; i < n; ++i) {
      auto row = futures[i].get();
      for (std::size_t j = 0; j < n; ++j) tm.robust_acc(i, j) = row[j];
    }
  }
  return tm;
}

PrecisionPolicy PrecisionPolicy::fixed(const Precision& q) {
  PrecisionPolicy p;
  p.kind = Kind::fixed;
  p.fixed_q = q;
  return p;
}

PrecisionPolicy PrecisionPolicy::random(const PrecisionSet& s) {
  PrecisionPolicy p;
  p.kind = Kind::random;
  p.set = s;
  return p;
}

double bitops_energy_proxy(const TinyNet& net, const Precision& q) {
  const double macs =
      static_cast<double>(net.input_dim) * net.hidden +
      static_cast<double>(net.hidden) * net.hidden +
      static_cast<double>(net.hidden) * net.classes;
  return macs * q.weight_bits * q.act_bits;
}

RobustAccuracyReport robust_accuracy(TinyNet& net, const Dataset& data,
                                     const AttackConfig& attack,
                                     const PrecisionPolicy& attack_policy,
                                     const PrecisionPolicy& infer_policy,
                                     Rng& rng, const EnergyFn& energy) {
  auto draw = [&](const PrecisionPolicy& p) {
    return p.kind == PrecisionPolicy::Kind::fixed ? p.fixed_q : p.set.sample(rng);
  };

  // Group samples by drawn attack precision so PGD runs batched.
  std::vector<Precision> attack_q(data.size(), Precision::sym(8));
  std::vector<Precision> infer_q(data.size(), Precision::sym(8));
  for (std::int64_t i = 0; i < data.size(); ++i) {
    attack_q[i] = draw(attack_policy);
    infer_q[i] = draw(infer_policy);
  }

  Matrix x_adv(data.dim(), data.size());
  std::vector<Precision> uniq;
  for (const auto& q : attack_q) {
    bool seen = false;
    for (const auto& u : uniq) seen |= (u == q);
    if (!seen) uniq.push_back(q);
  }
  for (const auto& q : uniq) {
    std::vector<std::int64_t> idx;
    for (std::int64_t i = 0; i < data.size(); ++i)
      if (attack_q[i] == q) idx.push_back(i);
    Matrix xb(data.dim(), idx.size());
    std::vector<int> yb(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xb.col(i) = data.X.col(idx[i]);
      yb[i] = data.y[idx[i]];
    }
    Rng attack_rng = rng.split();
    Matrix adv = pgd(net, q, xb, yb, attack, attack_rng);
    for (std::size_t i = 0; i < idx.size(); ++i) x_adv.col(idx[i]) = adv.col(i);
  }

  RobustAccuracyReport rep;
  std::int64_t nat_hits = 0, rob_hits = 0;
  double energy_sum = 0.0;
  for (std::int64_t i = 0; i < data.size(); ++i) {
    const Precision q = infer_q[i];
    auto [nat_logits, c1] = forward(net, data.X.col(i), q, Mode::eval);
    auto [rob_logits, c2] = forward(net, x_adv.col(i), q, Mode::eval);
    Eigen::Index arg;
    nat_logits.col(0).maxCoeff(&arg);
    if (static_cast<int>(arg) == data.y[i]) ++nat_hits;
    rob_logits.col(0).maxCoeff(&arg);
    if (static_cast<int>(arg) == data.y[i]) ++rob_hits;
    energy_sum += energy ? energy(q) : bitops_energy_proxy(net, q);
  }
  rep.natural_acc = static_cast<double>(nat_hits) / data.size();
  rep.robust_acc = static_cast<double>(rob_hits) / data.size();
  rep.mean_energy = energy_sum / static_cast<double>(data.size());
  return rep;
}

}  // namespace psa
