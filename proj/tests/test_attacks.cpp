#include "psa/attacks.hpp"

#include <cmath>

#include "doctest.h"
#include "psa/dataset.hpp"

using namespace psa;

namespace {

TinyNet trained_toy_net(std::uint64_t seed = 51) {
  // Quick natural training on blobs so attacks have something to break.
  Rng rng(seed);
  Dataset d = make_blobs(8, 512, 2, 0.12, rng, 0.2);
  TinyNet net =
      TinyNet::init(8, 16, 2, PrecisionSet::parse("4,8,16"), rng);
  for (int epoch = 0; epoch < 20; ++epoch) {
    for (int start = 0; start < d.size(); start += 64) {
      const int count = std::min<std::int64_t>(64, d.size() - start);
      Matrix xb = d.X.middleCols(start, count);
      std::vector<int> yb(d.y.begin() + start, d.y.begin() + start + count);
      auto [logits, cache] = forward(net, xb, Precision::sym(8), Mode::train);
      Gradients g = backward(net, cache, yb);
      sgd_step(net, g, 0.05, Precision::sym(8));
    }
  }
  return net;
}

/// 1-D logistic classifier built as a TinyNet: hidden units pass x through,
/// output margin = w*x with w > 0 for the positive class (label 0 here).
TinyNet one_d_logistic() {
  TinyNet net;
  net.input_dim = 1;
  net.hidden = 1;
  net.classes = 2;
  net.trained_set = PrecisionSet::parse("8");
  net.W1 = Matrix::Ones(1, 1);
  net.b1 = Vector::Zero(1);
  net.W2 = Matrix::Ones(1, 1);
  net.b2 = Vector::Zero(1);
  net.W3 = Matrix(2, 1);
  net.W3 << 2.0, -2.0;  // logit margin 4*x
  net.b3 = Vector::Zero(2);
  net.sbn1.entries["w8a8"] = SbnEntry::identity(1);
  net.sbn2.entries["w8a8"] = SbnEntry::identity(1);
  return net;
}

}  // namespace

TEST_SUITE("attacks") {

TEST_CASE("fgsm epsilon zero is the identity") {
  TinyNet net = trained_toy_net();
  Rng rng(3);
  Dataset d = make_blobs(8, 16, 2, 0.12, rng, 0.2);
  Matrix adv = fgsm(net, Precision::sym(8), d.X, d.y, 0.0);
  CHECK(adv == d.X);
}

TEST_CASE("fgsm on a 1-d logistic model moves against the margin") {
  TinyNet net = one_d_logistic();
  Matrix x(1, 1);
  x << 0.6;
  std::vector<int> y = {0};  // positive class: loss decreases with x
  const double eps = 0.05;
  Matrix adv = fgsm(net, Precision::sym(8), x, y, eps);
  CHECK(adv(0, 0) == doctest::Approx(0.6 - eps));
}

TEST_CASE("fgsm raises the loss on most of a seeded batch") {
  TinyNet net = trained_toy_net();
  Rng rng(7);
  Dataset d = make_blobs(8, 256, 2, 0.12, rng, 0.2);
  const double eps = 16.0 / 255.0;
  Matrix adv = fgsm(net, Precision::sym(8), d.X, d.y, eps);

  auto per_sample_loss = [&](const Matrix& x) {
    auto [logits, cache] = forward(net, x, Precision::sym(8), Mode::eval);
    Vector v;
    attack_loss(AttackLoss::cross_entropy, logits, d.y, &v, nullptr);
    return v;
  };
  Vector before = per_sample_loss(d.X);
  Vector after = per_sample_loss(adv);
  int raised = 0;
  for (Eigen::Index i = 0; i < before.size(); ++i)
    if (after(i) >= before(i)) ++raised;
  CHECK(raised >= 0.9 * before.size());
}

TEST_CASE("pgd stays inside the budget and the domain") {
  TinyNet net = trained_toy_net();
  Rng data_rng(11);
  Dataset d = make_blobs(8, 64, 2, 0.12, data_rng, 0.2);
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    AttackConfig cfg;
    cfg.epsilon = rng.uniform(0.0, 0.3);
    cfg.alpha = rng.uniform(0.005, 0.1);
    cfg.steps = static_cast<int>(rng.uniform_int(0, 12));
    cfg.restarts = static_cast<int>(rng.uniform_int(1, 3));
    cfg.init = rng.uniform() < 0.5 ? AttackInit::zero : AttackInit::random_uniform;
    cfg.loss = rng.uniform() < 0.5 ? AttackLoss::cross_entropy
                                   : AttackLoss::cw_margin;
    Rng attack_rng = rng.split();
    Matrix adv = pgd(net, Precision::sym(4), d.X, d.y, cfg, attack_rng);
    CHECK((adv - d.X).array().abs().maxCoeff() <= cfg.epsilon + 1e-9);
    CHECK(adv.minCoeff() >= 0.0);
    CHECK(adv.maxCoeff() <= 1.0);
  }
}

TEST_CASE("pgd determinism under a fixed seed") {
  TinyNet net = trained_toy_net();
  Rng data_rng(17);
  Dataset d = make_blobs(8, 32, 2, 0.12, data_rng, 0.2);
  AttackConfig cfg;
  cfg.steps = 10;
  cfg.restarts = 3;
  Rng r1(99), r2(99);
  Matrix a1 = pgd(net, Precision::sym(8), d.X, d.y, cfg, r1);
  Matrix a2 = pgd(net, Precision::sym(8), d.X, d.y, cfg, r2);
  CHECK(a1 == a2);
}

TEST_CASE("single-step zero-init pgd with alpha >= eps equals fgsm") {
  TinyNet net = trained_toy_net();
  Rng data_rng(19);
  Dataset d = make_blobs(8, 32, 2, 0.12, data_rng, 0.2);
  AttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  cfg.alpha = 10.0 / 255.0;
  cfg.steps = 1;
  cfg.restarts = 1;
  cfg.init = AttackInit::zero;
  Rng rng(1);
  Matrix p = pgd(net, Precision::sym(8), d.X, d.y, cfg, rng);
  Matrix f = fgsm(net, Precision::sym(8), d.X, d.y, cfg.epsilon);
  CHECK(p == f);  // bit-exact
}

TEST_CASE("e_pgd on a singleton set is bit-exact pgd") {
  TinyNet net = trained_toy_net();
  Rng data_rng(23);
  Dataset d = make_blobs(8, 24, 2, 0.12, data_rng, 0.2);
  AttackConfig cfg;
  cfg.steps = 8;
  Rng r1(5), r2(5);
  Matrix a = pgd(net, Precision::sym(4), d.X, d.y, cfg, r1);
  Matrix b = e_pgd(net, PrecisionSet::parse("4"), d.X, d.y, cfg, r2);
  CHECK(a == b);
}

TEST_CASE("pgd strictly lowers robust accuracy on a trained net") {
  TinyNet net = trained_toy_net(61);
  Rng data_rng(29);
  Dataset d = make_blobs(8, 256, 2, 0.12, data_rng, 0.2);
  AttackConfig cfg;
  cfg.epsilon = 16.0 / 255.0;
  cfg.alpha = 2.0 / 255.0;
  cfg.steps = 20;
  Rng rng(31);
  Matrix adv = pgd(net, Precision::sym(8), d.X, d.y, cfg, rng);
  auto [nat_logits, c1] = forward(net, d.X, Precision::sym(8), Mode::eval);
  auto [rob_logits, c2] = forward(net, adv, Precision::sym(8), Mode::eval);
  const double nat = accuracy(nat_logits, d.y);
  const double rob = accuracy(rob_logits, d.y);
  CHECK(nat > 0.9);
  CHECK(rob < nat);
}

TEST_CASE("cw margin loss gradient at non-tied points") {
  Matrix logits(3, 2);
  // col 0: (2.0, 0.5, -0.5) with y=0: margin 1.5, runner-up index 1.
  // col 1: (3.0, -0.5, 0.2) with y=1: margin < 0, clipped flat.
  logits << 2.0, 3.0, 0.5, -0.5, -0.5, 0.2;
  std::vector<int> y = {0, 1};
  Vector v;
  Matrix dl;
  attack_loss(AttackLoss::cw_margin, logits, y, &v, &dl);
  CHECK(v(0) == doctest::Approx(-1.5));
  CHECK(dl(0, 0) == -1.0);
  CHECK(dl(1, 0) == 1.0);
  CHECK(v(1) == doctest::Approx(0.0));
  CHECK(dl.col(1).isZero(0.0));

  // Finite-difference check of the margin branch.
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Matrix lp = logits, lm = logits;
    lp(i, 0) += h;
    lm(i, 0) -= h;
    Vector vp, vm;
    attack_loss(AttackLoss::cw_margin, lp, y, &vp, nullptr);
    attack_loss(AttackLoss::cw_margin, lm, y, &vm, nullptr);
    CHECK((vp(0) - vm(0)) / (2 * h) == doctest::Approx(dl(i, 0)).epsilon(1e-6));
  }
}

}  // TEST_SUITE
