#include "psa/net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace psa {

using nlohmann::json;

SbnEntry SbnEntry::identity(int features) {
  SbnEntry e;
  e.running_mean = Vector::Zero(features);
  e.running_var = Vector::Ones(features);
  e.gamma = Vector::Ones(features);
  e.beta = Vector::Zero(features);
  return e;
}

SbnEntry& SbnLayer::at(const Precision& q) {
  auto it = entries.find(q.str());
  if (it == entries.end())
    throw std::invalid_argument("no SBN entry for precision " + q.str() +
                                " (not in trained set)");
  return it->second;
}

const SbnEntry& SbnLayer::at(const Precision& q) const {
  auto it = entries.find(q.str());
  if (it == entries.end())
    throw std::invalid_argument("no SBN entry for precision " + q.str() +
                                " (not in trained set)");
  return it->second;
}

TinyNet TinyNet::init(int input_dim, int hidden, int classes,
                      const PrecisionSet& set, Rng& rng) {
  TinyNet net;
  net.input_dim = input_dim;
  net.hidden = hidden;
  net.classes = classes;
  net.trained_set = set;

  auto he = [&](int rows, int cols, int fan_in) {
    Matrix m(rows, cols);
    const double s = std::sqrt(2.0 / fan_in);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = s * rng.normal();
    return m;
  };
  net.W1 = he(hidden, input_dim, input_dim);
  net.W2 = he(hidden, hidden, hidden);
  net.W3 = he(classes, hidden, hidden);
  net.b1 = Vector::Zero(hidden);
  net.b2 = Vector::Zero(hidden);
  net.b3 = Vector::Zero(classes);
  for (const auto& q : set.members()) {
    net.sbn1.entries[q.str()] = SbnEntry::identity(hidden);
    net.sbn2.entries[q.str()] = SbnEntry::identity(hidden);
  }
  return net;
}

Precision TinyNet::nearest_trained(const Precision& q) const {
  const Precision* best = nullptr;
  int best_d = 1 << 30;
  for (const auto& m : trained_set.members()) {
    const int d = std::abs(m.weight_bits - q.weight_bits) +
                  std::abs(m.act_bits - q.act_bits);
    if (d < best_d) {
      best_d = d;
      best = &m;
    }
  }
  return *best;
}

namespace {

struct BnOut {
  Matrix y;      // gamma*xhat + beta
  Matrix xhat;
  Vector mean, var;
};

BnOut bn_forward(SbnLayer& layer, const Precision& q, const Matrix& z,
                 Mode mode) {
  SbnEntry& e = layer.at(q);
  BnOut out;
  if (mode == Mode::train) {
    out.mean = z.rowwise().mean();
    Matrix centered = z.colwise() - out.mean;
    out.var = centered.array().square().rowwise().mean();  // biased
    e.running_mean =
        (1.0 - layer.momentum) * e.running_mean + layer.momentum * out.mean;
    e.running_var =
        (1.0 - layer.momentum) * e.running_var + layer.momentum * out.var;
  } else {
    out.mean = e.running_mean;
    out.var = e.running_var;
  }
  const Vector inv_std =
      (out.var.array() + layer.epsilon).sqrt().inverse().matrix();
  out.xhat = (z.colwise() - out.mean).array().colwise() * inv_std.array();
  out.y = (out.xhat.array().colwise() * e.gamma.array()).colwise() +
          e.beta.array();
  return out;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

/// Per-sample activation quantization: each column gets its own max-based
/// scale, so a sample's forward does not depend on its batch.
Matrix quantize_activations(const Matrix& a, int bits) {
  Matrix out(a.rows(), a.cols());
  const QuantizerConfig cfg = QuantizerConfig::activations(bits);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    out.col(j) = quantize_tensor(a.col(j), cfg).values;
  return out;
}

}  // namespace

std::pair<Matrix, ForwardCache> forward(TinyNet& net,
                                        const Eigen::Ref<const Matrix>& x,
                                        const std::optional<Precision>& q,
                                        Mode mode) {
  if (x.cols() == 0) throw std::invalid_argument("forward: empty batch");
  if (x.rows() != net.input_dim)
    throw std::invalid_argument("forward: input dim mismatch");
  if (q && !net.trained_set.contains(*q))
    throw std::invalid_argument("precision " + q->str() +
                                " not in trained set {" +
                                net.trained_set.str() + "}");

  ForwardCache cache;
  cache.q = q;
  cache.mode = mode;
  cache.net_version = net.version;
  // The input is the first activation tensor: quantized-at-q inference snaps
  // it to the fixed [0,1] grid of act_bits (pixel-style).  The straight-
  // through backward treats the grid as identity.
  cache.input = q ? quantize_domain01(x, q->act_bits) : Matrix(x);

  auto quant_w = [&](const Matrix& w) {
    if (!q) return w;
    return quantize_tensor(w, QuantizerConfig::weights(q->weight_bits)).values;
  };
  auto quant_a = [&](const Matrix& a) {
    if (!q) return a;
    return quantize_activations(a, q->act_bits);
  };
  // SBN keying: the float path reuses the first trained entry but is only
  // used with mode==eval on identity statistics or for gradient checks.
  const Precision qq = q ? *q : net.trained_set[0];

  cache.Wq1 = quant_w(net.W1);
  cache.z1 = (cache.Wq1 * cache.input).colwise() + net.b1;
  BnOut bn1 = bn_forward(net.sbn1, qq, cache.z1, mode);
  cache.xhat1 = bn1.xhat;
  cache.mean1 = bn1.mean;
  cache.var1 = bn1.var;
  cache.mask1 = (bn1.y.array() > 0.0).cast<double>();
  cache.a1 = quant_a(relu(bn1.y));

  cache.Wq2 = quant_w(net.W2);
  cache.z2 = (cache.Wq2 * cache.a1).colwise() + net.b2;
  BnOut bn2 = bn_forward(net.sbn2, qq, cache.z2, mode);
  cache.xhat2 = bn2.xhat;
  cache.mean2 = bn2.mean;
  cache.var2 = bn2.var;
  cache.mask2 = (bn2.y.array() > 0.0).cast<double>();
  cache.a2 = quant_a(relu(bn2.y));

  cache.Wq3 = quant_w(net.W3);
  cache.logits = (cache.Wq3 * cache.a2).colwise() + net.b3;
  return {cache.logits, cache};
}

double cross_entropy(const Eigen::Ref<const Matrix>& logits,
                     const std::vector<int>& labels, Matrix* dlogits) {
  const auto B = logits.cols();
  if (static_cast<std::size_t>(B) != labels.size())
    throw std::invalid_argument("cross_entropy: label count mismatch");
  double loss = 0.0;
  Matrix probs(logits.rows(), B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const double m = logits.col(i).maxCoeff();
    Vector e = (logits.col(i).array() - m).exp();
    const double Z = e.sum();
    probs.col(i) = e / Z;
    loss -= std::log(probs(labels[i], i));
  }
  loss /= static_cast<double>(B);
  if (dlogits) {
    *dlogits = probs / static_cast<double>(B);
    for (Eigen::Index i = 0; i < B; ++i)
      (*dlogits)(labels[i], i) -= 1.0 / static_cast<double>(B);
  }
  return loss;
}

namespace {

/// Batch-norm backward.  Train mode differentiates through the batch
/// moments; eval mode treats mean/var as constants.
struct BnGrads {
  Matrix dz;
  Vector dgamma, dbeta;
};

BnGrads bn_backward(const SbnEntry& e, double epsilon, Mode mode,
                    const Matrix& xhat, const Vector& var, const Matrix& dy) {
  BnGrads g;
  const auto B = static_cast<double>(dy.cols());
  g.dgamma = (dy.array() * xhat.array()).rowwise().sum();
  g.dbeta = dy.rowwise().sum();
  const Vector inv_std = (var.array() + epsilon).sqrt().inverse().matrix();
  Matrix dxhat = dy.array().colwise() * e.gamma.array();
  if (mode == Mode::eval) {
    g.dz = dxhat.array().colwise() * inv_std.array();
    return g;
  }
  const Vector mean_dxhat = dxhat.rowwise().mean();
  const Vector mean_dxhat_xhat = (dxhat.array() * xhat.array()).rowwise().mean();
  g.dz = ((dxhat.colwise() - mean_dxhat).array() -
          xhat.array().colwise() * mean_dxhat_xhat.array())
             .colwise() *
         inv_std.array();
  (void)B;
  return g;
}

}  // namespace

Gradients backward_from_logits(const TinyNet& net, const ForwardCache& cache,
                               const Eigen::Ref<const Matrix>& dlogits) {
  if (cache.net_version != net.version)
    throw std::logic_error(
        "stale ForwardCache: net was updated after this forward");
  const Precision qq = cache.q ? *cache.q : net.trained_set[0];

  Gradients g;
  // Output affine.  STE: master-weight gradients flow as if the quantizer
  // were identity, but the matmuls use the quantized values the forward saw.
  g.dW3 = dlogits * cache.a2.transpose();
  g.db3 = dlogits.rowwise().sum();
  Matrix da2 = cache.Wq3.transpose() * dlogits;

  // Activation quantizer (STE) then ReLU, using the cached pre-quant mask.
  Matrix dh2 = da2.cwiseProduct(cache.mask2);
  BnGrads bg2 = bn_backward(net.sbn2.at(qq), net.sbn2.epsilon, cache.mode,
                            cache.xhat2, cache.var2, dh2);
  g.dgamma2 = bg2.dgamma;
  g.dbeta2 = bg2.dbeta;
  g.dW2 = bg2.dz * cache.a1.transpose();
  g.db2 = bg2.dz.rowwise().sum();
  Matrix da1 = cache.Wq2.transpose() * bg2.dz;

  Matrix dh1 = da1.cwiseProduct(cache.mask1);
  BnGrads bg1 = bn_backward(net.sbn1.at(qq), net.sbn1.epsilon, cache.mode,
                            cache.xhat1, cache.var1, dh1);
  g.dgamma1 = bg1.dgamma;
  g.dbeta1 = bg1.dbeta;
  g.dW1 = bg1.dz * cache.input.transpose();
  g.db1 = bg1.dz.rowwise().sum();
  g.dinput = cache.Wq1.transpose() * bg1.dz;
  return g;
}

Gradients backward(const TinyNet& net, const ForwardCache& cache,
                   const std::vector<int>& labels) {
  Matrix dlogits;
  cross_entropy(cache.logits, labels, &dlogits);
  return backward_from_logits(net, cache, dlogits);
}

void sgd_step(TinyNet& net, const Gradients& g, double lr, const Precision& q) {
  net.W1 -= lr * g.dW1;
  net.W2 -= lr * g.dW2;
  net.W3 -= lr * g.dW3;
  net.b1 -= lr * g.db1;
  net.b2 -= lr * g.db2;
  net.b3 -= lr * g.db3;
  SbnEntry& e1 = net.sbn1.at(q);
  e1.gamma -= lr * g.dgamma1;
  e1.beta -= lr * g.dbeta1;
  SbnEntry& e2 = net.sbn2.at(q);
  e2.gamma -= lr * g.dgamma2;
  e2.beta -= lr * g.dbeta2;
  ++net.version;
}

void sgd_step_float(TinyNet& net, const Gradients& g, double lr) {
  sgd_step(net, g, lr, net.trained_set[0]);
}

FoldedNet fold_sbn(TinyNet& net, const Precision& q) {
  if (!net.trained_set.contains(q))
    throw std::invalid_argument("fold_sbn: precision " + q.str() +
                                " not in trained set");
  FoldedNet f;
  f.q = q;
  f.act_bits = q.act_bits;

  auto fold = [&](const Matrix& W, const Vector& b, const SbnLayer& sbn) {
    const SbnEntry& e = sbn.at(q);
    const Matrix Wq =
        quantize_tensor(W, QuantizerConfig::weights(q.weight_bits)).values;
    const Vector s =
        (e.gamma.array() / (e.running_var.array() + sbn.epsilon).sqrt())
            .matrix();
    // y = s .* (Wq x + b - mean) + beta; same arithmetic as eval-mode SBN,
    // re-associated into the affine layer.
    Matrix Wf = Wq.array().colwise() * s.array();
    Vector bf =
        (s.array() * (b - e.running_mean).array()).matrix() + e.beta;
    return std::make_pair(Wf, bf);
  };

  std::tie(f.W1, f.b1) = fold(net.W1, net.b1, net.sbn1);
  std::tie(f.W2, f.b2) = fold(net.W2, net.b2, net.sbn2);
  f.W3 = quantize_tensor(net.W3, QuantizerConfig::weights(q.weight_bits)).values;
  f.b3 = net.b3;
  return f;
}

Matrix forward_folded(const FoldedNet& net, const Eigen::Ref<const Matrix>& x) {
  auto qa = [&](const Matrix& a) {
    return quantize_activations(a, net.act_bits);
  };
  Matrix xq = quantize_domain01(x, net.act_bits);
  Matrix a1 = qa(((net.W1 * xq).colwise() + net.b1).cwiseMax(0.0));
  Matrix a2 = qa(((net.W2 * a1).colwise() + net.b2).cwiseMax(0.0));
  return (net.W3 * a2).colwise() + net.b3;
}

double accuracy(const Eigen::Ref<const Matrix>& logits,
                const std::vector<int>& labels) {
  std::int64_t hits = 0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    Eigen::Index arg;
    logits.col(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.cols());
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Eigen::Index rows = j.size();
  const Eigen::Index cols = rows ? j[0].size() : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj)
      m(i, jj) = j[i][jj].get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(j.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json sbn_to_json(const SbnLayer& l) {
  json out;
  out["momentum"] = l.momentum;
  out["epsilon"] = l.epsilon;
  json entries;
  for (const auto& [k, e] : l.entries) {
    entries[k] = {{"running_mean", vector_to_json(e.running_mean)},
                  {"running_var", vector_to_json(e.running_var)},
                  {"gamma", vector_to_json(e.gamma)},
                  {"beta", vector_to_json(e.beta)}};
  }
  out["entries"] = entries;
  return out;
}

SbnLayer sbn_from_json(const json& j) {
  SbnLayer l;
  l.momentum = j["momentum"].get<double>();
  l.epsilon = j["epsilon"].get<double>();
  for (auto it = j["entries"].begin(); it != j["entries"].end(); ++it) {
    SbnEntry e;
    e.running_mean = vector_from_json(it.value()["running_mean"]);
    e.running_var = vector_from_json(it.value()["running_var"]);
    e.gamma = vector_from_json(it.value()["gamma"]);
    e.beta = vector_from_json(it.value()["beta"]);
    l.entries[it.key()] = e;
  }
  return l;
}

}  // namespace

std::string checkpoint_text(const TinyNet& net) {
  json j;
  j["format_version"] = 1;
  j["arch"] = {{"input_dim", net.input_dim},
               {"hidden", net.hidden},
               {"classes", net.classes}};
  j["trained_set"] = net.trained_set.str();
  j["W1"] = matrix_to_json(net.W1);
  j["W2"] = matrix_to_json(net.W2);
  j["W3"] = matrix_to_json(net.W3);
  j["b1"] = vector_to_json(net.b1);
  j["b2"] = vector_to_json(net.b2);
  j["b3"] = vector_to_json(net.b3);
  j["sbn1"] = sbn_to_json(net.sbn1);
  j["sbn2"] = sbn_to_json(net.sbn2);
  return j.dump() + "\n";
}

TinyNet checkpoint_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint parse error: ") + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("unsupported checkpoint format_version");
  TinyNet net;
  net.input_dim = j["arch"]["input_dim"].get<int>();
  net.hidden = j["arch"]["hidden"].get<int>();
  net.classes = j["arch"]["classes"].get<int>();
  net.trained_set = PrecisionSet::parse(j["trained_set"].get<std::string>());
  net.W1 = matrix_from_json(j["W1"]);
  net.W2 = matrix_from_json(j["W2"]);
  net.W3 = matrix_from_json(j["W3"]);
  net.b1 = vector_from_json(j["b1"]);
  net.b2 = vector_from_json(j["b2"]);
  net.b3 = vector_from_json(j["b3"]);
  net.sbn1 = sbn_from_json(j["sbn1"]);
  net.sbn2 = sbn_from_json(j["sbn2"]);
  if (net.W1.rows() != net.hidden || net.W1.cols() != net.input_dim ||
      net.W3.rows() != net.classes)
    throw std::runtime_error("checkpoint: inconsistent parameter shapes");
  return net;
}

void save_checkpoint(const TinyNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_text(net);
}

TinyNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_text(ss.str());
}

}  // namespace psa
