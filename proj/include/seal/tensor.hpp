#pragma once

// Small reverse-mode autodiff over dense row-major matrices (rows = batch), plus the
// two-hidden-layer MLP and Adam used by every model in this project.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "seal/common.hpp"

namespace seal::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColVector = Eigen::VectorXd;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (grad.size() == 0)
      grad = g;
    else
      grad += g;
  }
  void zero_grad() { grad.resize(0, 0); }
};

/// Handle to a node living on a Tape (or to an external parameter node).
struct Var {
  Node* node = nullptr;
  const Matrix& value() const { return node->value; }
  Eigen::Index rows() const { return node->value.rows(); }
  Eigen::Index cols() const { return node->value.cols(); }
  double scalar() const { return node->value(0, 0); }
};

/// Records operations for one forward pass. Every value that must not receive gradient
/// (stop-gradient outputs, argmax one-hots, sampled noise) goes through frozen(); a tape can
/// record those values and a later tape can replay them, which lets a finite-difference
/// check hold all discrete decisions fixed while parameters are perturbed.
class Tape {
 public:
  Tape() = default;
  explicit Tape(const std::vector<Matrix>* replay) : replay_(replay) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m) { return push(std::move(m)); }

  /// Leaf bound to a persistent parameter; gradients accumulate into `p.grad`.
  static Var param(Node& p) { return Var{&p}; }

  Var frozen(const Matrix& computed) {
    Matrix v;
    if (replay_) {
      if (cursor_ >= replay_->size()) throw ContractViolation("frozen-value replay exhausted");
      v = (*replay_)[cursor_++];
      if (v.rows() != computed.rows() || v.cols() != computed.cols())
        throw ContractViolation("frozen-value replay shape mismatch");
    } else {
      v = computed;
    }
    frozen_.push_back(v);
    return constant(std::move(v));
  }

  Var stop_gradient(Var x) { return frozen(x.value()); }

  const std::vector<Matrix>& frozen_values() const { return frozen_; }

  // -- linear algebra ------------------------------------------------------
  Var matmul(Var a, Var b) {
    check(a.cols() == b.rows(), "matmul shape mismatch");
    Var out = push(a.value() * b.value(), a, b);
    out.node->backward = [a, b](Node& self) {
      if (a.node->requires_grad) a.node->accumulate(self.grad * b.value().transpose());
      if (b.node->requires_grad) b.node->accumulate(a.value().transpose() * self.grad);
    };
    return out;
  }

  /// a (n x m) + bias (1 x m) broadcast over rows.
  Var add_row(Var a, Var bias) {
    check(bias.rows() == 1 && bias.cols() == a.cols(), "add_row shape mismatch");
    Matrix v = a.value();
    v.rowwise() += bias.value().row(0);
    Var out = push(std::move(v), a, bias);
    out.node->backward = [a, bias](Node& self) {
      a.node->accumulate(self.grad);
      if (bias.node->requires_grad) bias.node->accumulate(self.grad.colwise().sum());
    };
    return out;
  }

  Var concat_cols(Var a, Var b) {
    check(a.rows() == b.rows(), "concat_cols row mismatch");
    Matrix v(a.rows(), a.cols() + b.cols());
    v << a.value(), b.value();
    Var out = push(std::move(v), a, b);
    out.node->backward = [a, b](Node& self) {
      a.node->accumulate(self.grad.leftCols(a.cols()));
      b.node->accumulate(self.grad.rightCols(b.cols()));
    };
    return out;
  }

  // -- elementwise -----------------------------------------------------------
  Var add(Var a, Var b) {
    check_same(a, b);
    Var out = push(a.value() + b.value(), a, b);
    out.node->backward = [a, b](Node& self) {
      a.node->accumulate(self.grad);
      b.node->accumulate(self.grad);
    };
    return out;
  }

  Var sub(Var a, Var b) {
    check_same(a, b);
    Var out = push(a.value() - b.value(), a, b);
    out.node->backward = [a, b](Node& self) {
      a.node->accumulate(self.grad);
      if (b.node->requires_grad) b.node->accumulate(-self.grad);
    };
    return out;
  }

  Var mul(Var a, Var b) {
    check_same(a, b);
    Var out = push(a.value().cwiseProduct(b.value()), a, b);
    out.node->backward = [a, b](Node& self) {
      if (a.node->requires_grad) a.node->accumulate(self.grad.cwiseProduct(b.value()));
      if (b.node->requires_grad) b.node->accumulate(self.grad.cwiseProduct(a.value()));
    };
    return out;
  }

  Var scale(Var a, double c) {
    Var out = push(a.value() * c, a);
    out.node->backward = [a, c](Node& self) { a.node->accumulate(self.grad * c); };
    return out;
  }

  Var add_scalar(Var a, double c) {
    Var out = push((a.value().array() + c).matrix(), a);
    out.node->backward = [a](Node& self) { a.node->accumulate(self.grad); };
    return out;
  }

  // The activation pattern is a frozen value, so a replayed pass stays on the same linear piece.
  Var relu(Var a) {
    const Matrix mask = frozen((a.value().array() > 0.0).cast<double>().matrix()).value();
    Var out = push(a.value().cwiseProduct(mask), a);
    out.node->backward = [a, mask](Node& self) { a.node->accumulate(self.grad.cwiseProduct(mask)); };
    return out;
  }

  Var log(Var a) {
    Var out = push(a.value().array().log().matrix(), a);
    out.node->backward = [a](Node& self) { a.node->accumulate(self.grad.cwiseQuotient(a.value())); };
    return out;
  }

  Var sqrt(Var a) {
    Var out = push(a.value().cwiseSqrt(), a);
    out.node->backward = [a](Node& self) {
      a.node->accumulate((self.grad.array() * 0.5 / self.value.array()).matrix());
    };
    return out;
  }

  Var reciprocal(Var a) {
    Var out = push(a.value().cwiseInverse(), a);
    out.node->backward = [a](Node& self) {
      a.node->accumulate((-self.grad.array() * self.value.array().square()).matrix());
    };
    return out;
  }

  // -- reductions ------------------------------------------------------------
  /// n x m -> n x 1
  Var row_sum(Var a) {
    Var out = push(a.value().rowwise().sum(), a);
    out.node->backward = [a](Node& self) {
      a.node->accumulate(self.grad.col(0).replicate(1, a.cols()));
    };
    return out;
  }

  /// a_ij / s_i for s of shape n x 1.
  Var div_rows(Var a, Var s) {
    check(s.cols() == 1 && s.rows() == a.rows(), "div_rows shape mismatch");
    Matrix v = a.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) /= s.value()(i, 0);
    Var out = push(std::move(v), a, s);
    out.node->backward = [a, s](Node& self) {
      Matrix ga = self.grad;
      Matrix gs(s.rows(), 1);
      for (Eigen::Index i = 0; i < ga.rows(); ++i) {
        const double si = s.value()(i, 0);
        gs(i, 0) = -(self.grad.row(i).dot(self.value.row(i))) / si;
        ga.row(i) /= si;
      }
      a.node->accumulate(ga);
      s.node->accumulate(gs);
    };
    return out;
  }

  Var mean(Var a) {
    Matrix v(1, 1);
    v(0, 0) = a.value().mean();
    Var out = push(std::move(v), a);
    out.node->backward = [a](Node& self) {
      const double g = self.grad(0, 0) / static_cast<double>(a.value().size());
      a.node->accumulate(Matrix::Constant(a.rows(), a.cols(), g));
    };
    return out;
  }

  // -- softmax family --------------------------------------------------------
  /// Row-wise log-softmax with max subtraction.
  Var log_softmax(Var a) {
    Matrix v = a.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double m = v.row(i).maxCoeff();
      const double lse = m + std::log((v.row(i).array() - m).exp().sum());
      v.row(i).array() -= lse;
    }
    Var out = push(std::move(v), a);
    out.node->backward = [a](Node& self) {
      Matrix g = self.grad;
      const Matrix p = self.value.array().exp().matrix();
      for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) -= p.row(i) * self.grad.row(i).sum();
      a.node->accumulate(g);
    };
    return out;
  }

  Var softmax(Var a) {
    Matrix v = softmax_rows(a.value());
    Var out = push(std::move(v), a);
    out.node->backward = [a](Node& self) {
      Matrix g(self.grad.rows(), self.grad.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double dot = self.grad.row(i).dot(self.value.row(i));
        g.row(i) = (self.grad.row(i).array() - dot).matrix().cwiseProduct(self.value.row(i));
      }
      a.node->accumulate(g);
    };
    return out;
  }

  /// out_i = a[i, index_i], shape n x 1.
  Var pick(Var a, std::span<const int> index) {
    check(static_cast<Eigen::Index>(index.size()) == a.rows(), "pick size mismatch");
    Matrix v(a.rows(), 1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) v(i, 0) = a.value()(i, checked_col(a, index[i]));
    std::vector<int> idx(index.begin(), index.end());
    Var out = push(std::move(v), a);
    out.node->backward = [a, idx = std::move(idx)](Node& self) {
      Matrix g = Matrix::Zero(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.rows(); ++i) g(i, idx[i]) = self.grad(i, 0);
      a.node->accumulate(g);
    };
    return out;
  }

  /// Squared Euclidean distance of every row of z to every row of `codebook`: n x K.
  Var sq_distances(Var z, const Matrix& codebook) {
    check(z.cols() == codebook.cols(), "sq_distances width mismatch");
    Matrix v(z.rows(), codebook.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index k = 0; k < codebook.rows(); ++k) v(i, k) = (z.value().row(i) - codebook.row(k)).squaredNorm();
    Var out = push(std::move(v), z);
    out.node->backward = [z, codebook](Node& self) {
      Matrix g = Matrix::Zero(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index k = 0; k < codebook.rows(); ++k)
          g.row(i) += 2.0 * self.grad(i, k) * (z.value().row(i) - codebook.row(k));
      z.node->accumulate(g);
    };
    return out;
  }

  /// Mean over rows of -log softmax(logits)[target] * weight.
  Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights = {}) {
    Var lp = pick(log_softmax(logits), targets);
    if (!weights.empty()) {
      check(static_cast<Eigen::Index>(weights.size()) == logits.rows(), "weights size mismatch");
      Matrix w(logits.rows(), 1);
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, 0) = weights[i];
      lp = mul(lp, frozen(w));
    }
    return scale(mean(lp), -1.0);
  }

  /// Forward value of `hard`, backward identity into `soft`: soft + sg(hard - soft).
  Var straight_through(Var soft, const Matrix& hard) {
    return add(soft, frozen(hard - soft.value()));
  }

  /// Reverse sweep from a scalar. Parameter gradients accumulate (call zero_grad between steps).
  void backward(Var loss) {
    check(loss.rows() == 1 && loss.cols() == 1, "backward requires a scalar");
    loss.node->grad = Matrix::Ones(1, 1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->backward && it->grad.size() != 0) it->backward(*it);
    }
  }

  static Matrix softmax_rows(const Matrix& a) {
    Matrix v = a;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double m = v.row(i).maxCoeff();
      v.row(i) = (v.row(i).array() - m).exp().matrix();
      v.row(i) /= v.row(i).sum();
    }
    return v;
  }

 private:
  template <class... Parents>
  Var push(Matrix value, Parents... parents) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = (false || ... || parents.node->requires_grad);
    return Var{&n};
  }

  static void check(bool ok, const char* what) {
    if (!ok) throw ContractViolation(what);
  }
  static void check_same(Var a, Var b) { check(a.rows() == b.rows() && a.cols() == b.cols(), "elementwise shape mismatch"); }
  static Eigen::Index checked_col(Var a, int col) {
    check(col >= 0 && col < a.cols(), "index out of range");
    return col;
  }

  std::deque<Node> nodes_;
  std::vector<Matrix> frozen_;
  const std::vector<Matrix>* replay_ = nullptr;
  std::size_t cursor_ = 0;
};

inline Matrix row_matrix(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

/// Index of the largest entry of row `r`; ties resolve to the lowest index.
inline int argmax_row(const Matrix& m, Eigen::Index r) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(r, c) > m(r, best)) best = static_cast<int>(c);
  return best;
}

inline Matrix one_hot_rows(std::span<const int> index, int k) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(index.size()), k);
  for (std::size_t i = 0; i < index.size(); ++i) m(static_cast<Eigen::Index>(i), index[i]) = 1.0;
  return m;
}

/// Fully connected network, ReLU on hidden layers, identity output.
class Mlp {
 public:
  struct Layer {
    Node weight;  // in x out
    Node bias;    // 1 x out
  };

  Mlp() = default;

  /// He-normal weights scaled by fan-in, zero biases.
  Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      Layer layer;
      const double stddev = std::sqrt(2.0 / sizes_[l]);
      layer.weight.value.resize(sizes_[l], sizes_[l + 1]);
      for (Eigen::Index i = 0; i < layer.weight.value.size(); ++i) layer.weight.value.data()[i] = normal(rng) * stddev;
      layer.bias.value = Matrix::Zero(1, sizes_[l + 1]);
      layer.weight.requires_grad = layer.bias.requires_grad = true;
      layers_.push_back(std::move(layer));
    }
  }

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Var forward(Tape& tape, Var x) {
    if (x.cols() != input_size()) throw ContractViolation("MLP input width mismatch");
    Var h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      h = tape.add_row(tape.matmul(h, Tape::param(layers_[l].weight)), Tape::param(layers_[l].bias));
      if (l + 1 < layers_.size()) h = tape.relu(h);
    }
    return h;
  }

  /// Tape-free inference.
  Matrix predict(const Matrix& x) const {
    if (x.cols() != input_size()) throw ContractViolation("MLP input width mismatch");
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix next = h * layers_[l].weight.value;
      next.rowwise() += layers_[l].bias.value.row(0);
      if (l + 1 < layers_.size()) next = next.cwiseMax(0.0);
      h = std::move(next);
    }
    return h;
  }

  std::vector<Node*> parameters() {
    std::vector<Node*> p;
    for (auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.value.size() + l.bias.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& l : layers_) {
      l.weight.zero_grad();
      l.bias.zero_grad();
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<Layer> layers_;
};

inline std::vector<int> mlp_sizes(int in, int hidden, int out) { return {in, hidden, hidden, out}; }

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// Bias-corrected Adam. Parameters without a gradient are treated as having zero gradient.
inline void adam_step(std::span<Node* const> params, AdamState& s, double lr) {
  if (s.m.empty()) {
    for (Node* p : params) {
      s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (s.m.size() != params.size()) throw ContractViolation("Adam state does not match parameter list");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Node& p = *params[i];
    if (p.grad.size() == 0) {
      s.m[i] *= s.beta1;
      s.v[i] *= s.beta2;
    } else {
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
        throw ContractViolation("gradient shape mismatch");
      s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * p.grad;
      s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * p.grad.cwiseProduct(p.grad);
    }
    p.value.array() -= lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
  }
}

// -- binary parameter blocks --------------------------------------------------
// Parameters are written as little-endian IEEE-754 doubles, layer by layer (weight then bias).

inline void write_le_double(std::ostream& out, double d) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.write(buf, 8);
}

inline double read_le_double(std::istream& in) {
  char buf[8];
  if (!in.read(buf, 8)) throw InputError("truncated parameter block");
  std::uint64_t bits;
  std::memcpy(&bits, buf, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

inline void write_parameters(std::ostream& out, const Mlp& mlp) {
  for (const auto& l : mlp.layers()) {
    for (Eigen::Index i = 0; i < l.weight.value.size(); ++i) write_le_double(out, l.weight.value.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.value.size(); ++i) write_le_double(out, l.bias.value.data()[i]);
  }
}

inline void read_parameters(std::istream& in, Mlp& mlp) {
  for (auto& l : mlp.layers()) {
    for (Eigen::Index i = 0; i < l.weight.value.size(); ++i) l.weight.value.data()[i] = read_le_double(in);
    for (Eigen::Index i = 0; i < l.bias.value.size(); ++i) l.bias.value.data()[i] = read_le_double(in);
  }
}

}  // namespace seal::nn
