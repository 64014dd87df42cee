#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "seal/tensor.hpp"

namespace seal::nn {
namespace {

using seal::testing::check_gradients;

Node random_param(int r, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  Node n;
  n.value.resize(r, c);
  for (Eigen::Index i = 0; i < n.value.size(); ++i) n.value.data()[i] = lo + (hi - lo) * uniform_unit(rng);
  n.requires_grad = true;
  return n;
}

// Reduce any matrix to a scalar with fixed, non-uniform weights so every entry matters.
Var reduce(Tape& t, Var x) {
  Matrix w(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 + 0.17 * (i % 7);
  return t.mean(t.row_sum(t.mul(x, t.constant(w))));
}

TEST(TapeOps, ElementwiseGradients) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Node a = random_param(3, 4, s), b = random_param(3, 4, s + 100);
    Node pos = random_param(3, 4, s + 200, 0.5, 2.0);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.add(Tape::param(a), Tape::param(b))); }, {&a, &b}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.sub(Tape::param(a), Tape::param(b))); }, {&a, &b}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.mul(Tape::param(a), Tape::param(b))); }, {&a, &b}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.scale(Tape::param(a), -2.5)); }, {&a}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.add_scalar(Tape::param(a), 3.0)); }, {&a}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.log(Tape::param(pos))); }, {&pos}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.sqrt(Tape::param(pos))); }, {&pos}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.reciprocal(Tape::param(pos))); }, {&pos}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.relu(Tape::param(a))); }, {&a}).rel_error, 1e-6);
  }
}

TEST(TapeOps, StructuralGradients) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Node a = random_param(3, 4, s), b = random_param(4, 2, s + 1), bias = random_param(1, 2, s + 2);
    Node c = random_param(3, 2, s + 3), pos = random_param(3, 4, s + 4, 0.5, 2.0);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.matmul(Tape::param(a), Tape::param(b))); }, {&a, &b}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.add_row(Tape::param(c), Tape::param(bias))); }, {&c, &bias}).rel_error,
              1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.concat_cols(Tape::param(a), Tape::param(c))); }, {&a, &c}).rel_error,
              1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.row_sum(Tape::param(a))); }, {&a}).rel_error, 1e-6);
    EXPECT_LT(check_gradients(
                  [&](Tape& t) {
                    Var p = Tape::param(pos);
                    return reduce(t, t.div_rows(p, t.row_sum(p)));
                  },
                  {&pos})
                  .rel_error,
              1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.softmax(Tape::param(a))); }, {&a}).rel_error, 1e-6);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.log_softmax(Tape::param(a))); }, {&a}).rel_error, 1e-6);
    const std::vector<int> idx = {1, 3, 0};
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.pick(Tape::param(a), idx)); }, {&a}).rel_error, 1e-6);
    const Matrix codebook = Matrix::Identity(4, 4);
    EXPECT_LT(check_gradients([&](Tape& t) { return reduce(t, t.sq_distances(Tape::param(a), codebook)); }, {&a}).rel_error, 1e-6);
    const std::vector<double> w = {1.0, 2.718281828, 0.5};
    EXPECT_LT(check_gradients([&](Tape& t) { return t.cross_entropy(Tape::param(a), idx, w); }, {&a}).rel_error, 1e-6);
  }
}

TEST(TapeOps, StraightThroughForwardsHardBackwardsIdentity) {
  Node a = random_param(2, 3, 7);
  Tape t;
  Matrix hard = Matrix::Zero(2, 3);
  hard(0, 1) = hard(1, 2) = 1.0;
  Var st = t.straight_through(Tape::param(a), hard);
  EXPECT_TRUE(st.value().isApprox(hard));
  t.backward(reduce(t, st));
  Tape t2;
  Node b = random_param(2, 3, 7);
  t2.backward(reduce(t2, Tape::param(b)));
  EXPECT_TRUE(a.grad.isApprox(b.grad));
}

TEST(TapeOps, StopGradientBlocksFlow) {
  Node a = random_param(2, 2, 3);
  Tape t;
  Var x = Tape::param(a);
  t.backward(reduce(t, t.add(t.stop_gradient(x), t.scale(x, 0.0))));
  ASSERT_EQ(a.grad.size(), 4);
  EXPECT_EQ(a.grad.norm(), 0.0);
}

TEST(TapeOps, ReplayRejectsShapeMismatchAndExhaustion) {
  std::vector<Matrix> frozen = {Matrix::Zero(1, 2)};
  Tape t(&frozen);
  EXPECT_THROW(t.frozen(Matrix::Zero(2, 2)), ContractViolation);
  Tape u(&frozen);
  u.frozen(Matrix::Ones(1, 2));
  EXPECT_THROW(u.frozen(Matrix::Ones(1, 2)), ContractViolation);
}

TEST(TapeOps, ShapeErrors) {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 3)), b = t.constant(Matrix::Zero(2, 3));
  EXPECT_THROW(t.matmul(a, b), ContractViolation);
  EXPECT_THROW(t.backward(a), ContractViolation);
  const std::vector<int> bad = {0, 5};
  EXPECT_THROW(t.pick(a, bad), ContractViolation);
}

TEST(Mlp, HeInitStatistics) {
  Mlp m({64, 256, 256, 8}, 5);
  const Matrix& w = m.layers()[1].weight.value;
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 2.0 / 256, 0.1 * 2.0 / 256);
  EXPECT_EQ(m.layers()[0].bias.value.norm(), 0.0);
  EXPECT_EQ(m.parameter_count(), 64u * 256 + 256 + 256u * 256 + 256 + 256u * 8 + 8);
}

TEST(Mlp, ForwardMatchesPredictAndGradientsCheck) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Mlp m({5, 16, 16, 3}, s);
    Node x = random_param(4, 5, s + 50);
    x.requires_grad = false;
    Tape t;
    EXPECT_TRUE(m.forward(t, t.constant(x.value)).value().isApprox(m.predict(x.value), 1e-12));
    const std::vector<int> y = {0, 2, 1, 1};
    auto r = check_gradients([&](Tape& tp) { return tp.cross_entropy(m.forward(tp, tp.constant(x.value)), y); }, m.parameters());
    EXPECT_LT(r.rel_error, 1e-4);
  }
  Mlp m({5, 4, 2}, 1);
  EXPECT_THROW(m.predict(Matrix::Zero(1, 4)), ContractViolation);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Node p;
  p.value = Matrix::Zero(1, 3);
  p.requires_grad = true;
  p.grad = Matrix(1, 3);
  p.grad << 2.0, -0.5, 0.0;
  AdamState s;
  std::vector<Node*> ps = {&p};
  adam_step(ps, s, 0.1);
  EXPECT_NEAR(p.value(0, 0), -0.1, 1e-6);
  EXPECT_NEAR(p.value(0, 1), 0.1, 1e-6);
  EXPECT_EQ(p.value(0, 2), 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  Node p = random_param(2, 2, 9, -3, 3);
  AdamState s;
  std::vector<Node*> ps = {&p};
  for (int i = 0; i < 2000; ++i) {
    p.zero_grad();
    Tape t;
    Var x = Tape::param(p);
    t.backward(t.mean(t.row_sum(t.mul(t.add_scalar(x, -1.0), t.add_scalar(x, -1.0)))));
    adam_step(ps, s, 0.05);
  }
  EXPECT_LT((p.value.array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(Adam, ReferenceSequence) {
  // hand-rolled scalar Adam on f(x) = x^2 / 2
  double x = 1.0, m = 0, v = 0;
  Node p;
  p.value = Matrix::Constant(1, 1, 1.0);
  p.requires_grad = true;
  AdamState s;
  std::vector<Node*> ps = {&p};
  for (int step = 1; step <= 50; ++step) {
    const double g = x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, step))) / (std::sqrt(v / (1 - std::pow(0.999, step))) + 1e-8);
    p.grad = p.value;
    adam_step(ps, s, 0.01);
    ASSERT_NEAR(p.value(0, 0), x, 1e-14);
  }
}

TEST(ParameterIo, RoundTripIsExact) {
  Mlp a({4, 8, 8, 3}, 1), b({4, 8, 8, 3}, 2);
  std::stringstream buf;
  write_parameters(buf, a);
  EXPECT_EQ(buf.str().size(), a.parameter_count() * 8);
  read_parameters(buf, b);
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    EXPECT_EQ(a.layers()[l].weight.value, b.layers()[l].weight.value);
    EXPECT_EQ(a.layers()[l].bias.value, b.layers()[l].bias.value);
  }
}

TEST(ParameterIo, LittleEndianLayoutAndTruncation) {
  std::stringstream buf;
  write_le_double(buf, 1.0);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 8u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xf0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
  std::stringstream short_buf(std::string(5, '\0'));
  EXPECT_THROW(read_le_double(short_buf), InputError);
}

}  // namespace
}  // namespace seal::nn
