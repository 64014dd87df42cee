#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "seal/tensor.hpp"

namespace seal::testing {

struct GradCheck {
  double rel_error = 0.0;
  double analytic_norm = 0.0;
  std::size_t entries = 0;
};

/// Central differences over every entry of `params`, with every frozen value of the reference
/// pass replayed so discrete choices stay put. Error is ||g_a - g_n|| / (||g_a|| + ||g_n||).
inline GradCheck check_gradients(const std::function<nn::Var(nn::Tape&)>& loss, const std::vector<nn::Node*>& params,
                                  double h = 1e-5) {
  for (auto* p : params) p->zero_grad();
  nn::Tape ref;
  nn::Var l = loss(ref);
  ref.backward(l);
  const std::vector<nn::Matrix> frozen = ref.frozen_values();
  auto eval = [&] {
    nn::Tape t(&frozen);
    return loss(t).scalar();
  };
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  GradCheck r;
  for (auto* p : params) {
    const nn::Matrix analytic = p->grad.size() ? p->grad : nn::Matrix::Zero(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double up = eval();
      x = x0 - h;
      const double down = eval();
      x = x0;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.data()[i];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      ++r.entries;
    }
  }
  for (auto* p : params) p->zero_grad();
  const double denom = std::sqrt(a2) + std::sqrt(n2);
  r.rel_error = denom > 0 ? std::sqrt(diff2) / denom : 0.0;
  r.analytic_norm = std::sqrt(a2);
  return r;
}

}  // namespace seal::testing

#include <map>
#include <random>
#include <string>

#include "seal/baselines.hpp"

namespace seal::testing {

/// Batch with uniform observations, random actions and labels, and a random sub-goal change pattern.
inline Batch random_batch(const EnvKind& env, int n, int k, std::mt19937_64& rng) {
  Batch b;
  const int d = env.obs_dim();
  b.obs.resize(n, d);
  b.next_obs.resize(n, d);
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) {
    b.obs.data()[i] = uniform_unit(rng);
    b.next_obs.data()[i] = uniform_unit(rng);
  }
  for (int i = 0; i < n; ++i) {
    b.has_next.push_back(uniform_below(rng, 5) != 0);
    b.actions.push_back(static_cast<int>(uniform_below(rng, env.num_actions())));
    b.labels.push_back(static_cast<int>(uniform_below(rng, k)));
    b.prev_labels.push_back(i % 4 == 0 ? -1 : static_cast<int>(uniform_below(rng, k)));
  }
  return b;
}

/// Worst relative error per loss over `instances` random models and batches. Hidden width 16
/// keeps the full central-difference sweep cheap.
inline std::map<std::string, double> gradient_oracle(int instances = 20, double h = 1e-5) {
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, const GradCheck& r) { worst[name] = std::max(worst[name], r.rel_error); };
  const EnvKind envs[] = {EnvKind::key_door(), EnvKind::grid_world(3), EnvKind::grid_world(4)};
  for (int inst = 0; inst < instances; ++inst) {
    std::mt19937_64 rng(derive_seed(2024, inst));
    const EnvKind env = envs[inst % 3];
    const int k = env.num_subgoals();
    const int n = 6 + inst % 5;
    const std::uint64_t seed = 100 + inst;
    const Batch batch = random_batch(env, n, k, rng);
    const double beta = 0.4;

    {
      ModelBundle m = make_bundle(MethodKind::SEAL, env, k, 16, seed);
      const ConfidenceWeights w{uniform_unit(rng), 0.0};
      const ConfidenceWeights ww{w.w_vq, 1.0 - w.w_vq};
      note("seal", check_gradients([&](nn::Tape& t) { return seal_loss(t, m, batch, beta, ww).total; }, m.parameters(), h));
      // low-level loss on its own, with hard labels as the sub-goal input
      note("low_level", check_gradients(
                            [&](nn::Tape& t) {
                              nn::Var z = t.constant(nn::one_hot_rows(batch.labels, k));
                              return low_level_loss(t, m.policy, batch, z, batch.labels, batch.prev_labels);
                            },
                            m.policy.parameters(), h));
      note("commitment", check_gradients(
                             [&](nn::Tape& t) {
                               nn::Var z = m.vq_encoder->forward(t, t.constant(batch.obs));
                               return commitment_loss(t, z, nn::one_hot_rows(quantize_rows(z.value()), k));
                             },
                             m.vq_encoder->parameters(), h));
      note("high_level_llm", check_gradients(
                                 [&](nn::Tape& t) {
                                   return t.cross_entropy(m.llm_encoder->forward(t, t.constant(batch.obs)), batch.labels);
                                 },
                                 m.llm_encoder->parameters(), h));
    }
    {
      ModelBundle m = make_bundle(MethodKind::BC, env, k, 16, seed);
      note("bc", check_gradients([&](nn::Tape& t) { return bc_loss(t, m, batch); }, m.parameters(), h));
    }
    {
      ModelBundle m = make_bundle(MethodKind::LISA, env, k, 16, seed);
      note("lisa", check_gradients([&](nn::Tape& t) { return lisa_loss(t, m, batch, beta).total; }, m.parameters(), h));
    }
    {
      ModelBundle m = make_bundle(MethodKind::SEAL_L, env, k, 16, seed);
      note("seal-l", check_gradients([&](nn::Tape& t) { return seal_l_loss(t, m, batch, beta).total; }, m.parameters(), h));
    }
    {
      ModelBundle m = make_bundle(MethodKind::SDIL, env, k, 16, seed);
      std::mt19937_64 noise(seed);
      note("sdil", check_gradients([&](nn::Tape& t) { return sdil_loss(t, m, batch, 1.0, noise); }, m.parameters(), h));
    }
    {
      ModelBundle m = make_bundle(MethodKind::TC, env, k, 16, seed);
      note("tc", check_gradients([&](nn::Tape& t) { return tc_loss(t, m, batch, beta); }, m.parameters(), h));
    }
  }
  return worst;
}

}  // namespace seal::testing
