#pragma once

// Comparison methods sharing the SEAL substrate: plain behavior cloning, an unsupervised VQ
// hierarchy (LISA-style), inverse-distance skill selection with Gumbel-softmax (SDIL-style),
// thought cloning, and the label-only SEAL ablation.

#include <cmath>
#include <random>

#include "seal/model.hpp"

namespace seal {

inline constexpr double kDistanceEps = 1e-8;

/// mean -log pi(a | s), no sub-goal input.
inline nn::Var bc_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch) {
  if (model.policy.input_size() != model.obs_dim()) throw ConfigError("bc_loss needs a state-only policy");
  return tape.cross_entropy(model.policy.forward(tape, tape.constant(batch.obs)), batch.actions);
}

/// VQ branch of the SEAL objective only.
inline LossTerms lisa_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch, double beta) {
  if (!model.vq_encoder || model.llm_encoder) throw ConfigError("lisa_loss needs a VQ-only bundle");
  return seal_loss(tape, model, batch, beta, {1.0, 0.0});
}

/// Label-encoder branch of the SEAL objective with weights frozen at (0, 1).
inline LossTerms seal_l_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch, double beta) {
  if (!model.llm_encoder || model.vq_encoder) throw ConfigError("seal_l_loss needs a label-encoder-only bundle");
  return seal_loss(tape, model, batch, beta, {0.0, 1.0});
}

/// Selection probabilities proportional to 1 / D(z^i, z'), D Euclidean, guarded by eps.
inline nn::Var sdil_probabilities(nn::Tape& tape, nn::Var z_prime, int k) {
  const nn::Matrix codebook = nn::Matrix::Identity(k, k);
  nn::Var dist = tape.add_scalar(tape.sqrt(tape.sq_distances(z_prime, codebook)), kDistanceEps);
  nn::Var inv = tape.reciprocal(dist);
  return tape.div_rows(inv, tape.row_sum(inv));
}

/// Differentiable Gumbel-softmax sample over the codebook at temperature tau.
inline nn::Var sdil_select(nn::Tape& tape, nn::Var z_prime, int k, double tau, std::mt19937_64& rng) {
  if (tau <= 0.0) throw ConfigError("Gumbel-softmax temperature must be positive");
  nn::Var p = sdil_probabilities(tape, z_prime, k);
  nn::Matrix noise(z_prime.rows(), k);
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    double u = uniform_unit(rng);
    if (u <= 0.0) u = 0x1.0p-53;
    noise.data()[i] = -std::log(-std::log(u));
  }
  nn::Var logits = tape.scale(tape.add(tape.log(p), tape.frozen(noise)), 1.0 / tau);
  return tape.softmax(logits);
}

/// Inference-time selection: argmax of the inverse-distance probabilities.
inline int sdil_choose(std::span<const double> z_prime) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z_prime.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < z_prime.size(); ++j) {
      const double diff = z_prime[j] - (i == j ? 1.0 : 0.0);
      d += diff * diff;
    }
    if (std::sqrt(d) < best_d) {
      best_d = std::sqrt(d);
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// E_{z ~ pi_H(z|s)} -log pi_L(a | s, z), one Gumbel-softmax sample per state.
inline nn::Var sdil_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch, double tau, std::mt19937_64& rng) {
  if (!model.vq_encoder) throw ConfigError("sdil_loss needs an encoder");
  nn::Var obs = tape.constant(batch.obs);
  nn::Var z = sdil_select(tape, model.vq_encoder->forward(tape, obs), model.k, tau, rng);
  return tape.cross_entropy(model.policy.forward(tape, tape.concat_cols(obs, z)), batch.actions);
}

/// -log(beta * pi_u(z_t | s_t, z_{t-1}) + pi_l(a_t | s_t, z_t)) with teacher-forced reference
/// thoughts; the previous thought is the zero vector at t = 0.
inline nn::Var tc_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch, double beta) {
  if (!model.thought_generator) throw ConfigError("tc_loss needs a thought generator");
  const auto n = static_cast<Eigen::Index>(batch.size());
  nn::Matrix prev = nn::Matrix::Zero(n, model.k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = batch.labels[i];
    if (l < 0 || l >= model.k) throw ConfigError("tc_loss needs reference labels in [0, K)");
    if (batch.prev_labels[i] >= 0) prev(i, batch.prev_labels[i]) = 1.0;
  }
  nn::Var obs = tape.constant(batch.obs);
  nn::Var thought_logits = model.thought_generator->forward(tape, tape.concat_cols(obs, tape.constant(prev)));
  nn::Var action_logits =
      model.policy.forward(tape, tape.concat_cols(obs, tape.constant(nn::one_hot_rows(batch.labels, model.k))));
  nn::Var p_thought = tape.pick(tape.softmax(thought_logits), batch.labels);
  nn::Var p_action = tape.pick(tape.softmax(action_logits), batch.actions);
  nn::Var mixed = tape.add(tape.scale(p_thought, beta), p_action);
  return tape.scale(tape.mean(tape.log(mixed)), -1.0);
}

struct MethodParams {
  double beta = 0.4;
  double tau = 1.0;
  ConfidenceWeights weights;  // used by SEAL only
};

/// Loss assembly for any method. Fills the per-branch breakdown where the method has one.
inline LossTerms method_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch, const MethodParams& p,
                             std::mt19937_64& rng) {
  switch (model.method) {
    case MethodKind::BC: {
      LossTerms t;
      t.total = bc_loss(tape, model, batch);
      t.l_vq = t.total.scalar();
      return t;
    }
    case MethodKind::LISA: return lisa_loss(tape, model, batch, p.beta);
    case MethodKind::SDIL: {
      LossTerms t;
      t.total = sdil_loss(tape, model, batch, p.tau, rng);
      t.l_vq = t.total.scalar();
      return t;
    }
    case MethodKind::TC: {
      LossTerms t;
      t.total = tc_loss(tape, model, batch, p.beta);
      t.l_llm = t.total.scalar();
      return t;
    }
    case MethodKind::SEAL_L: return seal_l_loss(tape, model, batch, p.beta);
    case MethodKind::SEAL: return seal_loss(tape, model, batch, p.beta, p.weights);
  }
  throw ConfigError("unknown method");
}

}  // namespace seal
