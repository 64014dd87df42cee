#pragma once

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seal/env.hpp"
#include "seal/tensor.hpp"

namespace seal {

enum class MethodKind { BC, LISA, SDIL, TC, SEAL_L, SEAL };

inline std::string_view method_name(MethodKind m) {
  switch (m) {
    case MethodKind::BC: return "bc";
    case MethodKind::LISA: return "lisa";
    case MethodKind::SDIL: return "sdil";
    case MethodKind::TC: return "tc";
    case MethodKind::SEAL_L: return "seal-l";
    case MethodKind::SEAL: return "seal";
  }
  return "?";
}

inline MethodKind parse_method(std::string_view s) {
  for (auto m : {MethodKind::BC, MethodKind::LISA, MethodKind::SDIL, MethodKind::TC, MethodKind::SEAL_L, MethodKind::SEAL})
    if (method_name(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected bc|lisa|sdil|tc|seal-l|seal)");
}

/// Methods that train on reference sub-goal labels.
inline bool uses_labels(MethodKind m) { return m == MethodKind::TC || m == MethodKind::SEAL_L || m == MethodKind::SEAL; }

/// Mixing weights of the two high-level encoders. Always non-negative and summing to one.
struct ConfidenceWeights {
  double w_vq = 0.5;
  double w_llm = 0.5;
};

/// Normalized validation success rates; keeps `previous` when both branches scored zero.
inline ConfidenceWeights update_confidence(double sr_vq, double sr_llm, ConfidenceWeights previous) {
  if (sr_vq < 0.0 || sr_vq > 1.0 || sr_llm < 0.0 || sr_llm > 1.0)
    throw ContractViolation("success rates must lie in [0, 1]");
  const double total = sr_vq + sr_llm;
  if (total == 0.0) return previous;
  ConfidenceWeights w{sr_vq / total, 0.0};
  w.w_llm = 1.0 - w.w_vq;
  return w;
}

/// Nearest entry of the fixed one-hot codebook. For one-hot entries
/// argmin ||z - e_i||^2 = argmax z_i, ties to the lowest index.
inline int quantize(std::span<const double> z_con) {
  if (z_con.empty()) throw ContractViolation("quantize of an empty vector");
  int best = 0;
  for (std::size_t i = 1; i < z_con.size(); ++i)
    if (z_con[i] > z_con[best]) best = static_cast<int>(i);
  return best;
}

inline std::vector<int> quantize_rows(const nn::Matrix& z) {
  std::vector<int> idx(z.rows());
  for (Eigen::Index r = 0; r < z.rows(); ++r) idx[r] = nn::argmax_row(z, r);
  return idx;
}

/// Weighted combination of the two branch sub-goals: w_vq * z_vq + w_llm * z_llm.
inline std::vector<double> combine(std::span<const double> z_vq, std::span<const double> z_llm, ConfidenceWeights w) {
  if (z_vq.size() != z_llm.size()) throw ContractViolation("combine: dimension mismatch");
  std::vector<double> z(z_vq.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = w.w_vq * z_vq[i] + w.w_llm * z_llm[i];
  return z;
}

/// exp(||z_next - z_t||^2) on hard labels: e at a sub-goal change, 1 otherwise or without successor.
inline double transition_weight(int z_t, std::optional<int> z_next) {
  if (!z_next || *z_next == z_t) return 1.0;
  return std::numbers::e;
}

/// Vector form for one-hot inputs. Compares the hot indices, so a change weighs e
/// (the literal exp of the squared distance would be e^2).
inline double transition_weight(std::span<const double> z_t, std::span<const double> z_next) {
  if (z_t.size() != z_next.size()) throw ContractViolation("transition_weight: dimension mismatch");
  return transition_weight(quantize(z_t), quantize(z_next));
}

/// Parameters of one trained (or initialized) agent. Which networks exist depends on the method:
/// BC has only `policy`; LISA and SDIL add `vq_encoder`; SEAL-L adds `llm_encoder`; SEAL has both
/// encoders; TC has `thought_generator` (input: state ++ previous thought).
struct ModelBundle {
  MethodKind method = MethodKind::SEAL;
  EnvKind env = EnvKind::key_door();
  int k = 4;
  int hidden = 128;
  std::optional<nn::Mlp> vq_encoder;
  std::optional<nn::Mlp> llm_encoder;
  std::optional<nn::Mlp> thought_generator;
  nn::Mlp policy;
  ConfidenceWeights weights;
  std::uint64_t space_hash = 0;
  std::uint64_t seed = 0;
  std::int64_t step = 0;

  int obs_dim() const { return env.obs_dim(); }

  std::vector<nn::Node*> parameters() {
    std::vector<nn::Node*> p;
    for (auto* m : networks()) {
      auto q = m->parameters();
      p.insert(p.end(), q.begin(), q.end());
    }
    return p;
  }

  void zero_grad() {
    for (auto* m : networks()) m->zero_grad();
  }

  std::vector<nn::Mlp*> networks() {
    std::vector<nn::Mlp*> n;
    if (vq_encoder) n.push_back(&*vq_encoder);
    if (llm_encoder) n.push_back(&*llm_encoder);
    if (thought_generator) n.push_back(&*thought_generator);
    n.push_back(&policy);
    return n;
  }
};

inline ModelBundle make_bundle(MethodKind method, const EnvKind& env, int k, int hidden, std::uint64_t seed) {
  if (k < 1) throw ConfigError("sub-goal count must be positive");
  ModelBundle b;
  b.method = method;
  b.env = env;
  b.k = k;
  b.hidden = hidden;
  b.seed = seed;
  const int d = env.obs_dim();
  const int a = env.num_actions();
  if (method == MethodKind::LISA || method == MethodKind::SDIL || method == MethodKind::SEAL)
    b.vq_encoder.emplace(nn::mlp_sizes(d, hidden, k), derive_seed(seed, 11));
  if (method == MethodKind::SEAL_L || method == MethodKind::SEAL)
    b.llm_encoder.emplace(nn::mlp_sizes(d, hidden, k), derive_seed(seed, 12));
  if (method == MethodKind::TC) b.thought_generator.emplace(nn::mlp_sizes(d + k, hidden, k), derive_seed(seed, 13));
  const int policy_in = method == MethodKind::BC ? d : d + k;
  b.policy = nn::Mlp(nn::mlp_sizes(policy_in, hidden, a), derive_seed(seed, 14));
  if (method == MethodKind::SEAL_L) b.weights = {0.0, 1.0};
  if (method == MethodKind::LISA || method == MethodKind::SDIL) b.weights = {1.0, 0.0};
  return b;
}

/// A mini-batch of expert transitions. `labels` / `prev_labels` are -1 where absent.
struct Batch {
  nn::Matrix obs;
  nn::Matrix next_obs;
  std::vector<char> has_next;
  std::vector<int> actions;
  std::vector<int> labels;
  std::vector<int> prev_labels;

  std::size_t size() const { return actions.size(); }
};

struct LossTerms {
  nn::Var total;
  double h_llm = 0.0;
  double h_vq = 0.0;
  double l_llm = 0.0;
  double l_vq = 0.0;
};

/// Transition-augmented low-level loss: mean of w_t * -log pi_L(a_t | s_t, z_t), where
/// w_t = transition_weight(z_t, z_{t+1}) on hard labels.
inline nn::Var low_level_loss(nn::Tape& tape, nn::Mlp& policy, const Batch& batch, nn::Var z,
                              std::span<const int> z_index, std::span<const int> z_next_index) {
  std::vector<double> w(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    w[i] = transition_weight(z_index[i], batch.has_next[i] ? std::optional<int>(z_next_index[i]) : std::nullopt);
  nn::Var input = tape.concat_cols(tape.constant(batch.obs), z);
  return tape.cross_entropy(policy.forward(tape, input), batch.actions, w);
}

/// Commitment loss: mean over rows of ||sg(z_vq) - z_con||^2. Only z_con receives gradient.
inline nn::Var commitment_loss(nn::Tape& tape, nn::Var z_con, const nn::Matrix& z_vq) {
  nn::Var diff = tape.sub(tape.frozen(z_vq), z_con);
  return tape.mean(tape.row_sum(tape.mul(diff, diff)));
}

/// Combined dual-branch objective:
///   L_vq  = beta * L_H^vq  + L_L(s, z_vq)
///   L_llm = beta * L_H^llm + L_L(s, z_llm)
///   total = w_vq * L_vq + w_llm * L_llm
/// A branch whose encoder is absent from the bundle is skipped. Hard sub-goals reach the
/// policy through a straight-through path into the encoder's continuous output.
inline LossTerms seal_loss(nn::Tape& tape, ModelBundle& model, const Batch& batch, double beta, ConfidenceWeights w) {
  LossTerms terms;
  std::optional<nn::Var> total;
  auto accumulate = [&](nn::Var branch, double weight) {
    nn::Var scaled = tape.scale(branch, weight);
    total = total ? tape.add(*total, scaled) : scaled;
  };
  nn::Var obs = tape.constant(batch.obs);

  if (model.vq_encoder) {
    nn::Var z_con = model.vq_encoder->forward(tape, obs);
    const auto idx = quantize_rows(z_con.value());
    const auto next_idx = quantize_rows(model.vq_encoder->predict(batch.next_obs));
    const nn::Matrix hard = nn::one_hot_rows(idx, model.k);
    nn::Var lh = commitment_loss(tape, z_con, hard);
    nn::Var ll = low_level_loss(tape, model.policy, batch, tape.straight_through(z_con, hard), idx, next_idx);
    terms.h_vq = lh.scalar();
    terms.l_vq = ll.scalar();
    accumulate(tape.add(tape.scale(lh, beta), ll), w.w_vq);
  }
  if (model.llm_encoder) {
    for (int l : batch.labels)
      if (l < 0 || l >= model.k) throw ConfigError("label-supervised branch needs reference labels in [0, K)");
    nn::Var logits = model.llm_encoder->forward(tape, obs);
    const auto idx = quantize_rows(logits.value());
    const auto next_idx = quantize_rows(model.llm_encoder->predict(batch.next_obs));
    nn::Var lh = tape.cross_entropy(logits, batch.labels);
    // The straight-through path enters through pi_H^llm(z|s), not the raw logits.
    nn::Var probs = tape.softmax(logits);
    nn::Var ll =
        low_level_loss(tape, model.policy, batch, tape.straight_through(probs, nn::one_hot_rows(idx, model.k)), idx, next_idx);
    terms.h_llm = lh.scalar();
    terms.l_llm = ll.scalar();
    accumulate(tape.add(tape.scale(lh, beta), ll), w.w_llm);
  }
  if (!total) throw ConfigError("seal_loss needs at least one high-level encoder");
  terms.total = *total;
  return terms;
}

// ---------------------------------------------------------------------------
// Checkpoints: a text magic line, a one-line JSON header, then little-endian doubles for each
// network block in header order.

inline constexpr std::string_view kCheckpointMagic = "SEALCKPT 1";

inline void save_checkpoint(const ModelBundle& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path);
  nlohmann::json blocks = nlohmann::json::array();
  auto add_block = [&](const char* name, const nn::Mlp& mlp) { blocks.push_back({{"name", name}, {"layer_sizes", mlp.sizes()}}); };
  if (m.vq_encoder) add_block("vq_encoder", *m.vq_encoder);
  if (m.llm_encoder) add_block("llm_encoder", *m.llm_encoder);
  if (m.thought_generator) add_block("thought_generator", *m.thought_generator);
  add_block("policy", m.policy);
  nlohmann::json header = {{"method", method_name(m.method)},
                           {"env", m.env.name()},
                           {"k", m.k},
                           {"hidden", m.hidden},
                           {"weights", {{"vq", m.weights.w_vq}, {"llm", m.weights.w_llm}}},
                           {"space_hash", hex64(m.space_hash)},
                           {"seed", m.seed},
                           {"step", m.step},
                           {"blocks", blocks}};
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  if (m.vq_encoder) nn::write_parameters(out, *m.vq_encoder);
  if (m.llm_encoder) nn::write_parameters(out, *m.llm_encoder);
  if (m.thought_generator) nn::write_parameters(out, *m.thought_generator);
  nn::write_parameters(out, m.policy);
}

inline ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw InputError(path + " is not a checkpoint");
  std::getline(in, header_line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": bad checkpoint header: " + e.what());
  }
  ModelBundle m;
  m.method = parse_method(h.at("method").get<std::string>());
  m.env = EnvKind::parse(h.at("env").get<std::string>());
  m.k = h.at("k").get<int>();
  m.hidden = h.at("hidden").get<int>();
  m.weights = {h.at("weights").at("vq").get<double>(), h.at("weights").at("llm").get<double>()};
  m.space_hash = std::stoull(h.at("space_hash").get<std::string>(), nullptr, 16);
  m.seed = h.at("seed").get<std::uint64_t>();
  m.step = h.at("step").get<std::int64_t>();
  for (const auto& b : h.at("blocks")) {
    const std::string name = b.at("name").get<std::string>();
    nn::Mlp mlp(b.at("layer_sizes").get<std::vector<int>>(), 0);
    nn::read_parameters(in, mlp);
    if (name == "vq_encoder")
      m.vq_encoder = std::move(mlp);
    else if (name == "llm_encoder")
      m.llm_encoder = std::move(mlp);
    else if (name == "thought_generator")
      m.thought_generator = std::move(mlp);
    else if (name == "policy")
      m.policy = std::move(mlp);
    else
      throw InputError(path + ": unknown block '" + name + "'");
  }
  return m;
}

}  // namespace seal
