#pragma once

#include <optional>
#include <vector>

#include "seal/baselines.hpp"
#include "seal/expert.hpp"

namespace seal {

/// Which sub-goal drives the low-level policy at inference.
enum class Branch { Combined, Vq, Llm };

struct Decision {
  Action action = Action::Up;
  int z_vq = -1;   // branch indices, -1 when the branch does not exist
  int z_llm = -1;
  std::vector<double> z;  // what the policy was conditioned on (empty for BC)
};

/// Deterministic greedy controller over a frozen model. Holds per-episode state for
/// thought cloning (previous thought); call reset() at episode start.
class Controller {
 public:
  explicit Controller(const ModelBundle& model, Branch branch = Branch::Combined) : model_(&model), branch_(branch) {
    if (branch_ == Branch::Vq && !model.vq_encoder) throw ConfigError("model has no VQ branch");
    if (branch_ == Branch::Llm && !model.llm_encoder) throw ConfigError("model has no label-encoder branch");
  }

  void reset() { prev_thought_.assign(model_->k, 0.0); }

  Decision decide(const std::vector<double>& obs) {
    if (prev_thought_.empty()) reset();
    const ModelBundle& m = *model_;
    const nn::Matrix x = nn::row_matrix(obs);
    Decision d;
    if (m.method == MethodKind::BC) {
      d.action = greedy(m.policy.predict(x));
      return d;
    }
    std::vector<double> z;
    switch (m.method) {
      case MethodKind::TC: {
        nn::Matrix in(1, x.cols() + m.k);
        in << x, nn::row_matrix(prev_thought_);
        const int t = nn::argmax_row(m.thought_generator->predict(in), 0);
        z = one_hot(t, m.k);
        prev_thought_ = z;
        d.z_llm = t;
        break;
      }
      case MethodKind::SDIL: {
        const nn::Matrix zp = m.vq_encoder->predict(x);
        d.z_vq = sdil_choose(std::span<const double>(zp.data(), zp.size()));
        z = one_hot(d.z_vq, m.k);
        break;
      }
      default: {
        if (m.vq_encoder) d.z_vq = nn::argmax_row(m.vq_encoder->predict(x), 0);
        if (m.llm_encoder) d.z_llm = nn::argmax_row(m.llm_encoder->predict(x), 0);
        if (branch_ == Branch::Vq || !m.llm_encoder) {
          z = one_hot(d.z_vq, m.k);
        } else if (branch_ == Branch::Llm || !m.vq_encoder) {
          z = one_hot(d.z_llm, m.k);
        } else {
          const auto a = one_hot(d.z_vq, m.k);
          const auto b = one_hot(d.z_llm, m.k);
          z = combine(a, b, m.weights);
        }
      }
    }
    nn::Matrix in(1, x.cols() + m.k);
    in << x, nn::row_matrix(z);
    d.action = greedy(m.policy.predict(in));
    d.z = std::move(z);
    return d;
  }

  Action act(const std::vector<double>& obs) { return decide(obs).action; }

 private:
  static Action greedy(const nn::Matrix& logits) { return static_cast<Action>(nn::argmax_row(logits, 0)); }

  const ModelBundle* model_;
  Branch branch_;
  std::vector<double> prev_thought_;
};

/// One-shot inference with an explicit weight override.
inline Action act(const ModelBundle& model, const std::vector<double>& obs, std::optional<ConfidenceWeights> w = {}) {
  ModelBundle view = model;
  if (w) view.weights = *w;
  Controller c(view);
  return c.act(obs);
}

}  // namespace seal
