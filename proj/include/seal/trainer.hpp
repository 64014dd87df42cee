#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "seal/eval.hpp"

namespace seal {

struct TrainConfig {
  MethodKind method = MethodKind::SEAL;
  EnvKind env = EnvKind::key_door();
  PickupOrder order;  // validation order; empty = default
  std::uint64_t seed = 1;
  int epochs = 200;
  int batch_size = 64;
  std::optional<double> lr;  // default depends on the environment
  double beta = 0.4;
  double tau = 1.0;
  int hidden = 128;
  std::optional<int> k;  // default: the environment's sub-goal count
  int validate_every = 5;
  int validation_episodes = 20;
  std::int64_t max_iterations = -1;  // stop after this many optimizer steps (-1: run all epochs)
  std::optional<double> early_stop_success;  // off unless set

  double learning_rate() const { return lr ? *lr : (env.is_key_door() ? 5e-5 : 5e-6); }
  int num_subgoals() const { return k ? *k : env.num_subgoals(); }
};

struct TrainRecord {
  std::int64_t iteration = 0;
  int epoch = 0;
  double h_llm = 0.0;
  double h_vq = 0.0;
  double l_llm = 0.0;
  double l_vq = 0.0;
  double total = 0.0;
  double w_vq = 0.0;
  double w_llm = 0.0;
  double sr_vq = -1.0;  // -1 until the first validation
  double sr_llm = -1.0;
};

struct TrainTrace {
  std::vector<TrainRecord> rows;

  void write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write trace " + path);
    out << "iteration,epoch,h_llm,h_vq,l_llm,l_vq,total,w_vq,w_llm,sr_vq,sr_llm\n";
    char buf[512];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(r.iteration), r.epoch, r.h_llm, r.h_vq, r.l_llm, r.l_vq, r.total, r.w_vq,
                    r.w_llm, r.sr_vq, r.sr_llm);
      out << buf;
    }
  }

  /// Mean total loss over the iterations of one epoch.
  double epoch_loss(int epoch) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (r.epoch == epoch) {
        sum += r.total;
        ++n;
      }
    return n ? sum / n : 0.0;
  }
};

/// All (state, action) pairs of a list of datasets, with successor and predecessor links.
struct TransitionSet {
  nn::Matrix obs;
  nn::Matrix next_obs;
  std::vector<char> has_next;
  std::vector<int> actions;
  std::vector<int> labels;
  std::vector<int> prev_labels;

  std::size_t size() const { return actions.size(); }

  Batch gather(std::span<const std::size_t> idx) const {
    Batch b;
    const auto n = static_cast<Eigen::Index>(idx.size());
    b.obs.resize(n, obs.cols());
    b.next_obs.resize(n, obs.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t j = idx[i];
      b.obs.row(i) = obs.row(j);
      b.next_obs.row(i) = next_obs.row(j);
      b.has_next.push_back(has_next[j]);
      b.actions.push_back(actions[j]);
      b.labels.push_back(labels[j]);
      b.prev_labels.push_back(prev_labels[j]);
    }
    return b;
  }
};

inline TransitionSet flatten(const std::vector<DemoDataset>& datasets) {
  if (datasets.empty()) throw ConfigError("no training data");
  const EnvKind kind = datasets.front().kind;
  std::size_t total = 0;
  for (const auto& ds : datasets) {
    if (!(ds.kind == kind)) throw ConfigError("training datasets mix environment kinds");
    total += ds.num_steps();
  }
  TransitionSet t;
  t.obs.resize(static_cast<Eigen::Index>(total), kind.obs_dim());
  t.next_obs.resize(static_cast<Eigen::Index>(total), kind.obs_dim());
  Eigen::Index row = 0;
  for (const auto& ds : datasets) {
    Environment env(ds.kind, ds.order);
    for (const auto& traj : ds.trajectories) {
      for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const auto x = env.encode(traj.steps[i].state);
        const bool last = i + 1 == traj.steps.size();
        const auto xn = last ? x : env.encode(traj.steps[i + 1].state);
        for (int c = 0; c < kind.obs_dim(); ++c) {
          t.obs(row, c) = x[c];
          t.next_obs(row, c) = xn[c];
        }
        t.has_next.push_back(!last);
        t.actions.push_back(static_cast<int>(traj.steps[i].action));
        t.labels.push_back(traj.labels ? (*traj.labels)[i] : -1);
        t.prev_labels.push_back(traj.labels && i > 0 ? (*traj.labels)[i - 1] : -1);
        ++row;
      }
    }
  }
  return t;
}

struct TrainResult {
  ModelBundle model;
  TrainTrace trace;
};

using EpochHook = std::function<void(const ModelBundle&, int epoch)>;

/// Joint end-to-end optimization of every network of the chosen method with Adam, with periodic
/// per-branch validation rollouts that reset the SEAL confidence weights. Deterministic in
/// `config.seed`.
inline TrainResult train(const TrainConfig& config, const std::vector<DemoDataset>& datasets,
                         std::uint64_t space_hash = 0, const EpochHook& on_epoch = {}) {
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.validate_every < 1 || config.validation_episodes < 1) throw ConfigError("invalid validation cadence");
  for (const auto& ds : datasets) {
    if (!(ds.kind == config.env)) throw ConfigError("dataset kind " + ds.kind.name() + " does not match " + config.env.name());
    if (uses_labels(config.method) && !ds.labeled())
      throw ConfigError(std::string(method_name(config.method)) + " requires a labeled dataset");
  }
  if (uses_labels(config.method) && config.num_subgoals() != config.env.num_subgoals())
    throw ConfigError("label-supervised methods use the labeler's sub-goal count");

  const TransitionSet data = flatten(datasets);
  const Environment val_env(config.env, config.order);
  TrainResult result;
  ModelBundle& model = result.model;
  model = make_bundle(config.method, config.env, config.num_subgoals(), config.hidden, config.seed);
  model.space_hash = space_hash;

  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 21));
  std::mt19937_64 noise_rng(derive_seed(config.seed, 22));
  nn::AdamState adam;
  const auto params = model.parameters();
  MethodParams mp{config.beta, config.tau, model.weights};
  const bool dual = config.method == MethodKind::SEAL;
  double sr_vq = -1.0, sr_llm = -1.0;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t iteration = 0;
  bool stop = false;
  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_below(shuffle_rng, i)]);
    for (std::size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Batch batch = data.gather(std::span(order).subspan(start, end - start));
      mp.weights = model.weights;
      nn::Tape tape;
      const LossTerms terms = method_loss(tape, model, batch, mp, noise_rng);
      model.zero_grad();
      tape.backward(terms.total);
      nn::adam_step(params, adam, config.learning_rate());
      ++iteration;
      model.step = iteration;
      result.trace.rows.push_back({iteration, epoch, terms.h_llm, terms.h_vq, terms.l_llm, terms.l_vq,
                                   terms.total.scalar(), model.weights.w_vq, model.weights.w_llm, sr_vq, sr_llm});
      if (config.max_iterations >= 0 && iteration >= config.max_iterations) stop = true;
    }
    const bool validate_now = epoch % config.validate_every == 0 || epoch == config.epochs || stop;
    if (validate_now && (dual || config.early_stop_success)) {
      const std::uint64_t vseed = derive_seed(config.seed, 31);
      if (dual) {
        sr_vq = validate(model, Branch::Vq, val_env, config.validation_episodes, vseed, epoch);
        sr_llm = validate(model, Branch::Llm, val_env, config.validation_episodes, vseed, epoch);
        model.weights = update_confidence(sr_vq, sr_llm, model.weights);
        if (!result.trace.rows.empty()) {
          auto& last = result.trace.rows.back();
          last.sr_vq = sr_vq;
          last.sr_llm = sr_llm;
        }
      }
      if (config.early_stop_success) {
        const double sr = dual ? std::max(sr_vq, sr_llm)
                               : validate(model, Branch::Combined, val_env, config.validation_episodes, vseed, epoch);
        if (sr >= *config.early_stop_success) stop = true;
      }
    }
    if (on_epoch) on_epoch(model, epoch);
  }
  model.zero_grad();
  return result;
}

}  // namespace seal
