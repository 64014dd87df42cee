#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "seal/agent.hpp"

namespace seal {

/// Outcome counts over a batch of episodes. `completions[slot]` counts episodes in which the
/// status bit of entity `slot` reached 1 at any point.
struct RolloutStats {
  int episodes = 0;
  int successes = 0;
  std::vector<int> completions;

  double success_rate() const { return episodes ? static_cast<double>(successes) / episodes : 0.0; }
  std::vector<double> completion_rates() const {
    std::vector<double> r;
    for (int c : completions) r.push_back(episodes ? static_cast<double>(c) / episodes : 0.0);
    return r;
  }
  void merge(const RolloutStats& o) {
    episodes += o.episodes;
    successes += o.successes;
    if (completions.empty()) completions.assign(o.completions.size(), 0);
    for (std::size_t i = 0; i < o.completions.size(); ++i) completions[i] += o.completions[i];
  }
};

/// Human-readable name of each completion column.
inline std::vector<std::string> completion_names(const EnvKind& kind) {
  if (kind.is_key_door()) return {"pick up the key", "unlock the door"};
  std::vector<std::string> names;
  for (int i = 0; i < kind.n_objects; ++i) names.push_back("pick up object " + std::to_string(i + 1));
  return names;
}

inline std::uint64_t episode_seed(std::uint64_t seed, int episode) { return derive_seed(seed, 2, episode); }

/// Runs one episode. `policy(state)` returns the next action; `reset()` is called first.
template <class ResetFn, class PolicyFn>
RolloutStats run_episode(const Environment& env, std::uint64_t reset_seed, ResetFn&& reset, PolicyFn&& policy) {
  RolloutStats st;
  st.episodes = 1;
  st.completions.assign(env.kind().n_objects, 0);
  reset();
  EnvState s = env.reset(reset_seed);
  while (!env.is_done(s)) {
    auto out = env.step(s, policy(s));
    s = std::move(out.next_state);
  }
  for (int i = 0; i < env.kind().n_objects; ++i) st.completions[i] = s.statuses[i];
  st.successes = env.is_success(s) ? 1 : 0;
  return st;
}

/// Greedy rollouts of a frozen model. Episodes are split across `workers` threads, each with its
/// own controller; the result does not depend on the worker count.
inline RolloutStats rollout(const ModelBundle& model, const Environment& env, int episodes, std::uint64_t seed,
                            Branch branch = Branch::Combined, int workers = 1) {
  if (episodes < 1) throw ConfigError("episode count must be >= 1");
  if (!(model.env == env.kind())) throw ConfigError("model was trained for " + model.env.name() + ", not " + env.kind().name());
  workers = std::max(1, std::min(workers, episodes));
  std::vector<RolloutStats> partial(workers);
  auto work = [&](int w) {
    Controller c(model, branch);
    for (int e = w; e < episodes; e += workers) {
      partial[w].merge(run_episode(
          env, episode_seed(seed, e), [&] { c.reset(); }, [&](const EnvState& s) { return c.act(env.encode(s)); }));
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  RolloutStats total;
  total.completions.assign(env.kind().n_objects, 0);
  for (const auto& p : partial) total.merge(p);
  return total;
}

/// Expert bot through the same harness.
inline RolloutStats rollout_expert(const Environment& env, int episodes, std::uint64_t seed) {
  RolloutStats total;
  total.completions.assign(env.kind().n_objects, 0);
  for (int e = 0; e < episodes; ++e)
    total.merge(run_episode(env, episode_seed(seed, e), [] {}, [&](const EnvState& s) { return expert_action(env, s); }));
  return total;
}

/// Success rate of one branch over M fresh episodes. Identical layouts for both branches at the
/// same (seed, epoch).
inline double validate(const ModelBundle& model, Branch branch, const Environment& env, int episodes, std::uint64_t seed,
                       int epoch = 0) {
  if (episodes < 1) throw ConfigError("validation needs at least one episode");
  return rollout(model, env, episodes, derive_seed(seed, 3, epoch), branch).success_rate();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation (two-pass).
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

/// One seed's evaluation.
struct EvalFragment {
  std::uint64_t seed = 0;
  double success = 0.0;
  std::vector<double> subgoal_rates;
  int episodes = 0;
};

inline EvalFragment evaluate(const ModelBundle& model, const Environment& env, int episodes, std::uint64_t seed,
                             int workers = 1) {
  const auto st = rollout(model, env, episodes, seed, Branch::Combined, workers);
  return {seed, st.success_rate(), st.completion_rates(), st.episodes};
}

struct EvalReport {
  std::string method;
  std::string env;
  std::string order;
  int n_demos = 0;
  int k = 0;
  std::vector<EvalFragment> fragments;
  double wall_seconds = 0.0;

  std::vector<double> successes() const {
    std::vector<double> s;
    for (const auto& f : fragments) s.push_back(f.success);
    return s;
  }
  MeanStd success() const { return mean_std(successes()); }
  MeanStd subgoal(std::size_t i) const {
    std::vector<double> s;
    for (const auto& f : fragments) s.push_back(f.subgoal_rates.at(i));
    return mean_std(s);
  }
  std::size_t num_subgoals() const { return fragments.empty() ? 0 : fragments.front().subgoal_rates.size(); }

  nlohmann::json to_json() const {
    nlohmann::json frags = nlohmann::json::array();
    for (const auto& f : fragments)
      frags.push_back({{"seed", f.seed}, {"success", f.success}, {"subgoal_rates", f.subgoal_rates}, {"episodes", f.episodes}});
    const auto s = success();
    nlohmann::json sub = nlohmann::json::array();
    for (std::size_t i = 0; i < num_subgoals(); ++i) sub.push_back({{"mean", subgoal(i).mean}, {"std", subgoal(i).std}});
    return {{"method", method}, {"env", env},       {"order", order},       {"n_demos", n_demos},
            {"k", k},           {"seeds", frags},   {"success_mean", s.mean}, {"success_std", s.std},
            {"subgoal_rates", sub}, {"wall_seconds", wall_seconds}};
  }
};

// ---------------------------------------------------------------------------
// Per-step sub-goal traces.

struct TraceRow {
  int t = 0;
  std::vector<int> state;  // raw layout
  Action action = Action::Up;
  int z_vq = -1;
  int z_llm = -1;
  std::vector<double> z;
  int z_index = -1;  // argmax of z
  int oracle = -1;
};

struct SubgoalTrace {
  std::vector<TraceRow> rows;
  bool success = false;

  /// Fraction of steps where the conditioning sub-goal matches the oracle index.
  double accuracy() const {
    if (rows.empty()) return 0.0;
    int hits = 0;
    for (const auto& r : rows) hits += r.z_index == r.oracle;
    return static_cast<double>(hits) / rows.size();
  }

  void write_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write trace " + path);
    for (const auto& r : rows) {
      nlohmann::json j = {{"t", r.t},         {"state", r.state}, {"action", action_name(r.action)},
                          {"z_vq", r.z_vq},   {"z_llm", r.z_llm}, {"z", r.z},
                          {"z_index", r.z_index}, {"oracle", r.oracle}};
      out << j.dump() << '\n';
    }
  }
};

inline SubgoalTrace trace_episode(const ModelBundle& model, const Environment& env, std::uint64_t seed) {
  if (!(model.env == env.kind())) throw ConfigError("model/environment kind mismatch");
  Controller c(model);
  c.reset();
  SubgoalTrace trace;
  EnvState s = env.reset(seed);
  while (!env.is_done(s)) {
    const Decision d = c.decide(env.encode(s));
    TraceRow row;
    row.t = s.step_count;
    row.state = env.raw(s);
    row.action = d.action;
    row.z_vq = d.z_vq;
    row.z_llm = d.z_llm;
    row.z = d.z;
    row.z_index = d.z.empty() ? -1 : quantize(d.z);
    row.oracle = oracle_subgoal(env, s);
    trace.rows.push_back(std::move(row));
    s = env.step(s, d.action).next_state;
  }
  trace.success = env.is_success(s);
  return trace;
}

/// Expert rollout traced through the oracle labeler (the ground-truth column of a trace plot).
inline SubgoalTrace trace_expert(const Environment& env, std::uint64_t seed) {
  SubgoalTrace trace;
  EnvState s = env.reset(seed);
  while (!env.is_done(s)) {
    TraceRow row;
    row.t = s.step_count;
    row.state = env.raw(s);
    row.action = expert_action(env, s);
    row.oracle = oracle_subgoal(env, s);
    row.z = one_hot(row.oracle, env.kind().num_subgoals());
    row.z_index = row.oracle;
    trace.rows.push_back(row);
    s = env.step(s, row.action).next_state;
  }
  trace.success = env.is_success(s);
  return trace;
}

}  // namespace seal
