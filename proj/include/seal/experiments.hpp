#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seal/labeler.hpp"
#include "seal/trainer.hpp"

namespace seal {

/// Optimizer budget of a bundle run.
struct Budget {
  int epochs = 200;
  double lr = 5e-5;
};

/// Budgets pinned for single-core reproduction runs.
inline Budget desk_budget(const EnvKind& kind) {
  if (kind.is_key_door()) return {600, 5e-5};
  return {100, 1e-4};
}

/// One cell of an experiment grid: train on freshly generated expert data, evaluate on `eval_order`.
struct RunSpec {
  MethodKind method = MethodKind::SEAL;
  EnvKind env = EnvKind::key_door();
  PickupOrder order;       // order of the base demonstrations
  PickupOrder eval_order;  // empty: same as `order`
  int n_demos = 200;
  int variant_demos = 0;   // few-shot demos in `eval_order`, mixed into training
  std::optional<int> k;
  std::uint64_t seed = 1;
  Budget budget;
  int episodes = 100;
  int hidden = 128;
};

inline std::uint64_t data_seed(std::uint64_t seed) { return derive_seed(seed, 41); }
inline std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, 42); }

/// Expert demonstrations labeled by the rule-table backend against the canonical sub-goal space.
inline DemoDataset oracle_labeled(const EnvKind& kind, int n, std::uint64_t seed, const PickupOrder& order = {}) {
  OracleBackend oracle;
  const SubgoalSpace space = oracle.decompose(task_instruction(kind, order));
  return label_dataset(generate_demos(kind, n, seed, order), space, oracle);
}

struct RunResult {
  EvalFragment fragment;
  ModelBundle model;
  double wall_seconds = 0.0;
};

inline RunResult run_experiment(const RunSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const PickupOrder eval_order = spec.eval_order.empty() ? spec.order : spec.eval_order;
  std::vector<DemoDataset> data;
  data.push_back(oracle_labeled(spec.env, spec.n_demos, data_seed(spec.seed), spec.order));
  if (spec.variant_demos > 0)
    data.push_back(oracle_labeled(spec.env, spec.variant_demos, derive_seed(spec.seed, 43), eval_order));
  TrainConfig cfg;
  cfg.method = spec.method;
  cfg.env = spec.env;
  cfg.order = eval_order;
  cfg.seed = spec.seed;
  cfg.epochs = spec.budget.epochs;
  cfg.lr = spec.budget.lr;
  cfg.k = spec.k;
  cfg.hidden = spec.hidden;
  auto trained = train(cfg, data, OracleBackend{}.decompose(task_instruction(spec.env, spec.order)).hash());
  const Environment env(spec.env, eval_order);
  RunResult r;
  r.fragment = evaluate(trained.model, env, spec.episodes, eval_seed(spec.seed));
  r.fragment.seed = spec.seed;
  r.model = std::move(trained.model);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Runs the same spec over several seeds (each seed independent, `workers` at a time) and pools
/// the fragments into one report.
inline EvalReport run_seeds(RunSpec spec, const std::vector<std::uint64_t>& seeds, int workers = 1) {
  EvalReport report;
  report.method = method_name(spec.method);
  report.env = spec.env.name();
  report.order = order_string(spec.eval_order.empty() ? (spec.order.empty() ? default_order(spec.env) : spec.order)
                                                      : spec.eval_order);
  report.n_demos = spec.n_demos;
  report.k = spec.k ? *spec.k : spec.env.num_subgoals();
  std::vector<EvalFragment> frags(seeds.size());
  std::vector<double> secs(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
      RunSpec s = spec;
      s.seed = seeds[i];
      auto r = run_experiment(s);
      frags[i] = r.fragment;
      secs[i] = r.wall_seconds;
    }
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> ts;
    for (int w = 0; w < workers; ++w) ts.emplace_back(work);
    for (auto& t : ts) t.join();
  }
  report.fragments = std::move(frags);
  for (double s : secs) report.wall_seconds += s;
  return report;
}

inline std::vector<std::uint64_t> seed_range(int n, std::uint64_t first = 1) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(first + i);
  return s;
}

struct KSweepCell {
  MethodKind method;
  int k;
  int n_demos;
  EvalReport report;
};

inline std::vector<KSweepCell> sweep_k(const EnvKind& env, const std::vector<MethodKind>& methods,
                                       const std::vector<int>& k_values, const std::vector<int>& demos,
                                       const std::vector<std::uint64_t>& seeds, Budget budget, int episodes = 100,
                                       int workers = 1) {
  for (auto m : methods)
    if (uses_labels(m)) throw ConfigError("K sweeps apply to unsupervised methods only");
  for (int k : k_values)
    if (k < 2 || k > 12) throw ConfigError("K must lie in [2, 12]");
  std::vector<KSweepCell> cells;
  for (auto m : methods)
    for (int n : demos)
      for (int k : k_values) {
        RunSpec spec;
        spec.method = m;
        spec.env = env;
        spec.n_demos = n;
        spec.k = k;
        spec.budget = budget;
        spec.episodes = episodes;
        cells.push_back({m, k, n, run_seeds(spec, seeds, workers)});
      }
  return cells;
}

}  // namespace seal
