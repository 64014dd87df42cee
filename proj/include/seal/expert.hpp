#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "seal/env.hpp"

namespace seal {

/// Shortest-path demonstrator. Interacts when standing on the next target, otherwise
/// moves toward it along x first, then y.
inline Action expert_action(const Environment& env, const EnvState& s) {
  const int k = env.stage(s);
  if (k >= env.kind().n_objects) throw ContractViolation("expert_action on a solved state");
  const Position target = s.positions[env.order()[k]];
  const Position p = s.player();
  if (p == target) return env.interaction_for(k);
  if (p.x != target.x) return p.x < target.x ? Action::Right : Action::Left;
  return p.y < target.y ? Action::Up : Action::Down;
}

/// Ground-truth sub-goal index. Stage k contributes "move to target k" (2k) and
/// "interact with target k" (2k + 1). Solved states keep the final index.
inline int oracle_subgoal(const Environment& env, const EnvState& s) {
  const int k = env.stage(s);
  const int n = env.kind().n_objects;
  if (k >= n) return 2 * n - 1;
  return s.player() == s.positions[env.order()[k]] ? 2 * k + 1 : 2 * k;
}

inline std::vector<double> one_hot(int index, int k) {
  std::vector<double> v(k, 0.0);
  v.at(index) = 1.0;
  return v;
}

struct TrajectoryStep {
  EnvState state;
  Action action = Action::Up;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::optional<std::vector<int>> labels;  // sub-goal index per step
  bool success = false;
};

struct DemoDataset {
  EnvKind kind = EnvKind::key_door();
  PickupOrder order;
  std::vector<Trajectory> trajectories;

  bool labeled() const {
    return !trajectories.empty() &&
           std::all_of(trajectories.begin(), trajectories.end(), [](const Trajectory& t) { return t.labels.has_value(); });
  }
  std::size_t num_steps() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.steps.size();
    return n;
  }
};

/// Runs the expert from `start` until success; the expert always finishes well within the horizon.
inline Trajectory expert_rollout(const Environment& env, EnvState start) {
  Trajectory traj;
  EnvState s = std::move(start);
  while (!env.is_done(s)) {
    const Action a = expert_action(env, s);
    traj.steps.push_back({s, a});
    auto out = env.step(s, a);
    s = std::move(out.next_state);
    traj.success = out.success;
  }
  return traj;
}

inline DemoDataset generate_demos(const EnvKind& kind, int n, std::uint64_t seed, const PickupOrder& order = {}) {
  if (n < 1) throw ConfigError("number of demonstrations must be >= 1");
  Environment env(kind, order);
  DemoDataset ds{kind, env.order(), {}};
  ds.trajectories.reserve(n);
  for (int i = 0; i < n; ++i) {
    ds.trajectories.push_back(expert_rollout(env, env.reset(derive_seed(seed, 1, i))));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// JSONL serialization: one trajectory per line.

inline nlohmann::json state_to_json(const EnvState& s) {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& p : s.positions) pos.push_back({p.x, p.y});
  return {{"positions", pos}, {"statuses", s.statuses}, {"step", s.step_count}};
}

inline EnvState state_from_json(const nlohmann::json& j) {
  EnvState s;
  for (const auto& p : j.at("positions")) s.positions.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  s.statuses = j.at("statuses").get<std::vector<int>>();
  s.step_count = j.value("step", 0);
  return s;
}

inline nlohmann::json trajectory_to_json(const DemoDataset& ds, const Trajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : t.steps) steps.push_back({{"state", state_to_json(st.state)}, {"action", action_name(st.action)}});
  nlohmann::json j = {{"kind", ds.kind.name()}, {"order", order_string(ds.order)}, {"steps", steps}};
  if (t.labels) {
    nlohmann::json labels = nlohmann::json::array();
    for (int idx : *t.labels) labels.push_back(one_hot(idx, ds.kind.num_subgoals()));
    j["labels"] = labels;
  }
  j["success"] = t.success;
  return j;
}

inline void write_dataset(const DemoDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write dataset to " + path);
  for (const auto& t : ds.trajectories) out << trajectory_to_json(ds, t).dump() << '\n';
}

inline int one_hot_index(const std::vector<double>& v) {
  int index = -1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      if (index >= 0) return -1;
      index = static_cast<int>(i);
    } else if (v[i] != 0.0) {
      return -1;
    }
  }
  return index;
}

inline DemoDataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + path);
  DemoDataset ds;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      const auto kind = EnvKind::parse(j.at("kind").get<std::string>());
      const auto order = parse_order(j.at("order").get<std::string>(), kind);
      if (first) {
        ds.kind = kind;
        ds.order = order;
        first = false;
      } else if (!(kind == ds.kind) || order != ds.order) {
        throw InputError(path + ":" + std::to_string(lineno) + ": mixed kinds or orders in one dataset");
      }
      Trajectory t;
      for (const auto& st : j.at("steps")) {
        EnvState s = state_from_json(st.at("state"));
        bool ok = static_cast<int>(s.positions.size()) == kind.num_entities() + 1 &&
                  static_cast<int>(s.statuses.size()) == kind.num_statuses();
        for (const auto& p : s.positions) ok = ok && p.x >= 0 && p.x < kGridSize && p.y >= 0 && p.y < kGridSize;
        for (int b : s.statuses) ok = ok && (b == 0 || b == 1);
        if (!ok) throw InputError(path + ":" + std::to_string(lineno) + ": state does not fit " + kind.name());
        const Action a = parse_action(st.at("action").get<std::string>());
        if (static_cast<int>(a) >= kind.num_actions())
          throw InputError(path + ":" + std::to_string(lineno) + ": action not available in " + kind.name());
        t.steps.push_back({std::move(s), a});
      }
      if (j.contains("labels")) {
        std::vector<int> labels;
        for (const auto& l : j.at("labels")) {
          const auto v = l.get<std::vector<double>>();
          const int idx = one_hot_index(v);
          if (idx < 0 || static_cast<int>(v.size()) != kind.num_subgoals())
            throw InputError(path + ":" + std::to_string(lineno) + ": label is not a valid one-hot vector");
          labels.push_back(idx);
        }
        if (labels.size() != t.steps.size()) throw InputError(path + ":" + std::to_string(lineno) + ": label count mismatch");
        t.labels = std::move(labels);
      }
      t.success = j.at("success").get<bool>();
      ds.trajectories.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (first) throw InputError("dataset " + path + " is empty");
  return ds;
}

}  // namespace seal
