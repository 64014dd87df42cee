#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "seal/common.hpp"

namespace seal {

inline constexpr int kGridSize = 10;
inline constexpr int kHorizon = 100;

// Up increases y, Right increases x.
enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, PickUp = 4, Unlock = 5 };

inline std::string_view action_name(Action a) {
  static constexpr std::array<std::string_view, 6> names{"up", "down", "left", "right", "pickup", "unlock"};
  return names.at(static_cast<int>(a));
}

inline Action parse_action(std::string_view s) {
  for (int i = 0; i < 6; ++i) {
    if (action_name(static_cast<Action>(i)) == s) return static_cast<Action>(i);
  }
  throw InputError("unknown action '" + std::string(s) + "'");
}

/// Which environment family is being simulated.
struct EnvKind {
  enum class Variant { KeyDoor, GridWorld };

  Variant variant = Variant::KeyDoor;
  int n_objects = 2;  // key + door for KeyDoor

  static EnvKind key_door() { return {Variant::KeyDoor, 2}; }

  static EnvKind grid_world(int n) {
    if (n < 3 || n > 5) throw ConfigError("GridWorld supports 3 to 5 objects, got " + std::to_string(n));
    return {Variant::GridWorld, n};
  }

  static EnvKind parse(std::string_view name) {
    if (name == "keydoor") return key_door();
    if (name == "grid3") return grid_world(3);
    if (name == "grid4") return grid_world(4);
    if (name == "grid5") return grid_world(5);
    throw ConfigError("unknown environment '" + std::string(name) + "' (expected keydoor|grid3|grid4|grid5)");
  }

  bool is_key_door() const { return variant == Variant::KeyDoor; }
  std::string name() const { return is_key_door() ? "keydoor" : "grid" + std::to_string(n_objects); }

  int num_entities() const { return n_objects; }
  int num_statuses() const { return n_objects; }
  int obs_dim() const { return 2 * (n_objects + 1) + n_objects; }
  int num_actions() const { return is_key_door() ? 6 : 5; }
  // One "move to" and one "interact" stage per target.
  int num_subgoals() const { return 2 * n_objects; }

  friend bool operator==(const EnvKind&, const EnvKind&) = default;
};

struct Position {
  int x = 0;
  int y = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

inline int manhattan(Position a, Position b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

/// Raw environment state. Entity positions come first (key, door or objects in slot order),
/// the player is last. `statuses[i]` belongs to entity slot i.
struct EnvState {
  std::vector<Position> positions;
  std::vector<int> statuses;
  int step_count = 0;

  const Position& player() const { return positions.back(); }
  Position& player() { return positions.back(); }

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepOutcome {
  EnvState next_state;
  bool done = false;
  bool success = false;
};

/// Order in which entity slots have to be completed. KeyDoor is always {0, 1}.
using PickupOrder = std::vector<int>;

inline PickupOrder default_order(const EnvKind& kind) {
  PickupOrder order(kind.n_objects);
  for (int i = 0; i < kind.n_objects; ++i) order[i] = i;
  return order;
}

/// Parses letter orders such as "ACB" (A = object slot 0).
inline PickupOrder parse_order(std::string_view letters, const EnvKind& kind) {
  if (letters.empty()) return default_order(kind);
  if (kind.is_key_door()) {
    if (letters != "AB") throw ConfigError("KeyDoor has a fixed order");
    return default_order(kind);
  }
  if (static_cast<int>(letters.size()) != kind.n_objects)
    throw ConfigError("order '" + std::string(letters) + "' does not match object count");
  PickupOrder order;
  std::vector<bool> seen(kind.n_objects, false);
  for (char c : letters) {
    const int slot = c - 'A';
    if (slot < 0 || slot >= kind.n_objects || seen[slot])
      throw ConfigError("invalid pickup order '" + std::string(letters) + "'");
    seen[slot] = true;
    order.push_back(slot);
  }
  return order;
}

inline std::string order_string(const PickupOrder& order) {
  std::string s;
  for (int slot : order) s.push_back(static_cast<char>('A' + slot));
  return s;
}

/// Deterministic KeyDoor / Grid-World simulator. Instances are immutable and can be
/// shared by any number of rollout workers; all episode state lives in EnvState.
class Environment {
 public:
  explicit Environment(EnvKind kind, PickupOrder order = {})
      : kind_(kind), order_(order.empty() ? default_order(kind) : std::move(order)) {
    if (static_cast<int>(order_.size()) != kind_.n_objects) throw ConfigError("pickup order size mismatch");
    std::vector<int> sorted = order_;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < kind_.n_objects; ++i)
      if (sorted[i] != i) throw ConfigError("pickup order is not a permutation");
    if (kind_.is_key_door() && order_ != default_order(kind_)) throw ConfigError("KeyDoor has a fixed order");
  }

  const EnvKind& kind() const { return kind_; }
  const PickupOrder& order() const { return order_; }

  EnvState reset(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    EnvState s;
    const int n = kind_.num_entities() + 1;
    std::vector<int> cells;
    while (static_cast<int>(cells.size()) < n) {
      const int c = static_cast<int>(uniform_below(rng, kGridSize * kGridSize));
      if (std::find(cells.begin(), cells.end(), c) == cells.end()) cells.push_back(c);
    }
    for (int c : cells) s.positions.push_back({c % kGridSize, c / kGridSize});
    s.statuses.assign(kind_.num_statuses(), 0);
    return s;
  }

  /// Number of completed targets; targets are completed strictly in `order()`.
  int stage(const EnvState& s) const {
    int k = 0;
    while (k < kind_.n_objects && s.statuses[order_[k]] == 1) ++k;
    return k;
  }

  /// Slot of the next target, or -1 when everything is done.
  int next_target(const EnvState& s) const {
    const int k = stage(s);
    return k < kind_.n_objects ? order_[k] : -1;
  }

  /// Action that completes the next target when standing on it.
  Action interaction_for(int stage_index) const {
    return kind_.is_key_door() && stage_index == 1 ? Action::Unlock : Action::PickUp;
  }

  bool is_success(const EnvState& s) const {
    return std::all_of(s.statuses.begin(), s.statuses.end(), [](int b) { return b == 1; });
  }

  bool is_done(const EnvState& s) const { return is_success(s) || s.step_count >= kHorizon; }

  StepOutcome step(const EnvState& s, Action a) const {
    if (is_done(s)) throw ContractViolation("step() called on a finished episode");
    if (static_cast<int>(a) >= kind_.num_actions()) throw ContractViolation("action not in this environment's action set");
    StepOutcome out{s, false, false};
    EnvState& n = out.next_state;
    Position& p = n.player();
    switch (a) {
      case Action::Up: p.y = std::min(p.y + 1, kGridSize - 1); break;
      case Action::Down: p.y = std::max(p.y - 1, 0); break;
      case Action::Left: p.x = std::max(p.x - 1, 0); break;
      case Action::Right: p.x = std::min(p.x + 1, kGridSize - 1); break;
      case Action::PickUp:
      case Action::Unlock: {
        const int k = stage(n);
        if (k < kind_.n_objects && a == interaction_for(k) && p == n.positions[order_[k]]) {
          n.statuses[order_[k]] = 1;
        }
        break;
      }
    }
    ++n.step_count;
    out.success = is_success(n);
    out.done = out.success || n.step_count >= kHorizon;
    return out;
  }

  /// Model input: coordinates scaled by 1/9, then status bits as 0/1.
  std::vector<double> encode(const EnvState& s) const {
    std::vector<double> v;
    v.reserve(kind_.obs_dim());
    constexpr double scale = 1.0 / (kGridSize - 1);
    for (const auto& pos : s.positions) {
      v.push_back(pos.x * scale);
      v.push_back(pos.y * scale);
    }
    for (int b : s.statuses) v.push_back(static_cast<double>(b));
    return v;
  }

  /// Unscaled integer layout of encode(); used in files and prompts.
  std::vector<int> raw(const EnvState& s) const {
    std::vector<int> v;
    for (const auto& pos : s.positions) {
      v.push_back(pos.x);
      v.push_back(pos.y);
    }
    v.insert(v.end(), s.statuses.begin(), s.statuses.end());
    return v;
  }

 private:
  EnvKind kind_;
  PickupOrder order_;
};

}  // namespace seal
