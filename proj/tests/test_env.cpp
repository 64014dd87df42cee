#include <random>

#include <gtest/gtest.h>

#include "seal/env.hpp"

using namespace seal;

namespace {

// Straightforward re-statement of the movement and interaction rules.
struct RefWorld {
  int n;
  bool key_door;
  std::vector<int> order;
  std::vector<int> xs, ys, st;
  int t = 0;

  bool success() const {
    for (int s : st)
      if (!s) return false;
    return true;
  }

  void apply(int a) {
    int& px = xs.back();
    int& py = ys.back();
    if (a == 0 && py < 9) ++py;
    if (a == 1 && py > 0) --py;
    if (a == 2 && px > 0) --px;
    if (a == 3 && px < 9) ++px;
    if (a == 4 || a == 5) {
      int stage = 0;
      while (stage < n && st[order[stage]]) ++stage;
      if (stage < n) {
        const int slot = order[stage];
        const int needed = key_door && stage == 1 ? 5 : 4;
        if (a == needed && px == xs[slot] && py == ys[slot]) st[slot] = 1;
      }
    }
    ++t;
  }
};

RefWorld ref_from(const Environment& env, const EnvState& s) {
  RefWorld w{env.kind().n_objects, env.kind().is_key_door(), env.order(), {}, {}, s.statuses, s.step_count};
  for (const auto& p : s.positions) {
    w.xs.push_back(p.x);
    w.ys.push_back(p.y);
  }
  return w;
}

std::vector<EnvKind> all_kinds() { return {EnvKind::key_door(), EnvKind::grid_world(3), EnvKind::grid_world(4), EnvKind::grid_world(5)}; }

}  // namespace

TEST(EnvKind, Dimensions) {
  EXPECT_EQ(EnvKind::key_door().obs_dim(), 8);
  EXPECT_EQ(EnvKind::key_door().num_actions(), 6);
  EXPECT_EQ(EnvKind::key_door().num_subgoals(), 4);
  EXPECT_EQ(EnvKind::grid_world(3).obs_dim(), 11);
  EXPECT_EQ(EnvKind::grid_world(4).obs_dim(), 14);
  EXPECT_EQ(EnvKind::grid_world(5).obs_dim(), 17);
  EXPECT_EQ(EnvKind::grid_world(3).num_actions(), 5);
  EXPECT_EQ(EnvKind::grid_world(3).num_subgoals(), 6);
  EXPECT_EQ(EnvKind::grid_world(5).num_subgoals(), 10);
  EXPECT_THROW(EnvKind::grid_world(2), ConfigError);
  EXPECT_THROW(EnvKind::grid_world(6), ConfigError);
  EXPECT_THROW(EnvKind::parse("grid9"), ConfigError);
  for (const auto& k : all_kinds()) EXPECT_EQ(EnvKind::parse(k.name()), k);
}

TEST(EnvKind, OrderParsing) {
  const auto g3 = EnvKind::grid_world(3);
  EXPECT_EQ(parse_order("ACB", g3), (PickupOrder{0, 2, 1}));
  EXPECT_EQ(order_string(parse_order("BCA", g3)), "BCA");
  EXPECT_THROW(parse_order("AAB", g3), ConfigError);
  EXPECT_THROW(parse_order("ABCD", g3), ConfigError);
  EXPECT_THROW(parse_order("ABD", g3), ConfigError);
  EXPECT_THROW(Environment(EnvKind::key_door(), {1, 0}), ConfigError);
}

TEST(Environment, ResetIsDeterministicAndDistinct) {
  for (const auto& kind : all_kinds()) {
    const Environment env(kind);
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      const auto s = env.reset(seed);
      EXPECT_EQ(s, env.reset(seed));
      ASSERT_EQ(static_cast<int>(s.positions.size()), kind.n_objects + 1);
      for (std::size_t i = 0; i < s.positions.size(); ++i) {
        EXPECT_GE(s.positions[i].x, 0);
        EXPECT_LE(s.positions[i].x, 9);
        for (std::size_t j = i + 1; j < s.positions.size(); ++j) EXPECT_FALSE(s.positions[i] == s.positions[j]);
      }
      for (int b : s.statuses) EXPECT_EQ(b, 0);
      EXPECT_EQ(s.step_count, 0);
    }
  }
}

TEST(Environment, EncodeScalesCoordinates) {
  const Environment env(EnvKind::key_door());
  EnvState s{{{0, 9}, {3, 4}, {9, 0}}, {1, 0}, 0};
  const auto x = env.encode(s);
  const std::vector<double> want = {0.0, 1.0, 3.0 / 9, 4.0 / 9, 1.0, 0.0, 1.0, 0.0};
  ASSERT_EQ(x.size(), want.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x[i], want[i]);
  EXPECT_EQ(env.raw(s), (std::vector<int>{0, 9, 3, 4, 9, 0, 1, 0}));
}

TEST(Environment, KeyDoorRules) {
  const Environment env(EnvKind::key_door());
  EnvState s{{{2, 2}, {5, 5}, {2, 2}}, {0, 0}, 0};
  // unlock before the key does nothing
  auto o = env.step(s, Action::Unlock);
  EXPECT_EQ(o.next_state.statuses, (std::vector<int>{0, 0}));
  o = env.step(o.next_state, Action::PickUp);
  EXPECT_EQ(o.next_state.statuses, (std::vector<int>{1, 0}));
  // move to the door; pickup there is the wrong interaction
  EnvState t = o.next_state;
  t.player() = {5, 5};
  o = env.step(t, Action::PickUp);
  EXPECT_EQ(o.next_state.statuses, (std::vector<int>{1, 0}));
  o = env.step(o.next_state, Action::Unlock);
  EXPECT_TRUE(o.success);
  EXPECT_TRUE(o.done);
  EXPECT_THROW(env.step(o.next_state, Action::Up), ContractViolation);
}

TEST(Environment, GridWorldRejectsUnlockAndWrongOrder) {
  const Environment env(EnvKind::grid_world(3), {0, 2, 1});
  EnvState s{{{1, 1}, {2, 2}, {3, 3}, {2, 2}}, {0, 0, 0}, 0};
  EXPECT_THROW(env.step(s, Action::Unlock), ContractViolation);
  auto o = env.step(s, Action::PickUp);  // object B before A: no effect
  EXPECT_EQ(o.next_state.statuses, (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(env.next_target(s), 0);
  s.statuses = {1, 0, 0};
  EXPECT_EQ(env.next_target(s), 2);
  o = env.step(s, Action::PickUp);  // B is third in ACB
  EXPECT_EQ(o.next_state.statuses, (std::vector<int>{1, 0, 0}));
}

TEST(Environment, BordersClamp) {
  const Environment env(EnvKind::grid_world(3));
  EnvState s{{{1, 1}, {2, 2}, {3, 3}, {0, 0}}, {0, 0, 0}, 0};
  EXPECT_EQ(env.step(s, Action::Left).next_state.player(), (Position{0, 0}));
  EXPECT_EQ(env.step(s, Action::Down).next_state.player(), (Position{0, 0}));
  s.player() = {9, 9};
  EXPECT_EQ(env.step(s, Action::Right).next_state.player(), (Position{9, 9}));
  EXPECT_EQ(env.step(s, Action::Up).next_state.player(), (Position{9, 9}));
}

TEST(Environment, HorizonEndsEpisode) {
  const Environment env(EnvKind::key_door());
  EnvState s = env.reset(3);
  int steps = 0;
  while (!env.is_done(s)) {
    s = env.step(s, Action::Left).next_state;
    ++steps;
  }
  EXPECT_EQ(steps, kHorizon);
  EXPECT_FALSE(env.is_success(s));
}

// Randomized fuzzing against the reference rules, with invariants checked at every step.
TEST(Environment, FuzzAgainstReference) {
  std::mt19937_64 rng(2024);
  long total = 0;
  const PickupOrder orders[] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 1, 0}};
  while (total < 100000) {
    const int pick = static_cast<int>(uniform_below(rng, 6));
    EnvKind kind = pick == 0 ? EnvKind::key_door() : EnvKind::grid_world(3 + pick % 3);
    PickupOrder order;
    if (kind.n_objects == 3) order = orders[uniform_below(rng, 5)];
    const Environment env(kind, order);
    EnvState s = env.reset(rng());
    RefWorld ref = ref_from(env, s);
    // bias interactions so that progress actually happens
    while (!env.is_done(s)) {
      int a;
      if (uniform_below(rng, 3) == 0) {
        const int target = env.next_target(s);
        s.player() = target >= 0 ? s.positions[target] : s.player();
        ref = ref_from(env, s);
        a = kind.is_key_door() ? 4 + static_cast<int>(uniform_below(rng, 2)) : 4;
      } else {
        a = static_cast<int>(uniform_below(rng, kind.num_actions()));
      }
      const auto before = s.statuses;
      const auto out = env.step(s, static_cast<Action>(a));
      ref.apply(a);
      s = out.next_state;
      ++total;
      ASSERT_EQ(s.statuses, ref.st);
      ASSERT_EQ(s.player().x, ref.xs.back());
      ASSERT_EQ(s.player().y, ref.ys.back());
      ASSERT_EQ(out.success, ref.success());
      ASSERT_LE(s.step_count, kHorizon);
      for (std::size_t i = 0; i < before.size(); ++i) ASSERT_GE(s.statuses[i], before[i]);
      // order enforcement: completed slots always form a prefix of the order
      const int k = env.stage(s);
      for (int j = k; j < kind.n_objects; ++j) ASSERT_EQ(s.statuses[env.order()[j]], 0);
      for (const auto& p : s.positions) {
        ASSERT_TRUE(p.x >= 0 && p.x <= 9 && p.y >= 0 && p.y <= 9);
      }
    }
  }
  EXPECT_GE(total, 100000);
}
