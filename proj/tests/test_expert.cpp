#include <fstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "seal/expert.hpp"

using namespace seal;

namespace {

// Independent statement of the KeyDoor stage labels.
int keydoor_label(const EnvState& s) {
  const bool on_key = s.player() == s.positions[0];
  const bool on_door = s.player() == s.positions[1];
  if (!s.statuses[0]) return on_key ? 1 : 0;
  if (!s.statuses[1]) return on_door ? 3 : 2;
  return 3;
}

int shortest_length(const Environment& env, const EnvState& s0) {
  int len = 0;
  Position p = s0.player();
  for (int slot : env.order()) {
    len += manhattan(p, s0.positions[slot]) + 1;
    p = s0.positions[slot];
  }
  return len;
}

}  // namespace

TEST(Expert, SolvesRandomEpisodesOptimally) {
  const EnvKind kinds[] = {EnvKind::key_door(), EnvKind::grid_world(3), EnvKind::grid_world(4), EnvKind::grid_world(5)};
  for (const auto& kind : kinds) {
    const Environment env(kind);
    for (int e = 0; e < 1000; ++e) {
      const EnvState s0 = env.reset(derive_seed(99, e));
      const Trajectory t = expert_rollout(env, s0);
      ASSERT_TRUE(t.success) << kind.name() << " episode " << e;
      ASSERT_EQ(static_cast<int>(t.steps.size()), shortest_length(env, s0));
    }
  }
}

TEST(Expert, FollowsPickupOrder) {
  const auto kind = EnvKind::grid_world(3);
  for (const char* ord : {"ABC", "ACB", "BAC", "BCA", "CAB", "CBA"}) {
    const Environment env(kind, parse_order(ord, kind));
    for (int e = 0; e < 100; ++e) {
      const EnvState s0 = env.reset(e);
      const Trajectory t = expert_rollout(env, s0);
      ASSERT_TRUE(t.success);
      ASSERT_EQ(static_cast<int>(t.steps.size()), shortest_length(env, s0));
    }
  }
}

TEST(Oracle, ExhaustiveKeyDoorEnumeration) {
  const Environment env(EnvKind::key_door());
  long checked = 0;
  const std::vector<std::vector<int>> statuses = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int key = 0; key < 100; ++key)
    for (int door = 0; door < 100; ++door) {
      if (door == key) continue;
      for (int player = 0; player < 100; ++player)
        for (const auto& st : statuses) {
          EnvState s{{{key % 10, key / 10}, {door % 10, door / 10}, {player % 10, player / 10}}, st, 0};
          const int z = oracle_subgoal(env, s);
          const auto v = one_hot(z, 4);
          ASSERT_EQ(one_hot_index(v), z);
          if (st != std::vector<int>{0, 1}) ASSERT_EQ(z, keydoor_label(s));
          ++checked;
        }
    }
  EXPECT_EQ(checked, 100L * 99 * 100 * 4);
}

TEST(Oracle, MonotoneAlongExpertTrajectories) {
  for (const auto& kind : {EnvKind::key_door(), EnvKind::grid_world(3), EnvKind::grid_world(5)}) {
    const auto ds = generate_demos(kind, 300, 5);
    const Environment env(kind);
    for (const auto& t : ds.trajectories) {
      int prev = -1;
      for (const auto& step : t.steps) {
        const int z = oracle_subgoal(env, step.state);
        ASSERT_GE(z, prev);
        ASSERT_LT(z, kind.num_subgoals());
        prev = z;
      }
      // trajectories start before the first target and end standing on the last one
      EXPECT_EQ(oracle_subgoal(env, t.steps.front().state) / 2, 0);
      EXPECT_EQ(oracle_subgoal(env, t.steps.back().state), kind.num_subgoals() - 1);
    }
  }
}

TEST(Oracle, SolvedStateMapsToLastSubgoal) {
  const Environment env(EnvKind::grid_world(3));
  EnvState s{{{1, 1}, {2, 2}, {3, 3}, {7, 7}}, {1, 1, 1}, 10};
  EXPECT_EQ(oracle_subgoal(env, s), 5);
}

TEST(Dataset, GenerationIsDeterministic) {
  const auto a = generate_demos(EnvKind::grid_world(3), 20, 7);
  const auto b = generate_demos(EnvKind::grid_world(3), 20, 7);
  const auto c = generate_demos(EnvKind::grid_world(3), 20, 8);
  ASSERT_EQ(a.trajectories.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a.trajectories[i].steps.front().state, b.trajectories[i].steps.front().state);
  EXPECT_FALSE(a.trajectories[0].steps.front().state == c.trajectories[0].steps.front().state);
  EXPECT_THROW(generate_demos(EnvKind::key_door(), 0, 1), ConfigError);
}

TEST(Dataset, JsonlRoundTrip) {
  const std::string dir = seal::testing::temp_dir();
  auto ds = generate_demos(EnvKind::grid_world(3), 5, 3, {1, 2, 0});
  const Environment env(ds.kind, ds.order);
  for (auto& t : ds.trajectories) {
    std::vector<int> labels;
    for (const auto& s : t.steps) labels.push_back(oracle_subgoal(env, s.state));
    t.labels = labels;
  }
  write_dataset(ds, dir + "/d.jsonl");
  const auto back = read_dataset(dir + "/d.jsonl");
  EXPECT_EQ(back.kind, ds.kind);
  EXPECT_EQ(back.order, ds.order);
  ASSERT_EQ(back.trajectories.size(), ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const auto& x = ds.trajectories[i];
    const auto& y = back.trajectories[i];
    ASSERT_EQ(x.steps.size(), y.steps.size());
    for (std::size_t j = 0; j < x.steps.size(); ++j) {
      EXPECT_EQ(x.steps[j].state, y.steps[j].state);
      EXPECT_EQ(x.steps[j].action, y.steps[j].action);
    }
    EXPECT_EQ(x.labels, y.labels);
    EXPECT_EQ(x.success, y.success);
  }
  write_dataset(back, dir + "/e.jsonl");
  std::ifstream f1(dir + "/d.jsonl"), f2(dir + "/e.jsonl");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
}

TEST(Dataset, RejectsMalformedFiles) {
  const std::string dir = seal::testing::temp_dir();
  EXPECT_THROW(read_dataset(dir + "/missing.jsonl"), InputError);
  {
    std::ofstream f(dir + "/bad.jsonl");
    f << "{not json\n";
  }
  EXPECT_THROW(read_dataset(dir + "/bad.jsonl"), InputError);
  {
    auto ds = generate_demos(EnvKind::key_door(), 1, 1);
    auto j = trajectory_to_json(ds, ds.trajectories[0]);
    j["labels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.trajectories[0].steps.size(); ++i) j["labels"].push_back({1, 1, 0, 0});
    std::ofstream f(dir + "/multi.jsonl");
    f << j.dump() << '\n';
  }
  EXPECT_THROW(read_dataset(dir + "/multi.jsonl"), InputError);
}
