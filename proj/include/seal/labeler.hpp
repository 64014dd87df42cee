#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "seal/expert.hpp"

namespace seal {

struct SubgoalSpace {
  std::string instruction;
  std::vector<std::string> subgoals;

  int k() const { return static_cast<int>(subgoals.size()); }

  std::uint64_t hash() const {
    std::uint64_t h = fnv1a(instruction);
    for (const auto& s : subgoals) h = fnv1a(s, fnv1a("\n", h));
    return h;
  }

  nlohmann::json to_json() const { return {{"instruction", instruction}, {"subgoals", subgoals}, {"hash", hex64(hash())}}; }
  static SubgoalSpace from_json(const nlohmann::json& j) {
    try {
      return {j.at("instruction").get<std::string>(), j.at("subgoals").get<std::vector<std::string>>()};
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed sub-goal space: ") + e.what());
    }
  }
};

/// The K one-hot codes.
class Codebook {
 public:
  explicit Codebook(int k) : k_(k) {
    if (k < 1) throw ContractViolation("codebook needs K >= 1");
  }
  int k() const { return k_; }
  std::vector<double> entry(int i) const {
    if (i < 0 || i >= k_) throw ContractViolation("codebook index out of range");
    return one_hot(i, k_);
  }

 private:
  int k_;
};

inline std::string object_label(const EnvKind& kind, int slot) {
  if (kind.is_key_door()) return slot == 0 ? "the key" : "the door";
  return "object " + std::to_string(slot + 1);
}

inline std::string task_instruction(const EnvKind& kind, const PickupOrder& order = {}) {
  if (kind.is_key_door()) return "Pick up the key, then unlock the door.";
  const PickupOrder o = order.empty() ? default_order(kind) : order;
  std::string s;
  for (std::size_t i = 0; i < o.size(); ++i) {
    s += i == 0 ? "Pick up " : ", then pick up ";
    s += object_label(kind, o[i]);
  }
  return s + ".";
}

inline SubgoalSpace canonical_space(const EnvKind& kind, const PickupOrder& order = {}) {
  SubgoalSpace sp{task_instruction(kind, order), {}};
  if (kind.is_key_door()) {
    sp.subgoals = {"move to the key", "pick up the key", "move to the door", "unlock the door"};
    return sp;
  }
  for (int slot : order.empty() ? default_order(kind) : order) {
    sp.subgoals.push_back("move to " + object_label(kind, slot));
    sp.subgoals.push_back("pick up " + object_label(kind, slot));
  }
  return sp;
}

/// Environment kind and completion order named by an instruction, if it is one of ours.
inline std::optional<std::pair<EnvKind, PickupOrder>> recognize_instruction(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto key = text.find("key");
  const auto door = text.find("door");
  if (key != std::string::npos && door != std::string::npos && key < door)
    return std::make_pair(EnvKind::key_door(), default_order(EnvKind::key_door()));
  static const std::regex object_re(R"(object\s+(\d+))");
  PickupOrder order;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), object_re); it != std::sregex_iterator(); ++it)
    order.push_back(std::stoi((*it)[1].str()) - 1);
  const int n = static_cast<int>(order.size());
  if (n < 3 || n > 5) return std::nullopt;
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < n; ++i)
    if (sorted[i] != i) return std::nullopt;
  return std::make_pair(EnvKind::grid_world(n), order);
}

/// First yes wins; no yes at all means the last sub-goal.
inline int resolve_multihot(const std::vector<int>& bits) {
  if (bits.empty()) throw ContractViolation("empty answer vector");
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) return static_cast<int>(i);
  return static_cast<int>(bits.size()) - 1;
}

/// Maps a free-text answer onto yes/no. nullopt when it is neither (or both).
inline std::optional<bool> normalize_yes_no(std::string_view text) {
  std::string s;
  for (char c : text) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::vector<std::string> words;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  if (words.empty()) return std::nullopt;
  if (words.front() == "yes" || words.front() == "true") return true;
  if (words.front() == "no" || words.front() == "false") return false;
  const bool y = std::find(words.begin(), words.end(), "yes") != words.end();
  const bool n = std::find(words.begin(), words.end(), "no") != words.end();
  if (y != n) return y;
  return std::nullopt;
}

/// Parses "Step i: ..." lines of a decomposition answer into sub-goal descriptions.
inline std::vector<std::string> parse_steps(const std::string& raw) {
  static const std::regex step_re(R"(step\s*(\d+)\s*[:.)-]\s*([^\n]*))", std::regex::icase);
  std::map<int, std::string> steps;
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), step_re); it != std::sregex_iterator(); ++it) {
    std::string body = (*it)[2].str();
    static const std::regex features_re(R"(,?\s*relevant features.*$)", std::regex::icase);
    body = std::regex_replace(body, features_re, "");
    body.erase(std::remove(body.begin(), body.end(), '*'), body.end());
    while (!body.empty() && (std::isspace(static_cast<unsigned char>(body.back())) || body.back() == '.' || body.back() == ','))
      body.pop_back();
    while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.erase(body.begin());
    const int idx = std::stoi((*it)[1].str());
    if (!body.empty() && !steps.count(idx)) steps[idx] = body;
  }
  std::vector<std::string> out;
  for (auto& [i, s] : steps) out.push_back(s);
  return out;
}

/// Cache / fixture key of a state under a given sub-goal space. Step counters are ignored.
inline std::string state_key(const Environment& env, const EnvState& s, const SubgoalSpace& space) {
  const auto raw = env.raw(s);
  std::string key;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i) key += ',';
    key += std::to_string(raw[i]);
  }
  return key + "#" + hex64(space.hash());
}

// ---------------------------------------------------------------------------
// Backends.

class LabelerBackend {
 public:
  virtual ~LabelerBackend() = default;
  virtual std::string name() const = 0;
  virtual SubgoalSpace decompose(const std::string& instruction) = 0;
  /// Is `s` in stage `index` of `space`?
  virtual bool judge(const Environment& env, const EnvState& s, const SubgoalSpace& space, int index) = 0;
  /// Upper bound on concurrent label_state calls.
  virtual int parallel_width() const { return 1; }
  /// Number of judge/decompose requests answered so far.
  std::int64_t calls() const { return calls_.load(); }

 protected:
  std::atomic<std::int64_t> calls_{0};
};

/// Rule-table backend: exact answers from the environment's own stage logic.
class OracleBackend : public LabelerBackend {
 public:
  std::string name() const override { return "oracle"; }

  SubgoalSpace decompose(const std::string& instruction) override {
    if (instruction.find_first_not_of(" \t\r\n") == std::string::npos) throw ContractViolation("empty task instruction");
    ++calls_;
    const auto rec = recognize_instruction(instruction);
    if (!rec) throw UnsupportedTask("instruction not recognized: " + instruction);
    SubgoalSpace sp = canonical_space(rec->first, rec->second);
    sp.instruction = instruction;
    return sp;
  }

  bool judge(const Environment& env, const EnvState& s, const SubgoalSpace& space, int index) override {
    if (space.k() != env.kind().num_subgoals()) throw ContractViolation("sub-goal count does not match the environment");
    ++calls_;
    return oracle_subgoal(env, s) == index;
  }
};

/// Answers from a recorded label file (the JSONL cache format). Decomposition records carry
/// "instruction" and "subgoals" fields.
class ReplayBackend : public LabelerBackend {
 public:
  explicit ReplayBackend(const std::string& fixture) : path_(fixture) {
    std::ifstream in(fixture, std::ios::binary);
    if (!in) throw InputError("cannot read replay fixture " + fixture);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.contains("subgoals")) {
          const auto sp = SubgoalSpace::from_json(j);
          spaces_[sp.instruction] = sp;
        } else {
          bits_[j.at("state_key").get<std::string>()] = j.at("bits").get<std::vector<int>>();
        }
      } catch (const nlohmann::json::exception& e) {
        throw InputError(fixture + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }

  std::string name() const override { return "replay"; }

  SubgoalSpace decompose(const std::string& instruction) override {
    if (instruction.find_first_not_of(" \t\r\n") == std::string::npos) throw ContractViolation("empty task instruction");
    ++calls_;
    auto it = spaces_.find(instruction);
    if (it == spaces_.end()) throw UnsupportedTask("no recorded decomposition for: " + instruction);
    return it->second;
  }

  bool judge(const Environment& env, const EnvState& s, const SubgoalSpace& space, int index) override {
    ++calls_;
    auto it = bits_.find(state_key(env, s, space));
    if (it == bits_.end() || index >= static_cast<int>(it->second.size()))
      throw BackendError("state missing from replay fixture " + path_);
    return it->second[index] != 0;
  }

 private:
  std::string path_;
  std::map<std::string, SubgoalSpace> spaces_;
  std::map<std::string, std::vector<int>> bits_;
};

// ---------------------------------------------------------------------------
// Labeling.

/// K judgments, resolved to a sub-goal index.
inline std::vector<int> judge_state(const Environment& env, const EnvState& s, const SubgoalSpace& space,
                                    LabelerBackend& backend) {
  if (space.k() != env.kind().num_subgoals())
    throw ContractViolation("space has K=" + std::to_string(space.k()) + ", environment needs " +
                            std::to_string(env.kind().num_subgoals()));
  std::vector<int> bits(space.k());
  for (int i = 0; i < space.k(); ++i) bits[i] = backend.judge(env, s, space, i) ? 1 : 0;
  return bits;
}

inline std::vector<double> label_state(const Environment& env, const EnvState& s, const SubgoalSpace& space,
                                       LabelerBackend& backend) {
  return one_hot(resolve_multihot(judge_state(env, s, space, backend)), space.k());
}

struct CacheEntry {
  std::vector<int> bits;
  int resolved = -1;
};

/// Append-only JSONL label cache, one line per distinct state key.
class LabelCache {
 public:
  explicit LabelCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.contains("subgoals")) {
          spaces_.insert(j.at("instruction").get<std::string>());
          continue;
        }
        CacheEntry e{j.at("bits").get<std::vector<int>>(), j.at("resolved_index").get<int>()};
        entries_[j.at("state_key").get<std::string>()] = e;
      } catch (const nlohmann::json::exception& e) {
        throw InputError(path_ + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }

  const CacheEntry* find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void put(const std::string& key, const CacheEntry& e) {
    std::lock_guard lock(mu_);
    if (entries_.count(key)) return;
    entries_[key] = e;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw InputError("cannot write label cache " + path_);
    out << nlohmann::json{{"state_key", key}, {"bits", e.bits}, {"resolved_index", e.resolved}}.dump() << '\n';
  }

  /// Records the decomposition so the file doubles as a replay fixture.
  void put_space(const SubgoalSpace& sp) {
    std::lock_guard lock(mu_);
    if (spaces_.count(sp.instruction)) return;
    spaces_.insert(sp.instruction);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw InputError("cannot write label cache " + path_);
    out << nlohmann::json{{"instruction", sp.instruction}, {"subgoals", sp.subgoals}}.dump() << '\n';
  }

  std::size_t size() const { return entries_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, CacheEntry> entries_;
  std::set<std::string> spaces_;
  std::mutex mu_;
};

struct LabelStats {
  std::size_t states = 0;
  std::size_t distinct = 0;
  std::size_t cache_hits = 0;
  std::int64_t backend_calls = 0;
};

/// Labels every state of `dataset`. With a cache path, results are persisted as they arrive and
/// states already present are never sent to the backend. A backend failure leaves the cache with
/// every state finished so far and rethrows as LabelingError carrying the flat state index.
inline DemoDataset label_dataset(const DemoDataset& dataset, const SubgoalSpace& space, LabelerBackend& backend,
                                 const std::optional<std::string>& cache_path = {}, LabelStats* stats = nullptr) {
  const Environment env(dataset.kind, dataset.order);
  if (space.k() != dataset.kind.num_subgoals())
    throw ConfigError("sub-goal space has K=" + std::to_string(space.k()) + " but " + dataset.kind.name() + " needs K=" +
                      std::to_string(dataset.kind.num_subgoals()));
  std::optional<LabelCache> cache;
  if (cache_path) {
    cache.emplace(*cache_path);
    cache->put_space(space);
  }

  // Distinct uncached states in first-seen order.
  struct Pending {
    std::string key;
    const EnvState* state;
    std::size_t first_index;
  };
  std::vector<Pending> pending;
  std::map<std::string, int> resolved;
  std::vector<std::string> keys;
  LabelStats st;
  const std::int64_t calls_before = backend.calls();
  {
    std::set<std::string> queued;
    std::size_t idx = 0;
    for (const auto& t : dataset.trajectories)
      for (const auto& step : t.steps) {
        auto key = state_key(env, step.state, space);
        if (cache && cache->find(key)) {
          ++st.cache_hits;
          resolved[key] = cache->find(key)->resolved;
        } else if (queued.insert(key).second) {
          pending.push_back({key, &step.state, idx});
        }
        keys.push_back(std::move(key));
        ++idx;
      }
    st.states = idx;
    st.distinct = std::set<std::string>(keys.begin(), keys.end()).size();
  }

  // Workers may finish out of order; entries are committed to the cache strictly in first-seen
  // order so the file is identical for any worker count.
  std::vector<std::optional<CacheEntry>> results(pending.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::size_t committed = 0;
  std::optional<std::size_t> fail_at;
  std::string fail_msg;
  auto commit_ready = [&] {
    while (committed < pending.size() && results[committed]) {
      if (cache) cache->put(pending[committed].key, *results[committed]);
      ++committed;
    }
  };
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size() || failed.load()) return;
      try {
        CacheEntry e;
        e.bits = judge_state(env, *pending[i].state, space, backend);
        e.resolved = resolve_multihot(e.bits);
        std::lock_guard lock(mu);
        results[i] = std::move(e);
        commit_ready();
      } catch (const std::exception& ex) {
        std::lock_guard lock(mu);
        failed = true;
        if (!fail_at || pending[i].first_index < *fail_at) {
          fail_at = pending[i].first_index;
          fail_msg = ex.what();
        }
      }
    }
  };
  const int width = std::max(1, std::min<int>(backend.parallel_width(), static_cast<int>(pending.size())));
  if (width <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < width; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (fail_at) throw LabelingError("labeling failed at state " + std::to_string(*fail_at) + ": " + fail_msg, *fail_at);
  for (std::size_t i = 0; i < pending.size(); ++i) resolved[pending[i].key] = results[i]->resolved;

  DemoDataset out = dataset;
  std::size_t idx = 0;
  for (auto& t : out.trajectories) {
    std::vector<int> labels;
    for (std::size_t j = 0; j < t.steps.size(); ++j) labels.push_back(resolved.at(keys[idx++]));
    t.labels = std::move(labels);
  }
  st.backend_calls = backend.calls() - calls_before;
  if (stats) *stats = st;
  return out;
}

}  // namespace seal
