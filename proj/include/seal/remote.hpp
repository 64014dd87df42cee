#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "seal/labeler.hpp"

#ifndef SEAL_PROMPT_DIR
#define SEAL_PROMPT_DIR "prompts"
#endif

namespace seal {

/// Plain prompt-in, text-out transport.
class TextCompletion {
 public:
  virtual ~TextCompletion() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Replaces every {{name}} with vars[name]. Unknown placeholders are an error.
inline std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = tmpl.find("}}", open);
    if (close == std::string::npos) throw ConfigError("unterminated placeholder in prompt template");
    out.append(tmpl, pos, open - pos);
    const std::string name = tmpl.substr(open + 2, close - open - 2);
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("prompt template uses unknown placeholder {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  out.append(tmpl, pos);
  return out;
}

struct PromptTemplates {
  std::string decompose;
  std::string judge;

  static PromptTemplates load(const std::string& dir = SEAL_PROMPT_DIR) {
    auto read = [&](const std::string& name) {
      std::ifstream in(dir + "/" + name, std::ios::binary);
      if (!in) throw ConfigError("cannot read prompt template " + dir + "/" + name);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    return {read("decompose.txt"), read("judge.txt")};
  }
};

inline std::string coord(const Position& p) { return "[" + std::to_string(p.x) + ", " + std::to_string(p.y) + "]"; }

inline std::map<std::string, std::string> decompose_vars(const EnvKind& kind, const std::string& instruction) {
  std::string objects, obs;
  const int n = kind.n_objects;
  for (int i = 0; i < n; ++i) objects += "- " + object_label(kind, i) + "\n";
  objects += "- the player";
  int o = 1;
  for (int i = 0; i < n; ++i) {
    obs += "o" + std::to_string(o++) + ": x-coordinate of " + object_label(kind, i) + "\n";
    obs += "o" + std::to_string(o++) + ": y-coordinate of " + object_label(kind, i) + "\n";
  }
  obs += "o" + std::to_string(o++) + ": x-coordinate of the player\n";
  obs += "o" + std::to_string(o++) + ": y-coordinate of the player";
  for (int i = 0; i < n; ++i) {
    const bool door = kind.is_key_door() && i == 1;
    obs += "\no" + std::to_string(o++) + ": status of " + object_label(kind, i) +
           (door ? " (unlocked: 1, locked: 0)" : " (picked up: 1, not picked up: 0)");
  }
  std::string actions;
  for (int a = 0; a < kind.num_actions(); ++a) {
    if (a) actions += ", ";
    actions += std::string(action_name(static_cast<Action>(a)));
  }
  return {{"instruction", instruction}, {"objects", objects}, {"observations", obs}, {"actions", actions}};
}

inline std::map<std::string, std::string> judge_vars(const Environment& env, const EnvState& s, const SubgoalSpace& space,
                                                     int index) {
  const EnvKind& kind = env.kind();
  std::string entities, statuses, stages;
  for (int i = 0; i < kind.n_objects; ++i) {
    std::string name = object_label(kind, i);
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    entities += (i ? "\n" : "") + name + " is at " + coord(s.positions[i]) + ".";
    const bool door = kind.is_key_door() && i == 1;
    const char* verb = door ? (s.statuses[i] ? " is unlocked." : " is locked.")
                            : (s.statuses[i] ? " has been picked up." : " has not been picked up.");
    statuses += (i ? "\n" : "") + name + verb;
  }
  for (int i = 0; i < space.k(); ++i) stages += (i ? "\n" : "") + std::string("Stage ") + std::to_string(i + 1) + ": " + space.subgoals[i];
  const std::string rules = kind.is_key_door()
                                ? "the door can only be unlocked while standing on it after the key was picked up"
                                : "objects can only be picked up while standing on them, in the order of the stages";
  return {{"entities", entities},
          {"rules", rules},
          {"player", coord(s.player())},
          {"statuses", statuses},
          {"stages", stages},
          {"index", std::to_string(index + 1)},
          {"subgoal", space.subgoals.at(index)}};
}

/// Language-model backend over any text-completion transport. Each judgment that is not a clear
/// yes/no is asked once more; a second failure is fatal.
class RemoteBackend : public LabelerBackend {
 public:
  RemoteBackend(std::shared_ptr<TextCompletion> llm, PromptTemplates prompts, EnvKind kind, int width = 1)
      : llm_(std::move(llm)), prompts_(std::move(prompts)), kind_(kind), width_(std::max(1, width)) {}

  std::string name() const override { return "remote"; }
  int parallel_width() const override { return width_; }

  SubgoalSpace decompose(const std::string& instruction) override {
    if (instruction.find_first_not_of(" \t\r\n") == std::string::npos) throw ContractViolation("empty task instruction");
    ++calls_;
    const std::string raw = llm_->complete(render_template(prompts_.decompose, decompose_vars(kind_, instruction)));
    auto steps = parse_steps(raw);
    if (steps.empty()) throw DecompositionError("no step lines in decomposition answer", raw);
    return {instruction, std::move(steps)};
  }

  bool judge(const Environment& env, const EnvState& s, const SubgoalSpace& space, int index) override {
    const std::string prompt = render_template(prompts_.judge, judge_vars(env, s, space, index));
    std::string last;
    for (int attempt = 0; attempt < 2; ++attempt) {
      ++calls_;
      last = llm_->complete(prompt);
      if (auto v = normalize_yes_no(last)) return *v;
    }
    throw LabelingError("answer is neither yes nor no: '" + last.substr(0, 80) + "'", 0);
  }

 private:
  std::shared_ptr<TextCompletion> llm_;
  PromptTemplates prompts_;
  EnvKind kind_;
  int width_;
};

/// Minimum spacing between consecutive requests, shared by all workers.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second) : interval_(per_second > 0 ? 1.0 / per_second : 0.0) {}

  void acquire() {
    if (interval_ <= 0) return;
    std::unique_lock lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    if (next_ > now) {
      const auto wait = next_ - now;
      next_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(interval_));
      lock.unlock();
      std::this_thread::sleep_for(wait);
      return;
    }
    next_ = now + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(interval_));
  }

 private:
  double interval_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

struct RemoteConfig {
  std::string endpoint = "https://api.openai.com";
  std::string model = "gpt-4o";
  std::string credential_env = "OPENAI_API_KEY";
  int width = 4;
  double requests_per_second = 5.0;
  int timeout_seconds = 60;
};

}  // namespace seal
