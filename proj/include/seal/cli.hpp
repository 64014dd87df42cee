#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seal/experiments.hpp"
#include "seal/http_completion.hpp"
#include "seal/plot.hpp"
#include "seal/remote.hpp"

namespace seal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kInput = 3, kBackend = 4 };

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a(ss.str()));
}

/// Everything needed to re-run a command: the command line, resolved config, and content hashes
/// of every input and output file.
struct RunManifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  json to_json() const {
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[p] = file_hash(p);
    for (const auto& p : outputs) out[p] = file_hash(p);
    return {{"tool", "seal"}, {"version", kToolVersion}, {"command", command}, {"config", config},
            {"seed", seed},   {"inputs", in},            {"outputs", out}};
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write manifest " + path);
    f << to_json().dump(2) << '\n';
  }
};

inline void ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline PickupOrder order_arg(const std::string& s, const EnvKind& kind) {
  return s.empty() ? PickupOrder{} : parse_order(s, kind);
}

inline std::vector<int> int_list(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) {
      try {
        v.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("not an integer list: " + s);
      }
    }
  return v;
}

inline std::vector<MethodKind> method_list(const std::string& s) {
  std::vector<MethodKind> v;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) v.push_back(parse_method(item));
  return v;
}

inline std::string pm(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", m.mean, m.std);
  return buf;
}

// ---------------------------------------------------------------------------
// Tables emitted by reproduce / sweep.

struct TableCell {
  std::string row;     // e.g. "200", "ACB", "K=6"
  std::string column;  // method name, possibly with a suffix
  EvalReport report;
  int metric = -1;  // -1: task success, otherwise completion slot
};

inline MeanStd cell_value(const TableCell& c) { return c.metric < 0 ? c.report.success() : c.report.subgoal(c.metric); }

inline void write_table(const std::vector<TableCell>& cells, const std::string& dir, const std::string& title) {
  std::vector<std::string> rows, cols;
  for (const auto& c : cells) {
    if (std::find(rows.begin(), rows.end(), c.row) == rows.end()) rows.push_back(c.row);
    if (std::find(cols.begin(), cols.end(), c.column) == cols.end()) cols.push_back(c.column);
  }
  std::ofstream csv(dir + "/table.csv", std::ios::binary | std::ios::trunc);
  csv << "row,column,mean,std,seeds\n";
  json all = json::array();
  for (const auto& c : cells) {
    const auto v = cell_value(c);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu", v.mean, v.std, c.report.fragments.size());
    csv << c.row << ',' << c.column << ',' << buf << '\n';
    all.push_back({{"row", c.row}, {"column", c.column}, {"metric", c.metric}, {"report", c.report.to_json()}});
  }
  std::ofstream md(dir + "/table.md", std::ios::binary | std::ios::trunc);
  md << "## " << title << "\n\n|   |";
  for (const auto& c : cols) md << ' ' << c << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
  md << '\n';
  for (const auto& r : rows) {
    md << "| " << r << " |";
    for (const auto& col : cols) {
      auto it = std::find_if(cells.begin(), cells.end(), [&](const TableCell& c) { return c.row == r && c.column == col; });
      md << ' ' << (it == cells.end() ? "" : pm(cell_value(*it))) << " |";
    }
    md << '\n';
  }
  std::ofstream js(dir + "/report.json", std::ios::binary | std::ios::trunc);
  js << all.dump(2) << '\n';
}

/// Per-seed shards: runs/<name>/<seed>/fragments.json
inline void write_seed_shards(const std::vector<TableCell>& cells, const std::string& dir) {
  std::map<std::uint64_t, json> by_seed;
  for (const auto& c : cells)
    for (const auto& f : c.report.fragments)
      by_seed[f.seed].push_back({{"row", c.row},
                                 {"column", c.column},
                                 {"success", f.success},
                                 {"subgoal_rates", f.subgoal_rates},
                                 {"episodes", f.episodes}});
  for (auto& [seed, j] : by_seed) {
    const std::string d = dir + "/" + std::to_string(seed);
    fs::create_directories(d);
    std::ofstream out(d + "/fragments.json", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reproduction bundles.

struct BundleOptions {
  int seeds = 5;
  std::vector<int> demos;  // empty: the bundle's own budgets
  std::vector<MethodKind> methods;
  std::optional<int> epochs;
  std::optional<double> lr;
  int episodes = 100;
  int workers = 1;
};

inline const std::vector<MethodKind>& all_methods() {
  static const std::vector<MethodKind> m = {MethodKind::BC, MethodKind::LISA,   MethodKind::SDIL,
                                            MethodKind::TC, MethodKind::SEAL_L, MethodKind::SEAL};
  return m;
}

inline const std::vector<std::string>& bundle_names() {
  static const std::vector<std::string> n = {"table1-keydoor", "table1-grid",      "table2",
                                             "table3-long",    "table4-variations", "fig3-ksweep"};
  return n;
}

inline std::vector<TableCell> run_bundle(const std::string& name, const BundleOptions& opt, std::ostream& log) {
  const auto seeds = seed_range(opt.seeds);
  auto budget_for = [&](const EnvKind& kind) {
    Budget b = desk_budget(kind);
    if (opt.epochs) b.epochs = *opt.epochs;
    if (opt.lr) b.lr = *opt.lr;
    return b;
  };
  auto pick = [&](std::vector<int> own) { return opt.demos.empty() ? own : opt.demos; };
  const auto methods = opt.methods.empty() ? all_methods() : opt.methods;
  std::vector<TableCell> cells;
  auto run = [&](RunSpec spec, const std::string& row, const std::string& col, std::vector<int> metrics) {
    log << name << ": " << col << " @ " << row << " ..." << std::flush;
    const auto report = run_seeds(spec, seeds, opt.workers);
    log << " " << pm(report.success()) << '\n';
    for (int m : metrics) cells.push_back({row, m < 0 ? col : col + " [" + completion_names(spec.env)[m] + "]", report, m});
  };
  auto base = [&](MethodKind m, const EnvKind& env, int n) {
    RunSpec s;
    s.method = m;
    s.env = env;
    s.n_demos = n;
    s.budget = budget_for(env);
    s.episodes = opt.episodes;
    return s;
  };

  if (name == "table1-keydoor" || name == "table1-grid") {
    const EnvKind env = name == "table1-keydoor" ? EnvKind::key_door() : EnvKind::grid_world(3);
    for (int n : pick(env.is_key_door() ? std::vector<int>{30, 100, 150, 200} : std::vector<int>{200, 300, 400}))
      for (auto m : methods) run(base(m, env, n), std::to_string(n), std::string(method_name(m)), {-1, 0});
  } else if (name == "table2") {
    for (int n : pick({30, 100, 150, 200}))
      for (auto m : methods) run(base(m, EnvKind::key_door(), n), "keydoor " + std::to_string(n), std::string(method_name(m)), {0});
    for (int n : pick({200, 300, 400}))
      for (auto m : methods) run(base(m, EnvKind::grid_world(3), n), "grid3 " + std::to_string(n), std::string(method_name(m)), {0, 1});
  } else if (name == "table3-long") {
    const std::vector<std::pair<int, std::vector<int>>> grid = {{3, {300, 400}}, {4, {400, 500}}, {5, {500, 600}}};
    for (const auto& [objects, budgets] : grid)
      for (int n : pick(budgets))
        for (auto m : methods)
          run(base(m, EnvKind::grid_world(objects), n), "grid" + std::to_string(objects) + " " + std::to_string(n),
              std::string(method_name(m)), {-1});
  } else if (name == "table4-variations") {
    const EnvKind env = EnvKind::grid_world(3);
    for (const std::string ord : {"ABC", "ACB", "BAC", "BCA"})
      for (auto m : methods) {
        RunSpec s = base(m, env, pick({400}).front());
        s.order = default_order(env);
        s.eval_order = parse_order(ord, env);
        s.variant_demos = ord == "ABC" ? 0 : 10;
        run(s, ord, std::string(method_name(m)), {-1});
      }
  } else if (name == "fig3-ksweep") {
    const EnvKind env = EnvKind::grid_world(3);
    std::vector<MethodKind> ms = opt.methods.empty() ? std::vector<MethodKind>{MethodKind::LISA, MethodKind::SDIL} : opt.methods;
    for (int n : pick({200, 300, 400}))
      for (auto m : ms)
        for (int k : {2, 4, 6, 8, 10}) {
          RunSpec s = base(m, env, n);
          s.k = k;
          run(s, "K=" + std::to_string(k), std::string(method_name(m)) + " n=" + std::to_string(n), {-1});
        }
  } else {
    throw ConfigError("unknown bundle '" + name + "'");
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct Options {
  // gen-data
  std::string env = "keydoor";
  int n = 200;
  std::uint64_t seed = 1;
  std::string order;
  std::string out;
  // label
  std::string data;
  std::string backend = "oracle";
  std::string cache;
  std::string fixture;
  std::string instruction;
  std::string prompts = SEAL_PROMPT_DIR;
  RemoteConfig remote;
  // train
  std::string method = "seal";
  std::vector<std::string> train_data;
  int demos = 0;
  int epochs = 200;
  std::optional<double> lr;
  double beta = 0.4;
  double tau = 1.0;
  int hidden = 128;
  std::optional<int> k;
  int batch_size = 64;
  int validate_every = 5;
  int validation_episodes = 20;
  std::optional<double> early_stop;
  int checkpoint_every = 0;
  std::string name;
  std::string runs_dir = "runs";
  // eval / trace
  std::vector<std::string> checkpoints;
  std::string env_override;
  int episodes = 100;
  std::optional<std::uint64_t> eval_seed;
  int workers = 1;
  bool expert = false;
  // sweep / reproduce
  std::string methods;
  std::string k_values = "2,4,6,8,10";
  std::string demo_list;
  int seeds = 5;
  std::string bundle;
  std::optional<int> bundle_epochs;
  // plot
  std::string input;
  std::string title;
};

inline DemoDataset load_or_generate(const Options& o, const EnvKind& kind, std::vector<std::string>& inputs) {
  if (!o.train_data.empty()) {
    DemoDataset merged;
    bool first = true;
    for (const auto& p : o.train_data) {
      auto ds = read_dataset(p);
      inputs.push_back(p);
      if (first) {
        merged = std::move(ds);
        first = false;
      } else {
        if (!(ds.kind == merged.kind) || ds.order != merged.order)
          throw InputError("--data files must share environment and order; train with one file per order");
        for (auto& t : ds.trajectories) merged.trajectories.push_back(std::move(t));
      }
    }
    return merged;
  }
  if (o.demos < 1) throw ConfigError("train needs --data or --demos N");
  return oracle_labeled(kind, o.demos, data_seed(o.seed), order_arg(o.order, kind));
}

inline int cmd_gen_data(const Options& o, std::ostream& out) {
  if (o.n < 1) throw ConfigError("--n must be >= 1");
  const EnvKind kind = EnvKind::parse(o.env);
  const PickupOrder order = order_arg(o.order, kind);
  const std::string path = o.out.empty() ? o.runs_dir + "/data/" + kind.name() + (o.order.empty() ? "" : "-" + o.order) +
                                               "-n" + std::to_string(o.n) + "-s" + std::to_string(o.seed) + ".jsonl"
                                         : o.out;
  ensure_parent(path);
  const auto ds = generate_demos(kind, o.n, o.seed, order);
  write_dataset(ds, path);
  RunManifest m{"gen-data", {{"env", kind.name()}, {"n", o.n}, {"order", order_string(ds.order)}}, o.seed, {}, {path}};
  m.write(path + ".manifest.json");
  out << "wrote " << ds.trajectories.size() << " trajectories (" << ds.num_steps() << " steps) to " << path << '\n';
  return kOk;
}

inline std::unique_ptr<LabelerBackend> make_backend(const Options& o, const EnvKind& kind) {
  if (o.backend == "oracle") return std::make_unique<OracleBackend>();
  if (o.backend == "replay") {
    if (o.fixture.empty()) throw ConfigError("--backend replay needs --fixture");
    return std::make_unique<ReplayBackend>(o.fixture);
  }
  if (o.backend == "remote") {
    auto http = std::make_shared<HttpCompletion>(o.remote);
    return std::make_unique<RemoteBackend>(http, PromptTemplates::load(o.prompts), kind, o.remote.width);
  }
  throw ConfigError("unknown backend '" + o.backend + "' (expected oracle|replay|remote)");
}

inline int cmd_label(const Options& o, std::ostream& out) {
  if (o.data.empty() || o.out.empty()) throw ConfigError("label needs --data and --out");
  const auto ds = read_dataset(o.data);
  auto backend = make_backend(o, ds.kind);
  const std::string instruction = o.instruction.empty() ? task_instruction(ds.kind, ds.order) : o.instruction;
  const SubgoalSpace space = backend->decompose(instruction);
  LabelStats st;
  ensure_parent(o.out);
  if (!o.cache.empty()) ensure_parent(o.cache);
  const auto labeled = label_dataset(ds, space, *backend, o.cache.empty() ? std::nullopt : std::optional(o.cache), &st);
  write_dataset(labeled, o.out);
  {
    std::ofstream sp(o.out + ".space.json", std::ios::binary | std::ios::trunc);
    sp << space.to_json().dump(2) << '\n';
  }
  RunManifest m{"label",
                {{"backend", backend->name()}, {"instruction", instruction}, {"k", space.k()}, {"space_hash", hex64(space.hash())}},
                0,
                {o.data},
                {o.out, o.out + ".space.json"}};
  if (!o.cache.empty()) m.outputs.push_back(o.cache);
  m.write(o.out + ".manifest.json");
  out << "labeled " << st.states << " states (" << st.distinct << " distinct, " << st.cache_hits
      << " cache hits) with " << st.backend_calls << " backend queries; K=" << space.k() << '\n';
  return kOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig cfg;
  cfg.method = parse_method(o.method);
  std::vector<std::string> inputs;
  const DemoDataset ds = load_or_generate(o, EnvKind::parse(o.env), inputs);
  const EnvKind kind = ds.kind;
  cfg.env = kind;
  cfg.order = o.order.empty() ? ds.order : parse_order(o.order, kind);
  cfg.seed = o.seed;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.lr = o.lr;
  cfg.beta = o.beta;
  cfg.tau = o.tau;
  cfg.hidden = o.hidden;
  cfg.k = o.k;
  cfg.validate_every = o.validate_every;
  cfg.validation_episodes = o.validation_episodes;
  cfg.early_stop_success = o.early_stop;

  const std::string name = o.name.empty() ? std::string(method_name(cfg.method)) + "-" + kind.name() + "-n" +
                                                std::to_string(ds.trajectories.size())
                                          : o.name;
  const std::string dir = o.runs_dir + "/" + name + "/" + std::to_string(o.seed);
  fs::create_directories(dir);
  const std::uint64_t space_hash = canonical_space(kind, ds.order).hash();
  std::vector<std::string> outputs;
  auto result = train(cfg, {ds}, space_hash, [&](const ModelBundle& m, int epoch) {
    if (o.checkpoint_every > 0 && epoch % o.checkpoint_every == 0) {
      const std::string p = dir + "/epoch-" + std::to_string(epoch) + ".ckpt";
      save_checkpoint(m, p);
      outputs.push_back(p);
    }
  });
  save_checkpoint(result.model, dir + "/model.ckpt");
  result.trace.write_csv(dir + "/trace.csv");
  outputs.push_back(dir + "/model.ckpt");
  outputs.push_back(dir + "/trace.csv");
  json config = {{"method", method_name(cfg.method)},
                 {"env", kind.name()},
                 {"order", order_string(cfg.order.empty() ? default_order(kind) : cfg.order)},
                 {"demos", ds.trajectories.size()},
                 {"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size},
                 {"lr", cfg.learning_rate()},
                 {"beta", cfg.beta},
                 {"tau", cfg.tau},
                 {"hidden", cfg.hidden},
                 {"k", cfg.num_subgoals()},
                 {"validate_every", cfg.validate_every},
                 {"validation_episodes", cfg.validation_episodes},
                 {"labeler", inputs.empty() ? "oracle" : "from-data"}};
  RunManifest{"train", config, o.seed, inputs, outputs}.write(dir + "/manifest.json");
  out << "trained " << method_name(cfg.method) << " on " << ds.num_steps() << " steps for " << cfg.epochs
      << " epochs; final loss " << result.trace.epoch_loss(cfg.epochs) << "; checkpoint " << dir << "/model.ckpt\n";
  return kOk;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  if (o.checkpoints.empty()) throw ConfigError("eval needs --checkpoint");
  EvalReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& path : o.checkpoints) {
    const ModelBundle m = load_checkpoint(path);
    const EnvKind kind = o.env_override.empty() ? m.env : EnvKind::parse(o.env_override);
    const Environment env(kind, order_arg(o.order, kind));
    report.method = method_name(m.method);
    report.env = kind.name();
    report.order = order_string(env.order());
    report.k = m.k;
    auto frag = evaluate(m, env, o.episodes, o.eval_seed ? *o.eval_seed : eval_seed(m.seed), o.workers);
    frag.seed = m.seed;
    report.fragments.push_back(frag);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto s = report.success();
  out << report.method << " on " << report.env << ": success " << pm(s) << " over " << report.fragments.size()
      << " checkpoint(s)";
  const auto names = completion_names(EnvKind::parse(report.env));
  for (std::size_t i = 0; i < report.num_subgoals(); ++i) out << "; " << names[i] << " " << pm(report.subgoal(i));
  out << '\n';
  if (!o.out.empty()) {
    ensure_parent(o.out);
    std::ofstream js(o.out, std::ios::binary | std::ios::trunc);
    js << report.to_json().dump(2) << '\n';
    js.close();
    std::ofstream csv(o.out + ".csv", std::ios::binary | std::ios::trunc);
    csv << "seed,success";
    for (std::size_t i = 0; i < report.num_subgoals(); ++i) csv << ",subgoal_" << i;
    csv << '\n';
    for (const auto& f : report.fragments) {
      csv << f.seed << ',' << f.success;
      for (double r : f.subgoal_rates) csv << ',' << r;
      csv << '\n';
    }
  }
  return kOk;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
  const EnvKind kind = EnvKind::parse(o.env);
  const auto methods = method_list(o.methods.empty() ? "lisa,sdil" : o.methods);
  const auto ks = int_list(o.k_values);
  const auto demos = o.demo_list.empty() ? std::vector<int>{400} : int_list(o.demo_list);
  Budget b = desk_budget(kind);
  if (o.bundle_epochs) b.epochs = *o.bundle_epochs;
  if (o.lr) b.lr = *o.lr;
  const auto cells = sweep_k(kind, methods, ks, demos, seed_range(o.seeds), b, o.episodes, o.workers);
  const std::string dir = o.runs_dir + "/" + (o.name.empty() ? "sweep-" + kind.name() : o.name);
  fs::create_directories(dir);
  std::vector<TableCell> table;
  for (const auto& c : cells)
    table.push_back({"K=" + std::to_string(c.k), std::string(method_name(c.method)) + " n=" + std::to_string(c.n_demos), c.report, -1});
  write_table(table, dir, "success vs K on " + kind.name());
  write_seed_shards(table, dir);
  for (const auto& c : table) out << c.column << ' ' << c.row << ": " << pm(cell_value(c)) << '\n';
  return kOk;
}

inline int cmd_reproduce(const Options& o, std::ostream& out) {
  if (o.bundle.empty()) throw ConfigError("reproduce needs a bundle name");
  if (std::find(bundle_names().begin(), bundle_names().end(), o.bundle) == bundle_names().end())
    throw ConfigError("unknown bundle '" + o.bundle + "'");
  BundleOptions bo;
  bo.seeds = o.seeds;
  bo.demos = int_list(o.demo_list);
  bo.methods = method_list(o.methods);
  bo.epochs = o.bundle_epochs;
  bo.lr = o.lr;
  bo.episodes = o.episodes;
  bo.workers = o.workers;
  const auto cells = run_bundle(o.bundle, bo, out);
  const std::string dir = o.runs_dir + "/" + o.bundle;
  fs::create_directories(dir);
  write_table(cells, dir, o.bundle);
  write_seed_shards(cells, dir);
  std::ifstream md(dir + "/table.md");
  out << md.rdbuf();
  return kOk;
}

inline int cmd_trace(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("trace needs --out");
  SubgoalTrace trace;
  if (o.expert) {
    const EnvKind kind = EnvKind::parse(o.env);
    trace = trace_expert(Environment(kind, order_arg(o.order, kind)), o.seed);
  } else {
    if (o.checkpoints.size() != 1) throw ConfigError("trace needs exactly one --checkpoint (or --expert)");
    const ModelBundle m = load_checkpoint(o.checkpoints.front());
    trace = trace_episode(m, Environment(m.env, order_arg(o.order, m.env)), o.seed);
  }
  ensure_parent(o.out);
  trace.write_jsonl(o.out);
  out << trace.rows.size() << " steps, success " << (trace.success ? "yes" : "no") << ", sub-goal accuracy "
      << trace.accuracy() << '\n';
  return kOk;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
  return f;
}

inline int cmd_plot(const Options& o, std::ostream& out) {
  if (o.input.empty() || o.out.empty()) throw ConfigError("plot needs --input and --out");
  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw InputError("cannot read " + o.input);
  std::string header;
  std::getline(in, header);
  std::string svg;
  if (!header.empty() && header.front() == '{') {
    // sub-goal trace (JSONL)
    std::vector<int> pred, truth, vq, llm;
    int k = 1;
    for (std::string line = header; !line.empty() || std::getline(in, line); line.clear()) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      pred.push_back(j.at("z_index").get<int>());
      truth.push_back(j.at("oracle").get<int>());
      vq.push_back(j.at("z_vq").get<int>());
      llm.push_back(j.at("z_llm").get<int>());
      k = std::max<int>(k, static_cast<int>(j.at("z").size()));
    }
    std::vector<std::pair<std::string, std::vector<int>>> rows = {{"oracle", truth}, {"combined", pred}};
    if (std::any_of(vq.begin(), vq.end(), [](int v) { return v >= 0; })) rows.push_back({"vq", vq});
    if (std::any_of(llm.begin(), llm.end(), [](int v) { return v >= 0; })) rows.push_back({"llm", llm});
    svg = plot::strip_chart(rows, k, o.title.empty() ? "sub-goal trace" : o.title);
  } else if (header.rfind("iteration,", 0) == 0) {
    // training trace: per-epoch means of the loss columns
    const auto cols = split_csv_line(header);
    std::map<int, std::vector<double>> sums;
    std::map<int, int> counts;
    for (std::string line; std::getline(in, line);) {
      const auto f = split_csv_line(line);
      const int epoch = std::stoi(f.at(1));
      auto& s = sums[epoch];
      s.resize(5, 0.0);
      for (int c = 0; c < 5; ++c) s[c] += std::stod(f.at(2 + c));
      ++counts[epoch];
    }
    std::vector<plot::Series> series(5);
    for (int c = 0; c < 5; ++c) series[c].name = cols.at(2 + c);
    for (const auto& [e, s] : sums)
      for (int c = 0; c < 5; ++c) {
        series[c].x.push_back(e);
        series[c].y.push_back(s[c] / counts[e]);
      }
    svg = plot::line_chart(series, o.title.empty() ? "training loss" : o.title, "epoch", "loss");
  } else if (header.rfind("row,column,", 0) == 0) {
    // reproduce / sweep table
    std::vector<std::string> groups, names;
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> v;
    for (std::string line; std::getline(in, line);) {
      const auto f = split_csv_line(line);
      if (std::find(groups.begin(), groups.end(), f.at(0)) == groups.end()) groups.push_back(f[0]);
      if (std::find(names.begin(), names.end(), f.at(1)) == names.end()) names.push_back(f[1]);
      v[{f[0], f[1]}] = {std::stod(f.at(2)), std::stod(f.at(3))};
    }
    std::vector<std::vector<double>> mean(groups.size(), std::vector<double>(names.size())), err = mean;
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (std::size_t s = 0; s < names.size(); ++s) {
        const auto it = v.find({groups[g], names[s]});
        if (it != v.end()) std::tie(mean[g][s], err[g][s]) = it->second;
      }
    svg = plot::bar_chart(groups, names, mean, err, o.title.empty() ? "success rate" : o.title, "success");
  } else {
    throw InputError(o.input + ": unrecognized input (expected a trace JSONL, trace.csv or table.csv)");
  }
  ensure_parent(o.out);
  plot::write_file(o.out, svg);
  out << "wrote " << o.out << '\n';
  return kOk;
}

/// Entry point. Returns the process exit code; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Semantic sub-goal hierarchical imitation learning toolkit"};
  app.set_version_flag("--version", std::string("seal ") + kToolVersion);
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
  app.require_subcommand(1);
  Options o;
  std::string eval_seed_text;

  auto common_out = [&](CLI::App* c) { c->add_option("--runs-dir", o.runs_dir, "Root directory for run outputs"); };

  auto* gen = app.add_subcommand("gen-data", "Generate expert demonstrations");
  gen->add_option("--env", o.env, "keydoor|grid3|grid4|grid5");
  gen->add_option("--n", o.n, "Number of trajectories");
  gen->add_option("--seed", o.seed);
  gen->add_option("--order", o.order, "Pickup order, e.g. ACB (GridWorld only)");
  gen->add_option("--out", o.out, "Output JSONL path");
  common_out(gen);

  auto* label = app.add_subcommand("label", "Annotate a dataset with sub-goal labels");
  label->add_option("--data", o.data, "Input dataset")->required();
  label->add_option("--out", o.out, "Labeled dataset path")->required();
  label->add_option("--backend", o.backend, "oracle|replay|remote");
  label->add_option("--cache", o.cache, "JSONL label cache");
  label->add_option("--fixture", o.fixture, "Replay fixture (a label cache file)");
  label->add_option("--instruction", o.instruction, "Task instruction (default: the dataset's canonical one)");
  label->add_option("--prompts", o.prompts, "Prompt template directory");
  label->add_option("--endpoint", o.remote.endpoint, "OpenAI-compatible base URL");
  label->add_option("--model", o.remote.model);
  label->add_option("--credential-env", o.remote.credential_env, "Environment variable holding the API key");
  label->add_option("--width", o.remote.width, "Concurrent remote requests");
  label->add_option("--rps", o.remote.requests_per_second, "Request rate limit per second");

  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--method", o.method, "bc|lisa|sdil|tc|seal-l|seal");
  trn->add_option("--env", o.env);
  trn->add_option("--data", o.train_data, "Labeled dataset file(s); omit to generate with --demos");
  trn->add_option("--demos", o.demos, "Generate and oracle-label this many demonstrations");
  trn->add_option("--order", o.order, "Pickup order of generated data and validation episodes");
  trn->add_option("--seed", o.seed);
  trn->add_option("--epochs", o.epochs);
  trn->add_option("--lr", o.lr, "Learning rate (default 5e-5 KeyDoor, 5e-6 GridWorld)");
  trn->add_option("--beta", o.beta);
  trn->add_option("--tau", o.tau);
  trn->add_option("--hidden", o.hidden);
  trn->add_option("--k", o.k, "Sub-goal count (unsupervised methods)");
  trn->add_option("--batch-size", o.batch_size);
  trn->add_option("--validate-every", o.validate_every);
  trn->add_option("--validation-episodes", o.validation_episodes);
  trn->add_option("--early-stop", o.early_stop, "Stop once validation success reaches this value");
  trn->add_option("--checkpoint-every", o.checkpoint_every, "Also save a checkpoint every N epochs");
  trn->add_option("--name", o.name, "Run name (default: <method>-<env>-n<demos>)");
  common_out(trn);

  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints");
  ev->add_option("--checkpoint", o.checkpoints, "One or more checkpoints (one per seed)")->required();
  ev->add_option("--env", o.env_override, "Override environment kind");
  ev->add_option("--order", o.order);
  ev->add_option("--episodes", o.episodes);
  ev->add_option("--seed", eval_seed_text, "Rollout seed (default: derived from the checkpoint)");
  ev->add_option("--workers", o.workers);
  ev->add_option("--out", o.out, "Report JSON path (a CSV is written next to it)");

  auto* sw = app.add_subcommand("sweep", "Success as a function of the sub-goal count K");
  sw->add_option("--env", o.env);
  sw->add_option("--methods", o.methods, "Comma list (default lisa,sdil)");
  sw->add_option("--k", o.k_values, "Comma list of K values");
  sw->add_option("--demos", o.demo_list, "Comma list of dataset sizes");
  sw->add_option("--seeds", o.seeds);
  sw->add_option("--epochs", o.bundle_epochs);
  sw->add_option("--lr", o.lr);
  sw->add_option("--episodes", o.episodes);
  sw->add_option("--workers", o.workers);
  sw->add_option("--name", o.name);
  common_out(sw);

  auto* rep = app.add_subcommand("reproduce", "Run a named experiment bundle over several seeds");
  rep->add_option("bundle", o.bundle, "table1-keydoor|table1-grid|table2|table3-long|table4-variations|fig3-ksweep")
      ->required();
  rep->add_option("--seeds", o.seeds);
  rep->add_option("--demos", o.demo_list, "Comma list overriding the bundle's dataset sizes");
  rep->add_option("--methods", o.methods, "Comma list restricting the methods");
  rep->add_option("--epochs", o.bundle_epochs);
  rep->add_option("--lr", o.lr);
  rep->add_option("--episodes", o.episodes);
  rep->add_option("--workers", o.workers, "Seeds trained concurrently");
  common_out(rep);

  auto* tr = app.add_subcommand("trace", "Record per-step sub-goal choices for one episode");
  tr->add_option("--checkpoint", o.checkpoints);
  tr->add_flag("--expert", o.expert, "Trace the expert instead of a model");
  tr->add_option("--env", o.env);
  tr->add_option("--order", o.order);
  tr->add_option("--seed", o.seed);
  tr->add_option("--out", o.out)->required();

  auto* pl = app.add_subcommand("plot", "Render an SVG from a trace, training trace or table");
  pl->add_option("--input", o.input)->required();
  pl->add_option("--out", o.out)->required();
  pl->add_option("--title", o.title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }
  try {
    if (!eval_seed_text.empty()) o.eval_seed = std::stoull(eval_seed_text);
    if (*gen) return cmd_gen_data(o, out);
    if (*label) return cmd_label(o, out);
    if (*trn) return cmd_train(o, out);
    if (*ev) return cmd_eval(o, out);
    if (*sw) return cmd_sweep(o, out);
    if (*rep) return cmd_reproduce(o, out);
    if (*tr) return cmd_trace(o, out);
    if (*pl) return cmd_plot(o, out);
  } catch (const DecompositionError& e) {
    err << "error: " << e.what() << "\nraw response:\n" << e.raw_response << '\n';
    return kBackend;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return kBackend;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv = {"seal"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace seal::cli
