#include <larm/agent.hpp>
#include <larm/embedding.hpp>
#include <larm/errors.hpp>
#include <larm/fmgen.hpp>
#include <larm/gridworld.hpp>
#include <larm/instructions.hpp>
#include <larm/labeling.hpp>
#include <larm/machine.hpp>
#include <larm/qfunction.hpp>
#include <larm/rm_spec.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using namespace larm;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadArg(0, "cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BadArg(0, "cannot write " + path);
  out << text;
}

std::string ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw BadArg(0, "cannot create " + dir + ": " + ec.message());
  return dir;
}

// Stamps the standard manifest into the output directory.
struct ManifestClock {
  std::string started = utc_now_iso8601();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const std::string& dir, const std::string& command, json config,
             std::vector<std::string> outputs) const {
    json manifest{{"command", command},
                  {"version", kVersion},
                  {"started", started},
                  {"finished", utc_now_iso8601()},
                  {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                  .count()},
                  {"config", std::move(config)},
                  {"outputs", std::move(outputs)}};
    write_file(dir + "/run.json", manifest.dump(2) + "\n");
  }
};

// Sidecar resolution shared by train/eval/ablate/zeroshot. A .json task
// carries its grid config and finds <stem>.rm/.lbl/.instructions next to it;
// a bare name is a built-in layout and needs the sidecars spelled out.
struct BundleArgs {
  std::string rm, lbl, instructions;
  int size = 5;
  bool procedural = false;
};

TaskBundle make_bundle(const std::string& task_arg, const BundleArgs& args,
                       bool allow_overrides) {
  TaskConfig config;
  std::string rm = allow_overrides ? args.rm : "";
  std::string lbl = allow_overrides ? args.lbl : "";
  std::string instructions = allow_overrides ? args.instructions : "";
  if (task_arg.size() > 5 && task_arg.substr(task_arg.size() - 5) == ".json") {
    config = load_task_config(read_file(task_arg));
    std::string stem = task_arg.substr(0, task_arg.size() - 5);
    if (rm.empty()) rm = stem + ".rm";
    if (lbl.empty()) lbl = stem + ".lbl";
    if (instructions.empty()) instructions = stem + ".instructions";
  } else {
    config.task = task_arg;
    config.size = args.size;
    config.procedural = args.procedural;
    // Built-in layout names look for the bundled sidecars relative to the
    // working directory before demanding explicit paths.
    auto probe = [&](std::string& slot, const std::string& candidate) {
      if (slot.empty() && std::filesystem::exists(candidate)) slot = candidate;
    };
    probe(rm, "fixtures/rm/" + task_arg + ".rm");
    probe(lbl, "fixtures/lbl/" + task_arg + ".lbl");
    probe(instructions, "fixtures/instructions/" + task_arg + ".instructions");
    if (rm.empty() || lbl.empty() || instructions.empty()) {
      throw BadArg(0, "task '" + task_arg + "' needs --rm, --lbl, and --instructions");
    }
  }
  TaskBundle bundle;
  bundle.task = config;
  bundle.machine =
      compile(parse_rm(read_file(rm)), parse_instructions(read_file(instructions)));
  bundle.labeling = parse_labeling(read_file(lbl));
  return bundle;
}

std::vector<TaskBundle> make_bundles(const std::vector<std::string>& task_args,
                                     const BundleArgs& args) {
  std::vector<TaskBundle> bundles;
  for (const std::string& t : task_args) {
    bundles.push_back(make_bundle(t, args, task_args.size() == 1));
  }
  return bundles;
}

// Hyperparameters with a config-file base layer; explicit flags override.
struct TrainFlags {
  std::string config_file;
  int steps = 50000;
  double alpha = -1.0;  // backend default when negative
  double gamma = 0.99;
  double eps_start = 1.0;
  double eps_end = 0.01;
  double exploration_fraction = 0.35;
  int batch_size = 32;
  int replay_capacity = 50000;
  int learning_starts = 1000;
  int target_update = 1000;

  CLI::Option* steps_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* gamma_opt = nullptr;
  CLI::Option* eps_end_opt = nullptr;
  CLI::Option* explore_opt = nullptr;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON file with TrainConfig fields");
    steps_opt = cmd->add_option("--steps", steps, "environment steps per run");
    alpha_opt = cmd->add_option("--alpha", alpha, "learning rate");
    gamma_opt = cmd->add_option("--gamma", gamma, "discount factor");
    eps_end_opt = cmd->add_option("--eps-end", eps_end, "final exploration rate");
    explore_opt = cmd->add_option("--exploration-fraction", exploration_fraction,
                                  "fraction of steps spent decaying epsilon");
    cmd->add_option("--batch-size", batch_size, "linear minibatch size");
    cmd->add_option("--replay-capacity", replay_capacity, "linear replay buffer size");
    cmd->add_option("--learning-starts", learning_starts, "steps before linear updates");
    cmd->add_option("--target-update", target_update, "target sync period");
  }

  TrainConfig resolve(Backend backend) const {
    TrainConfig cfg;
    if (!config_file.empty()) {
      json j = json::parse(read_file(config_file), nullptr, true, true);
      cfg.total_steps = j.value("total_steps", cfg.total_steps);
      cfg.alpha = j.value("alpha", cfg.alpha);
      cfg.gamma = j.value("gamma", cfg.gamma);
      cfg.eps_start = j.value("eps_start", cfg.eps_start);
      cfg.eps_end = j.value("eps_end", cfg.eps_end);
      cfg.exploration_fraction = j.value("exploration_fraction", cfg.exploration_fraction);
      cfg.batch_size = j.value("batch_size", cfg.batch_size);
      cfg.replay_capacity = j.value("replay_capacity", cfg.replay_capacity);
      cfg.learning_starts = j.value("learning_starts", cfg.learning_starts);
      cfg.target_update_period = j.value("target_update_period", cfg.target_update_period);
    } else {
      cfg.alpha = backend == Backend::kLinear ? 1e-3 : 0.1;
    }
    if (steps_opt->count() || config_file.empty()) cfg.total_steps = steps;
    if (alpha_opt->count() && alpha > 0) cfg.alpha = alpha;
    if (gamma_opt->count() || config_file.empty()) cfg.gamma = gamma;
    if (eps_end_opt->count() || config_file.empty()) cfg.eps_end = eps_end;
    if (explore_opt->count() || config_file.empty()) {
      cfg.exploration_fraction = exploration_fraction;
    }
    cfg.eps_start = eps_start;
    cfg.batch_size = batch_size;
    cfg.replay_capacity = replay_capacity;
    cfg.learning_starts = learning_starts;
    cfg.target_update_period = target_update;
    return cfg;
  }
};

Backend backend_from(const std::string& name) {
  if (name == "tabular") return Backend::kTabular;
  if (name == "linear") return Backend::kLinear;
  throw BadArg(0, "unknown backend '" + name + "'");
}

EmbeddingSource source_from(const std::string& name) {
  if (name == "instruction") return EmbeddingSource::kInstruction;
  if (name == "onehot") return EmbeddingSource::kOneHot;
  throw BadArg(0, "unknown embedding source '" + name + "'");
}

QFunction fresh_qfn(Backend backend, const std::vector<TaskBundle>& bundles) {
  if (backend == Backend::kLinear) {
    return QFunction::make_linear(suite_features(bundles), kEmbeddingDim, kNumActions);
  }
  return QFunction::make_tabular(kNumActions);
}

// Runs fn(i) per seed on worker threads; the first exception, if any, is
// rethrown after everything joined so results merge in seed order.
void fan_out(size_t n, const std::function<void(size_t)>& fn) {
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n);
  for (size_t i = 0; i < n; ++i) {
    workers.emplace_back([&, i] {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (std::thread& w : workers) w.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int cmd_parse(const std::string& path, bool as_json) {
  RewardMachineSpec spec = parse_rm(read_file(path));
  if (as_json) {
    json out{{"states", spec.states}, {"initial", spec.initial}};
    out["transitions"] = json::array();
    for (const RmTransition& t : spec.transitions) {
      out["transitions"].push_back({{"from", t.from}, {"event", t.event}, {"to", t.to}});
    }
    out["rewards"] = json::array();
    for (const RmReward& r : spec.rewards) {
      out["rewards"].push_back(
          {{"from", r.from}, {"event", r.event}, {"to", r.to}, {"value", r.value}});
    }
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "states " << spec.states.size() << "\ninitial " << spec.initial
              << "\ntransitions " << spec.transitions.size() << "\nrewards "
              << spec.rewards.size() << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& path, bool as_json) {
  RewardMachineSpec spec = parse_rm(read_file(path));
  ValidationReport report = validate_rm(spec);
  if (as_json) {
    auto rows = [](const std::vector<Finding>& findings) {
      json arr = json::array();
      for (const Finding& f : findings) {
        arr.push_back({{"code", f.code}, {"line", f.line}, {"message", f.message}});
      }
      return arr;
    };
    json out{{"ok", report.ok()}, {"errors", rows(report.errors)},
             {"warnings", rows(report.warnings)}};
    std::cout << out.dump(2) << "\n";
  } else if (report.ok() && report.warnings.empty()) {
    std::cout << "ok\n";
  } else {
    std::cout << report.to_string();
  }
  return report.ok() ? 0 : 1;
}

int cmd_viz(const std::string& path, const std::string& out, bool include_else) {
  RewardMachineSpec spec = parse_rm(read_file(path));
  std::map<std::string, std::string> placeholder;
  for (const std::string& s : spec.states) placeholder[s] = s;
  std::string dot = to_dot(compile(spec, placeholder), include_else);
  if (out.empty()) {
    std::cout << dot;
  } else {
    write_file(out, dot);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"language-aligned reward machine toolkit"};
  app.require_subcommand(1);

  // parse / validate / viz ---------------------------------------------------
  std::string rm_path;
  bool as_json = false;
  CLI::App* parse_cmd = app.add_subcommand("parse", "parse a reward machine file");
  parse_cmd->add_option("file", rm_path, "path to a .rm file")->required();
  parse_cmd->add_flag("--json", as_json, "emit JSON");

  CLI::App* validate_cmd = app.add_subcommand("validate", "validate a reward machine file");
  validate_cmd->add_option("file", rm_path, "path to a .rm file")->required();
  validate_cmd->add_flag("--json", as_json, "emit JSON");

  std::string viz_out;
  bool include_else = false;
  CLI::App* viz_cmd = app.add_subcommand("viz", "render a reward machine as graphviz DOT");
  viz_cmd->add_option("file", rm_path, "path to a .rm file")->required();
  viz_cmd->add_option("-o,--out,--dot", viz_out, "output .dot path (stdout when omitted)");
  viz_cmd->add_flag("--include-else", include_else, "draw the else self-loops");

  // train ---------------------------------------------------------------------
  std::vector<std::string> task_args;
  BundleArgs bundle_args;
  TrainFlags train_flags;
  std::string backend_name = "tabular";
  std::string mode_arg = "both";
  std::string source_name = "instruction";
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir;
  auto add_task_flags = [&](CLI::App* cmd) {
    cmd->add_option("--task", task_args, "task .json or built-in layout name")
        ->required()
        ->take_all();
    cmd->add_option("--rm", bundle_args.rm, "reward machine file (single task only)");
    cmd->add_option("--lbl", bundle_args.lbl, "labeling file (single task only)");
    cmd->add_option("--instructions", bundle_args.instructions,
                    "instructions file (single task only)");
    cmd->add_option("--size", bundle_args.size, "grid size for built-in layouts");
    cmd->add_flag("--procedural", bundle_args.procedural, "randomize built-in layouts");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train an agent and write CSV reports");
  add_task_flags(train_cmd);
  train_flags.add_to(train_cmd);
  train_cmd->add_option("--backend", backend_name, "tabular or linear");
  train_cmd->add_option("--mode", mode_arg,
                        "both, rewards_only, embeddings_only, or neither");
  train_cmd->add_option("--source", source_name, "instruction or onehot");
  train_cmd->add_option("--seeds,--seed", seeds, "comma-separated seeds")->delimiter(',');
  train_cmd->add_option("--out", out_dir, "output directory (default runs/train)");

  // eval ----------------------------------------------------------------------
  std::string qfn_path;
  int episodes = 100;
  std::uint64_t one_seed = 0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a saved q-function");
  add_task_flags(eval_cmd);
  eval_cmd->add_option("--qfn", qfn_path, "saved q-function JSON")->required();
  eval_cmd->add_option("--episodes", episodes, "evaluation episodes");
  eval_cmd->add_option("--seed", one_seed, "evaluation seed");
  eval_cmd->add_option("--mode", mode_arg, "conditioning mode");
  eval_cmd->add_option("--source", source_name, "instruction or onehot");
  eval_cmd->add_flag("--json", as_json, "emit JSON");

  // ablate ---------------------------------------------------------------------
  int eval_episodes = 50;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "conditioning ablation over a task suite");
  add_task_flags(ablate_cmd);
  train_flags.add_to(ablate_cmd);
  ablate_cmd->add_option("--backend", backend_name, "tabular or linear");
  ablate_cmd->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
  ablate_cmd->add_option("--eval-episodes", eval_episodes, "greedy episodes per task");
  ablate_cmd->add_option("--out", out_dir, "output directory for ablation.csv");
  ablate_cmd->add_flag("--json", as_json, "emit JSON");

  // zeroshot --------------------------------------------------------------------
  std::vector<std::string> target_args;
  CLI::App* zeroshot_cmd =
      app.add_subcommand("zeroshot", "train on source tasks, evaluate an unseen one");
  zeroshot_cmd->add_option("--train", task_args, "source task .json files")
      ->required()
      ->take_all();
  zeroshot_cmd->add_option("--target", target_args, "unseen task .json")->required();
  train_flags.add_to(zeroshot_cmd);
  zeroshot_cmd->add_option("--source", source_name, "instruction or onehot");
  zeroshot_cmd->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
  zeroshot_cmd->add_option("--episodes", episodes, "zero-shot episodes");
  zeroshot_cmd->add_option("--out", out_dir, "output directory");
  zeroshot_cmd->add_flag("--json", as_json, "emit JSON");

  // gen ------------------------------------------------------------------------
  std::string mission, mission_file, endpoint, model, key_env = "LARM_API_KEY";
  std::string offline, prompts_dir;
  int rounds = 3;
  bool human = false, raw_labeling = false;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generator-critic reward machine synthesis");
  gen_cmd->add_option("--mission", mission, "task mission text");
  gen_cmd->add_option("--mission-file", mission_file, "file with the mission text");
  gen_cmd->add_option("--endpoint", endpoint, "chat-completion base URL");
  gen_cmd->add_option("--model", model, "model name");
  gen_cmd->add_option("--key-env", key_env, "environment variable holding the API key");
  gen_cmd->add_option("--offline", offline, "recorded transcript to replay (no network)");
  gen_cmd->add_option("--prompts", prompts_dir, "prompt template directory")
      ->default_val("fixtures/prompts");
  gen_cmd->add_option("--rounds", rounds, "max refinement rounds per stage");
  gen_cmd->add_flag("--human", human, "ask for terminal approval after FM approval");
  gen_cmd->add_flag("--raw-labeling", raw_labeling, "request python code, store verbatim");
  gen_cmd->add_option("--out", out_dir, "output directory (default runs/gen)");

  // embed ----------------------------------------------------------------------
  std::string instructions_path, embed_out;
  int dim = kEmbeddingDim;
  int pca_k = 0;
  CLI::App* embed_cmd = app.add_subcommand("embed", "embed per-state instructions");
  embed_cmd->add_option("--instructions", instructions_path, "instructions file")->required();
  embed_cmd->add_option("--dim", dim, "embedding dimension");
  embed_cmd->add_option("--pca", pca_k, "project onto k principal components");
  embed_cmd->add_option("--out", embed_out, "output CSV path (stdout when omitted)");
  embed_cmd->add_flag("--json", as_json, "emit JSON instead of CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (parse_cmd->parsed()) return cmd_parse(rm_path, as_json);
    if (validate_cmd->parsed()) return cmd_validate(rm_path, as_json);
    if (viz_cmd->parsed()) return cmd_viz(rm_path, viz_out, include_else);

    if (train_cmd->parsed()) {
      Backend backend = backend_from(backend_name);
      ConditioningMode mode = mode_from_name(mode_arg);
      EmbeddingSource source = source_from(source_name);
      TrainConfig cfg = train_flags.resolve(backend);
      std::vector<TaskBundle> bundles = make_bundles(task_args, bundle_args);
      ManifestClock clock;
      if (out_dir.empty()) out_dir = "runs/train";
      ensure_dir(out_dir);
      std::vector<TrainReport> reports(seeds.size());
      std::vector<QFunction> qfns;
      for (size_t i = 0; i < seeds.size(); ++i) qfns.push_back(fresh_qfn(backend, bundles));
      fan_out(seeds.size(), [&](size_t i) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = seeds[i];
        reports[i] = train(bundles, qfns[i], run_cfg, mode, source);
      });
      std::vector<std::string> outputs;
      json summary = json::array();
      for (size_t i = 0; i < seeds.size(); ++i) {
        std::string report_name = "report_seed" + std::to_string(seeds[i]) + ".csv";
        std::string qfn_name = "qfn_seed" + std::to_string(seeds[i]) + ".json";
        write_file(out_dir + "/" + report_name, reports[i].to_csv());
        qfns[i].save(out_dir + "/" + qfn_name);
        outputs.push_back(report_name);
        outputs.push_back(qfn_name);
        double final100 = reports[i].final_window_success(100);
        summary.push_back({{"seed", seeds[i]},
                           {"episodes", reports[i].episodes.size()},
                           {"final_window_success", final100}});
        std::cout << "seed " << seeds[i] << " episodes " << reports[i].episodes.size()
                  << " final_window_success " << format_rate(final100) << "\n";
      }
      write_file(out_dir + "/summary.json", summary.dump(2) + "\n");
      outputs.push_back("summary.json");
      clock.write(out_dir, "train",
                  json{{"tasks", task_args},
                       {"backend", backend_name},
                       {"mode", mode_arg},
                       {"source", source_name},
                       {"seeds", seeds},
                       {"total_steps", cfg.total_steps},
                       {"alpha", cfg.alpha},
                       {"gamma", cfg.gamma}},
                  outputs);
      return 0;
    }

    if (eval_cmd->parsed()) {
      ConditioningMode mode = mode_from_name(mode_arg);
      EmbeddingSource source = source_from(source_name);
      TaskBundle bundle = make_bundle(task_args.at(0), bundle_args, true);
      QFunction qfn = QFunction::load(qfn_path);
      double rate = evaluate(bundle, qfn, episodes, one_seed, mode, source);
      if (as_json) {
        std::cout << json{{"success_rate", rate}, {"episodes", episodes}, {"seed", one_seed}}
                         .dump(2)
                  << "\n";
      } else {
        std::cout << "success_rate " << format_rate(rate) << "\n";
      }
      return 0;
    }

    if (ablate_cmd->parsed()) {
      Backend backend = backend_from(backend_name);
      TrainConfig cfg = train_flags.resolve(backend);
      std::vector<TaskBundle> bundles = make_bundles(task_args, bundle_args);
      ManifestClock clock;
      std::vector<AblationRow> rows = run_ablation(bundles, cfg, seeds, backend, eval_episodes);
      std::ostringstream csv;
      csv << "mode,mean,stddev";
      for (std::uint64_t s : seeds) csv << ",seed" << s;
      csv << "\n";
      for (const AblationRow& row : rows) {
        csv << row.mode << "," << format_rate(row.mean) << "," << format_rate(row.stddev);
        for (double v : row.per_seed) csv << "," << format_rate(v);
        csv << "\n";
      }
      if (as_json) {
        json out = json::array();
        for (const AblationRow& row : rows) {
          out.push_back({{"mode", row.mode},
                         {"mean", row.mean},
                         {"stddev", row.stddev},
                         {"per_seed", row.per_seed}});
        }
        std::cout << out.dump(2) << "\n";
      } else {
        std::cout << csv.str();
      }
      {
        if (out_dir.empty()) out_dir = "runs/ablate";
        ensure_dir(out_dir);
        write_file(out_dir + "/ablation.csv", csv.str());
        clock.write(out_dir, "ablate",
                    json{{"tasks", task_args},
                         {"backend", backend_name},
                         {"seeds", seeds},
                         {"total_steps", cfg.total_steps},
                         {"alpha", cfg.alpha},
                         {"gamma", cfg.gamma},
                         {"eval_episodes", eval_episodes}},
                    {"ablation.csv"});
      }
      return 0;
    }

    if (zeroshot_cmd->parsed()) {
      EmbeddingSource source = source_from(source_name);
      TrainConfig cfg = train_flags.resolve(Backend::kLinear);
      std::vector<TaskBundle> bundles = make_bundles(task_args, bundle_args);
      TaskBundle target = make_bundle(target_args.at(0), bundle_args, false);
      ManifestClock clock;
      std::vector<TaskBundle> sized = bundles;
      sized.push_back(target);
      FeatureExtractor features = suite_features(sized);
      std::vector<double> zero_rates(seeds.size());
      std::vector<std::vector<double>> train_rates(seeds.size());
      fan_out(seeds.size(), [&](size_t i) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = seeds[i];
        QFunction qfn = QFunction::make_linear(features, kEmbeddingDim, kNumActions);
        train(bundles, qfn, run_cfg, ConditioningMode::kBoth, source);
        std::mt19937_64 eval_rng(seeds[i] ^ 0x5eed5eedULL);
        for (const TaskBundle& b : bundles) {
          train_rates[i].push_back(
              evaluate(b, qfn, episodes, eval_rng(), ConditioningMode::kBoth, source));
        }
        zero_rates[i] = zero_shot_eval(qfn, target, episodes, eval_rng(), source);
      });
      json out = json::array();
      for (size_t i = 0; i < seeds.size(); ++i) {
        out.push_back({{"seed", seeds[i]},
                       {"trained_success", train_rates[i]},
                       {"zero_shot_success", zero_rates[i]}});
        if (!as_json) {
          std::cout << "seed " << seeds[i] << " zero_shot_success "
                    << format_rate(zero_rates[i]) << " trained";
          for (double v : train_rates[i]) std::cout << " " << format_rate(v);
          std::cout << "\n";
        }
      }
      if (as_json) std::cout << out.dump(2) << "\n";
      {
        if (out_dir.empty()) out_dir = "runs/zeroshot";
        ensure_dir(out_dir);
        write_file(out_dir + "/zeroshot.json", out.dump(2) + "\n");
        clock.write(out_dir, "zeroshot",
                    json{{"train", task_args},
                         {"target", target_args.at(0)},
                         {"source", source_name},
                         {"seeds", seeds},
                         {"episodes", episodes},
                         {"total_steps", cfg.total_steps},
                         {"alpha", cfg.alpha},
                         {"gamma", cfg.gamma}},
                    {"zeroshot.json"});
      }
      return 0;
    }

    if (gen_cmd->parsed()) {
      if (!mission_file.empty()) mission = read_file(mission_file);
      if (mission.empty()) throw BadArg(0, "--mission or --mission-file is required");
      if (offline.empty() && endpoint.empty()) {
        throw BadArg(0, "either --endpoint or --offline is required");
      }
      FmClientConfig client_config;
      client_config.endpoint = endpoint;
      client_config.model = model;
      client_config.api_key_env = key_env;
      client_config.offline_transcript = offline;
      std::unique_ptr<FmClient> client = make_fm_client(client_config);
      PromptPack prompts = load_prompt_pack(prompts_dir, raw_labeling);
      GenOptions options;
      options.max_rounds = rounds;
      options.raw_labeling = raw_labeling;
      if (human) {
        options.human_hook = [](const GenSession& s) {
          std::cout << "Reward machine:\n" << s.rm_text << "\nLabeling:\n" << s.labeling_text
                    << "\nInstructions:\n" << s.instructions_text
                    << "\nApprove? (empty/yes to approve, anything else is feedback): ";
          std::string line;
          std::getline(std::cin, line);
          if (line.empty() || line == "y" || line == "yes" || line == "approve") {
            return HumanDecision{true, ""};
          }
          return HumanDecision{false, line};
        };
      }
      ManifestClock clock;
      if (out_dir.empty()) out_dir = "runs/gen";
      ensure_dir(out_dir);
      GenSession session = run_generation_loop(mission, prompts, *client, options);
      std::vector<std::string> outputs{"transcript.jsonl"};
      write_file(out_dir + "/transcript.jsonl", transcript_to_jsonl(session.transcript));
      if (!session.rm_text.empty()) {
        write_file(out_dir + "/rm.rm", session.rm_text);
        outputs.push_back("rm.rm");
      }
      if (!session.labeling_text.empty()) {
        std::string name = raw_labeling ? "labeling.py" : "labeling.lbl";
        write_file(out_dir + "/" + name, session.labeling_text);
        outputs.push_back(name);
      }
      if (!session.instructions_text.empty()) {
        write_file(out_dir + "/instructions.instructions", session.instructions_text);
        outputs.push_back("instructions.instructions");
      }
      clock.write(out_dir, "gen",
                  json{{"mission", mission},
                       {"rounds", rounds},
                       {"endpoint", endpoint},
                       {"model", model},
                       {"key_env", key_env},
                       {"offline", offline},
                       {"raw_labeling", raw_labeling},
                       {"status", status_name(session.status)},
                       {"rm_rounds", session.round},
                       {"labeling_rounds", session.labeling_round},
                       {"fm_calls", session.transcript.size()}},
                  outputs);
      std::cout << "status " << status_name(session.status) << " rounds " << session.round
                << " transcript " << session.transcript.size() << " entries\n";
      return session.status == SessionStatus::kApproved ? 0 : 1;
    }

    if (embed_cmd->parsed()) {
      std::map<std::string, std::string> entries =
          parse_instructions(read_file(instructions_path));
      if (entries.empty()) throw BadArg(0, "no instructions in " + instructions_path);
      std::vector<std::string> states;
      std::vector<EmbeddingVector> vectors;
      for (const auto& [state, text] : entries) {
        states.push_back(state);
        vectors.push_back(embed_instruction(text, dim));
      }
      std::ostringstream csv;
      json out;
      if (pca_k > 0) {
        PcaResult pca = pca_project(vectors, pca_k);
        csv << "state";
        for (int c = 0; c < pca_k; ++c) csv << ",c" << c;
        csv << "\n";
        for (size_t i = 0; i < states.size(); ++i) {
          csv << states[i];
          for (int c = 0; c < pca_k; ++c) csv << "," << format_rate(pca.coordinates(i, c));
          csv << "\n";
        }
        out["explained"] = std::vector<double>(pca.explained.begin(), pca.explained.end());
      } else {
        csv << "state";
        for (int c = 0; c < dim; ++c) csv << ",e" << c;
        csv << "\n";
        for (size_t i = 0; i < states.size(); ++i) {
          csv << states[i];
          for (int c = 0; c < dim; ++c) csv << "," << format_rate(vectors[i](c));
          csv << "\n";
        }
      }
      if (as_json) {
        out["states"] = states;
        json rows = json::array();
        for (size_t i = 0; i < states.size(); ++i) {
          rows.push_back({{"state", states[i]},
                          {"text", entries.at(states[i])},
                          {"norm", vectors[i].norm()}});
        }
        out["rows"] = rows;
        std::cout << out.dump(2) << "\n";
      } else if (embed_out.empty()) {
        std::cout << csv.str();
      } else {
        write_file(embed_out, csv.str());
      }
      return 0;
    }
  } catch (const SyntaxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
