// armtune: hyperparameter optimization and evaluation harness for PPO/SAC on
// a kinematic 7-DOF reach task.
//
// Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "armtune/arm_env.hpp"
#include "armtune/bench.hpp"
#include "armtune/checkpoint.hpp"
#include "armtune/harness.hpp"
#include "armtune/metrics.hpp"
#include "armtune/presets.hpp"
#include "armtune/reports.hpp"
#include "armtune/study.hpp"
#include "armtune/training.hpp"

namespace {

using namespace armtune;

ArmModel resolve_model(const std::string& model_path) {
  return model_path.empty() ? panda_model() : load_arm_model(model_path);
}

ParamMap params_from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open params file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("params file " + path + ": " + e.what());
  }
  return detail::params_from_json(j);
}

ParamMap resolve_params(Algo algo, const std::string& preset, const std::string& params_path,
                        const std::string& journal_path) {
  if (!params_path.empty()) return params_from_file(params_path);
  if (preset == "default") return default_params(algo);
  if (preset == "best-paper") return best_paper_params(algo);
  if (preset == "best-from-journal") {
    if (journal_path.empty()) throw UsageError("--preset best-from-journal needs --journal");
    return best_trial_in_journal(journal_path).trial.params;
  }
  throw UsageError("unknown preset '" + preset + "'");
}

std::vector<int> parse_milestones(const std::string& csv, int episodes) {
  std::vector<int> out;
  if (csv.empty()) return out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const int v = std::stoi(item);
    if (v < 1 || v > episodes) {
      throw UsageError("checkpoint milestone " + item + " outside [1, " + std::to_string(episodes) + "]");
    }
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int cmd_optimize(const std::string& algo_name, int trials, int warmup, int budget, int eval_episodes,
                 std::uint64_t seed, const std::string& journal, int jobs, const std::string& sampler,
                 bool resume, const std::string& model_path) {
  StudyConfig cfg;
  cfg.algo = algo_from_string(algo_name);
  cfg.n_trials = trials;
  cfg.tpe.n_startup_trials = warmup;
  cfg.trial_budget_episodes = budget;
  cfg.objective_eval_episodes = eval_episodes;
  cfg.base_seed = seed;
  cfg.journal_path = journal;
  cfg.jobs = jobs;
  if (sampler == "random") {
    cfg.sampler = SamplerKind::kRandom;
  } else if (sampler != "tpe") {
    throw UsageError("unknown sampler '" + sampler + "', expected tpe or random");
  }
  const ArmModel model = resolve_model(model_path);
  const StudyResult result = run_rl_study(cfg, model, resume);
  const SearchSpace space = cfg.effective_space();
  std::cout << "completed " << result.records.size() << " trials\n";
  std::cout << "best: " << journal_line(result.best, space) << "\n";
  return 0;
}

int cmd_train(const std::string& algo_name, const std::string& preset, const std::string& params_path,
              const std::string& journal, int episodes, const std::string& checkpoints_csv, std::uint64_t seed,
              const std::string& out_dir, const std::string& model_path) {
  const Algo algo = algo_from_string(algo_name);
  const ParamMap params = resolve_params(algo, preset, params_path, journal);
  const ArmModel model = resolve_model(model_path);
  const std::vector<int> milestones = parse_milestones(checkpoints_csv, episodes);
  const TrainFullResult result = train_full(algo, params, model, episodes, milestones, seed, out_dir);
  std::cout << "trained " << episodes << " episodes; curve and " << result.checkpoint_paths.size()
            << " checkpoints in " << out_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, int targets, int max_steps, std::uint64_t seed,
                 const std::string& label, const std::string& append_summary, const std::string& model_path) {
  const Checkpoint cp = load_checkpoint(checkpoint_path);
  const PolicyFn policy = policy_from_checkpoint(cp);
  const ArmModel model = resolve_model(model_path);
  const SuccessEval ev = evaluate_success(policy, model, default_env_config(model, max_steps), targets, seed);
  std::cout.precision(17);
  std::cout << "success_rate " << ev.rate << " (" << ev.successes << "/" << ev.episodes << ", max_steps "
            << max_steps << ", seed " << seed << ")\n";
  if (!append_summary.empty()) {
    SummaryRow row;
    row.model = label.empty() ? cp.algo : label;
    row.episodes = cp.episodes_at_save;
    row.success_rate = ev.rate;
    append_summary_row(append_summary, row);
  }
  return 0;
}

int cmd_report(const std::string& journal, const std::string& algo_name,
               const std::vector<std::string>& curve_specs, const std::string& evals, int window,
               const std::string& out_dir) {
  ReportInputs in;
  in.journal_path = journal;
  if (!algo_name.empty()) in.algo = algo_from_string(algo_name);
  for (const auto& spec : curve_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--curve expects label=path, got '" + spec + "'");
    in.curves.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
  }
  in.evals_path = evals;
  in.smoothing_window = window;
  const std::vector<std::string> warnings = report_emit(in, out_dir);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote pcp.csv, importance.csv, curves.csv, summary.csv to " << out_dir << "\n";
  return 0;
}

int cmd_bench(const std::string& function, int trials, int seeds, int warmup, const std::string& out) {
  TpeConfig tpe;
  tpe.n_startup_trials = warmup;
  const BenchResult r = bench_tpe(bench_function_from_string(function), trials, seeds, tpe);
  std::cout.precision(10);
  std::cout << "seed,tpe_best,random_best\n";
  for (const auto& row : r.rows) std::cout << row.seed << ',' << row.tpe_best << ',' << row.random_best << '\n';
  std::cout << "median," << r.tpe_median << ',' << r.random_median << '\n';
  std::cout << "tpe wins " << r.tpe_wins << "/" << r.rows.size() << " paired seeds\n";
  if (!out.empty()) write_bench_csv(out, r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperparameter tuning harness for PPO/SAC on a 7-DOF kinematic reach task"};
  app.require_subcommand(1);

  std::string algo = "ppo", sampler = "tpe", preset = "default";
  std::string journal, params_path, model_path, checkpoint, label, append_summary, evals, function = "sphere";
  std::string train_out = "out", report_out, bench_out;
  std::vector<std::string> curve_specs;
  int trials = 20, warmup = 10, budget = 2000, eval_episodes = 200, episodes = 2000, jobs = 1;
  int targets = 1000, max_steps = 5, window = 100, seeds = 20;
  std::uint64_t seed = 0;
  std::string checkpoints_csv;
  bool resume = false;

  CLI::App* opt = app.add_subcommand("optimize", "Run the warm-up + TPE study over the reach task");
  opt->add_option("--algo", algo, "ppo or sac")->required();
  opt->add_option("--trials", trials, "total trials");
  opt->add_option("--warmup", warmup, "random warm-up trials before TPE");
  opt->add_option("--budget-episodes", budget, "training episodes per trial");
  opt->add_option("--eval-episodes", eval_episodes, "tail episodes averaged into the objective");
  opt->add_option("--seed", seed, "study base seed");
  opt->add_option("--journal", journal, "journal path (one JSON record per line)")->required();
  opt->add_option("--jobs", jobs, "parallel trial workers");
  opt->add_option("--sampler", sampler, "tpe or random");
  opt->add_flag("--resume", resume, "continue an existing journal");
  opt->add_option("--model", model_path, "arm model file (default: built-in Panda table)");

  CLI::App* tr = app.add_subcommand("train", "Full training run with checkpoints and a curve log");
  tr->add_option("--algo", algo, "ppo or sac")->required();
  tr->add_option("--preset", preset, "default | best-paper | best-from-journal");
  tr->add_option("--params", params_path, "JSON file of hyperparameters (overrides --preset)");
  tr->add_option("--journal", journal, "journal for --preset best-from-journal");
  tr->add_option("--episodes", episodes, "episodes to train");
  tr->add_option("--checkpoints", checkpoints_csv, "comma-separated episode milestones");
  tr->add_option("--seed", seed, "run seed");
  tr->add_option("--out", train_out, "output directory");
  tr->add_option("--model", model_path, "arm model file");

  CLI::App* ev = app.add_subcommand("evaluate", "Success rate of a checkpoint on random targets");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--targets", targets, "number of evaluation targets");
  ev->add_option("--max-steps", max_steps, "episode step limit");
  ev->add_option("--seed", seed, "target-sequence seed");
  ev->add_option("--label", label, "model label for the summary row");
  ev->add_option("--append-summary", append_summary, "append model,episodes,success_rate to this CSV");
  ev->add_option("--model", model_path, "arm model file");

  CLI::App* rep = app.add_subcommand("report", "Emit pcp/importance/curves/summary CSV data");
  rep->add_option("--journal", journal, "study journal");
  rep->add_option("--algo", algo, "space hint when the journal is empty");
  rep->add_option("--curve", curve_specs, "label=path of a training curve log (repeatable)");
  rep->add_option("--evals", evals, "CSV of evaluation rows from `evaluate --append-summary`");
  rep->add_option("--window", window, "smoothing window (episodes)");
  rep->add_option("--out", report_out, "output directory")->required();

  CLI::App* be = app.add_subcommand("bench-tpe", "Paired TPE-vs-random synthetic benchmark");
  be->add_option("--function", function, "sphere or bowl");
  be->add_option("--trials", trials, "trials per study");
  be->add_option("--seeds", seeds, "paired seeds");
  be->add_option("--warmup", warmup, "random warm-up trials");
  be->add_option("--out", bench_out, "also write the table to this CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (opt->parsed()) {
      return cmd_optimize(algo, trials, warmup, budget, eval_episodes, seed, journal, jobs, sampler, resume,
                          model_path);
    }
    if (tr->parsed()) {
      return cmd_train(algo, preset, params_path, journal, episodes, checkpoints_csv, seed, train_out, model_path);
    }
    if (ev->parsed()) {
      return cmd_evaluate(checkpoint, targets, max_steps, seed, label, append_summary, model_path);
    }
    if (rep->parsed()) {
      return cmd_report(journal, rep->count("--algo") > 0 ? algo : std::string{}, curve_specs, evals, window,
                        report_out);
    }
    if (be->parsed()) {
      return cmd_bench(function, trials, seeds, warmup, bench_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
