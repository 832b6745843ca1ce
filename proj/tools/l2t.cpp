#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "l2t/l2t.h"

namespace {

void log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int exit_code(l2t_status status) {
  switch (status) {
    case L2T_OK: return 0;
    case L2T_ERR_CONFIG: return 2;
    case L2T_ERR_GATE: return 3;
    default: return 1;
  }
}

int report(l2t_status status) {
  if (status != L2T_OK) std::fprintf(stderr, "l2t: %s: %s\n", l2t_status_name(status), l2t_last_error());
  return exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned input-transformation attacks on a synthetic model zoo"};
  app.set_version_flag("--version", std::string(l2t_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  long long seed = -1;
  int jobs = -1;
  app.add_option("--config", config, "JSON experiment config (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "global seed (overrides seed)")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", jobs, "worker threads, 0 = all cores (overrides jobs)")->check(CLI::NonNegativeNumber);

  auto* train = app.add_subcommand("train-zoo", "train, gate and save the model zoo");
  auto* attack = app.add_subcommand("attack", "attack the evaluation set and score transfer");
  std::string method;
  attack->add_option("--method", method, "ifgsm, mifgsm, rand or l2t")
      ->required()
      ->check(CLI::IsMember({"ifgsm", "mifgsm", "rand", "l2t"}));
  auto* ablate = app.add_subcommand("ablate", "run one ablation axis with L2T");
  std::string axis;
  std::string grid;
  ablate->add_option("--axis", axis, "K, L, T or category-removal")
      ->required()
      ->check(CLI::IsMember({"K", "L", "T", "category-removal"}));
  ablate->add_option("--grid", grid, "comma-separated grid values (defaults to the config grid)");
  auto* oracle = app.add_subcommand("oracle", "enumerate every op trajectory over the oracle pool");
  auto* summary = app.add_subcommand("report", "collect existing reports into a summary");

  // Global flags are accepted after the subcommand too.
  for (CLI::App* sub : {train, attack, ablate, oracle, summary}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  l2t_experiment* exp = nullptr;
  l2t_status st = l2t_experiment_create(config.empty() ? nullptr : config.c_str(), &exp);
  if (st != L2T_OK) return report(st);
  l2t_experiment_set_logger(exp, log_line, nullptr);
  if (st == L2T_OK && !out.empty()) st = l2t_experiment_set_output_dir(exp, out.c_str());
  if (st == L2T_OK && seed >= 0) st = l2t_experiment_set_seed(exp, static_cast<uint64_t>(seed));
  if (st == L2T_OK && jobs >= 0) st = l2t_experiment_set_jobs(exp, jobs);

  if (st == L2T_OK) {
    if (*train) {
      st = l2t_run_train_zoo(exp);
    } else if (*attack) {
      st = l2t_run_attack(exp, method.c_str());
    } else if (*ablate) {
      st = l2t_run_ablate(exp, axis.c_str(), grid.empty() ? nullptr : grid.c_str());
    } else if (*oracle) {
      st = l2t_run_oracle(exp);
    } else if (*summary) {
      st = l2t_run_report(exp);
    }
  }
  l2t_experiment_free(exp);
  return report(st);
}
