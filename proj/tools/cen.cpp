// cen: synthetic data generation, generation-chain training, evaluation,
// distribution dumps and hyperparameter grids from one JSON config.
//
// Exit codes: 0 success, 1 config error, 2 numerical divergence, 3 I/O error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cen/cen.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kDiverged = 2, kIo = 3 };

struct Args {
  std::string config;
  std::string out;
  bool force = false;
  bool resume = false;
  bool parallel = false;
  std::vector<std::string> overrides;
  std::optional<std::size_t> generation;
  std::string checkpoint;
  std::string file;
  std::string split = "test";
};

cen::ExperimentConfig resolve_config(const Args &a) {
  std::filesystem::path path = a.config;
  if (path.empty())
    path = std::filesystem::path(a.out) / "config.json";
  return cen::load_config(path, a.overrides);
}

std::filesystem::path checkpoint_path(const Args &a) {
  if (!a.checkpoint.empty())
    return a.checkpoint;
  return cen::find_checkpoint(a.out, a.generation);
}

void add_common(CLI::App *cmd, Args &a, bool config_required) {
  auto *c = cmd->add_option("--config", a.config, "JSON experiment config");
  if (config_required)
    c->required();
  cmd->add_option("--out", a.out, "output / run directory")->required();
  cmd->add_option("--override", a.overrides, "dotted key=value config overrides")
      ->allow_extra_args(false);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Coupled evolutionary network training for age estimation"};
  app.require_subcommand(1);
  Args a;

  auto *synth = app.add_subcommand("synth", "generate the synthetic train/test CSVs");
  add_common(synth, a, true);
  synth->add_flag("--force", a.force, "overwrite an existing output directory");

  auto *train = app.add_subcommand("train", "train the initial ancestor only");
  add_common(train, a, true);
  train->add_flag("--force", a.force, "overwrite an existing run");

  auto *evolve = app.add_subcommand("evolve", "run the full generation chain");
  add_common(evolve, a, true);
  evolve->add_flag("--force", a.force, "overwrite an existing run");
  evolve->add_flag("--resume", a.resume, "continue after the last completed generation");

  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, a, false);
  eval->add_option("--generation", a.generation, "generation to evaluate (default: last)");
  eval->add_option("--checkpoint", a.checkpoint, "explicit checkpoint path");

  auto *dump = app.add_subcommand("dump-dist", "write per-sample predicted distributions");
  add_common(dump, a, false);
  dump->add_option("--generation", a.generation, "generation to dump (default: last)");
  dump->add_option("--checkpoint", a.checkpoint, "explicit checkpoint path");
  dump->add_option("--file", a.file, "output CSV (default: <out>/dist_gen_<t>.csv)");
  dump->add_option("--split", a.split, "train or test")->check(CLI::IsMember({"train", "test"}));

  auto *ablate = app.add_subcommand("ablate", "grid over tau, alpha and lambda");
  add_common(ablate, a, true);
  ablate->add_flag("--force", a.force, "overwrite an existing output directory");
  ablate->add_flag("--parallel", a.parallel, "run grid points concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const auto cfg = resolve_config(a);
    if (synth->parsed()) {
      cen::run_synth(cfg, a.out, a.force);
    } else if (train->parsed()) {
      auto ancestor_only = cfg;
      ancestor_only.run.generations = 1;
      cen::RunOptions o;
      o.force = a.force;
      o.log = &std::cout;
      cen::run_evolve(ancestor_only, a.out, o);
    } else if (evolve->parsed()) {
      cen::RunOptions o;
      o.force = a.force;
      o.resume = a.resume;
      o.log = &std::cout;
      cen::run_evolve(cfg, a.out, o);
    } else if (eval->parsed()) {
      const auto path = checkpoint_path(a);
      const auto ckpt = cen::read_checkpoint(path);
      std::cout << cen::format_report(cen::run_eval(cfg, path), ckpt.generation);
    } else if (dump->parsed()) {
      const auto path = checkpoint_path(a);
      std::filesystem::path file = a.file;
      if (file.empty())
        file = std::filesystem::path(a.out) /
               ("dist_gen_" + std::to_string(cen::read_checkpoint(path).generation) + ".csv");
      cen::run_dump_dist(cfg, path, file, a.split == "train");
      std::cout << "wrote " << file.string() << '\n';
    } else if (ablate->parsed()) {
      cen::run_ablate(cfg, a.out, a.force, a.parallel, &std::cout);
    }
  } catch (const cen::DivergenceError &e) {
    std::cerr << "cen: diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const cen::IoError &e) {
    std::cerr << "cen: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error &e) {
    std::cerr << "cen: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception &e) {
    std::cerr << "cen: config error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
