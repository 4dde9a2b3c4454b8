#ifndef CEN_RUN_HPP
#define CEN_RUN_HPP

// Command implementations behind the `cen` tool. Each command works on a run
// directory and is reproducible from the resolved config stored in it.

#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cen/config.hpp"
#include "cen/data.hpp"
#include "cen/error.hpp"
#include "cen/evolution.hpp"
#include "cen/inference.hpp"
#include "cen/io.hpp"

namespace cen {

namespace fs = std::filesystem;

inline std::pair<Dataset, Dataset> load_datasets(const DataConfig &cfg) {
  if (cfg.source == "csv") {
    const Dataset all =
        load_csv(cfg.csv_path, AgeRange(cfg.synth.l1, cfg.synth.lk));
    return split(all, cfg.train_fraction, cfg.split_seed);
  }
  return split(synth_generate(cfg.synth), cfg.train_fraction, cfg.split_seed);
}

struct RunOptions {
  bool force = false;
  bool resume = false;
  std::ostream *log = nullptr; // per-generation key=value blocks
};

/// Creates `out`; an existing non-empty directory is an error unless `force`
/// (wipe it) or `resume` (keep it).
inline void prepare_output_dir(const fs::path &out, bool force, bool resume = false) {
  std::error_code ec;
  if (fs::exists(out, ec) && !fs::is_empty(out, ec)) {
    if (resume)
      return;
    if (!force)
      throw IoError("output directory " + out.string() +
                    " already exists; pass --force to overwrite");
    fs::remove_all(out, ec);
    if (ec)
      throw IoError("cannot clear " + out.string() + ": " + ec.message());
  }
  fs::create_directories(out, ec);
  if (ec)
    throw IoError("cannot create " + out.string() + ": " + ec.message());
}

inline std::string config_text(const ExperimentConfig &cfg) { return to_json(cfg).dump(2) + "\n"; }

inline std::string format_report(const EvalReport &r, std::optional<std::size_t> generation = {}) {
  using detail::format_double;
  std::ostringstream os;
  if (generation)
    os << "generation=" << *generation << '\n';
  os << "n_samples=" << r.n_samples << '\n'
     << "mae=" << format_double(r.mae) << '\n'
     << "mae_ldl=" << format_double(r.mae_ldl) << '\n'
     << "mae_reg=" << format_double(r.mae_reg) << '\n'
     << "mae_fused=" << format_double(r.mae_fused) << '\n'
     << "ca3=" << format_double(r.ca.at(3)) << '\n'
     << "ca5=" << format_double(r.ca.at(5)) << '\n'
     << "ca7=" << format_double(r.ca.at(7)) << '\n';
  if (r.epsilon_error)
    os << "epsilon_error=" << format_double(*r.epsilon_error) << '\n';
  os << "out_of_range=" << r.out_of_range_count << '\n';
  return os.str();
}

// ---------------------------------------------------------------- synth

/// Writes train.csv, test.csv, dataset.json (metadata sidecar) and config.json.
inline void run_synth(const ExperimentConfig &cfg, const fs::path &out, bool force) {
  prepare_output_dir(out, force);
  const auto [train, test] = load_datasets(cfg.data);
  write_csv(train, out / "train.csv");
  write_csv(test, out / "test.csv");
  const auto &s = cfg.data.synth;
  const json meta{{"l1", train.range().l1()}, {"lk", train.range().lk()},
                  {"d", train.feature_dim()}, {"seed", s.seed},
                  {"sigma", s.noise_sigma},   {"identities", s.n_identities}};
  write_text_file(out / "dataset.json", meta.dump(2) + "\n");
  write_text_file(out / "config.json", config_text(cfg));
}

// ---------------------------------------------------------------- evolve

inline fs::path generation_dir(const fs::path &run, std::size_t t) {
  return run / ("gen_" + std::to_string(t));
}

inline Checkpoint make_checkpoint(const GenerationState &g, const ExperimentConfig &cfg,
                                  const AgeRange &range) {
  Checkpoint c;
  c.range = range;
  c.generation = g.t;
  c.model = g.model;
  c.optimizer = cfg.run.train;
  c.rng_seed = cfg.run.init_seed;
  c.warm_start = cfg.run.warm_start;
  return c;
}

namespace detail {

inline void write_run_log(const fs::path &path, const std::vector<std::string> &rows) {
  std::string text = std::string(kRunLogHeader) + "\n";
  for (const auto &r : rows)
    text += r + "\n";
  write_text_file(path, text);
}

/// Number of leading generations whose checkpoint, cache and log row all exist.
inline std::size_t completed_generations(const fs::path &run, std::vector<std::string> &rows) {
  rows.clear();
  if (!fs::exists(run / "run_log.csv"))
    return 0;
  const auto log = read_run_log(run / "run_log.csv");
  std::size_t done = 0;
  for (const auto &r : log) {
    const auto dir = generation_dir(run, done + 1);
    if (r.t != done + 1 || !fs::exists(dir / "checkpoint.json") || !fs::exists(dir / "cache.bin"))
      break;
    rows.push_back(r.raw);
    ++done;
  }
  return done;
}

} // namespace detail

/// Runs the generation chain into `out`. With `resume`, completed generations
/// found in `out` are kept and the chain continues from the last one.
inline std::vector<GenerationState> run_evolve(const ExperimentConfig &cfg, const fs::path &out,
                                               const RunOptions &opts = {}) {
  cfg.run.validate();
  const std::string resolved = config_text(cfg);
  prepare_output_dir(out, opts.force, opts.resume);

  std::vector<std::string> rows;
  std::optional<GenerationState> start;
  if (opts.resume && fs::exists(out / "config.json")) {
    if (read_text_file(out / "config.json") != resolved)
      throw ConfigError("cannot resume " + out.string() +
                        ": its config.json differs from the resolved config");
    const std::size_t done = detail::completed_generations(out, rows);
    if (done > 0) {
      GenerationState g;
      g.t = done;
      const auto dir = generation_dir(out, done);
      g.model = read_checkpoint(dir / "checkpoint.json").model;
      g.cache = read_cache(dir / "cache.bin", done);
      g.mean_slack = g.cache.mean_delta();
      start = std::move(g);
    }
  }
  write_text_file(out / "config.json", resolved);
  // Drop anything beyond the last completed generation.
  for (std::size_t t = rows.size() + 1; fs::exists(generation_dir(out, t)); ++t)
    fs::remove_all(generation_dir(out, t));
  detail::write_run_log(out / "run_log.csv", rows);

  const auto [train, test] = load_datasets(cfg.data);
  if (start && start->cache.size() != train.size())
    throw IoError("cannot resume: cached knowledge does not match the training set");

  auto observer = [&](const GenerationState &g) {
    const auto dir = generation_dir(out, g.t);
    fs::create_directories(dir);
    write_checkpoint(make_checkpoint(g, cfg, train.range()), dir / "checkpoint.json");
    write_cache(g.cache, dir / "cache.bin");
    rows.push_back(run_log_row(g));
    detail::write_run_log(out / "run_log.csv", rows);
    if (opts.log)
      *opts.log << format_report(g.eval, g.t) << "mean_slack=" << detail::format_double(g.mean_slack)
                << "\ntrain_loss=" << detail::format_double(g.train_loss) << "\n\n"
                << std::flush;
  };
  return evolve(train, test, cfg.run, observer, std::move(start));
}

// ---------------------------------------------------------------- eval / dump

/// Checkpoint of generation `t` in a run directory; the last one when unset.
inline fs::path find_checkpoint(const fs::path &run, std::optional<std::size_t> t = {}) {
  if (t)
    return generation_dir(run, *t) / "checkpoint.json";
  std::size_t last = 0;
  while (fs::exists(generation_dir(run, last + 1) / "checkpoint.json"))
    ++last;
  if (last == 0)
    throw IoError(run.string() + " contains no generation checkpoints");
  return generation_dir(run, last) / "checkpoint.json";
}

inline EvalReport run_eval(const ExperimentConfig &cfg, const fs::path &checkpoint) {
  const Checkpoint c = read_checkpoint(checkpoint);
  const auto [train, test] = load_datasets(cfg.data);
  if (!(c.range == test.range()))
    throw ConfigError("checkpoint age range does not match the configured dataset");
  return evaluate(c.model, test, cfg.run.infer_tau, cfg.run.heads);
}

/// CSV `sample_id,true_age,y_ldl,y_reg,y_fused,p_0,...,p_{k-1}` over the test
/// split (or the training split when `train_split`).
inline void run_dump_dist(const ExperimentConfig &cfg, const fs::path &checkpoint,
                          const fs::path &csv_out, bool train_split = false) {
  using detail::format_double;
  const Checkpoint c = read_checkpoint(checkpoint);
  const auto [train, test] = load_datasets(cfg.data);
  const Dataset &data = train_split ? train : test;
  if (!(c.range == data.range()))
    throw ConfigError("checkpoint age range does not match the configured dataset");
  std::ofstream out(csv_out, std::ios::binary);
  if (!out)
    throw IoError("cannot open " + csv_out.string() + " for writing");
  out << "sample_id,true_age,y_ldl,y_reg,y_fused";
  for (std::size_t i = 0; i < data.range().k(); ++i)
    out << ",p_" << i;
  out << '\n';
  const auto preds = predict_all(c.model, data, cfg.run.infer_tau);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto &p = preds[i];
    out << i << ',' << data[i].age << ',' << format_double(p.y_ldl) << ','
        << format_double(p.y_reg) << ',' << format_double(p.y_fused);
    for (double v : p.distribution.probs())
      out << ',' << format_double(v);
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for " + csv_out.string());
}

// ---------------------------------------------------------------- ablate

struct AblatePoint {
  double tau;
  double alpha;
  double lambda;
};

inline std::vector<AblatePoint> ablate_points(const AblateGrid &g) {
  std::vector<AblatePoint> pts;
  for (double tau : g.tau)
    for (double alpha : g.alpha)
      for (double lambda : g.lambda)
        pts.push_back({tau, alpha, lambda});
  return pts;
}

inline ExperimentConfig config_for_point(ExperimentConfig cfg, const AblatePoint &p) {
  cfg.run.loss.tau = p.tau;
  cfg.run.loss.alpha = p.alpha;
  cfg.run.loss.lambda1 = p.lambda;
  cfg.run.loss.lambdat = p.lambda;
  cfg.ablate = AblateGrid{{p.tau}, {p.alpha}, {p.lambda}};
  return cfg;
}

inline constexpr const char *kAblateHeader =
    "run,tau,alpha,lambda,t,train_loss,test_mae,ca3,ca5,ca7,mean_slack";

/// One evolve run per grid point in `out/run_{i}`, summarized (last
/// generation) into `out/ablate_summary.csv`.
inline void run_ablate(const ExperimentConfig &cfg, const fs::path &out, bool force,
                       bool parallel = false, std::ostream *log = nullptr) {
  using detail::format_double;
  prepare_output_dir(out, force);
  write_text_file(out / "config.json", config_text(cfg));
  const auto points = ablate_points(cfg.ablate);
  std::vector<std::string> last_rows(points.size());
  std::vector<std::exception_ptr> errors(points.size());

  auto run_one = [&](std::size_t i) {
    try {
      const auto dir = out / ("run_" + std::to_string(i));
      RunOptions o;
      o.log = parallel ? nullptr : log;
      const auto chain = run_evolve(config_for_point(cfg, points[i]), dir, o);
      last_rows[i] = run_log_row(chain.back());
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (parallel) {
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < points.size(); ++i)
      workers.emplace_back(run_one, i);
    for (auto &w : workers)
      w.join();
  } else {
    for (std::size_t i = 0; i < points.size(); ++i)
      run_one(i);
  }
  for (const auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  std::string text = std::string(kAblateHeader) + "\n";
  for (std::size_t i = 0; i < points.size(); ++i)
    text += std::to_string(i) + "," + format_double(points[i].tau) + "," +
            format_double(points[i].alpha) + "," + format_double(points[i].lambda) + "," +
            last_rows[i] + "\n";
  write_text_file(out / "ablate_summary.csv", text);
}

} // namespace cen

#endif
