#ifndef CEN_CONFIG_HPP
#define CEN_CONFIG_HPP

// Experiment configuration as one JSON document with sections data, model,
// loss, train, evolution and ablate. Every key is required and unknown keys
// are rejected, so a resolved config fully determines a run. Command-line
// overrides address keys by dotted path (train.epochs=10).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cen/data.hpp"
#include "cen/error.hpp"
#include "cen/evolution.hpp"
#include "cen/inference.hpp"

namespace cen {

using json = nlohmann::json;

struct DataConfig {
  std::string source = "synthetic"; // synthetic | csv
  std::string csv_path;
  SynthConfig synth;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
};

struct AblateGrid {
  std::vector<double> tau{2.0};
  std::vector<double> alpha{0.5};
  std::vector<double> lambda{4.0}; // sets lambda1 and lambdat together
};

struct ExperimentConfig {
  DataConfig data;
  RunConfig run;
  AblateGrid ablate;
};

/// The default experiment: the seed-0 synthetic benchmark and a four
/// generation chain.
inline ExperimentConfig default_config() { return ExperimentConfig{}; }

inline json to_json(const ExperimentConfig &c) {
  const auto &s = c.data.synth;
  const auto &r = c.run;
  json j;
  j["data"] = {{"source", c.data.source},
               {"csv_path", c.data.csv_path},
               {"l1", s.l1},
               {"lk", s.lk},
               {"d", s.d},
               {"n", s.n},
               {"seed", s.seed},
               {"sigma", s.noise_sigma},
               {"identities", s.n_identities},
               {"apparent_sigma", s.apparent_sigma},
               {"train_fraction", c.data.train_fraction},
               {"split_seed", c.data.split_seed}};
  j["model"] = {{"hidden", r.hidden}, {"activation", "relu"}, {"init_seed", r.init_seed}};
  j["loss"] = {{"tau", r.loss.tau},
               {"alpha", r.loss.alpha},
               {"lambda1", r.loss.lambda1},
               {"lambdat", r.loss.lambdat},
               {"ce_tau", r.loss.ce_tau},
               {"infer_tau", r.infer_tau},
               {"kl_tau_square_rescale", r.loss.kl_tau_square_rescale},
               {"heads", to_string(r.heads)}};
  j["train"] = {{"epochs", r.train.epochs},
                {"batch_size", r.train.batch_size},
                {"lr", r.train.learning_rate},
                {"momentum", r.train.momentum},
                {"weight_decay", r.train.weight_decay},
                {"lr_decay_factor", r.train.lr_decay_factor},
                {"lr_decay_interval", r.train.lr_decay_interval},
                {"shuffle_seed", r.train.shuffle_seed}};
  j["evolution"] = {{"generations", r.generations}, {"warm_start", r.warm_start}};
  j["ablate"] = {{"tau", c.ablate.tau}, {"alpha", c.ablate.alpha}, {"lambda", c.ablate.lambda}};
  return j;
}

namespace detail {

/// Reads the keys of one section, remembering which were consumed.
class SectionReader {
public:
  SectionReader(const json &root, std::string name) : name_(std::move(name)) {
    if (!root.is_object())
      throw ConfigError("config must be a JSON object");
    const auto it = root.find(name_);
    if (it == root.end())
      throw ConfigError("missing config key '" + name_ + "'");
    if (!it->is_object())
      throw ConfigError("config key '" + name_ + "' must be an object");
    section_ = &*it;
  }

  template <typename T> T get(const std::string &key) {
    const auto it = section_->find(key);
    if (it == section_->end())
      throw ConfigError("missing config key '" + name_ + "." + key + "'");
    seen_.insert(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean())
          throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer())
          throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>)
          if (it->template get<long long>() < 0)
            throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number())
          throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string())
          throw ConfigError("");
      }
      return it->template get<T>();
    } catch (const std::exception &) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type: " +
                        it->dump());
    }
  }

  void finish() const {
    for (const auto &item : section_->items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown config key '" + name_ + "." + item.key() + "'");
  }

private:
  std::string name_;
  const json *section_ = nullptr;
  std::set<std::string> seen_;
};

} // namespace detail

inline ExperimentConfig config_from_json(const json &j) {
  static const std::set<std::string> sections{"data", "model", "loss", "train", "evolution",
                                              "ablate"};
  if (!j.is_object())
    throw ConfigError("config must be a JSON object");
  for (const auto &item : j.items())
    if (!sections.count(item.key()))
      throw ConfigError("unknown config key '" + item.key() + "'");

  ExperimentConfig c;
  {
    detail::SectionReader r(j, "data");
    c.data.source = r.get<std::string>("source");
    c.data.csv_path = r.get<std::string>("csv_path");
    c.data.synth.l1 = r.get<int>("l1");
    c.data.synth.lk = r.get<int>("lk");
    c.data.synth.d = r.get<std::size_t>("d");
    c.data.synth.n = r.get<std::size_t>("n");
    c.data.synth.seed = r.get<std::uint64_t>("seed");
    c.data.synth.noise_sigma = r.get<double>("sigma");
    c.data.synth.n_identities = r.get<std::size_t>("identities");
    c.data.synth.apparent_sigma = r.get<double>("apparent_sigma");
    c.data.train_fraction = r.get<double>("train_fraction");
    c.data.split_seed = r.get<std::uint64_t>("split_seed");
    r.finish();
    if (c.data.source != "synthetic" && c.data.source != "csv")
      throw ConfigError("data.source must be 'synthetic' or 'csv'");
    if (c.data.source == "csv" && c.data.csv_path.empty())
      throw ConfigError("data.csv_path is required when data.source is 'csv'");
  }
  {
    detail::SectionReader r(j, "model");
    c.run.hidden = r.get<std::vector<std::size_t>>("hidden");
    if (r.get<std::string>("activation") != "relu")
      throw ConfigError("model.activation: only 'relu' is supported");
    c.run.init_seed = r.get<std::uint64_t>("init_seed");
    r.finish();
  }
  {
    detail::SectionReader r(j, "loss");
    c.run.loss.tau = r.get<double>("tau");
    c.run.loss.alpha = r.get<double>("alpha");
    c.run.loss.lambda1 = r.get<double>("lambda1");
    c.run.loss.lambdat = r.get<double>("lambdat");
    c.run.loss.ce_tau = r.get<double>("ce_tau");
    c.run.infer_tau = r.get<double>("infer_tau");
    c.run.loss.kl_tau_square_rescale = r.get<bool>("kl_tau_square_rescale");
    c.run.heads = heads_from_string(r.get<std::string>("heads"));
    r.finish();
  }
  {
    detail::SectionReader r(j, "train");
    auto &t = c.run.train;
    t.epochs = r.get<std::size_t>("epochs");
    t.batch_size = r.get<std::size_t>("batch_size");
    t.learning_rate = r.get<double>("lr");
    t.momentum = r.get<double>("momentum");
    t.weight_decay = r.get<double>("weight_decay");
    t.lr_decay_factor = r.get<double>("lr_decay_factor");
    t.lr_decay_interval = r.get<std::size_t>("lr_decay_interval");
    t.shuffle_seed = r.get<std::uint64_t>("shuffle_seed");
    r.finish();
  }
  {
    detail::SectionReader r(j, "evolution");
    c.run.generations = r.get<std::size_t>("generations");
    c.run.warm_start = r.get<bool>("warm_start");
    r.finish();
  }
  {
    detail::SectionReader r(j, "ablate");
    c.ablate.tau = r.get<std::vector<double>>("tau");
    c.ablate.alpha = r.get<std::vector<double>>("alpha");
    c.ablate.lambda = r.get<std::vector<double>>("lambda");
    r.finish();
    if (c.ablate.tau.empty() || c.ablate.alpha.empty() || c.ablate.lambda.empty())
      throw ConfigError("ablate grid axes must be non-empty");
  }
  c.run.validate();
  return c;
}

/// Applies `section.key=value`. The value is parsed as JSON when possible and
/// taken as a bare string otherwise. The key must already exist.
inline void apply_override(json &j, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json *node = &j;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part))
      throw ConfigError("override names unknown config key '" + path + "'");
    node = &(*node)[part];
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded())
    value = text;
  *node = std::move(value);
}

inline json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw ConfigError(path.string() + " is not valid JSON");
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path &path,
                                    const std::vector<std::string> &overrides = {}) {
  json j = read_json_file(path);
  for (const auto &o : overrides)
    apply_override(j, o);
  return config_from_json(j);
}

} // namespace cen

#endif
