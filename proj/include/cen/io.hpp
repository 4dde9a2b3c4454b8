#ifndef CEN_IO_HPP
#define CEN_IO_HPP

// On-disk formats of a run directory:
//   gen_{t}/checkpoint.json  model weights and training hyperparameters
//   gen_{t}/cache.bin        knowledge cache, little-endian
//   run_log.csv              one row per completed generation

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cen/config.hpp"
#include "cen/data.hpp"
#include "cen/error.hpp"
#include "cen/evolution.hpp"
#include "cen/model.hpp"

namespace cen {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  AgeRange range{0, 1};
  std::size_t generation = 1;
  ModelParams model;
  TrainConfig optimizer;
  std::uint64_t rng_seed = 0;
  bool warm_start = true;
};

namespace detail {

inline json layer_to_json(const DenseLayer &l) {
  return json{{"rows", l.weights.rows()},
              {"cols", l.weights.cols()},
              {"weights", l.weights.data()},
              {"biases", l.biases}};
}

inline DenseLayer layer_from_json(const json &j, const std::string &what) {
  try {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    DenseLayer l{Matrix(rows, cols, j.at("weights").get<Vector>()), j.at("biases").get<Vector>()};
    if (l.biases.size() != rows)
      throw IoError(what + ": bias count does not match rows");
    return l;
  } catch (const json::exception &e) {
    throw IoError(what + ": " + e.what());
  }
}

} // namespace detail

inline json checkpoint_to_json(const Checkpoint &c) {
  std::vector<std::size_t> dims{c.model.input_dim()};
  json layers = json::array();
  for (const auto &l : c.model.trunk) {
    dims.push_back(l.outputs());
    layers.push_back(detail::layer_to_json(l));
  }
  const auto &o = c.optimizer;
  return json{{"format_version", c.format_version},
              {"age_range", {{"l1", c.range.l1()}, {"lk", c.range.lk()}}},
              {"generation_index", c.generation},
              {"trunk_dims", dims},
              {"activation", "relu"},
              {"trunk", layers},
              {"head_ldl", detail::layer_to_json(c.model.head_ldl)},
              {"head_reg", detail::layer_to_json(c.model.head_reg)},
              {"optimizer",
               {{"lr", o.learning_rate},
                {"momentum", o.momentum},
                {"weight_decay", o.weight_decay},
                {"lr_decay_factor", o.lr_decay_factor},
                {"lr_decay_interval", o.lr_decay_interval},
                {"epochs", o.epochs},
                {"batch_size", o.batch_size},
                {"shuffle_seed", o.shuffle_seed}}},
              {"rng_seed", c.rng_seed},
              {"warm_start", c.warm_start}};
}

inline Checkpoint checkpoint_from_json(const json &j) {
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion)
      throw IoError("unsupported checkpoint format_version " + std::to_string(c.format_version));
    c.range = AgeRange(j.at("age_range").at("l1").get<int>(), j.at("age_range").at("lk").get<int>());
    c.generation = j.at("generation_index").get<std::size_t>();
    if (j.at("activation").get<std::string>() != "relu")
      throw IoError("checkpoint activation must be relu");
    for (const auto &l : j.at("trunk"))
      c.model.trunk.push_back(detail::layer_from_json(l, "trunk layer"));
    c.model.head_ldl = detail::layer_from_json(j.at("head_ldl"), "head_ldl");
    c.model.head_reg = detail::layer_from_json(j.at("head_reg"), "head_reg");
    const auto dims = j.at("trunk_dims").get<std::vector<std::size_t>>();
    std::vector<std::size_t> actual{c.model.input_dim()};
    for (const auto &l : c.model.trunk)
      actual.push_back(l.outputs());
    if (dims != actual)
      throw IoError("checkpoint trunk_dims disagree with the stored layers");
    const auto &o = j.at("optimizer");
    c.optimizer.learning_rate = o.at("lr").get<double>();
    c.optimizer.momentum = o.at("momentum").get<double>();
    c.optimizer.weight_decay = o.at("weight_decay").get<double>();
    c.optimizer.lr_decay_factor = o.at("lr_decay_factor").get<double>();
    c.optimizer.lr_decay_interval = o.at("lr_decay_interval").get<std::size_t>();
    c.optimizer.epochs = o.at("epochs").get<std::size_t>();
    c.optimizer.batch_size = o.at("batch_size").get<std::size_t>();
    c.optimizer.shuffle_seed = o.at("shuffle_seed").get<std::uint64_t>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.warm_start = j.at("warm_start").get<bool>();
  } catch (const json::exception &e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError &e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    c.model.validate();
  } catch (const Error &e) {
    throw IoError(std::string("invalid checkpoint model: ") + e.what());
  }
  if (c.model.num_classes() != c.range.k())
    throw IoError("checkpoint distribution head has " + std::to_string(c.model.num_classes()) +
                  " outputs for an age range of " + std::to_string(c.range.k()));
  return c;
}

inline void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out)
    throw IoError("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_checkpoint(const Checkpoint &c, const std::filesystem::path &path) {
  write_text_file(path, checkpoint_to_json(c).dump(1) + "\n");
}

inline Checkpoint read_checkpoint(const std::filesystem::path &path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded())
    throw IoError(path.string() + " is not valid JSON");
  return checkpoint_from_json(j);
}

// Knowledge cache binary layout (all little-endian):
//   char[4]  magic "CENK"
//   uint32   version
//   uint64   n_samples
//   uint64   k
//   n_samples x { double p[k]; double delta; }
inline constexpr std::array<char, 4> kCacheMagic{'C', 'E', 'N', 'K'};
inline constexpr std::uint32_t kCacheVersion = 1;

namespace detail {

template <typename U> void put_le(std::ostream &out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U> U get_le(std::istream &in, const std::string &what) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char *>(bytes.data()), bytes.size());
  if (!in)
    throw IoError("truncated knowledge cache while reading " + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void put_double(std::ostream &out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_double(std::istream &in, const std::string &what) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, what));
}

} // namespace detail

inline void write_cache(const KnowledgeCache &cache, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out.write(kCacheMagic.data(), kCacheMagic.size());
  detail::put_le<std::uint32_t>(out, kCacheVersion);
  detail::put_le<std::uint64_t>(out, cache.size());
  detail::put_le<std::uint64_t>(out, cache.num_classes());
  for (std::size_t i = 0; i < cache.size(); ++i) {
    for (double p : cache.distributions[i].probs())
      detail::put_double(out, p);
    detail::put_double(out, cache.deltas[i]);
  }
  if (!out)
    throw IoError("write failed for " + path.string());
}

inline KnowledgeCache read_cache(const std::filesystem::path &path, std::size_t generation = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCacheMagic)
    throw IoError(path.string() + " is not a knowledge cache (bad magic)");
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != kCacheVersion)
    throw IoError(path.string() + ": unsupported cache version " + std::to_string(version));
  const auto n = detail::get_le<std::uint64_t>(in, "n_samples");
  const auto k = detail::get_le<std::uint64_t>(in, "k");
  if (n == 0 || k == 0)
    throw IoError(path.string() + ": empty knowledge cache");
  KnowledgeCache c;
  c.generation = generation;
  c.distributions.reserve(n);
  c.deltas.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Vector p(k);
    for (auto &v : p)
      v = detail::get_double(in, "sample " + std::to_string(i));
    try {
      c.distributions.emplace_back(std::move(p));
    } catch (const Error &e) {
      throw IoError(path.string() + ": sample " + std::to_string(i) + ": " + e.what());
    }
    const double delta = detail::get_double(in, "sample " + std::to_string(i));
    if (!(delta >= 0.0))
      throw IoError(path.string() + ": negative slack for sample " + std::to_string(i));
    c.deltas.push_back(delta);
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw IoError(path.string() + ": trailing bytes after knowledge cache");
  return c;
}

inline constexpr const char *kRunLogHeader = "t,train_loss,test_mae,ca3,ca5,ca7,mean_slack";

inline std::string run_log_row(const GenerationState &g) {
  using detail::format_double;
  return std::to_string(g.t) + "," + format_double(g.train_loss) + "," +
         format_double(g.eval.mae) + "," + format_double(g.eval.ca.at(3)) + "," +
         format_double(g.eval.ca.at(5)) + "," + format_double(g.eval.ca.at(7)) + "," +
         format_double(g.mean_slack);
}

/// Parsed run_log.csv row.
struct RunLogRow {
  std::size_t t = 0;
  double train_loss = 0.0;
  double test_mae = 0.0;
  double ca3 = 0.0;
  double ca5 = 0.0;
  double ca7 = 0.0;
  double mean_slack = 0.0;
  std::string raw;
};

inline std::vector<RunLogRow> read_run_log(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRunLogHeader)
    throw IoError(path.string() + ": unexpected run log header");
  std::vector<RunLogRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty())
      continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 7)
      throw IoError(path.string() + ": row " + std::to_string(row) + " has " +
                    std::to_string(cells.size()) + " cells");
    RunLogRow r;
    r.t = detail::parse_number<std::size_t>(cells[0], row, 0);
    r.train_loss = detail::parse_number<double>(cells[1], row, 1);
    r.test_mae = detail::parse_number<double>(cells[2], row, 2);
    r.ca3 = detail::parse_number<double>(cells[3], row, 3);
    r.ca5 = detail::parse_number<double>(cells[4], row, 4);
    r.ca7 = detail::parse_number<double>(cells[5], row, 5);
    r.mean_slack = detail::parse_number<double>(cells[6], row, 6);
    r.raw = line;
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace cen

#endif
