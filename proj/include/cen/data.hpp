#ifndef CEN_DATA_HPP
#define CEN_DATA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cen/error.hpp"
#include "cen/numerics.hpp"

namespace cen {

/// Integer ages l1..lk, k = lk - l1 + 1 labels.
class AgeRange {
public:
  AgeRange(int l1, int lk) : l1_(l1), lk_(lk) {
    if (!(l1 < lk))
      throw DomainError("age range requires l1 < lk, got [" + std::to_string(l1) + ", " +
                        std::to_string(lk) + "]");
  }

  int l1() const noexcept { return l1_; }
  int lk() const noexcept { return lk_; }
  std::size_t k() const noexcept { return static_cast<std::size_t>(lk_ - l1_ + 1); }
  bool contains(int age) const noexcept { return age >= l1_ && age <= lk_; }
  int age_at(std::size_t index) const noexcept { return l1_ + static_cast<int>(index); }

  bool operator==(const AgeRange &) const = default;

private:
  int l1_;
  int lk_;
};

/// (l - l1) / (lk - l1)
inline double normalize_age(int age, const AgeRange &range) {
  if (!range.contains(age))
    throw DomainError("age " + std::to_string(age) + " outside [" + std::to_string(range.l1()) +
                      ", " + std::to_string(range.lk()) + "]");
  return static_cast<double>(age - range.l1()) / static_cast<double>(range.lk() - range.l1());
}

struct Sample {
  Vector features;
  int age = 0;
  double y = 0.0;          // normalized age
  std::size_t label = 0;   // one-hot index, age - l1
  // Apparent-age annotation (mean, std); sigma == 0 when absent.
  double apparent_mu = 0.0;
  double apparent_sigma = 0.0;

  bool operator==(const Sample &) const = default;
};

inline Sample make_sample(Vector features, int age, const AgeRange &range) {
  Sample s;
  s.y = normalize_age(age, range);
  s.features = std::move(features);
  s.age = age;
  s.label = static_cast<std::size_t>(age - range.l1());
  return s;
}

enum class Split { train, test, all };

class Dataset {
public:
  Dataset(AgeRange range, std::vector<Sample> samples, std::string provenance,
          Split split = Split::all)
      : range_(range), samples_(std::move(samples)), provenance_(std::move(provenance)),
        split_(split) {
    if (samples_.empty())
      throw DomainError("dataset must contain at least one sample");
    const std::size_t d = samples_.front().features.size();
    if (d == 0)
      throw ShapeError("dataset features must be non-empty");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto &s = samples_[i];
      if (s.features.size() != d)
        throw ShapeError("sample " + std::to_string(i) + " has " +
                         std::to_string(s.features.size()) + " features, expected " +
                         std::to_string(d));
      if (!range_.contains(s.age))
        throw DomainError("sample " + std::to_string(i) + " age " + std::to_string(s.age) +
                          " outside the declared age range");
    }
  }

  const AgeRange &range() const noexcept { return range_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t feature_dim() const noexcept { return samples_.front().features.size(); }
  const Sample &operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample> &samples() const noexcept { return samples_; }
  const std::string &provenance() const noexcept { return provenance_; }
  Split split() const noexcept { return split_; }
  bool has_apparent_age() const {
    return std::all_of(samples_.begin(), samples_.end(),
                       [](const Sample &s) { return s.apparent_sigma > 0.0; });
  }

private:
  AgeRange range_;
  std::vector<Sample> samples_;
  std::string provenance_;
  Split split_;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n = 2500;
  int l1 = 16;
  int lk = 77;
  std::size_t d = 32;
  double noise_sigma = 0.1;
  std::size_t n_identities = 50;
  // When > 0, every sample carries an apparent-age annotation (age, sigma).
  double apparent_sigma = 0.0;
};

/// Synthetic faces-free age data. Each identity ages at its own speed: the
/// normalized age y is warped to y^speed + shift before passing through a fixed
/// sinusoidal embedding, then Gaussian noise is added. Different identities of
/// different ages can therefore land on the same features.
inline Dataset synth_generate(const SynthConfig &cfg) {
  if (cfg.n == 0 || cfg.d == 0 || cfg.n_identities == 0)
    throw DomainError("synth_generate: n, d and n_identities must be positive");
  if (!(cfg.noise_sigma >= 0.0))
    throw DomainError("synth_generate: noise sigma must be non-negative");
  const AgeRange range(cfg.l1, cfg.lk);
  std::mt19937_64 rng(cfg.seed);

  std::uniform_real_distribution<double> freq_dist(1.0, 3.0 * std::numbers::pi);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  Vector freq(cfg.d), phase(cfg.d);
  for (std::size_t j = 0; j < cfg.d; ++j) {
    freq[j] = freq_dist(rng);
    phase[j] = phase_dist(rng);
  }

  std::normal_distribution<double> speed_dist(0.0, 0.25);
  std::normal_distribution<double> shift_dist(0.0, 0.03);
  Vector speed(cfg.n_identities), shift(cfg.n_identities);
  for (std::size_t i = 0; i < cfg.n_identities; ++i) {
    speed[i] = std::exp(speed_dist(rng));
    shift[i] = shift_dist(rng);
  }

  std::uniform_int_distribution<int> age_dist(cfg.l1, cfg.lk);
  std::uniform_int_distribution<std::size_t> id_dist(0, cfg.n_identities - 1);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<Sample> samples;
  samples.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const int age = age_dist(rng);
    const std::size_t id = id_dist(rng);
    const double warped = std::pow(normalize_age(age, range), speed[id]) + shift[id];
    Vector f(cfg.d);
    for (std::size_t j = 0; j < cfg.d; ++j) {
      const double eps = noise(rng);
      f[j] = std::sin(freq[j] * warped + phase[j]) + cfg.noise_sigma * eps;
    }
    Sample s = make_sample(std::move(f), age, range);
    if (cfg.apparent_sigma > 0.0) {
      s.apparent_mu = age;
      s.apparent_sigma = cfg.apparent_sigma;
    }
    samples.push_back(std::move(s));
  }
  return Dataset(range, std::move(samples), "synthetic:seed=" + std::to_string(cfg.seed));
}

/// Seeded permutation, then the first round(fraction * n) samples go to train.
inline std::pair<Dataset, Dataset> split(const Dataset &data, double fraction,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw DomainError("split fraction must lie in (0, 1), got " + std::to_string(fraction));
  const auto n_train =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  if (n_train == 0 || n_train >= data.size())
    throw DomainError("split of " + std::to_string(data.size()) + " samples at fraction " +
                      std::to_string(fraction) + " leaves an empty side");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Sample> train, test;
  train.reserve(n_train);
  test.reserve(data.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : test).push_back(data[order[i]]);
  return {Dataset(data.range(), std::move(train), data.provenance(), Split::train),
          Dataset(data.range(), std::move(test), data.provenance(), Split::test)};
}

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T> T parse_number(std::string_view cell, std::size_t row, std::size_t col) {
  cell = trim(cell);
  T value{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || cell.empty())
    throw IoError("CSV row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                  ": cannot parse '" + std::string(cell) + "'");
  return value;
}

} // namespace detail

/// Writes `# age_range=l1,lk`, a header `age[,mu,sigma],f0,...` and one row per
/// sample. Doubles use the shortest round-trip representation.
inline void write_csv(const Dataset &data, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  const bool apparent = data.has_apparent_age();
  out << "# age_range=" << data.range().l1() << ',' << data.range().lk() << '\n';
  out << "age";
  if (apparent)
    out << ",mu,sigma";
  for (std::size_t j = 0; j < data.feature_dim(); ++j)
    out << ",f" << j;
  out << '\n';
  for (const auto &s : data.samples()) {
    out << s.age;
    if (apparent)
      out << ',' << detail::format_double(s.apparent_mu) << ','
          << detail::format_double(s.apparent_sigma);
    for (double f : s.features)
      out << ',' << detail::format_double(f);
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for " + path.string());
}

/// Reads a CSV written by write_csv or any file with header `age,f0,...`.
/// The age range comes from a `# age_range=l1,lk` comment when present, else
/// from `fallback`, else from the observed min/max age.
inline Dataset load_csv(const std::filesystem::path &path,
                        std::optional<AgeRange> fallback = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::optional<AgeRange> declared;
  std::string line;
  std::size_t row = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++row;
    const auto t = detail::trim(line);
    if (t.empty())
      continue;
    if (t.front() == '#') {
      constexpr std::string_view key = "# age_range=";
      if (t.substr(0, key.size()) == key) {
        const auto cells = detail::split_csv_line(t.substr(key.size()));
        if (cells.size() != 2)
          throw IoError("CSV row " + std::to_string(row) + ": malformed age_range comment");
        declared = AgeRange(detail::parse_number<int>(cells[0], row, 0),
                            detail::parse_number<int>(cells[1], row, 1));
      }
      continue;
    }
    header_line = std::string(t);
    break;
  }
  if (header_line.empty())
    throw IoError(path.string() + ": empty file (no header row)");
  header = detail::split_csv_line(header_line);
  if (detail::trim(header[0]) != "age")
    throw IoError("CSV row " + std::to_string(row) + ": first column must be 'age'");
  std::size_t first_feature = 1;
  bool apparent = false;
  if (header.size() >= 3 && detail::trim(header[1]) == "mu" && detail::trim(header[2]) == "sigma") {
    apparent = true;
    first_feature = 3;
  }
  const std::size_t d = header.size() - first_feature;
  if (d == 0)
    throw IoError("CSV row " + std::to_string(row) + ": no feature columns");
  for (std::size_t j = 0; j < d; ++j)
    if (detail::trim(header[first_feature + j]) != "f" + std::to_string(j))
      throw IoError("CSV row " + std::to_string(row) + ": expected column f" + std::to_string(j));

  struct Raw {
    int age;
    double mu, sigma;
    Vector f;
  };
  std::vector<Raw> raws;
  while (std::getline(in, line)) {
    ++row;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    const auto cells = detail::split_csv_line(t);
    if (cells.size() != header.size())
      throw IoError("CSV row " + std::to_string(row) + ": expected " +
                    std::to_string(header.size()) + " cells, found " +
                    std::to_string(cells.size()));
    Raw r{detail::parse_number<int>(cells[0], row, 0), 0.0, 0.0, Vector(d)};
    if (apparent) {
      r.mu = detail::parse_number<double>(cells[1], row, 1);
      r.sigma = detail::parse_number<double>(cells[2], row, 2);
    }
    for (std::size_t j = 0; j < d; ++j) {
      r.f[j] = detail::parse_number<double>(cells[first_feature + j], row, first_feature + j);
      if (!std::isfinite(r.f[j]))
        throw IoError("CSV row " + std::to_string(row) + ": non-finite feature");
    }
    raws.push_back(std::move(r));
  }
  if (raws.empty())
    throw IoError(path.string() + ": no data rows");

  std::optional<AgeRange> range = declared ? declared : fallback;
  if (!range) {
    const auto [lo, hi] = std::minmax_element(raws.begin(), raws.end(),
                                              [](const Raw &a, const Raw &b) { return a.age < b.age; });
    range = AgeRange(lo->age, hi->age);
  }
  std::vector<Sample> samples;
  samples.reserve(raws.size());
  for (std::size_t i = 0; i < raws.size(); ++i) {
    if (!range->contains(raws[i].age))
      throw IoError("CSV data row " + std::to_string(i + 1) + ": age " +
                    std::to_string(raws[i].age) + " outside the declared range");
    Sample s = make_sample(std::move(raws[i].f), raws[i].age, *range);
    s.apparent_mu = raws[i].mu;
    s.apparent_sigma = raws[i].sigma;
    samples.push_back(std::move(s));
  }
  return Dataset(*range, std::move(samples), "csv:" + path.string());
}

} // namespace cen

#endif
