#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cen/data.hpp"
#include "temp_dir.hpp"

namespace cen {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(NormalizeAge, Examples) {
  const AgeRange r(16, 77);
  EXPECT_EQ(normalize_age(16, r), 0.0);
  EXPECT_EQ(normalize_age(77, r), 1.0);
  EXPECT_NEAR(normalize_age(46, r), 30.0 / 61.0, 1e-15);
  EXPECT_NEAR(normalize_age(46, r), 0.49180, 1e-5);
  EXPECT_THROW(normalize_age(15, r), DomainError);
  EXPECT_THROW(normalize_age(78, r), DomainError);
}

TEST(AgeRange, RequiresOrderedBounds) {
  EXPECT_THROW(AgeRange(10, 10), DomainError);
  EXPECT_EQ(AgeRange(16, 77).k(), 62u);
}

TEST(MakeSample, LabelAndTargetAgree) {
  const AgeRange r(16, 77);
  for (int age = 16; age <= 77; ++age) {
    const Sample s = make_sample(Vector{0.0}, age, r);
    EXPECT_EQ(r.age_at(s.label), age);
    EXPECT_GE(s.y, 0.0);
    EXPECT_LE(s.y, 1.0);
  }
}

TEST(SynthGenerate, SameSeedBitIdentical) {
  SynthConfig cfg;
  cfg.n = 300;
  const Dataset a = synth_generate(cfg);
  const Dataset b = synth_generate(cfg);
  EXPECT_EQ(a.samples(), b.samples());
  cfg.seed = 1;
  EXPECT_NE(a.samples(), synth_generate(cfg).samples());
}

TEST(SynthGenerate, NoiselessSingleIdentityIsNearestNeighbourSeparable) {
  SynthConfig cfg;
  cfg.n = 500;
  cfg.noise_sigma = 0.0;
  cfg.n_identities = 1;
  const Dataset data = synth_generate(cfg);
  // Leave-one-out 1-NN: every sample's nearest other sample has the same age.
  double abs_err = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_age = -1;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (i == j)
        continue;
      double dist = 0.0;
      for (std::size_t c = 0; c < data.feature_dim(); ++c) {
        const double diff = data[i].features[c] - data[j].features[c];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_age = data[j].age;
      }
    }
    abs_err += std::abs(best_age - data[i].age);
  }
  EXPECT_EQ(abs_err, 0.0);
}

TEST(SynthGenerate, AgeHistogramCloseToUniform) {
  SynthConfig cfg;
  cfg.n = 2000;
  const Dataset data = synth_generate(cfg);
  const AgeRange &r = data.range();
  std::vector<int> counts(r.k(), 0);
  for (const auto &s : data.samples())
    ++counts[s.label];
  const double p = 1.0 / static_cast<double>(r.k());
  const double expected = static_cast<double>(cfg.n) * p;
  const double sd = std::sqrt(static_cast<double>(cfg.n) * p * (1.0 - p));
  for (std::size_t i = 0; i < counts.size(); ++i)
    EXPECT_LT(std::abs(counts[i] - expected), 3.0 * sd) << "age " << r.age_at(i);
}

TEST(SynthGenerate, ApparentAgeAnnotation) {
  SynthConfig cfg;
  cfg.n = 50;
  EXPECT_FALSE(synth_generate(cfg).has_apparent_age());
  cfg.apparent_sigma = 2.5;
  const Dataset d = synth_generate(cfg);
  EXPECT_TRUE(d.has_apparent_age());
  EXPECT_EQ(d[0].apparent_mu, d[0].age);
}

TEST(Split, SizesAndDisjointness) {
  SynthConfig cfg;
  cfg.n = 10;
  const Dataset data = synth_generate(cfg);
  const auto [train, test] = split(data, 0.8, 0);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  EXPECT_EQ(train.split(), Split::train);
  // Every original sample lands on exactly one side.
  for (const auto &s : data.samples()) {
    int hits = 0;
    for (const auto &t : train.samples())
      hits += t == s;
    for (const auto &t : test.samples())
      hits += t == s;
    EXPECT_EQ(hits, 1);
  }
  const auto again = split(data, 0.8, 0);
  EXPECT_EQ(again.first.samples(), train.samples());
}

TEST(Split, EmptySideRejected) {
  SynthConfig cfg;
  cfg.n = 10;
  const Dataset data = synth_generate(cfg);
  EXPECT_THROW(split(data, 1.0, 0), DomainError);
  EXPECT_THROW(split(data, 0.0, 0), DomainError);
  EXPECT_THROW(split(data, 0.99, 0), DomainError);
}

TEST(Csv, RoundTripIsExact) {
  TempDir dir;
  SynthConfig cfg;
  cfg.n = 64;
  const Dataset data = synth_generate(cfg);
  write_csv(data, dir / "d.csv");
  const Dataset back = load_csv(dir / "d.csv");
  EXPECT_EQ(back.range(), data.range());
  EXPECT_EQ(back.samples(), data.samples());
}

TEST(Csv, RoundTripKeepsApparentAge) {
  TempDir dir;
  SynthConfig cfg;
  cfg.n = 16;
  cfg.apparent_sigma = 3.0;
  const Dataset data = synth_generate(cfg);
  write_csv(data, dir / "d.csv");
  EXPECT_EQ(load_csv(dir / "d.csv").samples(), data.samples());
}

TEST(Csv, RangeFallbacks) {
  TempDir dir;
  write_file(dir / "a.csv", "age,f0\n20,0.1\n30,0.2\n");
  EXPECT_EQ(load_csv(dir / "a.csv").range(), AgeRange(20, 30));
  EXPECT_EQ(load_csv(dir / "a.csv", AgeRange(16, 77)).range(), AgeRange(16, 77));
}

void expect_io_error_mentioning(const std::filesystem::path &p, const std::string &needle) {
  try {
    load_csv(p);
    FAIL() << "expected IoError";
  } catch (const IoError &e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(Csv, RaggedRowNamesRow) {
  TempDir dir;
  write_file(dir / "r.csv", "age,f0,f1\n20,0.1,0.2\n21,0.3\n");
  expect_io_error_mentioning(dir / "r.csv", "row 3");
}

TEST(Csv, NonNumericCellNamesRow) {
  TempDir dir;
  write_file(dir / "n.csv", "age,f0\n20,0.1\n21,abc\n22,0.3\n");
  expect_io_error_mentioning(dir / "n.csv", "row 3");
}

TEST(Csv, EmptyFileRejected) {
  TempDir dir;
  write_file(dir / "e.csv", "");
  EXPECT_THROW(load_csv(dir / "e.csv"), IoError);
  write_file(dir / "h.csv", "age,f0\n");
  EXPECT_THROW(load_csv(dir / "h.csv"), IoError);
  EXPECT_THROW(load_csv(dir / "missing.csv"), IoError);
}

} // namespace
} // namespace cen
