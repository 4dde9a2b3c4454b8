#include <gtest/gtest.h>

#include <random>

#include "cen/evolution.hpp"

namespace cen {
namespace {

struct Fixture {
  Dataset train;
  Dataset test;
};

Fixture small_benchmark(std::size_t n = 240) {
  SynthConfig sc;
  sc.n = n;
  sc.d = 8;
  auto [train, test] = split(synth_generate(sc), 0.75, 0);
  return {std::move(train), std::move(test)};
}

RunConfig small_run(std::size_t epochs = 3, std::size_t generations = 2) {
  RunConfig cfg;
  cfg.hidden = {8};
  cfg.train.epochs = epochs;
  cfg.train.batch_size = 32;
  cfg.train.learning_rate = 0.01;
  cfg.train.lr_decay_interval = 0;
  cfg.generations = generations;
  return cfg;
}

TEST(LearningRateSchedule, StepDecay) {
  TrainConfig t;
  t.learning_rate = 0.1;
  t.lr_decay_factor = 0.1;
  t.lr_decay_interval = 40;
  EXPECT_DOUBLE_EQ(t.learning_rate_at(0), 0.1);
  EXPECT_DOUBLE_EQ(t.learning_rate_at(39), 0.1);
  EXPECT_NEAR(t.learning_rate_at(40), 0.01, 1e-15);
  EXPECT_NEAR(t.learning_rate_at(125), 1e-4, 1e-15);
  t.lr_decay_interval = 0;
  EXPECT_DOUBLE_EQ(t.learning_rate_at(1000), 0.1);
}

TEST(TrainAncestor, ZeroEpochsKeepsInitialModel) {
  const auto f = small_benchmark();
  const RunConfig cfg = small_run(0, 1);
  const GenerationState g = train_ancestor(f.train, f.test, cfg);
  EXPECT_EQ(g.model, initial_model(cfg, f.train, 1));
  EXPECT_EQ(g.cache.size(), f.train.size());
  EXPECT_EQ(g.cache.num_classes(), f.train.range().k());
}

TEST(TrainAncestor, SeparableToySetIsLearned) {
  const AgeRange r(20, 21);
  std::mt19937_64 rng(0);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Sample> samples;
  for (int i = 0; i < 80; ++i) {
    const int age = 20 + i % 2;
    const double sign = age == 20 ? -1.0 : 1.0;
    samples.push_back(make_sample(Vector{sign + noise(rng), noise(rng)}, age, r));
  }
  const Dataset data(r, samples, "toy");
  RunConfig cfg = small_run(100, 1);
  cfg.train.batch_size = 16;
  cfg.train.learning_rate = 0.05;
  const GenerationState g = train_ancestor(data, data, cfg);
  EXPECT_LT(g.eval.mae, 0.5);
  EXPECT_LT(g.eval.mae_ldl, 0.5);
  EXPECT_LT(g.eval.mae_reg, 0.5);
}

TEST(TrainAncestor, Deterministic) {
  const auto f = small_benchmark();
  const RunConfig cfg = small_run(2, 1);
  const GenerationState a = train_ancestor(f.train, f.test, cfg);
  const GenerationState b = train_ancestor(f.train, f.test, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.cache, b.cache);
  EXPECT_EQ(a.train_loss, b.train_loss);
}

TEST(TrainAncestor, DivergenceReportsCoordinates) {
  const auto f = small_benchmark();
  RunConfig cfg = small_run(5, 1);
  cfg.train.learning_rate = 1e300;
  try {
    train_ancestor(f.train, f.test, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(CacheKnowledge, ZeroDistributionHeadGivesUniform) {
  const auto f = small_benchmark();
  ModelParams m = init_model({8, {8}, f.train.range().k()}, 1);
  m.head_ldl = zero_layer(8, f.train.range().k());
  const KnowledgeCache c = cache_knowledge(m, f.train, 2.0, 1);
  for (const auto &p : c.distributions)
    EXPECT_EQ(p, LabelDistribution::uniform(f.train.range().k()));
}

TEST(CacheKnowledge, PerfectRegressorHasZeroDeltas) {
  // One-feature dataset whose feature is y itself; a linear regression head
  // with weight 1 reproduces y exactly.
  const AgeRange r(16, 77);
  std::vector<Sample> samples;
  for (int age = 16; age <= 77; ++age)
    samples.push_back(make_sample(Vector{normalize_age(age, r)}, age, r));
  const Dataset data(r, samples, "exact");
  ModelParams m = zero_model({1, {}, r.k()});
  m.head_reg.weights(0, 0) = 1.0;
  const KnowledgeCache c = cache_knowledge(m, data, 2.0, 1);
  for (double d : c.deltas)
    EXPECT_EQ(d, 0.0);
  // With delta = 0 the slack term is plain L1.
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double s = data[i].y + 0.01 * static_cast<double>(i % 3) - 0.01;
    const LossTerm a = slack_l1(s, data[i].y, c.deltas[i]);
    const LossTerm b = l1_loss(s, data[i].y);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.d_s, b.d_s);
  }
}

TEST(TrainOffspring, ZeroEpochsWarmStartMatchesAncestor) {
  const auto f = small_benchmark();
  RunConfig cfg = small_run(3, 2);
  const GenerationState anc = train_ancestor(f.train, f.test, cfg);
  cfg.train.epochs = 0;
  const GenerationState off = train_offspring(f.train, f.test, cfg, anc);
  EXPECT_EQ(off.t, 2u);
  EXPECT_EQ(off.model, anc.model);
  EXPECT_EQ(off.eval.mae, anc.eval.mae);
}

TEST(TrainOffspring, MisalignedCacheRejected) {
  const auto f = small_benchmark();
  const RunConfig cfg = small_run(1, 2);
  GenerationState anc = train_ancestor(f.train, f.test, cfg);
  anc.cache.deltas.pop_back();
  anc.cache.distributions.pop_back();
  EXPECT_THROW(train_offspring(f.train, f.test, cfg, anc), ShapeError);
}

TEST(TrainOffspring, ColdStartUsesFreshInitialization) {
  const auto f = small_benchmark();
  RunConfig cfg = small_run(0, 2);
  cfg.warm_start = false;
  const GenerationState anc = train_ancestor(f.train, f.test, cfg);
  const GenerationState off = train_offspring(f.train, f.test, cfg, anc);
  EXPECT_EQ(off.model, initial_model(cfg, f.train, 2));
  EXPECT_NE(off.model, anc.model);
}

TEST(Evolve, SingleGenerationIsTheAncestor) {
  const auto f = small_benchmark();
  const RunConfig cfg = small_run(2, 1);
  const auto chain = evolve(f.train, f.test, cfg);
  ASSERT_EQ(chain.size(), 1u);
  const GenerationState anc = train_ancestor(f.train, f.test, cfg);
  EXPECT_EQ(chain[0].model, anc.model);
  EXPECT_EQ(chain[0].eval.mae, anc.eval.mae);
}

TEST(Evolve, ObserverSeesEveryGenerationInOrder) {
  const auto f = small_benchmark();
  const RunConfig cfg = small_run(1, 3);
  std::vector<std::size_t> seen;
  const auto chain = evolve(f.train, f.test, cfg, [&](const GenerationState &g) {
    seen.push_back(g.t);
  });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
  for (std::size_t i = 0; i < chain.size(); ++i) {
    EXPECT_EQ(chain[i].t, i + 1);
    EXPECT_EQ(chain[i].cache.generation, i + 1);
    EXPECT_DOUBLE_EQ(chain[i].mean_slack, chain[i].cache.mean_delta());
  }
}

TEST(Evolve, ResumeReproducesTheChain) {
  const auto f = small_benchmark();
  const RunConfig cfg = small_run(2, 3);
  const auto full = evolve(f.train, f.test, cfg);
  const auto resumed = evolve(f.train, f.test, cfg, {}, full[1]);
  ASSERT_EQ(resumed.size(), 2u);
  EXPECT_EQ(resumed.back().model, full.back().model);
  EXPECT_EQ(resumed.back().cache, full.back().cache);
}

TEST(Evolve, SlackTermBoundsOffspringError) {
  // Trained against the ancestor's slack, the offspring's mean training error
  // does not grow much beyond the ancestor's.
  const auto f = small_benchmark(400);
  RunConfig cfg = small_run(10, 2);
  const auto chain = evolve(f.train, f.test, cfg);
  EXPECT_LE(chain[1].mean_slack, chain[0].mean_slack * 1.05 + 1e-3);
}

TEST(RunConfig, ValidationRejectsBadValues) {
  RunConfig cfg;
  cfg.loss.alpha = 2.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.generations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.loss.tau = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.hidden = {4, 0};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

} // namespace
} // namespace cen
