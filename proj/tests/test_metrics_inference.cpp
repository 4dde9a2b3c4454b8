#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cen/inference.hpp"
#include "cen/metrics.hpp"

namespace cen {
namespace {

TEST(Mae, Examples) {
  EXPECT_EQ(mae(Vector{20, 30}, Vector{20, 30}), 0.0);
  EXPECT_DOUBLE_EQ(mae(Vector{20, 30}, Vector{22, 26}), 3.0);
  EXPECT_DOUBLE_EQ(mae(Vector{41.5}, Vector{37.25}), 4.25);
  EXPECT_THROW(mae(Vector{1, 2}, Vector{1}), ShapeError);
  EXPECT_THROW(mae(Vector{}, Vector{}), ShapeError);
}

TEST(EpsilonError, Examples) {
  EXPECT_EQ(epsilon_error(Vector{30, 40}, Vector{30, 40}, Vector{2, 3}), 0.0);
  EXPECT_NEAR(epsilon_error(Vector{33}, Vector{30}, Vector{3}), 1.0 - std::exp(-0.5), 1e-12);
  EXPECT_NEAR(epsilon_error(Vector{33}, Vector{30}, Vector{3}), 0.39347, 1e-5);
  EXPECT_GT(epsilon_error(Vector{60}, Vector{30}, Vector{3}), 0.999);
  EXPECT_THROW(epsilon_error(Vector{1}, Vector{1}, Vector{0}), DomainError);
}

TEST(Ca, Examples) {
  EXPECT_EQ(ca(Vector{20, 30}, Vector{20, 30}, 3), 100.0);
  EXPECT_EQ(ca(Vector{21, 35}, Vector{20, 30}, 3), 50.0);
  EXPECT_EQ(ca(Vector{23, 27}, Vector{20, 30}, 3), 0.0);
}

TEST(Ca, MonotoneInThreshold) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    Vector pred(40), truth(40);
    for (std::size_t i = 0; i < 40; ++i) {
      truth[i] = 16 + (i * 7) % 62;
      pred[i] = truth[i] + std::round(n(rng));
    }
    double last = 0.0;
    for (int t = 1; t <= 12; ++t) {
      const double v = ca(pred, truth, t);
      EXPECT_GE(v, last);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
      last = v;
    }
  }
}

TEST(PredictLdl, Examples) {
  const AgeRange r(16, 77);
  EXPECT_EQ(predict_ldl(LabelDistribution::one_hot(r.k(), 40 - 16), r), 40.0);
  EXPECT_NEAR(predict_ldl(LabelDistribution::uniform(r.k()), r), 46.5, 1e-9);
  Vector half(r.k(), 0.0);
  half[20 - 16] = 0.5;
  half[30 - 16] = 0.5;
  EXPECT_DOUBLE_EQ(predict_ldl(LabelDistribution(half), r), 25.0);
  EXPECT_THROW(predict_ldl(LabelDistribution::uniform(5), r), ShapeError);
}

TEST(PredictLdl, UnnormalizedRejected) {
  EXPECT_THROW(LabelDistribution(Vector(62, 0.02)), DomainError);
}

TEST(PredictReg, Examples) {
  const AgeRange r(16, 77);
  EXPECT_EQ(predict_reg(0.0, r), 16.0);
  EXPECT_EQ(predict_reg(1.0, r), 77.0);
  EXPECT_EQ(predict_reg(0.5, r), 46.5);
  EXPECT_LT(predict_reg(-0.1, r), 16.0);
}

TEST(Fuse, Average) {
  const AgeRange r(16, 77);
  Vector p(r.k(), 0.0);
  p[40 - 16] = 1.0;
  const Prediction pr = fuse(LabelDistribution(p), (44.0 - 16.0) / 61.0, r);
  EXPECT_EQ(pr.y_ldl, 40.0);
  EXPECT_NEAR(pr.y_reg, 44.0, 1e-12);
  EXPECT_NEAR(pr.y_fused, 42.0, 1e-12);
  EXPECT_EQ(pr.headline(Heads::ldl), 40.0);
  EXPECT_EQ(pr.headline(Heads::coupled), pr.y_fused);
}

TEST(Predict, AgreeingHeadsFuseToSameAge) {
  const AgeRange r(16, 77);
  ModelParams m = zero_model({2, {3}, r.k()});
  m.head_ldl.biases[33 - 16] = 1000.0;
  m.head_reg.biases[0] = (33.0 - 16.0) / 61.0;
  const Prediction p = predict(m, Vector{0.3, 0.4}, r);
  EXPECT_EQ(p.y_ldl, 33.0);
  EXPECT_NEAR(p.y_reg, 33.0, 1e-12);
  EXPECT_NEAR(p.y_fused, 33.0, 1e-12);
}

TEST(Heads, ParseAndPrint) {
  for (Heads h : {Heads::coupled, Heads::ldl, Heads::reg})
    EXPECT_EQ(heads_from_string(to_string(h)), h);
  EXPECT_THROW(heads_from_string("both"), ConfigError);
}

TEST(Evaluate, ReportFields) {
  const AgeRange r(16, 77);
  std::vector<Sample> samples;
  for (int age : {20, 30, 40, 50}) {
    Sample s = make_sample(Vector{1.0}, age, r);
    s.apparent_mu = age;
    s.apparent_sigma = 2.0;
    samples.push_back(s);
  }
  const Dataset data(r, samples, "test");
  std::vector<Prediction> preds;
  for (double err : {0.0, 3.0, -6.0, 100.0}) {
    Prediction p = fuse(LabelDistribution::uniform(r.k()), 0.0, r);
    p.y_fused = data[preds.size()].age + err;
    preds.push_back(p);
  }
  preds[3].y_reg = 200.0; // out of range
  const EvalReport rep = evaluate_predictions(preds, data, Heads::coupled);
  EXPECT_EQ(rep.n_samples, 4u);
  EXPECT_DOUBLE_EQ(rep.mae, (0 + 3 + 6 + 100) / 4.0);
  EXPECT_EQ(rep.ca.at(3), 25.0);
  EXPECT_EQ(rep.ca.at(5), 50.0);
  EXPECT_EQ(rep.ca.at(7), 75.0);
  ASSERT_TRUE(rep.epsilon_error.has_value());
  EXPECT_EQ(rep.out_of_range_count, 1u);
}

} // namespace
} // namespace cen
