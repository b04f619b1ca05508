#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spt/error.hpp"
#include "spt/ops.hpp"
#include "spt/pseudo_label.hpp"

using namespace spt;
using namespace spt::pseudo;

namespace {

// Old tag space {O, B-PER, I-PER}; step tag space adds {B-LOC, I-LOC}.
const std::vector<std::string> kOldTags{"O", "B-PER", "I-PER"};
constexpr std::size_t kWidth = 5;

PredictionDistribution distribution(std::size_t n, std::size_t width, std::vector<double> probs) {
  std::vector<double> logs(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) logs[i] = std::log(probs[i]);
  return {Tensor::from({n, width}, std::move(probs)), Tensor::from({n, width}, std::move(logs))};
}

ConfidenceStats stats_with(std::vector<double> tau) {
  ConfidenceStats s;
  s.tags = kOldTags;
  s.tau = std::move(tau);
  s.population.assign(s.tags.size(), 1);
  return s;
}

}  // namespace

TEST(Entropy, WorkedExamples) {
  EXPECT_EQ(token_entropy(std::vector<double>{0, 1, 0}), 0.0);
  EXPECT_NEAR(token_entropy(std::vector<double>(5, 0.2)), 1.6094379124341003, 1e-15);
  EXPECT_NEAR(token_entropy(std::vector<double>{0.5, 0.25, 0.25}), 1.0397207708399179, 1e-15);
}

TEST(Median, OddEvenSingleEmpty) {
  EXPECT_DOUBLE_EQ(median({0.9, 0.1, 0.5}), 0.5);
  EXPECT_DOUBLE_EQ(median({0.4, 0.2}), 0.3);
  EXPECT_DOUBLE_EQ(median({0.7}), 0.7);
  EXPECT_DOUBLE_EQ(median({}), 0.0);
}

TEST(Thresholds, GroupByArgmaxOverOTokensOnly) {
  // Three sentences of one token each, labeled O, plus one entity token ignored.
  std::vector<EncodedSentence> data{{{1}, {0}}, {{2}, {0}}, {{3}, {3}}, {{4}, {0}}};
  std::vector<Tensor> probs{
      Tensor::from({1, 3}, {0.1, 0.8, 0.1}),
      Tensor::from({1, 3}, {0.2, 0.7, 0.1}),
      Tensor::from({1, 3}, {0.1, 0.9, 0.0}),
      Tensor::from({1, 3}, {0.6, 0.2, 0.2}),
  };
  auto stats = thresholds_from_predictions(kOldTags, probs, data);
  ASSERT_EQ(stats.size(), 3u);
  EXPECT_EQ(stats.population, (std::vector<std::size_t>{1, 2, 0}));
  const double u1 = token_entropy(std::vector<double>{0.1, 0.8, 0.1});
  const double u2 = token_entropy(std::vector<double>{0.2, 0.7, 0.1});
  EXPECT_DOUBLE_EQ(stats.tau[1], 0.5 * (u1 + u2));
  EXPECT_DOUBLE_EQ(stats.tau[0], token_entropy(std::vector<double>{0.6, 0.2, 0.2}));
  EXPECT_EQ(stats.tau[2], 0.0);
}

TEST(BuildTargets, RulesOfTheTargetConstruction) {
  // Token 0: current entity (B-LOC). Token 1: O, old says B-PER confidently.
  // Token 2: O, old says O with u exactly tau. Token 3: O, old unsure B-PER.
  const EncodedSentence sentence{{1, 2, 3, 4}, {3, 0, 0, 0}};
  const std::vector<double> old_probs{0.05, 0.9, 0.05,  //
                                      0.02, 0.96, 0.02,  //
                                      0.7, 0.2, 0.1,    //
                                      0.4, 0.45, 0.15};
  const double u_o = token_entropy(std::vector<double>{0.7, 0.2, 0.1});
  const double u_confident = token_entropy(std::vector<double>{0.02, 0.96, 0.02});
  auto stats = stats_with({u_o, u_confident + 0.1, 0.0});

  auto t = build_targets(old_probs, 3, sentence, stats, kWidth, PseudoKind::kConfidence);
  EXPECT_EQ(t.width, kWidth);
  EXPECT_EQ(t.target_tag, (std::vector<std::size_t>{3, 1, kWidth, kWidth}));
  EXPECT_EQ(t.masked_count, 2u);
  EXPECT_TRUE(t.masked(2));
  for (std::size_t i = 0; i < 4; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < kWidth; ++c) total += t.rows[i * kWidth + c];
    EXPECT_EQ(total, t.masked(i) ? 0.0 : 1.0);
    EXPECT_EQ(t.rows[i * kWidth + 4], 0.0);  // future-type column
  }

  auto naive = build_targets(old_probs, 3, sentence, stats, kWidth, PseudoKind::kNaive);
  EXPECT_EQ(naive.target_tag, (std::vector<std::size_t>{3, 1, 0, 1}));
  EXPECT_EQ(naive.masked_count, 0u);

  auto none = build_targets(old_probs, 3, sentence, stats, kWidth, PseudoKind::kNone);
  EXPECT_EQ(none.target_tag, (std::vector<std::size_t>{3, 0, 0, 0}));
}

TEST(BuildTargets, GroundTruthIsNeverOverridden) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, kWidth - 1);
  for (int trial = 0; trial < 100; ++trial) {
    EncodedSentence s;
    std::vector<double> probs;
    for (std::size_t i = 0; i < 6; ++i) {
      s.token_ids.push_back(i);
      s.tag_ids.push_back(trial % 3 == 0 ? 0 : label(rng) % 2 == 0 ? 0 : 3 + label(rng) % 2);
      double a = u(rng), b = u(rng), c = u(rng);
      probs.insert(probs.end(), {a / (a + b + c), b / (a + b + c), c / (a + b + c)});
    }
    auto stats = stats_with({u(rng), u(rng), u(rng)});
    auto t = build_targets(probs, 3, s, stats, kWidth, PseudoKind::kConfidence);
    for (std::size_t i = 0; i < 6; ++i) {
      if (s.tag_ids[i] != 0) EXPECT_EQ(t.target_tag[i], s.tag_ids[i]);
      else EXPECT_TRUE(t.masked(i) || t.target_tag[i] < 3);
    }
  }
}

TEST(BuildTargets, ZeroEntropyOldModelMasksEveryOTokenUnderStrictRule) {
  // One-hot O predictions: u = 0 and the O group's median is 0, so u < tau fails.
  std::vector<EncodedSentence> data{{{1, 2, 3}, {0, 0, 3}}};
  std::vector<Tensor> probs{Tensor::from({3, 3}, {1, 0, 0, 1, 0, 0, 1, 0, 0})};
  auto stats = thresholds_from_predictions(kOldTags, probs, data);
  EXPECT_EQ(stats.tau[0], 0.0);
  auto t = build_targets(probs[0].data(), 3, data[0], stats, kWidth, PseudoKind::kConfidence);
  EXPECT_EQ(t.masked_count, 2u);
  EXPECT_EQ(t.target_tag[2], 3u);
}

TEST(BuildTargets, MedianShiftKeepsPartition) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> group(9);
    for (auto& g : group) g = u(rng);
    const double tau = median(group);
    std::vector<double> shifted = group;
    for (auto& g : shifted) g += 0.37;
    const double tau_shifted = median(shifted);
    EXPECT_NEAR(tau_shifted, tau + 0.37, 1e-12);
    for (std::size_t i = 0; i < group.size(); ++i) EXPECT_EQ(group[i] < tau, shifted[i] < tau_shifted);
  }
}

TEST(BuildTargets, Contracts) {
  const EncodedSentence sentence{{1, 2}, {0, 0}};
  const std::vector<double> probs{1, 0, 0, 1, 0, 0};
  auto stats = stats_with({0.1, 0.1, 0.1});
  EXPECT_THROW(build_targets(probs, 3, sentence, stats, 2, PseudoKind::kConfidence), ScheduleError);
  EXPECT_THROW(build_targets(std::vector<double>{1, 0, 0}, 3, sentence, stats, kWidth, PseudoKind::kNaive),
               DimensionError);
  ConfidenceStats narrow = stats;
  narrow.tau.pop_back();
  narrow.tags.pop_back();
  EXPECT_THROW(build_targets(probs, 3, sentence, narrow, kWidth, PseudoKind::kConfidence), ScheduleError);
  const EncodedSentence bad{{1}, {7}};
  EXPECT_THROW(label_targets(bad, kWidth), ScheduleError);
}

TEST(TokenWeights, EtaCases) {
  const EncodedSentence s{{1, 2, 3, 4}, {3, 0, 0, 0}};
  PseudoTarget balanced = label_targets(s, kWidth);
  balanced.target_tag = {3, 1, 0, kWidth};
  std::vector<const PseudoTarget*> batch{&balanced};
  auto w = token_weights(batch, 3);
  EXPECT_EQ(w.n_old, 1u);
  EXPECT_EQ(w.n_new, 1u);
  EXPECT_NEAR(w.eta[0][1], 1.2310585786300048, 1e-15);
  EXPECT_EQ(w.eta[0][0], 1.0);
  EXPECT_EQ(w.eta[0][2], 1.0);
  EXPECT_EQ(w.eta[0][3], 1.0);

  PseudoTarget no_new = balanced;
  no_new.target_tag = {0, 1, 2, 0};
  std::vector<const PseudoTarget*> batch2{&no_new};
  auto w2 = token_weights(batch2, 3);
  EXPECT_EQ(w2.eta[0][1], 1.5);
  EXPECT_EQ(w2.eta[0][2], 1.5);

  PseudoTarget no_old = balanced;
  no_old.target_tag = {3, 0, 4, kWidth};
  std::vector<const PseudoTarget*> batch3{&no_old};
  const auto w3 = token_weights(batch3, 3);
  for (double e : w3.eta[0]) EXPECT_EQ(e, 1.0);

  // Counts span the whole batch.
  std::vector<const PseudoTarget*> batch4{&balanced, &no_old};
  auto w4 = token_weights(batch4, 3);
  EXPECT_EQ(w4.n_new, 3u);
  EXPECT_NEAR(w4.eta[0][1], 0.5 + 1.0 / (1.0 + std::exp(-1.0 / 3.0)), 1e-15);
  for (const auto& row : w4.eta)
    for (double e : row) EXPECT_TRUE(e == 1.0 || (e > 0.5 && e < 1.5));
}

TEST(TokenWeights, ScheduleOverloadUsesOldTagCount) {
  auto schedule = build_schedule({"LOC", "PER"}, 1, 1);
  const EncodedSentence s{{1, 2}, {3, 0}};
  PseudoTarget t = label_targets(s, kWidth);
  t.target_tag = {3, 1};
  std::vector<const PseudoTarget*> batch{&t};
  auto w = token_weights(batch, schedule, 2);
  EXPECT_NEAR(w.eta[0][1], 1.2310585786300048, 1e-15);
}

TEST(WeightedCe, WorkedExamplesAndLinearity) {
  const EncodedSentence s{{1, 2}, {1, 0}};
  auto target = label_targets(s, 2);
  auto pred = distribution(2, 2, {0.5, 0.5, 0.25, 0.75});
  // Token 0 targets tag 1 (p = 0.5); token 1 targets tag 0 (p = 0.25).
  std::vector<double> eta{1.0, 1.0};
  EXPECT_NEAR(weighted_ce(pred, target, eta).item(), 1.0397207708399179, 1e-15);
  std::vector<double> doubled{2.0, 2.0};
  EXPECT_NEAR(weighted_ce(pred, target, doubled).item(), 2 * 1.0397207708399179, 1e-14);

  PseudoTarget masked = target;
  std::fill(masked.rows.begin(), masked.rows.end(), 0.0);
  masked.target_tag = {2, 2};
  EXPECT_EQ(weighted_ce(pred, masked, eta).item(), 0.0);

  // A masked row still counts in the divisor.
  PseudoTarget half = target;
  half.rows[2] = half.rows[3] = 0.0;
  half.target_tag[1] = 2;
  EXPECT_NEAR(weighted_ce(pred, half, eta).item(), -std::log(0.5) / 2.0, 1e-15);

  auto perfect = distribution(2, 2, {1e-300, 1.0, 1.0, 1e-300});
  EXPECT_NEAR(weighted_ce(perfect, target, eta).item(), 0.0, 1e-15);
  EXPECT_THROW(weighted_ce(distribution(1, 2, {0.5, 0.5}), target, eta), DimensionError);
}

TEST(Pseudo, KindStrings) {
  for (auto k : {PseudoKind::kNone, PseudoKind::kNaive, PseudoKind::kConfidence}) {
    EXPECT_EQ(pseudo_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(pseudo_kind_from_string("sometimes"), ConfigError);
}
