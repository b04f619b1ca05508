#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "spt/error.hpp"
#include "spt/fusion.hpp"
#include "spt/ops.hpp"
#include "spt/schedule.hpp"

using namespace spt;
using namespace spt::fusion;

namespace {

std::vector<std::string> numbered_types(std::size_t n) {
  std::vector<std::string> types;
  for (std::size_t i = 0; i < n; ++i) {
    types.push_back(std::string("T") + static_cast<char>('A' + i / 10) + static_cast<char>('0' + i % 10));
  }
  return types;
}

struct AlphaGammaCase {
  std::size_t types, fg, pg, t;
  double alpha, gamma;
};

// Frozen from an independent evaluation of the closed forms.
const AlphaGammaCase kCases[] = {
    {4, 1, 1, 2, 0.42264973081037427, 0.58257020646231472},
    {4, 1, 1, 3, 0.5, 0.62245933120185459},
    {4, 1, 1, 4, 0.55278640450004213, 0.6456563062257954},
    {4, 2, 1, 2, 0.5, 0.62245933120185459},
    {4, 2, 1, 3, 0.55278640450004213, 0.6456563062257954},
    {16, 1, 1, 16, 0.75746437496366703, 0.70730957092539926},
    {16, 2, 2, 2, 0.36754446796632412, 0.54983399731247795},
    {16, 2, 2, 3, 0.46547751617515121, 0.60553248722058572},
    {16, 2, 2, 8, 0.65700282971498236, 0.68237455869495112},
    {16, 8, 1, 2, 0.683772233983162, 0.6899744811276125},
    {16, 8, 1, 9, 0.75746437496366703, 0.70730957092539926},
    {16, 8, 2, 2, 0.57359856728877912, 0.65393099370887686},
    {16, 8, 2, 5, 0.65700282971498236, 0.68237455869495112},
    {18, 1, 1, 18, 0.7705842661294382, 0.70986672239136916},
    {18, 2, 2, 9, 0.67555715773847491, 0.68771830920639299},
    {18, 8, 1, 11, 0.7705842661294382, 0.70986672239136916},
    {18, 8, 2, 6, 0.67555715773847491, 0.68771830920639299},
};

ModelCheckpoint tiny_model(std::vector<std::string> tags, std::uint64_t seed) {
  TaggerConfig cfg;
  cfg.vocab_size = 8;
  cfg.d_model = 4;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 6;
  cfg.max_len = 6;
  cfg.seed = seed;
  auto m = init_model(cfg, std::move(tags));
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> dist(0.0, 0.3);
  for (auto& w : m.weights)
    for (double& v : w.value.mutable_data()) v += dist(rng);
  return m;
}

double token_nll(const ModelCheckpoint& m, const EncodedSentence& s, std::size_t i) {
  NoGradGuard guard;
  return -forward(m, s.token_ids).prediction.log_probs.at(i, s.tag_ids[i]);
}

// Gradient entry by a fourth-order central difference, computed without the tape.
double fd_gradient(ModelCheckpoint& m, const std::string& name, std::size_t j, const EncodedSentence& s,
                   std::size_t i) {
  const double h = 1e-3;
  auto data = m.weight(name).mutable_data();
  const double orig = data[j];
  auto at = [&](double delta) {
    data[j] = orig + delta;
    return token_nll(m, s, i);
  };
  const double d1 = at(h) - at(-h);
  const double d2 = at(2 * h) - at(-2 * h);
  data[j] = orig;
  return (8.0 * d1 - d2) / (12.0 * h);
}

}  // namespace

TEST(FusionFactors, MatchFrozenValuesOnEveryPaperSetting) {
  for (const auto& c : kCases) {
    auto schedule = build_schedule(numbered_types(c.types), c.fg, c.pg);
    EXPECT_NEAR(compute_alpha(schedule, c.t), c.alpha, 1e-12) << c.types << " FG-" << c.fg << "-PG-" << c.pg;
    EXPECT_NEAR(compute_gamma(schedule, c.t), c.gamma, 1e-12) << c.types << " FG-" << c.fg << "-PG-" << c.pg;
  }
}

TEST(FusionFactors, AlphaInUnitIntervalAndGammaContract) {
  for (std::size_t n : {4u, 16u, 18u}) {
    for (std::size_t fg : {1u, 2u, 8u}) {
      for (std::size_t pg : {1u, 2u}) {
        if (fg > n) continue;
        auto schedule = build_schedule(numbered_types(n), fg, pg);
        for (std::size_t t = 1; t <= schedule.num_steps(); ++t) {
          const double a = compute_alpha(schedule, t);
          EXPECT_GT(a, 0.0);
          EXPECT_LT(a, 1.0);
        }
        EXPECT_THROW(compute_gamma(schedule, 1), ContractError);
      }
    }
  }
  // E^t = sum_{m<t} E^m + 1: exponent 0.
  auto schedule = build_schedule(numbered_types(3), 1, 2);
  EXPECT_DOUBLE_EQ(compute_gamma(schedule, 2), 0.5);
}

TEST(FuseSelectiveFlat, HandExample) {
  const std::vector<double> old_values{1, 2, 3, 4};
  std::vector<double> fused{5, 6, 7, 8};
  const std::vector<double> fisher{0.1, 0.9, 0.5, 0.7};
  auto plan = fuse_selective_flat(old_values, fused, fisher, 0.5, 0.5);
  EXPECT_EQ(fused, (std::vector<double>{5, 4, 7, 6}));
  EXPECT_EQ(plan.k, 2u);
  EXPECT_EQ(plan.selected_count, 2u);
  EXPECT_DOUBLE_EQ(plan.threshold_value, 0.7);
  EXPECT_EQ(plan.total_count, 4u);
}

TEST(FuseSelectiveFlat, TiesSaturateToVanilla) {
  const std::vector<double> old_values{1, 2, 3, 4};
  std::vector<double> fused{5, 6, 7, 8};
  const std::vector<double> fisher(4, 0.3);
  auto plan = fuse_selective_flat(old_values, fused, fisher, 0.25, 0.5);
  EXPECT_EQ(plan.selected_count, 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(fused[i], 0.25 * old_values[i] + 0.75 * (5.0 + i));
}

TEST(FuseSelectiveFlat, ZeroKKeepsNewValues) {
  const std::vector<double> old_values{1, 2, 3};
  std::vector<double> fused{5, 6, 7};
  const std::vector<double> fisher{0.1, 0.2, 0.3};
  auto plan = fuse_selective_flat(old_values, fused, fisher, 0.5, 0.1);
  EXPECT_EQ(plan.k, 0u);
  EXPECT_EQ(plan.selected_count, 0u);
  EXPECT_EQ(fused, (std::vector<double>{5, 6, 7}));
}

TEST(FuseSelectiveFlat, FullKEqualsVanillaAndContracts) {
  const std::vector<double> old_values{1, 2, 3, 4};
  std::vector<double> fused{5, 6, 7, 8};
  const std::vector<double> fisher{0.4, 0.1, 0.3, 0.2};
  auto plan = fuse_selective_flat(old_values, fused, fisher, 0.3, 0.9);
  EXPECT_EQ(plan.selected_count, 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(fused[i], 0.3 * old_values[i] + 0.7 * (5.0 + i));
  std::vector<double> short_fused{1};
  EXPECT_THROW(fuse_selective_flat(old_values, short_fused, fisher, 0.5, 0.5), DimensionError);
  EXPECT_THROW(fuse_selective_flat(old_values, fused, fisher, 0.5, 1.0), ContractError);
}

TEST(FuseSelectiveFlat, MonotoneInGammaAndConvex) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> old_values(30), fresh(30), fisher(30);
    for (std::size_t i = 0; i < 30; ++i) {
      old_values[i] = u(rng);
      fresh[i] = u(rng);
      fisher[i] = std::abs(u(rng)) + 1e-9 * static_cast<double>(i);
    }
    std::vector<double> a = fresh, b = fresh;
    auto pa = fuse_selective_flat(old_values, a, fisher, 0.6, 0.3);
    auto pb = fuse_selective_flat(old_values, b, fisher, 0.6, 0.7);
    EXPECT_EQ(pa.selected_count, pa.k);
    EXPECT_EQ(pb.selected_count, pb.k);
    for (std::size_t i = 0; i < 30; ++i) {
      const bool in_a = fisher[i] >= pa.threshold_value;
      const bool in_b = fisher[i] >= pb.threshold_value;
      EXPECT_TRUE(!in_a || in_b);
      const double lo = std::min(old_values[i], fresh[i]);
      const double hi = std::max(old_values[i], fresh[i]);
      EXPECT_GE(b[i], lo - 1e-15);
      EXPECT_LE(b[i], hi + 1e-15);
    }
  }
}

TEST(FuseVanilla, BoundariesAndMidpoint) {
  auto old_model = tiny_model({"O", "B-A", "I-A"}, 1);
  auto new_model = expand_head(tiny_model({"O", "B-A", "I-A"}, 2), {"B-B", "I-B"});
  auto at_zero = fuse_vanilla(old_model, new_model, 0.0);
  auto at_one = fuse_vanilla(old_model, new_model, 1.0);
  for (const auto& w : new_model.weights) {
    EXPECT_EQ(at_zero.weight(w.name).to_vector(), w.value.to_vector()) << w.name;
  }
  for (const auto& w : old_model.weights) {
    const auto fused = at_one.weight(w.name).to_vector();
    const auto expect = w.value.to_vector();
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(fused[i], expect[i]) << w.name;
  }
  // New classifier rows come from the new model.
  const auto& cw = at_one.weight(kClassifierWeight);
  const auto& nw = new_model.weight(kClassifierWeight);
  const std::size_t d = cw.dim(1);
  for (std::size_t j = 3 * d; j < 5 * d; ++j) EXPECT_EQ(cw.data()[j], nw.data()[j]);

  ModelCheckpoint a, b;
  a.tag_space = b.tag_space = {"O"};
  a.weights.push_back({"w", Tensor::from({1}, {2.0})});
  b.weights.push_back({"w", Tensor::from({1}, {6.0})});
  EXPECT_EQ(fuse_vanilla(a, b, 0.5).weight("w").item(), 4.0);
  b.weights[0].value = Tensor::from({2}, {6.0, 1.0});
  a.weights[0].value = Tensor::from({1, 1}, {2.0});
  EXPECT_THROW(fuse_vanilla(a, b, 0.5), CheckpointError);
}

TEST(FuseSelective, AllSelectedEqualsVanillaBitForBit) {
  auto old_model = tiny_model({"O", "B-A", "I-A"}, 3);
  auto new_model = expand_head(tiny_model({"O", "B-A", "I-A"}, 4), {"B-B", "I-B"});
  FisherMap fisher;
  for (const auto& w : old_model.weights) fisher.entries.push_back({w.name, Tensor::full(w.value.shape(), 1.0)});
  auto [selective, plan] = fuse_selective(old_model, new_model, fisher, 0.4, 0.5);
  auto vanilla = fuse_vanilla(old_model, new_model, 0.4);
  EXPECT_EQ(plan.selected_count, plan.total_count);
  for (const auto& w : vanilla.weights) {
    EXPECT_EQ(selective.weight(w.name).to_vector(), w.value.to_vector()) << w.name;
  }
  FisherMap partial = fisher;
  partial.entries.pop_back();
  EXPECT_THROW(fuse_selective(old_model, new_model, partial, 0.4, 0.5), ContractError);
}

TEST(Fisher, SingleAndTwoSampleOracles) {
  auto model = tiny_model({"O", "B-A", "I-A"}, 5);
  const EncodedSentence s1{{1, 4, 2}, {0, 1, 2}};
  const EncodedSentence s2{{3, 5}, {1, 0}};
  const std::vector<std::string> names{kClassifierBias, kClassifierWeight, "embed.token"};

  {
    // One single-token sentence: Fisher is the squared gradient.
    const EncodedSentence one{{6}, {2}};
    std::vector<EncodedSentence> data{one};
    auto fisher = estimate_fisher(model, data);
    EXPECT_EQ(fisher.samples, 1u);
    for (const auto& name : names) {
      if (!model.has_weight(name)) continue;
      const auto values = fisher.find(name)->to_vector();
      for (std::size_t j = 0; j < std::min<std::size_t>(values.size(), 12); ++j) {
        const double g = fd_gradient(model, name, j, one, 0);
        EXPECT_NEAR(values[j], g * g, 1e-8 + 1e-6 * g * g) << name << "[" << j << "]";
      }
    }
  }
  {
    std::vector<EncodedSentence> data{s1, s2};
    auto fisher = estimate_fisher(model, data);
    EXPECT_EQ(fisher.samples, 5u);
    const auto values = fisher.find(kClassifierWeight)->to_vector();
    for (std::size_t j = 0; j < values.size(); j += 3) {
      double expect = 0.0;
      for (std::size_t i = 0; i < s1.size(); ++i) expect += std::pow(fd_gradient(model, kClassifierWeight, j, s1, i), 2);
      for (std::size_t i = 0; i < s2.size(); ++i) expect += std::pow(fd_gradient(model, kClassifierWeight, j, s2, i), 2);
      expect /= 5.0;
      EXPECT_NEAR(values[j], expect, 1e-8 + 1e-6 * expect) << j;
    }
  }
}

TEST(Fisher, NonNegativeDeterministicAndCapped) {
  auto model = tiny_model({"O", "B-A"}, 6);
  std::vector<EncodedSentence> data;
  for (std::size_t i = 0; i < 10; ++i) data.push_back({{i % 8, (i + 3) % 8}, {i % 2, 0}});
  FisherOptions options;
  options.max_sentences = 4;
  auto a = estimate_fisher(model, data, options);
  auto b = estimate_fisher(model, data, options);
  EXPECT_EQ(a.samples, 8u);
  ASSERT_EQ(a.entries.size(), model.weights.size());
  for (std::size_t w = 0; w < a.entries.size(); ++w) {
    EXPECT_EQ(a.entries[w].name, model.weights[w].name);
    EXPECT_EQ(a.entries[w].value.shape(), model.weights[w].value.shape());
    EXPECT_EQ(a.entries[w].value.to_vector(), b.entries[w].value.to_vector());
    for (double v : a.entries[w].value.data()) EXPECT_GE(v, 0.0);
  }
  // The caller's model is untouched.
  for (const auto& p : model.parameters())
    for (double g : p.grad()) EXPECT_EQ(g, 0.0);
  std::vector<EncodedSentence> empty;
  EXPECT_THROW(estimate_fisher(model, empty), ContractError);
}

TEST(Fusion, KindStrings) {
  for (auto k : {FusionKind::kNone, FusionKind::kVanilla, FusionKind::kSelective}) {
    EXPECT_EQ(fusion_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(fusion_kind_from_string("blend"), ConfigError);
}
