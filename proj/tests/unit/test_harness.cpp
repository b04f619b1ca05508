#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "spt/error.hpp"
#include "spt/harness.hpp"
#include "spt/ops.hpp"
#include "spt/report_io.hpp"
#include "spt/synth.hpp"

using namespace spt;

namespace {

struct Toy {
  EntityTypeSchedule schedule;
  SlicedDataset data;
};

Toy toy_setup(std::size_t fg = 1, std::size_t pg = 1) {
  SynthSpec spec;
  spec.gazetteer = {{"A", {"alpha", "aleph", "alf"}}, {"B", {"bravo", "beta"}}, {"C", {"charlie", "chi psi"}}};
  spec.templates = {"<A> met <B> today", "<C> is big", "<B> went home", "<A> said hi", "we saw <C> there",
                    "nothing here"};
  spec.counts = {{"A", 24}, {"B", 24}, {"C", 24}};
  spec.filler_sentences = 6;
  spec.seed = 5;
  auto corpus = synth_corpus(spec).sentences;
  auto split = split_corpus(corpus, 0.15, 0.2, 2);
  Toy toy;
  toy.schedule = build_schedule({"A", "B", "C"}, fg, pg);
  toy.data = greedy_slice(split.train, toy.schedule, 1);
  toy.data.dev = split.dev;
  toy.data.test = split.test;
  return toy;
}

TrainConfig tiny_config(MethodVariant method = spt_method()) {
  TrainConfig cfg;
  cfg.model.d_model = 8;
  cfg.model.n_layers = 1;
  cfg.model.n_heads = 2;
  cfg.model.d_ff = 16;
  cfg.model.max_len = 8;
  cfg.epochs_pg1 = 3;
  cfg.epochs_pgn = 3;
  cfg.lr = 5e-3;
  cfg.method = method;
  cfg.seed = 3;
  return cfg;
}

struct StepTwo {
  Vocabulary vocab;
  ModelCheckpoint old_model;
  ModelCheckpoint start;
  StepInputs inputs;
  std::vector<EncodedSentence> prev_train;
};

// Trains step 1 and prepares the inputs of step 2.
StepTwo step_two(const Toy& toy, const TrainConfig& cfg) {
  StepTwo s;
  std::vector<TaggedSentence> all;
  for (const auto& slice : toy.data.train) all.insert(all.end(), slice.begin(), slice.end());
  s.vocab = Vocabulary::build(all);
  auto model_cfg = cfg.model;
  model_cfg.vocab_size = s.vocab.size();
  model_cfg.seed = cfg.seed;
  auto start1 = expand_head(init_model(model_cfg), toy.schedule.tags_at(1));
  StepInputs in1;
  in1.step = 1;
  in1.train = encode_all(toy.data.train_slice(1), s.vocab, start1.tag_space);
  in1.dev = toy.data.dev_view(toy.schedule, 1);
  in1.dev_types = toy.schedule.types_at(1);
  in1.vocab = &s.vocab;
  auto trained = train_step(start1, nullptr, in1, cfg, 2);
  s.old_model = clone_frozen(trained.model);
  s.start = expand_head(trained.model, toy.schedule.tags_at(2));
  s.inputs.step = 2;
  s.inputs.train = encode_all(toy.data.train_slice(2), s.vocab, s.start.tag_space);
  s.inputs.dev = toy.data.dev_view(toy.schedule, 2);
  s.inputs.dev_types = toy.schedule.types_at(2);
  s.inputs.vocab = &s.vocab;
  s.prev_train = std::move(in1.train);
  return s;
}

std::vector<std::vector<double>> weights_of(const ModelCheckpoint& m) {
  std::vector<std::vector<double>> out;
  for (const auto& w : m.weights) out.push_back(w.value.to_vector());
  return out;
}

}  // namespace

TEST(Methods, PresetsAndNames) {
  const auto spt = spt_method();
  EXPECT_EQ(spt.distill, distill::DistillKind::kPkd);
  EXPECT_EQ(spt.fusion, fusion::FusionKind::kSelective);
  EXPECT_EQ(spt.pseudo, pseudo::PseudoKind::kConfidence);
  EXPECT_TRUE(spt.eta_weighting);
  const auto ft = ft_method();
  EXPECT_EQ(ft.distill, distill::DistillKind::kNone);
  EXPECT_EQ(ft.fusion, fusion::FusionKind::kNone);
  EXPECT_EQ(ft.pseudo, pseudo::PseudoKind::kNone);
  EXPECT_FALSE(ft.eta_weighting);
  for (const auto& name : method_names()) EXPECT_EQ(method_name(method_from_name(name)), name);
  EXPECT_EQ(method_from_name("w-vwf").fusion, fusion::FusionKind::kVanilla);
  EXPECT_EQ(method_from_name("wo-threshold").pseudo, pseudo::PseudoKind::kNaive);
  MethodVariant odd = ft;
  odd.eta_weighting = true;
  EXPECT_EQ(method_name(odd), "custom");
  try {
    method_from_name("best");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("wo-threshold"), std::string::npos);
  }
}

TEST(TrainConfig, ValidationListsEveryProblem) {
  TrainConfig cfg;
  cfg.lambda = -1;
  cfg.lr = 0;
  cfg.epochs_pg1 = 0;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lambda"), std::string::npos);
    EXPECT_NE(msg.find("lr"), std::string::npos);
    EXPECT_NE(msg.find("epochs_pg1"), std::string::npos);
  }
  EXPECT_NO_THROW(TrainConfig{}.validate());
  EntityTypeSchedule s;
  s.pg = 2;
  EXPECT_EQ(TrainConfig{}.epochs_for(s), 20u);
  s.pg = 1;
  EXPECT_EQ(TrainConfig{}.epochs_for(s), 10u);
}

TEST(Optimizer, SgdSingleStepIsMinusLrTimesGradient) {
  auto w = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
  const auto x = Tensor::from({3}, {1.5, 2.0, -3.0});
  Sgd opt({w}, 0.1);
  ops::sum(ops::mul(w, x)).backward();
  opt.step();
  EXPECT_DOUBLE_EQ(w.data()[0], 0.5 - 0.1 * 1.5);
  EXPECT_DOUBLE_EQ(w.data()[1], -1.0 - 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(w.data()[2], 2.0 + 0.1 * 3.0);
  opt.zero_grad();
  EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Optimizer, AdamFirstStepAndContracts) {
  auto w = Tensor::from({2}, {1.0, 1.0}, true);
  auto untouched = Tensor::from({1}, {4.0}, true);
  Adam opt({w, untouched}, 0.01);
  ops::sum(ops::mul(w, Tensor::from({2}, {3.0, -0.5}))).backward();
  opt.step();
  // m_hat = g and v_hat = g^2 on the first step.
  EXPECT_NEAR(w.data()[0], 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w.data()[1], 1.0 + 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(untouched.data()[0], 4.0);

  EXPECT_THROW(Sgd({w}, 0.0), ConfigError);
  EXPECT_THROW(Sgd({ops::scale(w, 2.0)}, 0.1), ContractError);
  EXPECT_THROW(Sgd({Tensor::from({1}, {1.0})}, 0.1), ContractError);
  EXPECT_EQ(optimizer_kind_from_string(to_string(OptimizerKind::kAdam)), OptimizerKind::kAdam);
  EXPECT_THROW(optimizer_kind_from_string("lbfgs"), ConfigError);
}

TEST(TrainStep, LossIsFiniteAndDecreases) {
  auto toy = toy_setup();
  auto cfg = tiny_config(ft_method());
  auto s = step_two(toy, cfg);
  auto result = train_step(s.start, &s.old_model, s.inputs, cfg, 4);
  ASSERT_EQ(result.epochs.size(), 4u);
  EXPECT_TRUE(std::isfinite(result.epochs.front().mean_loss));
  EXPECT_LT(result.epochs.back().mean_loss, result.epochs.front().mean_loss);
  EXPECT_GE(result.best_epoch, 1u);
  EXPECT_FALSE(result.audit.has_value());
}

TEST(TrainStep, ZeroLambdaWithoutPseudoLabelsIsPlainCe) {
  auto toy = toy_setup();
  auto ft = tiny_config(ft_method());
  auto s = step_two(toy, ft);
  MethodVariant pkd_only = ft_method();
  pkd_only.distill = distill::DistillKind::kPkd;
  auto distill_cfg = tiny_config(pkd_only);
  distill_cfg.lambda = 0.0;
  auto a = train_step(s.start, &s.old_model, s.inputs, ft, 3);
  auto b = train_step(s.start, &s.old_model, s.inputs, distill_cfg, 3);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.epochs[e].mean_loss, b.epochs[e].mean_loss);
    EXPECT_EQ(a.epochs[e].dev_mi_f1, b.epochs[e].dev_mi_f1);
  }
  EXPECT_EQ(weights_of(a.model), weights_of(b.model));
}

TEST(TrainStep, OldModelIsNeverMutated) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  auto s = step_two(toy, cfg);
  const auto before = weights_of(s.old_model);
  auto result = train_step(s.start, &s.old_model, s.inputs, cfg, 2);
  EXPECT_EQ(weights_of(s.old_model), before);
  for (const auto& p : s.old_model.parameters())
    for (double g : p.grad()) EXPECT_EQ(g, 0.0);
  ASSERT_TRUE(result.audit.has_value());
  EXPECT_EQ(result.audit->step, 2u);
  EXPECT_EQ(result.audit->stats.tags, s.old_model.tag_space);
}

TEST(TrainStep, EtaScopesAgreeForASingleBatch) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  cfg.batch_size = 10000;
  auto s = step_two(toy, cfg);
  auto per_dataset = cfg;
  per_dataset.eta_per_dataset = true;
  auto a = train_step(s.start, &s.old_model, s.inputs, cfg, 2);
  auto b = train_step(s.start, &s.old_model, s.inputs, per_dataset, 2);
  EXPECT_EQ(a.epochs[1].mean_loss, b.epochs[1].mean_loss);
  EXPECT_EQ(weights_of(a.model), weights_of(b.model));
}

TEST(TrainStep, NonFiniteLossRaisesTrainingError) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  auto s = step_two(toy, cfg);
  cfg.lambda = std::numeric_limits<double>::infinity();
  try {
    train_step(s.start, &s.old_model, s.inputs, cfg, 1);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("step 2, epoch 1, batch 0"), std::string::npos);
  }
}

TEST(TrainStep, Contracts) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  auto s = step_two(toy, cfg);
  EXPECT_THROW(train_step(s.start, nullptr, s.inputs, cfg, 1), ContractError);
  EXPECT_THROW(train_step(s.start, &s.old_model, s.inputs, cfg, 0), ConfigError);
  auto empty = s.inputs;
  empty.train.clear();
  EXPECT_THROW(train_step(s.start, &s.old_model, empty, cfg, 1), ContractError);
}

TEST(FisherThenFuse, DelegatesPerVariant) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  auto s = step_two(toy, cfg);
  auto trained = train_step(s.start, &s.old_model, s.inputs, cfg, 1).model;

  auto none_cfg = cfg;
  none_cfg.method.fusion = fusion::FusionKind::kNone;
  auto none = fisher_then_fuse(s.old_model, trained, nullptr, s.prev_train, toy.schedule, 2, none_cfg);
  EXPECT_EQ(weights_of(none.model), weights_of(trained));
  EXPECT_FALSE(none.plan.has_value());

  auto vanilla_cfg = cfg;
  vanilla_cfg.method.fusion = fusion::FusionKind::kVanilla;
  auto vanilla = fisher_then_fuse(s.old_model, trained, nullptr, s.prev_train, toy.schedule, 2, vanilla_cfg);
  const double alpha = fusion::compute_alpha(toy.schedule, 2);
  EXPECT_EQ(weights_of(vanilla.model), weights_of(fusion::fuse_vanilla(s.old_model, trained, alpha)));

  auto fisher = fusion::estimate_fisher(s.old_model, s.prev_train, {cfg.fisher_max_sentences, cfg.seed});
  auto cached = fisher_then_fuse(s.old_model, trained, &fisher, s.prev_train, toy.schedule, 2, cfg);
  auto recomputed = fisher_then_fuse(s.old_model, trained, nullptr, s.prev_train, toy.schedule, 2, cfg);
  EXPECT_EQ(weights_of(cached.model), weights_of(recomputed.model));
  ASSERT_TRUE(cached.plan.has_value());
  EXPECT_DOUBLE_EQ(cached.plan->alpha, alpha);
  EXPECT_DOUBLE_EQ(cached.plan->gamma, fusion::compute_gamma(toy.schedule, 2));
  auto direct = fusion::fuse_selective(s.old_model, trained, fisher, alpha, fusion::compute_gamma(toy.schedule, 2));
  EXPECT_EQ(weights_of(cached.model), weights_of(direct.first));
  EXPECT_THROW(fisher_then_fuse(s.old_model, trained, &fisher, s.prev_train, toy.schedule, 1, cfg), ContractError);
}

TEST(RunContinual, SingleStepCollapsesOldAndNew) {
  auto toy = toy_setup(3, 1);
  auto cfg = tiny_config();
  auto run = run_continual(toy.data, toy.schedule, cfg);
  ASSERT_EQ(run.reports.size(), 1u);
  const auto& r = run.reports[0];
  EXPECT_FALSE(r.ma_f1_old.has_value());
  ASSERT_TRUE(r.ma_f1_new.has_value());
  EXPECT_EQ(*r.ma_f1_new, r.ma_f1_all);
  EXPECT_EQ(run.final_model.tag_space.size(), 7u);
}

TEST(RunContinual, DeterministicAndScopedToSeenTypes) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  std::vector<std::size_t> steps_seen;
  auto a = run_continual(toy.data, toy.schedule, cfg, [&](const StepOutcome& o) {
    steps_seen.push_back(o.step);
    EXPECT_EQ(o.plan->has_value(), o.step >= 2);
    EXPECT_EQ(o.model->step_index, o.step);
  });
  auto b = run_continual(toy.data, toy.schedule, cfg);
  EXPECT_EQ(steps_seen, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(step_reports_csv(a.reports), step_reports_csv(b.reports));
  for (std::size_t t = 1; t <= 3; ++t) {
    const auto& r = a.reports[t - 1];
    EXPECT_EQ(r.step, t);
    EXPECT_EQ(r.per_type_f1.size(), t);
    for (const auto& [type, f1] : r.per_type_f1) EXPECT_LE(toy.schedule.step_of(type), t);
  }
}

TEST(RunContinual, ManualReplayMatchesHarness) {
  // Chaining: step 2 starts from step 1's final weights and fuses with
  // Fisher cached from step 1.
  auto toy = toy_setup(2, 1);
  auto cfg = tiny_config();
  auto run = run_continual(toy.data, toy.schedule, cfg);

  std::vector<TaggedSentence> all;
  for (const auto& slice : toy.data.train) all.insert(all.end(), slice.begin(), slice.end());
  auto vocab = Vocabulary::build(all);
  auto model_cfg = cfg.model;
  model_cfg.vocab_size = vocab.size();
  model_cfg.seed = cfg.seed;
  for (const auto* pool : {&all, &toy.data.dev, &toy.data.test})
    for (const auto& s : *pool) model_cfg.max_len = std::max(model_cfg.max_len, s.tokens.size());

  auto start1 = expand_head(init_model(model_cfg), toy.schedule.tags_at(1));
  start1.step_index = 1;
  StepInputs in1;
  in1.step = 1;
  in1.train = encode_all(toy.data.train_slice(1), vocab, start1.tag_space);
  in1.dev = toy.data.dev_view(toy.schedule, 1);
  in1.dev_types = toy.schedule.types_at(1);
  in1.vocab = &vocab;
  auto m1 = train_step(start1, nullptr, in1, cfg, cfg.epochs_pg1).model;
  auto fisher = fusion::estimate_fisher(m1, in1.train, {cfg.fisher_max_sentences, cfg.seed});

  auto old_model = clone_frozen(m1);
  auto start2 = expand_head(m1, toy.schedule.tags_at(2));
  start2.step_index = 2;
  StepInputs in2;
  in2.step = 2;
  in2.train = encode_all(toy.data.train_slice(2), vocab, start2.tag_space);
  in2.dev = toy.data.dev_view(toy.schedule, 2);
  in2.dev_types = toy.schedule.types_at(2);
  in2.vocab = &vocab;
  auto m2 = train_step(start2, &old_model, in2, cfg, cfg.epochs_pg1).model;
  auto fused = fisher_then_fuse(old_model, m2, &fisher, in1.train, toy.schedule, 2, cfg);

  EXPECT_EQ(weights_of(fused.model), weights_of(run.final_model));
  auto report = evaluate(fused.model, vocab, toy.data.test_view(toy.schedule, 2), toy.schedule.types_at(1),
                         toy.schedule.types_at(2));
  EXPECT_EQ(report.mi_f1_all, run.reports[1].mi_f1_all);
}

TEST(RunContinual, RejectsMisalignedSlices) {
  auto toy = toy_setup();
  auto cfg = tiny_config();
  auto other = build_schedule({"A", "B", "C"}, 2, 1);
  EXPECT_THROW(run_continual(toy.data, other, cfg), ScheduleError);
}
