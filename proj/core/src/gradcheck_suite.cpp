#include "spt/gradcheck_suite.hpp"

#include <functional>
#include <random>

#include "spt/distill.hpp"
#include "spt/encoded.hpp"
#include "spt/ops.hpp"
#include "spt/pseudo_label.hpp"

namespace spt {
namespace {

// Init-scale weights give near-zero attention scores; spreading them makes
// every loss term and its gradient non-trivial.
void perturb(ModelCheckpoint& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.15);
  for (auto& w : model.weights)
    for (auto& v : w.value.mutable_data()) v += noise(rng);
}

}  // namespace

std::vector<LossPathCheck> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  TaggerConfig cfg;
  cfg.vocab_size = 12;
  cfg.d_model = 32;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 64;
  cfg.max_len = 8;
  cfg.seed = options.seed;
  cfg.attention_mode = options.mode;

  ModelCheckpoint old_model = init_model(cfg, {"O", "B-A", "I-A"});
  perturb(old_model, options.seed + 101);
  old_model = clone_frozen(old_model);

  TaggerConfig new_cfg = cfg;
  new_cfg.seed = options.seed + 1;
  ModelCheckpoint model = init_model(new_cfg, {"O", "B-A", "I-A", "B-B", "I-B"});
  perturb(model, options.seed + 202);

  EncodedSentence sentence{{3, 7, 1, 9, 4}, {0, 3, 4, 0, 1}};
  const std::size_t width = model.tag_space.size();

  AttentionTrace old_trace;
  {
    NoGradGuard guard;
    old_trace = forward(old_model, sentence.token_ids).trace;
  }
  const auto labels = pseudo::label_targets(sentence, width);
  const std::vector<double> ones(sentence.size(), 1.0);

  // Token 0 pseudo-labeled as an old tag, token 3 masked.
  pseudo::PseudoTarget pseudo_target = labels;
  pseudo_target.rows[0 * width + 0] = 0.0;
  pseudo_target.rows[0 * width + 1] = 1.0;
  pseudo_target.target_tag[0] = 1;
  pseudo_target.rows[3 * width + 0] = 0.0;
  pseudo_target.target_tag[3] = width;
  pseudo_target.masked_count = 1;
  const std::vector<const pseudo::PseudoTarget*> batch{&pseudo_target};
  const auto eta = pseudo::token_weights(batch, old_model.tag_space.size()).eta.front();

  using distill::DistillKind;
  auto run = [&] { return forward(model, sentence.token_ids); };
  const std::vector<std::pair<std::string, std::function<Tensor()>>> paths = {
      {"ce", [&] { return pseudo::weighted_ce(run().prediction, labels, ones); }},
      {"kd", [&] { return distill::loss_kd(run().trace, old_trace); }},
      {"pkd-lax", [&] { return distill::loss_pkd_lax(run().trace, old_trace); }},
      {"pkd", [&] { return distill::loss_pkd(run().trace, old_trace); }},
      {"weighted-ce", [&] { return pseudo::weighted_ce(run().prediction, pseudo_target, eta); }},
      {"total",
       [&] {
         auto out = run();
         return ops::add(pseudo::weighted_ce(out.prediction, pseudo_target, eta),
                         ops::scale(distill::loss_pkd(out.trace, old_trace), options.lambda));
       }},
  };

  std::vector<NamedParam> params;
  for (const auto& w : model.weights) params.push_back({w.name, w.value});

  std::vector<LossPathCheck> out;
  for (const auto& [name, fn] : paths) out.push_back({name, grad_check(fn, params, options.check)});
  return out;
}

}  // namespace spt
