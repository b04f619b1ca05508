#include "spt/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "spt/error.hpp"
#include "spt/ops.hpp"

namespace spt {
namespace {

constexpr double kInitStd = 0.02;

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::string layer_name(std::size_t layer, const char* suffix) {
  return "layer" + std::to_string(layer) + "." + suffix;
}

}  // namespace

std::string to_string(AttentionMode mode) {
  return mode == AttentionMode::kPreSoftmax ? "pre-softmax" : "post-softmax";
}

AttentionMode attention_mode_from_string(const std::string& text) {
  if (text == "pre-softmax") return AttentionMode::kPreSoftmax;
  if (text == "post-softmax") return AttentionMode::kPostSoftmax;
  throw ConfigError("unknown attention mode '" + text + "' (expected pre-softmax or post-softmax)");
}

void TaggerConfig::validate() const {
  std::vector<std::string> problems;
  if (vocab_size == 0) problems.push_back("vocab_size must be >= 1");
  if (d_model == 0) problems.push_back("d_model must be >= 1");
  if (n_layers == 0) problems.push_back("n_layers must be >= 1");
  if (n_heads == 0) problems.push_back("n_heads must be >= 1");
  if (d_ff == 0) problems.push_back("d_ff must be >= 1");
  if (max_len == 0) problems.push_back("max_len must be >= 1");
  if (n_heads != 0 && d_model % n_heads != 0) problems.push_back("d_model must be divisible by n_heads");
  if (problems.empty()) return;
  std::string msg = "invalid tagger config: ";
  for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
  throw ConfigError(msg);
}

const Tensor& ModelCheckpoint::weight(const std::string& name) const {
  for (const auto& w : weights)
    if (w.name == name) return w.value;
  throw CheckpointError("no weight named '" + name + "'");
}

Tensor& ModelCheckpoint::weight(const std::string& name) {
  for (auto& w : weights)
    if (w.name == name) return w.value;
  throw CheckpointError("no weight named '" + name + "'");
}

bool ModelCheckpoint::has_weight(const std::string& name) const {
  return std::any_of(weights.begin(), weights.end(), [&](const auto& w) { return w.name == name; });
}

std::size_t ModelCheckpoint::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.value.numel();
  return n;
}

std::vector<Tensor> ModelCheckpoint::parameters() const {
  std::vector<Tensor> out;
  out.reserve(weights.size());
  for (const auto& w : weights) out.push_back(w.value);
  return out;
}

std::optional<std::size_t> ModelCheckpoint::tag_index(const std::string& tag) const {
  auto it = std::find(tag_space.begin(), tag_space.end(), tag);
  if (it == tag_space.end()) return std::nullopt;
  return static_cast<std::size_t>(it - tag_space.begin());
}

ModelCheckpoint init_model(const TaggerConfig& config, std::vector<std::string> tag_space) {
  config.validate();
  if (tag_space.empty() || tag_space.front() != "O") {
    throw ScheduleError("tag space must start with the non-entity tag O");
  }
  std::mt19937_64 rng(config.seed);
  const std::size_t d = config.d_model;
  ModelCheckpoint model;
  model.config = config;
  model.tag_space = std::move(tag_space);

  auto add = [&](std::string name, Shape shape, std::vector<double> values) {
    model.weights.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values), true)});
  };
  auto add_gauss = [&](std::string name, Shape shape) {
    auto n = shape_numel(shape);
    add(std::move(name), std::move(shape), gaussian(n, rng));
  };
  auto add_const = [&](std::string name, Shape shape, double value) {
    auto n = shape_numel(shape);
    add(std::move(name), std::move(shape), std::vector<double>(n, value));
  };

  add_gauss("embed.token", {config.vocab_size, d});
  add_gauss("embed.position", {config.max_len, d});
  add_const("embed.ln.gain", {d}, 1.0);
  add_const("embed.ln.bias", {d}, 0.0);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    for (const char* proj : {"attn.q", "attn.k", "attn.v", "attn.out"}) {
      add_gauss(layer_name(l, proj) + ".weight", {d, d});
      add_const(layer_name(l, proj) + ".bias", {d}, 0.0);
    }
    add_const(layer_name(l, "ln1.gain"), {d}, 1.0);
    add_const(layer_name(l, "ln1.bias"), {d}, 0.0);
    add_gauss(layer_name(l, "ffn.in.weight"), {d, config.d_ff});
    add_const(layer_name(l, "ffn.in.bias"), {config.d_ff}, 0.0);
    add_gauss(layer_name(l, "ffn.out.weight"), {config.d_ff, d});
    add_const(layer_name(l, "ffn.out.bias"), {d}, 0.0);
    add_const(layer_name(l, "ln2.gain"), {d}, 1.0);
    add_const(layer_name(l, "ln2.bias"), {d}, 0.0);
  }
  const std::size_t c = model.tag_space.size();
  add_gauss(kClassifierWeight, {c, d});
  add_const(kClassifierBias, {c}, 0.0);
  return model;
}

ForwardResult forward(const ModelCheckpoint& model, std::span<const std::size_t> token_ids) {
  std::vector<std::size_t> positions(token_ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  return forward(model, token_ids, positions);
}

ForwardResult forward(const ModelCheckpoint& model, std::span<const std::size_t> token_ids,
                      std::span<const std::size_t> position_ids) {
  const auto& cfg = model.config;
  const std::size_t n = token_ids.size();
  if (n == 0) throw InputError("forward: empty token sequence");
  if (n > cfg.max_len) {
    throw InputError("forward: sequence length " + std::to_string(n) + " exceeds max_len " +
                     std::to_string(cfg.max_len));
  }
  if (position_ids.size() != n) throw DimensionError("forward: position ids do not match token count");
  for (auto id : token_ids) {
    if (id >= cfg.vocab_size) {
      throw InputError("forward: token id " + std::to_string(id) + " is outside the vocabulary (size " +
                       std::to_string(cfg.vocab_size) + ")");
    }
  }

  using namespace ops;
  Tensor x = add(embedding(model.weight("embed.token"), token_ids),
                 embedding(model.weight("embed.position"), position_ids));
  x = layer_norm(x, model.weight("embed.ln.gain"), model.weight("embed.ln.bias"));

  ForwardResult result;
  result.trace.mode = cfg.attention_mode;
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    auto proj = [&](const char* which, const Tensor& input) {
      return add_bias(matmul(input, model.weight(layer_name(l, which) + std::string(".weight"))),
                      model.weight(layer_name(l, which) + std::string(".bias")));
    };
    Tensor q = proj("attn.q", x);
    Tensor k = proj("attn.k", x);
    Tensor v = proj("attn.v", x);
    std::vector<Tensor> head_out, head_scores;
    head_out.reserve(cfg.n_heads);
    head_scores.reserve(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      Tensor qh = slice_cols(q, h * dh, dh);
      Tensor kh = slice_cols(k, h * dh, dh);
      Tensor vh = slice_cols(v, h * dh, dh);
      Tensor scores = scale(matmul_nt(qh, kh), inv_sqrt_dh);
      Tensor weights = softmax(scores, 1);
      head_scores.push_back(cfg.attention_mode == AttentionMode::kPreSoftmax ? scores : weights);
      head_out.push_back(matmul(weights, vh));
    }
    result.trace.layers.push_back(stack(head_scores));
    Tensor attended = proj("attn.out", concat_cols(head_out));
    x = layer_norm(add(x, attended), model.weight(layer_name(l, "ln1.gain")), model.weight(layer_name(l, "ln1.bias")));
    Tensor ff = gelu(proj("ffn.in", x));
    ff = proj("ffn.out", ff);
    x = layer_norm(add(x, ff), model.weight(layer_name(l, "ln2.gain")), model.weight(layer_name(l, "ln2.bias")));
  }
  result.hidden = x;
  result.logits = add_bias(matmul_nt(x, model.weight(kClassifierWeight)), model.weight(kClassifierBias));
  result.prediction.log_probs = log_softmax(result.logits, 1);
  result.prediction.probs = ops::exp(result.prediction.log_probs);
  return result;
}

ModelCheckpoint expand_head(const ModelCheckpoint& model, const std::vector<std::string>& new_tags) {
  std::set<std::string> seen(model.tag_space.begin(), model.tag_space.end());
  for (const auto& tag : new_tags) {
    if (!seen.insert(tag).second) throw ScheduleError("expand_head: duplicate tag '" + tag + "'");
  }
  ModelCheckpoint out = clone_trainable(model);
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    out.weights[i].value.set_requires_grad(model.weights[i].value.requires_grad());
  }
  if (new_tags.empty()) return out;

  const std::size_t d = model.config.d_model;
  const std::size_t old_c = model.tag_space.size();
  const std::size_t new_c = old_c + new_tags.size();
  // Seed depends on the model seed and the head size so every growth event
  // draws a distinct but reproducible block of rows.
  std::seed_seq seq{model.config.seed, static_cast<std::uint64_t>(old_c), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);

  auto& w = out.weight(kClassifierWeight);
  auto& b = out.weight(kClassifierBias);
  std::vector<double> wv = w.to_vector();
  auto extra = gaussian(new_tags.size() * d, rng);
  wv.insert(wv.end(), extra.begin(), extra.end());
  std::vector<double> bv = b.to_vector();
  bv.resize(new_c, 0.0);
  const bool trainable = model.weight(kClassifierWeight).requires_grad();
  w = Tensor::from({new_c, d}, std::move(wv), trainable);
  b = Tensor::from({new_c}, std::move(bv), trainable);
  out.tag_space.insert(out.tag_space.end(), new_tags.begin(), new_tags.end());
  return out;
}

ModelCheckpoint clone_frozen(const ModelCheckpoint& model) {
  ModelCheckpoint out = model;
  for (auto& w : out.weights) w.value = w.value.clone(false);
  return out;
}

ModelCheckpoint clone_trainable(const ModelCheckpoint& model) {
  ModelCheckpoint out = model;
  for (auto& w : out.weights) w.value = w.value.clone(true);
  return out;
}

std::vector<std::size_t> predict_tags(const ModelCheckpoint& model, std::span<const std::size_t> token_ids) {
  NoGradGuard guard;
  auto result = forward(model, token_ids);
  const auto& lp = result.prediction.log_probs;
  const std::size_t n = lp.dim(0), c = lp.dim(1);
  auto data = lp.data();
  std::vector<std::size_t> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.subspan(i * c, c);
    tags[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return tags;
}

}  // namespace spt
