#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spt/tensor.hpp"

namespace spt {

// Which attention scores a forward pass records for distillation: the scaled
// dot-product logits or the row-normalized attention weights.
enum class AttentionMode { kPreSoftmax, kPostSoftmax };

std::string to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& text);

struct TaggerConfig {
  std::size_t vocab_size = 1;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t max_len = 32;
  std::uint64_t seed = 1;
  AttentionMode attention_mode = AttentionMode::kPreSoftmax;

  std::size_t head_dim() const { return d_model / n_heads; }
  // Throws ConfigError when a count is zero or d_model % n_heads != 0.
  void validate() const;
  bool operator==(const TaggerConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Weights of a tagger at one continual step plus the tag space its
/// classifier head covers. tag_space[0] is always "O".
struct ModelCheckpoint {
  TaggerConfig config;
  std::vector<NamedTensor> weights;
  std::vector<std::string> tag_space;
  std::size_t step_index = 0;
  // Surface forms for token ids; optional, carried through checkpoint files.
  std::vector<std::string> vocabulary;

  const Tensor& weight(const std::string& name) const;
  Tensor& weight(const std::string& name);
  bool has_weight(const std::string& name) const;
  std::size_t parameter_count() const;
  std::vector<Tensor> parameters() const;
  // Index of a tag in tag_space, or nullopt.
  std::optional<std::size_t> tag_index(const std::string& tag) const;
};

inline constexpr const char* kClassifierWeight = "classifier.weight";
inline constexpr const char* kClassifierBias = "classifier.bias";

struct AttentionTrace {
  // One [K, n, n] tensor per layer.
  std::vector<Tensor> layers;
  AttentionMode mode = AttentionMode::kPreSoftmax;
};

struct PredictionDistribution {
  Tensor probs;      // [n, |tag_space|]
  Tensor log_probs;  // [n, |tag_space|]
};

struct ForwardResult {
  PredictionDistribution prediction;
  AttentionTrace trace;
  Tensor hidden;  // encoder output before the classifier, [n, d_model]
  Tensor logits;
};

/// Fresh model: Gaussian(0, 0.02) matrices and embeddings, zero biases, unit
/// layer-norm gains. Deterministic for config.seed.
ModelCheckpoint init_model(const TaggerConfig& config, std::vector<std::string> tag_space = {"O"});

ForwardResult forward(const ModelCheckpoint& model, std::span<const std::size_t> token_ids);
// Same, with explicit position ids (used to check positional equivariance).
ForwardResult forward(const ModelCheckpoint& model, std::span<const std::size_t> token_ids,
                      std::span<const std::size_t> position_ids);

/// Grows the classifier by one row per new tag. Existing rows are copied
/// bit-exactly; new rows are seeded Gaussian(0, 0.02) with zero bias.
ModelCheckpoint expand_head(const ModelCheckpoint& model, const std::vector<std::string>& new_tags);

/// Deep copy whose weights never receive gradients.
ModelCheckpoint clone_frozen(const ModelCheckpoint& model);
/// Deep copy whose weights are trainable leaves.
ModelCheckpoint clone_trainable(const ModelCheckpoint& model);

// Argmax tag index per token.
std::vector<std::size_t> predict_tags(const ModelCheckpoint& model, std::span<const std::size_t> token_ids);

}  // namespace spt
