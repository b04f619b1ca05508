#pragma once

#include <string>

#include "spt/tagger.hpp"
#include "spt/tensor.hpp"

// Attention-score distillation between a trainable (new) trace and a frozen
// (old) trace. All pooling is summation over true sequence positions; each
// loss is summed over layers. Gradients never flow into the old trace.
namespace spt::distill {

enum class DistillKind { kNone, kKd, kPkdLax, kPkd };

std::string to_string(DistillKind kind);
DistillKind distill_kind_from_string(const std::string& text);

/// sum_l sum_{k,i,j} (new - old)^2
Tensor loss_kd(const AttentionTrace& new_trace, const AttentionTrace& old_trace);

/// sum_l sum_k (sum_{i,j} new - sum_{i,j} old)^2 : only the head axis survives.
Tensor loss_pkd_lax(const AttentionTrace& new_trace, const AttentionTrace& old_trace);

struct PkdTerms {
  Tensor over_heads;  // sum over k, compare per (i, j)
  Tensor over_queries;  // sum over query axis i, compare per (k, j)
  Tensor over_keys;     // sum over key axis j (row sums), compare per (k, i)
};

/// The three partial-pooling terms, each summed over layers.
PkdTerms pkd_terms(const AttentionTrace& new_trace, const AttentionTrace& old_trace);

/// over_heads + over_queries + over_keys
Tensor loss_pkd(const AttentionTrace& new_trace, const AttentionTrace& old_trace);

// Dispatches on kind; kNone yields a constant zero.
Tensor distillation_loss(DistillKind kind, const AttentionTrace& new_trace, const AttentionTrace& old_trace);

}  // namespace spt::distill
