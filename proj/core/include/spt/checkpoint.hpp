#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "spt/tagger.hpp"

namespace spt {

inline constexpr int kCheckpointFormatVersion = 1;

/// Checkpoint container:
///   line 1   "SPTCKPT <version> <manifest-bytes>\n"
///   manifest JSON text (config, tag_space, step, vocabulary, and per-weight
///            name / shape / dtype / byte offset), then "\n"
///   payload  contiguous little-endian IEEE-754 binary32 values
/// Weights are down-cast from 64-bit to 32-bit on save and widened on load.
void save_checkpoint(const ModelCheckpoint& model, std::ostream& out);
void save_checkpoint(const ModelCheckpoint& model, const std::filesystem::path& path);

// Loaded weights are trainable leaves. Throws CheckpointError on malformed input.
ModelCheckpoint load_checkpoint(std::istream& in);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spt
