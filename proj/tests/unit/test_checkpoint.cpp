#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "spt/checkpoint.hpp"
#include "spt/error.hpp"
#include "spt/tagger.hpp"

using namespace spt;

namespace {

ModelCheckpoint sample_model() {
  TaggerConfig cfg;
  cfg.vocab_size = 15;
  cfg.d_model = 16;
  cfg.d_ff = 24;
  cfg.max_len = 10;
  cfg.seed = 3;
  cfg.attention_mode = AttentionMode::kPostSoftmax;
  auto model = init_model(cfg, {"O", "B-LOC", "I-LOC"});
  model.step_index = 2;
  model.vocabulary = {"<unk>", "a", "b"};
  return model;
}

std::string saved_bytes(const ModelCheckpoint& model) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(model, out);
  return out.str();
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesMetadataAndOutputs) {
  const auto model = sample_model();
  std::istringstream in(saved_bytes(model), std::ios::binary);
  const auto loaded = load_checkpoint(in);
  EXPECT_EQ(loaded.config, model.config);
  EXPECT_EQ(loaded.tag_space, model.tag_space);
  EXPECT_EQ(loaded.step_index, 2u);
  EXPECT_EQ(loaded.vocabulary, model.vocabulary);
  ASSERT_EQ(loaded.weights.size(), model.weights.size());
  for (const auto& p : loaded.parameters()) EXPECT_TRUE(p.requires_grad());

  const std::vector<std::size_t> tokens{1, 4, 9, 2, 14};
  const auto a = forward(model, tokens).prediction.probs.to_vector();
  const auto b = forward(loaded, tokens).prediction.probs.to_vector();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(std::abs(a[i] - b[i]), 1e-6 * std::abs(a[i]));
}

TEST(Checkpoint, WeightsAreStoredAsBinary32) {
  const auto model = sample_model();
  std::istringstream in(saved_bytes(model), std::ios::binary);
  const auto loaded = load_checkpoint(in);
  for (std::size_t w = 0; w < model.weights.size(); ++w) {
    const auto orig = model.weights[w].value.data();
    const auto back = loaded.weights[w].value.data();
    for (std::size_t i = 0; i < orig.size(); ++i) {
      EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(orig[i])));
    }
  }
}

TEST(Checkpoint, SavingIsByteDeterministic) {
  EXPECT_EQ(saved_bytes(sample_model()), saved_bytes(sample_model()));
}

TEST(Checkpoint, RejectsMalformedInput) {
  const auto bytes = saved_bytes(sample_model());
  {
    std::istringstream in("NOTACKPT 1 10\n{}", std::ios::binary);
    EXPECT_THROW(load_checkpoint(in), CheckpointError);
  }
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 9), std::ios::binary);
    EXPECT_THROW(load_checkpoint(in), CheckpointError);
  }
  {
    std::string bad = bytes;
    bad.replace(0, 9, "SPTCKPT 9");
    std::istringstream in(bad, std::ios::binary);
    EXPECT_THROW(load_checkpoint(in), CheckpointError);
  }
  {
    std::istringstream in(std::string{}, std::ios::binary);
    EXPECT_THROW(load_checkpoint(in), CheckpointError);
  }
  EXPECT_THROW(load_checkpoint(std::filesystem::path("/nonexistent/model.sptckpt")), CheckpointError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "spt_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.sptckpt";
  save_checkpoint(sample_model(), path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.tag_space.size(), 3u);
  std::filesystem::remove_all(dir);
}
