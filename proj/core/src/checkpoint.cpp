#include "spt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spt/error.hpp"

namespace spt {
namespace {

using nlohmann::json;
constexpr const char* kMagic = "SPTCKPT";

json config_to_json(const TaggerConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},   {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},       {"d_ff", c.d_ff},         {"max_len", c.max_len},
              {"seed", c.seed},             {"attention_mode", to_string(c.attention_mode)}};
}

TaggerConfig config_from_json(const json& j) {
  TaggerConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.attention_mode = attention_mode_from_string(j.at("attention_mode").get<std::string>());
  c.validate();
  return c;
}

void put_f32(std::string& buf, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

double get_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& model, std::ostream& out) {
  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["config"] = config_to_json(model.config);
  manifest["tag_space"] = model.tag_space;
  manifest["step_index"] = model.step_index;
  manifest["vocabulary"] = model.vocabulary;
  json entries = json::array();
  std::string payload;
  for (const auto& w : model.weights) {
    entries.push_back({{"name", w.name}, {"shape", w.value.shape()}, {"dtype", "f32le"}, {"offset", payload.size()}});
    for (double v : w.value.data()) put_f32(payload, v);
  }
  manifest["weights"] = std::move(entries);
  manifest["payload_bytes"] = payload.size();
  const std::string text = manifest.dump(1);
  out << kMagic << ' ' << kCheckpointFormatVersion << ' ' << text.size() << '\n' << text << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw CheckpointError("failed to write checkpoint");
}

void save_checkpoint(const ModelCheckpoint& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  save_checkpoint(model, out);
}

ModelCheckpoint load_checkpoint(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw CheckpointError("empty checkpoint stream");
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  std::size_t manifest_bytes = 0;
  if (!(hs >> magic >> version >> manifest_bytes) || magic != kMagic) {
    throw CheckpointError("not a checkpoint: bad header line");
  }
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version));
  }
  std::string text(manifest_bytes, '\0');
  in.read(text.data(), static_cast<std::streamsize>(manifest_bytes));
  if (static_cast<std::size_t>(in.gcount()) != manifest_bytes || in.get() != '\n') {
    throw CheckpointError("truncated checkpoint manifest");
  }

  ModelCheckpoint model;
  std::size_t payload_bytes = 0;
  json manifest;
  try {
    manifest = json::parse(text);
    model.config = config_from_json(manifest.at("config"));
    model.tag_space = manifest.at("tag_space").get<std::vector<std::string>>();
    model.step_index = manifest.at("step_index").get<std::size_t>();
    model.vocabulary = manifest.value("vocabulary", std::vector<std::string>{});
    payload_bytes = manifest.at("payload_bytes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("malformed checkpoint config: ") + e.what());
  }

  std::string payload(payload_bytes, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes) throw CheckpointError("truncated checkpoint payload");

  try {
    for (const auto& entry : manifest.at("weights")) {
      if (entry.at("dtype").get<std::string>() != "f32le") throw CheckpointError("unsupported weight dtype");
      Shape shape = entry.at("shape").get<Shape>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(shape);
      if (offset + 4 * n > payload.size()) throw CheckpointError("weight extends past payload end");
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i) values[i] = get_f32(payload.data() + offset + 4 * i);
      model.weights.push_back({entry.at("name").get<std::string>(), Tensor::from(std::move(shape), std::move(values), true)});
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed weight entry: ") + e.what());
  }
  if (model.tag_space.empty() || model.tag_space.front() != "O") throw CheckpointError("tag space must start with O");
  const auto& cls = model.weight(kClassifierWeight);
  if (cls.rank() != 2 || cls.dim(0) != model.tag_space.size()) {
    throw CheckpointError("classifier rows do not match the tag space");
  }
  return model;
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  return load_checkpoint(in);
}

}  // namespace spt
