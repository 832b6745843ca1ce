#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "models.hpp"

namespace l2t {
namespace {

using nlohmann::json;

constexpr const char* kFormatName = "l2t-weights";

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void append_f32_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double read_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

json layer_json(const Layer& layer) {
  if (const auto* c = std::get_if<Conv2d>(&layer)) {
    return {{"type", "conv2d"}, {"in", c->in_channels}, {"out", c->out_channels}, {"kernel", c->kernel}};
  }
  if (const auto* d = std::get_if<Dense>(&layer)) {
    return {{"type", "dense"}, {"in", d->in_features}, {"out", d->out_features}};
  }
  if (const auto* p = std::get_if<AvgPool>(&layer)) return {{"type", "avgpool"}, {"size", p->size}};
  return {{"type", "relu"}};
}

[[noreturn]] void malformed(const std::string& what) {
  throw FormatError(FormatError::Kind::kMalformed, "malformed weight file: " + what);
}

}  // namespace

std::string serialize_weights(const ModelWeights& model) {
  std::string payload;
  json tensors = json::array();
  json layers = json::array();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    layers.push_back(layer_json(layer));
    const std::string prefix = "layer" + std::to_string(i);
    if (const auto* c = std::get_if<Conv2d>(&layer)) {
      tensors.push_back({{"name", prefix + ".weight"},
                         {"shape", {c->out_channels, c->in_channels, c->kernel, c->kernel}}});
      tensors.push_back({{"name", prefix + ".bias"}, {"shape", {c->out_channels}}});
      for (double v : c->weight) append_f32_le(payload, v);
      for (double v : c->bias) append_f32_le(payload, v);
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      tensors.push_back({{"name", prefix + ".weight"}, {"shape", {d->out_features, d->in_features}}});
      tensors.push_back({{"name", prefix + ".bias"}, {"shape", {d->out_features}}});
      for (double v : d->weight) append_f32_le(payload, v);
      for (double v : d->bias) append_f32_le(payload, v);
    }
  }
  json manifest = {
      {"format", kFormatName},
      {"version", kWeightFormatVersion},
      {"arch", arch_name(model.arch)},
      {"input_shape", {model.input_shape.channels, model.input_shape.height, model.input_shape.width}},
      {"num_classes", model.num_classes},
      {"training_seed", model.training_seed},
      {"layers", layers},
      {"tensors", tensors},
      {"payload_bytes", payload.size()},
      {"checksum", "fnv1a64:" + hex64(fnv1a64(payload))},
  };
  return manifest.dump() + "\n" + payload;
}

ModelWeights deserialize_weights(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (bytes.empty() || newline == std::string_view::npos) {
    throw FormatError(FormatError::Kind::kTruncated, "truncated weight file: no manifest line");
  }
  json manifest;
  try {
    manifest = json::parse(bytes.substr(0, newline));
  } catch (const json::exception& e) {
    malformed(std::string("manifest is not valid JSON (") + e.what() + ")");
  }
  ModelWeights model;
  std::uint64_t payload_bytes = 0;
  std::string checksum;
  try {
    if (manifest.at("format").get<std::string>() != kFormatName) malformed("unexpected format tag");
    const int version = manifest.at("version").get<int>();
    if (version != kWeightFormatVersion) {
      throw FormatError(FormatError::Kind::kVersion,
                        "weight file version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kWeightFormatVersion) + ")");
    }
    const auto shape = manifest.at("input_shape").get<std::vector<int>>();
    if (shape.size() != 3) malformed("input_shape must have 3 entries");
    model = zero_model(parse_arch(manifest.at("arch").get<std::string>()), Shape{shape[0], shape[1], shape[2]},
                       manifest.at("num_classes").get<int>());
    model.training_seed = manifest.at("training_seed").get<std::uint64_t>();
    const json& layers = manifest.at("layers");
    if (layers.size() != model.layers.size()) malformed("layer count does not match architecture");
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      if (layers[i] != layer_json(model.layers[i])) {
        malformed("layer " + std::to_string(i) + " does not match architecture " + arch_name(model.arch));
      }
    }
    payload_bytes = manifest.at("payload_bytes").get<std::uint64_t>();
    checksum = manifest.at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    malformed(e.what());
  } catch (const ConfigError& e) {
    malformed(e.what());
  } catch (const InvalidArgument& e) {
    malformed(e.what());
  }

  if (payload_bytes != parameter_count(model) * 4) malformed("payload size does not match architecture");
  const std::string_view payload = bytes.substr(newline + 1);
  if (payload.size() < payload_bytes) {
    throw FormatError(FormatError::Kind::kTruncated,
                      "truncated weight file: payload has " + std::to_string(payload.size()) + " of " +
                          std::to_string(payload_bytes) + " bytes");
  }
  if (payload.size() > payload_bytes) malformed("trailing bytes after payload");
  if (checksum != "fnv1a64:" + hex64(fnv1a64(payload))) {
    throw FormatError(FormatError::Kind::kChecksum, "weight file checksum mismatch");
  }

  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  auto fill = [&](std::vector<double>& dst) {
    for (double& v : dst) {
      v = read_f32_le(p);
      p += 4;
    }
  };
  for (Layer& layer : model.layers) {
    if (auto* c = std::get_if<Conv2d>(&layer)) {
      fill(c->weight);
      fill(c->bias);
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      fill(d->weight);
      fill(d->bias);
    }
  }
  return model;
}

void save_weights(const ModelWeights& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_weights(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_weights(ss.str());
}

}  // namespace l2t
