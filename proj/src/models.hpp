#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "diffcore.hpp"
#include "rng.hpp"

namespace l2t {

// ---- architectures ----

const std::vector<ArchId>& all_archs();
std::string arch_name(ArchId arch);
// Throws ConfigError for unknown names.
ArchId parse_arch(std::string_view name);

// Freshly initialized (He-normal weights, zero biases) network.
ModelWeights make_model(ArchId arch, Shape input, int num_classes, Rng& rng);

// Same architecture with every parameter set to zero.
ModelWeights zero_model(ArchId arch, Shape input, int num_classes);

std::size_t parameter_count(const ModelWeights& model);

// ---- synthetic data ----

struct SyntheticDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return images.size(); }
};

// Procedural class-distinctive patterns. Each class owns a shape, a hue and a
// background texture frequency; position, size, phase, colour jitter and
// pixel noise vary per image. Labels cycle through the classes, so every
// class gets exactly n_per_class images.
SyntheticDataset generate_dataset(std::uint64_t seed, int n_per_class, int num_classes,
                                  Shape shape);

// ---- training ----

struct TrainHyper {
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  bool operator==(const TrainHyper&) const = default;
};

// Mini-batch SGD with momentum and a cosine learning-rate schedule. The
// returned parameters are rounded to float32 so that the weight file
// round-trips exactly.
ModelWeights train_model(ArchId arch, const SyntheticDataset& data, const TrainHyper& hyper,
                         std::uint64_t seed);

double accuracy(const ModelWeights& model, const SyntheticDataset& data);

// ---- weight files ----

inline constexpr int kWeightFormatVersion = 1;

void save_weights(const ModelWeights& model, const std::filesystem::path& path);
// Throws FormatError (version / truncated / checksum / malformed) or IoError.
ModelWeights load_weights(const std::filesystem::path& path);

// The serialized bytes that save_weights writes.
std::string serialize_weights(const ModelWeights& model);
ModelWeights deserialize_weights(std::string_view bytes);

// ---- zoo ----

struct Zoo {
  std::vector<ModelWeights> members;
  std::size_t surrogate = 0;

  const ModelWeights& surrogate_model() const { return members.at(surrogate); }
  std::size_t size() const { return members.size(); }
};

// Fraction of images on which the two models' predictions differ.
double disagreement(const ModelWeights& a, const ModelWeights& b, const SyntheticDataset& data);

// Indices (in dataset order) of the first `count` images every model
// classifies correctly. Returns fewer if the dataset runs out.
std::vector<std::size_t> select_evaluation_images(const Zoo& zoo, const SyntheticDataset& data,
                                                  std::size_t count);

}  // namespace l2t
