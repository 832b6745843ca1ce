#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "image.hpp"

namespace l2t {

// 2D convolution, stride 1, zero "same" padding (odd kernels only).
// weight layout [out][in][ky][kx].
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  std::vector<double> weight;
  std::vector<double> bias;
  bool operator==(const Conv2d&) const = default;
};

struct Relu {
  bool operator==(const Relu&) const = default;
};

// Non-overlapping size×size mean pooling.
struct AvgPool {
  int size = 2;
  bool operator==(const AvgPool&) const = default;
};

// Fully connected layer over the flattened input. weight layout [out][in].
struct Dense {
  int in_features = 0;
  int out_features = 0;
  std::vector<double> weight;
  std::vector<double> bias;
  bool operator==(const Dense&) const = default;
};

using Layer = std::variant<Conv2d, Relu, AvgPool, Dense>;

std::string layer_name(const Layer& layer);

enum class ArchId { kConvSmall, kConvDeep, kConvWide, kMlp };

struct ModelWeights {
  ArchId arch = ArchId::kConvSmall;
  Shape input_shape;
  int num_classes = 0;
  std::uint64_t training_seed = 0;
  std::vector<Layer> layers;

  bool operator==(const ModelWeights&) const = default;
};

using Logits = std::vector<double>;

struct LossGrad {
  double loss = 0.0;
  Image grad;
};

// Per-layer parameter gradients, laid out like the layer parameters.
// Parameter-free layers have empty entries.
struct ParamGrads {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;

  static ParamGrads zeros_like(const ModelWeights& model);
  void clear();
};

Logits forward(const ModelWeights& model, const Image& image);

int predict(const ModelWeights& model, const Image& image);

// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> values);

// Softmax cross-entropy in nats. If dlogits is non-empty it receives
// d loss / d logits.
double cross_entropy(std::span<const double> logits, int label, std::span<double> dlogits = {});

// Cross-entropy loss and its exact gradient with respect to the input pixels.
LossGrad loss_and_input_grad(const ModelWeights& model, const Image& image, int label);

double loss_only(const ModelWeights& model, const Image& image, int label);

// Which ReLU inputs are positive, concatenated over all ReLU layers. The
// loss is smooth along any segment on which this pattern is constant.
// Optionally also returns the logits of the same forward pass.
std::vector<bool> relu_pattern(const ModelWeights& model, const Image& image, Logits* logits = nullptr);

// Adds d loss / d params for one example into grads; returns the loss.
double accumulate_param_grads(const ModelWeights& model, const Image& image, int label,
                              ParamGrads& grads);

// Central differences (fn(x + h e_i) - fn(x - h e_i)) / 2h for every pixel.
Image finite_diff_grad(const std::function<double(const Image&)>& fn, const Image& image,
                       double h);

}  // namespace l2t
