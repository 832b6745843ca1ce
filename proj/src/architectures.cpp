#include <cmath>

#include "models.hpp"

namespace l2t {
namespace {

Conv2d conv(int in, int out, int k) {
  Conv2d c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = k;
  c.weight.assign(static_cast<std::size_t>(out) * in * k * k, 0.0);
  c.bias.assign(out, 0.0);
  return c;
}

Dense dense(int in, int out) {
  Dense d;
  d.in_features = in;
  d.out_features = out;
  d.weight.assign(static_cast<std::size_t>(in) * out, 0.0);
  d.bias.assign(out, 0.0);
  return d;
}

void require_divisible(Shape input, int factor, ArchId arch) {
  if (input.height % factor != 0 || input.width % factor != 0) {
    throw InvalidArgument(arch_name(arch) + " needs height and width divisible by " +
                          std::to_string(factor) + ", got " + input.str());
  }
}

}  // namespace

const std::vector<ArchId>& all_archs() {
  static const std::vector<ArchId> archs = {ArchId::kConvSmall, ArchId::kConvDeep,
                                            ArchId::kConvWide, ArchId::kMlp};
  return archs;
}

std::string arch_name(ArchId arch) {
  switch (arch) {
    case ArchId::kConvSmall: return "conv_small";
    case ArchId::kConvDeep: return "conv_deep";
    case ArchId::kConvWide: return "conv_wide";
    case ArchId::kMlp: return "mlp";
  }
  return "unknown";
}

ArchId parse_arch(std::string_view name) {
  for (ArchId a : all_archs()) {
    if (arch_name(a) == name) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

ModelWeights zero_model(ArchId arch, Shape input, int num_classes) {
  if (num_classes < 1) throw InvalidArgument("num_classes must be positive");
  const int c = input.channels;
  const int h = input.height;
  const int w = input.width;
  ModelWeights m;
  m.arch = arch;
  m.input_shape = input;
  m.num_classes = num_classes;
  switch (arch) {
    case ArchId::kConvSmall:
      // conv3x3(8) - relu - pool4 - dense
      require_divisible(input, 4, arch);
      m.layers = {conv(c, 8, 3), Relu{}, AvgPool{4}, dense(8 * (h / 4) * (w / 4), num_classes)};
      break;
    case ArchId::kConvDeep:
      // conv3x3(8) - relu - pool2 - conv3x3(16) - relu - pool4 - dense
      require_divisible(input, 8, arch);
      m.layers = {conv(c, 8, 3),  Relu{},      AvgPool{2},
                  conv(8, 16, 3), Relu{},      AvgPool{4},
                  dense(16 * (h / 8) * (w / 8), num_classes)};
      break;
    case ArchId::kConvWide:
      // conv5x5(8) - relu - pool8 - dense(32) - relu - dense
      require_divisible(input, 8, arch);
      m.layers = {conv(c, 8, 5), Relu{}, AvgPool{8}, dense(8 * (h / 8) * (w / 8), 32), Relu{},
                  dense(32, num_classes)};
      break;
    case ArchId::kMlp:
      // pool2 - dense(64) - relu - dense
      require_divisible(input, 2, arch);
      m.layers = {AvgPool{2}, dense(c * (h / 2) * (w / 2), 64), Relu{}, dense(64, num_classes)};
      break;
  }
  return m;
}

ModelWeights make_model(ArchId arch, Shape input, int num_classes, Rng& rng) {
  ModelWeights m = zero_model(arch, input, num_classes);
  for (Layer& layer : m.layers) {
    if (auto* c = std::get_if<Conv2d>(&layer)) {
      const double std_dev = std::sqrt(2.0 / (c->in_channels * c->kernel * c->kernel));
      for (double& v : c->weight) v = rng.normal() * std_dev;
    } else if (auto* d = std::get_if<Dense>(&layer)) {
      const double std_dev = std::sqrt(2.0 / d->in_features);
      for (double& v : d->weight) v = rng.normal() * std_dev;
    }
  }
  return m;
}

std::size_t parameter_count(const ModelWeights& model) {
  std::size_t n = 0;
  for (const Layer& layer : model.layers) {
    if (const auto* c = std::get_if<Conv2d>(&layer)) n += c->weight.size() + c->bias.size();
    if (const auto* d = std::get_if<Dense>(&layer)) n += d->weight.size() + d->bias.size();
  }
  return n;
}

}  // namespace l2t
