#include <algorithm>
#include <cmath>
#include <numbers>

#include "models.hpp"

namespace l2t {
namespace {

constexpr int kShapeKinds = 10;

bool inside_shape(int kind, double u, double v) {
  const double au = std::fabs(u);
  const double av = std::fabs(v);
  switch (kind) {
    case 0: return u * u + v * v <= 1.0;                                      // disk
    case 1: return std::max(au, av) <= 0.8;                                   // square
    case 2: return v >= -0.8 && v <= 0.8 && au <= (v + 0.8) / 1.6 * 0.9;      // triangle
    case 3: { const double r = std::sqrt(u * u + v * v); return r >= 0.55 && r <= 1.0; }  // ring
    case 4: return (au <= 0.3 && av <= 1.0) || (av <= 0.3 && au <= 1.0);      // plus
    case 5: return au <= 1.0 && av <= 0.3;                                    // horizontal bar
    case 6: return av <= 1.0 && au <= 0.3;                                    // vertical bar
    case 7: return au + av <= 1.0;                                            // diamond
    case 8: return std::fabs(au - av) <= 0.3 && std::max(au, av) <= 1.0;      // cross
    default: {                                                                // two dots
      const double a = (u - 0.5) * (u - 0.5) + v * v;
      const double b = (u + 0.5) * (u + 0.5) + v * v;
      return a <= 0.16 || b <= 0.16;
    }
  }
}

// Smooth hue wheel: channel k peaks at hue k / channels.
double hue_component(double hue, int k, int channels) {
  return 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (hue - static_cast<double>(k) / channels));
}

Image render(int label, int num_classes, Shape shape, Rng& rng) {
  const int h = shape.height;
  const int w = shape.width;
  const double hue = static_cast<double>(label) / num_classes + rng.uniform(-0.05, 0.05);
  const double saturation = rng.uniform(0.7, 1.0);
  const double brightness = rng.uniform(0.75, 1.0);
  const double freq = 1.0 + (label * 3) % 7;
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double base = rng.uniform(0.25, 0.55);
  const double amp = 0.12;
  const double cx = rng.uniform(0.35, 0.65) * (w - 1);
  const double cy = rng.uniform(0.35, 0.65) * (h - 1);
  const double radius = rng.uniform(0.2, 0.3) * std::min(h, w);
  const int kind = label % kShapeKinds;
  // A dimmer, smaller shape of a random other class acts as a distractor.
  const int distractor = static_cast<int>((label + 1 + rng.below(kShapeKinds - 1)) % kShapeKinds);
  const double dx = rng.uniform(0.15, 0.85) * (w - 1);
  const double dy = rng.uniform(0.15, 0.85) * (h - 1);
  const double dradius = rng.uniform(0.1, 0.15) * std::min(h, w);
  const double dhue = rng.uniform(0.0, 1.0);

  Image img(shape);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = (x * std::cos(theta) + y * std::sin(theta)) / w;
      const double bg = base + amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
      const bool fg = inside_shape(kind, (x - cx) / radius, (y - cy) / radius);
      const bool dfg = inside_shape(distractor, (x - dx) / dradius, (y - dy) / dradius);
      for (int c = 0; c < shape.channels; ++c) {
        double v = bg;
        if (dfg) v = 0.4 * hue_component(dhue, c, shape.channels) + 0.3;
        if (fg) {
          const double tint = hue_component(hue, c, shape.channels);
          v = brightness * (1.0 - saturation + saturation * tint);
        }
        v += 0.08 * rng.normal();
        img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

}  // namespace

SyntheticDataset generate_dataset(std::uint64_t seed, int n_per_class, int num_classes,
                                  Shape shape) {
  if (n_per_class < 1) throw InvalidArgument("n_per_class must be at least 1");
  if (num_classes < 1) throw InvalidArgument("num_classes must be at least 1");
  if (shape.channels < 1 || shape.height < 8 || shape.width < 8) {
    throw InvalidArgument("degenerate image shape " + shape.str() + " (height and width must be >= 8)");
  }
  SyntheticDataset ds;
  ds.num_classes = num_classes;
  ds.seed = seed;
  const std::size_t total = static_cast<std::size_t>(n_per_class) * num_classes;
  ds.images.reserve(total);
  ds.labels.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const int label = static_cast<int>(i % num_classes);
    Rng rng = Rng::substream(seed, "dataset-image", i);
    ds.images.push_back(render(label, num_classes, shape, rng));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace l2t
