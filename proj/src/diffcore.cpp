#include "diffcore.hpp"

#include <algorithm>
#include <cmath>

namespace l2t {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Shape output_shape(const Layer& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const Conv2d& conv) {
            if (conv.in_channels != in.channels) {
              throw InvalidArgument("conv2d expects " + std::to_string(conv.in_channels) +
                                    " input channels, got " + std::to_string(in.channels));
            }
            return Shape{conv.out_channels, in.height, in.width};
          },
          [&](const Relu&) { return in; },
          [&](const AvgPool& pool) {
            if (in.height % pool.size != 0 || in.width % pool.size != 0) {
              throw InvalidArgument("avgpool size " + std::to_string(pool.size) +
                                    " does not divide " + in.str());
            }
            return Shape{in.channels, in.height / pool.size, in.width / pool.size};
          },
          [&](const Dense& dense) {
            if (static_cast<std::size_t>(dense.in_features) != in.size()) {
              throw InvalidArgument("dense expects " + std::to_string(dense.in_features) +
                                    " features, got " + std::to_string(in.size()));
            }
            return Shape{dense.out_features, 1, 1};
          },
      },
      layer);
}

void conv_forward(const Conv2d& conv, const Shape& in_shape, const double* in, double* out) {
  const int h = in_shape.height;
  const int w = in_shape.width;
  const int k = conv.kernel;
  const int pad = k / 2;
  const std::size_t plane = in_shape.plane();
  for (int oc = 0; oc < conv.out_channels; ++oc) {
    double* o = out + oc * plane;
    std::fill(o, o + plane, conv.bias[oc]);
    for (int ic = 0; ic < conv.in_channels; ++ic) {
      const double* src = in + ic * plane;
      const double* wk = conv.weight.data() + (static_cast<std::size_t>(oc) * conv.in_channels + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          const double wv = wk[ky * k + kx];
          for (int y = y0; y < y1; ++y) {
            double* orow = o + y * w;
            const double* irow = src + (y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

// Accumulates into din (if non-null) and the parameter gradients (if non-null).
void conv_backward(const Conv2d& conv, const Shape& in_shape, const double* in, const double* dout,
                   double* din, double* dweight, double* dbias) {
  const int h = in_shape.height;
  const int w = in_shape.width;
  const int k = conv.kernel;
  const int pad = k / 2;
  const std::size_t plane = in_shape.plane();
  for (int oc = 0; oc < conv.out_channels; ++oc) {
    const double* go = dout + oc * plane;
    if (dbias != nullptr) {
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += go[i];
      dbias[oc] += s;
    }
    for (int ic = 0; ic < conv.in_channels; ++ic) {
      const std::size_t base = (static_cast<std::size_t>(oc) * conv.in_channels + ic) * k * k;
      const double* wk = conv.weight.data() + base;
      const double* src = in + ic * plane;
      double* gi = din != nullptr ? din + ic * plane : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          const double wv = wk[ky * k + kx];
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = go + y * w;
            const double* irow = src + (y + dy) * w + dx;
            if (gi != nullptr) {
              double* girow = gi + (y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) girow[x] += wv * grow[x];
            }
            if (dweight != nullptr) {
              for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            }
          }
          if (dweight != nullptr) dweight[base + ky * k + kx] += acc;
        }
      }
    }
  }
}

void pool_forward(const AvgPool& pool, const Shape& in_shape, const double* in, double* out) {
  const int s = pool.size;
  const int oh = in_shape.height / s;
  const int ow = in_shape.width / s;
  const double scale = 1.0 / (s * s);
  for (int c = 0; c < in_shape.channels; ++c) {
    const double* src = in + c * in_shape.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int y = oy * s; y < oy * s + s; ++y) {
          for (int x = ox * s; x < ox * s + s; ++x) acc += src[y * in_shape.width + x];
        }
        out[(c * oh + oy) * ow + ox] = acc * scale;
      }
    }
  }
}

void pool_backward(const AvgPool& pool, const Shape& in_shape, const double* dout, double* din) {
  const int s = pool.size;
  const int oh = in_shape.height / s;
  const int ow = in_shape.width / s;
  const double scale = 1.0 / (s * s);
  for (int c = 0; c < in_shape.channels; ++c) {
    double* dst = din + c * in_shape.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = dout[(c * oh + oy) * ow + ox] * scale;
        for (int y = oy * s; y < oy * s + s; ++y) {
          for (int x = ox * s; x < ox * s + s; ++x) dst[y * in_shape.width + x] += g;
        }
      }
    }
  }
}

void dense_forward(const Dense& dense, const double* in, double* out) {
  for (int o = 0; o < dense.out_features; ++o) {
    const double* row = dense.weight.data() + static_cast<std::size_t>(o) * dense.in_features;
    double acc = 0.0;
    for (int i = 0; i < dense.in_features; ++i) acc += row[i] * in[i];
    out[o] = acc + dense.bias[o];
  }
}

void dense_backward(const Dense& dense, const double* in, const double* dout, double* din,
                    double* dweight, double* dbias) {
  for (int o = 0; o < dense.out_features; ++o) {
    const double g = dout[o];
    const double* row = dense.weight.data() + static_cast<std::size_t>(o) * dense.in_features;
    if (din != nullptr) {
      for (int i = 0; i < dense.in_features; ++i) din[i] += row[i] * g;
    }
    if (dweight != nullptr) {
      double* drow = dweight + static_cast<std::size_t>(o) * dense.in_features;
      for (int i = 0; i < dense.in_features; ++i) drow[i] += g * in[i];
    }
    if (dbias != nullptr) dbias[o] += g;
  }
}

// Activations of every layer; acts[0] is the input, acts[i + 1] the output of layer i.
struct Tape {
  std::vector<std::vector<double>> acts;
  std::vector<Shape> shapes;
};

void check_input(const ModelWeights& model, const Image& image) {
  if (!(image.shape() == model.input_shape)) {
    throw InvalidArgument("input shape " + image.shape().str() + " does not match model input " +
                          model.input_shape.str());
  }
}

void run_forward(const ModelWeights& model, const Image& image, Tape& tape, bool check_finite) {
  check_input(model, image);
  const std::size_t n = model.layers.size();
  tape.acts.resize(n + 1);
  tape.shapes.resize(n + 1);
  tape.acts[0] = image.storage();
  tape.shapes[0] = image.shape();
  if (check_finite && !all_finite(tape.acts[0])) {
    throw NumericalError("non-finite value in model input");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& layer = model.layers[i];
    const Shape in_shape = tape.shapes[i];
    const Shape out_shape = output_shape(layer, in_shape);
    const double* in = tape.acts[i].data();
    std::vector<double>& out = tape.acts[i + 1];
    out.assign(out_shape.size(), 0.0);
    std::visit(Overloaded{
                   [&](const Conv2d& conv) { conv_forward(conv, in_shape, in, out.data()); },
                   [&](const Relu&) {
                     for (std::size_t j = 0; j < out.size(); ++j) out[j] = in[j] > 0.0 ? in[j] : 0.0;
                   },
                   [&](const AvgPool& pool) { pool_forward(pool, in_shape, in, out.data()); },
                   [&](const Dense& dense) { dense_forward(dense, in, out.data()); },
               },
               layer);
    tape.shapes[i + 1] = out_shape;
    if (check_finite && !all_finite(out)) {
      throw NumericalError("non-finite activation in layer " + std::to_string(i) + " (" +
                           layer_name(layer) + ")");
    }
  }
  if (tape.shapes[n].size() != static_cast<std::size_t>(model.num_classes)) {
    throw InvalidArgument("model produces " + std::to_string(tape.shapes[n].size()) +
                          " outputs but declares " + std::to_string(model.num_classes) + " classes");
  }
}

// Propagates dlogits back through the tape. Either output may be null.
void run_backward(const ModelWeights& model, const Tape& tape, std::vector<double> grad,
                  std::vector<double>* input_grad, ParamGrads* param_grads) {
  const std::size_t n = model.layers.size();
  for (std::size_t ii = n; ii-- > 0;) {
    const Layer& layer = model.layers[ii];
    const bool need_input = ii > 0 || input_grad != nullptr;
    std::vector<double> din(need_input ? tape.acts[ii].size() : 0, 0.0);
    double* din_ptr = need_input ? din.data() : nullptr;
    const double* in = tape.acts[ii].data();
    std::visit(
        Overloaded{
            [&](const Conv2d& conv) {
              conv_backward(conv, tape.shapes[ii], in, grad.data(), din_ptr,
                            param_grads ? param_grads->weight[ii].data() : nullptr,
                            param_grads ? param_grads->bias[ii].data() : nullptr);
            },
            [&](const Relu&) {
              if (din_ptr == nullptr) return;
              for (std::size_t j = 0; j < din.size(); ++j) din[j] = in[j] > 0.0 ? grad[j] : 0.0;
            },
            [&](const AvgPool& pool) {
              if (din_ptr != nullptr) pool_backward(pool, tape.shapes[ii], grad.data(), din_ptr);
            },
            [&](const Dense& dense) {
              dense_backward(dense, in, grad.data(), din_ptr,
                             param_grads ? param_grads->weight[ii].data() : nullptr,
                             param_grads ? param_grads->bias[ii].data() : nullptr);
            },
        },
        layer);
    if (!need_input) return;
    if (!all_finite(din)) {
      throw NumericalError("non-finite gradient entering layer " + std::to_string(ii) + " (" +
                           layer_name(layer) + ")");
    }
    grad = std::move(din);
  }
  if (input_grad != nullptr) *input_grad = std::move(grad);
}

}  // namespace

std::string layer_name(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const Conv2d&) { return std::string("conv2d"); },
                        [](const Relu&) { return std::string("relu"); },
                        [](const AvgPool&) { return std::string("avgpool"); },
                        [](const Dense&) { return std::string("dense"); },
                    },
                    layer);
}

ParamGrads ParamGrads::zeros_like(const ModelWeights& model) {
  ParamGrads g;
  for (const Layer& layer : model.layers) {
    std::visit(Overloaded{
                   [&](const Conv2d& c) {
                     g.weight.emplace_back(c.weight.size(), 0.0);
                     g.bias.emplace_back(c.bias.size(), 0.0);
                   },
                   [&](const Dense& d) {
                     g.weight.emplace_back(d.weight.size(), 0.0);
                     g.bias.emplace_back(d.bias.size(), 0.0);
                   },
                   [&](const auto&) {
                     g.weight.emplace_back();
                     g.bias.emplace_back();
                   },
               },
               layer);
  }
  return g;
}

void ParamGrads::clear() {
  for (auto& w : weight) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

double cross_entropy(std::span<const double> logits, int label, std::span<double> dlogits) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  if (!dlogits.empty()) {
    for (std::size_t i = 0; i < logits.size(); ++i) dlogits[i] = std::exp(logits[i] - log_z);
    dlogits[label] -= 1.0;
  }
  return log_z - logits[label];
}

Logits forward(const ModelWeights& model, const Image& image) {
  Tape tape;
  run_forward(model, image, tape, false);
  return std::move(tape.acts.back());
}

int predict(const ModelWeights& model, const Image& image) { return argmax(forward(model, image)); }

LossGrad loss_and_input_grad(const ModelWeights& model, const Image& image, int label) {
  if (label < 0 || label >= model.num_classes) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range");
  }
  Tape tape;
  run_forward(model, image, tape, true);
  std::vector<double> dlogits(model.num_classes);
  const double loss = cross_entropy(tape.acts.back(), label, dlogits);
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss at softmax cross-entropy");
  std::vector<double> grad;
  run_backward(model, tape, std::move(dlogits), &grad, nullptr);
  return {loss, Image(image.shape(), std::move(grad))};
}

double loss_only(const ModelWeights& model, const Image& image, int label) {
  const Logits logits = forward(model, image);
  return cross_entropy(logits, label);
}

std::vector<bool> relu_pattern(const ModelWeights& model, const Image& image, Logits* logits) {
  Tape tape;
  run_forward(model, image, tape, true);
  if (logits) *logits = tape.acts.back();
  std::vector<bool> pattern;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (!std::holds_alternative<Relu>(model.layers[i])) continue;
    for (double v : tape.acts[i]) pattern.push_back(v > 0.0);
  }
  return pattern;
}

double accumulate_param_grads(const ModelWeights& model, const Image& image, int label,
                              ParamGrads& grads) {
  Tape tape;
  run_forward(model, image, tape, false);
  std::vector<double> dlogits(model.num_classes);
  const double loss = cross_entropy(tape.acts.back(), label, dlogits);
  run_backward(model, tape, std::move(dlogits), nullptr, &grads);
  return loss;
}

Image finite_diff_grad(const std::function<double(const Image&)>& fn, const Image& image,
                       double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite difference step must be positive");
  Image grad(image.shape());
  Image probe = image;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = fn(probe);
    probe[i] = orig - h;
    const double down = fn(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace l2t
