#include "transforms.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dct.hpp"
#include "json.hpp"

namespace l2t {

// Sparse bilinear resampling map shared by all channels: output pixel p
// reads sum_j weight[p][j] * in[index[p][j]] (index -1 = unused tap).
struct Warp {
  std::vector<std::array<std::int32_t, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

struct OpCatalog::Impl {
  Shape shape;
  std::vector<Category> categories;
  std::vector<OpSpec> ops;
  std::vector<std::shared_ptr<const Warp>> warps;  // null for non-geometric ops
  std::vector<double> row_basis;
  std::vector<double> col_basis;
  std::shared_ptr<const std::vector<Image>> aux_pool;
};

namespace {

constexpr std::array<double, 10> kPadSizes = {246.5, 257.6, 268.8, 280.0, 291.2,
                                              302.4, 313.6, 324.8, 336.0, 347.2};
constexpr std::array<int, 10> kBlockCounts = {4, 9, 16, 25, 36, 49, 64, 81, 100, 121};

int isqrt(int n) {
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

// Exact cos/sin for multiples of 90 degrees so that 360 is the identity.
std::pair<double, double> cos_sin_degrees(double degrees) {
  const double d = std::fmod(degrees, 360.0);
  if (d == 0.0) return {1.0, 0.0};
  if (d == 90.0) return {0.0, 1.0};
  if (d == 180.0) return {-1.0, 0.0};
  if (d == 270.0) return {0.0, -1.0};
  const double r = d * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

// Output pixel (y, x) samples the input at
//   (sy, sx) = center + A · ((y, x) - center) + (ty, tx)
// with A = [[a_yy, a_yx], [a_xy, a_xx]] and zero outside the frame.
std::shared_ptr<const Warp> affine_warp(Shape s, double a_yy, double a_yx, double a_xy, double a_xx,
                                        double ty, double tx) {
  auto warp = std::make_shared<Warp>();
  const int h = s.height;
  const int w = s.width;
  const double cy = (h - 1) / 2.0;
  const double cx = (w - 1) / 2.0;
  warp->index.resize(s.plane());
  warp->weight.resize(s.plane());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dy = y - cy;
      const double dx = x - cx;
      const double sy = cy + (a_yy * dy + a_yx * dx) + ty;
      const double sx = cx + (a_xy * dy + a_xx * dx) + tx;
      const double fy0 = std::floor(sy);
      const double fx0 = std::floor(sx);
      const int y0 = static_cast<int>(fy0);
      const int x0 = static_cast<int>(fx0);
      const double fy = sy - fy0;
      const double fx = sx - fx0;
      const std::array<int, 4> tap_y = {y0, y0, y0 + 1, y0 + 1};
      const std::array<int, 4> tap_x = {x0, x0 + 1, x0, x0 + 1};
      const std::array<double, 4> tap_w = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx};
      auto& idx = warp->index[y * w + x];
      auto& wt = warp->weight[y * w + x];
      int n = 0;
      for (int j = 0; j < 4; ++j) {
        if (tap_w[j] == 0.0 || tap_y[j] < 0 || tap_y[j] >= h || tap_x[j] < 0 || tap_x[j] >= w) continue;
        idx[n] = tap_y[j] * w + tap_x[j];
        wt[n] = tap_w[j];
        ++n;
      }
      for (; n < 4; ++n) {
        idx[n] = -1;
        wt[n] = 0.0;
      }
    }
  }
  return warp;
}

std::shared_ptr<const Warp> build_warp(const OpSpec& op, Shape s) {
  switch (op.category) {
    case Category::kRotate: {
      const auto [c, sn] = cos_sin_degrees(op.value);
      return affine_warp(s, c, -sn, sn, c, 0.0, 0.0);
    }
    case Category::kResize: {
      const double keep = 1.0 - op.value / 2.0;
      return affine_warp(s, keep, 0.0, 0.0, keep, 0.0, 0.0);
    }
    case Category::kCrop:
      return affine_warp(s, op.value, 0.0, 0.0, op.value, 0.0, 0.0);
    case Category::kPad: {
      const double zoom = op.value / kReferenceSize;
      return affine_warp(s, zoom, 0.0, 0.0, zoom, 0.0, 0.0);
    }
    case Category::kTranslate: {
      const double sy = std::round(op.value * s.height / kReferenceSize);
      const double sx = std::round(op.value * s.width / kReferenceSize);
      return affine_warp(s, 1.0, 0.0, 0.0, 1.0, -sy, -sx);
    }
    default:
      return nullptr;
  }
}

void warp_forward(const Warp& warp, Shape s, const Image& in, Image& out) {
  const std::size_t plane = s.plane();
  for (int c = 0; c < s.channels; ++c) {
    const double* src = in.data() + c * plane;
    double* dst = out.data() + c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const auto& idx = warp.index[p];
      const auto& wt = warp.weight[p];
      double acc = 0.0;
      for (int j = 0; j < 4 && idx[j] >= 0; ++j) acc += wt[j] * src[idx[j]];
      dst[p] = acc;
    }
  }
}

void warp_transpose(const Warp& warp, Shape s, const Image& up, Image& out) {
  const std::size_t plane = s.plane();
  for (int c = 0; c < s.channels; ++c) {
    const double* g = up.data() + c * plane;
    double* dst = out.data() + c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const auto& idx = warp.index[p];
      const auto& wt = warp.weight[p];
      for (int j = 0; j < 4 && idx[j] >= 0; ++j) dst[idx[j]] += wt[j] * g[p];
    }
  }
}

// Half-open [begin, end) bounds of block i of n along an axis of length len.
std::pair<int, int> block_bounds(int i, int n, int len) {
  return {i * len / n, (i + 1) * len / n};
}

void zero_block(Image& img, int block, int blocks_per_axis) {
  const Shape s = img.shape();
  const auto [y0, y1] = block_bounds(block / blocks_per_axis, blocks_per_axis, s.height);
  const auto [x0, x1] = block_bounds(block % blocks_per_axis, blocks_per_axis, s.width);
  for (int c = 0; c < s.channels; ++c) {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) img.at(c, y, x) = 0.0;
    }
  }
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(static_cast<std::uint64_t>(i))]);
  return p;
}

// Source index sequence when the strips of an axis are concatenated in `order`.
std::vector<int> concatenate_strips(const std::vector<int>& order, int len) {
  const int n = static_cast<int>(order.size());
  std::vector<int> src;
  src.reserve(len);
  for (int k : order) {
    const auto [b, e] = block_bounds(k, n, len);
    for (int i = b; i < e; ++i) src.push_back(i);
  }
  return src;
}

// Splits rows into g strips and reorders them; every output row strip then has
// its column strips reordered independently. The result is a bijection on pixels.
std::vector<std::int32_t> block_shuffle_permutation(Shape s, int g, Rng& rng) {
  const std::vector<int> row_order = random_permutation(g, rng);
  const std::vector<int> src_rows = concatenate_strips(row_order, s.height);
  std::vector<std::int32_t> perm(s.plane());
  int out_y = 0;
  for (int i = 0; i < g; ++i) {
    const auto [b, e] = block_bounds(row_order[i], g, s.height);
    const std::vector<int> src_cols = concatenate_strips(random_permutation(g, rng), s.width);
    for (int r = 0; r < e - b; ++r, ++out_y) {
      for (int x = 0; x < s.width; ++x) {
        perm[out_y * s.width + x] = src_rows[out_y] * s.width + src_cols[x];
      }
    }
  }
  return perm;
}

void spectral_multiply(const OpCatalog::Impl& impl, const std::vector<double>& gain, const Image& in, Image& out) {
  const Shape s = impl.shape;
  const std::size_t plane = s.plane();
  std::vector<double> coeffs(plane);
  for (int c = 0; c < s.channels; ++c) {
    dct2(impl.row_basis, impl.col_basis, s.height, s.width, in.channel(c), coeffs);
    for (std::size_t i = 0; i < plane; ++i) coeffs[i] *= gain[c * plane + i];
    idct2(impl.row_basis, impl.col_basis, s.height, s.width, coeffs, out.channel(c));
  }
}

void check_trace(const OpCatalog::Impl& impl, std::size_t index, const ApplyTrace& trace) {
  if (index >= impl.ops.size()) throw InvalidArgument("op index " + std::to_string(index) + " out of range");
  if (trace.op_index != index || trace.category != impl.ops[index].category) {
    throw InvalidArgument("trace for op " + std::to_string(trace.op_index) + " does not belong to op " +
                          std::to_string(index));
  }
  const OpSpec& op = impl.ops[index];
  const Shape s = impl.shape;
  bool ok = true;
  switch (op.category) {
    case Category::kMask:
      ok = trace.masked_block >= 0 && trace.masked_block < static_cast<int>(op.value);
      break;
    case Category::kShuffle:
      ok = trace.permutation.size() == s.plane();
      break;
    case Category::kSpectrum:
      ok = trace.spectrum_gain.size() == s.size();
      break;
    case Category::kMixup:
      ok = trace.mix_partners.size() == static_cast<std::size_t>(op.mix_count);
      for (std::size_t i : trace.mix_partners) ok = ok && i < impl.aux_pool->size();
      break;
    default:
      break;
  }
  if (!ok) throw InvalidArgument("malformed trace for op " + op.label());
}

}  // namespace

const std::vector<Category>& all_categories() {
  static const std::vector<Category> cats = {Category::kRotate, Category::kScale,     Category::kResize,
                                             Category::kPad,    Category::kMask,      Category::kTranslate,
                                             Category::kShuffle, Category::kSpectrum, Category::kMixup,
                                             Category::kCrop};
  return cats;
}

std::string category_name(Category category) {
  switch (category) {
    case Category::kRotate: return "rotate";
    case Category::kScale: return "scale";
    case Category::kResize: return "resize";
    case Category::kPad: return "pad";
    case Category::kMask: return "mask";
    case Category::kTranslate: return "translate";
    case Category::kShuffle: return "shuffle";
    case Category::kSpectrum: return "spectrum";
    case Category::kMixup: return "mixup";
    case Category::kCrop: return "crop";
  }
  return "unknown";
}

Category parse_category(std::string_view name) {
  for (Category c : all_categories()) {
    if (category_name(c) == name) return c;
  }
  throw ConfigError("unknown transformation category '" + std::string(name) + "'");
}

bool is_stochastic(Category category) {
  return category == Category::kMask || category == Category::kShuffle || category == Category::kSpectrum ||
         category == Category::kMixup;
}

std::string OpSpec::label() const {
  std::ostringstream os;
  os << category_name(category) << ":" << value;
  if (category == Category::kMixup) os << "x" << mix_count;
  return os.str();
}

OpSpec make_op(Category category, int param_index) {
  if (param_index < 0 || param_index >= kOpsPerCategory) {
    throw InvalidArgument("param_index " + std::to_string(param_index) + " outside 0..9");
  }
  const int i = param_index;
  OpSpec op;
  op.category = category;
  op.param_index = i;
  switch (category) {
    case Category::kRotate: op.value = 36.0 * (i + 1); break;
    case Category::kScale: op.value = std::ldexp(1.0, -(i + 1)); break;
    case Category::kResize: op.value = 0.1 * i; break;
    case Category::kPad: op.value = kPadSizes[i]; break;
    case Category::kMask:
    case Category::kShuffle: op.value = kBlockCounts[i]; break;
    case Category::kTranslate: op.value = 10.0 * (i + 1); break;
    case Category::kSpectrum: op.value = 0.1 * (i + 1); break;
    case Category::kMixup:
      op.value = i < 5 ? 0.2 : 0.4;
      op.mix_count = i % 5 + 1;
      break;
    case Category::kCrop: op.value = 0.5 + 0.05 * i; break;
  }
  return op;
}

OpCatalog OpCatalog::build(std::span<const Category> enabled, Shape shape, std::vector<Image> aux_pool) {
  if (enabled.empty()) throw ConfigError("at least one transformation category must be enabled");
  if (shape.channels < 1 || shape.height < 1 || shape.width < 1) {
    throw InvalidArgument("invalid catalog shape " + shape.str());
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = shape;
  for (Category c : enabled) {
    for (Category seen : impl->categories) {
      if (seen == c) throw ConfigError("category '" + category_name(c) + "' enabled twice");
    }
    impl->categories.push_back(c);
    if (c == Category::kMixup) {
      if (aux_pool.empty()) throw ConfigError("mixup is enabled but the auxiliary image pool is empty");
      for (const Image& img : aux_pool) require_same_shape(img.shape(), shape, "mixup pool image");
    }
    for (int i = 0; i < kOpsPerCategory; ++i) {
      impl->ops.push_back(make_op(c, i));
      impl->warps.push_back(build_warp(impl->ops.back(), shape));
    }
  }
  impl->row_basis = dct_basis(shape.height);
  impl->col_basis = dct_basis(shape.width);
  impl->aux_pool = std::make_shared<const std::vector<Image>>(std::move(aux_pool));
  OpCatalog cat;
  cat.impl_ = std::move(impl);
  return cat;
}

std::size_t OpCatalog::size() const { return impl_->ops.size(); }
const OpSpec& OpCatalog::op(std::size_t index) const { return impl_->ops.at(index); }
const Shape& OpCatalog::shape() const { return impl_->shape; }
std::span<const Category> OpCatalog::categories() const { return impl_->categories; }
std::size_t OpCatalog::aux_pool_size() const { return impl_->aux_pool->size(); }

std::size_t OpCatalog::find(Category category, int param_index) const {
  for (std::size_t i = 0; i < impl_->ops.size(); ++i) {
    if (impl_->ops[i].category == category && impl_->ops[i].param_index == param_index) return i;
  }
  throw InvalidArgument("catalog has no op " + category_name(category) + "[" + std::to_string(param_index) + "]");
}

OpCatalog OpCatalog::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InvalidArgument("op subset must be nonempty");
  auto impl = std::make_shared<Impl>();
  impl->shape = impl_->shape;
  impl->row_basis = impl_->row_basis;
  impl->col_basis = impl_->col_basis;
  impl->aux_pool = impl_->aux_pool;
  for (std::size_t i : indices) {
    if (i >= impl_->ops.size()) throw InvalidArgument("op index " + std::to_string(i) + " out of range");
    impl->ops.push_back(impl_->ops[i]);
    impl->warps.push_back(impl_->warps[i]);
    bool seen = false;
    for (Category c : impl->categories) seen = seen || c == impl_->ops[i].category;
    if (!seen) impl->categories.push_back(impl_->ops[i].category);
  }
  OpCatalog cat;
  cat.impl_ = std::move(impl);
  return cat;
}

std::string OpCatalog::to_json() const {
  nlohmann::ordered_json j;
  j["shape"] = {impl_->shape.channels, impl_->shape.height, impl_->shape.width};
  j["ops"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < impl_->ops.size(); ++i) {
    const OpSpec& op = impl_->ops[i];
    j["ops"].push_back({{"index", i},
                        {"category", category_name(op.category)},
                        {"param_index", op.param_index},
                        {"value", op.value},
                        {"mix_count", op.mix_count},
                        {"label", op.label()}});
  }
  return j.dump(2);
}

ApplyTrace sample_trace(const OpCatalog& catalog, std::size_t index, Rng& rng) {
  const OpCatalog::Impl& impl = catalog.impl();
  const OpSpec& op = catalog.op(index);
  ApplyTrace trace;
  trace.op_index = index;
  trace.category = op.category;
  switch (op.category) {
    case Category::kMask:
      trace.masked_block = static_cast<int>(rng.below(static_cast<std::uint64_t>(op.value)));
      break;
    case Category::kShuffle:
      trace.permutation = block_shuffle_permutation(impl.shape, isqrt(static_cast<int>(op.value)), rng);
      break;
    case Category::kSpectrum:
      trace.spectrum_gain.resize(impl.shape.size());
      for (double& g : trace.spectrum_gain) g = 1.0 + rng.uniform(-op.value, op.value);
      break;
    case Category::kMixup:
      for (int k = 0; k < op.mix_count; ++k) trace.mix_partners.push_back(rng.below(impl.aux_pool->size()));
      break;
    default:
      break;
  }
  return trace;
}

Image replay_op(const OpCatalog& catalog, const ApplyTrace& trace, const Image& image) {
  const OpCatalog::Impl& impl = catalog.impl();
  require_same_shape(image.shape(), impl.shape, "apply_op input");
  check_trace(impl, trace.op_index, trace);
  const OpSpec& op = impl.ops[trace.op_index];
  const Shape s = impl.shape;
  Image out(s);
  switch (op.category) {
    case Category::kRotate:
    case Category::kResize:
    case Category::kPad:
    case Category::kTranslate:
    case Category::kCrop:
      warp_forward(*impl.warps[trace.op_index], s, image, out);
      break;
    case Category::kScale:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = op.value * image[i];
      break;
    case Category::kMask:
      out = image;
      zero_block(out, trace.masked_block, isqrt(static_cast<int>(op.value)));
      break;
    case Category::kShuffle: {
      const std::size_t plane = s.plane();
      for (int c = 0; c < s.channels; ++c) {
        const double* src = image.data() + c * plane;
        double* dst = out.data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] = src[trace.permutation[p]];
      }
      break;
    }
    case Category::kSpectrum:
      spectral_multiply(impl, trace.spectrum_gain, image, out);
      break;
    case Category::kMixup: {
      const double keep = 1.0 - op.value;
      const double share = op.value / op.mix_count;
      for (std::size_t i = 0; i < out.size(); ++i) {
        double mix = 0.0;
        for (std::size_t k : trace.mix_partners) mix += (*impl.aux_pool)[k][i];
        out[i] = keep * image[i] + share * mix;
      }
      break;
    }
  }
  return out;
}

std::pair<Image, ApplyTrace> apply_op(const OpCatalog& catalog, std::size_t index, const Image& image, Rng& rng) {
  require_same_shape(image.shape(), catalog.shape(), "apply_op input");
  ApplyTrace trace = sample_trace(catalog, index, rng);
  Image out = replay_op(catalog, trace, image);
  return {std::move(out), std::move(trace)};
}

Image vjp_op(const OpCatalog& catalog, std::size_t index, const ApplyTrace& trace, const Image& upstream) {
  const OpCatalog::Impl& impl = catalog.impl();
  require_same_shape(upstream.shape(), impl.shape, "vjp_op upstream");
  check_trace(impl, index, trace);
  const OpSpec& op = impl.ops[index];
  const Shape s = impl.shape;
  Image grad(s);
  switch (op.category) {
    case Category::kRotate:
    case Category::kResize:
    case Category::kPad:
    case Category::kTranslate:
    case Category::kCrop:
      warp_transpose(*impl.warps[index], s, upstream, grad);
      break;
    case Category::kScale:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = op.value * upstream[i];
      break;
    case Category::kMask:
      grad = upstream;
      zero_block(grad, trace.masked_block, isqrt(static_cast<int>(op.value)));
      break;
    case Category::kShuffle: {
      const std::size_t plane = s.plane();
      for (int c = 0; c < s.channels; ++c) {
        const double* g = upstream.data() + c * plane;
        double* dst = grad.data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[trace.permutation[p]] = g[p];
      }
      break;
    }
    case Category::kSpectrum:
      // IDCT · diag(gain) · DCT is symmetric, so the transpose is the same map.
      spectral_multiply(impl, trace.spectrum_gain, upstream, grad);
      break;
    case Category::kMixup: {
      const double keep = 1.0 - op.value;
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = keep * upstream[i];
      break;
    }
  }
  return grad;
}

std::pair<Image, CompositeTrace> compose_apply(const OpCatalog& catalog, const Transformation& t,
                                               const Image& image, Rng& rng) {
  if (t.ops.empty()) throw InvalidArgument("a transformation needs at least one op");
  CompositeTrace trace;
  Image current = image;
  for (std::size_t index : t.ops) {
    auto [next, step] = apply_op(catalog, index, current, rng);
    current = std::move(next);
    trace.steps.push_back(std::move(step));
  }
  return {std::move(current), std::move(trace)};
}

Image compose_replay(const OpCatalog& catalog, const CompositeTrace& trace, const Image& image) {
  Image current = image;
  for (const ApplyTrace& step : trace.steps) current = replay_op(catalog, step, current);
  return current;
}

Image compose_vjp(const OpCatalog& catalog, const CompositeTrace& trace, const Image& upstream) {
  Image grad = upstream;
  for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it) {
    grad = vjp_op(catalog, it->op_index, *it, grad);
  }
  return grad;
}

}  // namespace l2t
