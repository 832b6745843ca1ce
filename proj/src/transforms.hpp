#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "image.hpp"
#include "rng.hpp"

namespace l2t {

enum class Category { kRotate, kScale, kResize, kPad, kMask, kTranslate, kShuffle, kSpectrum, kMixup, kCrop };

inline constexpr int kOpsPerCategory = 10;
// Grids below are defined on 224-pixel inputs and rescaled by size / 224.
inline constexpr double kReferenceSize = 224.0;

const std::vector<Category>& all_categories();
std::string category_name(Category category);
Category parse_category(std::string_view name);  // throws ConfigError
bool is_stochastic(Category category);

// One parameterized catalog operation. `value` holds the resolved parameter
// in the category's natural unit:
//   rotate    angle in degrees          scale     factor gamma
//   resize    resize rate               pad       padded size, 224-pixel units
//   mask      number of blocks          translate shift, 224-pixel units
//   shuffle   number of blocks          spectrum  noise strength
//   mixup     mix strength beta         crop      kept fraction of each side
// mixup additionally uses mix_count partner images.
struct OpSpec {
  Category category = Category::kRotate;
  int param_index = 0;
  double value = 0.0;
  int mix_count = 0;

  std::string label() const;
  bool operator==(const OpSpec&) const = default;
};

// Resolves (category, param_index) to its grid entry.
OpSpec make_op(Category category, int param_index);

// Stochastic state of one application: enough to replay the forward map
// bit-exactly and to evaluate its exact transpose.
struct ApplyTrace {
  std::size_t op_index = 0;
  Category category = Category::kRotate;
  int masked_block = -1;                    // mask
  std::vector<std::int32_t> permutation;    // shuffle: out pixel p reads in pixel permutation[p]
  std::vector<double> spectrum_gain;        // spectrum: per-coefficient multiplier, C×H×W
  std::vector<std::size_t> mix_partners;    // mixup: indices into the auxiliary pool

  bool operator==(const ApplyTrace&) const = default;
};

// Ordered op indices; ops[0] is applied first.
struct Transformation {
  std::vector<std::size_t> ops;
  bool operator==(const Transformation&) const = default;
};

struct CompositeTrace {
  std::vector<ApplyTrace> steps;
  bool operator==(const CompositeTrace&) const = default;
};

// Immutable, cheap to copy (shared internals). Geometric operations are
// precomputed as sparse bilinear resampling maps at build time.
class OpCatalog {
 public:
  // aux_pool supplies mixup partners; it must be nonempty when mixup is enabled.
  static OpCatalog build(std::span<const Category> enabled, Shape shape, std::vector<Image> aux_pool = {});

  std::size_t size() const;
  const OpSpec& op(std::size_t index) const;
  const Shape& shape() const;
  std::span<const Category> categories() const;
  std::size_t aux_pool_size() const;

  // Index of (category, param_index); throws InvalidArgument if absent.
  std::size_t find(Category category, int param_index) const;

  // Catalog restricted to the given ops (in the given order).
  OpCatalog subset(std::span<const std::size_t> indices) const;

  // {"shape": [...], "ops": [{"index", "category", "param_index", "value", "mix_count", "label"}]}
  std::string to_json() const;

  struct Impl;
  const Impl& impl() const { return *impl_; }

 private:
  std::shared_ptr<const Impl> impl_;
};

// Draws the random state for one application of op `index`.
ApplyTrace sample_trace(const OpCatalog& catalog, std::size_t index, Rng& rng);

// Deterministic forward map given a trace.
Image replay_op(const OpCatalog& catalog, const ApplyTrace& trace, const Image& image);

std::pair<Image, ApplyTrace> apply_op(const OpCatalog& catalog, std::size_t index, const Image& image, Rng& rng);

// Exact transpose-Jacobian action of the op recorded in `trace`.
Image vjp_op(const OpCatalog& catalog, std::size_t index, const ApplyTrace& trace, const Image& upstream);

std::pair<Image, CompositeTrace> compose_apply(const OpCatalog& catalog, const Transformation& t,
                                               const Image& image, Rng& rng);
Image compose_replay(const OpCatalog& catalog, const CompositeTrace& trace, const Image& image);
Image compose_vjp(const OpCatalog& catalog, const CompositeTrace& trace, const Image& upstream);

}  // namespace l2t
