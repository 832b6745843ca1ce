#include <cmath>
#include <numbers>
#include <numeric>

#include "models.hpp"

namespace l2t {
namespace {

template <class F>
void for_each_param(ModelWeights& m, F&& f) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    if (auto* c = std::get_if<Conv2d>(&m.layers[i])) {
      f(i, c->weight, c->bias);
    } else if (auto* d = std::get_if<Dense>(&m.layers[i])) {
      f(i, d->weight, d->bias);
    }
  }
}

void round_to_float(ModelWeights& m) {
  for_each_param(m, [](std::size_t, std::vector<double>& w, std::vector<double>& b) {
    for (double& v : w) v = static_cast<double>(static_cast<float>(v));
    for (double& v : b) v = static_cast<double>(static_cast<float>(v));
  });
}

}  // namespace

ModelWeights train_model(ArchId arch, const SyntheticDataset& data, const TrainHyper& hyper,
                         std::uint64_t seed) {
  if (data.size() == 0) throw InvalidArgument("cannot train on an empty dataset");
  if (hyper.epochs < 1 || hyper.batch_size < 1 || !(hyper.learning_rate > 0.0)) {
    throw InvalidArgument("training hyperparameters must be positive");
  }
  const Shape shape = data.images.front().shape();
  Rng init_rng = Rng::substream(seed, "train-init");
  ModelWeights model = make_model(arch, shape, data.num_classes, init_rng);
  model.training_seed = seed;

  ParamGrads grads = ParamGrads::zeros_like(model);
  ParamGrads velocity = ParamGrads::zeros_like(model);

  std::vector<std::size_t> order(data.size());
  const std::size_t batches_per_epoch = (data.size() + hyper.batch_size - 1) / hyper.batch_size;
  const double total_steps = static_cast<double>(batches_per_epoch) * hyper.epochs;
  std::size_t step = 0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::substream(seed, "train-shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      grads.clear();
      try {
        for (std::size_t j = start; j < end; ++j) {
          epoch_loss += accumulate_param_grads(model, data.images[order[j]], data.labels[order[j]], grads);
        }
      } catch (const NumericalError& e) {
        throw TrainingError(arch_name(arch) + " training diverged in epoch " + std::to_string(epoch + 1) + ": " +
                                e.what(),
                            epoch + 1);
      }
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      const double lr = hyper.learning_rate * 0.5 *
                        (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      for_each_param(model, [&](std::size_t li, std::vector<double>& w, std::vector<double>& b) {
        std::vector<double>& gw = grads.weight[li];
        std::vector<double>& vw = velocity.weight[li];
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double g = gw[k] * inv_batch + hyper.weight_decay * w[k];
          vw[k] = hyper.momentum * vw[k] + g;
          w[k] -= lr * vw[k];
        }
        std::vector<double>& gb = grads.bias[li];
        std::vector<double>& vb = velocity.bias[li];
        for (std::size_t k = 0; k < b.size(); ++k) {
          vb[k] = hyper.momentum * vb[k] + gb[k] * inv_batch;
          b[k] -= lr * vb[k];
        }
      });
      ++step;
    }
    bool finite = std::isfinite(epoch_loss);
    for_each_param(model, [&](std::size_t, std::vector<double>& w, std::vector<double>& b) {
      finite = finite && all_finite(w) && all_finite(b);
    });
    if (!finite) {
      throw TrainingError(arch_name(arch) + " training diverged in epoch " + std::to_string(epoch + 1),
                          epoch + 1);
    }
  }
  round_to_float(model);
  return model;
}

double accuracy(const ModelWeights& model, const SyntheticDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(model, data.images[i]) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double disagreement(const ModelWeights& a, const ModelWeights& b, const SyntheticDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t differ = 0;
  for (const Image& img : data.images) {
    if (predict(a, img) != predict(b, img)) ++differ;
  }
  return static_cast<double>(differ) / static_cast<double>(data.size());
}

std::vector<std::size_t> select_evaluation_images(const Zoo& zoo, const SyntheticDataset& data,
                                                  std::size_t count) {
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < data.size() && picked.size() < count; ++i) {
    bool ok = true;
    for (const ModelWeights& m : zoo.members) {
      if (predict(m, data.images[i]) != data.labels[i]) {
        ok = false;
        break;
      }
    }
    if (ok) picked.push_back(i);
  }
  return picked;
}

}  // namespace l2t
