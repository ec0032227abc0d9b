#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gzsl_align/latent_net.hpp"

namespace gzsl {

struct AdamState {
  std::size_t step_count = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<std::string> names;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  /// Zeroed moment buffers shaped like `params`.
  template <typename Tensors>
  static AdamState for_tensors(const Tensors& params, double lr) {
    AdamState s;
    s.lr = lr;
    for (const auto& t : params) {
      s.names.push_back(t.name);
      s.m.emplace_back(t.values.size(), 0.0);
      s.v.emplace_back(t.values.size(), 0.0);
    }
    s.validate();
    return s;
  }

  void validate() const;
};

/// One bias-corrected Adam update applied in place.
///
/// Every gradient is checked before any parameter moves; a NaN or infinite
/// entry raises NonFiniteGradient naming the tensor.
void adam_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads, AdamState& state);

/// Reduce-on-plateau schedule. An observation improves when it is below
/// `best - min_delta`; after `patience` consecutive non-improving
/// observations the learning rate is multiplied by `factor`.
struct PlateauScheduler {
  std::size_t patience = 10;
  double factor = 0.01;
  double min_delta = 1e-6;
  double best = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improve = 0;
  std::size_t reductions = 0;

  void validate() const;

  /// Returns true when this observation triggered a reduction.
  bool observe(double val_loss);

  /// base_lr * factor^reductions.
  double scaled_lr(double base_lr) const;
};

}  // namespace gzsl
