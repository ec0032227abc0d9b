#include "gzsl_align/optim.hpp"

#include <cmath>

#include "gzsl_align/errors.hpp"

namespace gzsl {

void AdamState::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (m.size() != names.size() || v.size() != names.size()) {
    throw DimensionMismatch("Adam moment buffers do not match the tensor list");
  }
}

void adam_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionMismatch("Adam: " + std::to_string(params.size()) + " parameter tensors, " +
                            std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                            " state buffers");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].values.size() != grads[t].values.size() || params[t].values.size() != state.m[t].size()) {
      throw DimensionMismatch("Adam: shape mismatch in tensor '" + params[t].name + "'");
    }
    for (double g : grads[t].values) {
      if (!std::isfinite(g)) throw NonFiniteGradient(grads[t].name);
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto p = params[k].values;
    auto g = grads[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void PlateauScheduler::validate() const {
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
  if (patience < 1) throw ConfigError("plateau patience must be >= 1");
  if (!(min_delta >= 0.0)) throw ConfigError("plateau min_delta must be >= 0");
}

bool PlateauScheduler::observe(double val_loss) {
  if (val_loss < best - min_delta) {
    best = val_loss;
    epochs_since_improve = 0;
    return false;
  }
  if (++epochs_since_improve >= patience) {
    epochs_since_improve = 0;
    ++reductions;
    return true;
  }
  return false;
}

double PlateauScheduler::scaled_lr(double base_lr) const {
  return base_lr * std::pow(factor, static_cast<double>(reductions));
}

}  // namespace gzsl
