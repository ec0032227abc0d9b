#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gzsl_align/vocab_data.hpp"

namespace gzsl {

/// Layer widths `[in, h1, ..., out]` of a feedforward net. ReLU sits between
/// consecutive affine layers; the last layer has no activation.
struct MlpSpec {
  std::vector<std::size_t> layer_dims;

  void validate() const;
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }

  bool operator==(const MlpSpec&) const = default;
};

/// Weights are stored out × in, so layer l computes `weights[l] * a + biases[l]`.
struct MlpParams {
  MlpSpec spec;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpParams zeros(const MlpSpec& spec);
  void validate() const;
  std::size_t parameter_count() const;

  bool operator==(const MlpParams& other) const;
};

/// Activations cached by the forward pass; one column per batch element.
struct MlpTape {
  std::vector<Matrix> inputs;          // input to layer l (post-ReLU of layer l-1)
  std::vector<Matrix> pre_activations; // W_l a_l + b_l
};

struct MlpForward {
  Matrix output;
  MlpTape tape;
};

struct MlpBackward {
  MlpParams grads;
  Matrix grad_input;
};

// x is in × batch.
MlpForward mlp_forward(const MlpParams& params, const Matrix& x);
Vector mlp_apply(const MlpParams& params, const Vector& x);
Matrix mlp_apply(const MlpParams& params, const Matrix& x);

/// Backpropagates `grad_out` (out × batch). The ReLU subgradient at 0 is 0.
MlpBackward mlp_backward(const MlpParams& params, const MlpTape& tape, const Matrix& grad_out);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
MlpParams init_params(const MlpSpec& spec, std::uint64_t seed);

// Norms below this are clamped to it, so a zero vector has similarity 0 with
// everything.
inline constexpr double kCosineNormFloor = 1e-8;

double cosine_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

struct CosineGrad {
  double value;
  Vector grad_a;
  Vector grad_b;
};

// Gradient of the unclamped cosine.
CosineGrad cosine_with_grad(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

enum class EncoderMode { EndToEnd, Frozen };

/// Encoder (optional), visual mapper and semantic mapper. A missing encoder
/// passes precomputed features straight to the visual mapper.
struct ModelParams {
  std::optional<MlpParams> encoder;
  MlpParams visual_map;
  MlpParams semantic_map;

  void validate() const;
  std::size_t feature_dim() const;
  std::size_t semantic_dim() const { return semantic_map.spec.input_dim(); }
  std::size_t latent_dim() const { return visual_map.spec.output_dim(); }

  ModelParams zeros_like() const;
  bool operator==(const ModelParams&) const = default;
};

struct ArchSpec {
  std::size_t feature_dim = 1024;
  std::size_t semantic_dim = 768;
  std::vector<std::size_t> encoder_widths;  // empty: no encoder
  std::vector<std::size_t> hidden_widths{512, 256};
  std::size_t latent_dim = 128;

  MlpSpec encoder_spec() const;
  MlpSpec visual_spec() const;
  MlpSpec semantic_spec() const;
};

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed);

/// Named flat view over one parameter tensor, in Eigen (column-major) storage order.
struct TensorRef {
  std::string name;
  std::span<double> values;
};

struct ConstTensorRef {
  std::string name;
  std::span<const double> values;
};

/// Tensors in declared order: encoder (if any), visual_map, semantic_map;
/// within each net fc1.weight, fc1.bias, fc2.weight, ...
std::vector<TensorRef> tensors(ModelParams& params, bool include_encoder = true);
std::vector<ConstTensorRef> tensors(const ModelParams& params, bool include_encoder = true);

}  // namespace gzsl
