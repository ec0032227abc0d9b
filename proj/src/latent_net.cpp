#include "gzsl_align/latent_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gzsl_align/errors.hpp"
#include "rng.hpp"

namespace gzsl {

void MlpSpec::validate() const {
  if (layer_dims.size() < 2) {
    throw ConfigError("network spec needs at least an input and an output width");
  }
  for (std::size_t w : layer_dims) {
    if (w == 0) throw ConfigError("network layer widths must be positive");
  }
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    auto in = static_cast<Eigen::Index>(spec.layer_dims[l]);
    auto out = static_cast<Eigen::Index>(spec.layer_dims[l + 1]);
    p.weights.push_back(Matrix::Zero(out, in));
    p.biases.push_back(Vector::Zero(out));
  }
  return p;
}

void MlpParams::validate() const {
  spec.validate();
  if (weights.size() != spec.num_layers() || biases.size() != spec.num_layers()) {
    throw DimensionMismatch("network has " + std::to_string(weights.size()) + " weight tensors, spec expects " +
                            std::to_string(spec.num_layers()));
  }
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    auto in = static_cast<Eigen::Index>(spec.layer_dims[l]);
    auto out = static_cast<Eigen::Index>(spec.layer_dims[l + 1]);
    if (weights[l].rows() != out || weights[l].cols() != in || biases[l].size() != out) {
      throw DimensionMismatch("layer " + std::to_string(l + 1) + " shape does not match its spec");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw Error("layer " + std::to_string(l + 1) + " has non-finite parameters");
    }
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (spec != other.spec || weights.size() != other.weights.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols() ||
        weights[l] != other.weights[l] || biases[l] != other.biases[l]) {
      return false;
    }
  }
  return true;
}

MlpForward mlp_forward(const MlpParams& params, const Matrix& x) {
  const std::size_t layers = params.spec.num_layers();
  if (static_cast<std::size_t>(x.rows()) != params.spec.input_dim()) {
    throw DimensionMismatch("network input has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(params.spec.input_dim()));
  }
  MlpForward fwd;
  fwd.tape.inputs.reserve(layers);
  fwd.tape.pre_activations.reserve(layers);
  Matrix a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    fwd.tape.inputs.push_back(std::move(a));
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
    } else {
      fwd.output = z;
    }
    fwd.tape.pre_activations.push_back(std::move(z));
  }
  return fwd;
}

Matrix mlp_apply(const MlpParams& params, const Matrix& x) {
  const std::size_t layers = params.spec.num_layers();
  if (static_cast<std::size_t>(x.rows()) != params.spec.input_dim()) {
    throw DimensionMismatch("network input has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(params.spec.input_dim()));
  }
  Matrix a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    a = (l + 1 < layers) ? Matrix(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Vector mlp_apply(const MlpParams& params, const Vector& x) {
  return mlp_apply(params, Matrix(x)).col(0);
}

MlpBackward mlp_backward(const MlpParams& params, const MlpTape& tape, const Matrix& grad_out) {
  const std::size_t layers = params.spec.num_layers();
  if (tape.inputs.size() != layers || tape.pre_activations.size() != layers) {
    throw DimensionMismatch("tape does not belong to this network");
  }
  if (static_cast<std::size_t>(grad_out.rows()) != params.spec.output_dim() ||
      grad_out.cols() != tape.pre_activations.back().cols()) {
    throw DimensionMismatch("output gradient shape does not match the forward pass");
  }
  MlpBackward back;
  back.grads = MlpParams::zeros(params.spec);
  Matrix g = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      g = (tape.pre_activations[l].array() > 0.0).select(g, 0.0);
    }
    back.grads.weights[l].noalias() = g * tape.inputs[l].transpose();
    back.grads.biases[l] = g.rowwise().sum();
    g = params.weights[l].transpose() * g;
  }
  back.grad_input = std::move(g);
  return back;
}

MlpParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  }
  return p;
}

double cosine_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine similarity of vectors with sizes " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()));
  }
  const double na = std::max(a.norm(), kCosineNormFloor);
  const double nb = std::max(b.norm(), kCosineNormFloor);
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

CosineGrad cosine_with_grad(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("cosine similarity of vectors with sizes " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()));
  }
  const double ra = a.norm(), rb = b.norm();
  const double na = std::max(ra, kCosineNormFloor);
  const double nb = std::max(rb, kCosineNormFloor);
  const double c = a.dot(b) / (na * nb);
  // d/da (a.b / |a||b|) = b/(|a||b|) - c a/|a|^2; a floored norm is constant.
  Vector ga = b / (na * nb), gb = a / (na * nb);
  if (ra >= kCosineNormFloor) ga -= (c / (na * na)) * a;
  if (rb >= kCosineNormFloor) gb -= (c / (nb * nb)) * b;
  return {std::clamp(c, -1.0, 1.0), std::move(ga), std::move(gb)};
}

void ModelParams::validate() const {
  visual_map.validate();
  semantic_map.validate();
  if (visual_map.spec.output_dim() != semantic_map.spec.output_dim()) {
    throw DimensionMismatch("visual and semantic mappers must share the latent width");
  }
  if (encoder) {
    encoder->validate();
    if (encoder->spec.output_dim() != visual_map.spec.input_dim()) {
      throw DimensionMismatch("encoder output width must equal the visual mapper input width");
    }
  }
}

std::size_t ModelParams::feature_dim() const {
  return encoder ? encoder->spec.input_dim() : visual_map.spec.input_dim();
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z{std::nullopt, MlpParams::zeros(visual_map.spec), MlpParams::zeros(semantic_map.spec)};
  if (encoder) z.encoder = MlpParams::zeros(encoder->spec);
  return z;
}

MlpSpec ArchSpec::encoder_spec() const {
  MlpSpec spec{{feature_dim}};
  spec.layer_dims.insert(spec.layer_dims.end(), encoder_widths.begin(), encoder_widths.end());
  return spec;
}

MlpSpec ArchSpec::visual_spec() const {
  MlpSpec spec{{encoder_widths.empty() ? feature_dim : encoder_widths.back()}};
  spec.layer_dims.insert(spec.layer_dims.end(), hidden_widths.begin(), hidden_widths.end());
  spec.layer_dims.push_back(latent_dim);
  return spec;
}

MlpSpec ArchSpec::semantic_spec() const {
  MlpSpec spec{{semantic_dim}};
  spec.layer_dims.insert(spec.layer_dims.end(), hidden_widths.begin(), hidden_widths.end());
  spec.layer_dims.push_back(latent_dim);
  return spec;
}

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams p{std::nullopt, init_params(arch.visual_spec(), detail::derive_seed(seed, 1)),
                init_params(arch.semantic_spec(), detail::derive_seed(seed, 2))};
  if (!arch.encoder_widths.empty()) {
    p.encoder = init_params(arch.encoder_spec(), detail::derive_seed(seed, 0));
  }
  p.validate();
  return p;
}

namespace {

template <typename Net, typename Out, typename Span>
void append_tensors(Net& net, const std::string& prefix, std::vector<Out>& out) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const std::string layer = prefix + ".fc" + std::to_string(l + 1);
    auto& w = net.weights[l];
    auto& b = net.biases[l];
    out.push_back(Out{layer + ".weight", Span(w.data(), static_cast<std::size_t>(w.size()))});
    out.push_back(Out{layer + ".bias", Span(b.data(), static_cast<std::size_t>(b.size()))});
  }
}

}  // namespace

std::vector<TensorRef> tensors(ModelParams& params, bool include_encoder) {
  std::vector<TensorRef> out;
  if (params.encoder && include_encoder) {
    append_tensors<MlpParams, TensorRef, std::span<double>>(*params.encoder, "encoder", out);
  }
  append_tensors<MlpParams, TensorRef, std::span<double>>(params.visual_map, "visual_map", out);
  append_tensors<MlpParams, TensorRef, std::span<double>>(params.semantic_map, "semantic_map", out);
  return out;
}

std::vector<ConstTensorRef> tensors(const ModelParams& params, bool include_encoder) {
  std::vector<ConstTensorRef> out;
  if (params.encoder && include_encoder) {
    append_tensors<const MlpParams, ConstTensorRef, std::span<const double>>(*params.encoder, "encoder", out);
  }
  append_tensors<const MlpParams, ConstTensorRef, std::span<const double>>(params.visual_map, "visual_map", out);
  append_tensors<const MlpParams, ConstTensorRef, std::span<const double>>(params.semantic_map, "semantic_map", out);
  return out;
}

}  // namespace gzsl
