// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MESE_NN_HPP_
#define MESE_NN_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mese/error.hpp"
#include "mese/rng.hpp"

namespace mese::nn {

enum class Activation : std::uint32_t { kIdentity = 0, kTanh = 1, kRelu = 2 };

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kIdentity;
};

// Fully connected network. Samples are matrix columns throughout.
struct MlpParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
  }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
  }

  // Checks layer chaining and finiteness; throws ShapeError.
  void validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Layer& l = layers[i];
      if (l.bias.size() != l.weight.rows()) {
        throw ShapeError("layer " + std::to_string(i) + ": bias size mismatch");
      }
      if (i + 1 < layers.size() &&
          layers[i + 1].weight.cols() != l.weight.rows()) {
        throw ShapeError("layer " + std::to_string(i + 1) +
                         ": input width does not match previous output");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw ShapeError("layer " + std::to_string(i) + ": non-finite parameter");
      }
    }
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const Layer& x = a.layers[i];
      const Layer& y = b.layers[i];
      if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
          x.weight.cols() != y.weight.cols() || x.weight != y.weight ||
          x.bias != y.bias) {
        return false;
      }
    }
    return true;
  }
};

// Parameter-shaped gradient (or Adam moment) storage.
struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const MlpParams& params) {
    Gradients g;
    for (const Layer& l : params.layers) {
      g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
  }

  Gradients& operator+=(const Gradients& other) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += other.weight[i];
      bias[i] += other.bias[i];
    }
    return *this;
  }

  Gradients& operator*=(double s) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] *= s;
      bias[i] *= s;
    }
    return *this;
  }
};

// Layer sizes are given end to end: {in, hidden..., out}. Weights and biases
// are drawn from U(-sqrt(1/fan_in), +sqrt(1/fan_in)). The last layer is linear.
inline MlpParams make_mlp(std::span<const std::size_t> sizes, Activation hidden,
                          Rng& rng) {
  if (sizes.size() < 2) throw ShapeError("an MLP needs at least two sizes");
  MlpParams params;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(sizes[i]);
    const auto out = static_cast<Eigen::Index>(sizes[i + 1]);
    if (in == 0 || out == 0) throw ShapeError("zero-width layer");
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    Layer layer;
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    // Row-major fill order keeps the draw sequence independent of Eigen's
    // storage order.
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        layer.weight(r, c) = rng.uniform(-bound, bound);
      }
    }
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = rng.uniform(-bound, bound);
    layer.activation = (i + 2 == sizes.size()) ? Activation::kIdentity : hidden;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

inline MlpParams make_mlp(std::initializer_list<std::size_t> sizes,
                          Activation hidden, Rng& rng) {
  return make_mlp(std::span<const std::size_t>(sizes.begin(), sizes.size()),
                  hidden, rng);
}

namespace detail {

inline void activate(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      // 1 - 2 / (exp(2z) + 1); Eigen vectorizes exp but not tanh for doubles.
      z = 1.0 - 2.0 / ((2.0 * z.array().min(40.0).max(-40.0)).exp() + 1.0);
      break;
    case Activation::kRelu:
      z = z.array().max(0.0);
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the layer's post-activation output.
inline void activation_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& out,
                                Activation act) {
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kTanh:
      grad.array() *= 1.0 - out.array().square();
      break;
    case Activation::kRelu:
      grad.array() *= (out.array() > 0.0).cast<double>();
      break;
  }
}

}  // namespace detail

// activations[0] is the input batch, activations[i + 1] the output of layer i.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

inline ForwardCache forward_cached(const MlpParams& params,
                                   const Eigen::MatrixXd& inputs) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (static_cast<std::size_t>(inputs.rows()) != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.rows()) +
                     " rows, network expects " +
                     std::to_string(params.input_dim()));
  }
  ForwardCache cache;
  cache.activations.reserve(params.layers.size() + 1);
  cache.activations.push_back(inputs);
  for (const Layer& layer : params.layers) {
    Eigen::MatrixXd z = layer.weight * cache.activations.back();
    z.colwise() += layer.bias;
    detail::activate(z, layer.activation);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

// Batched forward pass; one sample per column.
inline Eigen::MatrixXd forward_batch(const MlpParams& params,
                                     const Eigen::MatrixXd& inputs) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (static_cast<std::size_t>(inputs.rows()) != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.rows()) +
                     " rows, network expects " +
                     std::to_string(params.input_dim()));
  }
  Eigen::MatrixXd x = inputs;
  for (const Layer& layer : params.layers) {
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    detail::activate(z, layer.activation);
    x = std::move(z);
  }
  return x;
}

inline Eigen::VectorXd forward(const MlpParams& params,
                               std::span<const double> input) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = input[i];
  }
  return forward_batch(params, x).col(0);
}

// Reverse-mode gradient of sum_over_columns(output . upstream) with respect to
// every parameter.
inline Gradients backward_batch(const MlpParams& params,
                                const ForwardCache& cache,
                                const Eigen::MatrixXd& upstream) {
  const std::size_t n_layers = params.layers.size();
  if (cache.activations.size() != n_layers + 1) {
    throw ShapeError("forward cache does not match network depth");
  }
  if (upstream.rows() != cache.output().rows() ||
      upstream.cols() != cache.output().cols()) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  Gradients grads;
  grads.weight.resize(n_layers);
  grads.bias.resize(n_layers);
  Eigen::MatrixXd delta = upstream;
  for (std::size_t i = n_layers; i-- > 0;) {
    const Layer& layer = params.layers[i];
    detail::activation_backward(delta, cache.activations[i + 1], layer.activation);
    grads.weight[i].noalias() = delta * cache.activations[i].transpose();
    grads.bias[i] = delta.rowwise().sum();
    if (i > 0) {
      Eigen::MatrixXd next = layer.weight.transpose() * delta;
      delta = std::move(next);
    }
  }
  return grads;
}

inline Gradients backward(const MlpParams& params, std::span<const double> input,
                          std::span<const double> upstream_grad) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(input.size()), 1);
  for (std::size_t i = 0; i < input.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = input[i];
  }
  const ForwardCache cache = forward_cached(params, x);
  if (upstream_grad.size() != params.output_dim()) {
    throw ShapeError("upstream gradient has wrong length");
  }
  Eigen::MatrixXd up(static_cast<Eigen::Index>(upstream_grad.size()), 1);
  for (std::size_t i = 0; i < upstream_grad.size(); ++i) {
    up(static_cast<Eigen::Index>(i), 0) = upstream_grad[i];
  }
  return backward_batch(params, cache, up);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  std::int64_t step = 0;
  AdamConfig config;

  static AdamState for_params(const MlpParams& params, AdamConfig config = {}) {
    if (!(config.lr > 0.0)) throw ArgumentError("Adam learning rate must be > 0");
    return AdamState{Gradients::zeros_like(params), Gradients::zeros_like(params),
                     0, config};
  }
};

// One bias-corrected Adam update, in place. Gradients are checked before any
// parameter is touched, so a TrainingError leaves params and state unchanged.
inline void adam_step(MlpParams& params, const Gradients& grads, AdamState& state) {
  const std::size_t n = params.layers.size();
  if (grads.weight.size() != n || grads.bias.size() != n ||
      state.first_moment.weight.size() != n) {
    throw ShapeError("gradient/optimizer state depth does not match network");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& l = params.layers[i];
    if (grads.weight[i].rows() != l.weight.rows() ||
        grads.weight[i].cols() != l.weight.cols() ||
        grads.bias[i].size() != l.bias.size()) {
      throw ShapeError("layer " + std::to_string(i) + ": gradient shape mismatch");
    }
    if (!grads.weight[i].allFinite() || !grads.bias[i].allFinite()) {
      throw TrainingError("non-finite gradient in layer " + std::to_string(i),
                          static_cast<std::ptrdiff_t>(i));
    }
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    param.array() -= c.lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + c.epsilon);
  };
  for (std::size_t i = 0; i < n; ++i) {
    update(params.layers[i].weight, grads.weight[i],
           state.first_moment.weight[i], state.second_moment.weight[i]);
    update(params.layers[i].bias, grads.bias[i], state.first_moment.bias[i],
           state.second_moment.bias[i]);
  }
}

// Checkpoint format, version 1. All integers are uint32 and all reals IEEE-754
// binary64, both little-endian regardless of host:
//
//   magic "MESENN\0\1" (8 bytes) | uint32 version | uint32 network count
//   per network: uint32 name length | name bytes | uint32 layer count
//     per layer: uint32 rows | uint32 cols | uint32 activation
//                rows*cols weights (row-major) | rows biases
inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'S', 'E', 'N', 'N', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof(U));
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) throw ShapeError("truncated checkpoint");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= U{bytes[i]} << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

using NamedNetwork = std::pair<std::string, MlpParams>;

inline void save_checkpoint(std::ostream& out,
                            std::span<const NamedNetwork> networks) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_le(out, kCheckpointVersion);
  detail::write_le(out, static_cast<std::uint32_t>(networks.size()));
  for (const auto& [name, params] : networks) {
    detail::write_le(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_le(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const Layer& l : params.layers) {
      detail::write_le(out, static_cast<std::uint32_t>(l.weight.rows()));
      detail::write_le(out, static_cast<std::uint32_t>(l.weight.cols()));
      detail::write_le(out, static_cast<std::uint32_t>(l.activation));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
          detail::write_le(out, l.weight(r, c));
        }
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) detail::write_le(out, l.bias(r));
    }
  }
}

inline std::vector<NamedNetwork> load_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kCheckpointMagic)) {
    throw ShapeError("not a checkpoint file");
  }
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ShapeError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = detail::read_le<std::uint32_t>(in);
  std::vector<NamedNetwork> networks;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto name_len = detail::read_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    MlpParams params;
    const auto n_layers = detail::read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      Layer l;
      const auto rows = detail::read_le<std::uint32_t>(in);
      const auto cols = detail::read_le<std::uint32_t>(in);
      const auto act = detail::read_le<std::uint32_t>(in);
      if (act > static_cast<std::uint32_t>(Activation::kRelu)) {
        throw ShapeError("unknown activation tag in checkpoint");
      }
      l.activation = static_cast<Activation>(act);
      l.weight.resize(rows, cols);
      l.bias.resize(rows);
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = detail::read_le<double>(in);
      }
      for (std::uint32_t r = 0; r < rows; ++r) l.bias(r) = detail::read_le<double>(in);
      params.layers.push_back(std::move(l));
    }
    params.validate();
    networks.emplace_back(std::move(name), std::move(params));
  }
  return networks;
}

}  // namespace mese::nn

#endif  // MESE_NN_HPP_
