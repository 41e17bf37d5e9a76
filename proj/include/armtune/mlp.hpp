#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "armtune/errors.hpp"
#include "armtune/rng.hpp"

namespace armtune {

enum class Activation : std::uint8_t { kTanh = 0, kRelu = 1 };

inline double apply_activation(Activation act, double x) {
  return act == Activation::kTanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
  Activation activation = Activation::kTanh;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw UsageError("MlpSpec: input/output dims must be >= 1");
    if (hidden.empty()) throw UsageError("MlpSpec: at least one hidden layer required");
    for (int w : hidden) {
      if (w < 1) throw UsageError("MlpSpec: hidden widths must be >= 1");
    }
  }

  bool operator==(const MlpSpec&) const = default;
};

// Column-major weight block plus bias. Offsets index into the flat vector.
struct LayerShape {
  int in = 0;
  int out = 0;
  std::ptrdiff_t w_offset = 0;
  std::ptrdiff_t b_offset = 0;
};

inline std::vector<LayerShape> layer_layout(const MlpSpec& spec) {
  spec.validate();
  std::vector<LayerShape> layers;
  std::ptrdiff_t offset = 0;
  int in = spec.input_dim;
  auto push = [&](int out) {
    LayerShape s{in, out, offset, offset + static_cast<std::ptrdiff_t>(in) * out};
    offset = s.b_offset + out;
    layers.push_back(s);
    in = out;
  };
  for (int w : spec.hidden) push(w);
  push(spec.output_dim);
  return layers;
}

// Flat parameter vector plus the layer layout describing it.
struct MlpParams {
  MlpSpec spec;
  std::vector<LayerShape> layers;
  Eigen::VectorXd flat;

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const {
    const LayerShape& s = layers[layer];
    return {flat.data() + s.w_offset, s.out, s.in};
  }
  Eigen::Map<Eigen::MatrixXd> weight(int layer) {
    const LayerShape& s = layers[layer];
    return {flat.data() + s.w_offset, s.out, s.in};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const {
    const LayerShape& s = layers[layer];
    return {flat.data() + s.b_offset, s.out};
  }
  Eigen::Map<Eigen::VectorXd> bias(int layer) {
    const LayerShape& s = layers[layer];
    return {flat.data() + s.b_offset, s.out};
  }
};

namespace detail {

// Orthogonal matrix via QR of a Gaussian draw, sign-fixed so the result is
// unique given the draw.
inline Eigen::MatrixXd orthogonal_matrix(int rows, int cols, Rng& rng) {
  const bool transpose = rows < cols;
  const int r = transpose ? cols : rows;
  const int c = transpose ? rows : cols;
  Eigen::MatrixXd a(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  Eigen::MatrixXd rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return transpose ? Eigen::MatrixXd(q.transpose()) : q;
}

}  // namespace detail

// Orthogonal init, gain sqrt(2) on hidden layers and head_gain on the output
// layer; zero biases.
inline MlpParams make_mlp_params(const MlpSpec& spec, Rng& rng, double head_gain) {
  MlpParams p;
  p.spec = spec;
  p.layers = layer_layout(spec);
  const LayerShape& last = p.layers.back();
  p.flat = Eigen::VectorXd::Zero(last.b_offset + last.out);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const double gain = (i + 1 == p.layers.size()) ? head_gain : std::sqrt(2.0);
    p.weight(static_cast<int>(i)) = gain * detail::orthogonal_matrix(p.layers[i].out, p.layers[i].in, rng);
  }
  return p;
}

namespace detail {

// Column-at-a-time matvec so a sample's forward pass produces identical bits
// whether it is evaluated alone or inside a batch.
inline void affine_forward(const Eigen::Map<const Eigen::MatrixXd>& w,
                           const Eigen::Map<const Eigen::VectorXd>& b, const Eigen::MatrixXd& x,
                           Eigen::MatrixXd& y) {
  y.resize(w.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    y.col(j).noalias() = w * x.col(j);
    y.col(j) += b;
  }
}

}  // namespace detail

// Batched forward pass; columns are samples.
inline Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& input) {
  if (input.rows() != params.spec.input_dim) {
    throw UsageError("mlp_forward: input has " + std::to_string(input.rows()) + " rows, spec expects " +
                     std::to_string(params.spec.input_dim));
  }
  Eigen::MatrixXd x = input, y;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    detail::affine_forward(params.weight(static_cast<int>(i)), params.bias(static_cast<int>(i)), x, y);
    if (i + 1 < params.layers.size()) {
      y = y.unaryExpr([&](double v) { return apply_activation(params.spec.activation, v); });
    }
    x.swap(y);
  }
  return x;
}

inline Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return mlp_forward_batch(params, input);
}

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam_state(Eigen::Index n) {
  AdamState s;
  s.first_moment = Eigen::VectorXd::Zero(n);
  s.second_moment = Eigen::VectorXd::Zero(n);
  return s;
}

// Bias-corrected Adam update, in place.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double learning_rate) {
  if (params.size() != grad.size() || params.size() != state.first_moment.size()) {
    throw UsageError("adam_step: parameter/gradient/state sizes disagree");
  }
  if (!(learning_rate > 0.0)) throw UsageError("adam_step: learning_rate must be > 0");
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment.array() + (1.0 - state.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.array() -=
      learning_rate * (state.first_moment.array() / bc1) / ((state.second_moment.array() / bc2).sqrt() + state.epsilon);
}

// target <- tau * online + (1 - tau) * target, elementwise, left to right.
inline void soft_update(const Eigen::VectorXd& online, Eigen::VectorXd& target, double tau) {
  if (online.size() != target.size()) throw UsageError("soft_update: size mismatch");
  for (Eigen::Index i = 0; i < online.size(); ++i) {
    target[i] = tau * online[i] + (1.0 - tau) * target[i];
  }
}

}  // namespace armtune
