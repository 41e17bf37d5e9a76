#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "armtune/errors.hpp"
#include "armtune/mlp.hpp"

namespace armtune::ad {

using Mat = Eigen::MatrixXd;

// Handle to a node on a Tape.
struct Value {
  int idx = -1;
};

// Reverse-mode tape over matrices (columns are samples). A loss is built
// forward, then backward() accumulates d(loss)/d(theta) for every registered
// parameter vector. Tapes are single-use and single-threaded.
class Tape {
 public:
  // Registers a flat parameter vector. The tape never mutates it; gradients
  // accumulate in a buffer of the same size.
  int register_params(const Eigen::VectorXd* flat, bool want_grad = true) {
    slots_.push_back({flat, Eigen::VectorXd::Zero(flat->size()), want_grad});
    return static_cast<int>(slots_.size()) - 1;
  }

  const Eigen::VectorXd& grad(int slot) const { return slots_[slot].grad; }
  const Mat& value(Value v) const { return nodes_[v.idx].value; }
  double scalar(Value v) const {
    const Mat& m = nodes_[v.idx].value;
    if (m.size() != 1) throw UsageError("Tape::scalar: node is not 1x1");
    return m(0, 0);
  }

  Value constant(Mat v) { return make_node(std::move(v), {}); }

  // W*x + b per column, W and b taken from a registered flat vector.
  Value affine(int slot, const LayerShape& shape, Value x) {
    const Eigen::VectorXd& flat = *slots_[slot].params;
    Eigen::Map<const Mat> w(flat.data() + shape.w_offset, shape.out, shape.in);
    Eigen::Map<const Eigen::VectorXd> b(flat.data() + shape.b_offset, shape.out);
    const Mat& xv = nodes_[x.idx].value;
    if (xv.rows() != shape.in) throw UsageError("affine: input rows do not match layer");
    Mat y;
    detail::affine_forward(w, b, xv, y);
    return make_node(std::move(y), [this, slot, shape, x](const Mat& delta, int self) {
      (void)self;
      ParamSlot& ps = slots_[slot];
      const Mat& xv = nodes_[x.idx].value;
      if (ps.want_grad) {
        Eigen::Map<Mat> gw(ps.grad.data() + shape.w_offset, shape.out, shape.in);
        Eigen::Map<Eigen::VectorXd> gb(ps.grad.data() + shape.b_offset, shape.out);
        gw.noalias() += delta * xv.transpose();
        gb += delta.rowwise().sum();
      }
      const Eigen::VectorXd& flat = *ps.params;
      Eigen::Map<const Mat> w(flat.data() + shape.w_offset, shape.out, shape.in);
      grad_of(x).noalias() += w.transpose() * delta;
    });
  }

  // Parameter sub-range as an m x 1 leaf.
  Value param_segment(int slot, std::ptrdiff_t offset, int len) {
    const Eigen::VectorXd& flat = *slots_[slot].params;
    Mat v = flat.segment(offset, len);
    return make_node(std::move(v), [this, slot, offset, len](const Mat& delta, int) {
      ParamSlot& ps = slots_[slot];
      if (ps.want_grad) ps.grad.segment(offset, len) += delta.col(0);
    });
  }

  // Elementwise transcendentals go through unaryExpr with scalar calls so a
  // sample produces identical bits at any batch width (no packet math).
  Value tanh(Value a) {
    Mat y = nodes_[a.idx].value.unaryExpr([](double v) { return std::tanh(v); });
    return make_node(std::move(y), [this, a](const Mat& delta, int self) {
      const Mat& y = nodes_[self].value;
      grad_of(a).array() += delta.array() * (1.0 - y.array().square());
    });
  }

  Value relu(Value a) {
    Mat y = nodes_[a.idx].value.cwiseMax(0.0);
    return make_node(std::move(y), [this, a](const Mat& delta, int) {
      const Mat& x = nodes_[a.idx].value;
      grad_of(a).array() += delta.array() * (x.array() > 0.0).cast<double>();
    });
  }

  Value activation(Activation act, Value a) { return act == Activation::kTanh ? tanh(a) : relu(a); }

  Value exp(Value a) {
    Mat y = nodes_[a.idx].value.unaryExpr([](double v) { return std::exp(v); });
    return make_node(std::move(y), [this, a](const Mat& delta, int self) {
      grad_of(a).array() += delta.array() * nodes_[self].value.array();
    });
  }

  Value log(Value a) {
    Mat y = nodes_[a.idx].value.unaryExpr([](double v) { return std::log(v); });
    return make_node(std::move(y), [this, a](const Mat& delta, int) {
      grad_of(a).array() += delta.array() / nodes_[a.idx].value.array();
    });
  }

  Value square(Value a) {
    Mat y = nodes_[a.idx].value.array().square();
    return make_node(std::move(y), [this, a](const Mat& delta, int) {
      grad_of(a).array() += 2.0 * delta.array() * nodes_[a.idx].value.array();
    });
  }

  // Zero gradient outside [lo, hi]; boundary counts as inside.
  Value clip(Value a, double lo, double hi) {
    Mat y = nodes_[a.idx].value.array().min(hi).max(lo);
    return make_node(std::move(y), [this, a, lo, hi](const Mat& delta, int) {
      const Mat& x = nodes_[a.idx].value;
      grad_of(a).array() += delta.array() * ((x.array() >= lo) && (x.array() <= hi)).cast<double>();
    });
  }

  // Elementwise min; ties route the gradient to the first argument.
  Value min(Value a, Value b) {
    const Mat& av = nodes_[a.idx].value;
    const Mat& bv = nodes_[b.idx].value;
    Mat y = av.cwiseMin(bv);
    return make_node(std::move(y), [this, a, b](const Mat& delta, int) {
      const Mat& av = nodes_[a.idx].value;
      const Mat& bv = nodes_[b.idx].value;
      const Eigen::ArrayXXd take_a = (av.array() <= bv.array()).cast<double>();
      grad_of(a).array() += delta.array() * take_a;
      grad_of(b).array() += delta.array() * (1.0 - take_a);
    });
  }

  Value add(Value a, Value b) {
    Mat y = nodes_[a.idx].value + nodes_[b.idx].value;
    return make_node(std::move(y), [this, a, b](const Mat& delta, int) {
      grad_of(a) += delta;
      grad_of(b) += delta;
    });
  }

  Value sub(Value a, Value b) {
    Mat y = nodes_[a.idx].value - nodes_[b.idx].value;
    return make_node(std::move(y), [this, a, b](const Mat& delta, int) {
      grad_of(a) += delta;
      grad_of(b) -= delta;
    });
  }

  Value mul(Value a, Value b) {
    Mat y = nodes_[a.idx].value.cwiseProduct(nodes_[b.idx].value);
    return make_node(std::move(y), [this, a, b](const Mat& delta, int) {
      grad_of(a).array() += delta.array() * nodes_[b.idx].value.array();
      grad_of(b).array() += delta.array() * nodes_[a.idx].value.array();
    });
  }

  Value scale(Value a, double k) {
    Mat y = k * nodes_[a.idx].value;
    return make_node(std::move(y), [this, a, k](const Mat& delta, int) { grad_of(a) += k * delta; });
  }

  Value add_scalar(Value a, double k) {
    Mat y = nodes_[a.idx].value.array() + k;
    return make_node(std::move(y), [this, a](const Mat& delta, int) { grad_of(a) += delta; });
  }

  // Sum over rows, one total per column (1 x n). Accumulates in ascending row
  // order to keep the result independent of batch width.
  Value colsum(Value a) {
    const Mat& v = nodes_[a.idx].value;
    Mat y(1, v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < v.rows(); ++i) s += v(i, j);
      y(0, j) = s;
    }
    return make_node(std::move(y), [this, a](const Mat& delta, int) {
      grad_of(a).array() += delta.replicate(nodes_[a.idx].value.rows(), 1).array();
    });
  }

  // Replicate an m x 1 column across n columns.
  Value broadcast_col(Value a, int n) {
    const Mat& v = nodes_[a.idx].value;
    if (v.cols() != 1) throw UsageError("broadcast_col: expected a column vector node");
    Mat y = v.replicate(1, n);
    return make_node(std::move(y), [this, a](const Mat& delta, int) { grad_of(a) += delta.rowwise().sum(); });
  }

  Value vstack(Value a, Value b) {
    const Mat& av = nodes_[a.idx].value;
    const Mat& bv = nodes_[b.idx].value;
    if (av.cols() != bv.cols()) throw UsageError("vstack: column counts differ");
    Mat y(av.rows() + bv.rows(), av.cols());
    y.topRows(av.rows()) = av;
    y.bottomRows(bv.rows()) = bv;
    return make_node(std::move(y), [this, a, b](const Mat& delta, int) {
      grad_of(a) += delta.topRows(nodes_[a.idx].value.rows());
      grad_of(b) += delta.bottomRows(nodes_[b.idx].value.rows());
    });
  }

  Value rows(Value a, int first, int count) {
    Mat y = nodes_[a.idx].value.middleRows(first, count);
    return make_node(std::move(y), [this, a, first, count](const Mat& delta, int) {
      grad_of(a).middleRows(first, count) += delta;
    });
  }

  // Mean over all entries (1 x 1).
  Value mean(Value a) {
    const Mat& v = nodes_[a.idx].value;
    Mat y(1, 1);
    y(0, 0) = v.mean();
    return make_node(std::move(y), [this, a](const Mat& delta, int) {
      grad_of(a).array() += delta(0, 0) / static_cast<double>(nodes_[a.idx].value.size());
    });
  }

  // MLP forward pass recorded on the tape.
  Value mlp(int slot, const MlpParams& params, Value x) {
    Value h = x;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      h = affine(slot, params.layers[i], h);
      if (i + 1 < params.layers.size()) h = activation(params.spec.activation, h);
    }
    return h;
  }

  // Seeds d(loss) = 1 and sweeps the tape in reverse. loss must be scalar.
  void backward(Value loss) {
    if (nodes_[loss.idx].value.size() != 1) {
      throw UsageError("backward: loss must be a scalar (1x1) node");
    }
    for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
    nodes_[loss.idx].grad(0, 0) = 1.0;
    for (int i = loss.idx; i >= 0; --i) {
      if (nodes_[i].backward && nodes_[i].grad.size() > 0) {
        nodes_[i].backward(nodes_[i].grad, i);
      }
    }
  }

 private:
  struct ParamSlot {
    const Eigen::VectorXd* params;
    Eigen::VectorXd grad;
    bool want_grad;
  };

  struct Node {
    Mat value;
    Mat grad;
    std::function<void(const Mat& delta, int self)> backward;
  };

  Mat& grad_of(Value v) { return nodes_[v.idx].grad; }

  Value make_node(Mat value, std::function<void(const Mat&, int)> backward) {
    nodes_.push_back({std::move(value), {}, std::move(backward)});
    return {static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<ParamSlot> slots_;
  std::vector<Node> nodes_;
};

}  // namespace armtune::ad
