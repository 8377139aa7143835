#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "rem/numerics.hpp"
#include "rem/rng.hpp"

namespace rem {

// y = act(W2 tanh(W1 x + b1) + b2), act = tanh or identity. Batches are
// column-major: one sample per column.
template <typename Scalar>
struct TwoLayerNet {
  MatrixX<Scalar> w1;
  VectorX<Scalar> b1;
  MatrixX<Scalar> w2;
  VectorX<Scalar> b2;
  bool tanh_output = false;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int output_dim() const { return static_cast<int>(w2.rows()); }

  // Weights ~ N(0, 1/fan_in), biases zero.
  static TwoLayerNet random(int in, int hidden, int out, bool tanh_output, SeededRng& rng) {
    TwoLayerNet net;
    net.w1.resize(hidden, in);
    net.w2.resize(out, hidden);
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < hidden; ++i)
        net.w1(i, j) = static_cast<Scalar>(rng.gaussian() / std::sqrt(static_cast<double>(in)));
    for (Eigen::Index j = 0; j < hidden; ++j)
      for (Eigen::Index i = 0; i < out; ++i)
        net.w2(i, j) = static_cast<Scalar>(rng.gaussian() / std::sqrt(static_cast<double>(hidden)));
    net.b1 = VectorX<Scalar>::Zero(hidden);
    net.b2 = VectorX<Scalar>::Zero(out);
    net.tanh_output = tanh_output;
    return net;
  }

  static TwoLayerNet zeros(int in, int hidden, int out, bool tanh_output) {
    TwoLayerNet net;
    net.w1 = MatrixX<Scalar>::Zero(hidden, in);
    net.b1 = VectorX<Scalar>::Zero(hidden);
    net.w2 = MatrixX<Scalar>::Zero(out, hidden);
    net.b2 = VectorX<Scalar>::Zero(out);
    net.tanh_output = tanh_output;
    return net;
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
  }
};

template <typename Scalar>
struct NetActivations {
  MatrixX<Scalar> hidden;  // tanh(W1 X + b1)
  MatrixX<Scalar> output;
};

template <typename Scalar>
struct NetGradients {
  MatrixX<Scalar> w1;
  VectorX<Scalar> b1;
  MatrixX<Scalar> w2;
  VectorX<Scalar> b2;

  static NetGradients zeros_like(const TwoLayerNet<Scalar>& net) {
    return {MatrixX<Scalar>::Zero(net.w1.rows(), net.w1.cols()),
            VectorX<Scalar>::Zero(net.b1.size()),
            MatrixX<Scalar>::Zero(net.w2.rows(), net.w2.cols()),
            VectorX<Scalar>::Zero(net.b2.size())};
  }
};

template <typename Scalar, typename Derived>
NetActivations<Scalar> forward(const TwoLayerNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  require_dims(x.rows(), net.input_dim(), "TwoLayerNet::forward");
  NetActivations<Scalar> act;
  act.hidden = ((net.w1 * x).colwise() + net.b1).array().tanh().matrix();
  act.output = (net.w2 * act.hidden).colwise() + net.b2;
  if (net.tanh_output) act.output = act.output.array().tanh().matrix();
  return act;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> predict(const TwoLayerNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  return forward(net, x).output;
}

// Gradients of a scalar loss given dL/dY (same shape as the output batch).
// If `grad_input` is non-null it receives dL/dX.
template <typename Scalar, typename Derived>
NetGradients<Scalar> backward(const TwoLayerNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                              const NetActivations<Scalar>& act, const MatrixX<Scalar>& grad_output,
                              MatrixX<Scalar>* grad_input = nullptr) {
  MatrixX<Scalar> dz2 = grad_output;
  if (net.tanh_output) dz2.array() *= (1 - act.output.array().square());
  NetGradients<Scalar> g;
  g.w2 = dz2 * act.hidden.transpose();
  g.b2 = dz2.rowwise().sum();
  const MatrixX<Scalar> dz1 =
      ((net.w2.transpose() * dz2).array() * (1 - act.hidden.array().square())).matrix();
  g.w1 = dz1 * x.transpose();
  g.b1 = dz1.rowwise().sum();
  if (grad_input) *grad_input = net.w1.transpose() * dz1;
  return g;
}

// Rounds every parameter to the nearest float, so an in-memory model equals
// its 32-bit checkpoint.
template <typename Scalar>
void round_to_float(TwoLayerNet<Scalar>& net) {
  net.w1 = net.w1.template cast<float>().template cast<Scalar>();
  net.b1 = net.b1.template cast<float>().template cast<Scalar>();
  net.w2 = net.w2.template cast<float>().template cast<Scalar>();
  net.b2 = net.b2.template cast<float>().template cast<Scalar>();
}

template <typename Derived>
void round_to_float(Eigen::PlainObjectBase<Derived>& m) {
  m = m.template cast<float>().template cast<typename Derived::Scalar>();
}

// A contiguous trainable block and its gradient.
struct ParamRef {
  double* data;
  const double* grad;
  Eigen::Index size;
};

template <typename Derived, typename GradDerived>
ParamRef param_ref(Eigen::PlainObjectBase<Derived>& p, const Eigen::PlainObjectBase<GradDerived>& g) {
  require_dims(g.size(), p.size(), "param_ref");
  return {p.data(), g.data(), p.size()};
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<ParamRef>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Eigen::VectorXd::Zero(p.size));
        v_.push_back(Eigen::VectorXd::Zero(p.size));
      }
    }
    require(m_.size() == params.size(), ErrorKind::InvalidArgument, "Adam: parameter set changed");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Eigen::Map<Eigen::VectorXd> p(params[k].data, params[k].size);
      Eigen::Map<const Eigen::VectorXd> g(params[k].grad, params[k].size);
      m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
      v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseAbs2();
      p.array() -= config_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.eps);
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::VectorXd> v_;
  long t_ = 0;
};

// Fisher-Yates permutation of [0, n).
std::vector<int> permutation(int n, SeededRng& rng);

}  // namespace rem
