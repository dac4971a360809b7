// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdd/errors.hpp"
#include "mdd/rng.hpp"

namespace mdd {

// Minimal dense layers with hand-written backward passes. Everything is
// double precision; sequences are row-major (rows = time, cols = channels).

struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd velocity;  // momentum buffer
  bool decay = true;         // weight decay applies (off for biases)

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols, bool decay_flag = true)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)),
        velocity(Eigen::MatrixXd::Zero(rows, cols)),
        decay(decay_flag) {}

  void zero_grad() { grad.setZero(); }
  void init_normal(Rng& rng, double stddev) {
    for (Eigen::Index r = 0; r < value.rows(); ++r)
      for (Eigen::Index c = 0; c < value.cols(); ++c) value(r, c) = stddev * rng.normal();
  }
};

// y = x W^T + b applied row-wise; W is (out x in).
struct Linear {
  Param W, b;

  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : W(name + ".W", out, in), b(name + ".b", out, 1, false) {}

  void init(Rng& rng, double stddev) { W.init_normal(rng, stddev); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    return (x * W.value.transpose()).rowwise() + b.value.col(0).transpose();
  }

  // Accumulates parameter grads; returns grad w.r.t. x.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
    W.grad.noalias() += dy.transpose() * x;
    b.grad.col(0).noalias() += dy.colwise().sum().transpose();
    return dy * W.value;
  }

  std::vector<Param*> params() { return {&W, &b}; }
};

inline Eigen::MatrixXd tanh_forward(const Eigen::MatrixXd& x) { return x.array().tanh(); }

// dy through tanh given the forward output y.
inline Eigen::MatrixXd tanh_backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy) {
  return (dy.array() * (1.0 - y.array().square())).matrix();
}

// Row-wise softmax, numerically stabilized.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

// Given p = softmax(logits) and dL/dp, returns dL/dlogits.
inline Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& p, const Eigen::MatrixXd& dp) {
  Eigen::MatrixXd dlogits(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double dot = p.row(i).dot(dp.row(i));
    dlogits.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
  }
  return dlogits;
}

// Replicate-edge padding along the time axis.
inline Eigen::MatrixXd pad_edge(const Eigen::MatrixXd& x, int left, int right) {
  Eigen::MatrixXd out(x.rows() + left + right, x.cols());
  for (int i = 0; i < left; ++i) out.row(i) = x.row(0);
  out.middleRows(left, x.rows()) = x;
  for (int i = 0; i < right; ++i) out.row(left + x.rows() + i) = x.row(x.rows() - 1);
  return out;
}

inline Eigen::MatrixXd pad_edge_backward(const Eigen::MatrixXd& dpadded, Eigen::Index orig_rows,
                                         int left, int right) {
  Eigen::MatrixXd dx = dpadded.middleRows(left, orig_rows);
  for (int i = 0; i < left; ++i) dx.row(0) += dpadded.row(i);
  for (int i = 0; i < right; ++i) dx.row(orig_rows - 1) += dpadded.row(left + orig_rows + i);
  return dx;
}

// Windowed temporal affine: out[t'] = W * concat(x[t'*s .. t'*s + k - 1]) + b.
// The input is edge-padded on the right so the output has exactly
// ceil(rows / s) steps.
struct StridedAffine {
  int kernel = 1;
  int stride = 1;
  int in_ch = 0;
  int out_ch = 0;
  Linear lin;

  StridedAffine() = default;
  StridedAffine(const std::string& name, int k, int s, int in, int out)
      : kernel(k), stride(s), in_ch(in), out_ch(out), lin(name, k * in, out) {}

  void init(Rng& rng, double stddev) { lin.init(rng, stddev); }

  int out_rows(Eigen::Index in_rows) const {
    return static_cast<int>((in_rows + stride - 1) / stride);
  }

  // Gathers windows into a (T_out x k*in) matrix; kept for backward.
  Eigen::MatrixXd gather(const Eigen::MatrixXd& x) const {
    const int T_out = out_rows(x.rows());
    const int need = (T_out - 1) * stride + kernel;
    const Eigen::MatrixXd xp = pad_edge(x, 0, need - static_cast<int>(x.rows()));
    Eigen::MatrixXd win(T_out, kernel * in_ch);
    for (int t = 0; t < T_out; ++t)
      for (int j = 0; j < kernel; ++j)
        win.block(t, j * in_ch, 1, in_ch) = xp.row(t * stride + j);
    return win;
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const { return lin.forward(gather(x)); }

  Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
    const Eigen::MatrixXd win = gather(x);
    const Eigen::MatrixXd dwin = lin.backward(win, dy);
    const int T_out = static_cast<int>(dy.rows());
    const int need = (T_out - 1) * stride + kernel;
    Eigen::MatrixXd dxp = Eigen::MatrixXd::Zero(need, in_ch);
    for (int t = 0; t < T_out; ++t)
      for (int j = 0; j < kernel; ++j)
        dxp.row(t * stride + j) += dwin.block(t, j * in_ch, 1, in_ch);
    return pad_edge_backward(dxp, x.rows(), 0, need - static_cast<int>(x.rows()));
  }

  std::vector<Param*> params() { return lin.params(); }
};

// Nearest-neighbour x2 upsampling along time.
inline Eigen::MatrixXd upsample2(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(2 * x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    out.row(2 * t) = x.row(t);
    out.row(2 * t + 1) = x.row(t);
  }
  return out;
}

inline Eigen::MatrixXd upsample2_backward(const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd dx(dy.rows() / 2, dy.cols());
  for (Eigen::Index t = 0; t < dx.rows(); ++t) dx.row(t) = dy.row(2 * t) + dy.row(2 * t + 1);
  return dx;
}

// Plain gradient descent with momentum and decoupled weight decay.
struct SgdMomentum {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 4.5e-2;

  void step(const std::vector<Param*>& params) const {
    for (Param* p : params) {
      Eigen::MatrixXd g = p->grad;
      if (p->decay) g += weight_decay * p->value;
      p->velocity = momentum * p->velocity - lr * g;
      p->value += p->velocity;
    }
  }
};

}  // namespace mdd
