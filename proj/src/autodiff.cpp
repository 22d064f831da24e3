#include "igrl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace igrl {

Var Tape::push(Vec v, std::function<void()> back) {
  Node n;
  n.value = std::move(v);
  n.grad = Vec::Zero(n.value.size());
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Vec v) { return push(std::move(v)); }

Var Tape::matvec(Param& p, Var x) {
  Var y = push(p.value * value(x));
  nodes_[y.id].back = [this, &p, x, y] {
    const Vec& g = grad(y);
    p.grad += g * value(x).transpose();
    grad_ref(x) += p.value.transpose() * g;
  };
  return y;
}

Var Tape::embed(Param& p, int col) {
  Var y = push(p.value.col(col));
  nodes_[y.id].back = [this, &p, col, y] { p.grad.col(col) += grad(y); };
  return y;
}

Var Tape::add_bias(Var x, Param& b) {
  Var y = push(value(x) + b.value.col(0));
  nodes_[y.id].back = [this, x, &b, y] {
    const Vec& g = grad(y);
    grad_ref(x) += g;
    b.grad.col(0) += g;
  };
  return y;
}

Var Tape::add(Var a, Var b) {
  Var y = push(value(a) + value(b));
  nodes_[y.id].back = [this, a, b, y] {
    grad_ref(a) += grad(y);
    grad_ref(b) += grad(y);
  };
  return y;
}

Var Tape::sub(Var a, Var b) {
  Var y = push(value(a) - value(b));
  nodes_[y.id].back = [this, a, b, y] {
    grad_ref(a) += grad(y);
    grad_ref(b) -= grad(y);
  };
  return y;
}

Var Tape::concat(Var a, Var b) {
  const int na = static_cast<int>(value(a).size());
  const int nb = static_cast<int>(value(b).size());
  Vec v(na + nb);
  v.head(na) = value(a);
  v.tail(nb) = value(b);
  Var y = push(std::move(v));
  nodes_[y.id].back = [this, a, b, y, na, nb] {
    grad_ref(a) += grad(y).head(na);
    grad_ref(b) += grad(y).tail(nb);
  };
  return y;
}

Var Tape::slice(Var x, int offset, int len) {
  Var y = push(value(x).segment(offset, len));
  nodes_[y.id].back = [this, x, y, offset, len] {
    grad_ref(x).segment(offset, len) += grad(y);
  };
  return y;
}

Var Tape::gather(Var x, std::vector<int> indices) {
  Vec v(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) v[i] = value(x)[indices[i]];
  Var y = push(std::move(v));
  nodes_[y.id].back = [this, x, y, idx = std::move(indices)] {
    for (std::size_t i = 0; i < idx.size(); ++i) grad_ref(x)[idx[i]] += grad(y)[i];
  };
  return y;
}

Var Tape::sigmoid(Var x) {
  Var y = push(value(x).unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); }));
  nodes_[y.id].back = [this, x, y] {
    const Vec& v = value(y);
    grad_ref(x).array() += grad(y).array() * v.array() * (1.0 - v.array());
  };
  return y;
}

Var Tape::tanh(Var x) {
  Var y = push(value(x).array().tanh().matrix());
  nodes_[y.id].back = [this, x, y] {
    const Vec& v = value(y);
    grad_ref(x).array() += grad(y).array() * (1.0 - v.array().square());
  };
  return y;
}

Var Tape::cmul(Var a, Var b) {
  Var y = push(value(a).cwiseProduct(value(b)));
  nodes_[y.id].back = [this, a, b, y] {
    grad_ref(a).array() += grad(y).array() * value(b).array();
    grad_ref(b).array() += grad(y).array() * value(a).array();
  };
  return y;
}

Var Tape::log_softmax(Var x) {
  const Vec& v = value(x);
  const double mx = v.maxCoeff();
  const double lse = mx + std::log((v.array() - mx).exp().sum());
  Var y = push(v.array() - lse);
  nodes_[y.id].back = [this, x, y] {
    const Vec& g = grad(y);
    const double gsum = g.sum();
    grad_ref(x).array() += g.array() - value(y).array().exp() * gsum;
  };
  return y;
}

Var Tape::pick(Var x, int i) {
  if (i < 0 || i >= value(x).size()) throw std::runtime_error("pick index out of range");
  Var y = push(Vec::Constant(1, value(x)[i]));
  nodes_[y.id].back = [this, x, y, i] { grad_ref(x)[i] += grad(y)[0]; };
  return y;
}

Var Tape::dot_const(Var x, Vec w) {
  Var y = push(Vec::Constant(1, value(x).dot(w)));
  nodes_[y.id].back = [this, x, y, w = std::move(w)] {
    grad_ref(x) += grad(y)[0] * w;
  };
  return y;
}

Var Tape::scale(Var x, double c) {
  Var y = push(value(x) * c);
  nodes_[y.id].back = [this, x, y, c] { grad_ref(x) += grad(y) * c; };
  return y;
}

Var Tape::sum_scalars(const std::vector<Var>& xs) {
  double total = 0.0;
  for (Var x : xs) total += value(x)[0];
  Var y = push(Vec::Constant(1, total));
  nodes_[y.id].back = [this, xs, y] {
    const double g = grad(y)[0];
    for (Var x : xs) grad_ref(x)[0] += g;
  };
  return y;
}

Var Tape::attend(const std::vector<Var>& enc, Var q) {
  const int n = static_cast<int>(enc.size());
  Vec scores(n);
  for (int i = 0; i < n; ++i) scores[i] = value(enc[i]).dot(value(q));
  const double mx = scores.maxCoeff();
  Vec a = (scores.array() - mx).exp();
  a /= a.sum();
  Vec ctx = Vec::Zero(value(q).size());
  for (int i = 0; i < n; ++i) ctx += a[i] * value(enc[i]);
  Var y = push(std::move(ctx));
  nodes_[y.id].back = [this, enc, q, y, a = std::move(a)] {
    const Vec& g = grad(y);
    const int n = static_cast<int>(enc.size());
    Vec dl_da(n);
    for (int i = 0; i < n; ++i) dl_da[i] = g.dot(value(enc[i]));
    const double mix = a.dot(dl_da);
    Vec ds = a.array() * (dl_da.array() - mix);
    Vec gq = Vec::Zero(value(q).size());
    for (int i = 0; i < n; ++i) {
      gq += ds[i] * value(enc[i]);
      grad_ref(enc[i]) += a[i] * g + ds[i] * value(q);
    }
    grad_ref(q) += gq;
  };
  return y;
}

void Tape::backward(Var root) {
  if (value(root).size() != 1)
    throw std::runtime_error("backward root must be a scalar node");
  grad_ref(root)[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, double lr, double beta1,
                             double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamOptimizer::zero_grads() {
  for (Param* p : params_) p->zero_grad();
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Mat& g = params_[i]->grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    params_[i]->value.array() -=
        lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

}  // namespace igrl
