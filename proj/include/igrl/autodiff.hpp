#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace igrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Named trainable tensor; biases are single-column matrices.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

/// Handle into a Tape node.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over vector-valued nodes. Scalars are 1-dim vectors.
class Tape {
 public:
  Var leaf(Vec v);
  Var zeros(int dim) { return leaf(Vec::Zero(dim)); }
  Var constant(double x) { return leaf(Vec::Constant(1, x)); }

  const Vec& value(Var v) const { return nodes_[v.id].value; }
  const Vec& grad(Var v) const { return nodes_[v.id].grad; }

  Var matvec(Param& p, Var x);          // p.value * x
  Var embed(Param& p, int col);         // p.value.col(col)
  Var add_bias(Var x, Param& b);        // x + b.value.col(0)
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var concat(Var a, Var b);
  Var slice(Var x, int offset, int len);
  Var gather(Var x, std::vector<int> indices);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var cmul(Var a, Var b);               // elementwise
  Var log_softmax(Var x);
  Var pick(Var x, int i);               // scalar x[i]
  Var dot_const(Var x, Vec w);          // scalar w.x
  Var scale(Var x, double c);
  Var sum_scalars(const std::vector<Var>& xs);

  /// context = sum_i softmax_i(enc_i . q) enc_i  (multiplicative attention)
  Var attend(const std::vector<Var>& enc, Var q);

  /// Seeds grad(root) = 1 and runs all recorded backward steps in reverse.
  void backward(Var root);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Vec value;
    Vec grad;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;

  Var push(Vec v, std::function<void()> back = nullptr);
  Vec& grad_ref(Var v) { return nodes_[v.id].grad; }
};

/// Adam with the canonical constants; one moment pair per parameter.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param*> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void zero_grads();
  void step();
  long steps_taken() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<Mat> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace igrl
