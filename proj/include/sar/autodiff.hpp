#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sar/tensor.hpp"

namespace sar {

// Numerically stable sigmoid.
inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Stable binary cross entropy with logits for one (z, t) pair:
//   -[t*log(sigmoid(z)) + (1-t)*log(1-sigmoid(z))]
// computed as max(z,0) - z*t + log1p(exp(-|z|)), finite for any finite z.
inline double bce_with_logits(double z, double t) {
  return (z > 0.0 ? z : 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

// A named trainable tensor with a persistent gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, int r, int c) : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { grad.fill(0.0); }
};

// Reverse-mode tape. One tape per forward pass; ops append nodes and record
// a backward closure. Closed operation set: matmul (plain and a*b^T), add,
// hadamard mul, constant scale/shift, tanh, relu, sigmoid, row softmax,
// means, row gather (embedding lookup), list sum, and a fused stable
// BCE-with-logits mean.
class Tape {
 public:
  using Id = int;

  Id constant(Tensor v);
  Id param(Param& p);

  Id matmul(Id a, Id b);
  Id matmul_nt(Id a, Id b);  // a * b^T
  Id add(Id a, Id b);
  Id add_rowvec(Id a, Id b);  // [m,n] + [1,n], row-broadcast bias
  Id mul(Id a, Id b);
  Id scale(Id a, double s);
  Id add_const(Id a, double c);
  Id tanh_op(Id a);
  Id relu(Id a);
  Id sigmoid(Id a);
  Id softmax_rows(Id a);
  Id mean_rows(Id a);  // [m,n] -> [1,n]
  Id mean_all(Id a);   // [m,n] -> [1,1]
  Id gather_rows(Id table, std::vector<int> idx);
  Id sum(const std::vector<Id>& xs);
  Id bce_with_logits_mean(Id z, std::vector<double> targets);  // z [m,1] -> [1,1]

  const Tensor& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& grad(Id id) { return nodes_[static_cast<size_t>(id)].grad; }

  // Seeds d(root)=1 and propagates to every bound Param::grad (accumulating,
  // so callers zero grads between steps). root must be [1,1].
  void backward(Id root);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> back;  // empty for leaves
    Param* bound = nullptr;
  };

  Id push(Tensor v) {
    nodes_.push_back(Node{std::move(v), Tensor(), nullptr, nullptr});
    return static_cast<Id>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace sar
