#include "sar/autodiff.hpp"

#include <cassert>
#include <cmath>

namespace sar {

Tape::Id Tape::constant(Tensor v) { return push(std::move(v)); }

Tape::Id Tape::param(Param& p) {
  Id id = push(p.value);
  nodes_[static_cast<size_t>(id)].bound = &p;
  return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  assert(av.cols == bv.rows);
  Tensor out(av.rows, bv.cols);
  matmul_acc(av, bv, out);
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
    // dA += dC * B^T ; dB += A^T * dC
    matmul_nt_acc(grad(id), value(b), grad(a));
    matmul_tn_acc(value(a), grad(id), grad(b));
  };
  return id;
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  assert(av.cols == bv.cols);
  Tensor out(av.rows, bv.rows);
  matmul_nt_acc(av, bv, out);
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
    // C = A*B^T: dA += dC * B ; dB += dC^T * A
    matmul_acc(grad(id), value(b), grad(a));
    matmul_tn_acc(grad(id), value(a), grad(b));
  };
  return id;
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  assert(av.same_shape(bv));
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
    const Tensor& g = grad(id);
    Tensor& ga = grad(a);
    Tensor& gb = grad(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  };
  return id;
}

Tape::Id Tape::add_rowvec(Id a, Id b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  assert(bv.rows == 1 && bv.cols == av.cols);
  Tensor out = av;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += bv.at(0, c);
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
    const Tensor& g = grad(id);
    Tensor& ga = grad(a);
    Tensor& gb = grad(b);
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        ga.at(r, c) += g.at(r, c);
        gb.at(0, c) += g.at(r, c);
      }
  };
  return id;
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  assert(av.same_shape(bv));
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
    const Tensor& g = grad(id);
    Tensor& ga = grad(a);
    Tensor& gb = grad(b);
    const Tensor& av2 = value(a);
    const Tensor& bv2 = value(b);
    for (size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * bv2.data[i];
      gb.data[i] += g.data[i] * av2.data[i];
    }
  };
  return id;
}

Tape::Id Tape::scale(Id a, double s) {
  Tensor out = value(a);
  for (double& v : out.data) v *= s;
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, s, id] {
    const Tensor& g = grad(id);
    Tensor& ga = grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data[i] += s * g.data[i];
  };
  return id;
}

Tape::Id Tape::add_const(Id a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v += c;
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    const Tensor& g = grad(id);
    Tensor& ga = grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
  };
  return id;
}

Tape::Id Tape::tanh_op(Id a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    const Tensor& g = grad(id);
    const Tensor& y = value(id);
    Tensor& ga = grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  };
  return id;
}

Tape::Id Tape::relu(Id a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    const Tensor& g = grad(id);
    const Tensor& x = value(a);
    Tensor& ga = grad(a);
    for (size_t i = 0; i < g.size(); ++i)
      if (x.data[i] > 0.0) ga.data[i] += g.data[i];
  };
  return id;
}

Tape::Id Tape::sigmoid(Id a) {
  Tensor out = value(a);
  for (double& v : out.data) v = stable_sigmoid(v);
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    const Tensor& g = grad(id);
    const Tensor& y = value(id);
    Tensor& ga = grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  };
  return id;
}

Tape::Id Tape::softmax_rows(Id a) {
  Tensor out = value(a);
  for (int r = 0; r < out.rows; ++r) {
    double mx = out.at(r, 0);
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
    double sum = 0.0;
    for (int c = 0; c < out.cols; ++c) {
      double e = std::exp(out.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < out.cols; ++c) out.at(r, c) /= sum;
  }
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    // dx = y .* (dy - <dy, y>) per row
    const Tensor& g = grad(id);
    const Tensor& y = value(id);
    Tensor& ga = grad(a);
    for (int r = 0; r < g.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < g.cols; ++c) ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  };
  return id;
}

Tape::Id Tape::mean_rows(Id a) {
  const Tensor& av = value(a);
  Tensor out(1, av.cols);
  for (int r = 0; r < av.rows; ++r)
    for (int c = 0; c < av.cols; ++c) out.at(0, c) += av.at(r, c);
  const double inv = 1.0 / av.rows;
  for (double& v : out.data) v *= inv;
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    const Tensor& g = grad(id);
    Tensor& ga = grad(a);
    const double inv = 1.0 / ga.rows;
    for (int r = 0; r < ga.rows; ++r)
      for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(0, c) * inv;
  };
  return id;
}

Tape::Id Tape::mean_all(Id a) {
  const Tensor& av = value(a);
  double s = 0.0;
  for (double v : av.data) s += v;
  Tensor out(1, 1);
  out.at(0, 0) = s / static_cast<double>(av.size());
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, a, id] {
    const double g = grad(id).at(0, 0);
    Tensor& ga = grad(a);
    const double inv = 1.0 / static_cast<double>(ga.size());
    for (double& v : ga.data) v += g * inv;
  };
  return id;
}

Tape::Id Tape::gather_rows(Id table, std::vector<int> idx) {
  const Tensor& tv = value(table);
  Tensor out(static_cast<int>(idx.size()), tv.cols);
  for (size_t r = 0; r < idx.size(); ++r) {
    assert(idx[r] >= 0 && idx[r] < tv.rows);
    for (int c = 0; c < tv.cols; ++c) out.at(static_cast<int>(r), c) = tv.at(idx[r], c);
  }
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, table, id, idx = std::move(idx)] {
    const Tensor& g = grad(id);
    Tensor& gt = grad(table);
    for (size_t r = 0; r < idx.size(); ++r)
      for (int c = 0; c < g.cols; ++c) gt.at(idx[r], c) += g.at(static_cast<int>(r), c);
  };
  return id;
}

Tape::Id Tape::sum(const std::vector<Id>& xs) {
  assert(!xs.empty());
  Tensor out = value(xs[0]);
  for (size_t i = 1; i < xs.size(); ++i) {
    const Tensor& v = value(xs[i]);
    assert(v.same_shape(out));
    for (size_t j = 0; j < out.size(); ++j) out.data[j] += v.data[j];
  }
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, xs, id] {
    const Tensor& g = grad(id);
    for (Id x : xs) {
      Tensor& gx = grad(x);
      for (size_t j = 0; j < g.size(); ++j) gx.data[j] += g.data[j];
    }
  };
  return id;
}

Tape::Id Tape::bce_with_logits_mean(Id z, std::vector<double> targets) {
  const Tensor& zv = value(z);
  assert(zv.cols == 1 && static_cast<size_t>(zv.rows) == targets.size());
  double s = 0.0;
  for (int r = 0; r < zv.rows; ++r) s += bce_with_logits(zv.at(r, 0), targets[static_cast<size_t>(r)]);
  Tensor out(1, 1);
  out.at(0, 0) = s / zv.rows;
  Id id = push(std::move(out));
  nodes_[static_cast<size_t>(id)].back = [this, z, id, targets = std::move(targets)] {
    // dL/dz_i = (sigmoid(z_i) - t_i) / m
    const double g = grad(id).at(0, 0);
    const Tensor& zv2 = value(z);
    Tensor& gz = grad(z);
    const double inv = 1.0 / zv2.rows;
    for (int r = 0; r < zv2.rows; ++r)
      gz.at(r, 0) += g * inv * (stable_sigmoid(zv2.at(r, 0)) - targets[static_cast<size_t>(r)]);
  };
  return id;
}

void Tape::backward(Id root) {
  assert(value(root).rows == 1 && value(root).cols == 1);
  for (auto& n : nodes_) {
    n.grad = Tensor(n.value.rows, n.value.cols);
  }
  nodes_[static_cast<size_t>(root)].grad.at(0, 0) = 1.0;
  for (size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.back) n.back();
    if (n.bound) {
      Tensor& pg = n.bound->grad;
      for (size_t j = 0; j < pg.size(); ++j) pg.data[j] += n.grad.data[j];
    }
  }
}

}  // namespace sar
