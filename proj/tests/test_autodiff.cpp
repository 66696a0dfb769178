#include <doctest.h>

#include <cmath>
#include <functional>

#include "sar/autodiff.hpp"
#include "sar/optimizer.hpp"
#include "sar/rng.hpp"

using namespace sar;

namespace {

void fill_random(Param& p, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& v : p.value.data) v = rng.uniform(lo, hi);
}

// Central finite differences over every element of every param, against the
// tape's reverse-mode gradients. `build` must construct the loss from scratch
// on each call.
void check_gradients(std::vector<Param*> params, const std::function<double(bool)>& build,
                     double tol = 1e-7) {
  for (Param* p : params) p->zero_grad();
  build(true);  // fills grads
  const double eps = 1e-5;
  for (Param* p : params) {
    for (size_t j = 0; j < p->value.size(); ++j) {
      const double saved = p->value.data[j];
      p->value.data[j] = saved + eps;
      const double up = build(false);
      p->value.data[j] = saved - eps;
      const double down = build(false);
      p->value.data[j] = saved;
      const double gn = (up - down) / (2.0 * eps);
      const double ga = p->grad.data[j];
      CAPTURE(p->name);
      CAPTURE(j);
      CHECK(std::abs(ga - gn) <= tol * std::max(1.0, std::abs(ga) + std::abs(gn)));
    }
  }
}

}  // namespace

TEST_CASE("matmul forward matches hand-computed values") {
  Tape tape;
  Tape::Id a = tape.constant(Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
  Tape::Id b = tape.constant(Tensor(3, 2, {7, 8, 9, 10, 11, 12}));
  Tape::Id c = tape.matmul(a, b);
  const Tensor& v = tape.value(c);
  CHECK(v.rows == 2);
  CHECK(v.cols == 2);
  CHECK(v.at(0, 0) == doctest::Approx(58));
  CHECK(v.at(0, 1) == doctest::Approx(64));
  CHECK(v.at(1, 0) == doctest::Approx(139));
  CHECK(v.at(1, 1) == doctest::Approx(154));
}

TEST_CASE("reverse-mode gradients match finite differences per op") {
  Rng rng(42);
  Param a("a", 3, 4), b("b", 4, 3), c("c", 3, 4), bias("bias", 1, 4);
  fill_random(a, rng);
  fill_random(b, rng);
  fill_random(c, rng);
  fill_random(bias, rng);

  SUBCASE("matmul + tanh") {
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id loss = t.mean_all(t.tanh_op(t.matmul(t.param(a), t.param(b))));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&a, &b}, build);
  }

  SUBCASE("matmul_nt + sigmoid") {
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id loss = t.mean_all(t.sigmoid(t.matmul_nt(t.param(a), t.param(c))));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&a, &c}, build);
  }

  SUBCASE("add, mul, scale, add_const") {
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id x = t.add(t.param(a), t.param(c));
      Tape::Id y = t.mul(x, t.param(a));
      Tape::Id loss = t.mean_all(t.add_const(t.scale(y, 0.7), 0.3));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&a, &c}, build);
  }

  SUBCASE("add_rowvec broadcast bias") {
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id loss = t.mean_all(t.tanh_op(t.add_rowvec(t.param(a), t.param(bias))));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&a, &bias}, build);
  }

  SUBCASE("softmax rows") {
    auto build = [&](bool grads) {
      Tape t;
      // weighted sum to keep the loss sensitive to every softmax output
      Tape::Id sm = t.softmax_rows(t.param(a));
      Tape::Id loss = t.mean_all(t.mul(sm, t.constant(Tensor(3, 4, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}))));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&a}, build);
  }

  SUBCASE("relu away from the kink") {
    Param r("r", 2, 3);
    r.value = Tensor(2, 3, {0.5, -0.7, 1.2, -0.4, 0.9, -1.1});
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id loss = t.mean_all(t.relu(t.param(r)));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&r}, build);
  }

  SUBCASE("mean_rows and sum list") {
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id pa = t.param(a);
      Tape::Id pc = t.param(c);
      Tape::Id m = t.mean_rows(t.sum({pa, pc, pa}));
      Tape::Id loss = t.mean_all(t.tanh_op(m));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&a, &c}, build);
  }

  SUBCASE("gather_rows with a repeated row") {
    Param table("table", 5, 3);
    fill_random(table, rng);
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id g = t.gather_rows(t.param(table), {4, 0, 4});
      Tape::Id loss = t.mean_all(t.sigmoid(g));
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&table}, build);
  }

  SUBCASE("bce_with_logits_mean") {
    Param z("z", 4, 1);
    z.value = Tensor(4, 1, {0.3, -1.2, 2.5, -0.1});
    auto build = [&](bool grads) {
      Tape t;
      Tape::Id loss = t.bce_with_logits_mean(t.param(z), {1.0, 0.0, 0.25, 0.8});
      if (grads) t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    check_gradients({&z}, build);
  }
}

TEST_CASE("stable bce matches the naive form at z=0") {
  CHECK(bce_with_logits(0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_with_logits(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("adam minimizes a quadratic") {
  Param x("x", 1, 1);
  x.value.at(0, 0) = -4.0;
  Adam adam({&x}, 0.1);
  for (int i = 0; i < 500; ++i) {
    Tape t;
    Tape::Id d = t.add_const(t.param(x), -3.0);
    Tape::Id loss = t.mean_all(t.mul(d, d));
    t.backward(loss);
    adam.step();
    adam.zero_grads();
  }
  CHECK(x.value.at(0, 0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("adam with lr=0 leaves parameters untouched") {
  Param x("x", 2, 2);
  Rng rng(7);
  fill_random(x, rng);
  Tensor before = x.value;
  Adam adam({&x}, 0.0);
  for (int i = 0; i < 3; ++i) {
    Tape t;
    Tape::Id loss = t.mean_all(t.mul(t.param(x), t.param(x)));
    t.backward(loss);
    adam.step();
    adam.zero_grads();
  }
  CHECK(x.value == before);
}

TEST_CASE("rng is deterministic and substreams differ") {
  Rng a(123), b(123);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng base(9);
  Rng s0 = base.substream(0);
  Rng s1 = base.substream(1);
  CHECK(s0.next_u64() != s1.next_u64());
}
