#include <cmath>
#include <functional>

#include <doctest.h>

#include "ckgen/autograd.hpp"
#include "ckgen/rng.hpp"

using namespace ckgen;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.next_symmetric(scale);
  return t;
}

// Central-difference check of d(sum(weights .* f(inputs)))/d(inputs[k]).
void grad_check(const std::vector<Tensor>& inputs,
                const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                double tol = 1e-7) {
  Rng wrng(555);
  Tape tape(true);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  Var out = f(tape, vars);
  Tensor weights = random_tensor(tape.value(out).rows, tape.value(out).cols, wrng);
  Var loss = tape.sum_all(tape.hadamard(out, tape.constant(weights)));
  tape.backward(loss);

  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& analytic = tape.grad(vars[k]);
    REQUIRE(!analytic.data.empty());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Tensor> shifted = inputs;
        shifted[k].data[i] += delta;
        Tape t2(false);
        std::vector<Var> vs;
        for (const auto& t : shifted) vs.push_back(t2.leaf(t));
        Var o = f(t2, vs);
        double sum = 0.0;
        const Tensor& val = t2.value(o);
        for (std::size_t j = 0; j < val.size(); ++j) sum += val.data[j] * weights.data[j];
        return sum;
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double got = analytic.data[i];
      const double denom = std::max({1.0, std::abs(numeric), std::abs(got)});
      CHECK(std::abs(numeric - got) / denom < tol);
    }
  }
}

}  // namespace

TEST_CASE("matmul forward and gradient") {
  Rng rng(1);
  const Tensor a = random_tensor(3, 4, rng);
  const Tensor b = random_tensor(4, 2, rng);
  Tape tape(false);
  const Tensor& c = tape.value(tape.matmul(tape.leaf(a), tape.leaf(b)));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double want = 0.0;
      for (std::size_t p = 0; p < 4; ++p) want += a.at(i, p) * b.at(p, j);
      CHECK(c.at(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
  grad_check({a, b}, [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
}

TEST_CASE("matmul_nt gradient") {
  Rng rng(2);
  grad_check({random_tensor(3, 5, rng), random_tensor(4, 5, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.matmul_nt(v[0], v[1]); });
}

TEST_CASE("add, add_rowvec, hadamard, scale gradients") {
  Rng rng(3);
  grad_check({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); });
  grad_check({random_tensor(3, 4, rng), random_tensor(1, 4, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.add_rowvec(v[0], v[1]); });
  grad_check({random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.hadamard(v[0], v[1]); });
  grad_check({random_tensor(2, 6, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -1.37); });
}

TEST_CASE("activation gradients") {
  Rng rng(4);
  grad_check({random_tensor(3, 5, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.tanh_op(v[0]); });
  grad_check({random_tensor(3, 5, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.sigmoid(v[0]); });
  grad_check({random_tensor(3, 5, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.relu(v[0]); }, 1e-5);
}

TEST_CASE("masked softmax rows: normalization, masking, gradient") {
  Rng rng(5);
  const Tensor x = random_tensor(4, 6, rng);
  Tensor mask(4, 6, 0.0);
  mask.at(1, 2) = kMaskValue;
  mask.at(1, 4) = kMaskValue;
  for (std::size_t c = 0; c < 6; ++c) mask.at(3, c) = kMaskValue;  // fully masked row

  Tape tape(false);
  const Tensor& y = tape.value(tape.softmax_rows_masked(tape.leaf(x), mask));
  for (std::size_t r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 6; ++c) sum += y.at(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(y.at(1, 2) == 0.0);
  CHECK(y.at(1, 4) == 0.0);
  for (std::size_t c = 0; c < 6; ++c) CHECK(y.at(3, c) == 0.0);

  grad_check({x}, [&mask](Tape& t, const std::vector<Var>& v) {
    return t.softmax_rows_masked(v[0], mask);
  });
}

TEST_CASE("layer norm gradient") {
  Rng rng(6);
  grad_check({random_tensor(3, 8, rng), random_tensor(1, 8, rng), random_tensor(1, 8, rng)},
             [](Tape& t, const std::vector<Var>& v) {
               return t.layer_norm_rows(v[0], v[1], v[2]);
             },
             1e-6);
}

TEST_CASE("gather, slice, concat, scatter gradients") {
  Rng rng(7);
  grad_check({random_tensor(5, 3, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.gather_rows(v[0], {4, 0, 0, 2});  // repeated index accumulates
  });
  grad_check({random_tensor(3, 8, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.slice_cols(v[0], 2, 6); });
  grad_check({random_tensor(3, 2, rng), random_tensor(3, 4, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.concat_cols({v[0], v[1]}); });
  grad_check({random_tensor(2, 4, rng), random_tensor(3, 4, rng)},
             [](Tape& t, const std::vector<Var>& v) { return t.concat_rows({v[0], v[1]}); });
  grad_check({random_tensor(5, 3, rng), random_tensor(2, 3, rng)},
             [](Tape& t, const std::vector<Var>& v) {
               return t.scatter_add_rows(v[0], {1, 3}, v[1]);
             });
}

TEST_CASE("mean cross entropy value and gradient") {
  Rng rng(8);
  const Tensor logits = random_tensor(4, 5, rng, 2.0);
  const std::vector<std::size_t> rows{0, 2, 3};
  const std::vector<int> targets{1, 4, 0};

  Tape tape(true);
  Var l = tape.leaf(logits);
  Var loss = tape.mean_cross_entropy(l, rows, targets);
  double want = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double maxv = logits.at(rows[i], 0);
    for (std::size_t c = 1; c < 5; ++c) maxv = std::max(maxv, logits.at(rows[i], c));
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) sum += std::exp(logits.at(rows[i], c) - maxv);
    want += maxv + std::log(sum) - logits.at(rows[i], static_cast<std::size_t>(targets[i]));
  }
  want /= 3.0;
  CHECK(tape.value(loss).data[0] == doctest::Approx(want).epsilon(1e-12));

  tape.backward(loss);
  const Tensor& analytic = tape.grad(l);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto eval = [&](double delta) {
      Tensor shifted = logits;
      shifted.data[i] += delta;
      Tape t2(false);
      return t2.value(t2.mean_cross_entropy(t2.leaf(shifted), rows, targets)).data[0];
    };
    const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
    CHECK(std::abs(numeric - analytic.data[i]) < 1e-7);
  }

  // no masked rows -> zero loss
  Tape t3(false);
  CHECK(t3.value(t3.mean_cross_entropy(t3.leaf(logits), {}, {})).data[0] == 0.0);
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  // f(x) = sum(x*x + x) exercises multiple uses of one node
  Rng rng(9);
  grad_check({random_tensor(2, 3, rng)}, [](Tape& t, const std::vector<Var>& v) {
    return t.add(t.hadamard(v[0], v[0]), v[0]);
  });
}
