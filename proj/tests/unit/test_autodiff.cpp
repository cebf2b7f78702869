#include <cmath>
#include <functional>
#include <string>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "model_oracle.hpp"
#include "qdemu/autodiff.hpp"

using namespace qdemu;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;
using Vec = std::vector<double>;
// Double-precision reference of the same primitive over flat inputs.
using Reference = std::function<Vec(const std::vector<Vec>&)>;

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937& rng, float min_abs = 0.0f) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(ad::shape_size(shape));
  for (auto& x : v) {
    do x = u(rng); while (std::abs(x) < min_abs);
  }
  return Tensor(std::move(shape), std::move(v));
}

// Max relative error between float32 tape gradients of
// L = 0.5 * sum (out - r)^2 and central differences of the double reference,
// step 1e-2 relative to each input entry with one Richardson extrapolation.
double check_primitive(const Builder& build, const Reference& ref, std::vector<Tensor> inputs,
                       std::mt19937& rng) {
  Tape tape;
  std::vector<Var> vars;
  for (auto& x : inputs) vars.push_back(tape.leaf(x));
  const Var out = build(tape, vars);
  const Tensor r = random_tensor(out.value().shape(), rng);
  tape.backward(ad::sum_square(ad::sub(out, tape.constant(r)), 0.5f));

  std::vector<Vec> base;
  for (auto& x : inputs) base.emplace_back(x.values().begin(), x.values().end());
  const Vec y0 = ref(base);
  REQUIRE(y0.size() == out.value().size());
  for (std::size_t i = 0; i < y0.size(); ++i) {
    REQUIRE(out.value()[i] == doctest::Approx(y0[i]).epsilon(1e-5));
  }
  auto loss = [&](const std::vector<Vec>& in) {
    const Vec y = ref(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += 0.5 * (y[i] - r[i]) * (y[i] - r[i]);
    return s;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Vec analytic, numeric;
    for (std::size_t i = 0; i < base[k].size(); ++i) {
      const double h = 1e-2 * std::max(std::abs(base[k][i]), 1e-2);
      auto central = [&](double step) {
        auto in = base;
        in[k][i] = base[k][i] + step;
        const double lp = loss(in);
        in[k][i] = base[k][i] - step;
        return (lp - loss(in)) / (2 * step);
      };
      // Richardson: cancels the h^2 term.
      numeric.push_back((4.0 * central(h / 2) - central(h)) / 3.0);
      analytic.push_back(vars[k].grad()[i]);
    }
    worst = std::max(worst, oracle::max_rel_error(analytic, numeric));
  }
  return worst;
}

void check_20_seeds(const char* name, const Builder& build, const Reference& ref,
                    const std::function<std::vector<Tensor>(std::mt19937&)>& make) {
  const std::string label = name;
  CAPTURE(label);
  for (unsigned seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    std::mt19937 rng(seed);
    auto inputs = make(rng);
    CHECK(check_primitive(build, ref, std::move(inputs), rng) < 1e-3);
  }
}

Reference elementwise(std::function<double(double)> f) {
  return [f](const std::vector<Vec>& in) {
    Vec y(in[0].size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(in[0][i]);
    return y;
  };
}

Reference binary(std::function<double(double, double)> f) {
  return [f](const std::vector<Vec>& in) {
    Vec y(in[0].size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(in[0][i], in[1][i]);
    return y;
  };
}

Vec ref_matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

}  // namespace

TEST_CASE("relu values and derivatives") {
  Tape t;
  const Var x = t.leaf(Tensor({2}, {-1.0f, 2.0f}));
  const Var y = ad::relu(x);
  CHECK(y.value()[0] == 0.0f);
  CHECK(y.value()[1] == 2.0f);
  t.backward(ad::sum_square(y, 0.25f));  // d/dy = y / 2, so dL/dx = relu'(x) * y / 2
  CHECK(x.grad()[0] == 0.0f);
  CHECK(x.grad()[1] == 1.0f);
}

TEST_CASE("primitive gradients match finite differences on 20 seeds") {
  check_20_seeds(
      "matmul", [](Tape&, const std::vector<Var>& v) { return ad::matmul(v[0], v[1]); },
      [](const std::vector<Vec>& in) { return ref_matmul(in[0], in[1], 5, 7, 3); },
      [](std::mt19937& g) {
        return std::vector<Tensor>{random_tensor({5, 7}, g), random_tensor({7, 3}, g)};
      });
  auto pair = [](std::mt19937& g) {
    return std::vector<Tensor>{random_tensor({4, 6}, g), random_tensor({4, 6}, g)};
  };
  check_20_seeds("add", [](Tape&, const std::vector<Var>& v) { return ad::add(v[0], v[1]); },
                 binary([](double a, double b) { return a + b; }), pair);
  check_20_seeds("sub", [](Tape&, const std::vector<Var>& v) { return ad::sub(v[0], v[1]); },
                 binary([](double a, double b) { return a - b; }), pair);
  check_20_seeds("mul", [](Tape&, const std::vector<Var>& v) { return ad::mul(v[0], v[1]); },
                 binary([](double a, double b) { return a * b; }), pair);
  check_20_seeds(
      "add_bias", [](Tape&, const std::vector<Var>& v) { return ad::add_bias(v[0], v[1]); },
      [](const std::vector<Vec>& in) {
        Vec y(in[0]);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += in[1][i % 4];
        return y;
      },
      [](std::mt19937& g) {
        return std::vector<Tensor>{random_tensor({5, 4}, g), random_tensor({4}, g)};
      });
  auto one = [](std::mt19937& g) { return std::vector<Tensor>{random_tensor({3, 8}, g, 0.1f)}; };
  check_20_seeds("affine",
                 [](Tape&, const std::vector<Var>& v) { return ad::affine(v[0], -1.0f, 1.0f); },
                 elementwise([](double x) { return 1.0 - x; }), one);
  check_20_seeds("relu", [](Tape&, const std::vector<Var>& v) { return ad::relu(v[0]); },
                 elementwise([](double x) { return x > 0 ? x : 0.0; }), one);
  check_20_seeds("sigmoid", [](Tape&, const std::vector<Var>& v) { return ad::sigmoid(v[0]); },
                 elementwise([](double x) { return 1.0 / (1.0 + std::exp(-x)); }), one);
  check_20_seeds(
      "concat_cols",
      [](Tape&, const std::vector<Var>& v) { return ad::concat_cols({v[0], v[1], v[0]}); },
      [](const std::vector<Vec>& in) {
        Vec y;
        for (std::size_t r = 0; r < 3; ++r) {
          y.insert(y.end(), in[0].begin() + 2 * r, in[0].begin() + 2 * r + 2);
          y.insert(y.end(), in[1].begin() + 5 * r, in[1].begin() + 5 * r + 5);
          y.insert(y.end(), in[0].begin() + 2 * r, in[0].begin() + 2 * r + 2);
        }
        return y;
      },
      [](std::mt19937& g) {
        return std::vector<Tensor>{random_tensor({3, 2}, g), random_tensor({3, 5}, g)};
      });
  check_20_seeds(
      "slice_cols", [](Tape&, const std::vector<Var>& v) { return ad::slice_cols(v[0], 2, 3); },
      [](const std::vector<Vec>& in) {
        Vec y;
        for (std::size_t r = 0; r < 3; ++r) y.insert(y.end(), in[0].begin() + 8 * r + 2, in[0].begin() + 8 * r + 5);
        return y;
      },
      one);
  check_20_seeds(
      "reshape",
      [](Tape&, const std::vector<Var>& v) {
        return ad::matmul(ad::reshape(v[0], {6, 4}), ad::reshape(v[0], {4, 6}));
      },
      [](const std::vector<Vec>& in) { return ref_matmul(in[0], in[0], 6, 4, 6); }, one);
  const std::vector<std::uint32_t> picks{0, 5, 5, 23, 7, 1, 0, 12};
  auto idx = std::make_shared<std::vector<std::uint32_t>>(picks);
  check_20_seeds(
      "gather", [idx](Tape&, const std::vector<Var>& v) { return ad::gather(v[0], idx, {2, 4}); },
      [picks](const std::vector<Vec>& in) {
        Vec y;
        for (auto k : picks) y.push_back(in[0][k]);
        return y;
      },
      one);
  check_20_seeds(
      "sum_square", [](Tape&, const std::vector<Var>& v) { return ad::sum_square(v[0], 0.3f); },
      [](const std::vector<Vec>& in) {
        double s = 0.0;
        for (double x : in[0]) s += x * x;
        return Vec{0.3 * s};
      },
      one);
  check_20_seeds(
      "mean_square", [](Tape&, const std::vector<Var>& v) { return ad::mean_square(v[0]); },
      [](const std::vector<Vec>& in) {
        double s = 0.0;
        for (double x : in[0]) s += x * x;
        return Vec{s / in[0].size()};
      },
      one);
}

TEST_CASE("shape mismatches are rejected") {
  Tape t;
  const Var a = t.constant(Tensor({2, 3}));
  const Var b = t.constant(Tensor({2, 3}));
  CHECK_THROWS_AS(ad::matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ad::add(a, t.constant(Tensor({3, 2}))), std::invalid_argument);
  CHECK_THROWS_AS(ad::add_bias(a, t.constant(Tensor({2}))), std::invalid_argument);
  CHECK_THROWS_AS(ad::slice_cols(a, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(ad::reshape(a, {4}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1.0f}), std::invalid_argument);
}

TEST_CASE("backward semantics") {
  SUBCASE("non-scalar loss") {
    Tape t;
    const Var a = t.leaf(Tensor({2, 2}, 1.0f));
    CHECK_THROWS_AS(t.backward(ad::relu(a)), std::invalid_argument);
  }
  SUBCASE("constant loss and disconnected parameters give zero gradients") {
    Tape t;
    const Var w = t.leaf(Tensor({3}, 2.0f));
    const Var unused = t.leaf(Tensor({2, 2}, 1.0f));
    const Var c = ad::sum_square(t.constant(Tensor({3}, 1.0f)));
    t.backward(c);
    for (float g : w.grad().values()) CHECK(g == 0.0f);
    t.backward(ad::sum_square(w));
    for (float g : unused.grad().values()) CHECK(g == 0.0f);
    for (float g : w.grad().values()) CHECK(g == 4.0f);
  }
  SUBCASE("least squares gradient matches 2/n (Wx - y) x^T") {
    std::mt19937 rng(4);
    const std::size_t n = 9;
    const Tensor w0 = random_tensor({1, 4}, rng);
    const Tensor x0 = random_tensor({4, n}, rng);
    const Tensor y0 = random_tensor({1, n}, rng);
    Tape t;
    const Var w = t.leaf(w0);
    t.backward(ad::mean_square(ad::sub(ad::matmul(w, t.constant(x0)), t.constant(y0))));
    for (std::size_t k = 0; k < 4; ++k) {
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double wx = 0.0;
        for (std::size_t j = 0; j < 4; ++j) wx += double(w0[j]) * x0[j * n + i];
        g += 2.0 / n * (wx - y0[i]) * x0[k * n + i];
      }
      CHECK(w.grad()[k] == doctest::Approx(g).epsilon(1e-5));
    }
  }
  SUBCASE("identical inputs give bit-identical results") {
    std::mt19937 r1(8), r2(8);
    auto run = [](std::mt19937& rng) {
      Tape t;
      const Var a = t.leaf(random_tensor({6, 5}, rng));
      const Var b = t.leaf(random_tensor({5, 4}, rng));
      t.backward(ad::mean_square(ad::sigmoid(ad::matmul(a, b))));
      auto g = std::vector<float>(a.grad().values().begin(), a.grad().values().end());
      g.insert(g.end(), b.grad().values().begin(), b.grad().values().end());
      return g;
    };
    CHECK(run(r1) == run(r2));
  }
}

TEST_CASE("tensor storage is copy-on-write") {
  Tensor a({2, 2}, 1.0f);
  Tensor b = a;
  CHECK(a.shares_storage_with(b));
  b.mutable_data()[0] = 5.0f;
  CHECK(a[0] == 1.0f);
  CHECK(!a.shares_storage_with(b));
}

namespace {

struct CellParams {
  Tensor kernel, recurrent, bias, rbias;
};

std::vector<double> cell_reference(const CellParams& p, const std::vector<Tensor>& xs,
                                   bool reset_after) {
  oracle::Params op;
  op["gru/kernel"].assign(p.kernel.values().begin(), p.kernel.values().end());
  op["gru/recurrent"].assign(p.recurrent.values().begin(), p.recurrent.values().end());
  op["gru/bias"].assign(p.bias.values().begin(), p.bias.values().end());
  if (reset_after) op["gru/recurrent_bias"].assign(p.rbias.values().begin(), p.rbias.values().end());
  std::vector<double> h(4, 0.0);
  for (const auto& x : xs) {
    h = oracle::gru_step(std::vector<double>(x.values().begin(), x.values().end()), h, op,
                         reset_after);
  }
  return h;
}

}  // namespace

TEST_CASE("gru_cell fixed points and gates") {
  Tape t;
  const std::size_t k = 3;
  const Var zero_w = t.constant(Tensor({2, 3 * k}));
  const Var zero_u = t.constant(Tensor({k, 3 * k}));
  const Var zero_b = t.constant(Tensor({3 * k}));
  const auto w = ad::gru_weights(zero_w, zero_u, zero_b);
  const Var h = ad::gru_cell(t.constant(Tensor({1, 2}, 0.7f)), t.constant(Tensor({1, k})), w);
  for (float v : h.value().values()) CHECK(v == 0.0f);

  std::mt19937 rng(2);
  std::vector<float> b(3 * k, 0.0f);
  for (std::size_t j = 0; j < k; ++j) b[j] = -40.0f;  // z -> 0
  const auto gated = ad::gru_weights(t.constant(random_tensor({2, 3 * k}, rng)),
                                     t.constant(random_tensor({k, 3 * k}, rng)),
                                     t.constant(Tensor({3 * k}, b)));
  const Tensor h0 = random_tensor({1, k}, rng);
  const Var h1 = ad::gru_cell(t.constant(random_tensor({1, 2}, rng)), t.constant(h0), gated);
  for (std::size_t j = 0; j < k; ++j) CHECK(h1.value()[j] == doctest::Approx(h0[j]).epsilon(1e-6));
}

TEST_CASE("gru_cell over 3 steps matches a double reference and its finite differences") {
  for (bool reset_after : {false, true}) {
    for (unsigned seed = 0; seed < 20; ++seed) {
      CAPTURE(reset_after);
      CAPTURE(seed);
      std::mt19937 rng(100 + seed);
      CellParams p{random_tensor({5, 12}, rng), random_tensor({4, 12}, rng),
                   random_tensor({12}, rng), random_tensor({12}, rng)};
      std::vector<Tensor> xs;
      for (int s = 0; s < 3; ++s) xs.push_back(random_tensor({1, 5}, rng));
      const Tensor r = random_tensor({1, 4}, rng);

      Tape t;
      const Var kv = t.leaf(p.kernel), uv = t.leaf(p.recurrent), bv = t.leaf(p.bias),
                rv = t.leaf(p.rbias);
      const auto w = reset_after ? ad::gru_weights(kv, uv, bv, rv) : ad::gru_weights(kv, uv, bv);
      Var h = t.constant(Tensor({1, 4}));
      for (const auto& x : xs) h = ad::gru_cell(t.constant(x), h, w);
      const auto ref = cell_reference(p, xs, reset_after);
      for (std::size_t j = 0; j < 4; ++j) CHECK(h.value()[j] == doctest::Approx(ref[j]).epsilon(1e-5));
      t.backward(ad::sum_square(ad::sub(h, t.constant(r)), 0.5f));

      std::vector<std::pair<Tensor*, Var>> targets{{&p.kernel, kv}, {&p.recurrent, uv}, {&p.bias, bv}};
      if (reset_after) targets.push_back({&p.rbias, rv});
      for (auto& [tensor, var] : targets) {
        std::vector<double> analytic, numeric;
        for (std::size_t i = 0; i < tensor->size(); ++i) {
          const float x0 = (*tensor)[i];
          auto eval = [&](double dx) {
            // Perturb in double through the reference only.
            CellParams q = p;
            std::vector<float> v(tensor->values().begin(), tensor->values().end());
            Tensor* slot = tensor == &p.kernel      ? &q.kernel
                           : tensor == &p.recurrent ? &q.recurrent
                           : tensor == &p.bias      ? &q.bias
                                                    : &q.rbias;
            *slot = Tensor(tensor->shape(), v);
            oracle::Params op;
            auto put = [&](const char* n, const Tensor& tt) {
              op[n].assign(tt.values().begin(), tt.values().end());
            };
            put("gru/kernel", q.kernel);
            put("gru/recurrent", q.recurrent);
            put("gru/bias", q.bias);
            if (reset_after) put("gru/recurrent_bias", q.rbias);
            const char* name = slot == &q.kernel      ? "gru/kernel"
                               : slot == &q.recurrent ? "gru/recurrent"
                               : slot == &q.bias      ? "gru/bias"
                                                      : "gru/recurrent_bias";
            op[name][i] = double(x0) + dx;
            std::vector<double> hh(4, 0.0);
            for (const auto& x : xs) {
              hh = oracle::gru_step(std::vector<double>(x.values().begin(), x.values().end()), hh,
                                    op, reset_after);
            }
            double l = 0.0;
            for (std::size_t j = 0; j < 4; ++j) l += 0.5 * (hh[j] - r[j]) * (hh[j] - r[j]);
            return l;
          };
          const double step = 1e-5;
          numeric.push_back((eval(step) - eval(-step)) / (2 * step));
          analytic.push_back(var.grad()[i]);
        }
        CHECK(oracle::max_rel_error(analytic, numeric) < 1e-3);
      }
    }
  }
}
