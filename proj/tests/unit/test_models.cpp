#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "model_oracle.hpp"
#include "qdemu/curriculum.hpp"
#include "qdemu/model.hpp"
#include "qdemu/rng.hpp"
#include "qdemu/sim.hpp"
#include "qdemu/training.hpp"

using namespace qdemu;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

ModelSpec spec_of(ModelKind kind, std::size_t channels = 3, bool reset_after = false) {
  ModelSpec s;
  s.kind = kind;
  s.channels = channels;
  s.gru_reset_after = reset_after;
  return s;
}

std::vector<float> random_inputs(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Windows from one short free simulation, C = 2.
Dataset free_dataset(std::size_t keep_count, std::uint64_t seed) {
  SimGrid grid;
  grid.snapshots = 40;
  const auto traj = run_simulation({40.0, 2.0, 5.0}, NoPotential{}, grid);
  WindowConfig cfg;
  cfg.channels = 2;
  cfg.seed = seed;
  cfg.spatial_keep_prob = 0.05;
  cfg.temporal_keep_prob = 1.0;
  Dataset all = build_curriculum({traj}, cfg);
  // Windows away from the packet carry nothing; keep the busiest ones.
  Dataset d;
  d.config = all.config;
  for (std::size_t k = 0; k < all.size() && d.size() < keep_count; ++k) {
    if (std::abs(int(all.origins[k].center) - 410) > 60) continue;
    d.inputs.insert(d.inputs.end(), all.input(k), all.input(k) + cfg.input_size());
    d.targets.insert(d.targets.end(), all.target(k), all.target(k) + cfg.target_size());
    d.origins.push_back(all.origins[k]);
  }
  return d;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(parameter_count(spec_of(ModelKind::linear, 3)) == 3220);
  CHECK(parameter_count(spec_of(ModelKind::linear, 2)) == 2162);
  CHECK(parameter_count(spec_of(ModelKind::dense, 3)) == 27163);
  CHECK(parameter_count(spec_of(ModelKind::dense, 2)) == 12834);
  // Layouts documented in the README; the published totals differ.
  CHECK(parameter_count(spec_of(ModelKind::gru, 3)) == 36823);
  CHECK(parameter_count(spec_of(ModelKind::gru, 3, true)) == 37030);
  CHECK(parameter_count(spec_of(ModelKind::conv, 3)) == 30489);
  CHECK(build_model(spec_of(ModelKind::gru), 1).count() == 36823);
  ModelSpec bad;
  bad.width = 22;
  CHECK_THROWS_AS(build_model(bad, 0), std::invalid_argument);
}

TEST_CASE("initialization is seeded fan-in uniform with zero biases") {
  const auto a = build_model(spec_of(ModelKind::dense), 5);
  const auto b = build_model(spec_of(ModelKind::dense), 5);
  const auto c = build_model(spec_of(ModelKind::dense), 6);
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    CHECK(std::equal(a.tensors[i].values().begin(), a.tensors[i].values().end(),
                     b.tensors[i].values().begin()));
    if (a.tensors[i].rank() == 1) {
      for (float v : a.tensors[i].values()) CHECK(v == 0.0f);
    } else {
      const double limit = std::sqrt(3.0 / a.tensors[i].shape()[0]);
      for (float v : a.tensors[i].values()) CHECK(std::abs(v) <= limit);
    }
  }
  CHECK(a.tensors[0][0] != c.tensors[0][0]);
}

TEST_CASE("forward matches the double reference for every architecture") {
  std::mt19937 rng(21);
  for (auto spec : {spec_of(ModelKind::linear), spec_of(ModelKind::dense), spec_of(ModelKind::conv),
                    spec_of(ModelKind::gru), spec_of(ModelKind::gru, 3, true),
                    spec_of(ModelKind::gru, 2)}) {
    CAPTURE(to_string(spec.kind));
    const auto params = build_model(spec, 3);
    const std::size_t batch = 3;
    const auto x = random_inputs(batch * spec.input_size(), rng);
    std::vector<float> y(batch * spec.output_size());
    predict(spec, params, x.data(), batch, y.data());
    const auto dp = oracle::to_double(params);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto ref = oracle::forward(
          spec, dp,
          std::vector<double>(x.begin() + b * spec.input_size(), x.begin() + (b + 1) * spec.input_size()));
      for (std::size_t o = 0; o < ref.size(); ++o) {
        CHECK(y[b * spec.output_size() + o] == doctest::Approx(ref[o]).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("full-architecture gradients match finite differences on 20 seeds") {
  for (auto spec : {spec_of(ModelKind::linear), spec_of(ModelKind::dense), spec_of(ModelKind::conv),
                    spec_of(ModelKind::gru), spec_of(ModelKind::gru, 3, true)}) {
    CAPTURE(to_string(spec.kind));
    CAPTURE(spec.gru_reset_after);
    for (unsigned seed = 0; seed < 20; ++seed) {
      CAPTURE(seed);
      std::mt19937 rng(1000 + seed);
      // Small nonzero biases so every bias path is exercised.
      auto params = build_model(spec, seed);
      for (auto& t : params.tensors) {
        if (t.rank() == 1) {
          float* d = t.mutable_data();
          for (std::size_t i = 0; i < t.size(); ++i) d[i] = 0.1f * random_inputs(1, rng)[0];
        }
      }
      const std::size_t batch = 2;
      const auto x = random_inputs(batch * spec.input_size(), rng);
      const auto y = random_inputs(batch * spec.output_size(), rng);

      Tape tape;
      const Var xv = tape.leaf(Tensor({batch, spec.input_size()}, x));
      const auto f = forward(tape, spec, params, xv, true);
      tape.backward(mse_loss(f.output, tape.constant(Tensor({batch, spec.output_size()}, y)),
                             spec.width));

      auto dp = oracle::to_double(params);
      std::vector<double> xd(x.begin(), x.end());
      auto loss = [&]() {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const auto out = oracle::forward(
              spec, dp,
              std::vector<double>(xd.begin() + b * spec.input_size(),
                                  xd.begin() + (b + 1) * spec.input_size()));
          for (std::size_t o = 0; o < out.size(); ++o) {
            const double d = out[o] - y[b * spec.output_size() + o];
            s += d * d;
          }
        }
        return s / (batch * spec.width);
      };
      auto fd = [&](double& slot) {
        const double x0 = slot, h = 1e-6 * std::max(std::abs(x0), 1.0);
        slot = x0 + h;
        const double lp = loss();
        slot = x0 - h;
        const double lm = loss();
        slot = x0;
        return (lp - lm) / (2 * h);
      };
      std::vector<double> analytic, numeric;
      std::uniform_int_distribution<std::size_t> pick;
      for (std::size_t p = 0; p < params.names.size(); ++p) {
        auto& vec = dp[params.names[p]];
        for (int s = 0; s < 6; ++s) {
          const std::size_t i = pick(rng) % vec.size();
          analytic.push_back(f.params[p].grad()[i]);
          numeric.push_back(fd(vec[i]));
        }
      }
      for (int s = 0; s < 12; ++s) {
        const std::size_t i = pick(rng) % xd.size();
        analytic.push_back(xv.grad()[i]);
        numeric.push_back(fd(xd[i]));
      }
      CHECK(oracle::max_rel_error(analytic, numeric) < 1e-3);
    }
  }
}

TEST_CASE("batched inference equals one-by-one inference bit for bit") {
  std::mt19937 rng(5);
  for (auto kind : {ModelKind::linear, ModelKind::dense, ModelKind::conv, ModelKind::gru}) {
    const auto spec = spec_of(kind);
    const auto params = build_model(spec, 9);
    const std::size_t batch = 7;
    const auto x = random_inputs(batch * spec.input_size(), rng);
    std::vector<float> all(batch * spec.output_size()), one(spec.output_size());
    predict(spec, params, x.data(), batch, all.data());
    for (std::size_t b = 0; b < batch; ++b) {
      predict(spec, params, x.data() + b * spec.input_size(), 1, one.data());
      for (std::size_t o = 0; o < one.size(); ++o) REQUIRE(one[o] == all[b * spec.output_size() + o]);
    }
  }
}

TEST_CASE("linear model consumes only the last time step") {
  const auto spec = spec_of(ModelKind::linear);
  const auto params = build_model(spec, 1);
  std::mt19937 rng(3);
  auto x = random_inputs(spec.input_size(), rng);
  std::vector<float> a(46), b(46);
  predict(spec, params, x.data(), 1, a.data());
  for (std::size_t i = 0; i < 3 * 69; ++i) x[i] = 0.0f;
  predict(spec, params, x.data(), 1, b.data());
  CHECK(a == b);
}

TEST_CASE("mse_loss") {
  Tape t;
  std::mt19937 rng(2);
  const auto p = random_inputs(3 * 46, rng);
  const auto q = random_inputs(3 * 46, rng);
  const Var pv = t.constant(Tensor({3, 46}, p));
  CHECK(mse_loss(pv, pv, 23).value()[0] == 0.0f);
  std::vector<float> shifted(p);
  for (auto& v : shifted) v += 1.0f;
  CHECK(mse_loss(t.constant(Tensor({3, 46}, shifted)), pv, 23).value()[0] ==
        doctest::Approx(2.0).epsilon(1e-6));
  double direct = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    double per = 0.0;
    for (std::size_t w = 0; w < 23; ++w) {
      const double dr = double(p[b * 46 + 2 * w]) - q[b * 46 + 2 * w];
      const double di = double(p[b * 46 + 2 * w + 1]) - q[b * 46 + 2 * w + 1];
      per += dr * dr + di * di;
    }
    direct += per / 23.0;
  }
  direct /= 3.0;
  CHECK(mse_loss(pv, t.constant(Tensor({3, 46}, q)), 23).value()[0] ==
        doctest::Approx(direct).epsilon(1e-6));
  CHECK_THROWS_AS(mse_loss(pv, t.constant(Tensor({3, 44})), 23), std::invalid_argument);
}

TEST_CASE("lr schedule") {
  const TrainConfig cfg;
  CHECK(lr_at(0, 1000, cfg) == 0.0);
  CHECK(lr_at(10, 1000, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at(5, 1000, cfg) == doctest::Approx(5e-4));
  CHECK(lr_at(1000, 1000, cfg) == doctest::Approx(1e-6));
  CHECK(lr_at(505, 1000, cfg) == doctest::Approx(0.5 * (1e-3 + 1e-6)));
  CHECK_THROWS(lr_at(0, 0, cfg));
}

TEST_CASE("adamw arithmetic") {
  ParameterSet p;
  p.names = {"w"};
  p.tensors = {Tensor({3}, {1.0f, -2.0f, 0.5f})};
  std::vector<Tensor> zero{Tensor({3}, 0.0f)};
  TrainConfig cfg;

  SUBCASE("zero gradients without decay leave parameters unchanged") {
    cfg.weight_decay = 0.0;
    auto state = init_adam(p);
    adamw_step(p, zero, state, cfg, 1e-3);
    CHECK(p.tensors[0][0] == 1.0f);
    CHECK(p.tensors[0][1] == -2.0f);
  }
  SUBCASE("decoupled decay scales by 1 - lr * lambda") {
    cfg.weight_decay = 1.0;
    auto state = init_adam(p);
    adamw_step(p, zero, state, cfg, 1e-3);
    CHECK(p.tensors[0][0] == doctest::Approx(1.0 * (1 - 1e-3)));
    CHECK(p.tensors[0][1] == doctest::Approx(-2.0 * (1 - 1e-3)));
  }
  SUBCASE("quadratic (theta - 3)^2 converges; matches a direct scalar simulation") {
    cfg.weight_decay = 0.0;
    const double lr = 0.05;
    ParameterSet q;
    q.names = {"theta"};
    q.tensors = {Tensor({1}, 0.0f)};
    auto state = init_adam(q);
    double theta = 0.0, m = 0.0, v = 0.0;
    for (int k = 1; k <= 500; ++k) {
      const float g = 2.0f * (q.tensors[0][0] - 3.0f);
      adamw_step(q, {Tensor({1}, {g})}, state, cfg, lr);
      const double gd = 2.0 * (theta - 3.0);
      m = 0.9 * m + 0.1 * gd;
      v = 0.99 * v + 0.01 * gd * gd;
      theta -= lr * (m / (1 - std::pow(0.9, k))) / (std::sqrt(v / (1 - std::pow(0.99, k))) + 1e-7);
    }
    CHECK(std::abs(q.tensors[0][0] - 3.0) < 1e-2);
    CHECK(std::abs(theta - 3.0) < 1e-2);
    CHECK(q.tensors[0][0] == doctest::Approx(theta).epsilon(1e-3));
  }
  SUBCASE("non-finite gradients abort") {
    auto state = init_adam(p);
    CHECK_THROWS_AS(adamw_step(p, {Tensor({3}, {0.0f, NAN, 0.0f})}, state, cfg, 1e-3),
                    NumericalError);
  }
}

TEST_CASE("global norm clipping") {
  std::vector<Tensor> g{Tensor({2}, {3.0f, 4.0f}), Tensor({1}, {12.0f})};
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(13.0));
  double sq = 0.0;
  for (auto& t : g) for (float v : t.values()) sq += double(v) * v;
  CHECK(std::sqrt(sq) <= 1.0 + 1e-6);
  std::vector<Tensor> small{Tensor({2}, {0.3f, 0.4f})};
  clip_global_norm(small, 1.0);
  CHECK(small[0][0] == 0.3f);
}

TEST_CASE("training memorizes a single repeated sample") {
  const Dataset base = free_dataset(1, 1);
  REQUIRE(base.size() == 1);
  Dataset d;
  d.config = base.config;
  for (int r = 0; r < 64; ++r) {
    d.inputs.insert(d.inputs.end(), base.inputs.begin(), base.inputs.end());
    d.targets.insert(d.targets.end(), base.targets.begin(), base.targets.end());
    d.origins.push_back(base.origins[0]);
  }
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 8;
  cfg.lr_peak = 1e-2;
  cfg.lr_final = 1e-5;
  cfg.weight_decay = 0.0;
  const auto r = train(d, spec_of(ModelKind::linear, 2), cfg);
  CHECK(evaluate_loss(d, spec_of(ModelKind::linear, 2), r.checkpoint.params) < 1e-6);
}

TEST_CASE("gru training on 100 free windows cuts the loss tenfold; runs are reproducible") {
  const Dataset d = free_dataset(100, 2);
  REQUIRE(d.size() == 100);
  const auto spec = spec_of(ModelKind::gru, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 1;
  cfg.seed = 4;
  cfg.log_every = 50;
  const auto before = evaluate_loss(d, spec, build_model(spec, derive_seed(cfg.seed, 0)));
  const auto a = train(d, spec, cfg);
  const double after = evaluate_loss(d, spec, a.checkpoint.params);
  MESSAGE("initial " << before << " final " << after);
  CHECK(after < before / 10);
  for (const auto& pt : a.curve) CHECK(pt.grad_norm >= 0.0);

  const auto b = train(d, spec, cfg);
  for (std::size_t i = 0; i < a.checkpoint.params.tensors.size(); ++i) {
    const auto& x = a.checkpoint.params.tensors[i];
    const auto& y = b.checkpoint.params.tensors[i];
    CHECK(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  }
}

TEST_CASE("divergence aborts with the last good checkpoint") {
  Dataset d = free_dataset(10, 3);
  d.inputs[5] = NAN;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 10;
  CHECK_THROWS_AS(train(d, spec_of(ModelKind::dense, 2), cfg), TrainingDiverged);
  try {
    train(d, spec_of(ModelKind::dense, 2), cfg);
  } catch (const TrainingDiverged& e) {
    CHECK(e.last_good.step == 0);
    CHECK(e.last_good.params.count() == 12834);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Dataset d = free_dataset(20, 5);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  const auto r = train(d, spec_of(ModelKind::conv, 2), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "qdemu_ckpt_rt";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir / "a", r.checkpoint);
  const auto back = load_checkpoint(dir / "a");
  CHECK(back.step == r.checkpoint.step);
  CHECK(back.optimizer.step == r.checkpoint.optimizer.step);
  CHECK(back.config_hash == r.checkpoint.config_hash);
  CHECK(back.spec.kind == ModelKind::conv);
  save_checkpoint(dir / "b", back);
  for (const char* f : {"params.json", "params.bin", "optimizer.bin"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_checkpoint(dir / "a"));
}
