#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "qdemu/metrics.hpp"
#include "qdemu/rollout.hpp"
#include "qdemu/trajectory_store.hpp"

using namespace qdemu;

namespace {

SimGrid short_grid(std::size_t snapshots) {
  SimGrid g;
  g.snapshots = snapshots;
  return g;
}

const Trajectory& barrier_traj() {
  static const Trajectory t = run_simulation({40.0, 2.0, 5.0}, RectangularBarrier{10.0, 7.0, {}},
                                             short_grid(40));
  return t;
}

std::vector<Complex> random_frame(std::size_t n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  std::vector<Complex> f(n);
  for (auto& z : f) z = {g(rng), g(rng)};
  return f;
}

// Emits NaN from the given target step on.
class NanModel : public WindowModel {
 public:
  NanModel(WindowConfig cfg, std::size_t from) : cfg_(cfg), from_(from) {}
  const WindowConfig& window() const override { return cfg_; }
  void predict(const StepContext& ctx, std::span<const std::size_t> centers, const float*,
               float* out) const override {
    const float v = ctx.target_step >= from_ ? NAN : 0.01f;
    std::fill(out, out + centers.size() * cfg_.target_size(), v);
  }

 private:
  WindowConfig cfg_;
  std::size_t from_;
};

}  // namespace

TEST_CASE("reassembly weights are a normalized gaussian") {
  for (double delta : {0.5, 2.0, 4.0, 8.0, 100.0}) {
    for (std::size_t width : {23u, 5u, 24u}) {
      WindowConfig w;
      w.width = width;
      const auto wt = reassembly_weights(w, delta);
      double s = 0.0;
      for (double x : wt) s += x;
      CHECK(std::abs(s - 1.0) < 1e-9);
      // Peak at offset zero.
      CHECK(std::max_element(wt.begin(), wt.end()) - wt.begin() == long(w.left()));
    }
  }
}

TEST_CASE("mae") {
  std::mt19937 rng(1);
  const auto a = random_frame(300, rng);
  CHECK(mae(a, a) == 0.0);
  auto b = a;
  for (auto& z : b) z += 0.01;
  CHECK(mae(b, a) == doctest::Approx(0.01).epsilon(1e-9));
  const auto c = random_frame(300, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dr = a[i].real() - c[i].real(), di = a[i].imag() - c[i].imag();
    s += std::sqrt(dr * dr + di * di);
  }
  CHECK(std::abs(mae(a, c) - s / 300) < 1e-7);
  CHECK_THROWS_AS(mae(a, std::span(c).first(299)), std::invalid_argument);
}

TEST_CASE("normalized correlation") {
  std::mt19937 rng(2);
  const auto a = random_frame(256, rng);
  CHECK(normalized_correlation(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<Complex> ia(a);
  for (auto& z : ia) z *= Complex(0, 1);
  CHECK(std::abs(normalized_correlation(ia, a)) < 1e-12);
  std::vector<Complex> left(256), right(256);
  for (std::size_t i = 0; i < 128; ++i) left[i] = a[i];
  for (std::size_t i = 128; i < 256; ++i) right[i] = a[i];
  CHECK(normalized_correlation(left, right) == 0.0);
  const auto c = random_frame(256, rng);
  double re = 0.0, na = 0.0, nc = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    re += (std::conj(c[i]) * a[i]).real();
    na += std::norm(a[i]);
    nc += std::norm(c[i]);
  }
  const double corr = normalized_correlation(c, a);
  CHECK(std::abs(corr - re / std::sqrt(na * nc)) < 1e-7);
  CHECK(corr >= -1.0);
  CHECK(corr <= 1.0);
  CHECK_THROWS_AS(normalized_correlation(std::vector<Complex>(256), a), std::invalid_argument);
}

TEST_CASE("oracle rollout reproduces the ground truth for any delta and stride") {
  const auto& t = barrier_traj();
  WindowConfig w;
  const OracleModel oracle(w);
  for (double delta : {2.0, 3.0, 4.0, 6.0, 8.0}) {
    for (std::size_t stride : {1u, 3u, 23u}) {
      RolloutConfig cfg;
      cfg.delta = delta;
      cfg.stride = stride;
      cfg.n_steps = 30;
      const auto r = rollout(oracle, t, cfg);
      REQUIRE(r.has_truth);
      REQUIRE(r.steps() == 30);
      double worst = 0.0;
      for (std::size_t s = 0; s < r.steps(); ++s) {
        const auto p = r.frame(s);
        const auto truth = t.frame(4 + s);
        for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - truth[i]));
        CHECK(r.correlation[s] == doctest::Approx(1.0).epsilon(1e-9));
      }
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("translation equivariance is exact") {
  std::mt19937 rng(3);
  ModelSpec spec;  // gru, C = 3
  const NeuralModel model(spec, build_model(spec, 4));
  const auto& t = barrier_traj();
  const std::size_t n = t.points(), shift = 37;
  std::vector<std::vector<Complex>> frames, shifted;
  std::vector<double> v(n);
  for (std::size_t h = 0; h < 4; ++h) {
    const auto f = t.frame(10 + h);
    frames.emplace_back(f.begin(), f.end());
    shifted.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) shifted.back()[(i + shift) % n] = f[i];
  }
  for (std::size_t i = 0; i < n; ++i) v[(i + shift) % n] = t.v[i];
  std::vector<std::span<const Complex>> a(frames.begin(), frames.end()),
      b(shifted.begin(), shifted.end());
  const RolloutConfig cfg;
  const auto pa = predict_step(model, a, t.v, cfg);
  const auto pb = predict_step(model, b, v, cfg);
  for (std::size_t i = 0; i < n; ++i) REQUIRE(pb[(i + shift) % n] == pa[i]);
}

TEST_CASE("chunked window batches equal a single batch bit for bit") {
  ModelSpec spec;
  spec.kind = ModelKind::conv;
  const NeuralModel model(spec, build_model(spec, 8));
  RolloutConfig big, small;
  big.n_steps = small.n_steps = 3;
  big.batch = 1024;
  small.batch = 1;
  const auto ra = rollout(model, barrier_traj(), big);
  const auto rb = rollout(model, barrier_traj(), small);
  REQUIRE(ra.predicted.size() == rb.predicted.size());
  for (std::size_t i = 0; i < ra.predicted.size(); ++i) REQUIRE(ra.predicted[i] == rb.predicted[i]);
}

TEST_CASE("random-init model decorrelates within 400 steps") {
  const auto t = run_simulation({40.0, 2.0, 5.0}, NoPotential{}, short_grid(404));
  ModelSpec spec;
  spec.kind = ModelKind::linear;
  spec.channels = 2;
  const NeuralModel model(spec, build_model(spec, 11));
  RolloutConfig cfg;
  const auto r = rollout(model, t, cfg);
  REQUIRE(r.has_truth);
  CHECK(r.correlation.size() == 400);
  CHECK(*std::min_element(r.correlation.begin(), r.correlation.end()) < 0.5);
}

TEST_CASE("non-finite predictions truncate the rollout") {
  const NanModel model(WindowConfig{}, 7);
  RolloutConfig cfg;
  cfg.n_steps = 20;
  const auto r = rollout(model, barrier_traj(), cfg);
  CHECK(r.truncated);
  CHECK(r.steps() == 3);
  CHECK(r.mae.size() == 3);
  CHECK(r.diagnostic.find("step 7") != std::string::npos);
}

TEST_CASE("renormalization keeps the seed norm") {
  const NanModel model(WindowConfig{}, 1000);
  RolloutConfig cfg;
  cfg.n_steps = 5;
  cfg.renormalize = true;
  const auto& t = barrier_traj();
  const auto r = rollout(model, t, cfg);
  for (std::size_t s = 0; s < r.steps(); ++s) {
    CHECK(probability(r.frame(s), t.grid.dx()) == doctest::Approx(probability(t.frame(3), t.grid.dx())));
  }
}

TEST_CASE("argument checks") {
  const OracleModel oracle(WindowConfig{});
  RolloutConfig cfg;
  cfg.seed_steps = 3;
  CHECK_THROWS_AS(rollout(oracle, barrier_traj(), cfg), std::invalid_argument);
  cfg = {};
  cfg.delta = 0.0;
  CHECK_THROWS_AS(rollout(oracle, barrier_traj(), cfg), std::invalid_argument);
  cfg = {};
  std::vector<Complex> f(1024), g(1000);
  std::vector<std::span<const Complex>> frames{f, f, f, g};
  CHECK_THROWS_AS(predict_step(oracle, frames, barrier_traj().v, cfg), std::invalid_argument);
  frames.pop_back();
  CHECK_THROWS_AS(predict_step(oracle, frames, barrier_traj().v, cfg), std::invalid_argument);
  // Oracle beyond the truth.
  cfg.n_steps = 100;
  CHECK_THROWS_AS(rollout(oracle, barrier_traj(), cfg), std::out_of_range);
  nlohmann::json j = {{"delta", 2.0}, {"n_stpes", 3}};
  CHECK_THROWS_AS(j.get<RolloutConfig>(), std::invalid_argument);
}

TEST_CASE("rollout persistence") {
  const OracleModel oracle(WindowConfig{});
  RolloutConfig cfg;
  cfg.n_steps = 6;
  const auto& t = barrier_traj();
  const auto r = rollout(oracle, t, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "qdemu_rollout_store";
  std::filesystem::remove_all(dir);
  save_rollout(dir, r, t, cfg);
  const auto back = load_trajectory(dir);
  CHECK(back.steps() == 6);
  CHECK(std::abs(back.frame(5)[400] - r.frame(5)[400]) < 1e-6);
  std::ifstream csv(dir / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "step,mae,correlation");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
  std::filesystem::remove_all(dir);
}
