#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "qdemu/io.hpp"
#include "qdemu/parallel.hpp"
#include "qdemu/rng.hpp"
#include "qdemu/trajectory_store.hpp"

namespace qdemu::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(10) << x;
  return s.str();
}

std::vector<SimCase> free_training_cases() {
  std::vector<SimCase> out;
  for (const auto& p : standard_training_grids().free) {
    std::ostringstream name;
    name << "free_x" << p.center << "_s" << p.spread << "_e" << p.energy;
    out.push_back({name.str(), "free", p, NoPotential{}});
  }
  return out;
}

std::vector<SimCase> simulation_cases(const RunConfig& rc) {
  const json& s = rc.raw["simulation"];
  const auto set = s["set"].get<std::string>();
  std::vector<SimCase> cases;
  if (set == "barrier") {
    cases = standard_training_grids().barrier;
  } else if (set == "free") {
    cases = free_training_cases();
  } else if (set == "custom") {
    cases = s["cases"].get<std::vector<SimCase>>();
  } else {
    throw std::invalid_argument("simulation.set must be barrier, free or custom");
  }
  return seeded_subset(cases, s["limit"].get<std::size_t>(), s["subset_seed"].get<std::uint64_t>());
}

Checkpoint load_model_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "params.json")) throw io::MissingInput(dir / "params.json", "train");
  return load_checkpoint(dir);
}

std::unique_ptr<WindowModel> model_for(const RunConfig& rc, bool oracle) {
  if (oracle) return std::make_unique<OracleModel>(rc.window);
  Checkpoint ck = load_model_checkpoint(rc.checkpoint_dir());
  return std::make_unique<NeuralModel>(ck.spec, std::move(ck.params), rc.window.v_scale);
}

SimCase rollout_case(const RunConfig& rc) {
  const json& c = rc.raw["rollout_case"];
  if (!c["case"].is_null()) return c["case"].get<SimCase>();
  const auto suite = suite_by_name(c["suite"].get<std::string>(), rc.grid);
  const auto name = c["name"].get<std::string>();
  for (const auto& sc : suite.cases) {
    if (sc.name == name) return sc;
  }
  throw std::invalid_argument("no case '" + name + "' in suite " + suite.name);
}

void print_report(const SuiteReport& rep) {
  for (const auto& c : rep.cases) {
    std::cout << "  " << std::left << std::setw(22) << c.name;
    if (c.ok()) {
      std::cout << " <C> " << std::fixed << std::setprecision(4) << c.mean_corr << "  <|e|> "
                << std::setprecision(5) << c.mean_mae << (c.truncated ? "  (truncated)" : "");
    } else {
      std::cout << " FAILED: " << c.error;
    }
    std::cout << std::defaultfloat << '\n';
  }
  std::cout << rep.suite << ": <C> = " << fmt(rep.mean_corr) << ", <|e|> = " << fmt(rep.mean_mae)
            << ", failures = " << rep.failures << '\n';
}

// One training run into `dir`; returns the checkpoint.
Checkpoint train_into(const RunConfig& rc, const Dataset& data, const ModelSpec& spec,
                      const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream log;
  log << "step,epoch,loss,lr,grad_norm\n";
  auto progress = [&](const LossPoint& p) {
    log << p.step << ',' << p.epoch << ',' << fmt(p.loss) << ',' << fmt(p.lr) << ','
        << fmt(p.grad_norm) << '\n';
    std::cerr << "[train " << to_string(spec.kind) << "] step " << p.step << " epoch " << p.epoch
              << " loss " << p.loss << '\n';
  };
  try {
    const TrainResult r = train(data, spec, rc.train, progress);
    save_checkpoint(dir, r.checkpoint);
    io::write_text(dir / "train_log.csv", log.str());
    io::write_json(dir / "train_summary.json",
                   {{"model", to_string(spec.kind)},
                    {"parameters", r.checkpoint.params.count()},
                    {"samples", data.size()},
                    {"steps", r.checkpoint.step},
                    {"initial_loss", r.initial_loss},
                    {"final_loss", r.final_loss},
                    {"seconds", seconds_since(t0)}});
    return r.checkpoint;
  } catch (const TrainingDiverged& e) {
    save_checkpoint(dir.string() + "_last_good", e.last_good);
    io::write_text(dir.string() + "_last_good/train_log.csv", log.str());
    throw;
  }
}

Dataset load_training_set(const RunConfig& rc) {
  const fs::path dir = rc.dataset_dir();
  if (!fs::exists(dir / "manifest.json")) throw io::MissingInput(dir / "manifest.json", "curriculum");
  return load_dataset(dir);
}

ModelSpec spec_for(const RunConfig& rc, const Dataset& data, ModelKind kind) {
  const WindowConfig& w = data.config;
  if (w.width != rc.window.width || w.history != rc.window.history ||
      w.channels != rc.window.channels) {
    throw std::invalid_argument("dataset windows are W=" + std::to_string(w.width) + " H=" +
                                std::to_string(w.history) + " C=" + std::to_string(w.channels) +
                                " but the config asks for W=" + std::to_string(rc.window.width) +
                                " H=" + std::to_string(rc.window.history) + " C=" +
                                std::to_string(rc.window.channels) + "; rerun curriculum");
  }
  ModelSpec spec = rc.model;
  spec.kind = kind;
  spec.width = data.config.width;
  spec.history = data.config.history;
  spec.channels = data.config.channels;
  spec.validate();
  return spec;
}

std::vector<Trajectory> load_training_trajectories(const RunConfig& rc) {
  const fs::path dir = rc.trajectories_dir();
  if (!fs::exists(dir / "index.json")) throw io::MissingInput(dir / "index.json", "simulate");
  const json index = io::read_json(dir / "index.json");
  std::vector<Trajectory> out;
  for (const auto& name : index.at("cases")) out.push_back(load_trajectory(dir / name.get<std::string>()));
  return out;
}

}  // namespace

int cmd_simulate(const RunConfig& rc) {
  write_snapshot(rc, "simulate");
  const auto cases = simulation_cases(rc);
  const fs::path dir = rc.trajectories_dir();
  fs::create_directories(dir);
  std::atomic<std::size_t> done{0}, skipped{0};
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(cases.size(), rc.workers, [&](std::size_t i) {
    const fs::path out = dir / cases[i].name;
    // Resumable: finished directories are kept.
    if (trajectory_complete(out)) {
      ++skipped;
    } else {
      const Trajectory t = run_simulation(cases[i].packet, cases[i].potential, rc.grid, rc.method);
      save_trajectory(out, t);
    }
    const std::size_t n = ++done;
    if (n % 50 == 0 || n == cases.size()) {
      std::cerr << "[simulate] " << n << "/" << cases.size() << " (" << std::fixed
                << std::setprecision(0) << seconds_since(t0) << " s)\n" << std::defaultfloat;
    }
  });
  json names = json::array();
  for (const auto& c : cases) names.push_back(c.name);
  io::write_json(dir / "index.json", {{"set", rc.raw["simulation"]["set"]}, {"cases", names}});
  std::cout << "simulated " << cases.size() - skipped << " trajectories (" << skipped
            << " already present) into " << dir.string() << '\n';
  return 0;
}

int cmd_curriculum(const RunConfig& rc) {
  write_snapshot(rc, "curriculum");
  const fs::path dir = rc.trajectories_dir();
  if (!fs::exists(dir / "index.json")) throw io::MissingInput(dir / "index.json", "simulate");
  const json index = io::read_json(dir / "index.json");
  CurriculumBuilder builder(
      rc.window, dataset_storage_from_string(rc.raw["curriculum"]["storage"].get<std::string>()));
  std::uint32_t id = 0;
  for (const auto& name : index.at("cases")) {
    const fs::path tdir = dir / name.get<std::string>();
    const Trajectory t = load_trajectory(tdir);
    json prov = io::read_json(tdir / "manifest.json");
    prov["name"] = name;
    prov["path"] = fs::absolute(tdir).lexically_normal().string();
    builder.add(t, id++, prov);
  }
  const std::size_t candidates = builder.candidates();
  const Dataset data = std::move(builder).finish();
  save_dataset(rc.dataset_dir(), data);
  std::cout << "kept " << data.size() << " of " << candidates << " candidate windows from " << id
            << " trajectories into " << rc.dataset_dir().string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& rc) {
  write_snapshot(rc, "train");
  const Dataset data = load_training_set(rc);
  const ModelSpec spec = spec_for(rc, data, rc.model.kind);
  const Checkpoint ck = train_into(rc, data, spec, rc.checkpoint_dir());
  std::cout << to_string(spec.kind) << ": " << ck.params.count() << " parameters, " << ck.step
            << " steps, checkpoint in " << rc.checkpoint_dir().string() << '\n';
  return 0;
}

int cmd_rollout(const RunConfig& rc) {
  write_snapshot(rc, "rollout");
  const bool oracle = rc.raw["evaluate"]["oracle"].get<bool>();
  const auto model = model_for(rc, oracle);
  const SimCase c = rollout_case(rc);
  SimGrid grid = rc.grid;
  grid.snapshots = std::max(grid.snapshots, rc.rollout.seed_steps + rc.rollout.n_steps);
  const Trajectory truth = run_simulation(c.packet, c.potential, grid, rc.method);
  const RolloutResult r = rollout(*model, truth, rc.rollout);
  const fs::path out = rc.output_dir / "rollout" / c.name;
  save_rollout(out, r, truth, rc.rollout);
  std::cout << c.name << ": " << r.steps() << " steps";
  if (!r.mae.empty()) std::cout << ", <C> " << fmt(r.mean_correlation()) << ", <|e|> " << fmt(r.mean_mae());
  std::cout << '\n';
  if (r.truncated) {
    std::cerr << r.diagnostic << '\n';
    return 2;
  }
  return 0;
}

int cmd_evaluate(const RunConfig& rc) {
  write_snapshot(rc, "evaluate");
  const bool oracle = rc.raw["evaluate"]["oracle"].get<bool>();
  const auto model = model_for(rc, oracle);
  const auto suite = suite_by_name(rc.raw["evaluate"]["suite"].get<std::string>(), rc.grid);
  const auto rep = run_suite(*model, suite, rc.grid, rc.rollout, rc.workers);
  const fs::path out = rc.output_dir / "evaluate";
  fs::create_directories(out);
  write_suite_csv(out / (suite.name + "_summary.csv"), rep);
  write_suite_steps_csv(out / (suite.name + "_steps.csv"), rep);
  print_report(rep);
  return 0;
}

int cmd_sweep(const RunConfig& rc) {
  write_snapshot(rc, "sweep");
  const json& s = rc.raw["sweep"];
  const fs::path out = rc.output_dir / "sweep";
  fs::create_directories(out);
  if (s["kind"] == "hyper") {
    HyperSweepConfig h;
    h.axis = hyper_axis_from_string(s["hyper_axis"].get<std::string>());
    h.values = s["hyper_values"].get<std::vector<std::size_t>>();
    h.n_seeds = s["n_seeds"].get<std::size_t>();
    h.window = rc.window;
    h.model = rc.model;
    h.train = rc.train;
    h.rollout = rc.rollout;
    h.workers = rc.workers;
    const auto training = load_training_trajectories(rc);
    const auto suite = suite_by_name(rc.raw["evaluate"]["suite"].get<std::string>(), rc.grid);
    const auto truths = simulate_suite(suite, rc.grid, rc.method, rc.workers);
    const auto pts = hyperparameter_sweep(h, training, suite, truths);
    write_hyper_csv(out / ("hyper_" + to_string(h.axis) + ".csv"), h.axis, pts);
    for (const auto& p : pts) {
      std::cout << to_string(h.axis) << "=" << p.value << "  mean <|e|> " << fmt(p.mean_mae)
                << "  mean <C> " << fmt(p.mean_corr) << "  failures " << p.failures.size() << '\n';
      for (const auto& f : p.failures) std::cerr << "  " << f << '\n';
    }
    return 0;
  }
  if (s["kind"] != "generalization") throw std::invalid_argument("sweep.kind must be generalization or hyper");
  const SweepAxis axis = sweep_axis_from_string(s["axis"].get<std::string>());
  auto values = s["values"].get<std::vector<double>>();
  if (values.empty()) values = default_sweep_values(axis);
  std::vector<std::string> paths = s["checkpoints"].get<std::vector<std::string>>();
  if (paths.empty()) paths.push_back(rc.checkpoint_dir().string());
  std::vector<std::unique_ptr<WindowModel>> models;
  for (const auto& p : paths) {
    Checkpoint ck = load_model_checkpoint(p);
    models.push_back(std::make_unique<NeuralModel>(ck.spec, std::move(ck.params), rc.window.v_scale));
  }
  std::vector<const WindowModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(m.get());
  const SimCase base = s["base"].is_null() ? default_sweep_case() : s["base"].get<SimCase>();
  const auto pts = generalization_sweep(ptrs, axis, values, base, rc.grid, rc.rollout, rc.workers);
  write_sweep_csv(out / ("sweep_" + to_string(axis) + ".csv"), axis, pts);
  for (const auto& p : pts) {
    std::cout << to_string(axis) << "=" << p.value << "  <C> " << fmt(p.mean) << " [" << fmt(p.min)
              << ", " << fmt(p.max) << "]\n";
  }
  return 0;
}

int cmd_interpret(const RunConfig& rc) {
  write_snapshot(rc, "interpret");
  const json& c = rc.raw["interpret"];
  const Dataset data = load_training_set(rc);
  const Checkpoint ck = load_model_checkpoint(rc.checkpoint_dir());
  const auto n = c["samples"].get<std::size_t>();
  std::function<bool(std::size_t)> keep;
  if (c["free_region_only"].get<bool>()) keep = [&](std::size_t k) { return free_region_window(data, k); };
  const fs::path out = rc.output_dir / "interpret";
  fs::create_directories(out);
  json report;
  auto run = [&](const ParameterSet& params, const std::string& tag) {
    const auto st = averaged_gradients(ck.spec, params, data, n, rc.seed, keep);
    write_attribution_csv(out / ("attribution_" + tag + ".csv"), st);
    const auto cr = cauchy_riemann_check(st.mean);
    report[tag] = {{"samples", n},
                   {"cauchy_riemann_re_re_minus_im_im", cr.re_re_minus_im_im},
                   {"cauchy_riemann_re_im_plus_im_re", cr.re_im_plus_im_re},
                   {"recency_fraction", st.recency_fraction}};
    std::cout << tag << ": CR deviations " << fmt(cr.re_re_minus_im_im) << ", "
              << fmt(cr.re_im_plus_im_re) << "; recency holds on " << fmt(100 * st.recency_fraction)
              << "% of windows\n";
  };
  run(ck.params, "trained");
  if (c["control"].get<bool>()) run(build_model(ck.spec, rc.seed), "random_init");
  io::write_json(out / "report.json", report);
  return 0;
}

int cmd_inspect(const std::string& path) {
  const fs::path p(path);
  if (fs::exists(p / "params.json")) {
    const Checkpoint ck = load_checkpoint(p);
    std::cout << "checkpoint " << p.string() << "\n  model: " << to_string(ck.spec.kind)
              << "\n  spec: " << json(ck.spec).dump() << "\n  parameters: " << ck.params.count()
              << "\n  step: " << ck.step << "\n  config hash: " << ck.config_hash << '\n';
    for (std::size_t i = 0; i < ck.params.names.size(); ++i) {
      std::cout << "    " << ck.params.names[i] << " [";
      const auto& s = ck.params.tensors[i].shape();
      for (std::size_t d = 0; d < s.size(); ++d) std::cout << (d ? ", " : "") << s[d];
      std::cout << "]\n";
    }
    return 0;
  }
  if (!fs::exists(p / "manifest.json")) throw io::MissingInput(p / "manifest.json", "simulate, curriculum or train");
  const json m = io::read_json(p / "manifest.json");
  const std::string kind = m.value("kind", "");
  if (kind == "trajectory") {
    const Trajectory t = load_trajectory(p);
    std::cout << "trajectory " << p.string() << "\n  snapshots: " << t.steps() << "\n  points: " << t.points()
              << "\n  packet: " << json(t.packet).dump()
              << "\n  potential: " << potential_to_json(t.potential).dump()
              << "\n  max norm drift: " << t.max_norm_drift() << '\n';
  } else {
    std::cout << p.string() << '\n' << m.dump(2) << '\n';
  }
  return 0;
}

int cmd_reproduce(const RunConfig& rc, const std::string& target) {
  write_snapshot(rc, "reproduce_" + target);
  if (target != "table1" && target != "fig4" && target != "fig5" && target != "s8") {
    throw std::invalid_argument("unknown reproduce target '" + target + "' (table1, fig4, fig5, s8)");
  }
  cmd_simulate(rc);
  if (target == "s8") {
    RunConfig h = rc;
    h.raw["sweep"]["kind"] = "hyper";
    return cmd_sweep(h);
  }
  cmd_curriculum(rc);
  const Dataset data = load_training_set(rc);
  std::vector<std::string> kinds = rc.raw["reproduce"]["models"].get<std::vector<std::string>>();
  if (target != "table1") kinds = {"gru"};
  std::ostringstream table;
  table << "model,parameters,mean_mae,mean_corr,failures\n";
  for (const auto& k : kinds) {
    const ModelSpec spec = spec_for(rc, data, model_kind_from_string(k));
    RunConfig sub = rc;
    sub.raw["paths"]["checkpoint"] = (rc.output_dir / ("checkpoint_" + k)).string();
    const Checkpoint ck = train_into(sub, data, spec, sub.checkpoint_dir());
    if (target == "table1") {
      const NeuralModel model(spec, ck.params, rc.window.v_scale);
      const auto suite = suite_by_name(rc.raw["evaluate"]["suite"].get<std::string>(), rc.grid);
      const auto rep = run_suite(model, suite, rc.grid, rc.rollout, rc.workers);
      fs::create_directories(rc.output_dir / "evaluate");
      write_suite_csv(rc.output_dir / "evaluate" / (k + "_summary.csv"), rep);
      write_suite_steps_csv(rc.output_dir / "evaluate" / (k + "_steps.csv"), rep);
      print_report(rep);
      table << k << ',' << ck.params.count() << ',' << fmt(rep.mean_mae) << ',' << fmt(rep.mean_corr)
            << ',' << rep.failures << '\n';
    } else if (target == "fig4") {
      for (const char* axis : {"S0", "E0", "W_b", "H_b"}) {
        RunConfig s = sub;
        s.raw["sweep"]["kind"] = "generalization";
        s.raw["sweep"]["axis"] = axis;
        s.raw["sweep"]["values"] = json::array();
        s.raw["sweep"]["checkpoints"] = json::array();
        cmd_sweep(s);
      }
    } else {
      cmd_interpret(sub);
    }
  }
  if (target == "table1") {
    io::write_text(rc.output_dir / "table1.csv", table.str());
    std::cout << table.str();
  }
  return 0;
}

}  // namespace qdemu::cli
