#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qdemu/analysis.hpp"
#include "qdemu/json_util.hpp"

namespace qdemu {
namespace {

std::string num(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

SimCase make_case(std::string name, std::string category, PacketSpec p, PotentialSpec v) {
  return SimCase{std::move(name), std::move(category), p, std::move(v)};
}

double wrapped(double d, double length) {
  d = std::fmod(d, length);
  if (d >= 0.5 * length) d -= length;
  if (d < -0.5 * length) d += length;
  return d;
}

// Samples f(d), d the periodic offset from the box center.
template <typename F>
PiecewiseSamples sampled(const SimGrid& grid, F f) {
  PiecewiseSamples p;
  p.values.resize(grid.points);
  for (std::size_t i = 0; i < grid.points; ++i) {
    p.values[i] = f(wrapped(grid.x(i) - 0.5 * grid.length, grid.length));
  }
  return p;
}

}  // namespace

TestSuite TestSuite::select(const std::vector<std::string>& categories) const {
  TestSuite out{name, {}};
  for (const auto& c : cases) {
    for (const auto& want : categories) {
      if (c.category == want) {
        out.cases.push_back(c);
        break;
      }
    }
  }
  return out;
}

TestSuite free_suite() {
  TestSuite s{"free", {}};
  for (double x0 : {25.0, 55.0}) {
    for (double s0 : {1.25, 2.75}) {
      for (double e0 : {2.5, 4.5, 6.5}) {
        s.cases.push_back(make_case("free_x" + num(x0) + "_s" + num(s0) + "_e" + num(e0), "free",
                                    {x0, s0, e0}, NoPotential{}));
      }
    }
  }
  return s;
}

TestSuite potential_suite(const SimGrid& grid) {
  TestSuite s{"potential", {}};
  auto& c = s.cases;
  struct Rect {
    double x0, s0, e0, h, w;
  };
  // Barrier at the box center; packets start left of it.
  const Rect rects[] = {{30, 2.0, 4.0, 3, 7},   {30, 2.5, 6.0, 5, 7}, {25, 1.5, 5.0, 8, 7},
                        {35, 3.0, 7.0, 10, 7},  {30, 2.0, 8.0, 12, 7}, {20, 2.0, 3.0, 2, 7},
                        {30, 2.0, 5.0, 6, 4},   {30, 2.0, 5.0, 6, 10}, {25, 2.5, 9.0, 7, 5},
                        {35, 1.75, 2.0, 1.5, 7}, {30, 3.5, 6.5, 13, 7}};
  int k = 0;
  for (const auto& r : rects) {
    c.push_back(make_case("rect" + std::to_string(++k) + "_h" + num(r.h) + "_w" + num(r.w), "rect",
                          {r.x0, r.s0, r.e0}, RectangularBarrier{r.h, r.w, {}}));
  }
  const PacketSpec p{30.0, 2.0, 5.0};
  c.push_back(make_case("double_a", "multi_rect", p,
                        MultiRectangular{{{6.0, 3.0, 45.0}, {6.0, 3.0, 58.0}}}));
  c.push_back(make_case("double_b", "multi_rect", {30.0, 2.5, 6.0},
                        MultiRectangular{{{4.0, 2.0, 48.0}, {9.0, 4.0, 60.0}}}));
  c.push_back(make_case("triple", "multi_rect", p,
                        MultiRectangular{{{5.0, 2.0, 45.0}, {5.0, 2.0, 52.0}, {5.0, 2.0, 59.0}}}));
  // Irregular shapes approximate hand-drawn barriers.
  c.push_back(make_case("pyramid", "pyramid", p, PyramidBarrier{3, 12.0, 9.0, {}}));
  c.push_back(make_case("half_circle", "half_circle", p, HalfCircleBarrier{5.0, 8.0, {}}));
  c.push_back(make_case("ramp_up", "irregular", p, sampled(grid, [](double d) {
                          return d >= -5.0 && d < 5.0 ? (d + 5.0) : 0.0;
                        })));
  c.push_back(make_case("ramp_down", "irregular", p, sampled(grid, [](double d) {
                          return d >= -5.0 && d < 5.0 ? (5.0 - d) : 0.0;
                        })));
  c.push_back(make_case("gaussian_bump", "irregular", {30.0, 2.0, 6.0}, sampled(grid, [](double d) {
                          return 8.0 * std::exp(-d * d / (2.0 * 2.5 * 2.5));
                        })));
  c.push_back(make_case("staircase", "irregular", p, sampled(grid, [](double d) {
                          if (d >= -5.0 && d < 0.0) return 4.0;
                          if (d >= 0.0 && d < 4.0) return 9.0;
                          return 0.0;
                        })));
  c.push_back(make_case("notched", "irregular", {30.0, 2.0, 7.0}, sampled(grid, [](double d) {
                          if (std::abs(d) < 1.0) return 4.0;
                          return std::abs(d) < 4.5 ? 10.0 : 0.0;
                        })));
  c.push_back(make_case("quadratic_a", "quadratic", p, QuadraticPotential{0.005, 50.0}));
  c.push_back(make_case("quadratic_b", "quadratic", {35.0, 1.5, 4.0}, QuadraticPotential{0.01, 45.0}));
  c.push_back(make_case("well_a", "well", p, RectangularWell{5.0, 7.0, {}}));
  c.push_back(make_case("well_b", "well", {30.0, 2.0, 7.0}, RectangularWell{10.0, 4.0, {}}));
  return s;
}

TestSuite standard_suite(const SimGrid& grid) {
  TestSuite s = free_suite();
  s.name = "standard";
  const TestSuite p = potential_suite(grid);
  s.cases.insert(s.cases.end(), p.cases.begin(), p.cases.end());
  return s;
}

TestSuite suite_by_name(const std::string& name, const SimGrid& grid) {
  if (name == "free") return free_suite();
  if (name == "potential") return potential_suite(grid);
  if (name == "standard") return standard_suite(grid);
  if (name == "rect") {
    TestSuite s = potential_suite(grid).select({"rect"});
    s.name = "rect";
    return s;
  }
  if (name == "figure") {
    TestSuite s = potential_suite(grid).select({"pyramid", "half_circle"});
    s.name = "figure";
    return s;
  }
  throw std::invalid_argument("unknown suite '" + name +
                              "' (free, potential, standard, rect, figure)");
}

void to_json(nlohmann::json& j, const SimCase& c) {
  j = {{"name", c.name},
       {"category", c.category},
       {"packet", c.packet},
       {"potential", potential_to_json(c.potential)}};
}

void from_json(const nlohmann::json& j, SimCase& c) {
  require_known_keys(j, {"name", "category", "packet", "potential"}, "case");
  c.name = j.at("name").get<std::string>();
  c.category = j.value("category", "custom");
  c.packet = j.at("packet").get<PacketSpec>();
  c.potential = j.contains("potential") ? potential_from_json(j.at("potential")) : NoPotential{};
}

}  // namespace qdemu
