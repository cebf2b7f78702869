#include <stdexcept>

#include "qdemu/json_util.hpp"
#include "qdemu/sim.hpp"

namespace qdemu {

using nlohmann::json;

void to_json(json& j, const SimGrid& g) {
  j = json{{"length", g.length},
           {"points", g.points},
           {"dt_internal", g.dt_internal},
           {"snapshot_stride", g.snapshot_stride},
           {"snapshots", g.snapshots}};
}

void from_json(const json& j, SimGrid& g) {
  require_known_keys(j, {"length", "points", "dt_internal", "snapshot_stride", "snapshots"},
                     "grid");
  read_optional(j, "length", g.length);
  read_optional(j, "points", g.points);
  read_optional(j, "dt_internal", g.dt_internal);
  read_optional(j, "snapshot_stride", g.snapshot_stride);
  read_optional(j, "snapshots", g.snapshots);
}

std::string to_string(Modulation m) {
  switch (m) {
    case Modulation::gaussian: return "gaussian";
    case Modulation::triangle: return "triangle";
    case Modulation::square: return "square";
  }
  return "gaussian";
}

Modulation modulation_from_string(const std::string& s) {
  if (s == "gaussian") return Modulation::gaussian;
  if (s == "triangle") return Modulation::triangle;
  if (s == "square") return Modulation::square;
  throw std::invalid_argument("unknown packet modulation '" + s + "'");
}

std::string to_string(PropagationMethod m) {
  return m == PropagationMethod::spectral ? "spectral" : "tridiagonal";
}

PropagationMethod propagation_method_from_string(const std::string& s) {
  if (s == "spectral") return PropagationMethod::spectral;
  if (s == "tridiagonal") return PropagationMethod::tridiagonal;
  throw std::invalid_argument("unknown propagation method '" + s + "'");
}

void to_json(json& j, const PacketSpec& p) {
  j = json{{"center", p.center},
           {"spread", p.spread},
           {"energy", p.energy},
           {"modulation", to_string(p.modulation)}};
}

void from_json(const json& j, PacketSpec& p) {
  require_known_keys(j, {"center", "spread", "energy", "modulation"}, "packet");
  read_optional(j, "center", p.center);
  read_optional(j, "spread", p.spread);
  read_optional(j, "energy", p.energy);
  if (j.contains("modulation")) {
    p.modulation = modulation_from_string(j.at("modulation").get<std::string>());
  }
}

namespace {

void put_center(json& j, const std::optional<double>& c) {
  if (c) j["center"] = *c;
}

void get_center(const json& j, std::optional<double>& c) {
  if (j.contains("center")) c = j.at("center").get<double>();
}

json rect_to_json(const RectangularBarrier& b) {
  json j{{"height", b.height}, {"width", b.width}};
  put_center(j, b.center);
  return j;
}

RectangularBarrier rect_from_json(const json& j) {
  require_known_keys(j, {"shape", "height", "width", "center"}, "rectangular barrier");
  RectangularBarrier b;
  read_optional(j, "height", b.height);
  read_optional(j, "width", b.width);
  get_center(j, b.center);
  return b;
}

struct ToJson {
  json operator()(const NoPotential&) const { return json{{"shape", "none"}}; }
  json operator()(const RectangularBarrier& b) const {
    json j = rect_to_json(b);
    j["shape"] = "rectangular";
    return j;
  }
  json operator()(const MultiRectangular& m) const {
    json list = json::array();
    for (const auto& b : m.barriers) list.push_back(rect_to_json(b));
    return json{{"shape", "multi_rectangular"}, {"barriers", list}};
  }
  json operator()(const PyramidBarrier& p) const {
    json j{{"shape", "pyramid"},
           {"steps", p.steps},
           {"base_width", p.base_width},
           {"height", p.height}};
    put_center(j, p.center);
    return j;
  }
  json operator()(const HalfCircleBarrier& h) const {
    json j{{"shape", "half_circle"}, {"radius", h.radius}, {"peak", h.peak}};
    put_center(j, h.center);
    return j;
  }
  json operator()(const QuadraticPotential& q) const {
    return json{{"shape", "quadratic"}, {"curvature", q.curvature}, {"vertex", q.vertex}};
  }
  json operator()(const RectangularWell& w) const {
    json j{{"shape", "rectangular_well"}, {"depth", w.depth}, {"width", w.width}};
    put_center(j, w.center);
    return j;
  }
  json operator()(const PiecewiseSamples& p) const {
    return json{{"shape", "piecewise_samples"}, {"values", p.values}};
  }
};

}  // namespace

json potential_to_json(const PotentialSpec& spec) { return std::visit(ToJson{}, spec); }

PotentialSpec potential_from_json(const json& j) {
  if (!j.is_object() || !j.contains("shape")) {
    throw std::invalid_argument("potential needs a 'shape' tag");
  }
  const auto shape = j.at("shape").get<std::string>();
  if (shape == "none") {
    require_known_keys(j, {"shape"}, "potential none");
    return NoPotential{};
  }
  if (shape == "rectangular") return rect_from_json(j);
  if (shape == "multi_rectangular") {
    require_known_keys(j, {"shape", "barriers"}, "multi_rectangular potential");
    MultiRectangular m;
    for (const auto& b : j.at("barriers")) m.barriers.push_back(rect_from_json(b));
    return m;
  }
  if (shape == "pyramid") {
    require_known_keys(j, {"shape", "steps", "base_width", "height", "center"}, "pyramid");
    PyramidBarrier p;
    read_optional(j, "steps", p.steps);
    read_optional(j, "base_width", p.base_width);
    read_optional(j, "height", p.height);
    get_center(j, p.center);
    return p;
  }
  if (shape == "half_circle") {
    require_known_keys(j, {"shape", "radius", "peak", "center"}, "half_circle");
    HalfCircleBarrier h;
    read_optional(j, "radius", h.radius);
    read_optional(j, "peak", h.peak);
    get_center(j, h.center);
    return h;
  }
  if (shape == "quadratic") {
    require_known_keys(j, {"shape", "curvature", "vertex"}, "quadratic");
    QuadraticPotential q;
    read_optional(j, "curvature", q.curvature);
    read_optional(j, "vertex", q.vertex);
    return q;
  }
  if (shape == "rectangular_well") {
    require_known_keys(j, {"shape", "depth", "width", "center"}, "rectangular_well");
    RectangularWell w;
    read_optional(j, "depth", w.depth);
    read_optional(j, "width", w.width);
    get_center(j, w.center);
    return w;
  }
  if (shape == "piecewise_samples") {
    require_known_keys(j, {"shape", "values"}, "piecewise_samples");
    return PiecewiseSamples{j.at("values").get<std::vector<double>>()};
  }
  throw std::invalid_argument("unknown potential shape '" + shape + "'");
}

}  // namespace qdemu
