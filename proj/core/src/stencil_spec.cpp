#include "mmstencil/stencil_spec.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace mmstencil {

namespace {

using nlohmann::json;

void require_dims(int dims) {
  if (dims != 2 && dims != 3)
    throw std::invalid_argument("stencil dims must be 2 or 3, got " + std::to_string(dims));
}

void require_tables(int dims, const std::vector<CoefficientTable>& tables) {
  require_dims(dims);
  if (static_cast<int>(tables.size()) != dims)
    throw std::invalid_argument("expected one coefficient table per axis");
  for (const auto& t : tables)
    if (t.radius != tables[0].radius)
      throw std::invalid_argument("per-axis tables must share one radius");
}

}  // namespace

const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::Star: return "star";
    case Pattern::Box: return "box";
    case Pattern::Axis: return "axis";
  }
  return "?";
}

StencilSpec make_star_spec(int dims, const std::vector<CoefficientTable>& tables) {
  require_tables(dims, tables);
  const int r = tables[0].radius;
  StencilSpec s;
  s.pattern = Pattern::Star;
  s.dims = dims;
  s.radius = r;
  double center = 0.0;
  for (int a = 0; a < dims; ++a) {
    center += tables[static_cast<std::size_t>(a)].value_at(0);
    for (int k = -r; k <= r; ++k) {
      if (k == 0) continue;
      Dims3 off{0, 0, 0};
      off[a] = k;
      s.entries.push_back({off, tables[static_cast<std::size_t>(a)].value_at(k)});
    }
  }
  s.entries.push_back({Dims3{0, 0, 0}, center});
  return s;
}

StencilSpec make_box_spec(int dims, const std::vector<CoefficientTable>& tables) {
  require_tables(dims, tables);
  const int r = tables[0].radius;
  StencilSpec s;
  s.pattern = Pattern::Box;
  s.dims = dims;
  s.radius = r;
  const int zr = dims == 3 ? r : 0;
  for (int dz = -zr; dz <= zr; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        double v = tables[0].value_at(dx) * tables[1].value_at(dy);
        if (dims == 3) v *= tables[2].value_at(dz);
        s.entries.push_back({Dims3{dx, dy, dz}, v});
      }
  return s;
}

StencilSpec make_axis_spec(int dims, int axis, const CoefficientTable& table) {
  require_dims(dims);
  if (axis < 0 || axis >= dims)
    throw std::invalid_argument("axis out of range for stencil dims");
  StencilSpec s;
  s.pattern = Pattern::Axis;
  s.dims = dims;
  s.radius = table.radius;
  s.axis = axis;
  for (int k = -table.radius; k <= table.radius; ++k) {
    Dims3 off{0, 0, 0};
    off[axis] = k;
    s.entries.push_back({off, table.value_at(k)});
  }
  return s;
}

StencilSpec make_star_spec(int dims, int radius) {
  std::vector<CoefficientTable> tables;
  for (int a = 0; a < dims; ++a)
    tables.push_back(generate_fd_coefficients(radius, Derivative::Second, 1.0).with_axis(a));
  return make_star_spec(dims, tables);
}

StencilSpec make_box_spec(int dims, int radius) {
  std::vector<CoefficientTable> tables;
  for (int a = 0; a < dims; ++a)
    tables.push_back(generate_fd_coefficients(radius, Derivative::Second, 1.0).with_axis(a));
  return make_box_spec(dims, tables);
}

StencilSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stencil spec JSON parse error: ") + e.what());
  }
  try {
    const std::string pattern = j.at("pattern").get<std::string>();
    const int dims = j.at("dims").get<int>();
    require_dims(dims);
    const int radius = j.at("radius").get<int>();

    if (j.at("coeffs").is_string()) {
      if (j.at("coeffs").get<std::string>() != "generated")
        throw ConfigError("coeffs must be \"generated\" or an entry list");
      const std::string d = j.value("derivative", std::string("second"));
      const Derivative order = d == "first" ? Derivative::First : Derivative::Second;
      const double h = j.value("spacing", 1.0);
      std::vector<CoefficientTable> tables;
      for (int a = 0; a < dims; ++a)
        tables.push_back(generate_fd_coefficients(radius, order, h).with_axis(a));
      if (pattern == "star") return make_star_spec(dims, tables);
      if (pattern == "box") return make_box_spec(dims, tables);
      if (pattern == "axis")
        return make_axis_spec(dims, j.value("axis", 0), tables[0]);
      throw ConfigError("unknown pattern \"" + pattern + "\"");
    }

    StencilSpec s;
    s.dims = dims;
    s.radius = radius;
    if (pattern == "star") s.pattern = Pattern::Star;
    else if (pattern == "box") s.pattern = Pattern::Box;
    else if (pattern == "axis") { s.pattern = Pattern::Axis; s.axis = j.value("axis", 0); }
    else throw ConfigError("unknown pattern \"" + pattern + "\"");
    for (const auto& e : j.at("coeffs")) {
      const auto& off = e.at("offset");
      Dims3 o{off.at(0).get<std::int64_t>(), off.at(1).get<std::int64_t>(),
              dims == 3 ? off.at(2).get<std::int64_t>() : 0};
      s.entries.push_back({o, e.at("value").get<double>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stencil spec JSON field error: ") + e.what());
  }
}

std::string spec_to_json(const StencilSpec& spec) {
  json j;
  j["pattern"] = to_string(spec.pattern);
  j["dims"] = spec.dims;
  j["radius"] = spec.radius;
  if (spec.pattern == Pattern::Axis) j["axis"] = spec.axis;
  json coeffs = json::array();
  for (const auto& e : spec.entries) {
    json item;
    item["offset"] = {e.offset.x, e.offset.y, e.offset.z};
    item["value"] = e.value;
    coeffs.push_back(item);
  }
  j["coeffs"] = coeffs;
  return j.dump(2);
}

StencilSpec load_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open stencil spec file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return spec_from_json(ss.str());
}

void save_spec(const StencilSpec& spec, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open stencil spec file for writing: " + path);
  f << spec_to_json(spec) << "\n";
}

}  // namespace mmstencil
