#include "topopt/task.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "topopt/errors.hpp"
#include "topopt/fem.hpp"
#include "topopt/simp.hpp"

namespace topopt {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  const auto end = s.find_last_not_of(" \t");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

std::vector<int> parse_ints(const std::string& text, std::size_t expect,
                            const std::string& context) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw TaskError(context + ": expected integer, got '" + item + "'");
    }
  }
  if (out.size() != expect) {
    throw TaskError(context + ": expected " + std::to_string(expect) + " coordinates");
  }
  return out;
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw TaskError(context + ": unknown field '" + key + "'");
    }
  }
}

}  // namespace

NodeSelector NodeSelector::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw TaskError("node selector '" + text + "': expected 'edge:', 'point:' or 'region:'");
  }
  const std::string kind = trim(text.substr(0, colon));
  const std::string rest = trim(text.substr(colon + 1));
  NodeSelector sel;
  if (kind == "edge") {
    sel.kind = Kind::kEdge;
    if (rest == "left") sel.edge = Edge::kLeft;
    else if (rest == "right") sel.edge = Edge::kRight;
    else if (rest == "top") sel.edge = Edge::kTop;
    else if (rest == "bottom") sel.edge = Edge::kBottom;
    else throw TaskError("node selector: unknown edge '" + rest + "'");
  } else if (kind == "point") {
    sel.kind = Kind::kPoint;
    const auto xy = parse_ints(rest, 2, "point selector");
    sel.x0 = sel.x1 = xy[0];
    sel.y0 = sel.y1 = xy[1];
  } else if (kind == "region") {
    sel.kind = Kind::kRegion;
    const auto r = parse_ints(rest, 4, "region selector");
    sel.x0 = r[0]; sel.y0 = r[1]; sel.x1 = r[2]; sel.y1 = r[3];
    if (sel.x1 < sel.x0 || sel.y1 < sel.y0) {
      throw TaskError("region selector: corners must be ordered (x0<=x1, y0<=y1)");
    }
  } else {
    throw TaskError("node selector: unknown kind '" + kind + "'");
  }
  return sel;
}

std::string NodeSelector::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kEdge:
      os << "edge: ";
      switch (edge) {
        case Edge::kLeft: os << "left"; break;
        case Edge::kRight: os << "right"; break;
        case Edge::kTop: os << "top"; break;
        case Edge::kBottom: os << "bottom"; break;
      }
      break;
    case Kind::kPoint:
      os << "point: " << x0 << ", " << y0;
      break;
    case Kind::kRegion:
      os << "region: " << x0 << ", " << y0 << ", " << x1 << ", " << y1;
      break;
  }
  return os.str();
}

std::vector<int> NodeSelector::resolve(const Grid& grid) const {
  std::vector<int> nodes;
  const auto check = [&](int x, int y) {
    if (x < 0 || x > grid.nelx || y < 0 || y > grid.nely) {
      throw TaskError("node selector '" + to_string() + "': coordinates outside node grid [0," +
                      std::to_string(grid.nelx) + "]x[0," + std::to_string(grid.nely) + "]");
    }
  };
  switch (kind) {
    case Kind::kEdge: {
      if (edge == Edge::kLeft || edge == Edge::kRight) {
        const int ix = (edge == Edge::kLeft) ? 0 : grid.nelx;
        for (int iy = 0; iy <= grid.nely; ++iy) nodes.push_back(grid.node(ix, iy));
      } else {
        const int iy = (edge == Edge::kTop) ? 0 : grid.nely;
        for (int ix = 0; ix <= grid.nelx; ++ix) nodes.push_back(grid.node(ix, iy));
      }
      break;
    }
    case Kind::kPoint:
      check(x0, y0);
      nodes.push_back(grid.node(x0, y0));
      break;
    case Kind::kRegion:
      check(x0, y0);
      check(x1, y1);
      for (int ix = x0; ix <= x1; ++ix) {
        for (int iy = y0; iy <= y1; ++iy) nodes.push_back(grid.node(ix, iy));
      }
      break;
  }
  return nodes;
}

BoundaryConditions Task::boundary_conditions() const {
  const Grid g = grid();
  BoundaryConditions bc;
  for (const auto& spec : fixed) {
    for (int n : spec.where.resolve(g)) {
      if (spec.fix_x) bc.fixed_dofs.push_back(2 * n);
      if (spec.fix_y) bc.fixed_dofs.push_back(2 * n + 1);
    }
  }
  std::map<int, double> accum;
  for (const auto& spec : loads) {
    for (int n : spec.where.resolve(g)) {
      if (spec.fx != 0.0) accum[2 * n] += spec.fx;
      if (spec.fy != 0.0) accum[2 * n + 1] += spec.fy;
    }
  }
  bc.loads.assign(accum.begin(), accum.end());
  bc.validate(g);
  return bc;
}

namespace {
Task parse_task_body(const json& doc);
}  // namespace

Task parse_task(const std::string& document, TaskValidation level) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw TaskError(std::string("task document: ") + e.what());
  }
  Task task;
  try {
    task = parse_task_body(doc);
  } catch (const json::exception& e) {
    throw TaskError(std::string("task document: ") + e.what());
  }
  validate_task(task, level);
  return task;
}

namespace {

Task parse_task_body(const json& doc) {
  if (!doc.is_object()) throw TaskError("task document: top level must be an object");
  reject_unknown_keys(doc,
                      {"schema_version", "name", "description", "nelx", "nely",
                       "volume_fraction", "fixed", "loads", "simp"},
                      "task document");

  const auto require = [&](const char* key) -> const json& {
    if (!doc.contains(key)) throw TaskError(std::string("task document: missing field '") + key + "'");
    return doc.at(key);
  };

  if (require("schema_version").get<int>() != 1) {
    throw TaskError("task document: unsupported schema_version (expected 1)");
  }

  Task task;
  task.name = require("name").get<std::string>();
  if (doc.contains("description")) task.description = doc["description"].get<std::string>();
  task.nelx = require("nelx").get<int>();
  task.nely = require("nely").get<int>();
  task.volume_fraction = require("volume_fraction").get<double>();

  for (const auto& item : require("fixed")) {
    reject_unknown_keys(item, {"nodes", "axes"}, "fixed entry");
    SupportSpec spec;
    spec.where = NodeSelector::parse(item.at("nodes").get<std::string>());
    const std::string axes = item.at("axes").get<std::string>();
    if (axes != "x" && axes != "y" && axes != "xy") {
      throw TaskError("fixed entry: axes must be 'x', 'y' or 'xy', got '" + axes + "'");
    }
    spec.fix_x = axes.find('x') != std::string::npos;
    spec.fix_y = axes.find('y') != std::string::npos;
    task.fixed.push_back(spec);
  }
  for (const auto& item : require("loads")) {
    reject_unknown_keys(item, {"nodes", "fx", "fy"}, "load entry");
    LoadSpec spec;
    spec.where = NodeSelector::parse(item.at("nodes").get<std::string>());
    if (item.contains("fx")) spec.fx = item["fx"].get<double>();
    if (item.contains("fy")) spec.fy = item["fy"].get<double>();
    task.loads.push_back(spec);
  }
  if (doc.contains("simp")) {
    const auto& s = doc["simp"];
    reject_unknown_keys(s, {"penal", "E0", "Emin", "nu", "filter_radius"}, "simp block");
    if (s.contains("penal")) task.simp.penal = s["penal"].get<double>();
    if (s.contains("E0")) task.simp.E0 = s["E0"].get<double>();
    if (s.contains("Emin")) task.simp.Emin = s["Emin"].get<double>();
    if (s.contains("nu")) task.simp.nu = s["nu"].get<double>();
    if (s.contains("filter_radius")) task.simp.filter_radius = s["filter_radius"].get<double>();
  }
  return task;
}

}  // namespace

void validate_task(const Task& task, TaskValidation level) {
  if (task.name.empty()) throw TaskError("task: name must be nonempty");
  if (task.nelx < 1 || task.nely < 1) {
    throw TaskError("task '" + task.name + "': nelx and nely must be >= 1");
  }
  if (!(task.volume_fraction > 0.0 && task.volume_fraction < 1.0)) {
    throw TaskError("task '" + task.name + "': volume_fraction must lie strictly in (0,1)");
  }
  if (task.fixed.empty()) {
    throw TaskError("task '" + task.name + "': no supports (structure would be singular)");
  }
  if (task.loads.empty()) {
    throw TaskError("task '" + task.name + "': no loads");
  }
  bool any_force = false;
  for (const auto& l : task.loads) any_force |= (l.fx != 0.0 || l.fy != 0.0);
  if (!any_force) throw TaskError("task '" + task.name + "': all load components are zero");
  if (!(task.simp.penal >= 1.0)) throw TaskError("task '" + task.name + "': penal must be >= 1");
  if (!(task.simp.Emin > 0.0 && task.simp.Emin < task.simp.E0)) {
    throw TaskError("task '" + task.name + "': need 0 < Emin < E0");
  }
  if (!(task.simp.filter_radius >= 1.0)) {
    throw TaskError("task '" + task.name + "': filter_radius must be >= 1");
  }
  if (!(task.simp.nu >= 0.0 && task.simp.nu < 0.5)) {
    throw TaskError("task '" + task.name + "': nu must lie in [0, 0.5)");
  }

  BoundaryConditions bc = task.boundary_conditions();  // validates selector ranges

  if (level == TaskValidation::kFull) {
    // Trial factorization and solve at uniform density; a floating structure
    // either fails the Cholesky or (with a roundoff-positive pivot) leaves a
    // residual far above the solver contract.
    try {
      const Grid g = task.grid();
      DensityField young(task.nelx, task.nely, Stage::kPhysical,
                         task.simp.Emin + std::pow(task.volume_fraction, task.simp.penal) *
                                              (task.simp.E0 - task.simp.Emin));
      StiffnessSystem system =
          assemble(g, young, bc, element_stiffness_matrix(task.simp.nu, 1.0));
      const DisplacementField u = system.solve(bc);

      Eigen::VectorXd uf(system.global_of_free().size());
      Eigen::VectorXd f = Eigen::VectorXd::Zero(uf.size());
      for (std::size_t i = 0; i < system.global_of_free().size(); ++i) {
        uf[i] = u.u[system.global_of_free()[i]];
      }
      for (const auto& [dof, value] : bc.loads) {
        const int fi = system.free_of_global()[dof];
        if (fi >= 0) f[fi] += value;
      }
      if ((system.matrix() * uf - f).norm() > 1e-8 * std::max(1.0, f.norm())) {
        throw SolverError("trial solve residual out of tolerance");
      }
    } catch (const SolverError&) {
      std::string supports;
      for (const auto& spec : task.fixed) {
        if (!supports.empty()) supports += "; ";
        supports += spec.where.to_string();
        supports += " [";
        if (spec.fix_x) supports += 'x';
        if (spec.fix_y) supports += 'y';
        supports += ']';
      }
      throw TaskError("task '" + task.name +
                      "': supports leave the structure unstable (singular stiffness "
                      "matrix); fixed: " + supports);
    }
  }
}

std::string serialize_task(const Task& task) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["name"] = task.name;
  if (!task.description.empty()) doc["description"] = task.description;
  doc["nelx"] = task.nelx;
  doc["nely"] = task.nely;
  doc["volume_fraction"] = task.volume_fraction;
  doc["fixed"] = ordered_json::array();
  for (const auto& spec : task.fixed) {
    std::string axes;
    if (spec.fix_x) axes += 'x';
    if (spec.fix_y) axes += 'y';
    doc["fixed"].push_back({{"nodes", spec.where.to_string()}, {"axes", axes}});
  }
  doc["loads"] = ordered_json::array();
  for (const auto& spec : task.loads) {
    ordered_json entry{{"nodes", spec.where.to_string()}};
    if (spec.fx != 0.0) entry["fx"] = spec.fx;
    if (spec.fy != 0.0) entry["fy"] = spec.fy;
    doc["loads"].push_back(entry);
  }
  doc["simp"] = {{"penal", task.simp.penal},
                 {"E0", task.simp.E0},
                 {"Emin", task.simp.Emin},
                 {"nu", task.simp.nu},
                 {"filter_radius", task.simp.filter_radius}};
  return doc.dump(2) + "\n";
}

namespace {

// Built-in documents go through the same parser as user files. Support/load
// layouts for the non-classic categories are representative stand-ins in the
// spirit of the benchmark names; see each description.
const char* const kBuiltinDocuments[] = {
    R"({
  "schema_version": 1,
  "name": "mbb_beam_60x20",
  "description": "Classic half MBB beam (symmetry plane on the left edge, roller at bottom right, unit load at top left). Below the 2^11-element suite floor; kept as the standard benchmark configuration.",
  "nelx": 60, "nely": 20, "volume_fraction": 0.5,
  "fixed": [ {"nodes": "edge: left", "axes": "x"},
             {"nodes": "point: 60, 20", "axes": "y"} ],
  "loads": [ {"nodes": "point: 0, 0", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "mbb_beam_64x32",
  "description": "Half MBB beam, 2^11 elements.",
  "nelx": 64, "nely": 32, "volume_fraction": 0.5,
  "fixed": [ {"nodes": "edge: left", "axes": "x"},
             {"nodes": "point: 64, 32", "axes": "y"} ],
  "loads": [ {"nodes": "point: 0, 0", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "mbb_beam_96x32",
  "description": "Half MBB beam at the classic 3:1 half-span ratio.",
  "nelx": 96, "nely": 32, "volume_fraction": 0.5,
  "fixed": [ {"nodes": "edge: left", "axes": "x"},
             {"nodes": "point: 96, 32", "axes": "y"} ],
  "loads": [ {"nodes": "point: 0, 0", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "mbb_beam_192x64",
  "description": "Half MBB beam, 12288 elements.",
  "nelx": 192, "nely": 64, "volume_fraction": 0.4,
  "fixed": [ {"nodes": "edge: left", "axes": "x"},
             {"nodes": "point: 192, 64", "axes": "y"} ],
  "loads": [ {"nodes": "point: 0, 0", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "mbb_beam_256x128",
  "description": "Half MBB beam, 2^15 elements (large problem regime).",
  "nelx": 256, "nely": 128, "volume_fraction": 0.3,
  "fixed": [ {"nodes": "edge: left", "axes": "x"},
             {"nodes": "point: 256, 128", "axes": "y"} ],
  "loads": [ {"nodes": "point: 0, 0", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "cantilever_beam_64x32",
  "description": "Cantilever clamped on the left edge, unit load at mid-height of the free end.",
  "nelx": 64, "nely": 32, "volume_fraction": 0.4,
  "fixed": [ {"nodes": "edge: left", "axes": "xy"} ],
  "loads": [ {"nodes": "point: 64, 16", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "cantilever_beam_128x64",
  "description": "Cantilever clamped on the left edge, unit load at mid-height of the free end.",
  "nelx": 128, "nely": 64, "volume_fraction": 0.3,
  "fixed": [ {"nodes": "edge: left", "axes": "xy"} ],
  "loads": [ {"nodes": "point: 128, 32", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "suspended_bridge_64x32",
  "description": "Bridge deck loaded along the bottom edge, anchored only at the bottom corners (representative stand-in).",
  "nelx": 64, "nely": 32, "volume_fraction": 0.3,
  "fixed": [ {"nodes": "region: 0, 32, 2, 32", "axes": "xy"},
             {"nodes": "region: 62, 32, 64, 32", "axes": "xy"} ],
  "loads": [ {"nodes": "edge: bottom", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "thin_support_bridge_64x64",
  "description": "Bridge deck on the bottom edge with single-node supports at the bottom corners (representative stand-in).",
  "nelx": 64, "nely": 64, "volume_fraction": 0.25,
  "fixed": [ {"nodes": "point: 0, 64", "axes": "xy"},
             {"nodes": "point: 64, 64", "axes": "xy"} ],
  "loads": [ {"nodes": "edge: bottom", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "thin_support_bridge_128x128",
  "description": "Bridge deck on the bottom edge with single-node supports at the bottom corners, 2^14 elements (representative stand-in).",
  "nelx": 128, "nely": 128, "volume_fraction": 0.2,
  "fixed": [ {"nodes": "point: 0, 128", "axes": "xy"},
             {"nodes": "point: 128, 128", "axes": "xy"} ],
  "loads": [ {"nodes": "edge: bottom", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "roof_64x32",
  "description": "Roof carrying a uniform downward load on the top edge, supported near the bottom corners (representative stand-in).",
  "nelx": 64, "nely": 32, "volume_fraction": 0.4,
  "fixed": [ {"nodes": "region: 0, 32, 3, 32", "axes": "xy"},
             {"nodes": "region: 61, 32, 64, 32", "axes": "xy"} ],
  "loads": [ {"nodes": "edge: top", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "roof_96x32",
  "description": "Roof carrying a uniform downward load on the top edge, supported near the bottom corners (representative stand-in).",
  "nelx": 96, "nely": 32, "volume_fraction": 0.3,
  "fixed": [ {"nodes": "region: 0, 32, 3, 32", "axes": "xy"},
             {"nodes": "region: 93, 32, 96, 32", "axes": "xy"} ],
  "loads": [ {"nodes": "edge: top", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "multistory_building_32x64",
  "description": "Tall domain clamped at the ground with distributed floor loads every 16 rows (representative stand-in).",
  "nelx": 32, "nely": 64, "volume_fraction": 0.4,
  "fixed": [ {"nodes": "edge: bottom", "axes": "xy"} ],
  "loads": [ {"nodes": "region: 0, 0, 32, 0", "fy": -1.0},
             {"nodes": "region: 0, 16, 32, 16", "fy": -1.0},
             {"nodes": "region: 0, 32, 32, 32", "fy": -1.0},
             {"nodes": "region: 0, 48, 32, 48", "fy": -1.0} ]
})",
    R"({
  "schema_version": 1,
  "name": "multistory_building_64x128",
  "description": "Tall domain clamped at the ground with distributed floor loads every 32 rows (representative stand-in).",
  "nelx": 64, "nely": 128, "volume_fraction": 0.35,
  "fixed": [ {"nodes": "edge: bottom", "axes": "xy"} ],
  "loads": [ {"nodes": "region: 0, 0, 64, 0", "fy": -1.0},
             {"nodes": "region: 0, 32, 64, 32", "fy": -1.0},
             {"nodes": "region: 0, 64, 64, 64", "fy": -1.0},
             {"nodes": "region: 0, 96, 64, 96", "fy": -1.0} ]
})",
};

}  // namespace

const std::vector<Task>& builtin_tasks() {
  static const std::vector<Task> tasks = [] {
    std::vector<Task> out;
    for (const char* doc : kBuiltinDocuments) {
      out.push_back(parse_task(doc, TaskValidation::kStructural));
    }
    return out;
  }();
  return tasks;
}

std::optional<Task> find_builtin_task(const std::string& name) {
  for (const Task& t : builtin_tasks()) {
    if (t.name == name) return t;
  }
  return std::nullopt;
}

}  // namespace topopt
