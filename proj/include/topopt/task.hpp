#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topopt/config.hpp"
#include "topopt/grid.hpp"

namespace topopt {

// Selects a set of nodes on the grid. Textual forms in task documents:
//   "edge: left|right|top|bottom"
//   "point: X, Y"            node coordinates, X in [0,nelx], Y in [0,nely]
//   "region: X0, Y0, X1, Y1" inclusive node ranges
// Y = 0 is the top edge (see grid.hpp for the full numbering convention).
struct NodeSelector {
  enum class Kind { kEdge, kPoint, kRegion };
  enum class Edge { kLeft, kRight, kTop, kBottom };
  Kind kind = Kind::kPoint;
  Edge edge = Edge::kLeft;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  static NodeSelector parse(const std::string& text);
  std::string to_string() const;
  // Expands to node indices; throws TaskError if any coordinate is out of range.
  std::vector<int> resolve(const Grid& grid) const;
};

struct SupportSpec {
  NodeSelector where;
  bool fix_x = false;
  bool fix_y = false;
};

struct LoadSpec {
  NodeSelector where;
  double fx = 0.0;
  double fy = 0.0;  // applied to every matched node; fy < 0 presses downward
};

struct Task {
  std::string name;
  std::string description;
  int nelx = 0;
  int nely = 0;
  double volume_fraction = 0.5;
  std::vector<SupportSpec> fixed;
  std::vector<LoadSpec> loads;
  SimpConfig simp;

  Grid grid() const { return Grid(nelx, nely); }
  int num_elements() const { return nelx * nely; }
  BoundaryConditions boundary_conditions() const;
};

// How much validation parse_task performs. kFull adds a trial factorization at
// uniform density, catching floating structures; kStructural skips it (used
// for the pre-verified built-in documents).
enum class TaskValidation { kStructural, kFull };

// Parses a task document (JSON, schema_version 1). Unknown fields, missing
// supports/loads, and out-of-range values are rejected with a diagnostic.
Task parse_task(const std::string& document, TaskValidation level = TaskValidation::kFull);

std::string serialize_task(const Task& task);

// Runs the full validation (including the trial factorization) on an
// already-parsed task. Throws TaskError.
void validate_task(const Task& task, TaskValidation level = TaskValidation::kFull);

// The built-in task library. Covers the benchmark categories (MBB beam,
// cantilever, suspended bridge, thin-support bridge, roof, multistory
// building) at sizes from 2^11 to 2^15 elements, plus the classic 60x20 MBB
// half-beam.
const std::vector<Task>& builtin_tasks();

// Looks a built-in task up by name; nullopt if absent.
std::optional<Task> find_builtin_task(const std::string& name);

}  // namespace topopt
