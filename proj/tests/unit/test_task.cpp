#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>

#include "topopt/errors.hpp"
#include "topopt/simp.hpp"
#include "topopt/task.hpp"

using namespace topopt;

TEST_SUITE("task") {

TEST_CASE("the MBB document resolves to the documented DOF indices") {
  const Task task = *find_builtin_task("mbb_beam_60x20");
  CHECK(task.nelx == 60);
  CHECK(task.nely == 20);
  CHECK(task.volume_fraction == 0.5);

  const BoundaryConditions bc = task.boundary_conditions();
  // Symmetry plane: x DOFs of the 21 left-edge nodes are 0, 2, ..., 40;
  // roller: y DOF of node (60, 20) = 2*(60*21 + 20) + 1 = 2561.
  std::set<int> expected;
  for (int iy = 0; iy <= 20; ++iy) expected.insert(2 * iy);
  expected.insert(2561);
  CHECK(std::set<int>(bc.fixed_dofs.begin(), bc.fixed_dofs.end()) == expected);
  REQUIRE(bc.loads.size() == 1);
  CHECK(bc.loads[0].first == 1);  // y DOF of the top-left node
  CHECK(bc.loads[0].second == -1.0);
}

TEST_CASE("documents with invalid ranges or missing pieces are rejected") {
  const char* zero_v0 = R"({
    "schema_version": 1, "name": "bad", "nelx": 8, "nely": 8, "volume_fraction": 0.0,
    "fixed": [ {"nodes": "edge: left", "axes": "xy"} ],
    "loads": [ {"nodes": "point: 8, 4", "fy": -1.0} ]
  })";
  CHECK_THROWS_AS(parse_task(zero_v0), TaskError);

  const char* no_supports = R"({
    "schema_version": 1, "name": "bad", "nelx": 8, "nely": 8, "volume_fraction": 0.4,
    "fixed": [],
    "loads": [ {"nodes": "point: 8, 4", "fy": -1.0} ]
  })";
  CHECK_THROWS_AS(parse_task(no_supports), TaskError);

  const char* unknown_field = R"({
    "schema_version": 1, "name": "bad", "nelx": 8, "nely": 8, "volume_fraction": 0.4,
    "grid": "oops",
    "fixed": [ {"nodes": "edge: left", "axes": "xy"} ],
    "loads": [ {"nodes": "point: 8, 4", "fy": -1.0} ]
  })";
  CHECK_THROWS_AS(parse_task(unknown_field), TaskError);

  const char* bad_version = R"({
    "schema_version": 2, "name": "bad", "nelx": 8, "nely": 8, "volume_fraction": 0.4,
    "fixed": [ {"nodes": "edge: left", "axes": "xy"} ],
    "loads": [ {"nodes": "point: 8, 4", "fy": -1.0} ]
  })";
  CHECK_THROWS_AS(parse_task(bad_version), TaskError);

  const char* out_of_range = R"({
    "schema_version": 1, "name": "bad", "nelx": 8, "nely": 8, "volume_fraction": 0.4,
    "fixed": [ {"nodes": "edge: left", "axes": "xy"} ],
    "loads": [ {"nodes": "point: 9, 4", "fy": -1.0} ]
  })";
  CHECK_THROWS_AS(parse_task(out_of_range), TaskError);

  const char* not_json = "nelx = 8";
  CHECK_THROWS_AS(parse_task(not_json), TaskError);
}

TEST_CASE("a floating structure fails the trial factorization") {
  // A single pinned node cannot restrain rotation about it.
  const char* floating = R"({
    "schema_version": 1, "name": "floating", "nelx": 6, "nely": 6, "volume_fraction": 0.4,
    "fixed": [ {"nodes": "point: 0, 3", "axes": "xy"} ],
    "loads": [ {"nodes": "point: 6, 3", "fy": -1.0} ]
  })";
  CHECK_THROWS_AS(parse_task(floating, TaskValidation::kFull), TaskError);
  // Structural validation alone accepts it.
  CHECK_NOTHROW(parse_task(floating, TaskValidation::kStructural));
}

TEST_CASE("serialize/parse round-trips every built-in task") {
  for (const Task& t : builtin_tasks()) {
    const std::string doc = serialize_task(t);
    const Task back = parse_task(doc, TaskValidation::kStructural);
    CHECK(back.name == t.name);
    CHECK(back.nelx == t.nelx);
    CHECK(back.nely == t.nely);
    CHECK(back.volume_fraction == t.volume_fraction);
    CHECK(back.simp.penal == t.simp.penal);
    CHECK(back.simp.filter_radius == t.simp.filter_radius);
    REQUIRE(back.fixed.size() == t.fixed.size());
    REQUIRE(back.loads.size() == t.loads.size());
    // Semantic equality: identical resolved boundary conditions.
    const BoundaryConditions a = t.boundary_conditions();
    const BoundaryConditions b = back.boundary_conditions();
    CHECK(a.fixed_dofs == b.fixed_dofs);
    CHECK(a.loads == b.loads);
  }
}

TEST_CASE("the built-in library covers the required categories, sizes and volumes") {
  const auto& tasks = builtin_tasks();
  CHECK(find_builtin_task("mbb_beam_60x20").has_value());

  int in_suite_range = 0;
  bool has_large = false;
  std::set<std::string> categories;
  for (const Task& t : tasks) {
    const int n = t.num_elements();
    if (n >= 2048 && n <= 65536) {
      ++in_suite_range;
      CHECK(t.volume_fraction >= 0.05);
      CHECK(t.volume_fraction <= 0.5);
    }
    if (n >= 32768) has_large = true;
    const std::string& name = t.name;
    categories.insert(name.substr(0, name.find_last_of('_')));
  }
  CHECK(in_suite_range >= 10);
  CHECK(has_large);
  CHECK(categories.size() >= 6);
}

TEST_CASE("every built-in task passes full validation and parse round-trip") {
  for (const Task& t : builtin_tasks()) {
    CHECK_NOTHROW(validate_task(t, TaskValidation::kFull));
    CHECK_NOTHROW(parse_task(serialize_task(t), TaskValidation::kStructural));
  }
}

TEST_CASE("every built-in task has finite uniform-density compliance") {
  for (const Task& t : builtin_tasks()) {
    if (t.num_elements() > 5000) continue;  // the large ones are covered above
    DensityField x(t.nelx, t.nely, Stage::kConstrained, t.volume_fraction);
    const ObjectiveResult res = objective_and_gradient(x, t, t.simp);
    CHECK(res.compliance > 0.0);
    CHECK(std::isfinite(res.compliance));
  }
}

TEST_CASE("selector forms parse, print, and resolve") {
  const Grid g(4, 3);
  CHECK(NodeSelector::parse("edge: top").resolve(g).size() == 5);
  CHECK(NodeSelector::parse("edge: left").resolve(g).size() == 4);
  CHECK(NodeSelector::parse("point: 2, 1").resolve(g) ==
        std::vector<int>{g.node(2, 1)});
  CHECK(NodeSelector::parse("region: 1, 0, 2, 3").resolve(g).size() == 8);
  CHECK(NodeSelector::parse("region: 1, 0, 2, 3").to_string() == "region: 1, 0, 2, 3");
  CHECK_THROWS_AS(NodeSelector::parse("ball: 1, 1"), TaskError);
  CHECK_THROWS_AS(NodeSelector::parse("point: 1"), TaskError);
  CHECK_THROWS_AS(NodeSelector::parse("point: 9, 9").resolve(g), TaskError);
}

}  // TEST_SUITE
