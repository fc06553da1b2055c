#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace topopt {

// Regular grid of unit square bilinear elements.
//
// Numbering convention (used everywhere in this project):
//   - Nodes are column-major with the y index fastest:
//       node(ix, iy) = ix*(nely+1) + iy,  ix in [0, nelx], iy in [0, nely].
//     iy = 0 is the top edge of the rendered design; iy increases downward.
//   - Each node carries two interleaved DOFs: x displacement at 2*n,
//     y displacement at 2*n+1. The y displacement (and y loads) are positive
//     upward, i.e. toward decreasing iy.
//   - Elements are column-major with y fastest: e = ex*nely + ey.
//   - The 8 element DOFs are ordered by node [LL, LR, UR, UL] in screen
//     coordinates (LL = (ex, ey+1), LR = (ex+1, ey+1), UR = (ex+1, ey),
//     UL = (ex, ey)), i.e. counterclockwise from the lower-left corner when
//     y points up. This matches the classic plane-stress Q4 element matrix.
struct Grid {
  int nelx = 0;
  int nely = 0;

  Grid() = default;
  Grid(int nx, int ny) : nelx(nx), nely(ny) {}

  int num_nodes() const { return (nelx + 1) * (nely + 1); }
  int num_dofs() const { return 2 * num_nodes(); }
  int num_elements() const { return nelx * nely; }

  int node(int ix, int iy) const { return ix * (nely + 1) + iy; }
  int element(int ex, int ey) const { return ex * nely + ey; }

  std::array<int, 8> element_dofs(int ex, int ey) const {
    const int a = node(ex, ey);          // UL
    const int b = a + 1;                 // LL
    const int d = node(ex + 1, ey);      // UR
    const int c = d + 1;                 // LR
    return {2 * b, 2 * b + 1, 2 * c, 2 * c + 1, 2 * d, 2 * d + 1, 2 * a, 2 * a + 1};
  }
};

// Supports and applied point loads, resolved to global DOF indices.
// fixed_dofs must be nonempty (a floating structure has a singular stiffness
// matrix); loads on fixed DOFs are legal but never contribute to compliance.
struct BoundaryConditions {
  std::vector<int> fixed_dofs;                    // sorted, unique
  std::vector<std::pair<int, double>> loads;      // (global dof, force)

  // Sorts/dedupes fixed_dofs and checks all indices against the grid.
  // Throws TaskError on an empty support set or out-of-range index.
  void validate(const Grid& grid);
};

}  // namespace topopt
