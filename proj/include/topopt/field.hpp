#pragma once

#include <cstddef>
#include <vector>

namespace topopt {

// Pipeline stage of a per-element grid: unconstrained logits, volume-projected
// densities in [0,1], or cone-filtered physical densities.
enum class Stage { kLogits, kConstrained, kPhysical };

// A nely-by-nelx grid of per-element values. Storage is column-major with the
// y index fastest (element e = ex*nely + ey), matching the element numbering
// documented in grid.hpp. Also used for per-element sensitivity and modulus
// fields, which carry the stage of the densities they refer to.
struct DensityField {
  int nelx = 0;
  int nely = 0;
  Stage stage = Stage::kConstrained;
  std::vector<double> v;

  DensityField() = default;
  DensityField(int nx, int ny, Stage s, double fill = 0.0)
      : nelx(nx), nely(ny), stage(s),
        v(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), fill) {}

  int count() const { return nelx * nely; }
  std::size_t index(int ex, int ey) const {
    return static_cast<std::size_t>(ex) * nely + ey;
  }
  double& at(int ex, int ey) { return v[index(ex, ey)]; }
  double at(int ex, int ey) const { return v[index(ex, ey)]; }

  bool same_shape(const DensityField& o) const {
    return nelx == o.nelx && nely == o.nely;
  }

  double mean() const;
  double min_value() const;
  double max_value() const;
};

}  // namespace topopt
