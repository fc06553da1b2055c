#include "topopt/field.hpp"

#include <algorithm>

namespace topopt {

double DensityField::mean() const {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double DensityField::min_value() const {
  return *std::min_element(v.begin(), v.end());
}

double DensityField::max_value() const {
  return *std::max_element(v.begin(), v.end());
}

}  // namespace topopt
