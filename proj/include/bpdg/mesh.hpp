#ifndef BPDG_MESH_HPP
#define BPDG_MESH_HPP

#include <array>
#include <vector>

#include "bpdg/types.hpp"

namespace bpdg {

enum class BcTag { Periodic, Dirichlet, Outflow };

// Tensor-product mesh of axis-aligned line segments (1D) or rectangles (2D).
// Elements are numbered lexicographically with the x index fastest. Every
// face stores the element on its "left" side, whose outward unit normal is
// normal_sign * e_axis; interior faces always have normal_sign = +1 and the
// left element on the low-coordinate side.
struct Mesh {
  struct Element {
    std::array<double, 2> lo{{0.0, 0.0}};
    std::array<double, 2> hi{{0.0, 0.0}};
    double width(int axis) const { return hi[axis] - lo[axis]; }
    double measure(int dim) const {
      double m = hi[0] - lo[0];
      if (dim == 2) m *= hi[1] - lo[1];
      return m;
    }
  };

  struct Face {
    int left = -1;
    int right = -1;  // -1 on boundary faces
    int axis = 0;    // normal direction
    double normal_sign = 1.0;
    BcTag bc = BcTag::Periodic;  // meaningful only when right == -1
    // Face geometry: in 1D `coord` is the face point; in 2D the face spans
    // [span_lo, span_hi] in the tangential axis at fixed `coord`.
    double coord = 0.0;
    double span_lo = 0.0;
    double span_hi = 0.0;
    bool boundary() const { return right < 0; }
  };

  int dim = 1;
  std::array<int, 2> counts{{0, 1}};
  std::array<std::array<double, 2>, 2> bounds{};  // [axis][lo/hi]
  std::vector<Element> elements;
  std::vector<Face> faces;

  int n_elements() const { return static_cast<int>(elements.size()); }
  double min_width() const;
};

// BC tags are given per side: {x_lo, x_hi} in 1D, {x_lo, x_hi, y_lo, y_hi}
// in 2D. A periodic tag must be paired with a periodic tag on the opposite
// side, and a periodic axis needs at least two elements so that every
// interior face joins two distinct elements.
Mesh build_mesh(int dim, const std::array<std::array<double, 2>, 2>& bounds,
                const std::array<int, 2>& counts, const std::vector<BcTag>& bc);

} // namespace bpdg

#endif
