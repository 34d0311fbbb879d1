#include "bpdg/mesh.hpp"

#include <algorithm>
#include <stdexcept>

namespace bpdg {

double Mesh::min_width() const {
  double w = elements.front().width(0);
  for (const auto& e : elements)
    for (int a = 0; a < dim; ++a) w = std::min(w, e.width(a));
  return w;
}

namespace {

int lex_index(int i, int j, int nx) { return j * nx + i; }

}  // namespace

Mesh build_mesh(int dim, const std::array<std::array<double, 2>, 2>& bounds,
                const std::array<int, 2>& counts, const std::vector<BcTag>& bc) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("mesh: dim must be 1 or 2");
  if (static_cast<int>(bc.size()) != 2 * dim)
    throw std::invalid_argument("mesh: need one BC tag per side");
  for (int a = 0; a < dim; ++a) {
    if (counts[a] < 1) throw std::invalid_argument("mesh: counts must be >= 1");
    if (!(bounds[a][1] > bounds[a][0]))
      throw std::invalid_argument("mesh: degenerate axis bounds");
    bool lo_p = bc[2 * a] == BcTag::Periodic;
    bool hi_p = bc[2 * a + 1] == BcTag::Periodic;
    if (lo_p != hi_p)
      throw std::invalid_argument("mesh: periodic sides must be paired");
    if (lo_p && counts[a] < 2)
      throw std::invalid_argument("mesh: periodic axis needs >= 2 elements");
  }

  Mesh mesh;
  mesh.dim = dim;
  mesh.counts = counts;
  if (dim == 1) mesh.counts[1] = 1;
  mesh.bounds = bounds;

  const int nx = mesh.counts[0];
  const int ny = mesh.counts[1];
  const double hx = (bounds[0][1] - bounds[0][0]) / nx;
  const double hy = dim == 2 ? (bounds[1][1] - bounds[1][0]) / ny : 1.0;

  mesh.elements.resize(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Mesh::Element e;
      e.lo[0] = bounds[0][0] + i * hx;
      e.hi[0] = bounds[0][0] + (i + 1) * hx;
      if (dim == 2) {
        e.lo[1] = bounds[1][0] + j * hy;
        e.hi[1] = bounds[1][0] + (j + 1) * hy;
      }
      mesh.elements[lex_index(i, j, nx)] = e;
    }
  }

  auto add_axis_faces = [&](int axis) {
    const bool periodic = bc[2 * axis] == BcTag::Periodic;
    const int n_along = axis == 0 ? nx : ny;
    const int n_across = axis == 0 ? ny : nx;
    for (int j = 0; j < n_across; ++j) {
      for (int i = 0; i <= n_along; ++i) {
        const bool at_lo = i == 0;
        const bool at_hi = i == n_along;
        if (periodic && at_hi) continue;  // wrap face emitted at i == 0
        Mesh::Face f;
        f.axis = axis;
        auto cell = [&](int k) {
          return axis == 0 ? lex_index(k, j, nx) : lex_index(j, k, nx);
        };
        if (periodic && at_lo) {
          f.left = cell(n_along - 1);
          f.right = cell(0);
          f.normal_sign = 1.0;
          f.coord = bounds[axis][1];  // geometry taken from the left element
        } else if (at_lo) {
          f.left = cell(0);
          f.right = -1;
          f.normal_sign = -1.0;
          f.bc = bc[2 * axis];
          f.coord = bounds[axis][0];
        } else if (at_hi) {
          f.left = cell(n_along - 1);
          f.right = -1;
          f.normal_sign = 1.0;
          f.bc = bc[2 * axis + 1];
          f.coord = bounds[axis][1];
        } else {
          f.left = cell(i - 1);
          f.right = cell(i);
          f.normal_sign = 1.0;
          f.coord = bounds[axis][0] + i * (axis == 0 ? hx : hy);
        }
        if (dim == 2) {
          const int t = 1 - axis;
          const auto& el = mesh.elements[f.left];
          f.span_lo = el.lo[t];
          f.span_hi = el.hi[t];
        }
        mesh.faces.push_back(f);
      }
    }
  };

  add_axis_faces(0);
  if (dim == 2) add_axis_faces(1);
  return mesh;
}

} // namespace bpdg
