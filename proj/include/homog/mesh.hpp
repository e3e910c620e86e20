#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "homog/types.hpp"

namespace homog {

// Unit-cell geometry: disk inclusion strictly inside Q = [0,1)^2. Model I tags
// the disk soft (stiff connected matrix), Model II tags it stiff.
struct CellGeometry {
  Model model = Model::I;
  Vec2 center{0.5, 0.5};
  double radius = 0.25;

  void validate() const;  // throws GeometryError
  Region disk_region() const { return model == Model::I ? Region::soft : Region::stiff; }
};

// Triangulation of the torus cell. Vertices on the right/top edges are
// identified with their left/bottom partners through vertex_dof; the circle
// interface Gamma is resolved by a closed polygonal loop of vertices lying
// exactly on the circle.
struct CellMesh {
  CellGeometry geom;

  std::vector<Vec2> vertices;                 // coordinates (pre-identification)
  std::vector<std::array<int, 3>> triangles;  // CCW vertex indices
  std::vector<Region> tri_region;

  std::vector<int> vertex_dof;  // vertex -> dof after torus identification
  int n_dofs = 0;

  std::vector<int> gamma_loop;      // ordered dof (== vertex) ids, CCW, closed
  std::vector<Vec2> gamma_normal;   // per loop vertex, unit, out of the soft region
  std::vector<Vec2> dof_position;   // representative coordinates per dof

  double h = 0.0;  // max edge length

  double area(Region r) const;
  double gamma_length() const;
  int n_gamma() const { return static_cast<int>(gamma_loop.size()); }
  bool on_gamma(int dof) const;  // O(1) via flag table
  std::vector<char> gamma_flag;  // per dof
};

// Builds the cell mesh. Pre: h_target in (0, radius/4]. Post: mesh.h <= h_target,
// Gamma vertices on the exact circle, region tags per geometry.model.
CellMesh build_cell(const CellGeometry& geom, double h_target);

// Uniform 4-way refinement; Gamma midpoints re-projected onto the circle.
CellMesh refine(const CellMesh& mesh);

// Line-oriented text export: "vertices N" / "triangles M" headers, then
// "x y" rows and "i j k tag" rows.
void export_text(const CellMesh& mesh, std::ostream& os);

}  // namespace homog
