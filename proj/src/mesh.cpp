#include "homog/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>

#include "homog/util.hpp"

namespace homog {

namespace {

double tri_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

struct Builder {
  const CellGeometry& geom;
  int n;  // grid subdivisions per side (even)
  std::vector<Vec2> verts;
  std::vector<std::array<int, 3>> tris;
  std::vector<std::pair<int, int>> grid_ij;  // per vertex; (-1,-1) for cut vertices
  double on_circle_tol = 1e-12;

  explicit Builder(const CellGeometry& g, int n_) : geom(g), n(n_) {}

  int side_of(int v) const {
    double d = (verts[v] - geom.center).norm() - geom.radius;
    if (std::abs(d) <= on_circle_tol * std::max(1.0, geom.radius)) return 0;
    return d > 0 ? 1 : -1;
  }

  Vec2 project_to_circle(const Vec2& p) const {
    Vec2 u = p - geom.center;
    double len = u.norm();
    return geom.center + u * (geom.radius / len);
  }

  void make_grid() {
    const double hx = 1.0 / n;
    verts.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        verts.emplace_back(double(i) / n, double(j) / n);
        grid_ij.emplace_back(i, j);
      }
    // Snap pass: interior grid vertices within 0.3 hx of the circle move onto it.
    const double snap = 0.3 * hx;
    for (int i = 1; i < n; ++i)
      for (int j = 1; j < n; ++j) {
        int v = i * (n + 1) + j;
        double d = (verts[v] - geom.center).norm() - geom.radius;
        if (std::abs(d) <= snap) verts[v] = project_to_circle(verts[v]);
      }
    // Union-jack split; even n keeps the full D4 symmetry of the cell.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        int v00 = i * (n + 1) + j, v10 = (i + 1) * (n + 1) + j;
        int v01 = i * (n + 1) + j + 1, v11 = (i + 1) * (n + 1) + j + 1;
        if ((i + j) % 2 == 0) {
          tris.push_back({v00, v10, v11});
          tris.push_back({v00, v11, v01});
        } else {
          tris.push_back({v00, v10, v01});
          tris.push_back({v10, v11, v01});
        }
      }
  }

  int cut_point(int a, int b, std::map<std::pair<int, int>, int>& cache) {
    auto key = std::minmax(a, b);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Vec2 pa = verts[a], pb = verts[b], d = pb - pa, w = pa - geom.center;
    double A = d.squaredNorm(), B = 2.0 * w.dot(d), C = w.squaredNorm() - geom.radius * geom.radius;
    double disc = B * B - 4 * A * C;
    if (disc < 0) throw MeshError("interface cut: no real intersection");
    double sq = std::sqrt(disc);
    double t1 = (-B - sq) / (2 * A), t2 = (-B + sq) / (2 * A);
    bool in1 = t1 > 1e-9 && t1 < 1.0 - 1e-9, in2 = t2 > 1e-9 && t2 < 1.0 - 1e-9;
    if (in1 == in2) throw MeshError("interface cut: edge crossing is not transversal");
    double t = in1 ? t1 : t2;
    Vec2 p = project_to_circle(pa + t * d);
    int v = static_cast<int>(verts.size());
    verts.push_back(p);
    grid_ij.emplace_back(-1, -1);
    cache.emplace(key, v);
    return v;
  }

  void cut_interface() {
    std::map<std::pair<int, int>, int> cache;
    std::vector<std::array<int, 3>> out;
    out.reserve(tris.size() + 64);
    for (const auto& t : tris) {
      int s[3] = {side_of(t[0]), side_of(t[1]), side_of(t[2])};
      // crossing edges: strictly opposite signs
      int ncross = 0, ce[3];
      for (int e = 0; e < 3; ++e) {
        if (s[e] * s[(e + 1) % 3] < 0) ce[ncross++] = e;
      }
      if (ncross == 0) {
        out.push_back(t);
      } else if (ncross == 1) {
        int e = ce[0];
        int a = t[e], b = t[(e + 1) % 3], c = t[(e + 2) % 3];
        if (s[(e + 2) % 3] != 0) throw MeshError("interface cut: inconsistent one-crossing pattern");
        int x = cut_point(a, b, cache);
        out.push_back({a, x, c});
        out.push_back({x, b, c});
      } else if (ncross == 2) {
        // lone vertex = the one shared by both crossing edges
        int lone = -1;
        for (int v = 0; v < 3; ++v) {
          int prev = (v + 2) % 3;
          bool on_a = (ce[0] == v || ce[0] == prev);
          bool on_b = (ce[1] == v || ce[1] == prev);
          if (on_a && on_b) lone = v;
        }
        if (lone < 0) throw MeshError("interface cut: bad two-crossing pattern");
        int w = t[lone], u1 = t[(lone + 1) % 3], u2 = t[(lone + 2) % 3];
        int xa = cut_point(w, u1, cache);  // on edge (w,u1)
        int xb = cut_point(u2, w, cache);  // on edge (u2,w)
        out.push_back({w, xa, xb});
        out.push_back({xa, u1, u2});
        out.push_back({xa, u2, xb});
      } else {
        throw MeshError("interface cut: triangle crosses circle three times");
      }
    }
    tris = std::move(out);
  }
};

void finalize(CellMesh& m, const std::vector<std::pair<int, int>>& grid_ij, int n) {
  const int nv = static_cast<int>(m.vertices.size());

  // region tags by centroid
  m.tri_region.resize(m.triangles.size());
  Region disk = m.geom.disk_region();
  Region outside = disk == Region::soft ? Region::stiff : Region::soft;
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    Vec2 cen = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
    m.tri_region[k] = ((cen - m.geom.center).norm() < m.geom.radius) ? disk : outside;
    if (tri_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) <= 1e-14)
      throw MeshError("degenerate or inverted triangle");
  }

  // torus identification
  m.vertex_dof.assign(nv, -1);
  if (!grid_ij.empty()) {
    int next = 0;
    std::map<std::pair<int, int>, int> dof_of;
    for (int v = 0; v < nv; ++v) {
      auto [i, j] = grid_ij[v];
      if (i < 0) {
        m.vertex_dof[v] = next++;
        continue;
      }
      auto key = std::make_pair(i % n, j % n);
      auto it = dof_of.find(key);
      if (it == dof_of.end()) {
        m.vertex_dof[v] = next;
        dof_of.emplace(key, next);
        ++next;
      } else {
        m.vertex_dof[v] = it->second;
      }
    }
    m.n_dofs = next;
  } else {
    // refine path: identify by exact boundary coordinates
    std::map<std::pair<double, double>, int> dof_of;
    int next = 0;
    auto canonical = [](const Vec2& p) {
      double x = (p.x() == 1.0) ? 0.0 : p.x();
      double y = (p.y() == 1.0) ? 0.0 : p.y();
      return std::make_pair(x, y);
    };
    auto on_boundary = [](const Vec2& p) {
      return p.x() == 0.0 || p.x() == 1.0 || p.y() == 0.0 || p.y() == 1.0;
    };
    for (int v = 0; v < nv; ++v) {
      if (!on_boundary(m.vertices[v])) {
        m.vertex_dof[v] = next++;
        continue;
      }
      auto key = canonical(m.vertices[v]);
      auto it = dof_of.find(key);
      if (it == dof_of.end()) {
        m.vertex_dof[v] = next;
        dof_of.emplace(key, next);
        ++next;
      } else {
        m.vertex_dof[v] = it->second;
      }
    }
    m.n_dofs = next;
  }

  m.dof_position.assign(m.n_dofs, Vec2::Zero());
  {
    std::vector<char> seen(m.n_dofs, 0);
    for (int v = 0; v < nv; ++v) {
      int d = m.vertex_dof[v];
      if (!seen[d]) {
        m.dof_position[d] = m.vertices[v];
        seen[d] = 1;
      } else {
        // prefer the canonical representative (coordinates inside [0,1)^2)
        const Vec2& p = m.vertices[v];
        if (p.x() < 1.0 && p.y() < 1.0 &&
            (m.dof_position[d].x() == 1.0 || m.dof_position[d].y() == 1.0))
          m.dof_position[d] = p;
      }
    }
  }

  // Gamma edges: both endpoints on the circle and soft/stiff triangles on the
  // two sides.
  auto on_circle = [&](int v) {
    double d = (m.vertices[v] - m.geom.center).norm() - m.geom.radius;
    return std::abs(d) <= 1e-11 * std::max(1.0, m.geom.radius);
  };
  std::map<std::pair<int, int>, std::pair<int, int>> edge_regions;  // edge -> (soft count, stiff count)
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& t = m.triangles[k];
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (!on_circle(a) || !on_circle(b)) continue;
      auto key = std::minmax(a, b);
      auto& cnt = edge_regions[key];
      (m.tri_region[k] == Region::soft ? cnt.first : cnt.second)++;
    }
  }
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& [key, cnt] : edge_regions) {
    if (cnt.first == 1 && cnt.second == 1) {
      adj[key.first].push_back(key.second);
      adj[key.second].push_back(key.first);
    }
  }
  if (adj.empty()) throw MeshError("no interface edges found");
  int start = adj.begin()->first;
  for (const auto& [v, nb] : adj) {
    if (nb.size() != 2) throw MeshError("Gamma is not a closed loop");
    start = std::min(start, v);
  }
  std::vector<int> loop{start};
  int prev = -1, cur = start;
  while (true) {
    const auto& nb = adj[cur];
    int nxt = (nb[0] == prev) ? nb[1] : nb[0];
    if (nxt == start) break;
    loop.push_back(nxt);
    prev = cur;
    cur = nxt;
  }
  if (loop.size() != adj.size()) throw MeshError("Gamma loop does not visit all interface vertices");
  // orient CCW
  double area2 = 0;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    const Vec2& a = m.vertices[loop[k]];
    const Vec2& b = m.vertices[loop[(k + 1) % loop.size()]];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  if (area2 < 0) std::reverse(loop.begin(), loop.end());

  // interface vertices are never periodic, so each maps to its own dof
  m.gamma_loop.clear();
  for (int v : loop) m.gamma_loop.push_back(m.vertex_dof[v]);

  // vertex normals: average of adjacent edge outward normals (out of the CCW
  // polygon = out of the disk), flipped for Model II so they point out of soft.
  const int ng = static_cast<int>(loop.size());
  m.gamma_normal.resize(ng);
  double flip = (m.geom.disk_region() == Region::soft) ? 1.0 : -1.0;
  for (int k = 0; k < ng; ++k) {
    const Vec2& pm = m.vertices[loop[(k + ng - 1) % ng]];
    const Vec2& pp = m.vertices[loop[(k + 1) % ng]];
    Vec2 t = pp - pm;
    Vec2 nrm(t.y(), -t.x());
    m.gamma_normal[k] = flip * nrm.normalized();
  }

  m.gamma_flag.assign(m.n_dofs, 0);
  for (int d : m.gamma_loop) m.gamma_flag[d] = 1;

  // h and area sanity
  m.h = 0;
  double atot = 0;
  for (const auto& t : m.triangles) {
    for (int e = 0; e < 3; ++e)
      m.h = std::max(m.h, (m.vertices[t[e]] - m.vertices[t[(e + 1) % 3]]).norm());
    atot += tri_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
  }
  if (std::abs(atot - 1.0) > 1e-9) throw MeshError("triangulation does not tile the cell");
}

}  // namespace

void CellGeometry::validate() const {
  if (radius <= 0) throw GeometryError("inclusion radius must be positive");
  for (int k = 0; k < 2; ++k) {
    if (!(center[k] - radius > 0.0 && center[k] + radius < 1.0))
      throw GeometryError("inclusion exits cell");
  }
}

double CellMesh::area(Region r) const {
  double a = 0;
  for (std::size_t k = 0; k < triangles.size(); ++k)
    if (tri_region[k] == r)
      a += tri_area(vertices[triangles[k][0]], vertices[triangles[k][1]], vertices[triangles[k][2]]);
  return a;
}

double CellMesh::gamma_length() const {
  double len = 0;
  const int ng = n_gamma();
  for (int k = 0; k < ng; ++k)
    len += (dof_position[gamma_loop[(k + 1) % ng]] - dof_position[gamma_loop[k]]).norm();
  return len;
}

bool CellMesh::on_gamma(int dof) const { return gamma_flag[dof] != 0; }

CellMesh build_cell(const CellGeometry& geom, double h_target) {
  geom.validate();
  if (!(h_target > 0 && h_target <= geom.radius / 4))
    throw GeometryError("h_target must lie in (0, radius/4]");
  double clearance = std::min({geom.center.x() - geom.radius, 1.0 - geom.center.x() - geom.radius,
                               geom.center.y() - geom.radius, 1.0 - geom.center.y() - geom.radius});
  if (clearance < 2.0 * h_target)
    throw GeometryError("inclusion touches cell boundary after one mesh layer");

  int n = static_cast<int>(std::ceil(1.75 / h_target));
  if (n % 2) ++n;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Builder b(geom, n);
    b.make_grid();
    b.cut_interface();
    CellMesh m;
    m.geom = geom;
    m.vertices = std::move(b.verts);
    m.triangles = std::move(b.tris);
    finalize(m, b.grid_ij, n);
    if (m.h <= h_target) return m;
    n = n + 2 + n / 8;
    if (n % 2) ++n;
  }
  throw MeshError("could not reach target edge length");
}

CellMesh refine(const CellMesh& mesh) {
  CellMesh m;
  m.geom = mesh.geom;
  m.vertices = mesh.vertices;
  // Gamma edge set (vertex ids) for midpoint projection. gamma_loop stores dof
  // ids equal to vertex ids for interface vertices.
  std::map<std::pair<int, int>, bool> is_gamma_edge;
  {
    const int ng = mesh.n_gamma();
    // map dof -> vertex: interface vertices are non-periodic, so find vertices
    // whose dof matches.
    std::unordered_map<int, int> vtx_of_dof;
    for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v) {
      int d = mesh.vertex_dof[v];
      if (mesh.gamma_flag[d]) vtx_of_dof[d] = v;
    }
    for (int k = 0; k < ng; ++k) {
      int a = vtx_of_dof.at(mesh.gamma_loop[k]);
      int b = vtx_of_dof.at(mesh.gamma_loop[(k + 1) % ng]);
      is_gamma_edge[std::minmax(a, b)] = true;
    }
  }
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec2 p = 0.5 * (m.vertices[a] + m.vertices[b]);
    if (is_gamma_edge.count(key)) {
      Vec2 u = p - m.geom.center;
      p = m.geom.center + u * (m.geom.radius / u.norm());
    }
    int v = static_cast<int>(m.vertices.size());
    m.vertices.push_back(p);
    midpoint.emplace(key, v);
    return v;
  };
  m.triangles.reserve(mesh.triangles.size() * 4);
  std::vector<Region> regions;
  regions.reserve(mesh.triangles.size() * 4);
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
    auto [a, b, c] = mesh.triangles[k];
    int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    m.triangles.push_back({a, ab, ca});
    m.triangles.push_back({ab, b, bc});
    m.triangles.push_back({ca, bc, c});
    m.triangles.push_back({ab, bc, ca});
    for (int r = 0; r < 4; ++r) regions.push_back(mesh.tri_region[k]);
  }
  finalize(m, {}, 0);
  // finalize re-derives tags by centroid; chord children of disk-side parents
  // sit inside the circle and outside-parents' children outside, so the
  // centroid rule reproduces the inherited tags. Assert that.
  for (std::size_t k = 0; k < m.triangles.size(); ++k)
    if (m.tri_region[k] != regions[k]) throw MeshError("refinement changed a region tag");
  return m;
}

void export_text(const CellMesh& mesh, std::ostream& os) {
  os << "vertices " << mesh.vertices.size() << "\n";
  for (const auto& p : mesh.vertices)
    os << fmt_double(p.x()) << " " << fmt_double(p.y()) << "\n";
  os << "triangles " << mesh.triangles.size() << "\n";
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
    const auto& t = mesh.triangles[k];
    os << t[0] << " " << t[1] << " " << t[2] << " " << to_string(mesh.tri_region[k]) << "\n";
  }
}

}  // namespace homog
