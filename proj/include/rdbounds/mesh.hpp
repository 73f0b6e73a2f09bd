#ifndef RDBOUNDS_MESH_HPP
#define RDBOUNDS_MESH_HPP

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdbounds/types.hpp"

namespace rdb {

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Boundary edge oriented a->b as it appears in its (counter-clockwise) owning
/// triangle, so the outward unit normal is the right-hand perpendicular of b-a.
struct BoundaryEdge {
  int a = 0;
  int b = 0;
  int tag = 0; // 1 = Dirichlet, 2 = Neumann, 3 = Robin
};

/// Conforming 2D triangulation with the boundary split into three tagged parts.
/// Immutable after construction; all geometric quantities are precomputed.
class Mesh {
public:
  Mesh(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles,
       std::vector<BoundaryEdge> boundary_edges, std::vector<std::string> warnings = {});

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int boundary_edge_count() const { return static_cast<int>(edges_.size()); }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return edges_; }

  double area(int t) const { return area_[t]; }
  double total_area() const { return total_area_; }
  /// Gradient of the P1 basis function of local vertex k on triangle t.
  const Vec2& basis_gradient(int t, int k) const { return grad_[t][k]; }
  Vec2 centroid(int t) const;

  double edge_length(int e) const { return edge_length_[e]; }
  const Vec2& edge_normal(int e) const { return edge_normal_[e]; } // outward unit
  Vec2 edge_midpoint(int e) const;

  /// Indices into boundary_edges() carrying the given tag, in construction order.
  const std::vector<int>& edges_with_tag(int tag) const;
  /// Position of boundary edge e within its tag list.
  int tag_position(int e) const { return tag_pos_[e]; }

  const std::vector<int>& dirichlet_nodes() const { return dirichlet_nodes_; }
  bool is_dirichlet(int node) const { return dirichlet_mask_[node] != 0; }

  /// Longest triangle edge in the mesh.
  double h_max() const { return h_max_; }

  /// Signed area of the boundary loop; equals total_area for a valid mesh.
  double boundary_loop_area() const;

  const std::vector<std::string>& warnings() const { return warnings_; }

private:
  void validate_and_build();

  std::vector<Vec2> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<BoundaryEdge> edges_;
  std::vector<std::string> warnings_;

  std::vector<double> area_;
  std::vector<std::array<Vec2, 3>> grad_;
  std::vector<double> edge_length_;
  std::vector<Vec2> edge_normal_;
  std::vector<int> tag_edges_[3];
  std::vector<int> tag_pos_;
  std::vector<int> dirichlet_nodes_;
  std::vector<uint8_t> dirichlet_mask_;
  double total_area_ = 0.0;
  double h_max_ = 0.0;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Uniform right-triangle mesh of [0,1]^2 with 2n^2 triangles.
/// Left edge tag 1, top and bottom tag 2, right edge tag 3.
Mesh unit_square_mesh(int n);

/// Parse the line-oriented mesh format:
///   nodes N      followed by N lines "x y"
///   triangles T  followed by T lines "i j k"   (0-based)
///   edges E      followed by E lines "i j tag"
/// Blank lines and '#' comments are ignored. Negatively oriented triangles
/// are repaired by a vertex swap and recorded as warnings.
Mesh load_mesh(const std::string& text);
Mesh load_mesh_file(const std::string& path);

/// Serialize in the same format load_mesh reads.
std::string mesh_to_text(const Mesh& mesh);

/// Sum of boundary edge lengths with the given tag (zero if the part is empty).
double boundary_measure(const Mesh& mesh, int tag);

/// Uniform refinement: every triangle splits into four via edge midpoints.
struct RefinedMesh {
  MeshPtr mesh;
  /// Fine node -> its one or two coarse parent nodes (equal for kept nodes).
  std::vector<std::array<int, 2>> parent_nodes;
  /// Fine triangle -> coarse triangle it came from.
  std::vector<int> parent_triangle;
  /// Fine boundary edge -> coarse boundary edge it came from.
  std::vector<int> parent_edge;
};
RefinedMesh refine_uniform(const Mesh& mesh);

} // namespace rdb

#endif
