#include "rdbounds/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace rdb {

namespace {

uint64_t edge_key(int a, int b)
{
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
}

double signed_area(const Vec2& p0, const Vec2& p1, const Vec2& p2)
{
  return 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
}

} // namespace

Mesh::Mesh(std::vector<Vec2> nodes, std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges, std::vector<std::string> warnings)
  : nodes_(std::move(nodes)),
    triangles_(std::move(triangles)),
    edges_(std::move(boundary_edges)),
    warnings_(std::move(warnings))
{
  validate_and_build();
}

void Mesh::validate_and_build()
{
  const int n = node_count();
  const int t = triangle_count();
  if (n < 3 || t < 1) throw MeshError("mesh needs at least 3 nodes and 1 triangle");

  for (int i = 0; i < t; ++i)
    for (int k = 0; k < 3; ++k)
      if (triangles_[i][k] < 0 || triangles_[i][k] >= n)
        throw MeshError("triangle " + std::to_string(i) + ": node index out of range");
  for (size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].a < 0 || edges_[e].a >= n || edges_[e].b < 0 || edges_[e].b >= n)
      throw MeshError("edge " + std::to_string(e) + ": node index out of range");
    if (edges_[e].tag < 1 || edges_[e].tag > 3)
      throw MeshError("edge " + std::to_string(e) + ": tag must be 1, 2 or 3");
  }

  area_.resize(t);
  grad_.resize(t);
  total_area_ = 0.0;
  h_max_ = 0.0;
  for (int i = 0; i < t; ++i) {
    const Vec2& p0 = nodes_[triangles_[i][0]];
    const Vec2& p1 = nodes_[triangles_[i][1]];
    const Vec2& p2 = nodes_[triangles_[i][2]];
    const double a = signed_area(p0, p1, p2);
    if (a <= 0.0)
      throw MeshError("triangle " + std::to_string(i) + ": non-positive orientation");
    area_[i] = a;
    total_area_ += a;
    // grad of basis k is the inward perpendicular of the opposite edge / (2 area)
    grad_[i][0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / (2.0 * a);
    grad_[i][1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / (2.0 * a);
    grad_[i][2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / (2.0 * a);
    h_max_ = std::max({h_max_, (p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
  }

  // Edges shared by exactly one triangle form the topological boundary. Track
  // the ccw-oriented form (i -> next vertex) of the single owner.
  std::unordered_map<uint64_t, std::pair<int, std::pair<int, int>>> count; // key -> (count, oriented)
  count.reserve(3 * t);
  for (int i = 0; i < t; ++i) {
    for (int k = 0; k < 3; ++k) {
      const int u = triangles_[i][k];
      const int v = triangles_[i][(k + 1) % 3];
      auto& entry = count[edge_key(u, v)];
      entry.first += 1;
      entry.second = {u, v};
    }
  }

  std::unordered_map<uint64_t, int> seen; // boundary key -> edge list index
  for (size_t e = 0; e < edges_.size(); ++e) {
    const uint64_t key = edge_key(edges_[e].a, edges_[e].b);
    auto it = count.find(key);
    if (it == count.end() || it->second.first != 1)
      throw MeshError("edge " + std::to_string(e) + ": not a boundary edge of exactly one triangle");
    if (seen.count(key))
      throw MeshError("edge " + std::to_string(e) + ": duplicate boundary edge");
    seen[key] = static_cast<int>(e);
    // normalize to the owning triangle's ccw orientation
    edges_[e].a = it->second.second.first;
    edges_[e].b = it->second.second.second;
  }
  for (const auto& [key, entry] : count) {
    if (entry.first > 2) throw MeshError("non-manifold interior edge");
    if (entry.first == 1 && !seen.count(key))
      throw MeshError("boundary edge (" + std::to_string(entry.second.first) + "," +
                      std::to_string(entry.second.second) + ") carries no tag");
  }

  edge_length_.resize(edges_.size());
  edge_normal_.resize(edges_.size());
  tag_pos_.resize(edges_.size());
  for (size_t e = 0; e < edges_.size(); ++e) {
    const Vec2 d = nodes_[edges_[e].b] - nodes_[edges_[e].a];
    edge_length_[e] = d.norm();
    if (edge_length_[e] <= 0.0) throw MeshError("edge " + std::to_string(e) + ": zero length");
    edge_normal_[e] = Vec2(d.y(), -d.x()) / edge_length_[e];
    tag_pos_[e] = static_cast<int>(tag_edges_[edges_[e].tag - 1].size());
    tag_edges_[edges_[e].tag - 1].push_back(static_cast<int>(e));
  }
  if (tag_edges_[0].empty())
    throw MeshError("Gamma_1 empty: at least one tag-1 (Dirichlet) edge is required");

  dirichlet_mask_.assign(n, 0);
  for (int e : tag_edges_[0]) {
    dirichlet_mask_[edges_[e].a] = 1;
    dirichlet_mask_[edges_[e].b] = 1;
  }
  for (int i = 0; i < n; ++i)
    if (dirichlet_mask_[i]) dirichlet_nodes_.push_back(i);
}

Vec2 Mesh::centroid(int t) const
{
  return (nodes_[triangles_[t][0]] + nodes_[triangles_[t][1]] + nodes_[triangles_[t][2]]) / 3.0;
}

Vec2 Mesh::edge_midpoint(int e) const
{
  return 0.5 * (nodes_[edges_[e].a] + nodes_[edges_[e].b]);
}

const std::vector<int>& Mesh::edges_with_tag(int tag) const
{
  if (tag < 1 || tag > 3) throw MeshError("tag must be 1, 2 or 3");
  return tag_edges_[tag - 1];
}

double Mesh::boundary_loop_area() const
{
  double a = 0.0;
  for (const auto& e : edges_) {
    const Vec2& p = nodes_[e.a];
    const Vec2& q = nodes_[e.b];
    a += 0.5 * (p.x() * q.y() - q.x() * p.y());
  }
  return a;
}

Mesh unit_square_mesh(int n)
{
  if (n < 1) throw MeshError("unit_square_mesh: subdivision count must be >= 1");
  const auto idx = [n](int i, int j) { return j * (n + 1) + i; };

  std::vector<Vec2> nodes;
  nodes.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      nodes.emplace_back(double(i) / n, double(j) / n);

  std::vector<std::array<int, 3>> tris;
  tris.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      tris.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      tris.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }

  std::vector<BoundaryEdge> edges;
  edges.reserve(4 * n);
  for (int i = 0; i < n; ++i) edges.push_back({idx(i, 0), idx(i + 1, 0), 2});     // bottom
  for (int j = 0; j < n; ++j) edges.push_back({idx(n, j), idx(n, j + 1), 3});     // right
  for (int i = n; i > 0; --i) edges.push_back({idx(i, n), idx(i - 1, n), 2});     // top
  for (int j = n; j > 0; --j) edges.push_back({idx(0, j), idx(0, j - 1), 1});     // left
  return Mesh(std::move(nodes), std::move(tris), std::move(edges));
}

namespace {

struct LineReader {
  std::istringstream in;
  int line_no = 0;
  explicit LineReader(const std::string& text) : in(text) {}

  // next non-empty, non-comment line; false at end of input
  bool next(std::istringstream& out)
  {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      out = std::istringstream(line);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const
  {
    throw MeshError("line " + std::to_string(line_no) + ": " + what);
  }
};

} // namespace

Mesh load_mesh(const std::string& text)
{
  LineReader reader(text);
  std::istringstream line;

  auto expect_header = [&](const char* keyword) -> int {
    if (!reader.next(line)) reader.fail(std::string("expected '") + keyword + " <count>'");
    std::string word;
    int count = -1;
    if (!(line >> word >> count) || word != keyword || count < 0)
      reader.fail(std::string("expected '") + keyword + " <count>'");
    return count;
  };

  const int n = expect_header("nodes");
  std::vector<Vec2> nodes(n);
  for (int i = 0; i < n; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of input in node list");
    double x, y;
    if (!(line >> x >> y)) reader.fail("expected 'x y'");
    nodes[i] = Vec2(x, y);
  }

  const int t = expect_header("triangles");
  std::vector<std::array<int, 3>> tris(t);
  std::vector<std::string> warnings;
  for (int i = 0; i < t; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of input in triangle list");
    if (!(line >> tris[i][0] >> tris[i][1] >> tris[i][2])) reader.fail("expected 'i j k'");
    for (int k = 0; k < 3; ++k)
      if (tris[i][k] < 0 || tris[i][k] >= n) reader.fail("triangle node index out of range");
    const double a = signed_area(nodes[tris[i][0]], nodes[tris[i][1]], nodes[tris[i][2]]);
    if (a == 0.0) reader.fail("degenerate triangle " + std::to_string(i));
    if (a < 0.0) {
      std::swap(tris[i][1], tris[i][2]);
      warnings.push_back("triangle " + std::to_string(i) + " reoriented");
    }
  }

  const int e = expect_header("edges");
  std::vector<BoundaryEdge> edges(e);
  for (int i = 0; i < e; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of input in edge list");
    if (!(line >> edges[i].a >> edges[i].b >> edges[i].tag)) reader.fail("expected 'i j tag'");
  }

  if (reader.next(line)) reader.fail("trailing content after edge list");
  return Mesh(std::move(nodes), std::move(tris), std::move(edges), std::move(warnings));
}

Mesh load_mesh_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_mesh(buffer.str());
}

std::string mesh_to_text(const Mesh& mesh)
{
  std::ostringstream out;
  out.precision(17);
  out << "nodes " << mesh.node_count() << "\n";
  for (const auto& p : mesh.nodes()) out << p.x() << " " << p.y() << "\n";
  out << "triangles " << mesh.triangle_count() << "\n";
  for (const auto& t : mesh.triangles()) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "edges " << mesh.boundary_edge_count() << "\n";
  for (const auto& e : mesh.boundary_edges()) out << e.a << " " << e.b << " " << e.tag << "\n";
  return out.str();
}

double boundary_measure(const Mesh& mesh, int tag)
{
  double total = 0.0;
  for (int e : mesh.edges_with_tag(tag)) total += mesh.edge_length(e);
  return total;
}

RefinedMesh refine_uniform(const Mesh& mesh)
{
  const int n = mesh.node_count();
  std::vector<Vec2> nodes = mesh.nodes();
  std::vector<std::array<int, 2>> parents;
  parents.reserve(n);
  for (int i = 0; i < n; ++i) parents.push_back({i, i});

  std::unordered_map<uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const uint64_t key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(0.5 * (mesh.nodes()[a] + mesh.nodes()[b]));
    parents.push_back({std::min(a, b), std::max(a, b)});
    midpoint.emplace(key, id);
    return id;
  };

  std::vector<std::array<int, 3>> tris;
  std::vector<int> parent_tri;
  tris.reserve(4 * mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto [a, b, c] = mesh.triangles()[t];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    tris.push_back({a, ab, ca});
    tris.push_back({ab, b, bc});
    tris.push_back({ca, bc, c});
    tris.push_back({ab, bc, ca});
    for (int k = 0; k < 4; ++k) parent_tri.push_back(t);
  }

  std::vector<BoundaryEdge> edges;
  std::vector<int> parent_edge;
  edges.reserve(2 * mesh.boundary_edge_count());
  for (int e = 0; e < mesh.boundary_edge_count(); ++e) {
    const auto& be = mesh.boundary_edges()[e];
    const int m = mid(be.a, be.b);
    edges.push_back({be.a, m, be.tag});
    edges.push_back({m, be.b, be.tag});
    parent_edge.push_back(e);
    parent_edge.push_back(e);
  }

  RefinedMesh out;
  out.mesh = std::make_shared<Mesh>(std::move(nodes), std::move(tris), std::move(edges));
  out.parent_nodes = std::move(parents);
  out.parent_triangle = std::move(parent_tri);
  out.parent_edge = std::move(parent_edge);
  return out;
}

} // namespace rdb
