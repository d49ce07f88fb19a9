#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sketchpart/shape/primitive.hpp"

namespace sketchpart::shape {

/// Triangle mesh with the index of the generating part on every face.
struct LabeledMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<std::uint32_t> face_part;

  bool empty() const { return faces.empty(); }
  Vec3 centroid(std::size_t face) const;
  double face_area(std::size_t face) const;
  double surface_area() const;
};

struct MeshOptions {
  std::size_t grid_res = 48;  // cells per axis
  double iso = 0.0;
  double domain_half = 1.25;  // cube [-h, h]^3
};

/// Iso-surface extraction by marching cubes with every cube split into six
/// tetrahedra around its main diagonal (the Freudenthal split). Adjacent
/// cubes agree on their shared face diagonals, so a field whose zero set
/// stays inside the domain yields a closed, edge-manifold mesh. Vertices on
/// a grid edge are shared. Face normals point out of the solid.
/// face_part[f] = part_responsibility at the face centroid.
LabeledMesh extract_mesh(std::span<const PartPrimitive> parts, const MeshOptions& options = {});

struct EdgeReport {
  std::size_t edges = 0;
  std::size_t boundary_edges = 0;     // used by one face
  std::size_t non_manifold_edges = 0;  // used by three or more
  std::size_t degenerate_faces = 0;    // zero area or repeated index
  bool watertight() const { return boundary_edges == 0 && non_manifold_edges == 0; }
};

EdgeReport edge_report(const LabeledMesh& mesh);

/// Area-weighted uniform samples on the surface, deterministic in `seed`.
/// Throws ArgumentError on an empty mesh or n == 0.
std::vector<Vec3> sample_surface(const LabeledMesh& mesh, std::size_t n, std::uint64_t seed);

/// Faces whose part index is in `parts`.
std::vector<std::size_t> faces_of_parts(const LabeledMesh& mesh, std::span<const std::size_t> parts);

// Wavefront OBJ with one group "part_<i>" per part index, and the JSON
// form {"vertices": [[x,y,z]...], "faces": [[a,b,c]...], "face_part": [...]}.
void write_obj(const std::filesystem::path& path, const LabeledMesh& mesh);
std::string to_obj(const LabeledMesh& mesh);
LabeledMesh parse_obj(const std::string& text);
nlohmann::json mesh_to_json(const LabeledMesh& mesh);
LabeledMesh mesh_from_json(const nlohmann::json& j);
/// Loads .obj or .json by extension.
LabeledMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const LabeledMesh& mesh);

}  // namespace sketchpart::shape
