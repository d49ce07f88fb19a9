#include "sketchpart/shape/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "sketchpart/errors.hpp"

namespace sketchpart::shape {

Vec3 LabeledMesh::centroid(std::size_t face) const {
  const auto& f = faces[face];
  return (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0;
}

double LabeledMesh::face_area(std::size_t face) const {
  const auto& f = faces[face];
  return 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
}

double LabeledMesh::surface_area() const {
  double total = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) total += face_area(f);
  return total;
}

namespace {

// Kuhn/Freudenthal split: one tetrahedron per axis permutation, each a
// monotone path 000 -> 111 through the cube corners (bit 0 = x, 1 = y, 2 = z).
constexpr std::array<std::array<int, 4>, 6> kTets{{
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
}};

constexpr double kEdgeClamp = 1e-7;

class Extractor {
 public:
  Extractor(std::span<const PartPrimitive> parts, const MeshOptions& opt)
      : parts_(parts), opt_(opt), n_(opt.grid_res + 1), step_(2.0 * opt.domain_half / static_cast<double>(opt.grid_res)) {}

  LabeledMesh run() {
    sample_field();
    const auto res = opt_.grid_res;
    for (std::size_t k = 0; k < res; ++k)
      for (std::size_t j = 0; j < res; ++j)
        for (std::size_t i = 0; i < res; ++i) march_cube(i, j, k);
    mesh_.face_part.reserve(mesh_.faces.size());
    for (std::size_t f = 0; f < mesh_.faces.size(); ++f) {
      mesh_.face_part.push_back(static_cast<std::uint32_t>(part_responsibility(parts_, mesh_.centroid(f))));
    }
    return std::move(mesh_);
  }

 private:
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (k * n_ + j) * n_ + i; }
  Vec3 position(std::size_t id) const {
    const auto i = id % n_, j = (id / n_) % n_, k = id / (n_ * n_);
    return {-opt_.domain_half + static_cast<double>(i) * step_, -opt_.domain_half + static_cast<double>(j) * step_,
            -opt_.domain_half + static_cast<double>(k) * step_};
  }

  void sample_field() {
    field_.resize(n_ * n_ * n_);
    for (std::size_t id = 0; id < field_.size(); ++id) field_[id] = sdf(parts_, position(id)) - opt_.iso;
  }

  std::uint32_t edge_vertex(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    const std::uint64_t key = static_cast<std::uint64_t>(a) * field_.size() + b;
    auto [it, inserted] = edge_ids_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (inserted) {
      const double fa = field_[a], fb = field_[b];
      const double t = std::clamp(fa / (fa - fb), kEdgeClamp, 1.0 - kEdgeClamp);
      mesh_.vertices.push_back(position(a) + t * (position(b) - position(a)));
    }
    return it->second;
  }

  void emit(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::size_t inside, std::size_t outside) {
    const auto& v = mesh_.vertices;
    const Vec3 normal = (v[b] - v[a]).cross(v[c] - v[a]);
    if (normal.dot(position(outside) - position(inside)) < 0.0) std::swap(b, c);
    mesh_.faces.push_back({a, b, c});
  }

  void march_cube(std::size_t i, std::size_t j, std::size_t k) {
    std::array<std::size_t, 8> corner{};
    bool any_in = false, any_out = false;
    for (int bits = 0; bits < 8; ++bits) {
      corner[bits] = index(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1));
      (field_[corner[bits]] < 0.0 ? any_in : any_out) = true;
    }
    if (!any_in || !any_out) return;
    for (const auto& tet : kTets) {
      std::array<std::size_t, 4> in{}, out{};
      std::size_t n_in = 0, n_out = 0;
      for (int c : tet) {
        const auto id = corner[c];
        if (field_[id] < 0.0) {
          in[n_in++] = id;
        } else {
          out[n_out++] = id;
        }
      }
      if (n_in == 0 || n_out == 0) continue;
      if (n_in == 1 || n_out == 1) {
        const bool lone_inside = n_in == 1;
        const auto lone = lone_inside ? in[0] : out[0];
        const auto& others = lone_inside ? out : in;
        const auto a = edge_vertex(lone, others[0]);
        const auto b = edge_vertex(lone, others[1]);
        const auto c = edge_vertex(lone, others[2]);
        emit(a, b, c, lone_inside ? lone : others[0], lone_inside ? others[0] : lone);
      } else {
        // Quad through edges in0-out0, in0-out1, in1-out1, in1-out0 (cyclic).
        const auto q0 = edge_vertex(in[0], out[0]);
        const auto q1 = edge_vertex(in[0], out[1]);
        const auto q2 = edge_vertex(in[1], out[1]);
        const auto q3 = edge_vertex(in[1], out[0]);
        emit(q0, q1, q2, in[0], out[0]);
        emit(q0, q2, q3, in[0], out[0]);
      }
    }
  }

  std::span<const PartPrimitive> parts_;
  MeshOptions opt_;
  std::size_t n_;
  double step_;
  std::vector<double> field_;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_ids_;
  LabeledMesh mesh_;
};

}  // namespace

LabeledMesh extract_mesh(std::span<const PartPrimitive> parts, const MeshOptions& options) {
  if (options.grid_res < 8) throw ArgumentError("extract_mesh: grid_res must be >= 8");
  if (parts.empty()) throw ArgumentError("extract_mesh: no parts");
  return Extractor(parts, options).run();
}

EdgeReport edge_report(const LabeledMesh& mesh) {
  std::unordered_map<std::uint64_t, std::uint32_t> uses;
  const std::uint64_t n = mesh.vertices.size();
  EdgeReport report;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2] || mesh.face_area(f) <= 0.0) {
      ++report.degenerate_faces;
    }
    for (int e = 0; e < 3; ++e) {
      std::uint64_t a = face[e], b = face[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[a * n + b];
    }
  }
  report.edges = uses.size();
  for (const auto& [key, count] : uses) {
    if (count == 1) ++report.boundary_edges;
    if (count > 2) ++report.non_manifold_edges;
  }
  return report;
}

std::vector<Vec3> sample_surface(const LabeledMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw ArgumentError("sample_surface: empty mesh");
  if (n == 0) throw ArgumentError("sample_surface: n must be >= 1");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw ArgumentError("sample_surface: mesh has zero area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> points;
  points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto f = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), mesh.faces.size() - 1);
    const double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
    const auto& face = mesh.faces[f];
    points.push_back((1.0 - r1) * mesh.vertices[face[0]] + r1 * (1.0 - r2) * mesh.vertices[face[1]] +
                     r1 * r2 * mesh.vertices[face[2]]);
  }
  return points;
}

std::vector<std::size_t> faces_of_parts(const LabeledMesh& mesh, std::span<const std::size_t> parts) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < mesh.face_part.size(); ++f) {
    if (std::find(parts.begin(), parts.end(), mesh.face_part[f]) != parts.end()) out.push_back(f);
  }
  return out;
}

std::string to_obj(const LabeledMesh& mesh) {
  std::string out;
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    groups[f < mesh.face_part.size() ? mesh.face_part[f] : 0].push_back(f);
  }
  for (const auto& [part, faces] : groups) {
    out += "g part_" + std::to_string(part) + "\n";
    for (auto f : faces) {
      const auto& face = mesh.faces[f];
      std::snprintf(buf, sizeof buf, "f %u %u %u\n", face[0] + 1, face[1] + 1, face[2] + 1);
      out += buf;
    }
  }
  return out;
}

void write_obj(const std::filesystem::path& path, const LabeledMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_obj(mesh);
}

LabeledMesh parse_obj(const std::string& text) {
  LabeledMesh mesh;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::uint32_t part = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError("malformed vertex", line_no);
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "g" || tag == "o") {
      std::string name;
      ls >> name;
      if (name.rfind("part_", 0) == 0) {
        const auto digits = name.substr(5);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), part);
        if (ec != std::errc()) throw ParseError("bad part group '" + name + "'", line_no);
      }
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string tok;
      while (ls >> tok) {
        long v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc()) throw ParseError("malformed face", line_no);
        if (v < 0) v = static_cast<long>(mesh.vertices.size()) + v + 1;
        if (v < 1 || static_cast<std::size_t>(v) > mesh.vertices.size()) throw ParseError("face index out of range", line_no);
        idx.push_back(v - 1);
      }
      if (idx.size() < 3) throw ParseError("face with fewer than 3 vertices", line_no);
      for (std::size_t t = 1; t + 1 < idx.size(); ++t) {
        mesh.faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[t]),
                              static_cast<std::uint32_t>(idx[t + 1])});
        mesh.face_part.push_back(part);
      }
    }
  }
  return mesh;
}

nlohmann::json mesh_to_json(const LabeledMesh& mesh) {
  nlohmann::json vertices = nlohmann::json::array();
  for (const auto& v : mesh.vertices) vertices.push_back({v.x(), v.y(), v.z()});
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : mesh.faces) faces.push_back({f[0], f[1], f[2]});
  return {{"vertices", std::move(vertices)}, {"faces", std::move(faces)}, {"face_part", mesh.face_part}};
}

LabeledMesh mesh_from_json(const nlohmann::json& j) {
  LabeledMesh mesh;
  try {
    for (const auto& v : j.at("vertices")) mesh.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    for (const auto& f : j.at("faces")) {
      std::array<std::uint32_t, 3> face{f.at(0).get<std::uint32_t>(), f.at(1).get<std::uint32_t>(), f.at(2).get<std::uint32_t>()};
      for (auto v : face) {
        if (v >= mesh.vertices.size()) throw ParseError("mesh face index out of range");
      }
      mesh.faces.push_back(face);
    }
    if (j.contains("face_part")) {
      mesh.face_part = j.at("face_part").get<std::vector<std::uint32_t>>();
    } else {
      mesh.face_part.assign(mesh.faces.size(), 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mesh json: ") + e.what());
  }
  if (mesh.face_part.size() != mesh.faces.size()) throw ParseError("face_part length differs from faces");
  return mesh;
}

LabeledMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return mesh_from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return parse_obj(buf.str());
}

void save_mesh(const std::filesystem::path& path, const LabeledMesh& mesh) {
  if (path.extension() == ".json") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << mesh_to_json(mesh).dump();
    return;
  }
  write_obj(path, mesh);
}

}  // namespace sketchpart::shape
