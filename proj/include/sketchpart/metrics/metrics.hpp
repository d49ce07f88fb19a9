#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sketchpart/render/render.hpp"
#include "sketchpart/shape/mesh.hpp"

namespace sketchpart::metrics {

using shape::LabeledMesh;
using shape::Vec3;

/// (1/|A|) sum_a min_b |a-b|^2 + (1/|B|) sum_b min_a |a-b|^2, using a
/// uniform grid over each set. Bit-identical to chamfer_brute.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);
double chamfer_brute(std::span<const Vec3> a, std::span<const Vec3> b);

struct EmdOptions {
  std::size_t exact_limit = 512;  // Hungarian up to this size
  bool force_exact = false;
  double auction_eps = 1e-3;      // final bid increment, times the bounding diagonal
};

/// min over bijections pi of sum_i |a_i - b_pi(i)|. Exact (Hungarian) for
/// n <= exact_limit; above that an epsilon-scaled auction whose total is
/// within n * auction_eps * diagonal of the optimum.
double emd(std::span<const Vec3> a, std::span<const Vec3> b, const EmdOptions& options = {});
/// Optimal assignment for a square cost matrix; returns column per row.
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost);
std::vector<std::size_t> auction(const Eigen::MatrixXd& cost, double eps_final);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// One Gaussian per rendered view.
using FeatureStats = std::vector<GaussianStats>;

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2). Covariances are
/// symmetrized and eigenvalues below zero clamped.
double frechet_gaussian(const GaussianStats& out, const GaussianStats& ref);
/// Mean of frechet_gaussian over views.
double frechet_distance(const FeatureStats& out, const FeatureStats& ref);

inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::uint64_t kFeatureSeed = 0xFEED;

/// Frozen random 3-layer stride-2 conv net on a 64x64 resample of the image;
/// returns [positions, 64] feature columns.
Eigen::MatrixXd view_feature_columns(const render::Image& image);
/// Global average of the feature columns.
Eigen::VectorXd extract_view_features(const render::Image& image);
/// Mean and covariance over the spatial feature columns of one view.
GaussianStats view_stats(const render::Image& image);

/// Cameras used for the Fréchet views.
std::vector<render::Camera> frechet_views(std::size_t count = 20);
FeatureStats mesh_feature_stats(const LabeledMesh& mesh, std::size_t views = 20, std::size_t res = 128);

struct NamedMesh {
  std::string id;
  LabeledMesh mesh;
};

struct RetrievalHit {
  std::string id;
  double cd = 0.0;
};

/// Chamfer from the query to every candidate on n_points samples drawn with
/// the same seed, ascending, ties by id; first k.
std::vector<RetrievalHit> retrieval_topk(const LabeledMesh& query, std::span<const NamedMesh> candidates, std::size_t k,
                                         std::size_t n_points, std::uint64_t seed);

struct PairReport {
  std::vector<double> cd;
  std::vector<double> emd;
  double frechet = 0.0;
  std::size_t n_points = 0;
  std::uint64_t seed = 0;

  /// {"cd_mean","cd_per_item","emd_mean","frechet","n_points","seed"}
  nlohmann::json to_json() const;
};

/// Scores predicted meshes against references item by item. EMD uses
/// min(n_points, emd_points) samples; Fréchet pools all items per view.
PairReport score_pairs(std::span<const LabeledMesh> pred, std::span<const LabeledMesh> ref, std::size_t n_points,
                       std::uint64_t seed, std::size_t emd_points = 1000, std::size_t frechet_views = 20);

}  // namespace sketchpart::metrics
