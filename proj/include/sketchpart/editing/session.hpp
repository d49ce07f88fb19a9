#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sketchpart/model/networks.hpp"
#include "sketchpart/render/render.hpp"
#include "sketchpart/shape/mesh.hpp"

namespace sketchpart::editing {

using shape::LabeledMesh;
using shape::PartSet;

struct EditOptions {
  double inclusion_threshold = 0.5;   // presence needed to build a part's geometry
  double completion_threshold = 0.01; // presence below this flags a part as completed
  std::size_t grid_res = 48;
  std::size_t history_limit = 32;
  render::RenderOptions render;

  void validate() const;
};

/// Result of every editing operation. face_part holds slot indices.
struct EditResult {
  LabeledMesh mesh;
  std::vector<double> presence;
  std::vector<bool> completed;
  /// No slot reached the inclusion threshold.
  bool empty_shape = false;

  /// {"mesh","presence","completion","empty_shape"}; completion is one
  /// {"part","presence","completed"} object per slot.
  nlohmann::json to_json() const;
};

struct Snapshot {
  std::string op;
  PartSet latents;
};

/// One user's editing state. Callers serialize access through `mutex`.
struct Session {
  std::string id;
  PartSet current;
  std::set<std::size_t> selected;
  std::vector<Snapshot> history;  // history.back().latents == current
  render::Camera camera;
  std::mutex mutex;

  Session(std::string id, std::size_t m, std::size_t d_model);
};

/// Trained networks plus options, shared read-only by all sessions.
class Editor {
 public:
  /// The refiner may be null; refine_selected then throws StateError.
  Editor(std::shared_ptr<const model::SketchToParts> net, std::shared_ptr<const model::Refiner> refiner,
         EditOptions options = {});

  const EditOptions& options() const { return options_; }
  const model::ModelConfig& config() const { return net_->config(); }
  bool has_refiner() const { return refiner_ != nullptr; }

  /// Normalizes the sketch (EmptySketchError when blank), predicts, replaces
  /// the current latents and appends a snapshot.
  EditResult generate(Session& s, const render::Image& sketch) const;
  /// Sets the selection (set semantics); ArgumentError on an id >= m.
  /// Returns the faces of the current mesh generated by the selected parts.
  std::vector<std::size_t> select_parts(Session& s, std::span<const std::size_t> ids) const;
  /// Zeroes the selected rows, runs the refiner and writes back only those
  /// rows, with presence 1. ArgumentError on an empty selection.
  EditResult refine_selected(Session& s) const;
  /// Replaces the selected rows and presence scores with those predicted
  /// from `sketch`. ArgumentError on an empty selection.
  EditResult blend(Session& s, const render::Image& sketch) const;
  /// Outline of the present parts from `camera` (default: the session
  /// camera). EmptyShapeError when nothing is present.
  render::Sketch outline_current(const Session& s, const std::optional<render::Camera>& camera = std::nullopt) const;
  /// Restores the previous snapshot; StateError when there is none.
  EditResult undo(Session& s) const;

  /// Mesh and flags of the session's current latents.
  EditResult describe(const Session& s) const;
  /// Mesh of a latent set's present parts with slot-indexed face_part.
  LabeledMesh mesh_of(const PartSet& set) const;

 private:
  EditResult commit(Session& s, std::string op, PartSet next) const;

  std::shared_ptr<const model::SketchToParts> net_;
  std::shared_ptr<const model::Refiner> refiner_;
  EditOptions options_;
};

/// Thrown for an unknown session id.
class SessionNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thread-safe map of live sessions.
class SessionStore {
 public:
  SessionStore(std::size_t m, std::size_t d_model, std::uint64_t seed);

  /// New session with a fresh 128-bit hex id.
  std::string create();
  /// Throws SessionNotFound.
  std::shared_ptr<Session> get(const std::string& id) const;
  /// False when the id was unknown.
  bool erase(const std::string& id);
  std::size_t size() const;

  /// Runs fn with the session locked.
  template <class Fn>
  auto with(const std::string& id, Fn&& fn) {
    auto session = get(id);
    std::lock_guard lock(session->mutex);
    return std::forward<Fn>(fn)(*session);
  }

 private:
  std::size_t m_, d_model_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t state_;
};

}  // namespace sketchpart::editing
