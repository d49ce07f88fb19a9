#include "sketchpart/editing/session.hpp"

#include <cstdio>

#include "sketchpart/errors.hpp"
#include "sketchpart/util/seed.hpp"

namespace sketchpart::editing {

void EditOptions::validate() const {
  if (!(inclusion_threshold > 0.0 && inclusion_threshold < 1.0)) throw ConfigError("inclusion threshold must lie in (0, 1)");
  if (!(completion_threshold > 0.0 && completion_threshold < 1.0)) throw ConfigError("completion threshold must lie in (0, 1)");
  if (grid_res < 4) throw ConfigError("grid_res must be >= 4");
  if (history_limit < 2) throw ConfigError("history_limit must be >= 2");
}

nlohmann::json EditResult::to_json() const {
  nlohmann::json completion = nlohmann::json::array();
  for (std::size_t i = 0; i < presence.size(); ++i) {
    completion.push_back({{"part", i}, {"presence", presence[i]}, {"completed", static_cast<bool>(completed[i])}});
  }
  return {{"mesh", shape::mesh_to_json(mesh)},
          {"presence", presence},
          {"completion", std::move(completion)},
          {"empty_shape", empty_shape}};
}

Session::Session(std::string id, std::size_t m, std::size_t d_model) : id(std::move(id)), current(m, d_model) {
  history.push_back({"init", current});
}

Editor::Editor(std::shared_ptr<const model::SketchToParts> net, std::shared_ptr<const model::Refiner> refiner,
               EditOptions options)
    : net_(std::move(net)), refiner_(std::move(refiner)), options_(std::move(options)) {
  if (!net_) throw ArgumentError("Editor needs a sketch network");
  options_.validate();
  if (refiner_ && !(refiner_->config().m == net_->config().m && refiner_->config().d_model == net_->config().d_model)) {
    throw ConfigError("refiner and sketch network disagree on m or d_model");
  }
}

LabeledMesh Editor::mesh_of(const PartSet& set) const {
  std::vector<std::size_t> slots;
  const auto parts = shape::decode_present(set, options_.inclusion_threshold, &slots);
  if (parts.empty()) return {};
  auto mesh = shape::extract_mesh(parts, {options_.grid_res});
  for (auto& p : mesh.face_part) p = static_cast<std::uint32_t>(slots[p]);
  return mesh;
}

EditResult Editor::describe(const Session& s) const {
  EditResult r;
  r.mesh = mesh_of(s.current);
  r.presence = s.current.c;
  r.completed = model::flag_completed(s.current.c, options_.completion_threshold);
  r.empty_shape = s.current.present_count(options_.inclusion_threshold) == 0;
  return r;
}

EditResult Editor::commit(Session& s, std::string op, PartSet next) const {
  s.current = std::move(next);
  s.history.push_back({std::move(op), s.current});
  if (s.history.size() > options_.history_limit) s.history.erase(s.history.begin());
  return describe(s);
}

EditResult Editor::generate(Session& s, const render::Image& sketch) const {
  return commit(s, "generate", net_->predict(render::normalize_sketch(sketch)));
}

std::vector<std::size_t> Editor::select_parts(Session& s, std::span<const std::size_t> ids) const {
  const std::size_t m = s.current.m;
  for (auto id : ids) {
    if (id >= m) throw ArgumentError("part id " + std::to_string(id) + " out of range [0, " + std::to_string(m) + ")");
  }
  s.selected = std::set<std::size_t>(ids.begin(), ids.end());
  const std::vector<std::size_t> chosen(s.selected.begin(), s.selected.end());
  return shape::faces_of_parts(mesh_of(s.current), chosen);
}

EditResult Editor::refine_selected(Session& s) const {
  if (s.selected.empty()) throw ArgumentError("refine needs a non-empty selection");
  if (!refiner_) throw StateError("no refinement network loaded");
  const std::size_t d = s.current.d_model;
  model::RefineMask mask{std::vector<bool>(s.current.m, false)};
  for (auto i : s.selected) mask.bits[i] = true;
  std::vector<double> input = s.current.z;
  for (auto i : s.selected) std::fill_n(input.begin() + static_cast<std::ptrdiff_t>(i * d), d, 0.0);
  const auto refined = refiner_->refine(input, mask);
  PartSet next = s.current;
  for (auto i : s.selected) {
    std::copy_n(refined.begin() + static_cast<std::ptrdiff_t>(i * d), d, next.row(i).begin());
    next.c[i] = 1.0;
  }
  return commit(s, "refine", std::move(next));
}

EditResult Editor::blend(Session& s, const render::Image& sketch) const {
  if (s.selected.empty()) throw ArgumentError("blend needs a non-empty selection");
  const PartSet fresh = net_->predict(render::normalize_sketch(sketch));
  PartSet next = s.current;
  for (auto i : s.selected) {
    const auto src = fresh.row(i);
    std::copy(src.begin(), src.end(), next.row(i).begin());
    next.c[i] = fresh.c[i];
  }
  return commit(s, "blend", std::move(next));
}

render::Sketch Editor::outline_current(const Session& s, const std::optional<render::Camera>& camera) const {
  const auto parts = shape::decode_present(s.current, options_.inclusion_threshold);
  if (parts.empty()) throw EmptyShapeError("the current shape has no parts");
  const render::Camera cam = camera.value_or(s.camera);
  cam.validate();
  return render::render_outline(parts, cam, options_.render);
}

EditResult Editor::undo(Session& s) const {
  if (s.history.size() < 2) throw StateError("nothing to undo");
  s.history.pop_back();
  s.current = s.history.back().latents;
  return describe(s);
}

SessionStore::SessionStore(std::size_t m, std::size_t d_model, std::uint64_t seed)
    : m_(m), d_model_(d_model), state_(seed) {}

std::string SessionStore::create() {
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    char buf[33];
    const auto a = mix_seed(state_, 1), b = mix_seed(state_, 2);
    state_ = mix_seed(state_, 3);
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a), static_cast<unsigned long long>(b));
    id = buf;
  } while (sessions_.count(id));
  sessions_.emplace(id, std::make_shared<Session>(id, m_, d_model_));
  return id;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound("no session '" + id + "'");
  return it->second;
}

bool SessionStore::erase(const std::string& id) {
  std::lock_guard lock(mutex_);
  return sessions_.erase(id) > 0;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace sketchpart::editing
