#include "sketchpart/service/server.hpp"

#include <httplib.h>

#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>

#include "sketchpart/errors.hpp"
#include "sketchpart/nn/checkpoint.hpp"

namespace sketchpart::service {
namespace {

using json = nlohmann::json;

volatile std::sig_atomic_t g_signal = 0;

extern "C" void on_signal(int sig) { g_signal = sig; }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = path.find('/', start);
    const auto piece = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!piece.empty()) parts.push_back(piece);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ApiError(ErrorCode::bad_request, "request body is not valid JSON");
  if (!j.is_object()) throw ApiError(ErrorCode::bad_request, "request body must be a JSON object");
  return j;
}

render::Image sketch_from(const json& body) {
  if (!body.contains("sketch_png_base64") || !body["sketch_png_base64"].is_string()) {
    throw ApiError(ErrorCode::bad_request, "missing string field sketch_png_base64");
  }
  return render::decode_png(render::base64_decode(body["sketch_png_base64"].get<std::string>()));
}

// Angle query parameter given in degrees; returns radians.
double query_degrees(const Request& r, const std::string& key, double fallback_radians) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) return fallback_radians;
  double value = 0.0;
  const auto* first = it->second.data();
  const auto* last = first + it->second.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ApiError(ErrorCode::bad_request, "query parameter " + key + " must be a number");
  }
  return value * render::kDegree;
}

Response ok(json body, int status = 200) { return {status, std::move(body)}; }

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::empty_sketch: return "empty_sketch";
    case ErrorCode::empty_shape: return "empty_shape";
    case ErrorCode::bad_selection: return "bad_selection";
    case ErrorCode::no_session: return "no_session";
    case ErrorCode::bad_request: return "bad_request";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::empty_sketch:
    case ErrorCode::empty_shape: return 422;
    case ErrorCode::bad_selection:
    case ErrorCode::bad_request: return 400;
    case ErrorCode::no_session: return 404;
    case ErrorCode::internal: return 500;
  }
  return 500;
}

json ApiError::to_json() const { return {{"code", std::string(service::to_string(code_))}, {"message", what()}}; }

ApiError classify(const std::exception& e) {
  if (const auto* api = dynamic_cast<const ApiError*>(&e)) return *api;
  if (dynamic_cast<const EmptySketchError*>(&e)) return {ErrorCode::empty_sketch, e.what()};
  if (dynamic_cast<const EmptyShapeError*>(&e)) return {ErrorCode::empty_shape, e.what()};
  if (dynamic_cast<const editing::SessionNotFound*>(&e)) return {ErrorCode::no_session, e.what()};
  if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const StateError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const json::exception*>(&e)) {
    return {ErrorCode::bad_request, e.what()};
  }
  return {ErrorCode::internal, e.what()};
}

Api::Api(std::shared_ptr<const editing::Editor> editor, std::uint64_t seed)
    : editor_(std::move(editor)), sessions_(editor_->config().m, editor_->config().d_model, seed) {}

Response Api::handle(const Request& request) {
  try {
    return route(request);
  } catch (const std::exception& e) {
    const auto err = classify(e);
    return {err.status(), err.to_json()};
  } catch (...) {
    return {500, ApiError(ErrorCode::internal, "unknown failure").to_json()};
  }
}

Response Api::route(const Request& r) {
  const auto seg = split_path(r.path);
  const auto& ed = *editor_;
  if (seg.size() < 2 || seg[0] != "api") throw ApiError(ErrorCode::bad_request, "unknown endpoint " + r.path);

  if (seg.size() == 2 && seg[1] == "health" && r.method == "GET") {
    return ok({{"status", "ok"}, {"model", "loaded"}, {"refiner", ed.has_refiner() ? "loaded" : "missing"}});
  }
  if (seg[1] != "sessions") throw ApiError(ErrorCode::bad_request, "unknown endpoint " + r.path);
  if (seg.size() == 2 && r.method == "POST") return ok({{"session_id", sessions_.create()}}, 201);
  if (seg.size() == 3 && r.method == "DELETE") {
    if (!sessions_.erase(seg[2])) throw ApiError(ErrorCode::no_session, "no session '" + seg[2] + "'");
    return ok({{"deleted", seg[2]}});
  }
  if (seg.size() != 4) throw ApiError(ErrorCode::bad_request, "unknown endpoint " + r.path);
  const auto& id = seg[2];
  const auto& action = seg[3];
  const bool post = r.method == "POST";

  if (action == "generate" && post) {
    const auto sketch = sketch_from(parse_body(r.body));
    return ok(sessions_.with(id, [&](editing::Session& s) { return ed.generate(s, sketch).to_json(); }));
  }
  if (action == "select" && post) {
    const auto body = parse_body(r.body);
    if (!body.contains("part_ids") || !body["part_ids"].is_array()) {
      throw ApiError(ErrorCode::bad_selection, "part_ids must be an array of integers");
    }
    std::vector<std::size_t> ids;
    for (const auto& v : body["part_ids"]) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ApiError(ErrorCode::bad_selection, "part_ids must be non-negative integers");
      }
      ids.push_back(v.get<std::size_t>());
    }
    return ok(sessions_.with(id, [&](editing::Session& s) {
      std::vector<std::size_t> faces;
      try {
        faces = ed.select_parts(s, ids);
      } catch (const ArgumentError& e) {
        throw ApiError(ErrorCode::bad_selection, e.what());
      }
      return json{{"selected", std::vector<std::size_t>(s.selected.begin(), s.selected.end())},
                  {"highlighted_faces", faces}};
    }));
  }
  if (action == "refine" && post) {
    parse_body(r.body);
    return ok(sessions_.with(id, [&](editing::Session& s) {
      if (s.selected.empty()) throw ApiError(ErrorCode::bad_selection, "refine needs a non-empty selection");
      return ed.refine_selected(s).to_json();
    }));
  }
  if (action == "blend" && post) {
    const auto body = parse_body(r.body);
    return ok(sessions_.with(id, [&](editing::Session& s) {
      if (s.selected.empty()) throw ApiError(ErrorCode::bad_selection, "blend needs a non-empty selection");
      return ed.blend(s, sketch_from(body)).to_json();
    }));
  }
  if (action == "outline" && r.method == "GET") {
    return ok(sessions_.with(id, [&](editing::Session& s) {
      render::Camera cam = s.camera;
      cam.azimuth = query_degrees(r, "azimuth", cam.azimuth);
      cam.elevation = query_degrees(r, "elevation", cam.elevation);
      if (std::abs(cam.elevation) >= 90.0 * render::kDegree) {
        throw ApiError(ErrorCode::bad_request, "elevation must lie strictly between -90 and 90 degrees");
      }
      const auto sketch = ed.outline_current(s, cam);
      return json{{"sketch_png_base64", render::base64_encode(render::encode_png(sketch))},
                  {"width", sketch.width},
                  {"height", sketch.height}};
    }));
  }
  if (action == "undo" && post) {
    return ok(sessions_.with(id, [&](editing::Session& s) { return ed.undo(s).to_json(); }));
  }
  throw ApiError(ErrorCode::bad_request, "unknown endpoint " + r.method + " " + r.path);
}

void ServiceConfig::apply_environment() {
  if (const char* v = std::getenv("SENS_BIND")) bind = v;
  if (const char* v = std::getenv("SENS_MODEL")) model = v;
  if (const char* v = std::getenv("SENS_REFINER")) refiner = v;
  try {
    if (const char* v = std::getenv("SENS_GRID_RES")) grid_res = std::stoul(v);
    if (const char* v = std::getenv("SENS_SEED")) seed = std::stoull(v);
  } catch (const std::logic_error&) {
    throw ConfigError("SENS_GRID_RES and SENS_SEED must be non-negative integers");
  }
}

std::pair<std::string, int> ServiceConfig::endpoint() const {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ConfigError("bind address must be host:port, got '" + bind + "'");
  int port = -1;
  const auto text = bind.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
  if (ec != std::errc() || ptr != text.data() + text.size() || port < 0 || port > 65535) {
    throw ConfigError("bad port in bind address '" + bind + "'");
  }
  return {bind.substr(0, colon), port};
}

std::shared_ptr<const editing::Editor> load_editor(const ServiceConfig& config) {
  if (config.model.empty()) throw ConfigError("a model checkpoint is required");
  const auto ckpt = nn::load_checkpoint(config.model);
  const auto model_cfg = model::model_config_from_json(ckpt.header.at("model_config"));
  auto net = std::make_shared<const model::SketchToParts>(model_cfg, ckpt.parameters);
  std::shared_ptr<const model::Refiner> refiner;
  if (!config.refiner.empty()) {
    const auto rc = nn::load_checkpoint(config.refiner);
    const auto ref_cfg = model::model_config_from_json(rc.header.at("model_config"));
    if (ref_cfg.m != model_cfg.m || ref_cfg.d_model != model_cfg.d_model) {
      throw ConfigError("refiner checkpoint disagrees with the model on m or d_model");
    }
    refiner = std::make_shared<const model::Refiner>(ref_cfg, rc.parameters);
  }
  editing::EditOptions opts;
  opts.grid_res = config.grid_res;
  return std::make_shared<const editing::Editor>(std::move(net), std::move(refiner), opts);
}

Server::Server(std::shared_ptr<const editing::Editor> editor, std::uint64_t seed)
    : api_(std::move(editor), seed), http_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const auto out = api_.handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  http_->Get(R"(/.*)", forward);
  http_->Post(R"(/.*)", forward);
  http_->Delete(R"(/.*)", forward);
  http_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content(ApiError(ErrorCode::internal, "unhandled failure").to_json().dump(), "application/json");
  });
}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
  if (running_) throw StateError("server already started");
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!http_->bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  running_ = true;
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  return bound;
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  http_->stop();
  if (thread_.joinable()) thread_.join();
}

void Server::wait_for_shutdown() {
  g_signal = 0;
  auto old_int = std::signal(SIGINT, on_signal);
  auto old_term = std::signal(SIGTERM, on_signal);
  while (running_ && g_signal == 0) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  stop();
}

void serve(const ServiceConfig& config) {
  const auto [host, port] = config.endpoint();
  Server server(load_editor(config), config.seed);
  const int bound = server.start(host, port);
  std::cerr << "listening on " << host << ':' << bound << std::endl;
  server.wait_for_shutdown();
  std::cerr << "shut down" << std::endl;
}

}  // namespace sketchpart::service
