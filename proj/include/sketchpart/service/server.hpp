#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

#include "json.hpp"
#include "sketchpart/editing/session.hpp"

namespace httplib {
class Server;
}

namespace sketchpart::service {

enum class ErrorCode { empty_sketch, empty_shape, bad_selection, no_session, bad_request, internal };

std::string_view to_string(ErrorCode code);
/// 422, 422, 400, 404, 400, 500.
int http_status(ErrorCode code);

class ApiError : public std::runtime_error {
 public:
  ApiError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }
  int status() const { return http_status(code_); }
  /// {"code", "message"}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
};

/// Maps the library's exception types onto API errors.
ApiError classify(const std::exception& e);

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent routing of the JSON API.
class Api {
 public:
  Api(std::shared_ptr<const editing::Editor> editor, std::uint64_t seed = 0);

  /// Never throws; failures become ApiError bodies.
  Response handle(const Request& request);

  editing::SessionStore& sessions() { return sessions_; }
  const editing::Editor& editor() const { return *editor_; }

 private:
  Response route(const Request& request);

  std::shared_ptr<const editing::Editor> editor_;
  editing::SessionStore sessions_;
};

struct ServiceConfig {
  std::string bind = "127.0.0.1:8080";  // host:port; port 0 picks a free one
  std::filesystem::path model;
  std::filesystem::path refiner;
  std::size_t grid_res = 48;
  std::uint64_t seed = 0;

  /// Applies SENS_BIND, SENS_MODEL, SENS_REFINER, SENS_GRID_RES and
  /// SENS_SEED when set.
  void apply_environment();
  /// Splits bind into host and port; ConfigError when malformed.
  std::pair<std::string, int> endpoint() const;
};

/// Loads both checkpoints; ConfigError when they disagree with each other.
std::shared_ptr<const editing::Editor> load_editor(const ServiceConfig& config);

/// HTTP front end around an Api.
class Server {
 public:
  Server(std::shared_ptr<const editing::Editor> editor, std::uint64_t seed = 0);
  ~Server();

  /// Binds and starts serving on a background thread. Returns the bound
  /// port; throws std::runtime_error when the address cannot be bound.
  int start(const std::string& host, int port);
  void stop();
  /// Blocks until stop() is called or SIGINT / SIGTERM arrives.
  void wait_for_shutdown();

  Api& api() { return api_; }

 private:
  Api api_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  std::atomic<bool> running_{false};
};

/// serve(bind, model, refiner): loads, binds, blocks until a signal.
void serve(const ServiceConfig& config);

}  // namespace sketchpart::service
