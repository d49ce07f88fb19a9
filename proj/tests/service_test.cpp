#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "sketchpart/data/dataset.hpp"
#include "sketchpart/errors.hpp"
#include "sketchpart/nn/checkpoint.hpp"
#include "sketchpart/service/server.hpp"
#include "test_support.hpp"

// After Eigen: resolv.h defines _res.
#include "httplib.h"

using namespace sketchpart;
using namespace sketchpart::service;
using nlohmann::json;

namespace {

std::shared_ptr<const editing::Editor> make_editor(bool with_refiner = true) {
  editing::EditOptions opts;
  opts.grid_res = 16;
  auto net = std::make_shared<model::SketchToParts>(model::ModelConfig::desk(), 21);
  std::shared_ptr<const model::Refiner> ref;
  if (with_refiner) ref = std::make_shared<model::Refiner>(model::ModelConfig::desk(), 22);
  return std::make_shared<editing::Editor>(net, ref, opts);
}

std::string chair_png_base64(std::uint64_t seed = 0) {
  const auto sketch =
      render::render_outline(data::generate_shape(seed, data::ShapeClass::chair).parts, render::Camera{});
  return render::base64_encode(render::encode_png(render::quantize8(sketch)));
}

Request req(std::string method, std::string path, json body = nullptr) {
  Request r;
  r.method = std::move(method);
  r.path = std::move(path);
  if (!body.is_null()) r.body = body.dump();
  return r;
}

class ApiTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { editor_ = make_editor(); }
  static void TearDownTestSuite() { editor_.reset(); }

  Api api{editor_, 3};

  std::string new_session() {
    const auto r = api.handle(req("POST", "/api/sessions"));
    EXPECT_EQ(r.status, 201);
    return r.body.at("session_id").get<std::string>();
  }

  static std::shared_ptr<const editing::Editor> editor_;
};

std::shared_ptr<const editing::Editor> ApiTest::editor_;

}  // namespace

TEST(ErrorCodes, StatusMapping) {
  EXPECT_EQ(http_status(ErrorCode::empty_sketch), 422);
  EXPECT_EQ(http_status(ErrorCode::empty_shape), 422);
  EXPECT_EQ(http_status(ErrorCode::bad_selection), 400);
  EXPECT_EQ(http_status(ErrorCode::no_session), 404);
  EXPECT_EQ(http_status(ErrorCode::bad_request), 400);
  EXPECT_EQ(http_status(ErrorCode::internal), 500);
  EXPECT_EQ(to_string(ErrorCode::empty_sketch), "empty_sketch");
  const ApiError e(ErrorCode::no_session, "gone");
  EXPECT_EQ(e.to_json(), (json{{"code", "no_session"}, {"message", "gone"}}));
}

TEST(ErrorCodes, Classification) {
  EXPECT_EQ(classify(EmptySketchError("x")).code(), ErrorCode::empty_sketch);
  EXPECT_EQ(classify(EmptyShapeError("x")).code(), ErrorCode::empty_shape);
  EXPECT_EQ(classify(editing::SessionNotFound("x")).code(), ErrorCode::no_session);
  EXPECT_EQ(classify(ParseError("x")).code(), ErrorCode::bad_request);
  EXPECT_EQ(classify(std::runtime_error("x")).code(), ErrorCode::internal);
}

TEST_F(ApiTest, Health) {
  const auto r = api.handle(req("GET", "/api/health"));
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "ok");
  EXPECT_EQ(r.body["refiner"], "loaded");
}

TEST_F(ApiTest, FullWorkflow) {
  const auto id = new_session();
  const auto base = "/api/sessions/" + id;
  auto r = api.handle(req("POST", base + "/generate", {{"sketch_png_base64", chair_png_base64()}}));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  for (const char* key : {"mesh", "presence", "completion", "empty_shape"}) EXPECT_TRUE(r.body.contains(key));
  EXPECT_EQ(r.body["completion"].size(), 8u);

  r = api.handle(req("POST", base + "/select", {{"part_ids", {1, 3}}}));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["selected"], json({1, 3}));
  EXPECT_TRUE(r.body["highlighted_faces"].is_array());

  r = api.handle(req("POST", base + "/refine", json::object()));
  EXPECT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["presence"][1], 1.0);

  r = api.handle(req("POST", base + "/blend", {{"sketch_png_base64", chair_png_base64(4)}}));
  EXPECT_EQ(r.status, 200) << r.body.dump();

  r = api.handle(req("POST", base + "/undo", json::object()));
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["presence"][1], 1.0);

  r = api.handle(req("DELETE", base));
  EXPECT_EQ(r.status, 200);
  r = api.handle(req("POST", base + "/undo", json::object()));
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body["code"], "no_session");
}

TEST_F(ApiTest, OutlineInDegrees) {
  const auto id = new_session();
  const auto base = "/api/sessions/" + id;
  auto r = api.handle(req("GET", base + "/outline"));
  EXPECT_EQ(r.status, 422) << r.body.dump();
  EXPECT_EQ(r.body["code"], "empty_shape");

  auto& store = api.sessions();
  store.with(id, [](editing::Session& s) { s.current = data::generate_shape(2, data::ShapeClass::chair).part_set(8, 32); });
  Request q = req("GET", base + "/outline");
  q.query = {{"azimuth", "90"}, {"elevation", "10"}};
  r = api.handle(q);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["width"], 256);
  const auto png = render::base64_decode(r.body["sketch_png_base64"].get<std::string>());
  const auto img = render::decode_png(png);
  render::Camera cam;
  cam.azimuth = 90.0 * render::kDegree;
  cam.elevation = 10.0 * render::kDegree;
  const auto expected = api.editor().outline_current(*store.get(id), cam);
  EXPECT_LE(render::max_abs_diff(img, render::quantize8(expected)), 1e-12);

  q.query = {{"azimuth", "abc"}};
  EXPECT_EQ(api.handle(q).status, 400);
  q.query = {{"elevation", "95"}};
  EXPECT_EQ(api.handle(q).status, 400);
}

TEST_F(ApiTest, ErrorResponses) {
  const auto id = new_session();
  const auto base = "/api/sessions/" + id;
  const std::string blank = render::base64_encode(render::encode_png(render::Image(256, 256, 1.0)));
  auto r = api.handle(req("POST", base + "/generate", {{"sketch_png_base64", blank}}));
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["code"], "empty_sketch");

  Request bad = req("POST", base + "/generate");
  bad.body = "{not json";
  r = api.handle(bad);
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "bad_request");

  r = api.handle(req("POST", base + "/generate", {{"sketch_png_base64", "@@@"}}));
  EXPECT_EQ(r.status, 400);
  r = api.handle(req("POST", base + "/generate", json::object()));
  EXPECT_EQ(r.status, 400);

  r = api.handle(req("POST", base + "/select", {{"part_ids", {99}}}));
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "bad_selection");
  r = api.handle(req("POST", base + "/select", {{"part_ids", "all"}}));
  EXPECT_EQ(r.body["code"], "bad_selection");
  r = api.handle(req("POST", base + "/refine", json::object()));
  EXPECT_EQ(r.body["code"], "bad_selection");

  r = api.handle(req("POST", base + "/undo", json::object()));
  EXPECT_EQ(r.status, 400);
  r = api.handle(req("GET", "/api/nothing"));
  EXPECT_EQ(r.status, 400);
  r = api.handle(req("DELETE", "/api/sessions/unknown"));
  EXPECT_EQ(r.status, 404);
  for (const auto& body : {r.body}) {
    EXPECT_TRUE(body.contains("code"));
    EXPECT_TRUE(body.contains("message"));
  }
}

TEST(ServiceConfigTest, EnvironmentAndEndpoint) {
  ServiceConfig cfg;
  EXPECT_EQ(cfg.endpoint(), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  ::setenv("SENS_BIND", "0.0.0.0:9001", 1);
  ::setenv("SENS_GRID_RES", "32", 1);
  cfg.apply_environment();
  ::unsetenv("SENS_BIND");
  ::unsetenv("SENS_GRID_RES");
  EXPECT_EQ(cfg.endpoint(), (std::pair<std::string, int>{"0.0.0.0", 9001}));
  EXPECT_EQ(cfg.grid_res, 32u);
  cfg.bind = "localhost";
  EXPECT_THROW(cfg.endpoint(), ConfigError);
  cfg.bind = "localhost:70000";
  EXPECT_THROW(cfg.endpoint(), ConfigError);
  ::setenv("SENS_SEED", "minus", 1);
  EXPECT_THROW(cfg.apply_environment(), ConfigError);
  ::unsetenv("SENS_SEED");
}

TEST(ServiceConfigTest, LoadEditorFromCheckpoints) {
  const auto dir = testing_support::scratch_dir("service_ckpt");
  const auto cfg = model::ModelConfig::desk();
  model::SketchToParts net(cfg, 1);
  model::Refiner ref(cfg, 2);
  nn::save_checkpoint(dir / "model.ckpt", model::to_json(cfg), net.parameters());
  nn::save_checkpoint(dir / "refiner.ckpt", model::to_json(cfg), ref.parameters());
  ServiceConfig sc;
  sc.model = dir / "model.ckpt";
  sc.refiner = dir / "refiner.ckpt";
  sc.grid_res = 20;
  const auto editor = load_editor(sc);
  EXPECT_TRUE(editor->has_refiner());
  EXPECT_EQ(editor->options().grid_res, 20u);
  auto other = cfg;
  other.m = 6;
  model::Refiner small(other, 3);
  nn::save_checkpoint(dir / "bad.ckpt", model::to_json(other), small.parameters());
  sc.refiner = dir / "bad.ckpt";
  EXPECT_THROW(load_editor(sc), ConfigError);
  sc.model.clear();
  EXPECT_THROW(load_editor(sc), ConfigError);
}

TEST(LiveServer, HttpRoundTripAndConcurrentSessions) {
  Server server(make_editor(), 9);
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  auto health = client.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");

  auto bad = client.Post("/api/sessions/none/undo", "{}", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 404);

  const std::string png = chair_png_base64(1);
  std::vector<std::thread> threads;
  std::vector<int> statuses(4, 0);
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(60, 0);
      auto created = c.Post("/api/sessions", "", "application/json");
      if (!created || created->status != 201) return;
      const auto id = json::parse(created->body)["session_id"].get<std::string>();
      auto gen = c.Post("/api/sessions/" + id + "/generate", json{{"sketch_png_base64", png}}.dump(), "application/json");
      auto sel = c.Post("/api/sessions/" + id + "/select", json{{"part_ids", {0}}}.dump(), "application/json");
      auto undo = c.Post("/api/sessions/" + id + "/undo", "{}", "application/json");
      if (gen && sel && undo) statuses[t] = gen->status + sel->status + undo->status;
    });
  }
  for (auto& th : threads) th.join();
  for (int s : statuses) EXPECT_EQ(s, 600);
  EXPECT_EQ(server.api().sessions().size(), 4u);

  auto malformed = client.Post("/api/sessions", "", "application/json");
  ASSERT_TRUE(malformed);
  const auto id = json::parse(malformed->body)["session_id"].get<std::string>();
  auto r = client.Post("/api/sessions/" + id + "/generate", "not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["code"], "bad_request");
  auto del = client.Delete("/api/sessions/" + id);
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 200);
  server.stop();
  EXPECT_FALSE(httplib::Client("127.0.0.1", port).Get("/api/health"));
}
