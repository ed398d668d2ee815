#include <filesystem>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "rwfast/phantom.hpp"
#include "rwfast/service.hpp"

#include "httplib.h"

using namespace rwfast;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;
  fs::path image;
  fs::path pack50;
  fs::path pack100;
  Phantom ph;

  Fixture() {
    dir = fs::temp_directory_path() / "rwfast_service_test";
    fs::create_directories(dir);
    PhantomSpec s;
    s.dims = Dims{{20, 16}};
    s.regions = 2;
    s.seed = 5;
    ph = make_phantom(s);
    image = dir / "img.json";
    save_rawj_image(ph.image, image);
    const Image loaded = load_image(image);
    pack50 = dir / "b50.rwpk";
    pack100 = dir / "b100.rwpk";
    save_pack(precompute(loaded, 50.0, 40), pack50);
    save_pack(precompute(loaded, 100.0, 40), pack100);
  }

  std::string create_body() const {
    return json{{"image", image.string()}, {"packs", {pack50.string(), pack100.string()}}}.dump();
  }

  json seeds_body() const {
    json seeds = json::array();
    for (const auto& [x, l] : sample_seeds(ph.truth, 2, 3, 1)) seeds.push_back({{"index", x}, {"label", l}});
    return json{{"seeds", seeds}};
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::string create(SessionStore& store) {
  const auto r = store.handle("POST", "/sessions", {}, fixture().create_body());
  REQUIRE(r.status == 201);
  return json::parse(r.body)["id"].get<std::string>();
}

Index decoded_length(const json& runs) {
  Index total = 0;
  for (const auto& r : runs) total += r[1].get<Index>();
  return total;
}

}  // namespace

TEST_CASE("session create, describe and delete") {
  SessionStore store;
  const auto r = store.handle("POST", "/sessions", {}, fixture().create_body());
  CHECK(r.status == 201);
  const json j = json::parse(r.body);
  CHECK(j["dims"] == json({20, 16}));
  CHECK(j["labels"] == 2);
  CHECK(j["beta"] == 50.0);
  const std::string id = j["id"];
  CHECK(store.session_count() == 1);
  CHECK(json::parse(store.handle("GET", "/sessions/" + id, {}, "").body)["base_beta"] == 50.0);
  CHECK(store.handle("DELETE", "/sessions/" + id, {}, "").status == 200);
  CHECK(store.handle("GET", "/sessions/" + id, {}, "").status == 404);
  CHECK(store.session_count() == 0);
}

TEST_CASE("sessions share cached packs") {
  SessionStore store;
  create(store);
  create(store);
  CHECK(store.session_count() == 2);
  CHECK(store.cache().size() == 2);
}

TEST_CASE("seeds solve returns labels and uncertainty") {
  SessionStore store;
  const std::string id = create(store);
  const auto r = store.handle("POST", "/sessions/" + id + "/seeds", {}, fixture().seeds_body().dump());
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  CHECK(j["labels"]["encoding"] == "rle");
  CHECK(decoded_length(j["labels"]["runs"]) == 320);
  CHECK(j["uncertainty"]["encoding"] == "base64-u8");
  CHECK(j["uncertainty"]["data"].get<std::string>().size() == 4 * ((320 + 2) / 3));
  CHECK(j["m_use"].get<int>() >= 2);
  CHECK(j["online_ms"].get<double>() > 0.0);
  CHECK(j["refreshed"] == false);
}

TEST_CASE("repeated seeds are idempotent") {
  SessionStore store;
  const std::string id = create(store);
  const std::string body = fixture().seeds_body().dump();
  const json a = json::parse(store.handle("POST", "/sessions/" + id + "/seeds", {}, body).body);
  const json b = json::parse(store.handle("POST", "/sessions/" + id + "/seeds", {}, body).body);
  CHECK(a["labels"] == b["labels"]);
  CHECK(a["uncertainty"] == b["uncertainty"]);
}

TEST_CASE("beta change refreshes from the nearest pack") {
  SessionStore store;
  const std::string id = create(store);
  const auto p = store.handle("PUT", "/sessions/" + id + "/params", {}, R"({"beta": 80, "gamma": 0.01})");
  REQUIRE(p.status == 200);
  CHECK(json::parse(p.body)["refreshed"] == true);
  CHECK(json::parse(p.body)["base_beta"] == 100.0);
  const json j = json::parse(store.handle("POST", "/sessions/" + id + "/seeds", {}, fixture().seeds_body().dump()).body);
  CHECK(j["refreshed"] == true);
  CHECK(j["base_beta"] == 100.0);
  CHECK(j["beta"] == 80.0);
  const auto back = store.handle("PUT", "/sessions/" + id + "/params", {}, R"({"beta": 50})");
  CHECK(json::parse(back.body)["refreshed"] == false);
}

TEST_CASE("solve in flight gives 409") {
  SessionStore store;
  const std::string id = create(store);
  {
    auto guard = store.try_begin_solve(id);
    REQUIRE(guard.acquired());
    CHECK_FALSE(store.try_begin_solve(id).acquired());
    CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, fixture().seeds_body().dump()).status == 409);
    CHECK(store.handle("PUT", "/sessions/" + id + "/params", {}, R"({"gamma": 0.1})").status == 409);
  }
  CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, fixture().seeds_body().dump()).status == 200);
  CHECK_FALSE(store.try_begin_solve("nope").acquired());
}

TEST_CASE("error statuses") {
  SessionStore store;
  const std::string id = create(store);
  CHECK(store.handle("GET", "/sessions/zzz/slice", {}, "").status == 404);
  CHECK(store.handle("GET", "/other", {}, "").status == 404);
  CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, R"({"seeds": [[0, 7]]})").status == 422);
  CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, R"({"seeds": [[100000, 0]]})").status == 422);
  CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, R"({"seeds": []})").status == 422);
  CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, R"({"nope": 1})").status == 422);
  CHECK(store.handle("POST", "/sessions/" + id + "/seeds", {}, "{").status == 400);
  CHECK(store.handle("PUT", "/sessions/" + id + "/params", {}, R"({"gamma": -1})").status == 422);
  CHECK(store.handle("PATCH", "/sessions/" + id, {}, "").status == 405);
  CHECK(store.handle("POST", "/sessions", {}, R"({"image": "/nonexistent.pgm", "packs": []})").status == 422);
  const json other{{"image", fixture().image.string()}, {"packs", {"/nonexistent.rwpk"}}};
  CHECK(store.handle("POST", "/sessions", {}, other.dump()).status == 422);
}

TEST_CASE("mismatched pack is rejected") {
  const fs::path wrong = fixture().dir / "wrong.rwpk";
  PhantomSpec s;
  s.dims = Dims{{20, 16}};
  s.seed = 99;
  save_pack(precompute(make_phantom(s).image, 50.0, 8), wrong);
  SessionStore store;
  const json body{{"image", fixture().image.string()}, {"packs", {wrong.string()}}};
  const auto r = store.handle("POST", "/sessions", {}, body.dump());
  CHECK(r.status == 422);
  CHECK(r.body.find("different image") != std::string::npos);
}

TEST_CASE("slice is a grayscale png") {
  SessionStore store;
  const std::string id = create(store);
  const auto r = store.handle("GET", "/sessions/" + id + "/slice", {}, "");
  REQUIRE(r.status == 200);
  CHECK(r.content_type == "image/png");
  CHECK(r.body.substr(1, 3) == "PNG");
  CHECK(store.handle("GET", "/sessions/" + id + "/slice", {{"axis", "0"}}, "").status == 422);
}

TEST_CASE("http front end serves the session api") {
  SessionStore store;
  HttpService service(store);
  const int port = service.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread worker([&] { service.serve(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto created = client.Post("/sessions", fixture().create_body(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["id"];
  auto solved = client.Post("/sessions/" + id + "/seeds", fixture().seeds_body().dump(), "application/json");
  REQUIRE(solved);
  CHECK(solved->status == 200);
  CHECK(json::parse(solved->body).contains("online_ms"));
  auto slice = client.Get("/sessions/" + id + "/slice?axis=2&index=0");
  REQUIRE(slice);
  CHECK(slice->get_header_value("Content-Type") == "image/png");
  auto missing = client.Delete("/sessions/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(client.Delete("/sessions/" + id)->status == 200);

  service.stop();
  worker.join();
}
