#include <string>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support.hpp"

#include "deepconn/asset_service.hpp"
#include "deepconn/error.hpp"
#include "deepconn/hashing.hpp"
#include "deepconn/metaimage.hpp"
#include "deepconn/phantom.hpp"

using namespace deepconn;
using json = nlohmann::json;

namespace {

struct Fixture {
  VoxelGrid volume;
  std::vector<VoxelGrid> frames;
  CineStack cine;
  SessionConfig config;
  std::vector<TransferFunction> tfs;
  AssetBundle bundle;

  Fixture()
      : volume([] {
          Lcg64 rng(21);
          return testing::random_grid(rng, {9, 8, 7}, Depth::U8, {0.5, 0.5, 1.0}, {1, 2, 3});
        }()),
        frames([] {
          Lcg64 rng(22);
          std::vector<VoxelGrid> f;
          for (int t = 0; t < 6; ++t) f.push_back(testing::random_grid(rng, {3, 3, 2}, Depth::U8, {0.5, 0.5, 1.0}));
          return f;
        }()),
        cine(frames, 0.8) {
    config.frames = 6;
    config.cycle_duration = 0.8;
    config.cine_offset = {2, 2, 1};
    for (const auto& name : tf_preset_names()) tfs.push_back(load_tf_preset(name));
    bundle = build_assets(volume, cine, tfs, config);
  }
};

std::string as_string(const std::vector<std::uint8_t>& bytes) { return {bytes.begin(), bytes.end()}; }

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("bundle contents") {
  Fixture f;
  const auto& files = f.bundle.files;
  for (const char* path : {"volume.mhd", "volume.raw", "session.json", "manifest.json", "tf/deep-connection.json",
                           "tf/bone.json", "tf/lung.json"}) {
    CHECK(files.count(path) == 1);
  }
  for (int t = 0; t < 6; ++t) CHECK(files.at("cine/" + std::to_string(t) + ".raw") == encode_raw(f.frames[t]));
  CHECK(files.count("cine/6.raw") == 0);

  const VoxelGrid decoded = decode_raw(parse_mhd_header(as_string(files.at("volume.mhd"))), files.at("volume.raw"));
  CHECK(decoded == f.volume);

  const json manifest = json::parse(as_string(files.at("manifest.json")));
  CHECK(manifest["cine"]["frames"] == 6);
  CHECK(manifest["volume"]["dims"] == json::array({9, 8, 7}));
  for (const auto& [path, bytes] : files) {
    if (path == "manifest.json") continue;
    CHECK(manifest["sha256"][path] == sha256_hex(bytes));
  }
  CHECK(manifest["sha256"].size() == files.size() - 1);

  const SessionConfig session = session_config_from_json(as_string(files.at("session.json")));
  CHECK(session.frames == 6);
  CHECK(session.cine_offset == Index3{2, 2, 1});

  SessionConfig mismatched = f.config;
  mismatched.frames = 5;
  CHECK_THROWS_AS(build_assets(f.volume, f.cine, f.tfs, mismatched), Error);
}

TEST_CASE("bundle write and load round trip") {
  Fixture f;
  testing::TempDir dir("assets");
  write_assets(f.bundle, dir.path());
  CHECK(load_assets(dir.path()).files == f.bundle.files);
  CHECK(read_mhd(dir.path() / "volume.mhd") == f.volume);
  std::filesystem::remove(dir.path() / "manifest.json");
  CHECK_THROWS_AS(load_assets(dir.path()), Error);
}

TEST_CASE("HTTP endpoints") {
  Fixture f;
  AssetServer server(f.bundle);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  SUBCASE("every published file is served byte-identically and immutably") {
    std::vector<std::string> paths{"volume.mhd", "volume.raw", "session.json", "manifest.json"};
    for (int t = 0; t < 6; ++t) paths.push_back("cine/" + std::to_string(t) + ".raw");
    for (const auto& tf : f.tfs) paths.push_back("tf/" + tf.name() + ".json");
    for (const auto& path : paths) {
      CAPTURE(path);
      const auto first = client.Get("/assets/" + path);
      const auto second = client.Get("/assets/" + path);
      REQUIRE(first);
      REQUIRE(second);
      CHECK(first->status == 200);
      CHECK(first->body == as_string(f.bundle.files.at(path)));
      CHECK(second->body == first->body);
      CHECK(first->get_header_value("Cache-Control").find("immutable") != std::string::npos);
      CHECK(first->get_header_value("ETag") == "\"" + sha256_hex(f.bundle.files.at(path)) + "\"");
    }
  }

  SUBCASE("conditional requests") {
    const auto first = client.Get("/assets/volume.raw");
    REQUIRE(first);
    const auto again = client.Get("/assets/volume.raw", {{"If-None-Match", first->get_header_value("ETag")}});
    REQUIRE(again);
    CHECK(again->status == 304);
    CHECK(again->body.empty());
  }

  SUBCASE("session.json parses as the configured session") {
    const auto res = client.Get("/assets/session.json");
    REQUIRE(res);
    CHECK(res->get_header_value("Content-Type") == "application/json");
    const SessionConfig s = session_config_from_json(res->body);
    CHECK(s.cycle_duration == 0.8);
    CHECK(s.transfer_function == "deep-connection");
  }

  SUBCASE("unknown paths are 404") {
    for (const char* path : {"/assets/cine/6.raw", "/assets/tf/nope.json", "/assets/", "/", "/volume.raw"}) {
      const auto res = client.Get(path);
      REQUIRE(res);
      CHECK(res->status == 404);
    }
  }

  server.stop();
}
