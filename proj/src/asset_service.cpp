#include "deepconn/asset_service.hpp"

#include <thread>

#include <fmt/format.h>

#include "httplib.h"
#include "json.hpp"

#include "deepconn/error.hpp"
#include "deepconn/hashing.hpp"
#include "deepconn/metaimage.hpp"

namespace deepconn {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::uint8_t> bytes_of(const std::string& text) { return {text.begin(), text.end()}; }

json geometry_json(const VoxelGrid& g) {
  return {{"dims", {g.dims().nx, g.dims().ny, g.dims().nz}},
          {"spacing", {g.spacing().x, g.spacing().y, g.spacing().z}},
          {"origin", {g.origin().x, g.origin().y, g.origin().z}},
          {"element_type", g.depth() == Depth::U8 ? "MET_UCHAR" : "MET_USHORT"}};
}

std::string content_type(const std::string& path) {
  if (path.ends_with(".json")) return "application/json";
  if (path.ends_with(".mhd")) return "text/plain";
  return "application/octet-stream";
}

}  // namespace

AssetBundle build_assets(const VoxelGrid& volume, const CineStack& cine, const std::vector<TransferFunction>& tfs,
                         const SessionConfig& config) {
  config.validate();
  if (cine.frame_count() != config.frames) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("session expects {} frames, cine has {}", config.frames, cine.frame_count()));
  }
  AssetBundle bundle;
  auto& files = bundle.files;
  files["volume.mhd"] = bytes_of(format_mhd_header(volume, "volume.raw"));
  files["volume.raw"] = encode_raw(volume);
  for (std::size_t t = 0; t < cine.frame_count(); ++t) files[fmt::format("cine/{}.raw", t)] = encode_raw(cine.frames()[t]);
  json tf_names = json::array();
  for (const auto& tf : tfs) {
    files["tf/" + tf.name() + ".json"] = bytes_of(tf_to_json(tf));
    tf_names.push_back(tf.name());
  }
  files["session.json"] = bytes_of(session_config_to_json(config));

  json manifest;
  manifest["volume"] = geometry_json(volume);
  manifest["volume"]["header"] = "volume.mhd";
  manifest["volume"]["data"] = "volume.raw";
  manifest["cine"] = geometry_json(cine.frames().front());
  manifest["cine"]["frames"] = cine.frame_count();
  manifest["cine"]["cycle_duration"] = cine.cycle_duration();
  manifest["cine"]["offset"] = {config.cine_offset.x, config.cine_offset.y, config.cine_offset.z};
  manifest["cine"]["pattern"] = "cine/{t}.raw";
  manifest["transfer_functions"] = tf_names;
  manifest["session"] = "session.json";
  json hashes = json::object();
  for (const auto& [path, data] : files) hashes[path] = sha256_hex(data);
  manifest["sha256"] = hashes;
  files["manifest.json"] = bytes_of(manifest.dump(2) + "\n");
  return bundle;
}

void write_assets(const AssetBundle& bundle, const std::filesystem::path& dir) {
  for (const auto& [path, data] : bundle.files) write_file_bytes(dir / path, data);
}

AssetBundle load_assets(const std::filesystem::path& dir) {
  if (!std::filesystem::is_regular_file(dir / "manifest.json")) {
    throw Error(ErrorCode::IoFailure, fmt::format("no manifest.json in {}", dir.string()));
  }
  AssetBundle bundle;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    bundle.files[std::filesystem::relative(entry.path(), dir).generic_string()] = read_file_bytes(entry.path());
  }
  return bundle;
}

struct AssetServer::Impl {
  AssetBundle bundle;
  std::map<std::string, std::string> etags;
  httplib::Server server;
  std::thread worker;
};

AssetServer::AssetServer(AssetBundle bundle) : impl_(std::make_unique<Impl>()) {
  impl_->bundle = std::move(bundle);
  for (const auto& [path, data] : impl_->bundle.files) impl_->etags[path] = "\"" + sha256_hex(data) + "\"";
  const Impl* self = impl_.get();
  impl_->server.Get(R"(/assets/(.+))", [self](const httplib::Request& req, httplib::Response& res) {
    const std::string path = req.matches[1];
    const auto it = self->bundle.files.find(path);
    if (it == self->bundle.files.end()) {
      res.status = 404;
      res.set_content("not found\n", "text/plain");
      return;
    }
    const std::string& etag = self->etags.at(path);
    res.set_header("Cache-Control", "public, max-age=31536000, immutable");
    res.set_header("ETag", etag);
    if (req.get_header_value("If-None-Match") == etag) {
      res.status = 304;
      return;
    }
    res.set_content(reinterpret_cast<const char*>(it->second.data()), it->second.size(), content_type(path));
  });
}

AssetServer::~AssetServer() { stop(); }

int AssetServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::IoFailure, fmt::format("cannot bind {}:{}", host, port));
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AssetServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorCode::IoFailure, fmt::format("cannot serve on {}:{}", host, port));
}

void AssetServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace deepconn
