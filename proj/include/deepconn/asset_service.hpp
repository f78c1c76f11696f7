#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "deepconn/session.hpp"
#include "deepconn/transfer_function.hpp"
#include "deepconn/volume.hpp"

namespace deepconn {

/// Published files keyed by their path below /assets/ (e.g. "cine/3.raw").
struct AssetBundle {
  std::map<std::string, std::vector<std::uint8_t>> files;
};

/// volume.mhd/.raw, cine/{t}.raw, tf/{name}.json, session.json and a
/// manifest.json describing geometry and the SHA-256 of every other file.
AssetBundle build_assets(const VoxelGrid& volume, const CineStack& cine, const std::vector<TransferFunction>& tfs,
                         const SessionConfig& config);

void write_assets(const AssetBundle& bundle, const std::filesystem::path& dir);
/// Reads every regular file below `dir`. Throws IoFailure if manifest.json
/// is missing.
AssetBundle load_assets(const std::filesystem::path& dir);

/// Read-only HTTP server for an asset bundle. Content is fixed at
/// construction; GET /assets/<path> returns it, anything else 404.
class AssetServer {
 public:
  explicit AssetServer(AssetBundle bundle);
  ~AssetServer();
  AssetServer(const AssetServer&) = delete;
  AssetServer& operator=(const AssetServer&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace deepconn
