#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <string>
#include <vector>

#include <unistd.h>

#include "deepconn/phantom.hpp"
#include "deepconn/volume.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("deepconn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline deepconn::VoxelGrid random_grid(deepconn::Lcg64& rng, deepconn::Dims dims, deepconn::Depth depth,
                                       deepconn::Vec3 spacing = {1.0, 1.0, 1.0}, deepconn::Vec3 origin = {}) {
  std::vector<std::uint16_t> v(dims.count());
  const std::uint64_t range = deepconn::max_value(depth) + 1ULL;
  for (auto& x : v) x = static_cast<std::uint16_t>((rng.next() >> 32) % range);
  return {dims, spacing, origin, depth, std::move(v)};
}

// Component labels by breadth-first flood fill over 6-neighbours; 0 = off.
inline std::vector<int> flood_labels(const deepconn::Dims& d, const std::vector<std::uint8_t>& on) {
  std::vector<int> label(on.size(), 0);
  int next = 0;
  for (std::size_t seed = 0; seed < on.size(); ++seed) {
    if (!on[seed] || label[seed] != 0) continue;
    label[seed] = ++next;
    std::queue<std::size_t> q;
    q.push(seed);
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      const std::size_t x = i % d.nx, y = (i / d.nx) % d.ny, z = i / (d.nx * d.ny);
      const std::size_t nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                    {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
      for (const auto& n : nb) {
        if (n[0] >= d.nx || n[1] >= d.ny || n[2] >= d.nz) continue;  // wraps for -1
        const std::size_t j = n[0] + d.nx * (n[1] + d.ny * n[2]);
        if (on[j] && label[j] == 0) {
          label[j] = next;
          q.push(j);
        }
      }
    }
  }
  return label;
}

inline int flood_count(const deepconn::Dims& d, const std::vector<std::uint8_t>& on) {
  int m = 0;
  for (int l : flood_labels(d, on)) m = std::max(m, l);
  return m;
}

}  // namespace testing
