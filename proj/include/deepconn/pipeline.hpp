#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace deepconn {

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();

struct StageSpec {
  std::string name;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
};

/// JSON document:
///   {"output": dir, "seed": n, "stages": [{"stage": name, ...params}, ...]}
/// Relative paths are resolved against `base_dir`. Throws ManifestError for
/// syntax errors, unknown stages or parameters, and repeated stages.
struct PipelineManifest {
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  std::vector<StageSpec> stages;
};

PipelineManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
PipelineManifest load_manifest(const std::filesystem::path& path);

struct PipelineOptions {
  std::optional<std::filesystem::path> output;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

struct StageRecord {
  std::string name;
  std::string input_hash;
  std::string output_hash;
  std::vector<std::filesystem::path> outputs;
};

struct PipelineResult {
  /// 0 success, 1 stage failure, 2 manifest error.
  int exit_code = 0;
  std::vector<StageRecord> stages;
  std::string failed_stage;
  std::string message;
};

/// Runs the stages in order. Each stage writes below <output>/<stage>/ and
/// logs its input and output hashes to stderr; <output>/hashes.txt lists
/// every output file with its SHA-256. Never throws for stage or manifest
/// errors; they are reported through the result.
PipelineResult run_pipeline(const PipelineManifest& manifest, const PipelineOptions& options = {});
PipelineResult run_pipeline(const std::filesystem::path& manifest_path, const PipelineOptions& options = {});

/// Runs one stage against an existing output directory.
StageRecord run_stage(const StageSpec& stage, const std::filesystem::path& output, std::uint64_t seed,
                      bool verbose = false);

/// "relative/path sha256" lines for every file below `dir`, sorted,
/// excluding hashes.txt itself.
std::string hash_listing(const std::filesystem::path& dir);

}  // namespace deepconn
