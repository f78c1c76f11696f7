#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "deepconn/asset_service.hpp"
#include "deepconn/error.hpp"
#include "deepconn/pipeline.hpp"

namespace fs = std::filesystem;
using deepconn::ErrorCode;

namespace {

struct StageCommand {
  CLI::App* app = nullptr;
  std::vector<std::string> inputs;
  std::vector<std::string> settings;
};

// "key=value" where value is JSON, falling back to a plain string.
nlohmann::ordered_json parse_settings(const StageCommand& cmd, const std::string& stage) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& s : cmd.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw deepconn::Error(ErrorCode::ManifestError, "--set expects key=value, got " + s);
    }
    const std::string value = s.substr(eq + 1);
    auto parsed = nlohmann::ordered_json::parse(value, nullptr, false);
    params[s.substr(0, eq)] = parsed.is_discarded() ? nlohmann::ordered_json(value) : parsed;
  }
  if (!cmd.inputs.empty()) {
    if (stage == "ingest") {
      params["inputs"] = cmd.inputs;
    } else {
      params["input"] = cmd.inputs.front();
    }
  }
  return params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deepconn: MR body volume processing, rendering and fabrication pipeline"};
  app.require_subcommand(0, 1);

  std::string manifest;
  std::string output;
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_option("--manifest", manifest, "Run every stage of a pipeline manifest (JSON)");
  auto* output_opt = app.add_option("--output", output, "Output directory (overrides the manifest)");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed for phantom generation");
  app.add_flag("--verbose", verbose, "List every file a stage writes");

  auto* run = app.add_subcommand("run", "Run a pipeline manifest");
  run->add_option("manifest", manifest, "Manifest path")->required();

  const std::map<std::string, std::string> descriptions{
      {"phantom", "Generate the synthetic body, split DICOM blocks and cine series"},
      {"ingest", "Read DICOM block directories into MHD volumes"},
      {"stitch", "Detect overlaps and shifts between blocks and concatenate them"},
      {"cine", "Normalize per-location cine series to a common cycle"},
      {"clean", "Keep the largest connected body component"},
      {"convert", "Window the body volume and cine frames to 8 bits"},
      {"render", "Raycast PNG views of the converted volume"},
      {"contours", "Section the body mask into SVG layers for laser cutting"},
      {"publish", "Write the asset bundle served to the viewer"},
  };
  std::map<std::string, StageCommand> stages;
  for (const auto& name : deepconn::stage_names()) {
    StageCommand cmd;
    cmd.app = app.add_subcommand(name, descriptions.at(name));
    if (name == "ingest" || name == "stitch" || name == "cine" || name == "clean") {
      stages[name] = cmd;
      stages[name].app->add_option("--input", stages[name].inputs, "Input path(s)");
    } else {
      stages[name] = cmd;
    }
    stages[name].app->add_option("--set", stages[name].settings, "Stage parameter as key=json (repeatable)");
  }

  std::string serve_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve published assets over HTTP");
  serve->add_option("--assets", serve_dir, "Published asset directory (default <output>/publish)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (serve->parsed()) {
      const fs::path dir = !serve_dir.empty() ? fs::path(serve_dir) : fs::path(output.empty() ? "out" : output) / "publish";
      deepconn::AssetServer server(deepconn::load_assets(dir));
      fmt::print(stderr, "[deepconn] serving {} on http://{}:{}/assets/\n", dir.string(), host, port);
      server.run(host, port);
      return 0;
    }

    for (auto& [name, cmd] : stages) {
      if (!cmd.app->parsed()) continue;
      deepconn::StageSpec spec{name, parse_settings(cmd, name)};
      deepconn::PipelineManifest m;
      m.output = output.empty() ? "out" : output;
      m.seed = seed_opt->count() > 0 ? seed : 1;
      // Validate parameter names the same way a manifest would.
      nlohmann::ordered_json doc{{"stages", nlohmann::ordered_json::array()}};
      nlohmann::ordered_json stage_doc = spec.params;
      stage_doc["stage"] = name;
      doc["stages"].push_back(stage_doc);
      m.stages = deepconn::parse_manifest(doc.dump(), fs::path{}).stages;
      return deepconn::run_pipeline(m, {std::nullopt, std::nullopt, verbose}).exit_code;
    }

    if (manifest.empty()) {
      fmt::print(stderr, "{}", app.help());
      return 2;
    }
    deepconn::PipelineOptions options;
    if (output_opt->count() > 0) options.output = output;
    if (seed_opt->count() > 0) options.seed = seed;
    options.verbose = verbose;
    return deepconn::run_pipeline(fs::path(manifest), options).exit_code;
  } catch (const deepconn::Error& e) {
    fmt::print(stderr, "[deepconn] {}\n", e.what());
    return e.code() == ErrorCode::ManifestError ? 2 : 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "[deepconn] {}\n", e.what());
    return 1;
  }
}
