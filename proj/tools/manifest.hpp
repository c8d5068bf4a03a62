#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bimatch/report.hpp"

namespace bimatch::cli {

struct InputDigest {
  std::string role;  // e.g. "edges"
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string tool = "bimatch";
  std::string version = BIMATCH_VERSION;
  std::string command;
  json options = json::object();
  std::vector<InputDigest> inputs;
  std::uint64_t seed = 0;
};

std::string sha256_file(const std::filesystem::path& path);

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

/// Throws kIo when a recorded input changed since the manifest was written.
void verify_inputs(const RunManifest& m);

}  // namespace bimatch::cli
