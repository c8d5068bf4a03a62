#include "manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "bimatch/error.hpp"

namespace bimatch::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open `" + path.string() + "` for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out.push_back(hex[md[k] >> 4]);
    out.push_back(hex[md[k] & 15]);
  }
  return out;
}

json to_json(const RunManifest& m) {
  json j;
  j["tool"] = m.tool;
  j["version"] = m.version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["options"] = m.options;
  json inputs = json::array();
  for (const auto& d : m.inputs) inputs.push_back({{"role", d.role}, {"path", d.path}, {"sha256", d.sha256}});
  j["inputs"] = inputs;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.tool = j.at("tool").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.options = j.at("options");
    for (const auto& d : j.at("inputs")) {
      m.inputs.push_back({d.at("role").get<std::string>(), d.at("path").get<std::string>(),
                          d.at("sha256").get<std::string>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed manifest: ") + e.what());
  }
}

void verify_inputs(const RunManifest& m) {
  for (const auto& d : m.inputs) {
    const std::string now = sha256_file(d.path);
    if (now != d.sha256) {
      throw Error(ErrorCode::kIo, "input `" + d.path + "` (" + d.role + ") changed since the manifest was written");
    }
  }
}

}  // namespace bimatch::cli
