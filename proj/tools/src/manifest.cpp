#include "manifest.hpp"

#include "provar/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>

namespace provar::cli {

InputDigest digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  std::uintmax_t total = 0;
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
      total += static_cast<std::uintmax_t>(got);
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);

  std::string hex;
  char pair[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(pair, sizeof pair, "%02x", md[i]);
    hex += pair;
  }
  return {std::filesystem::absolute(path).string(), hex, total};
}

std::vector<std::string> RunManifest::replay_argv() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--seed") {
      ++i;
      continue;
    }
    if (argv[i].rfind("--seed=", 0) == 0) continue;
    out.push_back(argv[i]);
  }
  out.push_back("--seed");
  out.push_back(std::to_string(master_seed));
  return out;
}

nlohmann::json RunManifest::to_json() const {
  auto inputs_json = nlohmann::json::array();
  for (const auto& d : inputs) inputs_json.push_back({{"path", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}});
  return {{"command", command},
          {"argv", argv},
          {"replay_argv", replay_argv()},
          {"config", config},
          {"inputs", inputs_json},
          {"master_seed", master_seed},
          {"seed_generated", seed_generated},
          {"tool_version", tool_version},
          {"timestamp", timestamp}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace provar::cli
