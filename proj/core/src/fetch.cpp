// SPDX-License-Identifier: Apache-2.0
#include <curl/curl.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mdps/checkpoint.hpp"
#include "mdps/perception.hpp"

namespace mdps {

namespace fs = std::filesystem;

namespace {

struct BackboneEntry {
  std::string name;
  std::string digest;  // pinned sha256; empty = trust-on-first-use
};

// The ResNet entries take their converted weight bundles from
// MDPS_WEIGHTS_URL_<NAME>; there is no canonical hosted bundle to pin.
const BackboneEntry kRegistry[] = {
    {"toy", ""},
    {"resnet-101", ""},
    {"wide-resnet-101", ""},
};

std::string env_or_empty(const char* key) {
  const char* v = std::getenv(key);
  return v ? std::string(v) : std::string();
}

std::string url_env_key(std::string name) {
  for (auto& c : name) {
    if (c == '-') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return "MDPS_WEIGHTS_URL_" + name;
}

std::size_t write_to_file(void* ptr, std::size_t size, std::size_t nmemb, void* stream) {
  auto* out = static_cast<std::ofstream*>(stream);
  out->write(static_cast<const char*>(ptr), static_cast<std::streamsize>(size * nmemb));
  return out->good() ? size * nmemb : 0;
}

void download(const std::string& url, const std::string& dest) {
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + dest);
  CURL* curl = curl_easy_init();
  if (!curl) throw std::runtime_error("curl init failed");
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_file);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &out);
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  out.close();
  if (rc != CURLE_OK) {
    std::error_code ec;
    fs::remove(dest, ec);
    throw std::runtime_error("download failed for " + url + ": " + curl_easy_strerror(rc));
  }
}

}  // namespace

std::string resolve_cache_dir(const std::string& cache_dir) {
  if (!cache_dir.empty()) return cache_dir;
  std::string env = env_or_empty("MDPS_CACHE_DIR");
  if (!env.empty()) return env;
  std::string home = env_or_empty("HOME");
  return (home.empty() ? std::string(".") : home) + "/.cache/mdps";
}

std::vector<std::string> known_backbones() {
  std::vector<std::string> out;
  for (const auto& e : kRegistry) out.push_back(e.name);
  return out;
}

std::unique_ptr<FeatureBackbone> fetch_pretrained(const std::string& backbone_name,
                                                  const std::string& cache_dir, bool offline) {
  const BackboneEntry* entry = nullptr;
  for (const auto& e : kRegistry) {
    if (e.name == backbone_name) entry = &e;
  }
  if (!entry) {
    std::string options;
    for (const auto& e : kRegistry) options += (options.empty() ? "" : ", ") + e.name;
    throw std::invalid_argument("unknown backbone '" + backbone_name + "' (options: " + options +
                                ")");
  }
  if (backbone_name == "toy") return make_toy_backbone();

  const fs::path dir = fs::path(resolve_cache_dir(cache_dir)) / backbone_name;

  // Warm-cache lookup: any <digest>.weights whose content matches its name.
  std::string pinned = entry->digest.empty() ? env_or_empty(("MDPS_WEIGHTS_SHA256_" +
                                                             backbone_name).c_str())
                                             : entry->digest;
  if (fs::exists(dir)) {
    for (const auto& de : fs::directory_iterator(dir)) {
      if (de.path().extension() != ".weights") continue;
      const std::string stem = de.path().stem().string();
      if (!pinned.empty() && stem != pinned) continue;
      const std::string actual = sha256_file(de.path().string());
      if (actual != stem) {
        throw std::runtime_error("digest mismatch for cached weights " + de.path().string() +
                                 ": content hash " + actual);
      }
      return load_resnet_backbone(backbone_name, de.path().string());
    }
  }
  if (offline) {
    throw std::runtime_error("offline mode and no cached weights for '" + backbone_name +
                             "' under " + dir.string());
  }

  const std::string url = env_or_empty(url_env_key(backbone_name).c_str());
  if (url.empty()) {
    throw std::runtime_error("no weights source for '" + backbone_name + "': set " +
                             url_env_key(backbone_name) +
                             " to a converted bundle (see tools/convert_backbone.py) or "
                             "pre-populate the cache");
  }
  fs::create_directories(dir);
  const std::string tmp = (dir / "download.tmp").string();
  download(url, tmp);
  const std::string digest = sha256_file(tmp);
  if (!pinned.empty() && digest != pinned) {
    fs::remove(tmp);
    throw std::runtime_error("digest mismatch for downloaded weights from " + url +
                             ": expected " + pinned + ", got " + digest);
  }
  const std::string final_path = (dir / (digest + ".weights")).string();
  fs::rename(tmp, final_path);
  return load_resnet_backbone(backbone_name, final_path);
}

}  // namespace mdps
