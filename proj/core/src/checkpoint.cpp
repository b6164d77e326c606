// SPDX-License-Identifier: Apache-2.0
#include "mdps/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mdps {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'M', 'D', 'P', 'S', 'B', 'I', 'N', '1'};

json arch_to_json(const ArchDescriptor& a) {
  return {{"backend", a.backend},
          {"in_channels", a.in_channels},
          {"base_channels", a.base_channels},
          {"time_embed_dim", a.time_embed_dim},
          {"attention", a.attention}};
}

ArchDescriptor arch_from_json(const json& j) {
  ArchDescriptor a;
  a.backend = j.at("backend").get<std::string>();
  a.in_channels = j.at("in_channels").get<int>();
  a.base_channels = j.at("base_channels").get<int>();
  a.time_embed_dim = j.at("time_embed_dim").get<int>();
  a.attention = j.at("attention").get<bool>();
  return a;
}

struct RawContainer {
  json header;
  std::vector<float> payload;
};

void write_container(const std::string& path, const json& header,
                     const std::vector<const nn::Tensor*>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::string head = header.dump();
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t head_len = head.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto* t : tensors) {
    out.write(reinterpret_cast<const char*>(t->v.data()),
              static_cast<std::streamsize>(t->v.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

RawContainer read_container(const std::string& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t head_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not an MDPSBIN1 container: " + path);
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported container version " + std::to_string(version) +
                             " in " + path + " (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  }
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw std::runtime_error("truncated header: " + path);

  RawContainer rc;
  rc.header = json::parse(head);
  if (rc.header.at("kind").get<std::string>() != expected_kind) {
    throw std::runtime_error("container kind mismatch in " + path + ": expected " +
                             expected_kind + ", found " +
                             rc.header.at("kind").get<std::string>());
  }
  std::uint64_t total = rc.header.at("payload_count").get<std::uint64_t>();
  rc.payload.resize(total);
  in.read(reinterpret_cast<char*>(rc.payload.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  if (!in) throw std::runtime_error("truncated payload: " + path);
  return rc;
}

json tensor_index(const std::vector<const nn::Tensor*>& tensors,
                  const std::vector<std::string>& names, std::uint64_t* total) {
  json idx = json::array();
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    idx.push_back({{"name", names[i]}, {"shape", tensors[i]->shape}, {"offset", offset}});
    offset += tensors[i]->v.size();
  }
  *total = offset;
  return idx;
}

std::vector<NamedTensor> unpack_tensors(const RawContainer& rc) {
  std::vector<NamedTensor> out;
  for (const auto& e : rc.header.at("tensors")) {
    NamedTensor nt;
    nt.name = e.at("name").get<std::string>();
    nt.tensor.shape = e.at("shape").get<std::vector<int>>();
    std::uint64_t count = 1;
    for (int d : nt.tensor.shape) count *= static_cast<std::uint64_t>(d);
    const std::uint64_t off = e.at("offset").get<std::uint64_t>();
    if (off + count > rc.payload.size()) {
      throw std::runtime_error("tensor '" + nt.name + "' overruns payload");
    }
    nt.tensor.v.assign(rc.payload.begin() + static_cast<std::ptrdiff_t>(off),
                       rc.payload.begin() + static_cast<std::ptrdiff_t>(off + count));
    out.push_back(std::move(nt));
  }
  return out;
}

}  // namespace

void save_denoiser_checkpoint(const std::string& path, TrainableDenoiser& model,
                              const CheckpointInfo& info) {
  auto params = model.parameters();
  std::vector<const nn::Tensor*> tensors;
  std::vector<std::string> names;
  for (const auto& p : params) {
    tensors.push_back(p.value);
    names.push_back(p.name);
  }
  std::uint64_t total = 0;
  json header = {
      {"kind", "denoiser-checkpoint"},
      {"arch", arch_to_json(info.arch)},
      {"schedule",
       {{"t_max", info.schedule_t_max}, {"beta_start", info.beta_start}, {"beta_end", info.beta_end}}},
      {"train",
       {{"epochs", info.train.epochs},
        {"batch_size", info.train.batch_size},
        {"learning_rate", info.train.learning_rate},
        {"weight_decay", info.train.weight_decay},
        {"t_max", info.train.t_max}}},
      {"category", info.category},
      {"tensors", tensor_index(tensors, names, &total)},
      {"payload_count", total},
  };
  write_container(path, header, tensors);
}

std::unique_ptr<TrainableDenoiser> load_denoiser_checkpoint(const std::string& path,
                                                            CheckpointInfo* info) {
  RawContainer rc = read_container(path, "denoiser-checkpoint");

  CheckpointInfo ci;
  ci.arch = arch_from_json(rc.header.at("arch"));
  const auto& sj = rc.header.at("schedule");
  ci.schedule_t_max = sj.at("t_max").get<int>();
  ci.beta_start = sj.at("beta_start").get<double>();
  ci.beta_end = sj.at("beta_end").get<double>();
  const auto& tj = rc.header.at("train");
  ci.train.epochs = tj.at("epochs").get<int>();
  ci.train.batch_size = tj.at("batch_size").get<int>();
  ci.train.learning_rate = tj.at("learning_rate").get<double>();
  ci.train.weight_decay = tj.at("weight_decay").get<double>();
  ci.train.t_max = tj.at("t_max").get<int>();
  ci.category = rc.header.at("category").get<std::string>();

  Rng init_rng(0);
  auto model = make_denoiser(ci.arch, init_rng);
  auto params = model->parameters();
  auto tensors = unpack_tensors(rc);
  if (tensors.size() != params.size()) {
    throw std::runtime_error("checkpoint " + path + " holds " + std::to_string(tensors.size()) +
                             " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i].name ||
        tensors[i].tensor.v.size() != params[i].value->v.size()) {
      throw std::runtime_error("checkpoint tensor mismatch at '" + tensors[i].name + "'");
    }
    *params[i].value = std::move(tensors[i].tensor);
  }
  if (info) *info = ci;
  return model;
}

void save_weights_bundle(const std::string& path, const WeightsBundle& bundle) {
  std::vector<const nn::Tensor*> tensors;
  std::vector<std::string> names;
  for (const auto& nt : bundle.tensors) {
    tensors.push_back(&nt.tensor);
    names.push_back(nt.name);
  }
  std::uint64_t total = 0;
  json header = {
      {"kind", "feature-backbone"},
      {"name", bundle.name},
      {"tensors", tensor_index(tensors, names, &total)},
      {"payload_count", total},
  };
  write_container(path, header, tensors);
}

WeightsBundle load_weights_bundle(const std::string& path) {
  RawContainer rc = read_container(path, "feature-backbone");
  WeightsBundle b;
  b.name = rc.header.at("name").get<std::string>();
  b.tensors = unpack_tensors(rc);
  return b;
}

std::string sha256_bytes(const void* data, std::size_t n) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data, n, digest, &len, EVP_sha256(), nullptr)) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha256: ctx allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace mdps
