/* Copyright 2026 The clasp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CLASP_CHECKPOINT_HPP_
#define CLASP_CHECKPOINT_HPP_

#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clasp/composer.hpp"
#include "clasp/model.hpp"

namespace clasp::model {

inline constexpr char kCheckpointMagic[8] = {'C', 'L', 'A', 'S', 'P', 'C', 'K', '1'};
inline constexpr const char* kCheckpointFormat = "clasp-ckpt-1";

inline nlohmann::json config_to_json(const PredictorConfig& c) {
  return {{"image_size", c.image_size},       {"channels", c.channels},
          {"enc_levels", c.enc_levels},       {"enc_base", c.enc_base},
          {"enc_dim", c.enc_dim},             {"latent_dim", c.latent_dim},
          {"lstm_hidden", c.lstm_hidden},     {"infer_h1", c.infer_h1},
          {"infer_h2", c.infer_h2},           {"comp_hidden", c.comp_hidden},
          {"act_embed_hidden", c.act_embed_hidden},
          {"cond_frames", c.cond_frames},     {"seq_len", c.seq_len},
          {"comp_chunk", c.comp_chunk},       {"beta_z", c.beta_z},
          {"beta_nu", c.beta_nu},             {"action_max", c.action_max},
          {"skip_connections", c.skip_connections}};
}

inline PredictorConfig config_from_json(const nlohmann::json& j) {
  PredictorConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.channels = j.at("channels").get<int>();
  c.enc_levels = j.at("enc_levels").get<int>();
  c.enc_base = j.at("enc_base").get<int>();
  c.enc_dim = j.at("enc_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.infer_h1 = j.at("infer_h1").get<int>();
  c.infer_h2 = j.at("infer_h2").get<int>();
  c.comp_hidden = j.at("comp_hidden").get<int>();
  c.act_embed_hidden = j.at("act_embed_hidden").get<int>();
  c.cond_frames = j.at("cond_frames").get<int>();
  c.seq_len = j.at("seq_len").get<int>();
  c.comp_chunk = j.at("comp_chunk").get<int>();
  c.beta_z = j.at("beta_z").get<double>();
  c.beta_nu = j.at("beta_nu").get<double>();
  c.action_max = j.at("action_max").get<double>();
  c.skip_connections = j.at("skip_connections").get<bool>();
  c.validate();
  return c;
}

template <class T>
const char* scalar_dtype_name() {
  if constexpr (sizeof(T) == 4) return "f32";
  return "f64";
}

// CRC over the raw bytes of every parameter in registry order. Grounding and
// planning artifacts store this to pin the exact network they were fit to.
template <class T>
uint32_t param_checksum(const nn::ParamRegistry<T>& reg) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& e : reg.entries()) {
    const auto& t = e.value.tensor();
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.data()),
                static_cast<uInt>(t.size() * sizeof(T)));
  }
  return static_cast<uint32_t>(crc);
}

struct CheckpointMeta {
  PredictorConfig cfg;
  std::string mode = "clasp";
  int64_t step = 0;
  uint64_t seed = 0;
  std::array<uint64_t, 7> rng_state{};
  bool has_adam = false;
  std::string dtype = "f32";
};

namespace detail {

inline void append_bytes(std::vector<char>& buf, const void* p, size_t n) {
  const char* c = static_cast<const char*>(p);
  buf.insert(buf.end(), c, c + n);
}

inline void write_file_atomic(const std::string& path, const std::vector<char>& bytes) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing checkpoint: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const Clasp<T>& m, const nn::Adam<T>* opt,
                     const CheckpointMeta& meta) {
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["config"] = config_to_json(m.cfg);
  header["mode"] = meta.mode;
  header["step"] = meta.step;
  header["seed"] = meta.seed;
  header["rng_state"] = meta.rng_state;
  header["dtype"] = scalar_dtype_name<T>();
  header["adam"] = nlohmann::json::object();
  header["adam"]["present"] = opt != nullptr;
  header["adam"]["t"] = opt ? opt->t() : 0;
  auto params = nlohmann::json::array();
  for (const auto& e : m.reg.entries())
    params.push_back({{"name", e.name}, {"shape", e.value.shape()}});
  header["params"] = params;
  const std::string hs = header.dump();

  std::vector<char> body;
  const uint32_t hlen = static_cast<uint32_t>(hs.size());
  detail::append_bytes(body, &hlen, sizeof(hlen));
  detail::append_bytes(body, hs.data(), hs.size());
  for (const auto& e : m.reg.entries())
    detail::append_bytes(body, e.value.tensor().data(), e.value.size() * sizeof(T));
  if (opt) {
    auto* mv = const_cast<nn::Adam<T>*>(opt);
    if (mv->m().size() != m.reg.entries().size())
      throw ConfigError("optimizer state does not match the registry");
    for (const auto& t : mv->m()) detail::append_bytes(body, t.data(), t.size() * sizeof(T));
    for (const auto& t : mv->v()) detail::append_bytes(body, t.data(), t.size() * sizeof(T));
  }
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  const uint32_t crc32v = static_cast<uint32_t>(crc);

  std::vector<char> file;
  detail::append_bytes(file, kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::append_bytes(file, body.data(), body.size());
  detail::append_bytes(file, &crc32v, sizeof(crc32v));
  detail::write_file_atomic(path, file);
}

inline nlohmann::json checkpoint_header(const std::vector<char>& bytes, const std::string& path) {
  if (bytes.size() < sizeof(kCheckpointMagic) + sizeof(uint32_t) * 2 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw ArtifactError("not a checkpoint file: " + path);
  uLong crc = crc32(0L, Z_NULL, 0);
  const size_t body_len = bytes.size() - sizeof(kCheckpointMagic) - sizeof(uint32_t);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + sizeof(kCheckpointMagic)),
              static_cast<uInt>(body_len));
  uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(uint32_t), sizeof(stored));
  if (static_cast<uint32_t>(crc) != stored)
    throw ArtifactError("checkpoint checksum mismatch: " + path);
  uint32_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kCheckpointMagic), sizeof(hlen));
  const size_t hoff = sizeof(kCheckpointMagic) + sizeof(hlen);
  if (hoff + hlen > bytes.size()) throw ArtifactError("truncated checkpoint: " + path);
  auto header = nlohmann::json::parse(std::string(bytes.data() + hoff, hlen));
  if (header.at("format").get<std::string>() != kCheckpointFormat)
    throw ArtifactError("unsupported checkpoint format in " + path);
  return header;
}

inline CheckpointMeta meta_from_header(const nlohmann::json& header) {
  CheckpointMeta meta;
  meta.cfg = config_from_json(header.at("config"));
  meta.mode = header.at("mode").get<std::string>();
  meta.step = header.at("step").get<int64_t>();
  meta.seed = header.at("seed").get<uint64_t>();
  meta.rng_state = header.at("rng_state").get<std::array<uint64_t, 7>>();
  meta.has_adam = header.at("adam").at("present").get<bool>();
  meta.dtype = header.at("dtype").get<std::string>();
  return meta;
}

inline CheckpointMeta peek_checkpoint(const std::string& path) {
  return meta_from_header(checkpoint_header(detail::read_file(path), path));
}

// Restores parameters (and optimizer state when requested) into a model that
// was constructed from the checkpoint's config. Shapes and names must match
// exactly.
template <class T>
CheckpointMeta load_checkpoint(const std::string& path, Clasp<T>& m, nn::Adam<T>* opt = nullptr) {
  const std::vector<char> bytes = detail::read_file(path);
  auto header = checkpoint_header(bytes, path);
  CheckpointMeta meta = meta_from_header(header);
  if (meta.dtype != scalar_dtype_name<T>())
    throw ArtifactError("checkpoint dtype " + meta.dtype + " does not match this build");
  const auto& params = header.at("params");
  auto& entries = m.reg.entries();
  if (params.size() != entries.size())
    throw ArtifactError("checkpoint parameter list does not match the model");

  uint32_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kCheckpointMagic), sizeof(hlen));
  size_t off = sizeof(kCheckpointMagic) + sizeof(hlen) + hlen;
  auto take = [&](void* dst, size_t n) {
    if (off + n + sizeof(uint32_t) > bytes.size())
      throw ArtifactError("truncated checkpoint: " + path);
    std::memcpy(dst, bytes.data() + off, n);
    off += n;
  };
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& spec = params[i];
    if (spec.at("name").get<std::string>() != entries[i].name ||
        spec.at("shape").get<std::vector<int>>() != entries[i].value.shape())
      throw ArtifactError("checkpoint parameter " + entries[i].name + " does not match the model");
    take(entries[i].value.tensor().data(), entries[i].value.size() * sizeof(T));
  }
  if (opt && meta.has_adam) {
    auto& mm = opt->m();
    auto& vv = opt->v();
    mm.clear();
    vv.clear();
    for (auto& e : entries) mm.push_back(Tensor<T>::zeros(e.value.shape()));
    for (auto& e : entries) vv.push_back(Tensor<T>::zeros(e.value.shape()));
    for (auto& t : mm) take(t.data(), t.size() * sizeof(T));
    for (auto& t : vv) take(t.data(), t.size() * sizeof(T));
    opt->set_t(header.at("adam").at("t").get<int64_t>());
  }
  return meta;
}

}  // namespace clasp::model

#endif  // CLASP_CHECKPOINT_HPP_
