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
#include "clasp/dataio.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "clasp/common.hpp"
#include "json.hpp"

namespace clasp::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

std::string default_data_root() {
  if (const char* v = std::getenv("CLASP_DATA_DIR"); v && *v) return v;
  return "data";
}

namespace {

constexpr uint32_t kSeqMagic = 0x31515343;  // "CSQ1"

template <class T>
void put(std::vector<uint8_t>& buf, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <class T>
T take(const std::vector<uint8_t>& buf, size_t& pos) {
  T v;
  if (pos + sizeof(T) > buf.size()) throw ArtifactError("truncated sequence record");
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::vector<uint8_t> encode_sequence(const env::VideoSequence& seq) {
  std::vector<uint8_t> buf;
  put(buf, kSeqMagic);
  put(buf, uint32_t{0});  // total size, patched below
  put(buf, static_cast<int32_t>(seq.len()));
  put(buf, static_cast<int32_t>(seq.image_size()));
  buf.insert(buf.end(), seq.frames.data(), seq.frames.data() + seq.frames.size());
  put(buf, static_cast<uint8_t>(seq.has_actions ? 1 : 0));
  if (seq.has_actions) {
    if (static_cast<int>(seq.actions.size()) != seq.len() - 1)
      throw ConfigError("sequence actions must have length T-1");
    for (double u : seq.actions) put(buf, u);
  }
  put(buf, seq.agent.arm_length);
  put(buf, seq.agent.arm_width);
  buf.insert(buf.end(), seq.agent.arm_color.begin(), seq.agent.arm_color.end());
  put(buf, static_cast<int32_t>(seq.agent.image_size));
  put(buf, static_cast<uint8_t>(seq.bg.kind));
  put(buf, seq.bg.seed);
  buf.insert(buf.end(), seq.bg.color.begin(), seq.bg.color.end());
  put(buf, static_cast<uint32_t>(seq.bg.image_path.size()));
  buf.insert(buf.end(), seq.bg.image_path.begin(), seq.bg.image_path.end());
  put(buf, seq.init_angle);
  put(buf, seq.seed);
  const uint32_t total = static_cast<uint32_t>(buf.size());
  std::memcpy(buf.data() + 4, &total, 4);
  return buf;
}

env::VideoSequence decode_sequence(const std::vector<uint8_t>& buf) {
  size_t pos = 0;
  if (take<uint32_t>(buf, pos) != kSeqMagic) throw ArtifactError("bad sequence magic");
  const uint32_t total = take<uint32_t>(buf, pos);
  if (total != buf.size()) throw ArtifactError("sequence size mismatch");
  const int32_t t = take<int32_t>(buf, pos);
  const int32_t s = take<int32_t>(buf, pos);
  env::VideoSequence seq;
  seq.frames = Tensor<uint8_t>::zeros({t, s, s, 3});
  if (pos + seq.frames.size() > buf.size()) throw ArtifactError("truncated frames");
  std::memcpy(seq.frames.data(), buf.data() + pos, seq.frames.size());
  pos += seq.frames.size();
  seq.has_actions = take<uint8_t>(buf, pos) != 0;
  if (seq.has_actions) {
    seq.actions.resize(t - 1);
    for (auto& u : seq.actions) u = take<double>(buf, pos);
  }
  seq.agent.arm_length = take<double>(buf, pos);
  seq.agent.arm_width = take<double>(buf, pos);
  for (auto& c : seq.agent.arm_color) c = take<uint8_t>(buf, pos);
  seq.agent.image_size = take<int32_t>(buf, pos);
  seq.bg.kind = static_cast<env::BackgroundSpec::Kind>(take<uint8_t>(buf, pos));
  seq.bg.seed = take<uint64_t>(buf, pos);
  for (auto& c : seq.bg.color) c = take<uint8_t>(buf, pos);
  const uint32_t path_len = take<uint32_t>(buf, pos);
  if (pos + path_len > buf.size()) throw ArtifactError("truncated path");
  seq.bg.image_path.assign(reinterpret_cast<const char*>(buf.data() + pos), path_len);
  pos += path_len;
  seq.init_angle = take<double>(buf, pos);
  seq.seed = take<uint64_t>(buf, pos);
  return seq;
}

std::string shard_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shard-%04d.bin", index);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// DatasetWriter
// ---------------------------------------------------------------------------

DatasetWriter::DatasetWriter(std::string root, int image_size, int seq_len, std::string variant, int max_per_shard)
    : root_(std::move(root)), max_per_shard_(max_per_shard) {
  manifest_.image_size = image_size;
  manifest_.seq_len = seq_len;
  manifest_.variant = std::move(variant);
  fs::create_directories(root_);
}

DatasetWriter::~DatasetWriter() {
  if (!finalized_) {
    try {
      finalize();
    } catch (...) {
    }
  }
}

void DatasetWriter::rotate_shard(const std::string& split) {
  auto& info = manifest_.splits[split];
  auto& shard = open_[split];
  if (shard.file.is_open()) {
    shard.file.close();
    info.shard_crcs.push_back(shard.crc);
  }
  const int idx = static_cast<int>(info.shard_files.size());
  const std::string rel = split + "/" + shard_name(idx);
  fs::create_directories(fs::path(root_) / split);
  shard.file.open(fs::path(root_) / rel, std::ios::binary);
  if (!shard.file) throw IoError("cannot open shard " + rel);
  shard.bytes = 0;
  shard.crc = static_cast<uint32_t>(crc32(0, nullptr, 0));
  shard.count = 0;
  info.shard_files.push_back(rel);
}

void DatasetWriter::append(const std::string& split, const env::VideoSequence& seq) {
  if (finalized_) throw ConfigError("writer already finalized");
  if (seq.len() != manifest_.seq_len || seq.image_size() != manifest_.image_size)
    throw ConfigError("sequence shape does not match dataset");
  auto& info = manifest_.splits[split];
  auto it = open_.find(split);
  if (it == open_.end() || !it->second.file.is_open() || it->second.count >= max_per_shard_) rotate_shard(split);
  auto& shard = open_[split];

  const std::vector<uint8_t> blob = encode_sequence(seq);
  SequenceRecord rec;
  rec.shard = static_cast<int>(info.shard_files.size()) - 1;
  rec.offset = shard.bytes;
  rec.seed = seq.seed;
  rec.labeled = seq.has_actions;
  info.records.push_back(rec);

  shard.file.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!shard.file) throw IoError("short write to shard in " + root_);
  shard.crc = static_cast<uint32_t>(
      crc32(shard.crc, blob.data(), static_cast<uInt>(blob.size())));
  shard.bytes += blob.size();
  ++shard.count;
}

void DatasetWriter::finalize() {
  if (finalized_) return;
  finalized_ = true;
  for (auto& [split, shard] : open_) {
    if (shard.file.is_open()) {
      shard.file.close();
      manifest_.splits[split].shard_crcs.push_back(shard.crc);
    }
  }
  json j;
  j["version"] = manifest_.version;
  j["image_size"] = manifest_.image_size;
  j["seq_len"] = manifest_.seq_len;
  j["variant"] = manifest_.variant;
  for (const auto& [split, info] : manifest_.splits) {
    json js;
    js["count"] = info.records.size();
    js["shards"] = json::array();
    for (size_t i = 0; i < info.shard_files.size(); ++i)
      js["shards"].push_back({{"file", info.shard_files[i]}, {"crc32", info.shard_crcs[i]}});
    js["records"] = json::array();
    for (const auto& r : info.records)
      js["records"].push_back({{"shard", r.shard}, {"offset", r.offset}, {"seed", r.seed}, {"labeled", r.labeled}});
    j["splits"][split] = std::move(js);
  }
  std::ofstream f(fs::path(root_) / "manifest.json");
  if (!f) throw IoError("cannot write manifest in " + root_);
  f << j.dump(1) << "\n";
}

// ---------------------------------------------------------------------------
// DatasetReader
// ---------------------------------------------------------------------------

DatasetReader::DatasetReader(std::string root) : root_(std::move(root)) {
  const fs::path mpath = fs::path(root_) / "manifest.json";
  std::ifstream f(mpath);
  if (!f) throw ArtifactError("no dataset manifest at " + mpath.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ArtifactError("malformed manifest " + mpath.string() + ": " + e.what());
  }
  manifest_.version = j.at("version").get<std::string>();
  if (manifest_.version != kFormatVersion)
    throw ArtifactError("dataset version " + manifest_.version + " != " + kFormatVersion);
  manifest_.image_size = j.at("image_size").get<int>();
  manifest_.seq_len = j.at("seq_len").get<int>();
  manifest_.variant = j.at("variant").get<std::string>();
  for (const auto& [split, js] : j.at("splits").items()) {
    SplitInfo info;
    for (const auto& sh : js.at("shards")) {
      info.shard_files.push_back(sh.at("file").get<std::string>());
      info.shard_crcs.push_back(sh.at("crc32").get<uint32_t>());
    }
    for (const auto& r : js.at("records")) {
      SequenceRecord rec;
      rec.shard = r.at("shard").get<int>();
      rec.offset = r.at("offset").get<uint64_t>();
      rec.seed = r.at("seed").get<uint64_t>();
      rec.labeled = r.at("labeled").get<bool>();
      info.records.push_back(rec);
    }
    if (info.records.size() != js.at("count").get<size_t>())
      throw ArtifactError("manifest count mismatch for split " + split);
    manifest_.splits[split] = std::move(info);
  }
}

const SplitInfo& DatasetReader::split_info(const std::string& split) const {
  auto it = manifest_.splits.find(split);
  if (it == manifest_.splits.end()) throw ArtifactError("no split '" + split + "' in dataset " + root_);
  return it->second;
}

int DatasetReader::count(const std::string& split) const {
  return static_cast<int>(split_info(split).records.size());
}

void DatasetReader::verify_shard(const std::string& split, int shard) const {
  const auto& info = split_info(split);
  const std::string& rel = info.shard_files.at(shard);
  if (verified_.count(rel)) return;
  std::ifstream f(fs::path(root_) / rel, std::ios::binary);
  if (!f) throw ArtifactError("missing shard " + rel);
  uint32_t crc = static_cast<uint32_t>(crc32(0, nullptr, 0));
  std::vector<uint8_t> buf(1 << 20);
  while (f) {
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    const auto got = f.gcount();
    if (got > 0) crc = static_cast<uint32_t>(crc32(crc, buf.data(), static_cast<uInt>(got)));
  }
  if (crc != info.shard_crcs.at(shard))
    throw ArtifactError("checksum failure in shard " + rel + " of dataset " + root_);
  verified_.insert(rel);
}

env::VideoSequence DatasetReader::read(const std::string& split, int index) const {
  const auto& info = split_info(split);
  if (index < 0 || index >= static_cast<int>(info.records.size()))
    throw ArtifactError("sequence index " + std::to_string(index) + " out of range for split " + split);
  const auto& rec = info.records[index];
  verify_shard(split, rec.shard);
  std::ifstream f(fs::path(root_) / info.shard_files.at(rec.shard), std::ios::binary);
  if (!f) throw ArtifactError("missing shard " + info.shard_files.at(rec.shard));
  f.seekg(static_cast<std::streamoff>(rec.offset));
  uint8_t head[8];
  f.read(reinterpret_cast<char*>(head), 8);
  if (f.gcount() != 8) throw ArtifactError("truncated shard " + info.shard_files.at(rec.shard));
  uint32_t total;
  std::memcpy(&total, head + 4, 4);
  std::vector<uint8_t> blob(total);
  std::memcpy(blob.data(), head, 8);
  f.read(reinterpret_cast<char*>(blob.data() + 8), total - 8);
  if (f.gcount() != static_cast<std::streamsize>(total - 8))
    throw ArtifactError("truncated shard " + info.shard_files.at(rec.shard));
  return decode_sequence(blob);
}

// ---------------------------------------------------------------------------
// Subsets and batching
// ---------------------------------------------------------------------------

std::vector<int> labeled_subset(int dataset_size, int n_labeled, uint64_t seed) {
  if (n_labeled > dataset_size) throw ConfigError("labeled subset larger than dataset");
  std::vector<int> perm(dataset_size);
  for (int i = 0; i < dataset_size; ++i) perm[i] = i;
  Rng rng = Rng(seed).split(0x5e7);
  for (int i = dataset_size - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.below(static_cast<uint64_t>(i) + 1)]);
  perm.resize(n_labeled);
  return perm;
}

BatchIterator::BatchIterator(const DatasetReader& reader, std::string split, int batch_size, int crop_len,
                             uint64_t seed, std::vector<int> subset)
    : reader_(&reader),
      split_(std::move(split)),
      batch_size_(batch_size),
      crop_len_(crop_len),
      seed_(seed),
      subset_(std::move(subset)) {
  if (crop_len_ < 2 || crop_len_ > reader.manifest().seq_len) throw ConfigError("bad crop_len");
  const int n = reader.count(split_);
  for (int idx : subset_)
    if (idx < 0 || idx >= n) throw ConfigError("subset index out of range");
  if (subset_.empty()) {
    subset_.resize(n);
    for (int i = 0; i < n; ++i) subset_[i] = i;
  }
  if (static_cast<int>(subset_.size()) < batch_size_) throw ConfigError("split smaller than one batch");
  start_epoch();
}

void BatchIterator::start_epoch() {
  ++epoch_;
  pos_ = 0;
  rng_ = std::make_unique<Rng>(Rng(seed_).split(static_cast<uint64_t>(epoch_)));
  order_ = subset_;
  const int n = static_cast<int>(order_.size());
  for (int i = n - 1; i > 0; --i) std::swap(order_[i], order_[rng_->below(static_cast<uint64_t>(i) + 1)]);
}

Tensor<float> frames_tensor(const env::VideoSequence& seq) {
  const int s = seq.image_size();
  const int t_total = seq.len();
  Tensor<float> out({t_total, 3, s, s});
  for (int t = 0; t < t_total; ++t) {
    const uint8_t* src = seq.frames.data() + static_cast<size_t>(t) * s * s * 3;
    float* dst = out.data() + static_cast<size_t>(t) * 3 * s * s;
    for (int p = 0; p < s * s; ++p)
      for (int c = 0; c < 3; ++c) dst[static_cast<size_t>(c) * s * s + p] = src[3 * p + c] / 255.f;
  }
  return out;
}

Batch BatchIterator::next() {
  if (pos_ + batch_size_ > order_.size()) start_epoch();
  const int s = reader_->manifest().image_size;
  const int t_full = reader_->manifest().seq_len;
  Batch batch;
  batch.frames = Tensor<float>::zeros({batch_size_, crop_len_, 3, s, s});
  batch.actions = Tensor<float>::zeros({batch_size_, crop_len_ - 1});
  for (int b = 0; b < batch_size_; ++b) {
    const int idx = order_[pos_++];
    const int start = static_cast<int>(rng_->below(static_cast<uint64_t>(t_full - crop_len_) + 1));
    const env::VideoSequence seq = reader_->read(split_, idx);
    batch.sequence_indices.push_back(idx);
    batch.crop_starts.push_back(start);
    // uint8 HWC -> float CHW in [0,1].
    for (int t = 0; t < crop_len_; ++t) {
      const uint8_t* src = seq.frames.data() + static_cast<size_t>(start + t) * s * s * 3;
      float* dst = batch.frames.data() + ((static_cast<size_t>(b) * crop_len_ + t) * 3) * s * s;
      for (int p = 0; p < s * s; ++p)
        for (int c = 0; c < 3; ++c) dst[static_cast<size_t>(c) * s * s + p] = src[3 * p + c] / 255.f;
    }
    for (int t = 0; t + 1 < crop_len_; ++t)
      batch.actions[static_cast<size_t>(b) * (crop_len_ - 1) + t] = static_cast<float>(seq.actions[start + t]);
  }
  return batch;
}

}  // namespace clasp::dataio
