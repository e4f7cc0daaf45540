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
#ifndef CLASP_DATAIO_HPP_
#define CLASP_DATAIO_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "clasp/env.hpp"
#include "clasp/rng.hpp"
#include "clasp/tensor.hpp"

// On-disk dataset format: manifest.json at the root plus binary shards
// (train/shard-0000.bin, ...) of raw row-major uint8 frames with a CRC32 per
// shard. Round trips are bit-exact and sequences are seekable by index.
namespace clasp::dataio {

inline constexpr const char* kFormatVersion = "clasp-ds-1";

// $CLASP_DATA_DIR if set, else "data".
std::string default_data_root();

struct SequenceRecord {
  int shard = 0;
  uint64_t offset = 0;
  uint64_t seed = 0;
  bool labeled = true;
};

struct SplitInfo {
  std::vector<std::string> shard_files;
  std::vector<uint32_t> shard_crcs;
  std::vector<SequenceRecord> records;
};

struct DatasetManifest {
  std::string version = kFormatVersion;
  int image_size = 0;
  int seq_len = 0;
  std::string variant;
  std::map<std::string, SplitInfo> splits;
};

class DatasetWriter {
 public:
  DatasetWriter(std::string root, int image_size, int seq_len, std::string variant, int max_per_shard = 256);
  ~DatasetWriter();

  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const std::string& split, const env::VideoSequence& seq);
  void finalize();  // writes manifest.json; appends are rejected afterwards

 private:
  struct OpenShard {
    std::ofstream file;
    uint64_t bytes = 0;
    uint32_t crc = 0;
    int count = 0;
  };

  void rotate_shard(const std::string& split);

  std::string root_;
  DatasetManifest manifest_;
  int max_per_shard_;
  bool finalized_ = false;
  std::map<std::string, OpenShard> open_;
};

class DatasetReader {
 public:
  explicit DatasetReader(std::string root);

  const DatasetManifest& manifest() const { return manifest_; }
  int count(const std::string& split) const;
  env::VideoSequence read(const std::string& split, int index) const;

 private:
  const SplitInfo& split_info(const std::string& split) const;
  void verify_shard(const std::string& split, int shard) const;

  std::string root_;
  DatasetManifest manifest_;
  mutable std::set<std::string> verified_;
};

// First n entries of a seeded permutation, so subsets nest: the result for
// n1 < n2 is a prefix of the result for n2 under the same seed.
std::vector<int> labeled_subset(int dataset_size, int n_labeled, uint64_t seed);

// uint8 HWC frames -> float CHW in [0, 1]: [T, 3, S, S].
Tensor<float> frames_tensor(const env::VideoSequence& seq);

struct Batch {
  Tensor<float> frames;   // [B, T, 3, S, S], values in [0, 1]
  Tensor<float> actions;  // [B, T-1], degrees
  std::vector<int> sequence_indices;
  std::vector<int> crop_starts;
};

// Deterministic epoch stream: each epoch visits every sequence once in a
// seeded shuffle and takes one random contiguous crop; rows never span
// sequence boundaries. Partial trailing batches are dropped. A non-empty
// subset restricts epochs to those sequence indices.
class BatchIterator {
 public:
  BatchIterator(const DatasetReader& reader, std::string split, int batch_size, int crop_len, uint64_t seed,
                std::vector<int> subset = {});

  Batch next();
  int epoch() const { return epoch_; }

 private:
  void start_epoch();

  const DatasetReader* reader_;
  std::string split_;
  int batch_size_, crop_len_;
  uint64_t seed_;
  std::vector<int> subset_;
  int epoch_ = -1;
  size_t pos_ = 0;
  std::vector<int> order_;
  std::unique_ptr<Rng> rng_;
};

}  // namespace clasp::dataio

#endif  // CLASP_DATAIO_HPP_
