/*
 * Copyright 2026 The FAA Lab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "faa/tensor.hpp"

namespace faa {

// Controls the synthetic identity world. Each identity owns a shared latent
// that both modalities observe through fixed random mixing matrices, plus a
// modality-private latent; `cross_modal_strength` blends the two.
struct WorldConfig {
  std::size_t num_identities = 96;
  // train / val / test fractions of identities; must sum to 1.
  std::array<double, 3> identity_split = {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
  std::size_t latent_dim = 8;
  std::size_t face_dim = 24;
  std::size_t voice_dim = 16;
  std::size_t videos_per_identity = 4;
  std::size_t faces_per_video = 4;
  std::size_t voices_per_video = 2;
  double noise_std = 0.3;
  double cross_modal_strength = 0.9;
  // Norm of the latent offset separating the two groups. Scaled by
  // cross_modal_strength together with the shared latent.
  double group_offset = 6.0;
  std::uint64_t seed = 7;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Identity counts per partition (train, val, test).
  std::array<std::size_t, 3> partition_sizes() const;

  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

enum class Partition { kTrain = 0, kVal = 1, kTest = 2 };
inline constexpr std::array<Partition, 3> kAllPartitions = {Partition::kTrain, Partition::kVal, Partition::kTest};
std::string partition_name(Partition p);

struct VideoRecord {
  std::uint64_t video_id = 0;
  // Ground truth; never read by training code.
  std::uint64_t identity_id = 0;
  int group = 0;
  Tensor faces;   // [faces_per_video x face_dim]
  Tensor voices;  // [voices_per_video x voice_dim]

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct Dataset {
  WorldConfig config;
  std::array<std::vector<VideoRecord>, 3> partitions;

  const std::vector<VideoRecord>& partition(Partition p) const { return partitions[static_cast<int>(p)]; }
  std::vector<VideoRecord>& partition(Partition p) { return partitions[static_cast<int>(p)]; }

  // Throws CorruptionError if identities overlap across partitions or video
  // ids repeat, ConfigError if a partition is empty.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Fixed per-world generative parameters, reproducible from the seed.
struct WorldMixing {
  Tensor face_mixing;      // [face_dim x latent_dim]
  Tensor voice_mixing;     // [voice_dim x latent_dim]
  Tensor group_direction;  // [latent_dim], norm == group_offset
};

WorldMixing world_mixing(const WorldConfig& config);

// Samples are quantized to float32-representable values so the on-disk
// format round-trips exactly.
Dataset generate_world(const WorldConfig& config);

// Directory layout: manifest.json plus train.bin / val.bin / test.bin.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

struct PartitionSummary {
  std::size_t videos = 0, voices = 0, faces = 0, identities = 0;
};
PartitionSummary summarize(const std::vector<VideoRecord>& videos);

}  // namespace faa
