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

#include "faa/synthworld.hpp"

#include <cmath>
#include <set>

#include "faa/errors.hpp"
#include "faa/rng.hpp"

namespace faa {

std::string partition_name(Partition p) {
  switch (p) {
    case Partition::kTrain:
      return "train";
    case Partition::kVal:
      return "val";
    case Partition::kTest:
      return "test";
  }
  return "?";
}

void WorldConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (num_identities < 1) fail("num_identities", "must be >= 1");
  double total = 0.0;
  for (double f : identity_split) {
    if (!(f >= 0.0) || f > 1.0) fail("identity_split", "fractions must lie in [0, 1]");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("identity_split", "fractions must sum to 1 (got " + std::to_string(total) + ")");
  if (latent_dim < 2) fail("latent_dim", "must be >= 2");
  if (face_dim < 2) fail("face_dim", "must be >= 2");
  if (voice_dim < 2) fail("voice_dim", "must be >= 2");
  if (videos_per_identity < 1) fail("videos_per_identity", "must be >= 1");
  if (faces_per_video < 1) fail("faces_per_video", "must be >= 1");
  if (voices_per_video < 1) fail("voices_per_video", "must be >= 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std", "must be finite and >= 0");
  if (!(cross_modal_strength >= 0.0 && cross_modal_strength <= 1.0)) fail("cross_modal_strength", "must lie in [0, 1]");
  if (!(group_offset >= 0.0) || !std::isfinite(group_offset)) fail("group_offset", "must be finite and >= 0");
  const auto sizes = partition_sizes();
  for (std::size_t p = 0; p < 3; ++p) {
    if (sizes[p] == 0) {
      fail("identity_split", "partition " + partition_name(static_cast<Partition>(p)) + " would be empty");
    }
  }
}

std::array<std::size_t, 3> WorldConfig::partition_sizes() const {
  const double n = static_cast<double>(num_identities);
  const auto train = static_cast<std::size_t>(std::llround(n * identity_split[0]));
  const auto val = static_cast<std::size_t>(std::llround(n * identity_split[1]));
  const std::size_t used = std::min(num_identities, train + val);
  return {std::min(train, num_identities), used - std::min(train, num_identities), num_identities - used};
}

namespace {

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> normal_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

// out = mixing * latent + noise, quantized to float32.
void emit(const Tensor& mixing, const std::vector<double>& latent, double noise_std, Rng& rng, std::span<double> out) {
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    auto row = mixing.row(r);
    for (std::size_t c = 0; c < latent.size(); ++c) acc += row[c] * latent[c];
    out[r] = quantize(acc + noise_std * rng.normal());
  }
}

}  // namespace

WorldMixing world_mixing(const WorldConfig& config) {
  Rng rng(derive_seed(config.seed, {1}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
  WorldMixing m{Tensor({config.face_dim, config.latent_dim}), Tensor({config.voice_dim, config.latent_dim}),
                Tensor({config.latent_dim})};
  for (double& v : m.face_mixing.data()) v = scale * rng.normal();
  for (double& v : m.voice_mixing.data()) v = scale * rng.normal();
  double norm = 0.0;
  for (double& v : m.group_direction.data()) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : m.group_direction.data()) v *= config.group_offset / norm;
  return m;
}

Dataset generate_world(const WorldConfig& config) {
  config.validate();
  const WorldMixing mixing = world_mixing(config);
  const auto sizes = config.partition_sizes();
  const double s = config.cross_modal_strength;

  Dataset ds;
  ds.config = config;
  std::uint64_t next_video = 0;
  for (std::size_t id = 0; id < config.num_identities; ++id) {
    Rng rng(derive_seed(config.seed, {2, id}));
    const std::vector<double> z = normal_vector(rng, config.latent_dim);
    const std::vector<double> z_face = normal_vector(rng, config.latent_dim);
    const std::vector<double> z_voice = normal_vector(rng, config.latent_dim);
    const int group = rng.bernoulli(0.5) ? 1 : 0;

    std::vector<double> face_latent(config.latent_dim), voice_latent(config.latent_dim);
    for (std::size_t d = 0; d < config.latent_dim; ++d) {
      const double shared = z[d] + (group - 0.5) * mixing.group_direction[d];
      face_latent[d] = s * shared + (1.0 - s) * z_face[d];
      voice_latent[d] = s * shared + (1.0 - s) * z_voice[d];
    }

    const Partition part = id < sizes[0]               ? Partition::kTrain
                           : id < sizes[0] + sizes[1] ? Partition::kVal
                                                       : Partition::kTest;
    for (std::size_t v = 0; v < config.videos_per_identity; ++v) {
      VideoRecord rec;
      rec.video_id = next_video++;
      rec.identity_id = id;
      rec.group = group;
      rec.faces = Tensor({config.faces_per_video, config.face_dim});
      rec.voices = Tensor({config.voices_per_video, config.voice_dim});
      for (std::size_t f = 0; f < config.faces_per_video; ++f)
        emit(mixing.face_mixing, face_latent, config.noise_std, rng, rec.faces.row(f));
      for (std::size_t f = 0; f < config.voices_per_video; ++f)
        emit(mixing.voice_mixing, voice_latent, config.noise_std, rng, rec.voices.row(f));
      ds.partition(part).push_back(std::move(rec));
    }
  }
  ds.validate();
  return ds;
}

void Dataset::validate() const {
  std::set<std::uint64_t> video_ids;
  std::array<std::set<std::uint64_t>, 3> ids;
  for (Partition p : kAllPartitions) {
    const auto& videos = partition(p);
    if (videos.empty()) throw ConfigError("partition " + partition_name(p) + " is empty");
    for (const auto& v : videos) {
      if (!video_ids.insert(v.video_id).second) {
        throw CorruptionError("duplicate video id " + std::to_string(v.video_id));
      }
      if (v.faces.empty() || v.voices.empty()) {
        throw CorruptionError("video " + std::to_string(v.video_id) + " has an empty modality");
      }
      if (v.faces.cols() != config.face_dim || v.voices.cols() != config.voice_dim) {
        throw CorruptionError("video " + std::to_string(v.video_id) + " has wrong feature dimensions");
      }
      ids[static_cast<int>(p)].insert(v.identity_id);
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      for (std::uint64_t id : ids[a]) {
        if (ids[b].contains(id)) {
          throw CorruptionError("identity " + std::to_string(id) + " appears in partitions " +
                                partition_name(static_cast<Partition>(a)) + " and " +
                                partition_name(static_cast<Partition>(b)));
        }
      }
    }
  }
}

PartitionSummary summarize(const std::vector<VideoRecord>& videos) {
  PartitionSummary s;
  std::set<std::uint64_t> ids;
  for (const auto& v : videos) {
    ++s.videos;
    s.faces += v.faces.rows();
    s.voices += v.voices.rows();
    ids.insert(v.identity_id);
  }
  s.identities = ids.size();
  return s;
}

}  // namespace faa
