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

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "faa/encoders.hpp"
#include "faa/params.hpp"
#include "faa/synthworld.hpp"
#include "faa/tensor.hpp"

namespace faa {

struct VideoEmbedding {
  std::uint64_t video_id = 0;
  Tensor vector;  // [2 * embed_dim]: mean face embedding, then mean voice embedding
};

// Mean of the face rows concatenated with the mean of the voice rows.
Tensor pool_embeddings(const Tensor& face_embeddings, const Tensor& voice_embeddings);

VideoEmbedding pool_video(const VideoRecord& video, const ParamStore& params, const EncoderConfig& encoder);

// Pools every video in one encoder pass per modality. Row i belongs to videos[i].
Tensor pool_videos(std::span<const VideoRecord> videos, const ParamStore& params, const EncoderConfig& encoder);

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Tensor centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after each Lloyd iteration; non-increasing.
  std::vector<double> inertia_trace;
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing or `max_iterations` is hit. Ties go to the lowest centroid index;
// an emptied cluster takes the point farthest from its own centroid.
// `threads` > 1 splits the assignment step across points with identical
// results.
KMeansResult kmeans(const Tensor& points, std::size_t clusters, std::uint64_t seed, std::size_t max_iterations = 100,
                    std::size_t threads = 1);

struct PseudoLabeling {
  std::vector<std::uint64_t> video_ids;  // ascending
  std::vector<int> labels;               // dense in [0, num_clusters)
  std::size_t num_clusters = 0;
  std::size_t epoch = 0;

  // Throws ContractError for an unknown video.
  int label_of(std::uint64_t video_id) const;
};

// Videos are processed in video-id order, so the result does not depend on
// how the caller enumerates them. Labels are renumbered by first appearance.
PseudoLabeling assign_pseudo_labels(std::span<const VideoRecord> videos, const ParamStore& params,
                                    const EncoderConfig& encoder, std::size_t clusters, std::uint64_t seed,
                                    std::size_t threads = 1);

struct ProgressState {
  std::size_t clusters = 2;
  double best_val_metric = -std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;
  std::size_t min_clusters = 2;

  friend bool operator==(const ProgressState&, const ProgressState&) = default;
};

struct ProgressUpdate {
  ProgressState state;
  bool halved = false;
};

// Halves the cluster count (floored at min_clusters) once `patience`
// consecutive validations fail to beat the best metric.
ProgressUpdate progressive_step(const ProgressState& state, double val_metric, std::size_t patience);

// Normalized mutual information, 2 I(a;b) / (H(a) + H(b)); 1 when both
// labelings are a single cluster.
double normalized_mutual_information(std::span<const int> a, std::span<const int> b);

}  // namespace faa
