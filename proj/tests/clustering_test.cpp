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

#include <algorithm>
#include <cmath>
#include <limits>

#include "faa/clustering.hpp"
#include "faa/errors.hpp"
#include "faa/model.hpp"
#include "faa/rng.hpp"
#include "gtest/gtest.h"

namespace faa {
namespace {

// Plain Lloyd from uniformly chosen distinct starting points.
double reference_lloyd_inertia(const Tensor& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::vector<double>> cent(k);
  for (std::size_t c = 0; c < k; ++c) cent[c].assign(x.row(idx[c]).begin(), x.row(idx[c]).end());
  std::vector<std::size_t> a(n);
  double inertia = 0.0;
  for (int it = 0; it < 300; ++it) {
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (x.at(i, j) - cent[c][j]) * (x.at(i, j) - cent[c][j]);
        if (s < best) {
          best = s;
          a[i] = c;
        }
      }
      inertia += best;
    }
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> sum(d, 0.0);
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (a[i] == c) {
          ++cnt;
          for (std::size_t j = 0; j < d; ++j) sum[j] += x.at(i, j);
        }
      if (cnt == 0) continue;
      for (std::size_t j = 0; j < d; ++j) cent[c][j] = sum[j] / static_cast<double>(cnt);
    }
  }
  return inertia;
}

Tensor random_points(Rng& rng, std::size_t n, std::size_t d) {
  Tensor t({n, d});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

TEST(Pooling, AveragesEachModalityThenConcatenates) {
  const Tensor pooled = pool_embeddings(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{2, 2}}));
  EXPECT_EQ(pooled, Tensor::vector({0.5, 0.5, 2, 2}));
  EXPECT_EQ(pool_embeddings(Tensor::matrix({{3, 4}}), Tensor::matrix({{5, 6}})), Tensor::vector({3, 4, 5, 6}));
  EXPECT_EQ(pool_embeddings(Tensor::matrix({{0, 1}, {1, 0}}), Tensor::matrix({{2, 2}})), pooled);
}

TEST(Pooling, BatchedPoolingMatchesPerVideo) {
  const Dataset world = generate_world(WorldConfig{});
  const Model model = init_model(ModelConfig{}, 3);
  const auto& train = world.partition(Partition::kTrain);
  const std::span<const VideoRecord> head(train.data(), 10);
  const Tensor batched = pool_videos(head, model.params, model.config.encoder);
  for (std::size_t i = 0; i < head.size(); ++i) {
    const VideoEmbedding single = pool_video(head[i], model.params, model.config.encoder);
    EXPECT_EQ(single.video_id, head[i].video_id);
    for (std::size_t j = 0; j < batched.cols(); ++j) EXPECT_NEAR(batched.at(i, j), single.vector.data()[j], 1e-14);
  }
}

TEST(KMeans, SeparatesWellSeparatedClusters) {
  const Tensor x = Tensor::matrix({{0, 0}, {0.1, 0}, {10, 10}, {10.1, 10}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const KMeansResult r = kmeans(x, 2, seed);
    EXPECT_EQ(r.assignments[0], r.assignments[1]);
    EXPECT_EQ(r.assignments[2], r.assignments[3]);
    EXPECT_NE(r.assignments[0], r.assignments[2]);
  }
}

TEST(KMeans, OneClusterPerPointHasZeroInertia) {
  Rng rng(1);
  const Tensor x = random_points(rng, 30, 4);
  const KMeansResult r = kmeans(x, 30, 5);
  EXPECT_EQ(r.inertia, 0.0);
  std::vector<std::size_t> a = r.assignments;
  std::sort(a.begin(), a.end());
  EXPECT_EQ(std::unique(a.begin(), a.end()), a.end());
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  const Tensor x = Tensor::matrix({{1, 1}, {1, 1}, {1, 1}, {2, 2}});
  const KMeansResult r = kmeans(x, 3, 0);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t a : r.assignments) ++counts[a];
  for (std::size_t c : counts) EXPECT_GE(c, 1u);
  EXPECT_EQ(r.inertia, 0.0);
}

TEST(KMeans, CloseToBestOfManyRestarts) {
  Rng rng(2);
  const Tensor x = random_points(rng, 200, 8);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < 20; ++r) best = std::min(best, reference_lloyd_inertia(x, 5, rng));
  EXPECT_LE(kmeans(x, 5, 11).inertia, best * 1.05);
}

TEST(KMeans, InertiaNeverIncreases) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const KMeansResult r = kmeans(random_points(rng, 120, 3), 7, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
      EXPECT_LE(r.inertia_trace[i], r.inertia_trace[i - 1] * (1 + 1e-12));
  }
}

TEST(KMeans, DeterministicAndThreadCountIndependent) {
  Rng rng(4);
  const Tensor x = random_points(rng, 500, 6);
  const KMeansResult a = kmeans(x, 9, 77), b = kmeans(x, 9, 77), c = kmeans(x, 9, 77, 100, 4);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignments, c.assignments);
  EXPECT_EQ(a.centroids, c.centroids);
  EXPECT_EQ(a.inertia, c.inertia);
}

TEST(KMeans, RejectsBadInputs) {
  EXPECT_THROW(kmeans(Tensor({3, 2}), 4, 0), ConfigError);
  EXPECT_THROW(kmeans(Tensor({3, 2}), 0, 0), ConfigError);
}

TEST(PseudoLabels, OneClusterPerVideo) {
  const Dataset world = generate_world(WorldConfig{});
  const Model model = init_model(ModelConfig{}, 1);
  const auto& train = world.partition(Partition::kTrain);
  const PseudoLabeling pl = assign_pseudo_labels(train, model.params, model.config.encoder, train.size(), 3);
  EXPECT_EQ(pl.num_clusters, train.size());
  std::vector<int> sorted = pl.labels;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], static_cast<int>(i));
}

TEST(PseudoLabels, NoiselessWorldRecoversIdentities) {
  WorldConfig cfg;
  cfg.noise_std = 0.0;
  cfg.cross_modal_strength = 1.0;
  const Dataset world = generate_world(cfg);
  const Model model = init_model(ModelConfig{}, 2);
  const auto& train = world.partition(Partition::kTrain);
  const PseudoLabeling pl =
      assign_pseudo_labels(train, model.params, model.config.encoder, cfg.partition_sizes()[0], 4);
  std::vector<int> truth;
  for (std::uint64_t id : pl.video_ids) {
    auto it = std::find_if(train.begin(), train.end(), [id](const VideoRecord& v) { return v.video_id == id; });
    truth.push_back(static_cast<int>(it->identity_id));
  }
  EXPECT_DOUBLE_EQ(normalized_mutual_information(pl.labels, truth), 1.0);
}

TEST(PseudoLabels, IdenticalVideosShareALabel) {
  const Dataset world = generate_world(WorldConfig{});
  const Model model = init_model(ModelConfig{}, 5);
  std::vector<VideoRecord> videos(world.partition(Partition::kTrain).begin(),
                                  world.partition(Partition::kTrain).begin() + 20);
  VideoRecord twin = videos[3];
  twin.video_id = 100000;
  videos.push_back(twin);
  for (std::size_t c : {2u, 5u, 10u, 20u}) {
    const PseudoLabeling pl = assign_pseudo_labels(videos, model.params, model.config.encoder, c, 6);
    EXPECT_EQ(pl.label_of(videos[3].video_id), pl.label_of(100000));
  }
}

TEST(PseudoLabels, EnumerationOrderDoesNotMatter) {
  const Dataset world = generate_world(WorldConfig{});
  const Model model = init_model(ModelConfig{}, 7);
  std::vector<VideoRecord> videos = world.partition(Partition::kTrain);
  const PseudoLabeling a = assign_pseudo_labels(videos, model.params, model.config.encoder, 32, 8);
  Rng rng(9);
  rng.shuffle(videos);
  const PseudoLabeling b = assign_pseudo_labels(videos, model.params, model.config.encoder, 32, 8);
  EXPECT_EQ(a.video_ids, b.video_ids);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_THROW(a.label_of(999999), ContractError);
}

TEST(Progress, HalvesAfterPatienceRunsOut) {
  ProgressState s;
  s.clusters = 1024;
  s.best_val_metric = 0.8;
  s.epochs_since_improvement = 2;
  const ProgressUpdate up = progressive_step(s, 0.7, 3);
  EXPECT_TRUE(up.halved);
  EXPECT_EQ(up.state.clusters, 512u);
  EXPECT_EQ(up.state.epochs_since_improvement, 0u);
}

TEST(Progress, ImprovementResetsCounter) {
  ProgressState s;
  s.clusters = 64;
  s.best_val_metric = 0.8;
  s.epochs_since_improvement = 2;
  const ProgressUpdate up = progressive_step(s, 0.81, 3);
  EXPECT_FALSE(up.halved);
  EXPECT_EQ(up.state.clusters, 64u);
  EXPECT_EQ(up.state.epochs_since_improvement, 0u);
  EXPECT_EQ(up.state.best_val_metric, 0.81);
}

TEST(Progress, FloorsAtMinimum) {
  ProgressState s;
  s.clusters = 2;
  s.best_val_metric = 1.0;
  s.epochs_since_improvement = 2;
  const ProgressUpdate up = progressive_step(s, 0.5, 3);
  EXPECT_FALSE(up.halved);
  EXPECT_EQ(up.state.clusters, 2u);
  EXPECT_THROW(progressive_step(s, 0.5, 0), ConfigError);
}

TEST(Progress, ClusterCountIsMonotoneAndHalvingsBounded) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    ProgressState s;
    s.clusters = 256;
    std::size_t halvings = 0, prev = s.clusters;
    for (int epoch = 0; epoch < 200; ++epoch) {
      const ProgressUpdate up = progressive_step(s, rng.uniform(), 1 + rng.uniform_index(3));
      halvings += up.halved;
      EXPECT_LE(up.state.clusters, prev);
      prev = up.state.clusters;
      s = up.state;
    }
    EXPECT_LE(halvings, 7u);  // log2(256 / 2)
  }
}

TEST(Nmi, HandValues) {
  const std::vector<int> a = {0, 0, 1, 1}, relabeled = {5, 5, 2, 2}, crossed = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(normalized_mutual_information(a, relabeled), 1.0);
  EXPECT_NEAR(normalized_mutual_information(a, crossed), 0.0, 1e-15);
  EXPECT_NEAR(normalized_mutual_information(std::vector<int>{0, 0, 1}, std::vector<int>{0, 0, 0}), 0.0, 1e-15);
  // a = {0,0,1,1}, b = {0,0,0,1}: I = 1.5 ln2 - 0.75 ln3, H(a) = ln2, H(b) = 2 ln2 - 0.75 ln3.
  const double l2 = std::log(2.0), l3 = std::log(3.0);
  EXPECT_NEAR(normalized_mutual_information(a, std::vector<int>{0, 0, 0, 1}),
              2 * (1.5 * l2 - 0.75 * l3) / (l2 + 2 * l2 - 0.75 * l3), 1e-14);
}

}  // namespace
}  // namespace faa
