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

#include "faa/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "faa/errors.hpp"
#include "faa/rng.hpp"

namespace faa {

Tensor pool_embeddings(const Tensor& faces, const Tensor& voices) {
  if (faces.rank() != 2 || voices.rank() != 2) throw DimensionError("pool_embeddings: expected matrices");
  const std::size_t df = faces.cols(), dv = voices.cols();
  Tensor out({df + dv});
  for (std::size_t r = 0; r < faces.rows(); ++r)
    for (std::size_t c = 0; c < df; ++c) out.data()[c] += faces.at(r, c);
  for (std::size_t r = 0; r < voices.rows(); ++r)
    for (std::size_t c = 0; c < dv; ++c) out.data()[df + c] += voices.at(r, c);
  for (std::size_t c = 0; c < df; ++c) out.data()[c] /= static_cast<double>(faces.rows());
  for (std::size_t c = 0; c < dv; ++c) out.data()[df + c] /= static_cast<double>(voices.rows());
  return out;
}

namespace {

void require_both_modalities(const VideoRecord& v) {
  if (v.faces.size() == 0 || v.voices.size() == 0)
    throw DegenerateInputError("pool_video: video " + std::to_string(v.video_id) + " lacks a modality");
}

Tensor stack(std::span<const VideoRecord> videos, bool faces) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  for (const VideoRecord& v : videos) {
    const Tensor& t = faces ? v.faces : v.voices;
    cols = t.cols();
    rows += t.rows();
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor({rows, cols}, std::move(data));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid per point, lowest index on ties. Each point is handled
// independently, so splitting the range across threads changes nothing.
void assign_nearest(const Tensor& points, const Tensor& centroids, std::vector<std::size_t>& assign,
                    std::vector<double>& dist, std::size_t threads) {
  const std::size_t n = points.rows();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points.row(i), centroids.row(0));
      for (std::size_t c = 1; c < centroids.rows(); ++c) {
        const double d = squared_distance(points.row(i), centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      dist[i] = best_d;
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n / 64));
  if (threads == 1) {
    work(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk, end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
}

Tensor seed_centroids(const Tensor& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), d = points.cols();
  Tensor centroids({k, d});
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    chosen[pick] = true;
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
      if (!chosen[i]) total += d2[i];
    }
    if (total <= 0.0) {
      // Every remaining point duplicates a centroid.
      pick = 0;
      while (chosen[pick]) ++pick;
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    pick = n;
    std::size_t last = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i] || d2[i] <= 0.0) continue;
      last = i;
      acc += d2[i];
      if (acc > target) {
        pick = i;
        break;
      }
    }
    if (pick == n) pick = last;
  }
  return centroids;
}

}  // namespace

VideoEmbedding pool_video(const VideoRecord& video, const ParamStore& params, const EncoderConfig& encoder) {
  require_both_modalities(video);
  return {video.video_id, pool_embeddings(encode(params, encoder, Modality::kFace, video.faces),
                                          encode(params, encoder, Modality::kVoice, video.voices))};
}

Tensor pool_videos(std::span<const VideoRecord> videos, const ParamStore& params, const EncoderConfig& encoder) {
  if (videos.empty()) throw DegenerateInputError("pool_videos: no videos");
  for (const VideoRecord& v : videos) require_both_modalities(v);
  const Tensor faces = encode(params, encoder, Modality::kFace, stack(videos, true));
  const Tensor voices = encode(params, encoder, Modality::kVoice, stack(videos, false));
  const std::size_t d = encoder.embed_dim;
  Tensor out({videos.size(), 2 * d});
  std::size_t fr = 0, vr = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const std::size_t nf = videos[i].faces.rows(), nv = videos[i].voices.rows();
    std::vector<std::size_t> fi(nf), vi(nv);
    std::iota(fi.begin(), fi.end(), fr);
    std::iota(vi.begin(), vi.end(), vr);
    fr += nf;
    vr += nv;
    const Tensor pooled = pool_embeddings(take_rows(faces, fi), take_rows(voices, vi));
    std::copy(pooled.data().begin(), pooled.data().end(), out.row(i).begin());
  }
  return out;
}

KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t max_iterations,
                    std::size_t threads) {
  if (points.rank() != 2) throw DimensionError("kmeans: points must be a matrix");
  const std::size_t n = points.rows(), d = points.cols();
  if (k < 1 || k > n)
    throw ConfigError("kmeans: cluster count " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  if (!points.all_finite()) throw DegenerateInputError("kmeans: non-finite point");

  Rng rng(seed);
  KMeansResult res;
  res.centroids = seed_centroids(points, k, rng);
  res.assignments.assign(n, k);
  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  double previous = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < max_iterations; ++it) {
    assign_nearest(points, res.centroids, assign, dist, threads);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t c : assign) ++counts[c];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (counts[assign[i]] >= 2 && (far == n || dist[i] > dist[far])) far = i;
      --counts[assign[far]];
      assign[far] = c;
      dist[far] = 0.0;
      counts[c] = 1;
    }

    const bool converged = assign == res.assignments;
    res.assignments = assign;
    ++res.iterations;

    Tensor sums({k, d});
    for (std::size_t i = 0; i < n; ++i) {
      auto row = sums.row(assign[i]);
      auto p = points.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += p[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto row = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) row[j] /= static_cast<double>(counts[c]);
    }
    res.centroids = std::move(sums);

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(points.row(i), res.centroids.row(assign[i]));
    if (inertia > previous * (1.0 + 1e-12) + 1e-300)
      throw ContractError("kmeans: inertia increased from " + std::to_string(previous) + " to " +
                          std::to_string(inertia));
    res.inertia_trace.push_back(inertia);
    res.inertia = inertia;
    previous = inertia;
    if (converged) break;
  }
  return res;
}

int PseudoLabeling::label_of(std::uint64_t video_id) const {
  auto it = std::lower_bound(video_ids.begin(), video_ids.end(), video_id);
  if (it == video_ids.end() || *it != video_id)
    throw ContractError("pseudo-labeling has no video " + std::to_string(video_id));
  return labels[static_cast<std::size_t>(it - video_ids.begin())];
}

PseudoLabeling assign_pseudo_labels(std::span<const VideoRecord> videos, const ParamStore& params,
                                    const EncoderConfig& encoder, std::size_t clusters, std::uint64_t seed,
                                    std::size_t threads) {
  std::vector<VideoRecord> sorted(videos.begin(), videos.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; });
  const KMeansResult km = kmeans(pool_videos(sorted, params, encoder), clusters, seed, 100, threads);

  PseudoLabeling out;
  std::vector<int> remap(clusters, -1);
  int next = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    int& label = remap[km.assignments[i]];
    if (label < 0) label = next++;
    out.video_ids.push_back(sorted[i].video_id);
    out.labels.push_back(label);
  }
  out.num_clusters = static_cast<std::size_t>(next);
  return out;
}

ProgressUpdate progressive_step(const ProgressState& state, double val_metric, std::size_t patience) {
  if (patience < 1) throw ConfigError("patience: must be >= 1");
  ProgressUpdate up{state, false};
  ProgressState& s = up.state;
  if (val_metric > s.best_val_metric) {
    s.best_val_metric = val_metric;
    s.epochs_since_improvement = 0;
    return up;
  }
  if (++s.epochs_since_improvement >= patience) {
    s.epochs_since_improvement = 0;
    const std::size_t next = std::max(s.min_clusters, s.clusters / 2);
    up.halved = next != s.clusters;
    s.clusters = next;
  }
  return up;
}

double normalized_mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DimensionError("normalized_mutual_information: label lengths differ");
  if (a.empty()) throw DegenerateInputError("normalized_mutual_information: empty labelings");
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    joint[{a[i], b[i]}] += 1;
  }
  auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [label, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(ca), hb = entropy(cb);
  if (ha + hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) mi += (c / n) * std::log(c * n / (ca[key.first] * cb[key.second]));
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

}  // namespace faa
