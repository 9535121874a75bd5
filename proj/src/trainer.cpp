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

#include "faa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "faa/rng.hpp"

namespace faa {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train.batch_size: must be >= 2");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay: must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1: must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2: must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps: must be positive");
  if (max_epochs < 1) throw ConfigError("train.max_epochs: must be >= 1");
  if (patience < 1) throw ConfigError("train.patience: must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("train.delta: must lie strictly between 0 and 1");
  mining.validate();
  if (!(contrastive.margin > 0.0)) throw ConfigError("train.contrastive_margin: must be positive");
  if (fixed_clusters < 1) throw ConfigError("train.fixed_clusters: must be >= 1");
  if (min_clusters < 2) throw ConfigError("train.min_clusters: must be >= 2");
  if (hard_negatives_k < 1) throw ConfigError("train.hard_negatives_k: must be >= 1");
  if (num_workers < 1) throw ConfigError("train.num_workers: must be >= 1");
  if (val_pairs < 1) throw ConfigError("train.val_pairs: must be >= 1");
  if (threads < 1) throw ConfigError("train.threads: must be >= 1");
}

// ---- Optimizer ---------------------------------------------------------------

AdamW::AdamW(const ParamStore& params, AdamWConfig config) : config_(config) {
  for (ParamId id = 0; id < params.size(); ++id) {
    m_.emplace_back(params.value(id).shape());
    v_.emplace_back(params.value(id).shape());
  }
}

void AdamW::reset() {
  for (Tensor& t : m_) std::fill(t.data().begin(), t.data().end(), 0.0);
  for (Tensor& t : v_) std::fill(t.data().begin(), t.data().end(), 0.0);
  steps_ = 0;
}

void AdamW::step(ParamStore& params, const std::map<ParamId, Tensor>& grads) {
  if (params.size() != m_.size()) throw ContractError("AdamW: parameter store changed size");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t), c2 = 1.0 - std::pow(config_.beta2, t);
  const double lr = config_.learning_rate, decay = 1.0 - lr * config_.weight_decay;
  for (ParamId id = 0; id < params.size(); ++id) {
    auto it = grads.find(id);
    auto p = params.value(id).data();
    auto m = m_[id].data();
    auto v = v_[id].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = it == grads.end() ? 0.0 : it->second.data()[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      p[i] = p[i] * decay - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

// ---- Global pool ---------------------------------------------------------------

MiningShard gather_global_pool(const std::vector<MiningShard>& shards) {
  std::vector<double> f, v;
  MiningShard out;
  std::size_t fd = 0, vd = 0;
  for (const MiningShard& s : shards) {
    if (s.empty()) continue;
    const std::size_t n = s.labels.size();
    if (s.faces.rank() != 2 || s.voices.rank() != 2 || s.faces.rows() != n || s.voices.rows() != n ||
        s.ids.size() != n)
      throw DimensionError("gather_global_pool: shard rows disagree with its labels");
    if (fd == 0) {
      fd = s.faces.cols();
      vd = s.voices.cols();
    } else if (s.faces.cols() != fd || s.voices.cols() != vd) {
      throw DimensionError("gather_global_pool: shards have different embedding widths");
    }
    f.insert(f.end(), s.faces.data().begin(), s.faces.data().end());
    v.insert(v.end(), s.voices.data().begin(), s.voices.data().end());
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
    out.ids.insert(out.ids.end(), s.ids.begin(), s.ids.end());
  }
  if (out.labels.empty()) throw DegenerateInputError("gather_global_pool: every shard is empty");
  out.faces = Tensor({out.labels.size(), fd}, std::move(f));
  out.voices = Tensor({out.labels.size(), vd}, std::move(v));
  return out;
}

// ---- History -------------------------------------------------------------------

Json to_json(const EpochRecord& r) {
  return Json{{"epoch", r.epoch},
              {"clusters", r.clusters},
              {"loss_alignment", r.loss_alignment},
              {"loss_matching", r.loss_matching},
              {"loss_total", r.loss_total},
              {"val_auc", r.val_auc},
              {"batches", r.batches},
              {"skipped_matching_batches", r.skipped_matching_batches},
              {"matching_positives", r.matching_positives},
              {"matching_negatives", r.matching_negatives},
              {"improved", r.improved},
              {"halved", r.halved}};
}

namespace {

std::string describe_loss(std::size_t epoch, std::size_t batch, double a, double m, double t) {
  std::ostringstream os;
  os << "non-finite loss at epoch " << epoch << ", batch " << batch << " (alignment " << a << ", matching " << m
     << ", total " << t << ")";
  return os.str();
}

}  // namespace

NonFiniteLoss::NonFiniteLoss(std::size_t e, std::size_t b, double a, double m, double t)
    : Error(describe_loss(e, b, a, m, t)), epoch(e), batch(b), alignment(a), matching(m), total(t) {}

Json NonFiniteLoss::diagnostic() const {
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(std::to_string(x)); };
  return Json{{"error", "non_finite_loss"},
              {"epoch", epoch},
              {"batch", batch},
              {"loss_alignment", num(alignment)},
              {"loss_matching", num(matching)},
              {"loss_total", num(total)}};
}

// ---- Training loop -------------------------------------------------------------

double validate(const Model& model, const SampleIndex& val, Scoring scoring, std::size_t pairs, std::uint64_t seed) {
  const TrialList trials =
      build_trials(val, Protocol::kVerification, Direction::kSymmetric, Restriction::kUnrestricted, pairs, seed);
  return verification_auc(trials, *make_scorer(scoring, &model, val));
}

namespace {

enum SeedTag : std::uint64_t { kInit = 1, kCluster = 2, kShuffle = 3, kSample = 4, kNegatives = 5 };

// Random opposite-label partner for every face and every voice in the batch.
std::vector<IndexPair> random_negatives(std::span<const int> labels, Rng& rng) {
  std::set<IndexPair> out;
  const std::size_t n = labels.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> other;
    for (std::size_t j = 0; j < n; ++j)
      if (labels[j] != labels[i]) other.push_back(j);
    if (other.empty()) continue;
    out.emplace(i, other[rng.uniform_index(other.size())]);
    out.emplace(other[rng.uniform_index(other.size())], i);
  }
  return {out.begin(), out.end()};
}

std::vector<IndexPair> hard_negative_pairs(const Tensor& faces, const Tensor& voices, const std::vector<int>& labels,
                                           const TrainConfig& cfg) {
  const std::size_t n = labels.size(), workers = std::min(cfg.num_workers, n);
  std::vector<MiningShard> shards(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * n / workers, end = (w + 1) * n / workers;
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    if (rows.empty()) continue;
    shards[w].faces = take_rows(faces, rows);
    shards[w].voices = take_rows(voices, rows);
    for (std::size_t r : rows) {
      shards[w].labels.push_back(labels[r]);
      shards[w].ids.push_back(r);
    }
  }
  const MiningShard pool = gather_global_pool(shards);
  const HardNegatives hn =
      mine_hard_negatives(pool.faces, pool.voices, pool.labels, pool.labels, cfg.hard_negatives_k, pool.ids, pool.ids);
  std::vector<IndexPair> out;
  for (auto [f, v] : hn.pairs()) out.emplace_back(pool.ids[f], pool.ids[v]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

BatchLoss batch_objective(ad::Tape& tape, const Model& model, const TrainConfig& cfg, const Tensor& face_rows,
                          const Tensor& voice_rows, const std::vector<int>& y, Rng& negative_rng) {
  const std::size_t n = y.size();
  if (face_rows.rows() != n || voice_rows.rows() != n)
    throw DimensionError("batch_objective: " + std::to_string(n) + " labels for " + std::to_string(face_rows.rows()) +
                         " faces and " + std::to_string(voice_rows.rows()) + " voices");
  const EncoderConfig& enc = model.config.encoder;
  ad::Var faces = encode(tape, model.params, enc, Modality::kFace, tape.constant(face_rows));
  ad::Var voices = encode(tape, model.params, enc, Modality::kVoice, tape.constant(voice_rows));
  std::vector<int> both(y);
  both.insert(both.end(), y.begin(), y.end());
  ad::Var joint = ad::concat_rows(faces, voices);
  BatchLoss out;
  out.alignment = cfg.loss == AlignmentLoss::kMultiSimilarity ? ms_loss(joint, both, cfg.mining)
                                                              : contrastive_loss(joint, both, cfg.contrastive);
  out.total = out.alignment;
  if (!cfg.fusion_scoring) return out;
  if (std::all_of(y.begin(), y.end(), [&](int l) { return l == y[0]; })) {
    out.matching_skipped = true;
    return out;
  }
  const std::vector<IndexPair> negatives =
      cfg.pair_selection == PairSelectionMode::kProgressiveHardNegatives
          ? hard_negative_pairs(faces.value(), voices.value(), y, cfg)
          : random_negatives(y, negative_rng);
  std::vector<std::size_t> fi, vi;
  std::vector<int> targets;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (y[i] == y[j]) {
        fi.push_back(i);
        vi.push_back(j);
        targets.push_back(1);
      }
  out.positives = targets.size();
  out.negatives = negatives.size();
  for (auto [f, v] : negatives) {
    fi.push_back(f);
    vi.push_back(v);
    targets.push_back(0);
  }
  ad::Var probs = match_probability(tape, model.params, model.config.fusion, ad::take_rows(faces, fi),
                                    ad::take_rows(voices, vi));
  ad::Var matching = matching_ce_loss(probs, targets);
  out.matching_value = matching.value().item();
  out.total = combined_loss(out.alignment, matching, cfg.delta);
  const double expected = cfg.delta * out.alignment.value().item() + (1.0 - cfg.delta) * out.matching_value;
  if (std::abs(out.total.value().item() - expected) > 1e-12)
    throw ContractError("combined loss drifted from its weighting");
  return out;
}

TrainResult train(const Dataset& data, const ModelConfig& model_config, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  model_config.validate();
  if (model_config.encoder.face_dim != data.config.face_dim || model_config.encoder.voice_dim != data.config.voice_dim)
    throw ConfigError("model.encoder: input dims do not match the dataset (face " +
                      std::to_string(data.config.face_dim) + ", voice " + std::to_string(data.config.voice_dim) + ")");
  std::vector<VideoRecord> videos = data.partition(Partition::kTrain);
  std::sort(videos.begin(), videos.end(),
            [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; });
  const std::size_t n_videos = videos.size();
  const SampleIndex val = index_samples(data.partition(Partition::kVal));
  const Scoring val_scoring = cfg.fusion_scoring ? Scoring::kFusion : Scoring::kCosine;
  const bool progressive = cfg.pair_selection == PairSelectionMode::kProgressiveHardNegatives;

  TrainResult result;
  Model model = init_model(model_config, derive_seed(cfg.seed, {kInit}));
  AdamW opt(model.params,
            {cfg.learning_rate, cfg.weight_decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});

  ProgressState state;
  state.clusters = progressive ? (cfg.initial_clusters ? cfg.initial_clusters : n_videos) : cfg.fixed_clusters;
  if (state.clusters > n_videos)
    throw ConfigError("cluster count " + std::to_string(state.clusters) + " exceeds the " +
                      std::to_string(n_videos) + " training videos");
  state.min_clusters = std::min(cfg.min_clusters, state.clusters);
  result.initial_clusters = state.clusters;
  result.best_val_auc = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.clusters = state.clusters;

    PseudoLabeling labels = assign_pseudo_labels(videos, model.params, model.config.encoder, state.clusters,
                                                 derive_seed(cfg.seed, {kCluster, epoch}), cfg.threads);

    std::vector<std::size_t> order(n_videos);
    std::iota(order.begin(), order.end(), 0);
    Rng(derive_seed(cfg.seed, {kShuffle, epoch})).shuffle(order);

    for (std::size_t start_row = 0, batch = 1; start_row < n_videos; start_row += cfg.batch_size, ++batch) {
      const std::size_t end_row = std::min(n_videos, start_row + cfg.batch_size);
      if (end_row - start_row < 2) continue;
      Rng rng(derive_seed(cfg.seed, {kSample, epoch, batch}));
      std::vector<int> y;
      std::vector<double> fdata, vdata;
      for (std::size_t r = start_row; r < end_row; ++r) {
        const VideoRecord& v = videos[order[r]];
        y.push_back(labels.labels[order[r]]);
        auto face = v.faces.row(rng.uniform_index(v.faces.rows()));
        auto voice = v.voices.row(rng.uniform_index(v.voices.rows()));
        fdata.insert(fdata.end(), face.begin(), face.end());
        vdata.insert(vdata.end(), voice.begin(), voice.end());
      }
      const std::size_t n = y.size();

      ad::Tape tape;
      Rng neg_rng(derive_seed(cfg.seed, {kNegatives, epoch, batch}));
      const BatchLoss loss = batch_objective(tape, model, cfg, Tensor({n, model.config.encoder.face_dim}, std::move(fdata)),
                                             Tensor({n, model.config.encoder.voice_dim}, std::move(vdata)), y, neg_rng);
      ad::Var alignment = loss.alignment, total = loss.total;
      const double matching_value = loss.matching_value;
      if (loss.matching_skipped) ++rec.skipped_matching_batches;
      rec.matching_positives += loss.positives;
      rec.matching_negatives += loss.negatives;

      double total_value = total.value().item();
      if (epoch == cfg.debug_nan_epoch && batch == cfg.debug_nan_batch)
        total_value = std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(total_value) || !std::isfinite(matching_value))
        throw NonFiniteLoss(epoch, batch, alignment.value().item(), matching_value, total_value);

      tape.backward(total);
      opt.step(model.params, tape.param_grads());
      rec.loss_alignment += alignment.value().item();
      rec.loss_matching += matching_value;
      rec.loss_total += total_value;
      ++rec.batches;
    }
    if (rec.batches > 0) {
      const double b = static_cast<double>(rec.batches);
      rec.loss_alignment /= b;
      rec.loss_matching /= b;
      rec.loss_total /= b;
    }

    rec.val_auc = validate(model, val, val_scoring, cfg.val_pairs, cfg.val_seed);
    rec.improved = rec.val_auc > result.best_val_auc;
    if (rec.improved) {
      result.best_val_auc = rec.val_auc;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    if (progressive) {
      const ProgressUpdate up = progressive_step(state, rec.val_auc, cfg.patience);
      state = up.state;
      rec.halved = up.halved;
      if (up.halved && cfg.reset_moments_on_halving) opt.reset();
    } else if (rec.improved) {
      state.best_val_metric = rec.val_auc;
    }

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    result.epoch_seconds.push_back(seconds);
    if (on_epoch) on_epoch(rec, labels, seconds);
    result.final_labels = std::move(labels);
  }
  result.final_state = state;
  return result;
}

// ---- Checkpoints -----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'F', 'A', 'A', 'C'};

void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
  std::uint64_t x;
  std::memcpy(&x, &d, sizeof x);
  put_u64(out, x);
}

void put_entry(std::string& out, const std::string& name, const Shape& shape, std::span<const double> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u64(out, d);
  for (double v : data) put_f64(out, v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  std::uint64_t take(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) throw CorruptionError("checkpoint: truncated");
    std::uint64_t x = 0;
    for (int i = 0; i < width; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return x;
  }
  double f64() {
    const std::uint64_t x = take(8);
    double d;
    std::memcpy(&d, &x, sizeof d);
    return d;
  }
  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CorruptionError("checkpoint: truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::pair<std::string, double>> meta_entries(const Checkpoint& c) {
  const EncoderConfig& e = c.model.config.encoder;
  const FusionConfig& f = c.model.config.fusion;
  auto d = [](std::size_t x) { return static_cast<double>(x); };
  return {{"meta.epoch", d(c.epoch)},
          {"meta.val_metric", c.val_metric},
          {"meta.progress.clusters", d(c.progress.clusters)},
          {"meta.progress.best_val_metric", c.progress.best_val_metric},
          {"meta.progress.epochs_since_improvement", d(c.progress.epochs_since_improvement)},
          {"meta.progress.min_clusters", d(c.progress.min_clusters)},
          {"meta.model.encoder.face_dim", d(e.face_dim)},
          {"meta.model.encoder.voice_dim", d(e.voice_dim)},
          {"meta.model.encoder.hidden", d(e.hidden)},
          {"meta.model.encoder.embed_dim", d(e.embed_dim)},
          {"meta.model.encoder.depth", d(e.depth)},
          {"meta.model.fusion.embed_dim", d(f.embed_dim)},
          {"meta.model.fusion.hidden", d(f.hidden)},
          {"meta.model.fusion.heads", d(f.heads)},
          {"meta.model.fusion.layers", d(f.layers)},
          {"meta.model.fusion.ff_mult", d(f.ff_mult)},
          {"meta.model.fusion.use_cls", f.use_cls ? 1.0 : 0.0},
          {"meta.model.fusion.ln_eps", f.ln_eps}};
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& c) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  const auto meta = meta_entries(c);
  put_u64(out, meta.size() + c.model.params.size());
  for (const auto& [name, value] : meta) put_entry(out, name, {1}, std::span<const double>(&value, 1));
  for (ParamId id = 0; id < c.model.params.size(); ++id) {
    const Tensor& t = c.model.params.value(id);
    put_entry(out, c.model.params.name(id), t.shape(), t.data());
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  Reader r(bytes);
  r.str(4);
  const std::uint64_t version = r.take(4);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t count = r.take(8);
  std::map<std::string, double> meta;
  std::vector<std::pair<std::string, Tensor>> params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.take(4));
    const std::uint64_t rank = r.take(4);
    if (rank == 0 || rank > 8) throw CorruptionError("checkpoint: entry '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      shape.push_back(r.take(8));
      if (shape.back() == 0 || shape.back() > bytes.size()) throw CorruptionError("checkpoint: bad shape for " + name);
      elements *= shape.back();
      if (elements > bytes.size()) throw CorruptionError("checkpoint: entry " + name + " exceeds the file");
    }
    std::vector<double> data(elements);
    for (double& v : data) v = r.f64();
    if (name.rfind("meta.", 0) == 0) {
      if (elements != 1) throw CorruptionError("checkpoint: meta entry " + name + " must be scalar");
      meta[name] = data[0];
    } else {
      try {
        params.emplace_back(name, Tensor(shape, std::move(data)));
      } catch (const DegenerateInputError&) {
        throw CorruptionError("checkpoint: parameter " + name + " holds non-finite values");
      }
    }
  }
  if (!r.done()) throw CorruptionError("checkpoint: trailing bytes");

  auto get = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw CorruptionError("checkpoint: missing " + key);
    return it->second;
  };
  auto count_of = [&](const std::string& key) { return static_cast<std::size_t>(get(key)); };
  Checkpoint c;
  c.epoch = count_of("meta.epoch");
  c.val_metric = get("meta.val_metric");
  c.progress.clusters = count_of("meta.progress.clusters");
  c.progress.best_val_metric = get("meta.progress.best_val_metric");
  c.progress.epochs_since_improvement = count_of("meta.progress.epochs_since_improvement");
  c.progress.min_clusters = count_of("meta.progress.min_clusters");
  ModelConfig& mc = c.model.config;
  mc.encoder.face_dim = count_of("meta.model.encoder.face_dim");
  mc.encoder.voice_dim = count_of("meta.model.encoder.voice_dim");
  mc.encoder.hidden = count_of("meta.model.encoder.hidden");
  mc.encoder.embed_dim = count_of("meta.model.encoder.embed_dim");
  mc.encoder.depth = count_of("meta.model.encoder.depth");
  mc.fusion.embed_dim = count_of("meta.model.fusion.embed_dim");
  mc.fusion.hidden = count_of("meta.model.fusion.hidden");
  mc.fusion.heads = count_of("meta.model.fusion.heads");
  mc.fusion.layers = count_of("meta.model.fusion.layers");
  mc.fusion.ff_mult = count_of("meta.model.fusion.ff_mult");
  mc.fusion.use_cls = get("meta.model.fusion.use_cls") != 0.0;
  mc.fusion.ln_eps = get("meta.model.fusion.ln_eps");
  try {
    mc.validate();
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint: inconsistent model config: ") + e.what());
  }

  // The stored tensors must match the layout the config implies, name for name.
  const Model layout = init_model(mc, 0);
  if (layout.params.size() != params.size())
    throw CorruptionError("checkpoint: expected " + std::to_string(layout.params.size()) + " parameters, found " +
                          std::to_string(params.size()));
  for (ParamId id = 0; id < params.size(); ++id) {
    const auto& [name, value] = params[id];
    if (layout.params.name(id) != name || layout.params.value(id).shape() != value.shape())
      throw CorruptionError("checkpoint: parameter " + name + " does not match the model layout");
    c.model.params.add(name, value);
  }
  return c;
}

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = checkpoint_bytes(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("checkpoint " + path.string() + " cannot be opened");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

// ---- Config serialization --------------------------------------------------------

namespace {

std::string loss_name(AlignmentLoss l) { return l == AlignmentLoss::kMultiSimilarity ? "ms" : "contrastive"; }
std::string selection_name(PairSelectionMode p) {
  return p == PairSelectionMode::kProgressiveHardNegatives ? "progressive_hard_negatives" : "fixed_random_negatives";
}
std::string rule_name(MiningRule r) { return r == MiningRule::kMsOriginal ? "ms_original" : "min_negative"; }

template <typename E>
E parse_enum(const Json& j, const std::string& where, const char* key, E fallback,
             std::initializer_list<std::pair<const char*, E>> options) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (it->is_string()) {
    for (const auto& [name, value] : options)
      if (*it == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) allowed += std::string(allowed.empty() ? "" : ", ") + name;
  throw ConfigError(where + "." + key + ": expected one of " + allowed);
}

}  // namespace

Json to_json(const TrainConfig& c) {
  return Json{{"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"delta", c.delta},
              {"mining",
               {{"epsilon", c.mining.epsilon},
                {"alpha", c.mining.alpha},
                {"beta", c.mining.beta},
                {"lambda", c.mining.lambda},
                {"rule", rule_name(c.mining.rule)},
                {"enabled", c.mining.enabled}}},
              {"contrastive_margin", c.contrastive.margin},
              {"loss", loss_name(c.loss)},
              {"fusion_scoring", c.fusion_scoring},
              {"pair_selection", selection_name(c.pair_selection)},
              {"fixed_clusters", c.fixed_clusters},
              {"initial_clusters", c.initial_clusters},
              {"min_clusters", c.min_clusters},
              {"hard_negatives_k", c.hard_negatives_k},
              {"num_workers", c.num_workers},
              {"reset_moments_on_halving", c.reset_moments_on_halving},
              {"val_pairs", c.val_pairs},
              {"val_seed", c.val_seed},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  using json_detail::read;
  const std::string w = "train";
  json_detail::reject_unknown(
      j, w,
      {"batch_size", "learning_rate", "weight_decay", "adam_beta1", "adam_beta2", "adam_eps", "max_epochs", "patience",
       "delta", "mining", "contrastive_margin", "loss", "fusion_scoring", "pair_selection", "fixed_clusters",
       "initial_clusters", "min_clusters", "hard_negatives_k", "num_workers", "reset_moments_on_halving", "val_pairs",
       "val_seed", "seed"});
  TrainConfig c;
  read(j, w, "batch_size", c.batch_size);
  read(j, w, "learning_rate", c.learning_rate);
  read(j, w, "weight_decay", c.weight_decay);
  read(j, w, "adam_beta1", c.adam_beta1);
  read(j, w, "adam_beta2", c.adam_beta2);
  read(j, w, "adam_eps", c.adam_eps);
  read(j, w, "max_epochs", c.max_epochs);
  read(j, w, "patience", c.patience);
  read(j, w, "delta", c.delta);
  if (auto m = j.find("mining"); m != j.end()) {
    const std::string mw = w + ".mining";
    json_detail::reject_unknown(*m, mw, {"epsilon", "alpha", "beta", "lambda", "rule", "enabled"});
    read(*m, mw, "epsilon", c.mining.epsilon);
    read(*m, mw, "alpha", c.mining.alpha);
    read(*m, mw, "beta", c.mining.beta);
    read(*m, mw, "lambda", c.mining.lambda);
    read(*m, mw, "enabled", c.mining.enabled);
    c.mining.rule = parse_enum(*m, mw, "rule", c.mining.rule,
                               {{"ms_original", MiningRule::kMsOriginal}, {"min_negative", MiningRule::kMinNegative}});
  }
  read(j, w, "contrastive_margin", c.contrastive.margin);
  c.loss = parse_enum(j, w, "loss", c.loss,
                      {{"ms", AlignmentLoss::kMultiSimilarity}, {"contrastive", AlignmentLoss::kContrastive}});
  read(j, w, "fusion_scoring", c.fusion_scoring);
  c.pair_selection = parse_enum(j, w, "pair_selection", c.pair_selection,
                                {{"progressive_hard_negatives", PairSelectionMode::kProgressiveHardNegatives},
                                 {"fixed_random_negatives", PairSelectionMode::kFixedRandomNegatives}});
  read(j, w, "fixed_clusters", c.fixed_clusters);
  read(j, w, "initial_clusters", c.initial_clusters);
  read(j, w, "min_clusters", c.min_clusters);
  read(j, w, "hard_negatives_k", c.hard_negatives_k);
  read(j, w, "num_workers", c.num_workers);
  read(j, w, "reset_moments_on_halving", c.reset_moments_on_halving);
  read(j, w, "val_pairs", c.val_pairs);
  read(j, w, "val_seed", c.val_seed);
  read(j, w, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const ModelConfig& c) {
  return Json{{"encoder",
               {{"face_dim", c.encoder.face_dim},
                {"voice_dim", c.encoder.voice_dim},
                {"hidden", c.encoder.hidden},
                {"embed_dim", c.encoder.embed_dim},
                {"depth", c.encoder.depth}}},
              {"fusion",
               {{"embed_dim", c.fusion.embed_dim},
                {"hidden", c.fusion.hidden},
                {"heads", c.fusion.heads},
                {"layers", c.fusion.layers},
                {"ff_mult", c.fusion.ff_mult},
                {"use_cls", c.fusion.use_cls},
                {"ln_eps", c.fusion.ln_eps}}}};
}

ModelConfig model_config_from_json(const Json& j) {
  using json_detail::read;
  json_detail::reject_unknown(j, "model", {"encoder", "fusion"});
  ModelConfig c;
  if (auto e = j.find("encoder"); e != j.end()) {
    json_detail::reject_unknown(*e, "model.encoder", {"face_dim", "voice_dim", "hidden", "embed_dim", "depth"});
    read(*e, "model.encoder", "face_dim", c.encoder.face_dim);
    read(*e, "model.encoder", "voice_dim", c.encoder.voice_dim);
    read(*e, "model.encoder", "hidden", c.encoder.hidden);
    read(*e, "model.encoder", "embed_dim", c.encoder.embed_dim);
    read(*e, "model.encoder", "depth", c.encoder.depth);
  }
  if (auto f = j.find("fusion"); f != j.end()) {
    json_detail::reject_unknown(*f, "model.fusion",
                                {"embed_dim", "hidden", "heads", "layers", "ff_mult", "use_cls", "ln_eps"});
    read(*f, "model.fusion", "embed_dim", c.fusion.embed_dim);
    read(*f, "model.fusion", "hidden", c.fusion.hidden);
    read(*f, "model.fusion", "heads", c.fusion.heads);
    read(*f, "model.fusion", "layers", c.fusion.layers);
    read(*f, "model.fusion", "ff_mult", c.fusion.ff_mult);
    read(*f, "model.fusion", "use_cls", c.fusion.use_cls);
    read(*f, "model.fusion", "ln_eps", c.fusion.ln_eps);
  }
  c.validate();
  return c;
}

}  // namespace faa
