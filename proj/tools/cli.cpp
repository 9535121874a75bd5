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

#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "faa/autodiff.hpp"
#include "faa/evalsuite.hpp"
#include "faa/pipeline.hpp"
#include "faa/selftest.hpp"
#include "faa/synthworld.hpp"
#include "faa/trainer.hpp"

namespace faa::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// Refuses to write into a non-empty directory unless forced.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw ConfigError(dir.string() + " is not empty (use --force to overwrite)");
  fs::create_directories(dir);
}

std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("FAA_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0) throw ConfigError("FAA_THREADS: expected a positive integer");
    return v;
  }
  return 1;
}

// The dataset carries its own world; encoder input widths follow it.
ModelConfig model_for(const Dataset& data, ModelConfig m) {
  m.encoder.face_dim = data.config.face_dim;
  m.encoder.voice_dim = data.config.voice_dim;
  m.validate();
  return m;
}

void print_summary(const Dataset& data, std::ostream& out) {
  out << std::left << std::setw(10) << "partition" << std::right << std::setw(12) << "identities" << std::setw(10)
      << "videos" << std::setw(10) << "faces" << std::setw(10) << "voices" << "\n";
  for (Partition p : kAllPartitions) {
    const PartitionSummary s = summarize(data.partition(p));
    out << std::left << std::setw(10) << partition_name(p) << std::right << std::setw(12) << s.identities
        << std::setw(10) << s.videos << std::setw(10) << s.faces << std::setw(10) << s.voices << "\n";
  }
}

Scoring parse_scoring(const std::string& s) {
  if (s == "fusion") return Scoring::kFusion;
  if (s == "cosine") return Scoring::kCosine;
  if (s == "oracle") return Scoring::kOracle;
  throw ConfigError("--scoring: expected fusion, cosine or oracle");
}

struct GenDataArgs {
  std::string config, out;
  bool force = false;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  prepare_out_dir(a.out, a.force);
  const Dataset data = generate_world(cfg.world);
  write_dataset(data, a.out);
  print_summary(data, out);
  return kExitOk;
}

struct TrainArgs {
  std::string data, config, out;
  std::int64_t seed = -1;
  std::size_t threads = 0;
  std::size_t nan_epoch = 0, nan_batch = 1;
  bool dump_clusters = false, force = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(a.config);
  if (!fs::is_directory(a.data)) throw ConfigError("--data: dataset directory " + a.data + " not found");
  const Dataset data = read_dataset(a.data);
  cfg.model = model_for(data, cfg.model);
  cfg.world = data.config;
  if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  cfg.train.threads = resolve_threads(a.threads);
  cfg.train.debug_nan_epoch = a.nan_epoch;
  cfg.train.debug_nan_batch = a.nan_batch;
  prepare_out_dir(a.out, a.force);
  const fs::path dir(a.out);
  write_file(dir / "config.json", to_json(cfg).dump(2) + "\n");

  std::ofstream history(dir / "history.jsonl"), timing(dir / "timing.jsonl");
  const EpochCallback on_epoch = [&](const EpochRecord& rec, const PseudoLabeling& labels, double seconds) {
    history << to_json(rec).dump() << "\n" << std::flush;
    timing << Json{{"epoch", rec.epoch}, {"seconds", seconds}}.dump() << "\n" << std::flush;
    out << "epoch " << rec.epoch << "  C=" << rec.clusters << "  loss=" << rec.loss_total
        << "  val_auc=" << rec.val_auc << (rec.halved ? "  (halved)" : "") << "\n";
    if (a.dump_clusters) {
      Json j = {{"epoch", rec.epoch}, {"clusters", labels.num_clusters}, {"video_ids", labels.video_ids},
                {"labels", labels.labels}};
      write_file(dir / ("clusters_epoch" + std::to_string(rec.epoch) + ".json"), j.dump() + "\n");
    }
  };

  TrainResult result;
  try {
    result = train(data, cfg.model, cfg.train, on_epoch);
  } catch (const NonFiniteLoss& e) {
    write_file(dir / "diagnostic.json", e.diagnostic().dump(2) + "\n");
    err << "error: " << e.what() << "\n" << e.diagnostic().dump() << "\n";
    return kExitNonFinite;
  }

  Checkpoint ck{result.best_model, result.best_epoch, result.best_val_auc, result.final_state};
  const std::string bytes = checkpoint_bytes(ck);
  write_file(dir / "checkpoint.faac", bytes);
  const Json summary = {{"best_epoch", result.best_epoch},
                        {"best_val_auc", result.best_val_auc},
                        {"initial_clusters", result.initial_clusters},
                        {"final_clusters", result.final_state.clusters},
                        {"epochs", result.history.size()},
                        {"seed", cfg.train.seed},
                        {"config_hash", config_hash(cfg)},
                        {"checkpoint_hash", fnv1a_hex(bytes)}};
  write_file(dir / "train_summary.json", summary.dump(2) + "\n");
  out << "best epoch " << result.best_epoch << " (val AUC " << result.best_val_auc << "), final C "
      << result.final_state.clusters << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model, data, config, out, protocols = "all", scoring, partition = "test";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = load_config(a.config);
  if (!fs::is_directory(a.data)) throw ConfigError("--data: dataset directory " + a.data + " not found");
  const Scoring scoring = a.scoring.empty() ? (cfg.train.fusion_scoring ? Scoring::kFusion : Scoring::kCosine)
                                            : parse_scoring(a.scoring);
  std::optional<Model> model;
  std::string ck_hash;
  if (scoring != Scoring::kOracle || !a.model.empty()) {
    if (a.model.empty()) throw ConfigError("--model is required unless --scoring oracle");
    const std::string bytes = read_file(a.model);
    model = parse_checkpoint(bytes).model;
    ck_hash = fnv1a_hex(bytes);
  }
  const Dataset data = read_dataset(a.data);
  if (model && (model->config.encoder.face_dim != data.config.face_dim ||
                model->config.encoder.voice_dim != data.config.voice_dim))
    throw FormatError("checkpoint input dims do not match the dataset");

  EvalConfig ec = cfg.eval;
  if (a.protocols != "all") {
    ec.verification = a.protocols == "veri";
    ec.matching = a.protocols == "match";
    ec.retrieval = a.protocols == "retr";
  }
  Partition part = Partition::kTest;
  if (a.partition == "val") part = Partition::kVal;
  EvalReport report = evaluate(model ? &*model : nullptr, index_samples(data.partition(part)), ec, scoring);
  report.config_hash = fnv1a_hex(Json{{"eval", to_json(ec)}, {"scoring", scoring_name(scoring)},
                                      {"partition", a.partition}, {"world", to_json(data.config)}}
                                     .dump());
  report.checkpoint_hash = ck_hash;
  const std::string text = to_json(report).dump(2) + "\n";
  if (!a.out.empty()) {
    const fs::path p(a.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, text);
  }
  out << text;
  return kExitOk;
}

struct AblateArgs {
  std::string data, config, out;
  std::int64_t seed = -1;
  std::size_t threads = 0;
  bool force = false;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (!fs::is_directory(a.data)) throw ConfigError("--data: dataset directory " + a.data + " not found");
  const Dataset data = read_dataset(a.data);
  cfg.model = model_for(data, cfg.model);
  cfg.world = data.config;
  if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
  cfg.train.threads = resolve_threads(a.threads);
  prepare_out_dir(a.out, a.force);

  std::vector<AblationRow> rows;
  Json jrows = Json::array();
  for (const AblationSetting& s : ablation_grid()) {
    out << "running " << s.label() << "\n" << std::flush;
    rows.push_back(run_ablation_row(data, cfg, s));
    jrows.push_back(to_json(rows.back()));
  }
  Json trends = Json::array();
  for (const TrendCheck& t : ablation_trends(rows))
    trends.push_back({{"name", t.name}, {"holds", t.holds}, {"detail", t.detail}});
  const Json result = {{"format", "faa-ablation"}, {"version", 1},        {"seed", cfg.train.seed},
                       {"config_hash", config_hash(cfg)}, {"rows", jrows}, {"trends", trends}};
  const std::string md = ablation_markdown(rows);
  write_file(fs::path(a.out) / "ablation.json", result.dump(2) + "\n");
  write_file(fs::path(a.out) / "ablation.md", md);
  out << md;
  for (const auto& t : trends) out << (t["holds"] ? "holds   " : "differs ") << t["name"].get<std::string>() << "\n";
  return kExitOk;
}

struct SelftestArgs {
  std::string fault, out;
  std::uint64_t seed = 1;
};

int cmd_selftest(const SelftestArgs& a, std::ostream& out) {
  if (!a.fault.empty()) ad::set_gradient_fault(a.fault);
  SelftestOptions opt;
  opt.seed = a.seed;
  const SelftestReport r = run_selftest(opt);
  ad::clear_gradient_fault();
  for (const auto& c : r.checks) out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
  if (!a.out.empty()) write_file(a.out, to_json(r).dump(2) + "\n");
  const auto failed = r.failures();
  out << (failed.empty() ? "selftest passed" : "selftest failed: " + std::to_string(failed.size()) + " check(s)")
      << "\n";
  return failed.empty() ? kExitOk : kExitError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Face-voice association lab: synthetic data, training, evaluation and ablations."};
  app.name(args.empty() ? "faa" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
  g->add_option("--config", gen.config, "Run configuration (JSON); defaults when omitted");
  g->add_option("--out", gen.out, "Output dataset directory")->required();
  g->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train on a dataset and keep the best checkpoint");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--config", tr.config, "Run configuration (JSON)");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--seed", tr.seed, "Training seed (overrides train.seed)");
  t->add_option("--threads", tr.threads, "Worker threads for clustering (default FAA_THREADS or 1)");
  t->add_flag("--dump-clusters", tr.dump_clusters, "Write clusters_epoch<p>.json every epoch");
  t->add_flag("--force", tr.force, "Overwrite a non-empty output directory");
  t->add_option("--debug-nan-epoch", tr.nan_epoch, "Inject a NaN loss at this epoch (debug)");
  t->add_option("--debug-nan-batch", tr.nan_batch, "Batch for --debug-nan-epoch");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint and write report.json");
  e->add_option("--model", ev.model, "Checkpoint file");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--config", ev.config, "Run configuration (JSON)");
  e->add_option("--protocols", ev.protocols, "all | veri | match | retr")
      ->check(CLI::IsMember({"all", "veri", "match", "retr"}));
  e->add_option("--scoring", ev.scoring, "fusion | cosine | oracle (default from train.fusion_scoring)")
      ->check(CLI::IsMember({"fusion", "cosine", "oracle"}));
  e->add_option("--partition", ev.partition, "test | val")->check(CLI::IsMember({"test", "val"}));
  e->add_option("--out", ev.out, "Report path");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Run the six-row ablation grid");
  b->add_option("--data", ab.data, "Dataset directory")->required();
  b->add_option("--config", ab.config, "Run configuration (JSON)");
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--seed", ab.seed, "Training seed (overrides train.seed)");
  b->add_option("--threads", ab.threads, "Worker threads (default FAA_THREADS or 1)");
  b->add_flag("--force", ab.force, "Overwrite a non-empty output directory");

  SelftestArgs st;
  auto* s = app.add_subcommand("selftest", "Gradient checks, metric and loss oracles, shard equivalence");
  s->add_option("--inject-fault", st.fault, "Perturb the backward pass of this op (debug)");
  s->add_option("--seed", st.seed, "Seed for random test inputs");
  s->add_option("--out", st.out, "Write the check list as JSON");

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (*g) return cmd_gen_data(gen, out);
    if (*t) return cmd_train(tr, out, err);
    if (*e) return cmd_eval(ev, out);
    if (*b) return cmd_ablate(ab, out);
    if (*s) return cmd_selftest(st, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace faa::cli
