// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cunet/config.hpp"
#include "cunet/errors.hpp"
#include "cunet/evaluation.hpp"
#include "cunet/model.hpp"
#include "cunet/training.hpp"

namespace fs = std::filesystem;
using namespace cunet;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> film;
  std::optional<std::string> embedding;
  std::optional<bool> progressive;
  std::string dedicated;
  std::string data_root;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Experiment config file");
  cmd->add_option("--seed", flags.seed, "Master seed");
  cmd->add_option("--film", flags.film, "FiLM mode")
      ->check(CLI::IsMember({"simple", "complex"}));
  cmd->add_option("--embedding", flags.embedding, "Condition generator embedding")
      ->check(CLI::IsMember({"fc", "cnn"}));
  cmd->add_flag("--progressive,!--no-progressive", flags.progressive,
                "Progressive training (weight z and Y every 5th instance)");
  cmd->add_option("--dedicated", flags.dedicated,
                  "Train/evaluate a dedicated single-task baseline for this task");
  cmd->add_option("--data", flags.data_root, "Dataset root (default $CUNET_DATA_ROOT)");
  cmd->add_option("--out", flags.out_dir, "Output directory");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config_path.empty()
                             ? default_experiment_config(true)
                             : parse_experiment_config(flags.config_path);
  if (flags.seed) cfg.train.seed = *flags.seed;
  if (flags.film) {
    const FilmMode mode = *flags.film == "simple" ? FilmMode::Simple : FilmMode::Complex;
    cfg.model.film_mode = mode;
    if (cfg.generator) cfg.generator->film_mode = mode;
  }
  if (flags.embedding && cfg.generator)
    cfg.generator->embedding =
        *flags.embedding == "fc" ? EmbeddingKind::FullyConnected : EmbeddingKind::Cnn;
  if (flags.progressive) cfg.train.progressive = *flags.progressive;
  if (!flags.dedicated.empty()) {
    int task = -1;
    for (size_t i = 0; i < cfg.tasks.size(); ++i)
      if (cfg.tasks[i] == flags.dedicated) task = static_cast<int>(i);
    if (task < 0) throw ConfigError("unknown task '" + flags.dedicated + "'");
    cfg.train.dedicated_task = task;
    cfg.model.conditioned = false;
    cfg.generator.reset();
  }
  if (!flags.data_root.empty()) cfg.data_root = flags.data_root;
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
  return cfg;
}

std::string variant_name(const ExperimentConfig& cfg) {
  if (!cfg.model.conditioned)
    return "dedicated_" + cfg.tasks[static_cast<size_t>(cfg.train.dedicated_task)];
  std::string name = "cunet_";
  name += cfg.model.film_mode == FilmMode::Simple ? "si" : "co";
  name += cfg.generator->embedding == EmbeddingKind::FullyConnected ? "f" : "c";
  name += cfg.train.progressive ? "_p" : "_np";
  return name;
}

// Builds a model from a checkpoint's embedded config and restores weights.
struct LoadedModel {
  ExperimentConfig cfg;
  std::unique_ptr<CUNet> model;
};

LoadedModel load_model(const std::string& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  LoadedModel lm;
  lm.cfg = parse_experiment_config_text(ckpt.config_text);
  lm.model = std::make_unique<CUNet>(lm.cfg.model, lm.cfg.generator, 0);
  restore_checkpoint(ckpt, *lm.model, nullptr, architecture_text(lm.cfg));
  return lm;
}

Separator model_separator(CUNet& model, const ExperimentConfig& cfg) {
  const int n_tasks = static_cast<int>(cfg.tasks.size());
  return [&model, &cfg, n_tasks](const Mat& patch, int task_index) {
    if (cfg.model.conditioned) {
      ConditionVector z = one_hot(task_index, n_tasks);
      return model.forward(patch, &z, Mode::Eval).masked_magnitude;
    }
    return model.forward(patch, nullptr, Mode::Eval).masked_magnitude;
  };
}

int cmd_synth(const CommonFlags& flags, int tracks, int test_tracks, double duration) {
  ExperimentConfig cfg = resolve_config(flags);
  const std::string out = !flags.out_dir.empty()
                              ? flags.out_dir
                              : (!cfg.data_root.empty() ? cfg.data_root : "synth_data");
  DatasetManifest manifest =
      synth_dataset(tracks, test_tracks, duration, cfg.train.seed, out,
                    cfg.pipeline.sample_rate);
  std::printf("wrote %zu train + %zu test tracks to %s\n", manifest.train_tracks.size(),
              manifest.test_tracks.size(), out.c_str());
  return 0;
}

int cmd_separate(const CommonFlags& flags, const std::string& mixture_path,
                 const std::string& task, const std::string& ckpt_path) {
  LoadedModel lm = load_model(ckpt_path);
  const std::vector<std::string>& tasks = lm.cfg.tasks;

  int task_index = -1;
  for (size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i] == task) task_index = static_cast<int>(i);
  if (task_index < 0) throw ConfigError("separate: unknown task '" + task + "'");
  if (!lm.cfg.model.conditioned && task_index != lm.cfg.train.dedicated_task)
    throw ConfigError("separate: this dedicated checkpoint separates '" +
                      tasks[static_cast<size_t>(lm.cfg.train.dedicated_task)] + "'");

  const PipelineConfig& pc = lm.cfg.pipeline;
  AudioSignal mix = load_wav(mixture_path);
  if (mix.sample_rate != pc.sample_rate) mix = resample(mix, pc.sample_rate);

  ComplexSpectrogram spec = stft(mix, pc.window_size, pc.hop);
  MagnitudeSpectrogram mag = normalize_per_song(magnitude(spec));
  PhaseSpectrogram ph = phase(spec);
  std::vector<Patch> patches = extract_patches(mag, pc.patch_frames);

  Separator sep = model_separator(*lm.model, lm.cfg);
  std::vector<Mat> estimates;
  for (const Patch& p : patches) estimates.push_back(sep(p.values, task_index));

  AudioSignal isolated =
      reconstruct(estimates, ph, mag.norm_scale, pc.window_size, pc.hop, pc.sample_rate);
  AudioSignal mix_cropped = mix;
  mix_cropped.samples.resize(std::min(mix.samples.size(), isolated.samples.size()));
  isolated.samples.resize(mix_cropped.samples.size());
  AudioSignal accomp = accompaniment(mix_cropped, isolated);

  const std::string out = flags.out_dir.empty() ? "." : flags.out_dir;
  fs::create_directories(out);
  const std::string iso_path = (fs::path(out) / (task + ".wav")).string();
  const std::string acc_path = (fs::path(out) / (task + "_accompaniment.wav")).string();
  save_wav(iso_path, isolated);
  save_wav(acc_path, accomp);
  std::printf("wrote %s and %s\n", iso_path.c_str(), acc_path.c_str());
  return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& ckpt_path, bool baseline,
                 int filter_len, const std::string& csv_out) {
  ExperimentConfig base_cfg = resolve_config(flags);
  std::string data_root = base_cfg.data_root;

  LoadedModel lm;
  std::vector<std::string> tasks = base_cfg.tasks;
  PipelineConfig pc = base_cfg.pipeline;
  Separator sep = mixture_baseline_separator;
  std::string label = "mixture baseline";
  std::vector<int> task_indices;

  if (!baseline) {
    if (ckpt_path.empty()) throw ConfigError("evaluate: checkpoint required (or --baseline)");
    lm = load_model(ckpt_path);
    tasks = lm.cfg.tasks;
    pc = lm.cfg.pipeline;
    sep = model_separator(*lm.model, lm.cfg);
    label = variant_name(lm.cfg);
    if (lm.cfg.model.conditioned)
      for (size_t t = 0; t < tasks.size(); ++t) task_indices.push_back(static_cast<int>(t));
    else
      task_indices.push_back(lm.cfg.train.dedicated_task);
  } else {
    for (size_t t = 0; t < tasks.size(); ++t) task_indices.push_back(static_cast<int>(t));
  }

  if (data_root.empty())
    throw ConfigError("evaluate: no dataset root (use --data or CUNET_DATA_ROOT)");
  DatasetManifest manifest = read_manifest(data_root);

  std::vector<EvalResult> results;
  for (const std::string& track : manifest.test_tracks) {
    for (int task : task_indices) {
      std::optional<EvalResult> r =
          evaluate_track(data_root, track, task, tasks, pc, sep, filter_len);
      if (!r) {
        std::fprintf(stderr, "warning: silent %s stem in %s, row skipped\n",
                     tasks[static_cast<size_t>(task)].c_str(), track.c_str());
        continue;
      }
      results.push_back(*r);
      std::printf("%s %s: SDR %6.2f  SIR %6.2f  SAR %6.2f\n", track.c_str(),
                  r->task.c_str(), r->sdr, r->sir, r->sar);
    }
  }

  write_results_csv(csv_out, results);
  std::printf("\n%s", summary_table(results, label).c_str());
  std::printf("wrote %s\n", csv_out.c_str());
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out_dir) {
  std::vector<EvalResult> a = read_results_csv(a_path);
  std::vector<EvalResult> b = read_results_csv(b_path);
  CompareOutput cmp = compare_models(a, b);

  std::printf("global: r = %.4f, p = %.3g, n = %d\n", cmp.global.r, cmp.global.p_value,
              cmp.global.n_points);
  for (const CorrelationReport& rep : cmp.per_task)
    std::printf("%-14s r = %.4f, p = %.3g, n = %d\n", rep.grouping.c_str(), rep.r,
                rep.p_value, rep.n_points);
  for (const CorrelationReport& rep : cmp.per_metric)
    std::printf("%-14s r = %.4f, p = %.3g, n = %d\n", rep.grouping.c_str(), rep.r,
                rep.p_value, rep.n_points);
  if (cmp.dropped_rows > 0) std::printf("dropped rows: %d\n", cmp.dropped_rows);

  const std::string table_a = summary_table(a, "results A (" + a_path + ")");
  const std::string table_b = summary_table(b, "results B (" + b_path + ")");
  std::printf("\n%s\n%s", table_a.c_str(), table_b.c_str());

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "comparison.txt");
    os << "global r " << cmp.global.r << " p " << cmp.global.p_value << " n "
       << cmp.global.n_points << "\n";
    for (const CorrelationReport& rep : cmp.per_task)
      os << rep.grouping << " r " << rep.r << " p " << rep.p_value << " n " << rep.n_points
         << "\n";
    for (const CorrelationReport& rep : cmp.per_metric)
      os << rep.grouping << " r " << rep.r << " p " << rep.p_value << " n " << rep.n_points
         << "\n";
    os << "\n" << table_a << "\n" << table_b;
  }
  return 0;
}

int cmd_params(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);

  ModelConfig core_cfg = cfg.model;
  core_cfg.conditioned = false;
  CUNet dedicated(core_cfg, std::nullopt, 1);
  const size_t core = dedicated.count_parameters();
  const size_t n_tasks = cfg.tasks.size();

  std::printf("parameter accounting (millions)\n");
  std::printf("%-22s %10.3f  (%zu tasks x %.3f)\n", "dedicated x tasks",
              static_cast<double>(core * n_tasks) / 1e6, n_tasks,
              static_cast<double>(core) / 1e6);

  struct Variant {
    const char* name;
    FilmMode mode;
    EmbeddingKind emb;
  };
  const Variant variants[4] = {
      {"C-U-Net SiF", FilmMode::Simple, EmbeddingKind::FullyConnected},
      {"C-U-Net CoF", FilmMode::Complex, EmbeddingKind::FullyConnected},
      {"C-U-Net SiC", FilmMode::Simple, EmbeddingKind::Cnn},
      {"C-U-Net CoC", FilmMode::Complex, EmbeddingKind::Cnn},
  };
  for (const Variant& v : variants) {
    GeneratorConfig gen;
    gen.film_mode = v.mode;
    gen.embedding = v.emb;
    gen.n_tasks = static_cast<int>(n_tasks);
    gen.channels_per_depth = cfg.model.encoder_channels();
    const size_t total = core + generator_param_count(gen);
    std::printf("%-22s %10.3f  (core %.3f + generator %.4f)\n", v.name,
                static_cast<double>(total) / 1e6, static_cast<double>(core) / 1e6,
                static_cast<double>(generator_param_count(gen)) / 1e6);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditioned U-Net source separation"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic stems dataset");
  int synth_tracks = 20, synth_test = 10;
  double synth_duration = 24.0;
  synth->add_option("--tracks", synth_tracks, "Total number of tracks");
  synth->add_option("--test-tracks", synth_test, "Tracks assigned to the test partition");
  synth->add_option("--duration", synth_duration, "Track duration in seconds");
  add_common(synth, flags);

  auto* train_cmd = app.add_subcommand("train", "Train a conditioned or dedicated model");
  add_common(train_cmd, flags);
  int train_epochs = -1, train_batch = -1, train_patience = -1;
  train_cmd->add_option("--epochs", train_epochs, "Override max epochs");
  train_cmd->add_option("--batch-size", train_batch, "Override batch size");
  train_cmd->add_option("--patience", train_patience, "Override early-stopping patience");

  auto* separate = app.add_subcommand("separate", "Separate one instrument from a mixture");
  std::string mixture_path, sep_task, sep_ckpt;
  separate->add_option("mixture", mixture_path, "Mixture WAV file")->required();
  separate->add_option("--task", sep_task, "Instrument to isolate")->required();
  separate->add_option("--ckpt", sep_ckpt, "Checkpoint file")->required();
  add_common(separate, flags);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  std::string eval_ckpt, eval_csv = "results.csv";
  bool eval_baseline = false;
  int filter_len = 512;
  evaluate->add_option("ckpt", eval_ckpt, "Checkpoint file");
  evaluate->add_flag("--baseline", eval_baseline, "Evaluate the mixture-as-estimate baseline");
  evaluate->add_option("--filter-len", filter_len, "BSS-eval distortion filter length");
  evaluate->add_option("--csv", eval_csv, "Output CSV path");
  add_common(evaluate, flags);

  auto* compare = app.add_subcommand("compare", "Correlate two result sets");
  std::string cmp_a, cmp_b;
  compare->add_option("results_a", cmp_a, "First results CSV")->required();
  compare->add_option("results_b", cmp_b, "Second results CSV")->required();
  add_common(compare, flags);

  auto* params = app.add_subcommand("params", "Parameter accounting for all variants");
  add_common(params, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(flags, synth_tracks, synth_test, synth_duration);
    if (train_cmd->parsed()) {
      ExperimentConfig cfg = resolve_config(flags);
      if (train_epochs > 0) cfg.train.max_epochs = train_epochs;
      if (train_batch > 0) cfg.train.batch_size = train_batch;
      if (train_patience > 0) cfg.train.patience = train_patience;
      if (cfg.data_root.empty())
        throw ConfigError("train: no dataset root (use --data or CUNET_DATA_ROOT)");
      cfg.validate();
      const std::string name = variant_name(cfg);
      std::printf("training %s (seed %llu)\n", name.c_str(),
                  static_cast<unsigned long long>(cfg.train.seed));
      TrainResult result =
          train(cfg.model, cfg.generator, cfg.train, cfg.data_root, cfg.pipeline, cfg.tasks,
                serialize_experiment_config(cfg), architecture_text(cfg),
                [](int epoch, double train_loss, double val_loss, bool improved) {
                  std::printf("epoch %3d  train %.4f  val %.4f%s\n", epoch, train_loss,
                              val_loss, improved ? "  *" : "");
                });
      fs::create_directories(cfg.output_dir);
      const std::string path = (fs::path(cfg.output_dir) / (name + ".ckpt")).string();
      save_checkpoint(result.best, path);
      std::printf("best epoch %d (val %.4f) -> %s\n", result.best_epoch,
                  result.best.val_loss, path.c_str());
      return 0;
    }
    if (separate->parsed()) return cmd_separate(flags, mixture_path, sep_task, sep_ckpt);
    if (evaluate->parsed())
      return cmd_evaluate(flags, eval_ckpt, eval_baseline, filter_len, eval_csv);
    if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, flags.out_dir);
    if (params->parsed()) return cmd_params(flags);
  } catch (const CunetError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
