// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cunet/errors.hpp"

namespace cunet {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    const int r = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: expected integer for " + key + ", got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: expected number for " + key + ", got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: expected bool for " + key + ", got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

FilmMode to_film(const std::string& v, const std::string& key) {
  if (v == "simple") return FilmMode::Simple;
  if (v == "complex") return FilmMode::Complex;
  throw ConfigError("config: expected simple|complex for " + key + ", got '" + v + "'");
}

EmbeddingKind to_embedding(const std::string& v, const std::string& key) {
  if (v == "fc") return EmbeddingKind::FullyConnected;
  if (v == "cnn") return EmbeddingKind::Cnn;
  throw ConfigError("config: expected fc|cnn for " + key + ", got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  if (model.conditioned) {
    if (!generator) throw ConfigError("config: conditioned model requires a [generator] section");
    if (generator->n_tasks != static_cast<int>(tasks.size()))
      throw ConfigError("config: generator n_tasks must equal the task list length");
    if (generator->film_mode != model.film_mode)
      throw ConfigError("config: generator film mode must match the model");
  }
  if (tasks.empty()) throw ConfigError("config: task list is empty");
  if (pipeline.window_size < 2 || pipeline.hop < 1 ||
      pipeline.hop > pipeline.window_size)
    throw ConfigError("config: invalid stft window/hop");
  const int patch_rows = pipeline.window_size / 2;
  if (patch_rows != model.input_rows)
    throw ConfigError("config: model input rows must equal window_size/2");
}

ExperimentConfig default_experiment_config(bool conditioned) {
  ExperimentConfig cfg;
  cfg.model.conditioned = conditioned;
  if (conditioned) {
    GeneratorConfig gen;
    gen.film_mode = cfg.model.film_mode;
    gen.n_tasks = static_cast<int>(cfg.tasks.size());
    cfg.generator = gen;
  }
  const char* env_root = std::getenv("CUNET_DATA_ROOT");
  if (env_root != nullptr) cfg.data_root = env_root;
  return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw NotFoundError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_experiment_config_text(text);
}

ExperimentConfig parse_experiment_config_text(const std::string& text) {
  std::istringstream is(text);

  ExperimentConfig cfg = default_experiment_config(true);
  bool saw_generator = false;
  bool conditioned_set = false;

  std::string section;
  std::string line;
  int lineno = 0;
  GeneratorConfig gen;
  gen.n_tasks = 0;  // filled at the end

  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: bad section at line " + std::to_string(lineno));
      section = line.substr(1, line.size() - 2);
      if (section != "data" && section != "model" && section != "generator" &&
          section != "train")
        throw ConfigError("config: unknown section [" + section + "]");
      if (section == "generator") saw_generator = true;
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    if (section == "data") {
      if (key == "root")
        cfg.data_root = value;
      else if (key == "tasks")
        cfg.tasks = split_list(value);
      else if (key == "output_dir")
        cfg.output_dir = value;
      else if (key == "sample_rate")
        cfg.pipeline.sample_rate = to_int(value, qual);
      else if (key == "window_size")
        cfg.pipeline.window_size = to_int(value, qual);
      else if (key == "hop")
        cfg.pipeline.hop = to_int(value, qual);
      else if (key == "patch_frames")
        cfg.pipeline.patch_frames = to_int(value, qual);
      else
        throw ConfigError("config: unknown key " + qual);
    } else if (section == "model") {
      if (key == "n_blocks")
        cfg.model.n_blocks = to_int(value, qual);
      else if (key == "base_filters")
        cfg.model.base_filters = to_int(value, qual);
      else if (key == "conditioned") {
        cfg.model.conditioned = to_bool(value, qual);
        conditioned_set = true;
      } else if (key == "film")
        cfg.model.film_mode = to_film(value, qual);
      else if (key == "input_rows")
        cfg.model.input_rows = to_int(value, qual);
      else if (key == "input_cols")
        cfg.model.input_cols = to_int(value, qual);
      else if (key == "loss_reduction") {
        if (value == "sum")
          cfg.model.loss_reduction = LossReduction::Sum;
        else if (value == "mean")
          cfg.model.loss_reduction = LossReduction::Mean;
        else
          throw ConfigError("config: expected sum|mean for " + qual);
      } else
        throw ConfigError("config: unknown key " + qual);
    } else if (section == "generator") {
      if (key == "embedding")
        gen.embedding = to_embedding(value, qual);
      else if (key == "film")
        gen.film_mode = to_film(value, qual);
      else if (key == "hidden_sizes") {
        gen.hidden_sizes.clear();
        for (const std::string& s : split_list(value))
          gen.hidden_sizes.push_back(to_int(s, qual));
      } else if (key == "dropout")
        gen.dropout = to_double(value, qual);
      else
        throw ConfigError("config: unknown key " + qual);
    } else if (section == "train") {
      if (key == "learning_rate")
        cfg.train.learning_rate = to_double(value, qual);
      else if (key == "batch_size")
        cfg.train.batch_size = to_int(value, qual);
      else if (key == "max_epochs")
        cfg.train.max_epochs = to_int(value, qual);
      else if (key == "patience")
        cfg.train.patience = to_int(value, qual);
      else if (key == "progressive")
        cfg.train.progressive = to_bool(value, qual);
      else if (key == "progressive_period")
        cfg.train.progressive_period = to_int(value, qual);
      else if (key == "seed")
        cfg.train.seed = static_cast<uint64_t>(std::stoull(value));
      else if (key == "instances_per_epoch")
        cfg.train.instances_per_epoch = to_int(value, qual);
      else if (key == "val_instances")
        cfg.train.val_instances = to_int(value, qual);
      else if (key == "n_val_tracks")
        cfg.train.n_val_tracks = to_int(value, qual);
      else if (key == "dedicated_task")
        cfg.train.dedicated_task = to_int(value, qual);
      else
        throw ConfigError("config: unknown key " + qual);
    }
  }

  (void)conditioned_set;
  if (cfg.model.conditioned) {
    gen.n_tasks = static_cast<int>(cfg.tasks.size());
    if (!saw_generator) gen.film_mode = cfg.model.film_mode;
    cfg.generator = gen;
    cfg.generator->film_mode = cfg.model.film_mode;
  } else {
    cfg.generator.reset();
  }
  cfg.validate();
  return cfg;
}

std::string serialize_experiment_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n";
  os << "root = " << cfg.data_root << "\n";
  os << "output_dir = " << cfg.output_dir << "\n";
  std::string tasks;
  for (size_t i = 0; i < cfg.tasks.size(); ++i)
    tasks += (i ? "," : "") + cfg.tasks[i];
  os << "tasks = " << tasks << "\n";
  os << "sample_rate = " << cfg.pipeline.sample_rate << "\n";
  os << "window_size = " << cfg.pipeline.window_size << "\n";
  os << "hop = " << cfg.pipeline.hop << "\n";
  os << "patch_frames = " << cfg.pipeline.patch_frames << "\n";

  os << "[model]\n";
  os << "n_blocks = " << cfg.model.n_blocks << "\n";
  os << "base_filters = " << cfg.model.base_filters << "\n";
  os << "conditioned = " << (cfg.model.conditioned ? "true" : "false") << "\n";
  os << "film = " << film_mode_name(cfg.model.film_mode) << "\n";
  os << "input_rows = " << cfg.model.input_rows << "\n";
  os << "input_cols = " << cfg.model.input_cols << "\n";
  os << "loss_reduction = "
     << (cfg.model.loss_reduction == LossReduction::Sum ? "sum" : "mean") << "\n";

  if (cfg.generator) {
    os << "[generator]\n";
    os << "embedding = " << embedding_name(cfg.generator->embedding) << "\n";
    os << "film = " << film_mode_name(cfg.generator->film_mode) << "\n";
    if (!cfg.generator->hidden_sizes.empty()) {
      os << "hidden_sizes = ";
      for (size_t i = 0; i < cfg.generator->hidden_sizes.size(); ++i)
        os << (i ? "," : "") << cfg.generator->hidden_sizes[i];
      os << "\n";
    }
    os << "dropout = " << fmt_double(cfg.generator->dropout) << "\n";
  }

  os << "[train]\n";
  os << "learning_rate = " << fmt_double(cfg.train.learning_rate) << "\n";
  os << "batch_size = " << cfg.train.batch_size << "\n";
  os << "max_epochs = " << cfg.train.max_epochs << "\n";
  os << "patience = " << cfg.train.patience << "\n";
  os << "progressive = " << (cfg.train.progressive ? "true" : "false") << "\n";
  os << "progressive_period = " << cfg.train.progressive_period << "\n";
  os << "seed = " << cfg.train.seed << "\n";
  os << "instances_per_epoch = " << cfg.train.instances_per_epoch << "\n";
  os << "val_instances = " << cfg.train.val_instances << "\n";
  os << "n_val_tracks = " << cfg.train.n_val_tracks << "\n";
  os << "dedicated_task = " << cfg.train.dedicated_task << "\n";
  return os.str();
}

std::string architecture_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "model n_blocks=" << cfg.model.n_blocks << " base_filters=" << cfg.model.base_filters
     << " conditioned=" << cfg.model.conditioned
     << " film=" << film_mode_name(cfg.model.film_mode)
     << " input=" << cfg.model.input_rows << "x" << cfg.model.input_cols << "\n";
  if (cfg.generator) {
    const std::vector<int> sizes = cfg.generator->resolved_hidden_sizes();
    os << "generator embedding=" << embedding_name(cfg.generator->embedding)
       << " film=" << film_mode_name(cfg.generator->film_mode)
       << " n_tasks=" << cfg.generator->n_tasks << " hidden=";
    for (size_t i = 0; i < sizes.size(); ++i) os << (i ? "," : "") << sizes[i];
    os << "\n";
  }
  os << "pipeline rate=" << cfg.pipeline.sample_rate << " window=" << cfg.pipeline.window_size
     << " hop=" << cfg.pipeline.hop << " patch=" << cfg.pipeline.patch_frames << "\n";
  std::string tasks;
  for (size_t i = 0; i < cfg.tasks.size(); ++i) tasks += (i ? "," : "") + cfg.tasks[i];
  os << "tasks " << tasks << "\n";
  return os.str();
}

}  // namespace cunet
