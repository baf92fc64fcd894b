// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "cunet/config.hpp"
#include "cunet/errors.hpp"
#include "cunet/evaluation.hpp"
#include "cunet/model.hpp"
#include "cunet/training.hpp"

namespace py = pybind11;
using namespace cunet;

namespace {

Mat mat_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw ShapeError("expected a 2-d array");
  Mat m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::memcpy(m.data(), arr.data(), sizeof(double) * m.size());
  return m;
}

py::array_t<double> mat_to_numpy(const Mat& m) {
  py::array_t<double> arr({m.rows(), m.cols()});
  std::memcpy(arr.mutable_data(), m.data(), sizeof(double) * m.size());
  return arr;
}

std::vector<double> vec_from_numpy(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 1) throw ShapeError("expected a 1-d array");
  return std::vector<double>(arr.data(), arr.data() + arr.shape(0));
}

py::array_t<double> vec_to_numpy(const std::vector<double>& v) {
  py::array_t<double> arr(static_cast<py::ssize_t>(v.size()));
  std::memcpy(arr.mutable_data(), v.data(), sizeof(double) * v.size());
  return arr;
}

FilmMode film_from_string(const std::string& s) {
  if (s == "simple") return FilmMode::Simple;
  if (s == "complex") return FilmMode::Complex;
  throw ConfigError("film mode must be 'simple' or 'complex'");
}

EmbeddingKind embedding_from_string(const std::string& s) {
  if (s == "fc") return EmbeddingKind::FullyConnected;
  if (s == "cnn") return EmbeddingKind::Cnn;
  throw ConfigError("embedding must be 'fc' or 'cnn'");
}

// Thin python-facing model wrapper holding the config beside the net.
class PyModel {
 public:
  PyModel(int n_blocks, int base_filters, int input_rows, int input_cols, bool conditioned,
          const std::string& film, const std::string& embedding, int n_tasks, uint64_t seed) {
    cfg_.n_blocks = n_blocks;
    cfg_.base_filters = base_filters;
    cfg_.input_rows = input_rows;
    cfg_.input_cols = input_cols;
    cfg_.conditioned = conditioned;
    cfg_.film_mode = film_from_string(film);
    std::optional<GeneratorConfig> gen;
    if (conditioned) {
      GeneratorConfig g;
      g.film_mode = cfg_.film_mode;
      g.embedding = embedding_from_string(embedding);
      g.n_tasks = n_tasks;
      gen = g;
    }
    model_ = std::make_unique<CUNet>(cfg_, gen, seed);
  }

  py::tuple forward(const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                    py::object task_index) {
    Mat xm = mat_from_numpy(x);
    MaskOutput out;
    if (task_index.is_none()) {
      out = model_->forward(xm, nullptr, Mode::Eval);
    } else {
      const int n_tasks = model_->gen_config() ? model_->gen_config()->n_tasks : 0;
      ConditionVector z = one_hot(task_index.cast<int>(), n_tasks);
      out = model_->forward(xm, &z, Mode::Eval);
    }
    return py::make_tuple(mat_to_numpy(out.mask), mat_to_numpy(out.masked_magnitude));
  }

  size_t count_parameters() const { return model_->count_parameters(); }
  size_t core_parameters() const { return model_->core_param_count(); }
  size_t generator_parameters() const { return model_->generator_param_count(); }

 private:
  ModelConfig cfg_;
  std::unique_ptr<CUNet> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditioned U-Net source separation core";

  py::register_exception<CunetError>(m, "CunetError");

  m.def(
      "one_hot",
      [](int task_index, int n_tasks) { return vec_to_numpy(one_hot(task_index, n_tasks).weights); },
      py::arg("task_index"), py::arg("n_tasks"),
      "One-hot condition vector selecting a task");

  m.def(
      "film_apply",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& gamma,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& beta,
         const std::string& mode) {
        if (x.ndim() != 3) throw ShapeError("film_apply: expected (channels, h, w)");
        Tensor4 t(1, static_cast<int>(x.shape(0)), static_cast<int>(x.shape(1)),
                  static_cast<int>(x.shape(2)));
        std::memcpy(t.d.data(), x.data(), sizeof(double) * t.d.size());
        Tensor4 y = film_apply(t, vec_from_numpy(gamma), vec_from_numpy(beta),
                               film_from_string(mode));
        py::array_t<double> out({y.c, y.h, y.w});
        std::memcpy(out.mutable_data(), y.d.data(), sizeof(double) * y.d.size());
        return out;
      },
      py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("mode"),
      "gamma * x + beta, per channel in complex mode");

  m.def(
      "generator_film_values",
      [](const std::string& film, const std::string& embedding, int n_tasks, int task_index,
         uint64_t seed) {
        GeneratorConfig cfg;
        cfg.film_mode = film_from_string(film);
        cfg.embedding = embedding_from_string(embedding);
        cfg.n_tasks = n_tasks;
        ParamStore store;
        Rng rng(seed);
        Generator gen(cfg, store, rng);
        FiLMParamSet s = generator_forward(one_hot(task_index, n_tasks), gen, Mode::Eval);
        py::list gammas, betas;
        for (const auto& g : s.gammas) gammas.append(vec_to_numpy(g));
        for (const auto& b : s.betas) betas.append(vec_to_numpy(b));
        return py::make_tuple(gammas, betas);
      },
      py::arg("film"), py::arg("embedding"), py::arg("n_tasks"), py::arg("task_index"),
      py::arg("seed") = 0, "Per-depth FiLM parameters from a freshly initialized generator");

  m.def(
      "stft",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
         int sample_rate, int window_size, int hop) {
        AudioSignal sig{vec_from_numpy(samples), sample_rate};
        ComplexSpectrogram spec = stft(sig, window_size, hop);
        py::array_t<std::complex<double>> out({spec.bins, spec.frames});
        std::memcpy(out.mutable_data(), spec.d.data(),
                    sizeof(std::complex<double>) * spec.d.size());
        return out;
      },
      py::arg("samples"), py::arg("sample_rate") = 8192, py::arg("window_size") = 1024,
      py::arg("hop") = 768);

  m.def(
      "istft",
      [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>&
             spec_arr,
         int sample_rate, int window_size, int hop) {
        if (spec_arr.ndim() != 2) throw ShapeError("istft: expected (bins, frames)");
        ComplexSpectrogram spec;
        spec.window_size = window_size;
        spec.hop = hop;
        spec.sample_rate = sample_rate;
        spec.bins = static_cast<int>(spec_arr.shape(0));
        spec.frames = static_cast<int>(spec_arr.shape(1));
        spec.d.assign(spec_arr.data(), spec_arr.data() + spec_arr.size());
        return vec_to_numpy(istft(spec).samples);
      },
      py::arg("spectrogram"), py::arg("sample_rate") = 8192, py::arg("window_size") = 1024,
      py::arg("hop") = 768);

  m.def(
      "resample",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
         int rate, int target_rate) {
        AudioSignal sig{vec_from_numpy(samples), rate};
        return vec_to_numpy(resample(sig, target_rate).samples);
      },
      py::arg("samples"), py::arg("rate"), py::arg("target_rate"));

  m.def(
      "load_wav",
      [](const std::string& path) {
        AudioSignal sig = load_wav(path);
        return py::make_tuple(vec_to_numpy(sig.samples), sig.sample_rate);
      },
      py::arg("path"));

  m.def(
      "save_wav",
      [](const std::string& path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
         int sample_rate, const std::string& encoding) {
        AudioSignal sig{vec_from_numpy(samples), sample_rate};
        save_wav(path, sig,
                 encoding == "float32" ? WavEncoding::Float32 : WavEncoding::Pcm16);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"),
      py::arg("encoding") = "pcm16");

  m.def(
      "bss_eval",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& estimate,
         const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>&
             references,
         int target_index, int filter_len) {
        std::vector<std::vector<double>> refs;
        for (const auto& r : references) refs.push_back(vec_from_numpy(r));
        BssMetrics met = metrics(
            bss_decompose(vec_from_numpy(estimate), refs, target_index, filter_len));
        return py::make_tuple(met.sdr, met.sir, met.sar);
      },
      py::arg("estimate"), py::arg("references"), py::arg("target_index") = 0,
      py::arg("filter_len") = 512, "(sdr, sir, sar) in dB");

  m.def(
      "pearson",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& xs,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& ys) {
        CorrelationReport rep = pearson(vec_from_numpy(xs), vec_from_numpy(ys));
        return py::make_tuple(rep.r, rep.p_value, rep.n_points);
      },
      py::arg("xs"), py::arg("ys"), "(r, two-sided p, n)");

  m.def(
      "synth_dataset",
      [](const std::string& out_dir, int tracks, int test_tracks, double duration_s,
         uint64_t seed) {
        DatasetManifest man = synth_dataset(tracks, test_tracks, duration_s, seed, out_dir);
        return py::make_tuple(man.train_tracks, man.test_tracks);
      },
      py::arg("out_dir"), py::arg("tracks") = 20, py::arg("test_tracks") = 10,
      py::arg("duration_s") = 24.0, py::arg("seed") = 0);

  m.def("param_table", []() {
    ModelConfig cfg;
    CUNet dedicated(cfg, std::nullopt, 1);
    py::dict out;
    out["dedicated"] = dedicated.count_parameters();
    const struct {
      const char* name;
      FilmMode mode;
      EmbeddingKind emb;
    } variants[4] = {{"sif", FilmMode::Simple, EmbeddingKind::FullyConnected},
                     {"cof", FilmMode::Complex, EmbeddingKind::FullyConnected},
                     {"sic", FilmMode::Simple, EmbeddingKind::Cnn},
                     {"coc", FilmMode::Complex, EmbeddingKind::Cnn}};
    for (const auto& v : variants) {
      GeneratorConfig gen;
      gen.film_mode = v.mode;
      gen.embedding = v.emb;
      out[v.name] = dedicated.count_parameters() + generator_param_count(gen);
    }
    return out;
  });

  py::class_<PyModel>(m, "Model")
      .def(py::init<int, int, int, int, bool, const std::string&, const std::string&, int,
                    uint64_t>(),
           py::arg("n_blocks") = 6, py::arg("base_filters") = 16, py::arg("input_rows") = 512,
           py::arg("input_cols") = 128, py::arg("conditioned") = true,
           py::arg("film") = "simple", py::arg("embedding") = "fc", py::arg("n_tasks") = 4,
           py::arg("seed") = 0)
      .def("forward", &PyModel::forward, py::arg("x"), py::arg("task_index") = py::none(),
           "(mask, masked_magnitude) for one patch")
      .def("count_parameters", &PyModel::count_parameters)
      .def("core_parameters", &PyModel::core_parameters)
      .def("generator_parameters", &PyModel::generator_parameters);
}
