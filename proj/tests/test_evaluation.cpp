// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/evaluation.hpp"

#include <cmath>
#include <filesystem>

#include "cunet/dataset.hpp"
#include "cunet/errors.hpp"
#include "cunet/rng.hpp"
#include "doctest.h"
#include "support/bss_oracle.hpp"
#include "support/test_util.hpp"

using namespace cunet;
using testutil::TempDir;

namespace {

std::vector<double> random_signal(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(n));
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Two-sided t-distribution p-value by Simpson quadrature over the density,
// an independent route from the continued-fraction implementation.
double t_p_value_quadrature(double t, int dof) {
  const double v = static_cast<double>(dof);
  const double log_norm = std::lgamma((v + 1.0) / 2.0) - std::lgamma(v / 2.0) -
                          0.5 * std::log(v * M_PI);
  auto pdf = [&](double x) {
    return std::exp(log_norm - (v + 1.0) / 2.0 * std::log1p(x * x / v));
  };
  const double hi = std::fabs(t);
  const int steps = 200000;
  const double h = hi / steps;
  double acc = pdf(0.0) + pdf(hi);
  for (int i = 1; i < steps; ++i) acc += pdf(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  const double integral = acc * h / 3.0;
  return std::max(0.0, 1.0 - 2.0 * integral);
}

}  // namespace

TEST_CASE("bss decomposition matches the dense least-squares oracle") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    std::vector<std::vector<double>> refs{random_signal(64, seed * 10 + 1),
                                          random_signal(64, seed * 10 + 2)};
    // estimate = mixture-ish combination plus noise
    std::vector<double> est(64);
    std::vector<double> noise = random_signal(64, seed * 10 + 3);
    for (size_t i = 0; i < est.size(); ++i)
      est[i] = 0.8 * refs[0][i] + 0.4 * refs[1][i] + 0.1 * noise[i];

    const int L = 4;
    BssDecomposition d = bss_decompose(est, refs, 0, L);

    std::vector<double> s_oracle = testutil::dense_projection(est, {refs[0]}, L);
    std::vector<double> p_all_oracle = testutil::dense_projection(est, refs, L);

    REQUIRE(d.s_target.size() == s_oracle.size());
    for (size_t i = 0; i < s_oracle.size(); ++i) {
      const double est_padded = i < est.size() ? est[i] : 0.0;
      CHECK(std::fabs(d.s_target[i] - s_oracle[i]) < 1e-8);
      CHECK(std::fabs(d.e_interf[i] - (p_all_oracle[i] - s_oracle[i])) < 1e-8);
      CHECK(std::fabs(d.e_artif[i] - (est_padded - p_all_oracle[i])) < 1e-8);
    }
  }
}

TEST_CASE("decomposition components always sum to the estimate") {
  std::vector<std::vector<double>> refs{random_signal(128, 5), random_signal(128, 6)};
  std::vector<double> est = random_signal(128, 7);
  BssDecomposition d = bss_decompose(est, refs, 1, 8);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < d.s_target.size(); ++i) {
    const double e = i < est.size() ? est[i] : 0.0;
    const double sum = d.s_target[i] + d.e_interf[i] + d.e_artif[i];
    num += (sum - e) * (sum - e);
    den += e * e;
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("least-squares orthogonality of the artifact residual") {
  std::vector<std::vector<double>> refs{random_signal(96, 11), random_signal(96, 12)};
  std::vector<double> est = random_signal(96, 13);
  BssDecomposition d = bss_decompose(est, refs, 0, 6);

  std::vector<double> s_plus_i(d.s_target.size());
  for (size_t i = 0; i < s_plus_i.size(); ++i) s_plus_i[i] = d.s_target[i] + d.e_interf[i];

  const double na = std::sqrt(dot(d.e_artif, d.e_artif));
  const double ns = std::sqrt(dot(d.s_target, d.s_target));
  const double nsi = std::sqrt(dot(s_plus_i, s_plus_i));
  CHECK(std::fabs(dot(d.s_target, d.e_artif)) / (na * ns) < 1e-8);
  CHECK(std::fabs(dot(s_plus_i, d.e_artif)) / (na * nsi) < 1e-8);
}

TEST_CASE("perfect estimate clips all metrics at +100 dB") {
  std::vector<std::vector<double>> refs{random_signal(64, 21), random_signal(64, 22)};
  BssDecomposition d = bss_decompose(refs[0], refs, 0, 4);
  BssMetrics m = metrics(d);
  CHECK(m.sdr == kMetricClipDb);
  CHECK(m.sir == kMetricClipDb);
  CHECK(m.sar == kMetricClipDb);

  SUBCASE("scaling the estimate does not change the outcome") {
    std::vector<double> scaled = refs[0];
    for (double& v : scaled) v *= 2.0;
    BssMetrics m2 = metrics(bss_decompose(scaled, refs, 0, 4));
    CHECK(m2.sdr == kMetricClipDb);
    CHECK(m2.sir == kMetricClipDb);
  }
}

TEST_CASE("metric arithmetic from a hand-built decomposition") {
  BssDecomposition d;
  d.s_target = {1.0, 0.0, 0.0};
  d.e_interf = {0.0, std::sqrt(0.1), 0.0};
  d.e_artif = {0.0, 0.0, 0.0};
  BssMetrics m = metrics(d);
  CHECK(m.sdr == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(m.sir == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(m.sar == kMetricClipDb);

  SUBCASE("random decomposition matches a scalar recomputation") {
    BssDecomposition r;
    r.s_target = random_signal(32, 31);
    r.e_interf = random_signal(32, 32);
    r.e_artif = random_signal(32, 33);
    BssMetrics got = metrics(r);
    const double es = dot(r.s_target, r.s_target);
    double e_tot = 0.0, esi = 0.0;
    for (size_t i = 0; i < r.s_target.size(); ++i) {
      e_tot += (r.e_interf[i] + r.e_artif[i]) * (r.e_interf[i] + r.e_artif[i]);
      esi += (r.s_target[i] + r.e_interf[i]) * (r.s_target[i] + r.e_interf[i]);
    }
    CHECK(got.sdr == doctest::Approx(10.0 * std::log10(es / e_tot)).epsilon(1e-9));
    CHECK(got.sir ==
          doctest::Approx(10.0 * std::log10(es / dot(r.e_interf, r.e_interf))).epsilon(1e-9));
    CHECK(got.sar == doctest::Approx(10.0 * std::log10(esi / dot(r.e_artif, r.e_artif)))
                         .epsilon(1e-9));
  }

  SUBCASE("zero target component is undefined") {
    BssDecomposition z;
    z.s_target = {0.0, 0.0};
    z.e_interf = {0.1, 0.0};
    z.e_artif = {0.0, 0.1};
    CHECK_THROWS_AS(metrics(z), UndefinedMetricError);
  }
}

TEST_CASE("metric scale invariance on a full decomposition") {
  std::vector<std::vector<double>> refs{random_signal(64, 41), random_signal(64, 42)};
  std::vector<double> est(64);
  for (size_t i = 0; i < est.size(); ++i) est[i] = refs[0][i] + 0.3 * refs[1][i];

  BssMetrics a = metrics(bss_decompose(est, refs, 0, 4));
  std::vector<double> scaled = est;
  for (double& v : scaled) v *= 3.7;
  BssMetrics b = metrics(bss_decompose(scaled, refs, 0, 4));
  CHECK(std::fabs(a.sdr - b.sdr) < 1e-6);
  CHECK(std::fabs(a.sir - b.sir) < 1e-6);
  CHECK(std::fabs(a.sar - b.sar) < 1e-6);
}

TEST_CASE("pearson correlation") {
  SUBCASE("exact linear relations") {
    std::vector<double> xs = {1, 2, 3, 4, 5};
    CHECK(pearson(xs, xs).r == doctest::Approx(1.0));
    std::vector<double> neg = {-1, -2, -3, -4, -5};
    CHECK(pearson(xs, neg).r == doctest::Approx(-1.0));
  }
  SUBCASE("matches the direct formula") {
    std::vector<double> xs = {1, 2, 3, 4};
    std::vector<double> ys = {1.1, 1.9, 3.2, 3.8};
    const double mx = 2.5, my = (1.1 + 1.9 + 3.2 + 3.8) / 4.0;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    CHECK(pearson(xs, ys).r == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));
  }
  SUBCASE("p-value agrees with a quadrature oracle") {
    Rng rng(55);
    std::vector<double> xs, ys;
    for (int i = 0; i < 12; ++i) {
      const double x = rng.uniform(0.0, 10.0);
      xs.push_back(x);
      ys.push_back(0.8 * x + rng.normal() * 2.0);
    }
    CorrelationReport rep = pearson(xs, ys);
    const double t = rep.r * std::sqrt((12 - 2) / (1.0 - rep.r * rep.r));
    CHECK(rep.p_value == doctest::Approx(t_p_value_quadrature(t, 10)).epsilon(1e-7));
  }
  SUBCASE("symmetry and positive-affine invariance") {
    Rng rng(66);
    std::vector<double> xs, ys;
    for (int i = 0; i < 20; ++i) {
      xs.push_back(rng.normal());
      ys.push_back(rng.normal() + 0.5 * xs.back());
    }
    CHECK(pearson(xs, ys).r == doctest::Approx(pearson(ys, xs).r).epsilon(1e-12));
    std::vector<double> affine = xs;
    for (double& v : affine) v = 3.0 * v + 7.0;
    CHECK(pearson(affine, ys).r == doctest::Approx(pearson(xs, ys).r).epsilon(1e-10));
  }
  SUBCASE("error cases") {
    std::vector<double> flat = {1.0, 1.0, 1.0};
    std::vector<double> ys = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(pearson(flat, ys), UndefinedCorrelationError);
    std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(pearson(two, two), InputError);
  }
}

namespace {

std::vector<EvalResult> fake_results(int n_tracks, uint64_t seed) {
  Rng rng(seed);
  std::vector<EvalResult> out;
  for (int t = 0; t < n_tracks; ++t) {
    for (const std::string& task : kDefaultTasks) {
      EvalResult r;
      r.track_id = "track_" + std::to_string(t);
      r.task = task;
      r.sdr = rng.uniform(-5.0, 15.0);
      r.sir = r.sdr + rng.uniform(0.0, 5.0);
      r.sar = r.sdr + rng.uniform(0.0, 3.0);
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("compare_models pools track x task x metric points") {
  std::vector<EvalResult> a = fake_results(10, 1);

  SUBCASE("identical results give r = 1 over 120 points") {
    CompareOutput out = compare_models(a, a);
    CHECK(out.global.r == doctest::Approx(1.0));
    CHECK(out.global.n_points == 120);
    CHECK(out.per_task.size() == 4);
    CHECK(out.per_metric.size() == 3);
    CHECK(out.dropped_rows == 0);
  }
  SUBCASE("disjoint track sets have no surviving pairs") {
    std::vector<EvalResult> b = fake_results(10, 2);
    for (EvalResult& r : b) r.track_id = "other_" + r.track_id;
    CHECK_THROWS_AS(compare_models(a, b), UndefinedCorrelationError);
  }
  SUBCASE("unmatched rows are dropped and counted") {
    std::vector<EvalResult> b = a;
    b.pop_back();
    CompareOutput out = compare_models(a, b);
    CHECK(out.dropped_rows == 1);
    CHECK(out.global.n_points == 39 * 3);  // 39 matched rows x 3 metrics
  }
}

TEST_CASE("results CSV round trip") {
  TempDir tmp("csv");
  std::vector<EvalResult> results = fake_results(3, 9);
  const std::string path = tmp.str() + "/results.csv";
  write_results_csv(path, results);
  std::vector<EvalResult> back = read_results_csv(path);
  REQUIRE(back.size() == results.size());
  for (size_t i = 0; i < results.size(); ++i) {
    CHECK(back[i].track_id == results[i].track_id);
    CHECK(back[i].task == results[i].task);
    CHECK(back[i].sdr == doctest::Approx(results[i].sdr).epsilon(1e-9));
    CHECK(back[i].sir == doctest::Approx(results[i].sir).epsilon(1e-9));
    CHECK(back[i].sar == doctest::Approx(results[i].sar).epsilon(1e-9));
  }
}

TEST_CASE("summary table lists every task and a total row") {
  std::vector<EvalResult> results = fake_results(4, 3);
  std::string table = summary_table(results, "model A");
  for (const std::string& task : kDefaultTasks)
    CHECK(table.find(task) != std::string::npos);
  CHECK(table.find("total") != std::string::npos);
}

TEST_CASE("evaluate_track: oracle separator beats the mixture baseline") {
  TempDir tmp("eval");
  synth_dataset(2, 0, 4.0, 77, tmp.str());
  PipelineConfig pc;
  pc.sample_rate = 8192;
  pc.window_size = 128;
  pc.hop = 96;
  pc.patch_frames = 32;

  TrackStore store(tmp.str(), pc, kDefaultTasks);

  for (const std::string& track : {std::string("track_000"), std::string("track_001")}) {
    for (int task = 0; task < 4; ++task) {
      // Oracle separator: the true stem magnitude patches under the shared
      // mixture normalization.
      const TrackStore::TrackData& data = store.get(track);
      std::vector<Patch> truth =
          extract_patches(data.stems[static_cast<size_t>(task)], pc.patch_frames);
      size_t next = 0;
      Separator oracle = [&](const Mat& mix_patch, int) {
        (void)mix_patch;
        return truth[next++].values;
      };

      std::optional<EvalResult> oracle_res =
          evaluate_track(tmp.str(), track, task, kDefaultTasks, pc, oracle, 16);
      next = 0;  // unused by baseline
      std::optional<EvalResult> base_res = evaluate_track(
          tmp.str(), track, task, kDefaultTasks, pc, mixture_baseline_separator, 16);
      REQUIRE(oracle_res.has_value());
      REQUIRE(base_res.has_value());
      CAPTURE(track);
      CAPTURE(task);
      CHECK(oracle_res->sdr >= base_res->sdr);
    }
  }

  SUBCASE("baseline evaluation is reproducible bit for bit") {
    std::optional<EvalResult> a = evaluate_track(tmp.str(), "track_000", 0, kDefaultTasks, pc,
                                                 mixture_baseline_separator, 16);
    std::optional<EvalResult> b = evaluate_track(tmp.str(), "track_000", 0, kDefaultTasks, pc,
                                                 mixture_baseline_separator, 16);
    REQUIRE(a.has_value());
    CHECK(a->sdr == b->sdr);
    CHECK(a->sir == b->sir);
    CHECK(a->sar == b->sar);
  }

  SUBCASE("silent target stem yields a missing row") {
    AudioSignal silence;
    silence.sample_rate = 8192;
    silence.samples.assign(8192 * 4, 0.0);
    save_wav(tmp.str() + "/track_000/vocals.wav", silence, WavEncoding::Float32);
    std::optional<EvalResult> res = evaluate_track(tmp.str(), "track_000", 0, kDefaultTasks, pc,
                                                   mixture_baseline_separator, 16);
    CHECK_FALSE(res.has_value());
  }
}

TEST_CASE("accompaniment for drums sums vocals, bass and rest") {
  TempDir tmp("accomp");
  synth_dataset(1, 0, 4.0, 31, tmp.str());
  const std::string dir = tmp.str() + "/track_000/";
  AudioSignal mix = load_wav(dir + "mixture.wav");
  AudioSignal drums = load_wav(dir + "drums.wav");
  AudioSignal vocals = load_wav(dir + "vocals.wav");
  AudioSignal bass = load_wav(dir + "bass.wav");
  AudioSignal rest = load_wav(dir + "rest.wav");

  // mixture - drums == vocals + bass + rest at float32-rounding precision
  AudioSignal acc = accompaniment(mix, drums);
  for (size_t i = 0; i < acc.samples.size(); ++i) {
    const double expect = vocals.samples[i] + bass.samples[i] + rest.samples[i];
    CHECK(acc.samples[i] == doctest::Approx(expect).epsilon(1e-5));
  }
}
