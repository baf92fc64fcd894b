// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cunet/errors.hpp"

namespace fs = std::filesystem;

namespace cunet {

namespace {

// Cross-correlation sum_m a[m] * b[m + d] for d in [-(L-1), L-1].
std::vector<double> cross_corr(const std::vector<double>& a, const std::vector<double>& b,
                               int filter_len) {
  const long n = static_cast<long>(a.size());
  std::vector<double> corr(static_cast<size_t>(2 * filter_len - 1), 0.0);
  for (int d = -(filter_len - 1); d <= filter_len - 1; ++d) {
    const long lo = std::max<long>(0, -d);
    const long hi = n - 1 - std::max<long>(0, d);
    double acc = 0.0;
    for (long m = lo; m <= hi; ++m) acc += a[static_cast<size_t>(m)] * b[static_cast<size_t>(m + d)];
    corr[static_cast<size_t>(d + filter_len - 1)] = acc;
  }
  return corr;
}

// Projection of the (zero-padded) estimate onto the span of the given
// references delayed by 0..L-1 samples. Output has length N + L - 1.
std::vector<double> project_onto_shifts(const std::vector<double>& estimate,
                                        const std::vector<const std::vector<double>*>& refs,
                                        int filter_len) {
  const int k = static_cast<int>(refs.size());
  const int l = filter_len;
  const long n = static_cast<long>(estimate.size());
  const int dim = k * l;

  // Gram matrix from full cross-correlations (signals are zero outside
  // their support, so blocks are Toeplitz).
  Eigen::MatrixXd gram(dim, dim);
  for (int j = 0; j < k; ++j) {
    for (int i = j; i < k; ++i) {
      const std::vector<double> corr = cross_corr(*refs[static_cast<size_t>(i)],
                                                  *refs[static_cast<size_t>(j)], l);
      for (int ti = 0; ti < l; ++ti) {
        for (int tj = 0; tj < l; ++tj) {
          // <r_i shifted ti, r_j shifted tj> = corr at lag ti - tj
          const double v = corr[static_cast<size_t>(ti - tj + l - 1)];
          gram(i * l + ti, j * l + tj) = v;
          gram(j * l + tj, i * l + ti) = v;
        }
      }
    }
  }

  Eigen::VectorXd rhs(dim);
  for (int j = 0; j < k; ++j) {
    const std::vector<double>& r = *refs[static_cast<size_t>(j)];
    for (int tau = 0; tau < l; ++tau) {
      double acc = 0.0;
      for (long m = 0; m + tau < n && m < n; ++m)
        acc += r[static_cast<size_t>(m)] * estimate[static_cast<size_t>(m + tau)];
      rhs(j * l + tau) = acc;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  Eigen::VectorXd coeff;
  if (llt.info() == Eigen::Success) {
    coeff = llt.solve(rhs);
  } else {
    // Near-singular reference span: ridge-regularized solve.
    std::cerr << "bss_decompose: singular projection system, adding ridge 1e-10\n";
    const double ridge = 1e-10 * std::max(1.0, gram.diagonal().maxCoeff());
    Eigen::MatrixXd g2 = gram;
    for (int i = 0; i < dim; ++i) g2(i, i) += ridge;
    coeff = Eigen::LLT<Eigen::MatrixXd>(g2).solve(rhs);
  }

  std::vector<double> out(static_cast<size_t>(n + l - 1), 0.0);
  for (int j = 0; j < k; ++j) {
    const std::vector<double>& r = *refs[static_cast<size_t>(j)];
    for (int tau = 0; tau < l; ++tau) {
      const double c = coeff(j * l + tau);
      if (c == 0.0) continue;
      for (long m = 0; m < n; ++m) out[static_cast<size_t>(m + tau)] += c * r[static_cast<size_t>(m)];
    }
  }
  return out;
}

double energy(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double db_ratio(double num, double den, double floor_energy) {
  const double d = std::max(den, floor_energy);
  const double v = 10.0 * std::log10(num / d);
  return std::min(v, kMetricClipDb);
}

}  // namespace

BssDecomposition bss_decompose(const std::vector<double>& estimate,
                               const std::vector<std::vector<double>>& references,
                               int target_index, int filter_len) {
  if (references.empty()) throw InputError("bss_decompose: no references");
  if (target_index < 0 || target_index >= static_cast<int>(references.size()))
    throw IndexError("bss_decompose: target index out of range");
  if (filter_len < 1) throw InputError("bss_decompose: filter_len must be >= 1");
  for (const auto& r : references)
    if (r.size() != estimate.size())
      throw ShapeError("bss_decompose: reference/estimate length mismatch");
  if (static_cast<size_t>(filter_len) > estimate.size())
    throw InputError("bss_decompose: filter_len longer than the signals");

  const long n = static_cast<long>(estimate.size());
  const size_t out_len = static_cast<size_t>(n + filter_len - 1);

  std::vector<const std::vector<double>*> target_only{
      &references[static_cast<size_t>(target_index)]};
  std::vector<double> s_target = project_onto_shifts(estimate, target_only, filter_len);

  std::vector<const std::vector<double>*> all;
  for (const auto& r : references) all.push_back(&r);
  std::vector<double> p_all = project_onto_shifts(estimate, all, filter_len);

  BssDecomposition d;
  d.s_target = std::move(s_target);
  d.e_interf.resize(out_len);
  d.e_artif.resize(out_len);
  for (size_t i = 0; i < out_len; ++i) {
    const double est = i < static_cast<size_t>(n) ? estimate[i] : 0.0;
    d.e_interf[i] = p_all[i] - d.s_target[i];
    d.e_artif[i] = est - p_all[i];
  }
  return d;
}

BssMetrics metrics(const BssDecomposition& d) {
  const double es = energy(d.s_target);
  if (es <= 0.0) throw UndefinedMetricError("metrics: zero target component");
  const double floor_energy = 1e-12 * es;

  const double ei = energy(d.e_interf);
  double e_total = 0.0;
  for (size_t i = 0; i < d.s_target.size(); ++i) {
    const double v = d.e_interf[i] + d.e_artif[i];
    e_total += v * v;
  }
  double es_plus_interf = 0.0;
  for (size_t i = 0; i < d.s_target.size(); ++i) {
    const double v = d.s_target[i] + d.e_interf[i];
    es_plus_interf += v * v;
  }
  const double ea = energy(d.e_artif);

  BssMetrics m;
  m.sdr = db_ratio(es, e_total, floor_energy);
  m.sir = db_ratio(es, ei, floor_energy);
  m.sar = db_ratio(es_plus_interf, ea, 1e-12 * std::max(es_plus_interf, es));
  return m;
}

Mat mixture_baseline_separator(const Mat& mix_patch, int task_index) {
  (void)task_index;
  return mix_patch;
}

std::optional<EvalResult> evaluate_track(const std::string& dataset_root,
                                         const std::string& track_id, int task_index,
                                         const std::vector<std::string>& tasks,
                                         const PipelineConfig& pipeline,
                                         const Separator& separator, int filter_len) {
  if (task_index < 0 || task_index >= static_cast<int>(tasks.size()))
    throw IndexError("evaluate_track: task index out of range");

  auto load_audio = [&](const std::string& stem) {
    const std::string path = (fs::path(dataset_root) / track_id / (stem + ".wav")).string();
    AudioSignal sig;
    try {
      sig = load_wav(path);
    } catch (const NotFoundError&) {
      throw DataError("evaluate_track: missing stem file " + path);
    }
    if (sig.sample_rate != pipeline.sample_rate) sig = resample(sig, pipeline.sample_rate);
    return sig;
  };

  const AudioSignal mix = load_audio("mixture");
  const ComplexSpectrogram mix_spec = stft(mix, pipeline.window_size, pipeline.hop);
  const MagnitudeSpectrogram mix_mag = normalize_per_song(magnitude(mix_spec));
  const PhaseSpectrogram mix_phase = phase(mix_spec);

  const std::vector<Patch> patches = extract_patches(mix_mag, pipeline.patch_frames, track_id);
  std::vector<Mat> estimates;
  estimates.reserve(patches.size());
  for (const Patch& p : patches) estimates.push_back(separator(p.values, task_index));

  const AudioSignal est_audio = reconstruct(estimates, mix_phase, mix_mag.norm_scale,
                                            pipeline.window_size, pipeline.hop,
                                            pipeline.sample_rate);

  AudioSignal target = load_audio(tasks[static_cast<size_t>(task_index)]);
  if (energy(target.samples) <= 0.0) return std::nullopt;  // undefined metrics, missing row

  AudioSignal accomp;
  accomp.sample_rate = pipeline.sample_rate;
  for (size_t t = 0; t < tasks.size(); ++t) {
    if (static_cast<int>(t) == task_index) continue;
    AudioSignal stem = load_audio(tasks[t]);
    if (accomp.samples.empty()) {
      accomp.samples = std::move(stem.samples);
    } else {
      const size_t n = std::min(accomp.samples.size(), stem.samples.size());
      accomp.samples.resize(n);
      for (size_t i = 0; i < n; ++i) accomp.samples[i] += stem.samples[i];
    }
  }

  const size_t n = std::min({est_audio.samples.size(), target.samples.size(),
                             accomp.samples.size()});
  std::vector<double> est(est_audio.samples.begin(), est_audio.samples.begin() + n);
  std::vector<std::vector<double>> refs(2);
  refs[0].assign(target.samples.begin(), target.samples.begin() + n);
  refs[1].assign(accomp.samples.begin(), accomp.samples.begin() + n);

  const BssDecomposition d = bss_decompose(est, refs, 0, filter_len);
  const BssMetrics m = metrics(d);

  EvalResult r;
  r.track_id = track_id;
  r.task = tasks[static_cast<size_t>(task_index)];
  r.sdr = m.sdr;
  r.sir = m.sir;
  r.sar = m.sar;
  return r;
}

namespace {

// Regularized incomplete beta via Lentz continued fractions, for the
// two-sided t-distribution p-value.
double log_gamma(double x) { return std::lgamma(x); }

double betacf(double a, double b, double x) {
  const int max_iter = 200;
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  const double x = dof / (dof + t * t);
  return incbeta(dof / 2.0, 0.5, x);
}

}  // namespace

CorrelationReport pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InputError("pearson: length mismatch");
  const size_t n = xs.size();
  if (n < 3) throw InputError("pearson: need at least three points");

  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw UndefinedCorrelationError("pearson: zero variance input");

  CorrelationReport rep;
  rep.n_points = static_cast<int>(n);
  rep.r = sxy / std::sqrt(sxx * syy);
  rep.r = std::clamp(rep.r, -1.0, 1.0);

  const double dof = static_cast<double>(n - 2);
  if (std::fabs(rep.r) >= 1.0) {
    rep.p_value = 0.0;
  } else {
    const double t = rep.r * std::sqrt(dof / (1.0 - rep.r * rep.r));
    rep.p_value = student_t_two_sided_p(t, dof);
  }
  rep.grouping = "global";
  return rep;
}

CompareOutput compare_models(const std::vector<EvalResult>& results_a,
                             const std::vector<EvalResult>& results_b) {
  std::map<std::pair<std::string, std::string>, const EvalResult*> index_b;
  for (const EvalResult& r : results_b) index_b[{r.track_id, r.task}] = &r;

  struct Point {
    std::string task;
    int metric;  // 0 sdr, 1 sir, 2 sar
    double a, b;
  };
  std::vector<Point> points;
  int dropped = 0;
  std::map<std::pair<std::string, std::string>, bool> matched_b;
  for (const EvalResult& ra : results_a) {
    auto it = index_b.find({ra.track_id, ra.task});
    if (it == index_b.end()) {
      ++dropped;
      continue;
    }
    matched_b[{ra.track_id, ra.task}] = true;
    const EvalResult& rb = *it->second;
    points.push_back({ra.task, 0, ra.sdr, rb.sdr});
    points.push_back({ra.task, 1, ra.sir, rb.sir});
    points.push_back({ra.task, 2, ra.sar, rb.sar});
  }
  for (const EvalResult& rb : results_b)
    if (!matched_b.count({rb.track_id, rb.task})) ++dropped;
  if (dropped > 0)
    std::cerr << "compare_models: dropped " << dropped << " unmatched result rows\n";

  if (points.empty())
    throw UndefinedCorrelationError("compare_models: no overlapping (track, task) pairs");

  auto report_for = [](const std::vector<Point>& pts, const std::string& grouping) {
    std::vector<double> xs, ys;
    for (const Point& p : pts) {
      xs.push_back(p.a);
      ys.push_back(p.b);
    }
    CorrelationReport rep = pearson(xs, ys);
    rep.grouping = grouping;
    return rep;
  };

  CompareOutput out;
  out.dropped_rows = dropped;
  out.global = report_for(points, "global");

  std::vector<std::string> task_order;
  for (const Point& p : points)
    if (std::find(task_order.begin(), task_order.end(), p.task) == task_order.end())
      task_order.push_back(p.task);
  for (const std::string& task : task_order) {
    std::vector<Point> sub;
    for (const Point& p : points)
      if (p.task == task) sub.push_back(p);
    if (sub.size() >= 3) out.per_task.push_back(report_for(sub, "task:" + task));
  }
  const char* metric_names[3] = {"sdr", "sir", "sar"};
  for (int m = 0; m < 3; ++m) {
    std::vector<Point> sub;
    for (const Point& p : points)
      if (p.metric == m) sub.push_back(p);
    if (sub.size() >= 3)
      out.per_metric.push_back(report_for(sub, std::string("metric:") + metric_names[m]));
  }
  return out;
}

namespace {

struct Stats {
  double mean = 0.0, stdev = 0.0, median = 0.0;
  int n = 0;
};

Stats stats_of(std::vector<double> v) {
  Stats s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stdev += (x - s.mean) * (x - s.mean);
  s.stdev = v.size() > 1 ? std::sqrt(s.stdev / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  const size_t mid = v.size() / 2;
  s.median = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
  return s;
}

std::string cell(const Stats& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%6.2f +- %5.2f (%5.2f)", s.mean, s.stdev, s.median);
  return buf;
}

}  // namespace

std::string summary_table(const std::vector<EvalResult>& results, const std::string& title) {
  std::vector<std::string> task_order;
  for (const EvalResult& r : results)
    if (std::find(task_order.begin(), task_order.end(), r.task) == task_order.end())
      task_order.push_back(r.task);

  std::ostringstream os;
  os << title << "\n";
  os << "task        " << "  SIR                      SAR                      SDR\n";
  auto emit_row = [&](const std::string& label, const std::vector<EvalResult>& rows) {
    std::vector<double> sir, sar, sdr;
    for (const EvalResult& r : rows) {
      sir.push_back(r.sir);
      sar.push_back(r.sar);
      sdr.push_back(r.sdr);
    }
    char lbl[32];
    std::snprintf(lbl, sizeof lbl, "%-12s", label.c_str());
    os << lbl << cell(stats_of(sir)) << "  " << cell(stats_of(sar)) << "  "
       << cell(stats_of(sdr)) << "\n";
  };
  for (const std::string& task : task_order) {
    std::vector<EvalResult> rows;
    for (const EvalResult& r : results)
      if (r.task == task) rows.push_back(r);
    emit_row(task, rows);
  }
  emit_row("total", results);
  return os.str();
}

void write_results_csv(const std::string& path, const std::vector<EvalResult>& results) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("write_results_csv: cannot open " + path);
  os << "track_id,task,metric,value\n";
  char buf[64];
  for (const EvalResult& r : results) {
    const std::pair<const char*, double> rows[3] = {{"sdr", r.sdr}, {"sir", r.sir},
                                                    {"sar", r.sar}};
    for (const auto& [metric, value] : rows) {
      std::snprintf(buf, sizeof buf, "%.12g", value);
      os << r.track_id << "," << r.task << "," << metric << "," << buf << "\n";
    }
  }
  if (!os) throw IoError("write_results_csv: write failed for " + path);
}

std::vector<EvalResult> read_results_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw NotFoundError("read_results_csv: cannot open " + path);

  std::map<std::pair<std::string, std::string>, EvalResult> rows;
  std::vector<std::pair<std::string, std::string>> order;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string track, task, metric, value;
    if (!std::getline(ls, track, ',') || !std::getline(ls, task, ',') ||
        !std::getline(ls, metric, ',') || !std::getline(ls, value))
      throw FormatError("read_results_csv: bad line in " + path);
    auto key = std::make_pair(track, task);
    auto it = rows.find(key);
    if (it == rows.end()) {
      EvalResult r;
      r.track_id = track;
      r.task = task;
      it = rows.emplace(key, r).first;
      order.push_back(key);
    }
    const double v = std::strtod(value.c_str(), nullptr);
    if (metric == "sdr")
      it->second.sdr = v;
    else if (metric == "sir")
      it->second.sir = v;
    else if (metric == "sar")
      it->second.sar = v;
    else
      throw FormatError("read_results_csv: unknown metric '" + metric + "' in " + path);
  }
  std::vector<EvalResult> out;
  out.reserve(order.size());
  for (const auto& key : order) out.push_back(rows[key]);
  return out;
}

}  // namespace cunet
