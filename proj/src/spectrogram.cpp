// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/spectrogram.hpp"

#include <algorithm>
#include <cmath>

#include "cunet/errors.hpp"

namespace cunet {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Periodic Hann, w[i] = 0.5 (1 - cos(2 pi i / N)).
std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
  return w;
}

void dft(std::vector<std::complex<double>>& x, bool inverse) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (int t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * M_PI * k * t / n;
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  if (inverse)
    for (auto& v : out) v /= static_cast<double>(n);
  x = std::move(out);
}

}  // namespace

void fft(std::vector<std::complex<double>>& x, bool inverse) {
  const int n = static_cast<int>(x.size());
  if (n <= 1) return;
  if (!is_pow2(n)) {
    dft(x, inverse);
    return;
  }
  // Bit-reversal permutation.
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / len;
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w{1.0, 0.0};
      for (int k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& v : x) v /= static_cast<double>(n);
}

ComplexSpectrogram stft(const AudioSignal& signal, int window_size, int hop) {
  if (window_size <= 0 || hop <= 0) throw ConfigError("stft: window and hop must be positive");
  if (hop > window_size) throw ConfigError("stft: hop must not exceed window size");
  const long len = static_cast<long>(signal.samples.size());
  if (len < window_size) throw InputTooShortError("stft: signal shorter than one window");

  const int frames = 1 + static_cast<int>((len - window_size) / hop);
  const int bins = window_size / 2 + 1;
  const std::vector<double> window = hann_window(window_size);

  ComplexSpectrogram spec;
  spec.window_size = window_size;
  spec.hop = hop;
  spec.sample_rate = signal.sample_rate;
  spec.bins = bins;
  spec.frames = frames;
  spec.d.assign(static_cast<size_t>(bins) * frames, {0.0, 0.0});

  std::vector<std::complex<double>> buf(window_size);
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * hop;
    for (int i = 0; i < window_size; ++i)
      buf[i] = {signal.samples[start + i] * window[i], 0.0};
    fft(buf, false);
    for (int b = 0; b < bins; ++b) spec.at(b, t) = buf[b];
  }
  return spec;
}

AudioSignal istft(const ComplexSpectrogram& spec) {
  const int n = spec.window_size;
  const int hop = spec.hop;
  if (n <= 0 || hop <= 0) throw ConfigError("istft: invalid window/hop");
  // hop == window loses the zero-weighted first window sample with Hann.
  if (hop >= n) throw ConfigError("istft: window/hop does not satisfy COLA coverage");
  if (spec.bins != n / 2 + 1) throw ShapeError("istft: bin count inconsistent with window size");

  const std::vector<double> window = hann_window(n);
  const long out_len = static_cast<long>(n) + static_cast<long>(spec.frames - 1) * hop;

  std::vector<double> acc(out_len, 0.0);
  std::vector<double> wsum(out_len, 0.0);
  std::vector<std::complex<double>> buf(n);

  for (int t = 0; t < spec.frames; ++t) {
    for (int b = 0; b < spec.bins; ++b) buf[b] = spec.at(b, t);
    for (int b = spec.bins; b < n; ++b) buf[b] = std::conj(spec.at(n - b, t));
    fft(buf, true);
    const long start = static_cast<long>(t) * hop;
    for (int i = 0; i < n; ++i) {
      acc[start + i] += buf[i].real() * window[i];
      wsum[start + i] += window[i] * window[i];
    }
  }

  // Samples with almost no window coverage (the outermost few of the
  // first/last frame) cannot be reconstructed from modified spectra
  // without blowing up leakage, so they are zeroed instead of amplified.
  constexpr double kWsumFloor = 1e-6;
  AudioSignal out;
  out.sample_rate = spec.sample_rate;
  out.samples.resize(out_len);
  for (long i = 0; i < out_len; ++i)
    out.samples[i] = wsum[i] > kWsumFloor ? acc[i] / wsum[i] : 0.0;
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram mag;
  mag.values = Mat(spec.bins, spec.frames);
  for (int b = 0; b < spec.bins; ++b)
    for (int t = 0; t < spec.frames; ++t) mag.values(b, t) = std::abs(spec.at(b, t));
  return mag;
}

PhaseSpectrogram phase(const ComplexSpectrogram& spec) {
  PhaseSpectrogram ph;
  ph.angles = Mat(spec.bins, spec.frames);
  for (int b = 0; b < spec.bins; ++b)
    for (int t = 0; t < spec.frames; ++t) ph.angles(b, t) = std::arg(spec.at(b, t));
  return ph;
}

MagnitudeSpectrogram normalize_per_song(const MagnitudeSpectrogram& mag) {
  const double maxv = mag.values.max_abs();
  if (maxv <= 0.0) throw DegenerateInputError("normalize_per_song: all-zero spectrogram");
  return apply_norm_scale(mag, maxv);
}

MagnitudeSpectrogram apply_norm_scale(const MagnitudeSpectrogram& mag, double scale) {
  if (scale <= 0.0) throw InputError("apply_norm_scale: scale must be positive");
  MagnitudeSpectrogram out;
  out.values = mag.values;
  for (double& v : out.values.raw()) v /= scale;
  out.norm_scale = scale;
  return out;
}

std::vector<Patch> extract_patches(const MagnitudeSpectrogram& mag, int width,
                                   const std::string& source_track) {
  if (width <= 0) throw InputError("extract_patches: width must be positive");
  const int rows_in = mag.values.rows();
  const int frames = mag.values.cols();
  if (rows_in < 2) throw ShapeError("extract_patches: need at least two bins");
  const int rows = rows_in - 1;  // drop the Nyquist row

  const int n_patches = std::max(1, (frames + width - 1) / width);
  std::vector<Patch> patches;
  patches.reserve(n_patches);
  for (int p = 0; p < n_patches; ++p) {
    Patch patch;
    patch.values = Mat(rows, width);
    patch.source_track = source_track;
    patch.frame_offset = static_cast<long>(p) * width;
    const int have = std::min(width, frames - p * width);
    patch.padded_frames = width - have;
    for (int r = 0; r < rows; ++r)
      for (int t = 0; t < have; ++t) patch.values(r, t) = mag.values(r, p * width + t);
    patches.push_back(std::move(patch));
  }
  return patches;
}

AudioSignal reconstruct(const std::vector<Mat>& estimated_mags, const PhaseSpectrogram& mix_phase,
                        double norm_scale, int window_size, int hop, int sample_rate) {
  if (estimated_mags.empty()) throw InputError("reconstruct: no patches");
  const int rows = estimated_mags.front().rows();
  const int width = estimated_mags.front().cols();
  for (const Mat& m : estimated_mags)
    if (m.rows() != rows || m.cols() != width)
      throw ShapeError("reconstruct: inconsistent patch shapes");

  const int phase_bins = mix_phase.angles.rows();
  const int phase_frames = mix_phase.angles.cols();
  if (phase_bins != rows + 1)
    throw ShapeError("reconstruct: phase bins must equal patch rows + 1 (Nyquist row)");

  const long concat_frames = static_cast<long>(estimated_mags.size()) * width;
  if (concat_frames < phase_frames || concat_frames - phase_frames >= width)
    throw ShapeError("reconstruct: frame count mismatch beyond padding");

  ComplexSpectrogram spec;
  spec.window_size = window_size;
  spec.hop = hop;
  spec.sample_rate = sample_rate;
  spec.bins = phase_bins;
  spec.frames = phase_frames;
  spec.d.assign(static_cast<size_t>(phase_bins) * phase_frames, {0.0, 0.0});

  for (int t = 0; t < phase_frames; ++t) {
    const int p = t / width;
    const int local = t % width;
    for (int b = 0; b < rows; ++b) {
      const double mag = estimated_mags[static_cast<size_t>(p)](b, local) * norm_scale;
      const double ang = mix_phase.angles(b, t);
      spec.at(b, t) = std::polar(mag, ang);
    }
    spec.at(rows, t) = {0.0, 0.0};  // dropped Nyquist row comes back as zeros
  }
  return istft(spec);
}

}  // namespace cunet
