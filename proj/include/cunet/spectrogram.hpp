// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_SPECTROGRAM_HPP
#define CUNET_SPECTROGRAM_HPP

#include <complex>
#include <string>
#include <vector>

#include "cunet/audio.hpp"
#include "cunet/tensor.hpp"

namespace cunet {

// STFT output, bins x frames with bins = window_size/2 + 1.
struct ComplexSpectrogram {
  int window_size = 0;
  int hop = 0;
  int sample_rate = 0;
  int bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> d;  // row-major [bins][frames]

  std::complex<double>& at(int b, int t) { return d[static_cast<size_t>(b) * frames + t]; }
  std::complex<double> at(int b, int t) const { return d[static_cast<size_t>(b) * frames + t]; }
};

struct MagnitudeSpectrogram {
  Mat values;              // bins x frames, non-negative
  double norm_scale = 1.0;  // per-song maximum divided out by normalize_per_song
};

struct PhaseSpectrogram {
  Mat angles;  // bins x frames, radians in (-pi, pi]
};

// A fixed-width slice of a magnitude spectrogram with the Nyquist row
// dropped, ready to feed the network.
struct Patch {
  Mat values;
  std::string source_track;
  long frame_offset = 0;
  int padded_frames = 0;  // trailing frames that are zero padding
};

// In-place Cooley-Tukey when n is a power of two, direct DFT otherwise.
void fft(std::vector<std::complex<double>>& x, bool inverse);

// Hann-windowed STFT; frame count = 1 + floor((len - window) / hop).
ComplexSpectrogram stft(const AudioSignal& signal, int window_size, int hop);

// Weighted overlap-add inverse with window-square normalization.
AudioSignal istft(const ComplexSpectrogram& spec);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);
PhaseSpectrogram phase(const ComplexSpectrogram& spec);

// Divides by the spectrogram maximum and records it in norm_scale.
MagnitudeSpectrogram normalize_per_song(const MagnitudeSpectrogram& mag);
// Applies an externally chosen scale (the mixture maximum, shared by stems).
MagnitudeSpectrogram apply_norm_scale(const MagnitudeSpectrogram& mag, double scale);

// Non-overlapping width-frame patches, left to right; the trailing partial
// patch is zero padded and flagged. The highest (Nyquist) bin row is
// dropped so the row count is even.
std::vector<Patch> extract_patches(const MagnitudeSpectrogram& mag, int width,
                                   const std::string& source_track = "");

// Concatenates estimated magnitude patches without overlap, rescales by
// norm_scale, reinserts the dropped Nyquist row as zeros, attaches the mix
// phase and runs the inverse STFT. Trailing padded frames are trimmed to
// the phase frame count.
AudioSignal reconstruct(const std::vector<Mat>& estimated_mags, const PhaseSpectrogram& mix_phase,
                        double norm_scale, int window_size, int hop, int sample_rate);

}  // namespace cunet

#endif  // CUNET_SPECTROGRAM_HPP
