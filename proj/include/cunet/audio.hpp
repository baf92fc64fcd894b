// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CUNET_AUDIO_HPP
#define CUNET_AUDIO_HPP

#include <string>
#include <vector>

namespace cunet {

// Mono time-domain signal, samples nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavEncoding { Pcm16, Float32 };

// Reads a PCM WAV file (16-bit int or 32-bit float), mono or multichannel.
// Multichannel input is averaged down to mono; samples end up in [-1, 1].
AudioSignal load_wav(const std::string& path);

// Writes a mono WAV file. Pcm16 (the default elsewhere in the pipeline)
// clamps to [-1, 1] and rounds; Float32 stores the samples verbatim.
void save_wav(const std::string& path, const AudioSignal& signal,
              WavEncoding encoding = WavEncoding::Pcm16);

// Band-limited resampling with a Kaiser-windowed sinc kernel (beta 8.6,
// 64 taps per output branch). Duration is preserved within one sample.
AudioSignal resample(const AudioSignal& signal, int target_rate);

// Samplewise mix - estimate. Lengths and rates must match.
AudioSignal accompaniment(const AudioSignal& mix, const AudioSignal& estimate);

}  // namespace cunet

#endif  // CUNET_AUDIO_HPP
