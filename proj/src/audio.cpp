// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cunet/errors.hpp"

namespace cunet {

namespace {

uint32_t read_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

// Zeroth-order modified Bessel function, for the Kaiser window.
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::fabs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

AudioSignal load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("load_wav: cannot open " + path);

  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("load_wav: not a RIFF/WAVE file: " + path);
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const uint8_t* data_ptr = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    uint32_t len = read_u32le(bytes.data() + pos + 4);
    pos += 8;
    if (pos + len > bytes.size()) throw FormatError("load_wav: truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("load_wav: short fmt chunk in " + path);
      format = read_u16le(bytes.data() + pos);
      channels = read_u16le(bytes.data() + pos + 2);
      rate = read_u32le(bytes.data() + pos + 4);
      bits = read_u16le(bytes.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_ptr == nullptr)
    throw FormatError("load_wav: missing fmt/data chunk in " + path);
  if (channels == 0 || rate == 0) throw FormatError("load_wav: bad fmt chunk in " + path);

  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    throw FormatError("load_wav: unsupported encoding (need 16-bit PCM or 32-bit float): " + path);

  const size_t bytes_per_sample = pcm16 ? 2 : 4;
  const size_t frame_bytes = bytes_per_sample * channels;
  const size_t frames = data_len / frame_bytes;

  AudioSignal sig;
  sig.sample_rate = static_cast<int>(rate);
  sig.samples.resize(frames);
  for (size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
      const uint8_t* sp = data_ptr + f * frame_bytes + ch * bytes_per_sample;
      if (pcm16) {
        int16_t v = static_cast<int16_t>(sp[0] | (sp[1] << 8));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        uint32_t u = read_u32le(sp);
        float fv;
        std::memcpy(&fv, &u, sizeof fv);
        acc += static_cast<double>(fv);
      }
    }
    sig.samples[f] = acc / channels;
  }
  for (double v : sig.samples) {
    if (!std::isfinite(v)) throw FormatError("load_wav: non-finite sample in " + path);
  }
  return sig;
}

void save_wav(const std::string& path, const AudioSignal& signal, WavEncoding encoding) {
  if (signal.sample_rate <= 0) throw InputError("save_wav: sample_rate must be positive");

  const uint32_t n = static_cast<uint32_t>(signal.samples.size());
  const uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const uint16_t fmt = encoding == WavEncoding::Pcm16 ? 1 : 3;
  const uint32_t data_bytes = n * (bits / 8);

  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, fmt);
  put_u16le(out, 1);  // mono
  put_u32le(out, static_cast<uint32_t>(signal.sample_rate));
  put_u32le(out, static_cast<uint32_t>(signal.sample_rate) * (bits / 8));
  put_u16le(out, bits / 8);
  put_u16le(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, data_bytes);

  if (encoding == WavEncoding::Pcm16) {
    for (double v : signal.samples) {
      const double clamped = std::clamp(v, -1.0, 1.0);
      const int16_t q = static_cast<int16_t>(std::lrint(clamped * 32767.0));
      put_u16le(out, static_cast<uint16_t>(q));
    }
  } else {
    for (double v : signal.samples) {
      const float fv = static_cast<float>(v);
      uint32_t u;
      std::memcpy(&u, &fv, sizeof u);
      put_u32le(out, u);
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_wav: cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("save_wav: write failed for " + path);
}

AudioSignal resample(const AudioSignal& signal, int target_rate) {
  if (target_rate <= 0) throw InputError("resample: target_rate must be positive");
  if (signal.sample_rate <= 0) throw InputError("resample: input rate must be positive");
  if (signal.sample_rate == target_rate) return signal;

  const double ratio = static_cast<double>(target_rate) / signal.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // as a fraction of the input Nyquist
  const int branch_taps = 64;
  const double half_width = (branch_taps / 2) / cutoff;  // in input samples
  const double beta = 8.6;
  const double i0_beta = bessel_i0(beta);

  const size_t in_len = signal.samples.size();
  const size_t out_len =
      static_cast<size_t>(std::llround(static_cast<double>(in_len) * ratio));

  AudioSignal out;
  out.sample_rate = target_rate;
  out.samples.assign(out_len, 0.0);

  for (size_t n = 0; n < out_len; ++n) {
    const double center = static_cast<double>(n) / ratio;
    const long lo = static_cast<long>(std::ceil(center - half_width));
    const long hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0;
    for (long i = std::max<long>(lo, 0); i <= std::min<long>(hi, static_cast<long>(in_len) - 1);
         ++i) {
      const double t = static_cast<double>(i) - center;
      const double u = t / half_width;  // in [-1, 1]
      const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      acc += signal.samples[static_cast<size_t>(i)] * cutoff * sinc(cutoff * t) * win;
    }
    out.samples[n] = acc;
  }
  return out;
}

AudioSignal accompaniment(const AudioSignal& mix, const AudioSignal& estimate) {
  if (mix.samples.size() != estimate.samples.size())
    throw ShapeError("accompaniment: length mismatch");
  if (mix.sample_rate != estimate.sample_rate)
    throw ShapeError("accompaniment: sample rate mismatch");
  AudioSignal out;
  out.sample_rate = mix.sample_rate;
  out.samples.resize(mix.samples.size());
  for (size_t i = 0; i < mix.samples.size(); ++i)
    out.samples[i] = mix.samples[i] - estimate.samples[i];
  return out;
}

}  // namespace cunet
