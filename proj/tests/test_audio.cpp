// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/audio.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "cunet/errors.hpp"
#include "doctest.h"
#include "support/test_util.hpp"

using namespace cunet;
using testutil::TempDir;

namespace {

// Minimal 16-bit PCM writer independent of save_wav, so load/save paths
// check each other.
void write_pcm16(const std::string& path, const std::vector<std::vector<int16_t>>& channels,
                 uint32_t rate) {
  const uint16_t n_ch = static_cast<uint16_t>(channels.size());
  const uint32_t frames = static_cast<uint32_t>(channels[0].size());
  const uint32_t data_bytes = frames * n_ch * 2;
  std::ofstream os(path, std::ios::binary);
  auto u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
  os.write("RIFF", 4);
  u32(36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  u32(16);
  u16(1);
  u16(n_ch);
  u32(rate);
  u32(rate * n_ch * 2);
  u16(static_cast<uint16_t>(n_ch * 2));
  u16(16);
  os.write("data", 4);
  u32(data_bytes);
  for (uint32_t f = 0; f < frames; ++f)
    for (uint16_t c = 0; c < n_ch; ++c)
      u16(static_cast<uint16_t>(channels[c][f]));
}

std::vector<double> make_sine(double freq, int rate, double duration_s, double fade_s) {
  const int n = static_cast<int>(rate * duration_s);
  std::vector<double> x(static_cast<size_t>(n));
  const int fade = static_cast<int>(fade_s * rate);
  for (int i = 0; i < n; ++i) {
    double env = 1.0;
    if (i < fade) env = 0.5 * (1.0 - std::cos(M_PI * i / fade));
    if (i >= n - fade) env = 0.5 * (1.0 - std::cos(M_PI * (n - 1 - i) / fade));
    x[static_cast<size_t>(i)] = 0.8 * env * std::sin(2.0 * M_PI * freq * i / rate);
  }
  return x;
}

}  // namespace

TEST_CASE("load_wav scales 16-bit samples to [-1, 1]") {
  TempDir tmp("wav");
  const std::string path = tmp.str() + "/mono.wav";
  write_pcm16(path, {{0, 16384, -16384}}, 8192);

  AudioSignal sig = load_wav(path);
  CHECK(sig.sample_rate == 8192);
  REQUIRE(sig.samples.size() == 3);
  CHECK(sig.samples[0] == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(sig.samples[1] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(sig.samples[2] == doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("load_wav averages channels to mono") {
  TempDir tmp("wav");
  const std::string path = tmp.str() + "/stereo.wav";
  write_pcm16(path, {{32767, 32767}, {0, 0}}, 44100);

  AudioSignal sig = load_wav(path);
  REQUIRE(sig.samples.size() == 2);
  CHECK(sig.samples[0] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("load_wav error cases") {
  TempDir tmp("wav");
  CHECK_THROWS_AS(load_wav(tmp.str() + "/missing.wav"), NotFoundError);

  const std::string bad = tmp.str() + "/bad.wav";
  std::ofstream(bad, std::ios::binary) << "RIFFxx";  // truncated header
  CHECK_THROWS_AS(load_wav(bad), FormatError);

  const std::string notwav = tmp.str() + "/not.wav";
  std::ofstream(notwav, std::ios::binary) << "OggS this is not a wav file at all";
  CHECK_THROWS_AS(load_wav(notwav), FormatError);
}

TEST_CASE("wav round trip through save_wav") {
  TempDir tmp("wav");
  AudioSignal sig;
  sig.sample_rate = 8192;
  sig.samples = {0.0, 0.25, -0.25, 0.999, -1.0};

  SUBCASE("pcm16") {
    save_wav(tmp.str() + "/w.wav", sig, WavEncoding::Pcm16);
    AudioSignal back = load_wav(tmp.str() + "/w.wav");
    REQUIRE(back.samples.size() == sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i)
      CHECK(back.samples[i] == doctest::Approx(sig.samples[i]).epsilon(1e-3));
  }
  SUBCASE("float32 is lossless at float precision") {
    save_wav(tmp.str() + "/w.wav", sig, WavEncoding::Float32);
    AudioSignal back = load_wav(tmp.str() + "/w.wav");
    REQUIRE(back.samples.size() == sig.samples.size());
    for (size_t i = 0; i < sig.samples.size(); ++i)
      CHECK(back.samples[i] == static_cast<double>(static_cast<float>(sig.samples[i])));
  }
}

TEST_CASE("resample identity when rates match") {
  AudioSignal sig;
  sig.sample_rate = 8192;
  sig.samples = {0.1, -0.2, 0.3};
  AudioSignal out = resample(sig, 8192);
  CHECK(out.samples == sig.samples);
}

TEST_CASE("resample maps silence to silence with the right length") {
  AudioSignal sig;
  sig.sample_rate = 44100;
  sig.samples.assign(44100, 0.0);
  AudioSignal out = resample(sig, 8192);
  CHECK(std::abs(static_cast<long>(out.samples.size()) - 8192) <= 1);
  for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("resample matches an analytically generated sine") {
  // Faded sine so the signal decays to zero at both ends; the reference is
  // synthesized directly at the target rate.
  const double freq = 100.0;
  AudioSignal in;
  in.sample_rate = 44100;
  in.samples = make_sine(freq, 44100, 2.0, 0.1);

  AudioSignal out = resample(in, 8192);
  std::vector<double> ref = make_sine(freq, 8192, 2.0, 0.1);
  REQUIRE(std::abs(static_cast<long>(out.samples.size()) -
                   static_cast<long>(ref.size())) <= 1);

  const size_t n = std::min(out.samples.size(), ref.size());
  double err = 0.0;
  for (size_t i = 0; i < n; ++i) err += (out.samples[i] - ref[i]) * (out.samples[i] - ref[i]);
  err = std::sqrt(err / static_cast<double>(n));
  CHECK(err < 1e-3);
}

TEST_CASE("accompaniment is the samplewise difference") {
  AudioSignal mix{{0.5, 0.25, -0.5}, 8192};
  AudioSignal a{{0.2, 0.25, -0.1}, 8192};

  SUBCASE("estimate equals mix -> silence") {
    AudioSignal out = accompaniment(mix, mix);
    for (double v : out.samples) CHECK(v == 0.0);
  }
  SUBCASE("estimate is silence -> mix") {
    AudioSignal silence{{0.0, 0.0, 0.0}, 8192};
    AudioSignal out = accompaniment(mix, silence);
    CHECK(out.samples == mix.samples);
  }
  SUBCASE("linearity: mix = a+b, estimate = a -> b") {
    AudioSignal b{{0.3, 0.0, -0.4}, 8192};
    AudioSignal sum{{0.5, 0.25, -0.5}, 8192};
    AudioSignal out = accompaniment(sum, a);
    for (size_t i = 0; i < b.samples.size(); ++i)
      CHECK(out.samples[i] == doctest::Approx(b.samples[i]).epsilon(1e-12));
  }
  SUBCASE("length mismatch throws") {
    AudioSignal shorter{{0.1}, 8192};
    CHECK_THROWS_AS(accompaniment(mix, shorter), ShapeError);
  }
}
