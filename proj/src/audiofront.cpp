#include "motionact/audiofront.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>

#include "motionact/io.hpp"

namespace motionact::audio {

namespace {

constexpr int kWindowSamples = static_cast<int>(kWindowSeconds * kSampleRate);  // 400
constexpr double kLogFloor = 1e-10;
constexpr double kMinBeatGap = 0.150;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// In-place iterative radix-2 FFT, n a power of two.
void fft(std::vector<std::complex<double>>& a) {
  size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; i++) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t k = 0; k < len / 2; k++) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Magnitude spectrum of one windowed frame starting at sample `start`;
// frames overrunning the clip are zero-padded.
std::vector<double> frame_spectrum_n(const AudioClip& clip, int64_t start, int window,
                                     int fft_size, bool hann) {
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size), 0.0);
  int64_t n = static_cast<int64_t>(clip.samples.size());
  for (int i = 0; i < window; i++) {
    int64_t src = start + i;
    if (src < 0 || src >= n) continue;
    double w = hann ? 0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(window)) : 1.0;
    buf[static_cast<size_t>(i)] = clip.samples[static_cast<size_t>(src)] * w;
  }
  fft(buf);
  std::vector<double> mag(static_cast<size_t>(fft_size / 2 + 1));
  for (size_t k = 0; k < mag.size(); k++) mag[k] = std::abs(buf[k]);
  return mag;
}

std::vector<double> frame_spectrum(const AudioClip& clip, int64_t start) {
  return frame_spectrum_n(clip, start, kWindowSamples, kFftSize, true);
}

int64_t frame_count(const AudioClip& clip) {
  return static_cast<int64_t>(std::floor(clip.duration() * kFrameRate));
}

int64_t frame_start(int64_t t) {
  return static_cast<int64_t>(std::llround(static_cast<double>(t) * kSampleRate / kFrameRate));
}

// Triangular mel filterbank over the 257 magnitude bins, 0..8000 Hz.
const std::vector<std::vector<double>>& mel_filterbank() {
  static const std::vector<std::vector<double>> bank = [] {
    std::vector<std::vector<double>> filters(kMelBands,
                                             std::vector<double>(kFftSize / 2 + 1, 0.0));
    double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> edges(kMelBands + 2);
    for (int i = 0; i < kMelBands + 2; i++)
      edges[static_cast<size_t>(i)] =
          mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(kMelBands + 1));
    for (int b = 0; b < kMelBands; b++) {
      double lo = edges[static_cast<size_t>(b)], mid = edges[static_cast<size_t>(b + 1)],
             hi = edges[static_cast<size_t>(b + 2)];
      for (int k = 0; k <= kFftSize / 2; k++) {
        double f = static_cast<double>(k) * kSampleRate / kFftSize;
        double w = 0.0;
        if (f > lo && f < mid)
          w = (f - lo) / (mid - lo);
        else if (f >= mid && f < hi)
          w = (hi - f) / (hi - mid);
        filters[static_cast<size_t>(b)][static_cast<size_t>(k)] = w;
      }
    }
    return filters;
  }();
  return bank;
}

}  // namespace

std::vector<double> mel_center_frequencies() {
  std::vector<double> centers(kMelBands);
  double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(kSampleRate / 2.0);
  for (int b = 0; b < kMelBands; b++)
    centers[static_cast<size_t>(b)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (b + 1) / static_cast<double>(kMelBands + 1));
  return centers;
}

AudioClip load_wav(const std::string& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail("'" + path + "': not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    uint32_t len;
    std::memcpy(&len, bytes.data() + pos + 4, 4);
    pos += 8;
    if (pos + len > bytes.size()) fail("'" + path + "': truncated chunk '" + id + "'");
    if (std::strcmp(id, "fmt ") == 0) {
      if (len < 16) fail("'" + path + "': malformed fmt chunk");
      std::memcpy(&format, bytes.data() + pos, 2);
      std::memcpy(&channels, bytes.data() + pos + 2, 2);
      std::memcpy(&rate, bytes.data() + pos + 4, 4);
      std::memcpy(&bits, bytes.data() + pos + 14, 2);
    } else if (std::strcmp(id, "data") == 0) {
      data = bytes.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }
  if (!data || rate == 0 || channels == 0) fail("'" + path + "': missing fmt or data chunk");
  if (!((format == 1 && bits == 16) || (format == 3 && bits == 32)))
    fail("'" + path + "': unsupported codec (format " + std::to_string(format) + ", " +
         std::to_string(bits) + " bits)");

  size_t bytes_per_sample = bits / 8;
  size_t n_in = data_len / (bytes_per_sample * channels);
  if (n_in == 0) fail("'" + path + "': empty audio");

  std::vector<double> mono(n_in);
  for (size_t i = 0; i < n_in; i++) {
    double acc = 0.0;
    for (size_t c = 0; c < channels; c++) {
      const uint8_t* p = data + (i * channels + c) * bytes_per_sample;
      if (format == 1) {
        int16_t v;
        std::memcpy(&v, p, 2);
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += static_cast<double>(v);
      }
    }
    mono[i] = acc / channels;
  }

  AudioClip clip;
  clip.sample_rate = kSampleRate;
  if (rate == kSampleRate) {
    clip.samples = std::move(mono);
  } else {
    int64_t out_len =
        static_cast<int64_t>(std::llround(static_cast<double>(n_in) * kSampleRate / rate));
    clip.samples.resize(static_cast<size_t>(out_len));
    double step = static_cast<double>(rate) / kSampleRate;
    for (int64_t i = 0; i < out_len; i++) {
      double x = static_cast<double>(i) * step;
      int64_t i0 = std::min(static_cast<int64_t>(x), static_cast<int64_t>(n_in - 1));
      int64_t i1 = std::min(i0 + 1, static_cast<int64_t>(n_in - 1));
      double frac = x - static_cast<double>(i0);
      clip.samples[static_cast<size_t>(i)] =
          mono[static_cast<size_t>(i0)] * (1.0 - frac) + mono[static_cast<size_t>(i1)] * frac;
    }
  }
  return clip;
}

void save_wav(const std::string& path, const AudioClip& clip, const std::string& echo) {
  if (clip.samples.empty()) fail("save_wav: empty clip");
  ByteWriter trailer_chunk;
  trailer_chunk.trailer(echo);
  uint32_t extra = static_cast<uint32_t>(trailer_chunk.bytes().size());
  uint32_t data_len = static_cast<uint32_t>(clip.samples.size()) * 2;

  ByteWriter w;
  w.magic("RIFF");
  // WAVE + fmt chunk + data chunk + custom "cfge" chunk with the config echo
  w.u32(4 + 24 + 8 + data_len + (data_len & 1) + 8 + extra + (extra & 1));
  w.magic("WAVE");
  w.magic("fmt ");
  w.u32(16);
  w.u16(1);  // PCM
  w.u16(1);  // mono
  w.u32(static_cast<uint32_t>(clip.sample_rate));
  w.u32(static_cast<uint32_t>(clip.sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.magic("data");
  w.u32(data_len);
  for (double s : clip.samples) {
    double clamped = std::min(1.0, std::max(-1.0, s));
    w.u16(static_cast<uint16_t>(static_cast<int16_t>(std::lround(clamped * 32767.0))));
  }
  if (data_len & 1) w.raw("\0", 1);
  w.magic("cfge");
  w.u32(extra);
  w.raw(trailer_chunk.bytes().data(), trailer_chunk.bytes().size());
  if (extra & 1) w.raw("\0", 1);
  w.save(path);
}

Tensor mfcc(const AudioClip& clip) {
  if (clip.samples.empty() || clip.sample_rate != kSampleRate)
    fail("mfcc: clip must be non-empty 16 kHz mono");
  if (static_cast<int64_t>(clip.samples.size()) < kWindowSamples)
    fail("mfcc: clip shorter than one 25 ms analysis window");
  int64_t t_len = frame_count(clip);
  if (t_len < 1) fail("mfcc: clip shorter than one frame");

  const auto& bank = mel_filterbank();
  Tensor out({t_len, kMfccCoeffs});
  std::vector<double> logmel(kMelBands);
  for (int64_t t = 0; t < t_len; t++) {
    auto mag = frame_spectrum(clip, frame_start(t));
    for (int b = 0; b < kMelBands; b++) {
      double e = 0.0;
      const auto& f = bank[static_cast<size_t>(b)];
      for (size_t k = 0; k < mag.size(); k++) e += f[k] * mag[k];
      logmel[static_cast<size_t>(b)] = std::log(std::max(e, kLogFloor));
    }
    // orthonormal DCT-II, first 64 coefficients
    for (int k = 0; k < kMfccCoeffs; k++) {
      double acc = 0.0;
      for (int m = 0; m < kMelBands; m++)
        acc += logmel[static_cast<size_t>(m)] *
               std::cos(M_PI * k * (2.0 * m + 1.0) / (2.0 * kMelBands));
      double scale = k == 0 ? std::sqrt(1.0 / kMelBands) : std::sqrt(2.0 / kMelBands);
      out.at(t, k) = acc * scale;
    }
  }
  return out;
}

Tensor log_mel_frames(const AudioClip& clip) {
  if (static_cast<int64_t>(clip.samples.size()) < kWindowSamples)
    fail("log_mel_frames: clip shorter than one analysis window");
  int64_t t_len = frame_count(clip);
  const auto& bank = mel_filterbank();
  Tensor out({t_len, kMelBands});
  for (int64_t t = 0; t < t_len; t++) {
    auto mag = frame_spectrum(clip, frame_start(t));
    for (int b = 0; b < kMelBands; b++) {
      double e = 0.0;
      const auto& f = bank[static_cast<size_t>(b)];
      for (size_t k = 0; k < mag.size(); k++) e += f[k] * mag[k];
      out.at(t, b) = std::log(std::max(e, kLogFloor));
    }
  }
  return out;
}

std::vector<double> detect_audio_beats(const AudioClip& clip) {
  if (clip.samples.empty()) return {};
  int64_t t_len = frame_count(clip);
  if (t_len < 2) return {};

  // Spectral flux onset envelope. A rectangular window spanning the whole
  // hop keeps every sample in view at full weight (the MFCC's tapered 25 ms
  // window would leave blind gaps between frames, swallowing short clicks);
  // frame 0 fluxes against silence so an onset at the start still registers.
  const int flux_window = static_cast<int>(kSampleRate / kFrameRate) + 1;  // 534
  const int flux_fft = 1024;
  std::vector<double> flux(static_cast<size_t>(t_len), 0.0);
  std::vector<double> prev(flux_fft / 2 + 1, 0.0);
  for (int64_t t = 0; t < t_len; t++) {
    auto mag = frame_spectrum_n(clip, frame_start(t), flux_window, flux_fft, false);
    double f = 0.0;
    for (size_t k = 0; k < mag.size(); k++) f += std::max(0.0, mag[k] - prev[k]);
    flux[static_cast<size_t>(t)] = f;
    prev = std::move(mag);
  }

  double mean = 0.0;
  for (double f : flux) mean += f;
  mean /= static_cast<double>(t_len);
  double var = 0.0;
  for (double f : flux) var += (f - mean) * (f - mean);
  var /= static_cast<double>(t_len);
  double thr = mean + std::sqrt(var);

  std::vector<double> beats;
  double last = -1e9;
  for (int64_t t = 0; t < t_len; t++) {
    double f = flux[static_cast<size_t>(t)];
    if (f <= thr) continue;
    double left = t > 0 ? flux[static_cast<size_t>(t - 1)] : -1.0;
    double right = t + 1 < t_len ? flux[static_cast<size_t>(t + 1)] : -1.0;
    if (f < left || f <= right) continue;
    double time = static_cast<double>(t) / kFrameRate;
    if (time - last < kMinBeatGap) continue;
    beats.push_back(time);
    last = time;
  }
  return beats;
}

}  // namespace motionact::audio
