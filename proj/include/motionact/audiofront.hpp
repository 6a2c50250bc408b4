#pragma once

#include <string>
#include <vector>

#include "motionact/tensor.hpp"

namespace motionact::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr int kMfccCoeffs = 64;
inline constexpr int kMelBands = 80;
inline constexpr int kFftSize = 512;
inline constexpr double kWindowSeconds = 0.025;
inline constexpr double kFrameRate = 30.0;  // one feature row per motion frame

struct AudioClip {
  std::vector<double> samples;  // mono, [-1,1]
  int sample_rate = kSampleRate;
  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// RIFF/WAVE reader: PCM16 or float32, mono or stereo (averaged), any rate
// (linear resample to 16 kHz). Unknown chunks are skipped.
AudioClip load_wav(const std::string& path);
// PCM16 writer used by the synthetic corpus.
void save_wav(const std::string& path, const AudioClip& clip, const std::string& echo);

// 64 MFCCs per motion frame: 25 ms Hann window, hop 1/30 s, 512-point
// magnitude spectrum, 80 mel filters to 8 kHz, log floor 1e-10, DCT-II.
// Row count is floor(duration * 30).
Tensor mfcc(const AudioClip& clip);

// Spectral-flux onset envelope at the frame hop, thresholded at
// mean + std (scale-invariant), local-max picking with a 150 ms minimum gap.
std::vector<double> detect_audio_beats(const AudioClip& clip);

// test access: mel filter center frequencies (Hz), one per band
std::vector<double> mel_center_frequencies();
// test access: log-mel frame before the DCT
Tensor log_mel_frames(const AudioClip& clip);

}  // namespace motionact::audio
