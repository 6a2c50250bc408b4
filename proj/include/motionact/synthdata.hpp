#pragma once

#include <string>
#include <vector>

#include "motionact/audiofront.hpp"
#include "motionact/bodymodel.hpp"
#include "motionact/config.hpp"
#include "motionact/tensor.hpp"

namespace motionact::synth {

// Everything that makes a speaker sound and move like themselves. All fields
// are a deterministic function of (corpus seed, id).
struct SpeakerStyle {
  int64_t id = 0;
  double base_tempo = 2.0;  // Hz
  double timbre_hz = 220.0;
  Tensor style_vector;  // [8] gains shaping the pose pulses
  Tensor pose_map;      // [n_affected*3, 8] subspace -> joint rotations
  Tensor base_pose;     // [168] resting posture
  Tensor face_pattern;  // [50] expression direction excited at beats

  static SpeakerStyle derive(uint64_t corpus_seed, int64_t id);
};

struct SynthClip {
  audio::AudioClip audio;
  Tensor motion;   // [T,1458] hybrid points
  Tensor pose_gt;  // [T,168]
  Tensor face_gt;  // [T,53] expression then jaw
  int64_t speaker = 0;
  std::vector<double> beat_times;
};

// Audio: click track at the speaker tempo over a faded-in timbre tone and a
// noise floor. Pose: smooth 8-dim random walk plus style-shaped pulses that
// come to rest exactly on the beats, scaled by corr. Face: jaw/expression
// pulses on the same beats. Fully determined by the seed.
SynthClip gen_clip(uint64_t seed, const SpeakerStyle& style, double duration_s, double corr,
                   const body::KinematicTree& tree);

struct ManifestEntry {
  std::string prefix;  // file stem within the corpus dir
  int64_t speaker = 0;
  std::string split;  // train | val | test
  double duration = 0.0;
  uint64_t seed = 0;
};

struct Manifest {
  std::string dir;
  std::vector<ManifestEntry> entries;
  uint64_t minibody_hash = 0;

  std::vector<const ManifestEntry*> split(const std::string& name) const;
  std::string path(const ManifestEntry& e, const std::string& ext) const;
};

// Writes minibody.mbdy, per-clip wav/motn/pose/face files, the manifest, and
// the effective config echo. Split is 80/10/10 by clip index.
void gen_dataset(const RunConfig& cfg, const std::string& out_dir);
Manifest load_manifest(const std::string& dir);

}  // namespace motionact::synth
