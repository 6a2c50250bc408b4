#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "motionact/audiofront.hpp"
#include "motionact/facegen.hpp"
#include "motionact/metrics.hpp"
#include "motionact/synthdata.hpp"
#include "motionact/translator.hpp"
#include "motionact/vqvae.hpp"

namespace motionact::pipeline {

struct Generated {
  std::vector<vq::TokenSeq> tokens;  // one per sample
  std::vector<Tensor> motions;       // hybrid motion [T,1458] per sample
  std::vector<Tensor> poses;         // recovered parameters [T,168] per sample
  Tensor face;                       // deterministic face track [T,53]
};

// Runs the full inference stack on one audio clip: n samples of diverse
// token decoding through the frozen VQ decoder plus the face regressor.
// Sample i draws its first token with seed derived from (seed, i).
Generated generate_for_audio(const vq::VqModel& vq_model,
                             const translator::TranslatorModel& tr_model,
                             const face::FaceModel& face_model, const body::KinematicTree& tree,
                             const audio::AudioClip& clip, int64_t speaker, uint64_t seed,
                             int64_t n_samples);

// Motion for a decoded representation: point reps pass through, parametric
// reps go through forward kinematics.
Tensor motion_from_decode(const vq::VqModel& vq_model, const body::KinematicTree& tree,
                          const Tensor& rep_out, const Tensor& pose);

struct EvalOptions {
  std::string split = "test";
  int64_t n_samples = 2;
  uint64_t seed = 7;
  // Read pre-generated artifacts (<prefix>_s<i>.motn, <prefix>.face) from
  // this directory instead of running the models.
  std::string generated_dir;
  // Score the reference corpus against itself (both samples = ground truth).
  bool reference_as_generated = false;
};

// Table-1/2-shaped evaluation of a corpus split: FID on kinetic and geometric
// features, BeatAlign, Div-in, Div-out across two samples per audio, FSR,
// and the face LVD/LD.
metrics::MetricReport evaluate_split(const synth::Manifest& corpus,
                                     const body::KinematicTree& tree, const vq::VqModel* vq_model,
                                     const translator::TranslatorModel* tr_model,
                                     const face::FaceModel* face_model, const RunConfig& cfg,
                                     const EvalOptions& opt, std::ostream* log);

}  // namespace motionact::pipeline
