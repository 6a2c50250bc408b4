#pragma once

#include <iosfwd>
#include <string>

#include "motionact/config.hpp"
#include "motionact/nn.hpp"
#include "motionact/synthdata.hpp"
#include "motionact/tape.hpp"

namespace motionact::face {

inline constexpr int64_t kExpressionDims = 50;
inline constexpr int64_t kJawDims = 3;
inline constexpr int64_t kFaceDims = kExpressionDims + kJawDims;

// Deterministic audio-to-face regressor: a learned convolutional front-end
// over MFCC (standing in for a pretrained speech encoder), speaker one-hot,
// an adaptive module (residual block, self-attention block, two residual
// blocks), then a residual conv decoder down to the 53 face channels.
struct FaceModel {
  int64_t hidden = 96;
  int64_t n_speakers = 8;
  nn::ParamSet params;

  static FaceModel init(const RunConfig& cfg, int64_t n_speakers, Rng& rng);

  // attention_rows, when set, receives the [T,T] attention matrix node.
  NodeId forward(Tape& t, const nn::Binding& b, const Tensor& mfcc, int64_t speaker,
                 NodeId* attention_rows = nullptr) const;
};

// Inference convenience; optionally exposes the attention matrix.
Tensor face_forward(const FaceModel& model, const Tensor& mfcc, int64_t speaker,
                    Tensor* attention = nullptr);

// L1 of the tracks plus L1 of their forward-difference velocities.
NodeId face_loss_graph(Tape& t, NodeId pred, NodeId gt);
double face_loss_value(const Tensor& pred, const Tensor& gt);

struct FaceTrainStats {
  std::vector<double> epoch_loss;
};

FaceModel train_face(const synth::Manifest& corpus, const RunConfig& cfg, std::ostream* log,
                     FaceTrainStats* stats);

void save_face_checkpoint(const std::string& path, const FaceModel& model,
                          const std::string& config_echo, uint64_t minibody_hash);
FaceModel load_face_checkpoint(const std::string& path, uint64_t expect_minibody_hash,
                               RunConfig* cfg_out = nullptr);

}  // namespace motionact::face
