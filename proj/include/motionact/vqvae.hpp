#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "motionact/bodymodel.hpp"
#include "motionact/config.hpp"
#include "motionact/nn.hpp"
#include "motionact/synthdata.hpp"
#include "motionact/tape.hpp"

namespace motionact::vq {

// token rows: one row per temporal window, one index per codebook
using TokenSeq = std::vector<std::vector<int64_t>>;

inline constexpr int64_t kCodeDims = 768;  // 128 + 128 + 512

// Column ownership of the representation per codebook part. For hybrid
// points a surface point belongs to the hand whose wrist/finger joints
// dominate its skin weights; keypoints follow the joint ids.
struct PartLayout {
  int64_t n_parts = 3;
  std::vector<std::vector<int64_t>> part_cols;  // representation columns per part
  std::vector<int64_t> code_dims;               // sums to 768
  uint64_t table_hash = 0;                      // ownership table fingerprint
};

PartLayout make_part_layout(const body::KinematicTree& tree, const std::string& rep,
                            int64_t n_codebooks);

// Gathers the layout's columns of each frame into per-part input blocks.
std::vector<Tensor> part_split(const PartLayout& layout, const Tensor& motion);

// Nearest code by Euclidean distance; ties break to the lowest index.
std::pair<int64_t, Tensor> quantize(const Tensor& z_row, const Tensor& codebook);

struct VqModel {
  std::string rep = "hybrid";
  int64_t rep_dims = body::kHybridDims;
  PartLayout layout;
  int64_t w_m = 1;
  int64_t codebook_size = 512;
  std::vector<int64_t> enc_hidden;  // per part
  int64_t dec_hidden = 512;
  bool has_gp = true;  // point representations recover pose through G_P
  int64_t gp_hidden = 512;
  nn::ParamSet params;

  static VqModel init(const RunConfig& cfg, const body::KinematicTree& tree, Rng& rng);

  const Tensor& codebook(int64_t part) const;

  // Graph builders. Encoder inputs are the pre-split per-part blocks (leaf
  // data, so splitting outside the tape loses nothing).
  std::vector<NodeId> encode_parts(Tape& t, const nn::Binding& b,
                                   const std::vector<NodeId>& part_inputs) const;
  NodeId decode_graph(Tape& t, const nn::Binding& b, NodeId zq) const;  // [T/w,768] -> [T,D]
  NodeId gp_graph(Tape& t, const nn::Binding& b, NodeId vhat) const;    // [T,1458] -> [T,168]

  // Inference helpers (scratch tapes).
  TokenSeq encode_tokens(const Tensor& rep_motion) const;
  // tokens -> (reconstructed representation, recovered pose params)
  std::pair<Tensor, Tensor> decode_tokens(const TokenSeq& tokens) const;
  std::pair<Tensor, Tensor> reconstruct(const Tensor& rep_motion) const;
};

// Reconstruction losses (graph builders used by training and tests).
// loss_rec: L1 plus weighted L1 of first/second forward time differences;
// sequences shorter than 3 frames drop the missing derivative terms.
NodeId loss_rec_graph(Tape& t, NodeId pred, NodeId target, double alpha1, double alpha2);
// loss_vq: squared-L2 codebook + commitment terms with stop-gradient routing.
NodeId loss_vq_graph(Tape& t, NodeId z, NodeId zq, double beta);
double loss_rec_value(const Tensor& pred, const Tensor& target, double alpha1, double alpha2);
double loss_vq_value(const Tensor& z, const Tensor& zq, double beta);

struct VqTrainStats {
  std::vector<double> epoch_loss;
  std::vector<double> usage_fraction;  // per codebook, final epoch
  std::vector<double> perplexity;     // per codebook, final epoch
  bool dead_code_alarm = false;
  Tensor usage_counts;  // [n_parts, N]
};

// Minimizes L_rec + L_vq (+ L_sx through G_P for point representations) with
// Adam. Deterministic under cfg.seed; aborts on a non-finite loss.
VqModel train_vqvae(const synth::Manifest& corpus, const body::KinematicTree& tree,
                    const RunConfig& cfg, std::ostream* log, VqTrainStats* stats);

// Representation adapters: GT clip -> model input representation.
Tensor rep_from_pose(const std::string& rep, const body::KinematicTree& tree, const Tensor& pose,
                     const Tensor& hybrid_motion);
// Model output representation -> recovered pose parameters (aa3d/rot6d only;
// hybrid goes through G_P instead).
Tensor pose_from_rep(const std::string& rep, const Tensor& rep_motion);

// "VQCK" checkpoints (usage counts stored alongside the weights).
void save_vq_checkpoint(const std::string& path, const VqModel& model, const VqTrainStats& stats,
                        const std::string& config_echo, uint64_t minibody_hash);
VqModel load_vq_checkpoint(const std::string& path, const body::KinematicTree& tree,
                           uint64_t expect_minibody_hash, VqTrainStats* stats = nullptr,
                           RunConfig* cfg_out = nullptr);

}  // namespace motionact::vq
