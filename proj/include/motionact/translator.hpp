#pragma once

#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

#include "motionact/config.hpp"
#include "motionact/nn.hpp"
#include "motionact/synthdata.hpp"
#include "motionact/tape.hpp"
#include "motionact/vqvae.hpp"

namespace motionact::translator {

using vq::TokenSeq;

// Single-head retention core: o_t = q_t * sum_{s<=t} gamma^{t-s} k_s^T v_s.
// Both forms are exposed so their equivalence is testable.
Tensor retention_parallel(const Tensor& q, const Tensor& k, const Tensor& v, double gamma);
Tensor retention_recurrent(const Tensor& q, const Tensor& k, const Tensor& v, double gamma);

// Time-pooled, L2-normalized quantized feature vector.
Tensor pool_code(const Tensor& zq);

// InfoNCE over one positive and a bank of negatives; plain evaluation.
double contrastive_loss_value(const Tensor& p, const Tensor& p_pos,
                              const std::vector<Tensor>& negatives, double tau);
// Graph form: p and p_pos are live nodes, negatives are detached constants.
NodeId contrastive_loss_graph(Tape& t, NodeId p, NodeId p_pos, const Tensor& negatives,
                              double tau);

// Mean cross-entropy over steps and heads.
double ce_loss_value(const std::vector<Tensor>& head_logits, const TokenSeq& targets);

// Greedy selection rule: highest score, ties to the lowest index.
int64_t argmax_low(const double* v, int64_t n);

// FIFO bank of pooled codes tagged with their source (speaker, clip).
class NegativeBank {
 public:
  explicit NegativeBank(int64_t capacity) : capacity_(capacity) {}
  void push(Tensor code, int64_t speaker, int64_t clip);
  // Negatives never include codes from the anchor's own clip; codes from the
  // anchor's speaker (other clips) are excluded only when asked.
  Tensor negatives(int64_t speaker, int64_t clip, bool exclude_same_speaker) const;  // [L,768]
  int64_t size() const { return static_cast<int64_t>(entries_.size()); }
  int64_t capacity() const { return capacity_; }

 private:
  struct Entry {
    Tensor code;
    int64_t speaker;
    int64_t clip;
  };
  std::deque<Entry> entries_;
  int64_t capacity_;
};

struct TranslatorModel {
  int64_t width = 512;
  int64_t n_blocks = 4;
  int64_t embed = 32;
  int64_t n_speakers = 8;
  int64_t n_parts = 3;
  int64_t codebook_size = 512;
  int64_t mfcc_dims = 64;
  std::vector<double> gammas;  // per-block decay

  nn::ParamSet params;

  static TranslatorModel init(const RunConfig& cfg, int64_t n_speakers, int64_t n_parts,
                              int64_t codebook_size, Rng& rng);

  // Teacher-forced parallel pass: logits for steps [0, len(teacher)), where
  // the model sees the start token plus teacher[0..t-1] at step t.
  std::vector<NodeId> logits_graph(Tape& t, const nn::Binding& b, const Tensor& mfcc,
                                   int64_t speaker, const TokenSeq& teacher) const;

  // Free-running recurrent decoding. mode_diverse draws the first token of
  // each head uniformly; every later step takes the arg-max (ties low).
  TokenSeq generate(const Tensor& mfcc, int64_t speaker, bool mode_diverse, Rng& rng) const;
};

// Convenience wrapper matching the operation shape (scratch tape).
std::vector<Tensor> translate_logits(const TranslatorModel& model, const Tensor& mfcc,
                                     int64_t speaker, const TokenSeq& teacher);

struct TranslatorTrainStats {
  std::vector<double> epoch_ce;
  std::vector<double> epoch_cm;
  int64_t skipped_contrastive_steps = 0;
};

// Stage 2: cross-entropy to the frozen VQ-VAE's tokens plus contrastive
// motion learning over the negative bank. The VQ model is read-only.
TranslatorModel train_translator(const synth::Manifest& corpus, const vq::VqModel& vq_model,
                                 const body::KinematicTree& tree, const RunConfig& cfg,
                                 std::ostream* log, TranslatorTrainStats* stats);

void save_translator_checkpoint(const std::string& path, const TranslatorModel& model,
                                const std::string& config_echo, uint64_t minibody_hash);
TranslatorModel load_translator_checkpoint(const std::string& path, uint64_t expect_minibody_hash,
                                           RunConfig* cfg_out = nullptr);

}  // namespace motionact::translator
