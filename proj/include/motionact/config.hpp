#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace motionact {

// Every hyperparameter an ablation can sweep, with the paper-default values.
// Parse -> validate -> echo: the effective configuration is serialized next
// to (and inside) every artifact a command writes. Unknown keys are errors.
struct RunConfig {
  // global
  uint64_t seed = 7;
  double fps = 30.0;

  // loss weights
  double alpha1 = 0.5;   // first-order reconstruction weight
  double alpha2 = 0.5;   // second-order reconstruction weight
  double beta = 0.25;    // commitment weight
  double tau = 0.7;      // contrastive temperature
  double lambda_cm = 0.1;

  // quantization
  int64_t n_codebooks = 3;  // 1, 2, or 3
  int64_t codebook_size = 512;
  int64_t w_m = 1;  // frames per token

  // optimizer
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;

  // representation: hybrid | aa3d | rot6d
  std::string representation = "hybrid";

  // vq-vae nets
  int64_t enc_hidden_hand = 128;
  int64_t enc_hidden_body = 512;
  int64_t dec_hidden = 512;
  int64_t gp_hidden = 512;
  int64_t vq_epochs = 300;
  int64_t crop_frames = 0;  // 0 = train on full clips
  int64_t batch_clips = 1;

  // translator
  int64_t tr_width = 512;
  int64_t tr_blocks = 4;
  int64_t tr_embed = 32;
  int64_t tr_epochs = 60;
  int64_t bank_capacity = 1024;
  bool contrastive = true;
  bool negatives_exclude_same_speaker = false;

  // face
  int64_t face_hidden = 96;
  int64_t face_epochs = 40;

  // metrics
  double sigma_beat = 0.1;
  double fsr_height = 0.05;
  double fsr_slide = 0.025;

  // synthetic corpus
  int64_t n_speakers = 8;
  int64_t clips_per_speaker = 25;
  double clip_seconds = 4.0;
  double beat_corr = 1.0;
};

// Key-value access over the struct; keys are the snake_case field names.
std::vector<std::string> config_keys();
void config_set(RunConfig& cfg, const std::string& key, const std::string& value);
std::string config_get(const RunConfig& cfg, const std::string& key);

// Sorted key=value lines; this is the canonical echo embedded in artifacts.
std::string config_echo(const RunConfig& cfg);

// Lines of "key = value"; '#' starts a comment. Unknown keys are errors.
RunConfig config_from_file(const std::string& path);
// Parses the echo format ("key=value" lines), e.g. from a checkpoint.
RunConfig config_from_echo(const std::string& echo);
void config_apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_eq_value);

// Honors MOTIONACT_SEED if present in the environment.
void config_apply_env(RunConfig& cfg);

void config_validate(const RunConfig& cfg);

}  // namespace motionact
