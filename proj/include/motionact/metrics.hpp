#pragma once

#include <string>
#include <vector>

#include "motionact/bodymodel.hpp"
#include "motionact/tensor.hpp"

namespace motionact::metrics {

// Per-clip feature vectors feeding the Frechet distances.
// kinetic: per-joint mean speed and mean squared speed -> 110 dims.
Tensor kinetic_features(const Tensor& motion, double fps);
// geometric: per-joint bone-pair angles (54) and root-relative keypoint
// positions (162), mean and std over time -> 432 dims.
Tensor geometric_features(const Tensor& motion);

// Frechet distance between Gaussian fits of two feature-vector sets.
// Covariances get an eps*I shrinkage so small sets stay PSD.
double fid(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b,
           double shrinkage = 1e-6);

// Kinematic beats: strict local minima of mean keypoint speed that fall
// below a centered running mean (1 s window). Sequences shorter than three
// frames have no beats.
std::vector<double> detect_motion_beats(const Tensor& motion, double fps);

// (1/|Ba|) sum_a exp(-min_m (a-m)^2 / (2 sigma^2)); empty motion beats -> 0.
double beat_align(const std::vector<double>& audio_beats, const std::vector<double>& motion_beats,
                  double sigma = 0.1);

// Within-clip pose variation: mean L2 distance between all frame pairs.
double div_in(const Tensor& motion);
// Mean per-frame L2 distance between two equal-length clips.
double div_out(const Tensor& a, const Tensor& b);

// Fraction of frame transitions where a low foot (below height_thr) slides
// farther than slide_thr horizontally.
double fsr(const Tensor& motion, const body::KinematicTree& tree, double height_thr = 0.05,
           double slide_thr = 0.025);

// Face-track metrics over [T,D] coefficient tracks.
double lvd(const Tensor& pred, const Tensor& gt);
double ld(const Tensor& pred, const Tensor& gt);

// Reconstruction metrics over point blocks ([T, P*3]): mean per-point
// distance and mean per-point velocity difference, in meters.
double point_ld(const Tensor& pred, const Tensor& gt);
double point_lvd(const Tensor& pred, const Tensor& gt);

struct MetricReport {
  double fid_k = 0.0;
  double fid_g = 0.0;
  double beat_align = 0.0;
  double div_in = 0.0;
  double div_out = 0.0;
  double fsr = 0.0;
  double lvd = 0.0;
  double ld = 0.0;
  int64_t n_clips = 0;
  int64_t n_samples = 0;
};

// Flat key-value text, a binary "MRPT" table, and an aligned console table.
void write_report_text(const std::string& path, const MetricReport& r, const std::string& echo);
void write_report_binary(const std::string& path, const MetricReport& r, const std::string& echo);
MetricReport read_report_binary(const std::string& path);
std::string format_report_table(const MetricReport& r);

}  // namespace motionact::metrics
