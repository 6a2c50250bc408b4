#include "motionact/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "motionact/io.hpp"
#include "motionact/linalg.hpp"

namespace motionact::metrics {

namespace {

using body::kHybridDims;
using body::kJoints;
using body::kSurfacePoints;

// Keypoint positions of frame t as a [55,3] view into hybrid motion.
const double* keypoints_at(const Tensor& motion, int64_t t) {
  return &motion.data[static_cast<size_t>(t * kHybridDims + kSurfacePoints * 3)];
}

void check_hybrid(const char* what, const Tensor& motion) {
  if (motion.shape.size() != 2 || motion.shape[1] != kHybridDims)
    fail(std::string(what) + ": expected hybrid motion [T,1458], got " + shape_str(motion.shape));
}

// Mean keypoint speed between consecutive frames; index t is the transition
// frame t-1 -> t. Falls back to all point triples for non-hybrid layouts.
std::vector<double> mean_speeds(const Tensor& motion) {
  int64_t t_len = motion.shape[0];
  int64_t cols = motion.shape[1];
  int64_t off = cols == kHybridDims ? kSurfacePoints * 3 : 0;
  int64_t pts = cols == kHybridDims ? kJoints : cols / 3;
  std::vector<double> s(static_cast<size_t>(t_len), 0.0);
  for (int64_t t = 1; t < t_len; t++) {
    double acc = 0.0;
    for (int64_t p = 0; p < pts; p++) {
      double d = 0.0;
      for (int k = 0; k < 3; k++) {
        double diff = motion.data[static_cast<size_t>(t * cols + off + p * 3 + k)] -
                      motion.data[static_cast<size_t>((t - 1) * cols + off + p * 3 + k)];
        d += diff * diff;
      }
      acc += std::sqrt(d);
    }
    s[static_cast<size_t>(t)] = acc / static_cast<double>(pts);
  }
  return s;
}

}  // namespace

Tensor kinetic_features(const Tensor& motion, double fps) {
  check_hybrid("kinetic_features", motion);
  int64_t t_len = motion.shape[0];
  if (t_len < 2) fail("kinetic_features: need at least two frames");
  Tensor out({2 * kJoints});
  for (int64_t j = 0; j < kJoints; j++) {
    double mean_s = 0.0, mean_s2 = 0.0;
    for (int64_t t = 1; t < t_len; t++) {
      double d = 0.0;
      for (int k = 0; k < 3; k++) {
        double diff = keypoints_at(motion, t)[j * 3 + k] - keypoints_at(motion, t - 1)[j * 3 + k];
        d += diff * diff;
      }
      double speed = std::sqrt(d) * fps;
      mean_s += speed;
      mean_s2 += speed * speed;
    }
    out.data[static_cast<size_t>(j)] = mean_s / static_cast<double>(t_len - 1);
    out.data[static_cast<size_t>(kJoints + j)] = mean_s2 / static_cast<double>(t_len - 1);
  }
  return out;
}

Tensor geometric_features(const Tensor& motion) {
  check_hybrid("geometric_features", motion);
  static const body::KinematicTree tree = body::build_minibody();
  int64_t t_len = motion.shape[0];
  const int64_t n_angles = kJoints - 1;       // joints 1..54
  const int64_t n_rel = (kJoints - 1) * 3;    // root-relative positions
  const int64_t dims = n_angles + n_rel;      // 216 per frame

  Tensor per_frame({t_len, dims});
  for (int64_t t = 0; t < t_len; t++) {
    const double* kp = keypoints_at(motion, t);
    for (int64_t j = 1; j < kJoints; j++) {
      int32_t p = tree.parent[static_cast<size_t>(j)];
      double bone[3], ref[3];
      for (int k = 0; k < 3; k++) bone[k] = kp[j * 3 + k] - kp[p * 3 + k];
      if (p == 0) {
        ref[0] = 0.0;
        ref[1] = 1.0;
        ref[2] = 0.0;
      } else {
        int32_t g = tree.parent[static_cast<size_t>(p)];
        for (int k = 0; k < 3; k++) ref[k] = kp[p * 3 + k] - kp[g * 3 + k];
      }
      double cx = bone[1] * ref[2] - bone[2] * ref[1];
      double cy = bone[2] * ref[0] - bone[0] * ref[2];
      double cz = bone[0] * ref[1] - bone[1] * ref[0];
      double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
      double dot = bone[0] * ref[0] + bone[1] * ref[1] + bone[2] * ref[2];
      per_frame.at(t, j - 1) = std::atan2(cross, dot);
      for (int k = 0; k < 3; k++)
        per_frame.at(t, n_angles + (j - 1) * 3 + k) = kp[j * 3 + k] - kp[k];  // root-relative
    }
  }

  Tensor out({2 * dims});
  for (int64_t c = 0; c < dims; c++) {
    double mean = 0.0;
    for (int64_t t = 0; t < t_len; t++) mean += per_frame.at(t, c);
    mean /= static_cast<double>(t_len);
    double var = 0.0;
    for (int64_t t = 0; t < t_len; t++) {
      double d = per_frame.at(t, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(t_len);
    out.data[static_cast<size_t>(c)] = mean;
    out.data[static_cast<size_t>(dims + c)] = std::sqrt(var);
  }
  return out;
}

double fid(const std::vector<Tensor>& set_a, const std::vector<Tensor>& set_b, double shrinkage) {
  if (set_a.size() < 2 || set_b.size() < 2) fail("fid: need at least two clips per set");
  int64_t d = set_a[0].numel();
  for (const auto& v : set_a)
    if (v.numel() != d) fail("fid: inconsistent feature dimensions");
  for (const auto& v : set_b)
    if (v.numel() != d) fail("fid: inconsistent feature dimensions");

  auto moments = [d, shrinkage](const std::vector<Tensor>& set, Tensor& mu, Tensor& cov) {
    auto n = static_cast<double>(set.size());
    mu = Tensor({d});
    for (const auto& v : set)
      for (int64_t i = 0; i < d; i++) mu.data[static_cast<size_t>(i)] += v.data[static_cast<size_t>(i)];
    for (auto& m : mu.data) m /= n;
    cov = Tensor({d, d});
    for (const auto& v : set)
      for (int64_t r = 0; r < d; r++) {
        double dr = v.data[static_cast<size_t>(r)] - mu.data[static_cast<size_t>(r)];
        for (int64_t c = r; c < d; c++)
          cov.at(r, c) += dr * (v.data[static_cast<size_t>(c)] - mu.data[static_cast<size_t>(c)]);
      }
    for (int64_t r = 0; r < d; r++)
      for (int64_t c = r; c < d; c++) {
        double val = cov.at(r, c) / (n - 1.0);
        cov.at(r, c) = val;
        cov.at(c, r) = val;
      }
    for (int64_t i = 0; i < d; i++) cov.at(i, i) += shrinkage;
  };

  Tensor mu_a, cov_a, mu_b, cov_b;
  moments(set_a, mu_a, cov_a);
  moments(set_b, mu_b, cov_b);

  double mean_term = 0.0;
  for (int64_t i = 0; i < d; i++) {
    double diff = mu_a.data[static_cast<size_t>(i)] - mu_b.data[static_cast<size_t>(i)];
    mean_term += diff * diff;
  }
  double tr_a = 0.0, tr_b = 0.0;
  for (int64_t i = 0; i < d; i++) {
    tr_a += cov_a.at(i, i);
    tr_b += cov_b.at(i, i);
  }
  double cross = sqrtm_trace(cov_a, cov_b);
  double result = mean_term + tr_a + tr_b - 2.0 * cross;
  return std::max(result, 0.0);
}

std::vector<double> detect_motion_beats(const Tensor& motion, double fps) {
  if (motion.shape.size() != 2 || motion.shape[1] % 3 != 0)
    fail("detect_motion_beats: expected [T, points*3] motion, got " + shape_str(motion.shape));
  int64_t t_len = motion.shape[0];
  if (t_len < 3) return {};
  std::vector<double> raw = mean_speeds(motion);

  // Triangular smoothing removes the micro-dips that per-joint speed
  // rectification creates while a strict single-frame stop stays a strict
  // minimum (a box filter would flatten it into a plateau).
  const double kernel[5] = {1.0, 2.0, 3.0, 2.0, 1.0};
  std::vector<double> s(raw.size(), 0.0);
  for (int64_t t = 1; t < t_len; t++) {
    double acc = 0.0, wsum = 0.0;
    for (int k = -2; k <= 2; k++) {
      int64_t u = t + k;
      if (u < 1 || u >= t_len) continue;
      acc += kernel[k + 2] * raw[static_cast<size_t>(u)];
      wsum += kernel[k + 2];
    }
    s[static_cast<size_t>(t)] = acc / wsum;
  }

  // centered running mean over ~1 s
  int64_t half = std::max<int64_t>(1, static_cast<int64_t>(fps / 2.0));
  std::vector<double> beats;
  for (int64_t t = 2; t + 1 < t_len; t++) {
    double st = s[static_cast<size_t>(t)];
    if (!(st < s[static_cast<size_t>(t - 1)] && st < s[static_cast<size_t>(t + 1)])) continue;
    int64_t lo = std::max<int64_t>(1, t - half);
    int64_t hi = std::min<int64_t>(t_len - 1, t + half);
    double mean = 0.0;
    for (int64_t u = lo; u <= hi; u++) mean += s[static_cast<size_t>(u)];
    mean /= static_cast<double>(hi - lo + 1);
    if (st < mean) beats.push_back(static_cast<double>(t) / fps);
  }
  return beats;
}

double beat_align(const std::vector<double>& audio_beats, const std::vector<double>& motion_beats,
                  double sigma) {
  if (audio_beats.empty()) fail("beat_align: audio beat list is empty");
  if (motion_beats.empty()) return 0.0;
  double acc = 0.0;
  for (double a : audio_beats) {
    double best = 1e300;
    for (double m : motion_beats) best = std::min(best, (a - m) * (a - m));
    acc += std::exp(-best / (2.0 * sigma * sigma));
  }
  return acc / static_cast<double>(audio_beats.size());
}

double div_in(const Tensor& motion) {
  if (motion.shape.size() != 2) fail("div_in: expected [T,dims] motion");
  int64_t t_len = motion.shape[0], cols = motion.shape[1];
  if (t_len < 2) return 0.0;
  double acc = 0.0;
  int64_t pairs = 0;
  for (int64_t i = 0; i < t_len; i++)
    for (int64_t j = i + 1; j < t_len; j++) {
      double d = 0.0;
      for (int64_t c = 0; c < cols; c++) {
        double diff = motion.data[static_cast<size_t>(i * cols + c)] -
                      motion.data[static_cast<size_t>(j * cols + c)];
        d += diff * diff;
      }
      acc += std::sqrt(d);
      pairs++;
    }
  return acc / static_cast<double>(pairs);
}

double div_out(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    fail("div_out: length mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  int64_t t_len = a.shape[0], cols = a.shape[1];
  double acc = 0.0;
  for (int64_t t = 0; t < t_len; t++) {
    double d = 0.0;
    for (int64_t c = 0; c < cols; c++) {
      double diff = a.data[static_cast<size_t>(t * cols + c)] - b.data[static_cast<size_t>(t * cols + c)];
      d += diff * diff;
    }
    acc += std::sqrt(d);
  }
  return acc / static_cast<double>(t_len);
}

double fsr(const Tensor& motion, const body::KinematicTree& tree, double height_thr,
           double slide_thr) {
  check_hybrid("fsr", motion);
  int64_t t_len = motion.shape[0];
  if (t_len < 2) fail("fsr: need at least two frames");
  int64_t skating = 0;
  for (int64_t t = 1; t < t_len; t++) {
    bool slide = false;
    for (int32_t j : tree.foot_joints) {
      const double* now = keypoints_at(motion, t) + j * 3;
      const double* prev = keypoints_at(motion, t - 1) + j * 3;
      if (now[1] >= height_thr) continue;  // foot lifted: not in contact
      double dx = now[0] - prev[0], dz = now[2] - prev[2];
      if (std::sqrt(dx * dx + dz * dz) > slide_thr) {
        slide = true;
        break;
      }
    }
    if (slide) skating++;
  }
  return static_cast<double>(skating) / static_cast<double>(t_len - 1);
}

double lvd(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    fail("lvd: length mismatch " + shape_str(pred.shape) + " vs " + shape_str(gt.shape));
  int64_t t_len = pred.shape[0], cols = pred.shape[1];
  if (t_len < 2) return 0.0;
  double acc = 0.0;
  for (int64_t t = 0; t + 1 < t_len; t++) {
    double d = 0.0;
    for (int64_t c = 0; c < cols; c++) {
      double vp = pred.data[static_cast<size_t>((t + 1) * cols + c)] -
                  pred.data[static_cast<size_t>(t * cols + c)];
      double vg = gt.data[static_cast<size_t>((t + 1) * cols + c)] -
                  gt.data[static_cast<size_t>(t * cols + c)];
      d += (vp - vg) * (vp - vg);
    }
    acc += std::sqrt(d);
  }
  return acc / static_cast<double>(t_len - 1);
}

double ld(const Tensor& pred, const Tensor& gt) {
  return div_out(pred, gt);  // same definition: mean per-frame L2
}

double point_ld(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    fail("point_ld: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(gt.shape));
  if (pred.shape[1] % 3 != 0) fail("point_ld: columns must be xyz triples");
  int64_t t_len = pred.shape[0], pts = pred.shape[1] / 3;
  double acc = 0.0;
  for (int64_t t = 0; t < t_len; t++)
    for (int64_t p = 0; p < pts; p++) {
      double d = 0.0;
      for (int k = 0; k < 3; k++) {
        double diff = pred.at(t, p * 3 + k) - gt.at(t, p * 3 + k);
        d += diff * diff;
      }
      acc += std::sqrt(d);
    }
  return acc / static_cast<double>(t_len * pts);
}

double point_lvd(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    fail("point_lvd: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(gt.shape));
  if (pred.shape[1] % 3 != 0) fail("point_lvd: columns must be xyz triples");
  int64_t t_len = pred.shape[0], pts = pred.shape[1] / 3;
  if (t_len < 2) return 0.0;
  double acc = 0.0;
  for (int64_t t = 0; t + 1 < t_len; t++)
    for (int64_t p = 0; p < pts; p++) {
      double d = 0.0;
      for (int k = 0; k < 3; k++) {
        double vp = pred.at(t + 1, p * 3 + k) - pred.at(t, p * 3 + k);
        double vg = gt.at(t + 1, p * 3 + k) - gt.at(t, p * 3 + k);
        d += (vp - vg) * (vp - vg);
      }
      acc += std::sqrt(d);
    }
  return acc / static_cast<double>((t_len - 1) * pts);
}

namespace {

const std::vector<std::pair<const char*, double MetricReport::*>>& report_fields() {
  static const std::vector<std::pair<const char*, double MetricReport::*>> f = {
      {"fid_k", &MetricReport::fid_k},   {"fid_g", &MetricReport::fid_g},
      {"beat_align", &MetricReport::beat_align}, {"div_in", &MetricReport::div_in},
      {"div_out", &MetricReport::div_out}, {"fsr", &MetricReport::fsr},
      {"lvd", &MetricReport::lvd},       {"ld", &MetricReport::ld},
  };
  return f;
}

}  // namespace

void write_report_text(const std::string& path, const MetricReport& r, const std::string& echo) {
  std::ostringstream os;
  os.precision(10);
  for (const auto& [name, ptr] : report_fields()) os << name << " " << r.*ptr << "\n";
  os << "n_clips " << r.n_clips << "\n";
  os << "n_samples " << r.n_samples << "\n";
  std::istringstream echo_in(echo);
  std::string line;
  while (std::getline(echo_in, line)) os << "# " << line << "\n";
  std::ofstream out(path);
  if (!out) fail("cannot create '" + path + "'");
  out << os.str();
}

void write_report_binary(const std::string& path, const MetricReport& r, const std::string& echo) {
  ByteWriter w;
  w.magic("MRPT");
  w.u32(static_cast<uint32_t>(report_fields().size()));
  for (const auto& [name, ptr] : report_fields()) {
    w.str(name);
    w.f64(r.*ptr);
  }
  w.u64(static_cast<uint64_t>(r.n_clips));
  w.u64(static_cast<uint64_t>(r.n_samples));
  w.trailer(echo);
  w.save(path);
}

MetricReport read_report_binary(const std::string& path) {
  ByteReader rd(read_file_bytes(path), path);
  rd.expect_magic("MRPT");
  uint32_t n = rd.u32();
  MetricReport r;
  for (uint32_t i = 0; i < n; i++) {
    std::string name = rd.str();
    double v = rd.f64();
    for (const auto& [fname, ptr] : report_fields())
      if (name == fname) r.*ptr = v;
  }
  r.n_clips = static_cast<int64_t>(rd.u64());
  r.n_samples = static_cast<int64_t>(rd.u64());
  return r;
}

std::string format_report_table(const MetricReport& r) {
  std::ostringstream os;
  os << "  metric       value\n";
  os << "  ----------   ----------\n";
  char buf[64];
  for (const auto& [name, ptr] : report_fields()) {
    std::snprintf(buf, sizeof(buf), "  %-12s %10.4f\n", name, r.*ptr);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "  %-12s %10lld\n", "clips", static_cast<long long>(r.n_clips));
  os << buf;
  return os.str();
}

}  // namespace motionact::metrics
