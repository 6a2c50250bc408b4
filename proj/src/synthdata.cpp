#include "motionact/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "motionact/io.hpp"
#include "motionact/version.hpp"

namespace motionact::synth {

namespace {

using body::Joint;

// Joints the 8-dim pose subspace drives. Legs stay planted so the ground
// contact of the corpus is clean.
const std::vector<std::pair<int32_t, double>>& affected_joints() {
  static const std::vector<std::pair<int32_t, double>> table = [] {
    std::vector<std::pair<int32_t, double>> t = {
        {Joint::Spine1, 0.05},   {Joint::Spine2, 0.07},    {Joint::Spine3, 0.09},
        {Joint::Neck, 0.08},     {Joint::Head, 0.10},      {Joint::LCollar, 0.05},
        {Joint::RCollar, 0.05},  {Joint::LShoulder, 0.30}, {Joint::RShoulder, 0.30},
        {Joint::LElbow, 0.40},   {Joint::RElbow, 0.40},    {Joint::LWrist, 0.45},
        {Joint::RWrist, 0.45},
    };
    for (int32_t j = Joint::LIndex1; j <= Joint::RThumb3; j++) t.push_back({j, 0.30});
    return t;
  }();
  return table;
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double raised_cosine(double dt, double width) {
  if (std::fabs(dt) >= width) return 0.0;
  return 0.5 * (1.0 + std::cos(M_PI * dt / width));
}

}  // namespace

SpeakerStyle SpeakerStyle::derive(uint64_t corpus_seed, int64_t id) {
  Rng rng(corpus_seed * 0x9e3779b97f4a7c15ULL + 0x5851f42d4c957f2dULL * static_cast<uint64_t>(id + 1));
  SpeakerStyle s;
  s.id = id;
  s.base_tempo = rng.uniform(1.6, 2.8);
  s.timbre_hz = rng.uniform(140.0, 380.0);
  s.style_vector = Tensor({8});
  for (auto& v : s.style_vector.data) v = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.2 ? 0.4 : 1.0);

  const auto& joints = affected_joints();
  auto n_rot = static_cast<int64_t>(joints.size()) * 3;
  s.pose_map = Tensor({n_rot, 8});
  for (size_t ji = 0; ji < joints.size(); ji++)
    for (int k = 0; k < 3; k++)
      for (int64_t c = 0; c < 8; c++)
        s.pose_map.at(static_cast<int64_t>(ji) * 3 + k, c) =
            rng.normal() * joints[ji].second / std::sqrt(8.0);

  s.base_pose = Tensor({body::kPoseDims});
  // a per-speaker rest posture: arms bent by different amounts
  auto set_aa = [&](int32_t joint, double x, double y, double z) {
    s.base_pose.data[static_cast<size_t>(3 + joint * 3)] = x;
    s.base_pose.data[static_cast<size_t>(3 + joint * 3 + 1)] = y;
    s.base_pose.data[static_cast<size_t>(3 + joint * 3 + 2)] = z;
  };
  set_aa(Joint::LShoulder, 0.0, 0.0, rng.uniform(-0.45, -0.05));
  set_aa(Joint::RShoulder, 0.0, 0.0, rng.uniform(0.05, 0.45));
  set_aa(Joint::LElbow, rng.uniform(-0.9, -0.2), 0.0, 0.0);
  set_aa(Joint::RElbow, rng.uniform(-0.9, -0.2), 0.0, 0.0);
  set_aa(Joint::Spine2, rng.uniform(-0.08, 0.08), rng.uniform(-0.1, 0.1), 0.0);
  set_aa(Joint::Head, rng.uniform(-0.1, 0.1), rng.uniform(-0.15, 0.15), 0.0);

  s.face_pattern = Tensor({50});
  for (auto& v : s.face_pattern.data) v = rng.normal() * 0.5;
  return s;
}

SynthClip gen_clip(uint64_t seed, const SpeakerStyle& style, double duration_s, double corr,
                   const body::KinematicTree& tree) {
  if (duration_s < 1.0) fail("gen_clip: duration must be >= 1 s");
  Rng rng(seed);
  SynthClip clip;
  clip.speaker = style.id;

  // --- beat grid ---
  double period = 1.0 / style.base_tempo;
  double t0 = 0.35 + rng.uniform() * period;
  for (double t = t0; t < duration_s - 0.1; t += period) clip.beat_times.push_back(t);
  if (clip.beat_times.empty()) clip.beat_times.push_back(duration_s / 2.0);

  // --- audio: faded tone + noise floor + clicks on beats ---
  auto n_samples = static_cast<int64_t>(duration_s * audio::kSampleRate);
  clip.audio.sample_rate = audio::kSampleRate;
  clip.audio.samples.assign(static_cast<size_t>(n_samples), 0.0);
  for (int64_t i = 0; i < n_samples; i++) {
    double t = static_cast<double>(i) / audio::kSampleRate;
    double fade = std::min(1.0, t / 0.3);
    clip.audio.samples[static_cast<size_t>(i)] =
        0.06 * fade * std::sin(2.0 * M_PI * style.timbre_hz * t) + 0.004 * rng.normal();
  }
  for (double bt : clip.beat_times) {
    auto start = static_cast<int64_t>(bt * audio::kSampleRate);
    for (int64_t i = 0; i < 96 && start + i < n_samples; i++)
      clip.audio.samples[static_cast<size_t>(start + i)] +=
          0.8 * std::exp(-static_cast<double>(i) / 30.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  }
  for (auto& s : clip.audio.samples) s = std::clamp(s, -1.0, 1.0);

  // --- pose: walk + beat-locked pulses in the speaker's subspace ---
  auto t_len = static_cast<int64_t>(std::floor(duration_s * 30.0));
  const auto& joints = affected_joints();
  auto n_rot = static_cast<int64_t>(joints.size()) * 3;

  // per-interval subspace targets; velocity is zero exactly on the beats
  size_t n_targets = clip.beat_times.size() + 2;
  std::vector<Tensor> targets(n_targets, Tensor({8}));
  for (auto& u : targets)
    for (int64_t c = 0; c < 8; c++)
      u.data[static_cast<size_t>(c)] = rng.normal() * style.style_vector.data[static_cast<size_t>(c)];

  // Low-pass walk in the same subspace: an OU process drives the velocity so
  // the speed envelope is smooth and its minima are sparse.
  const double vrho = 0.9;
  const double vstd = 0.06;
  Tensor walk({8}), walk_vel({8});
  clip.pose_gt = Tensor({t_len, body::kPoseDims});
  for (int64_t t = 0; t < t_len; t++) {
    double time = static_cast<double>(t) / 30.0;

    // the walk stops drifting near beats so the pose truly settles on the hit
    double gate = 1.0;
    for (double bt : clip.beat_times)
      gate = std::min(gate, 1.0 - 0.92 * corr * raised_cosine(time - bt, 0.15));
    for (int64_t c = 0; c < 8; c++) {
      double& v = walk_vel.data[static_cast<size_t>(c)];
      v = vrho * v + vstd * std::sqrt(1.0 - vrho * vrho) * rng.normal();
      walk.data[static_cast<size_t>(c)] = 0.995 * walk.data[static_cast<size_t>(c)] + gate * v;
    }

    // locate the beat interval
    size_t b = 0;
    while (b < clip.beat_times.size() && clip.beat_times[b] <= time) b++;
    // interval [prev, next): before the first beat both targets coincide
    double prev = b == 0 ? 0.0 : clip.beat_times[b - 1];
    double next = b < clip.beat_times.size() ? clip.beat_times[b] : duration_s + period;
    size_t u0 = b;  // target held at interval start
    size_t u1 = b + 1;
    double alpha = b == 0 ? 0.0 : smoothstep((time - prev) / (next - prev));

    double* pose = &clip.pose_gt.data[static_cast<size_t>(t * body::kPoseDims)];
    for (int64_t i = 0; i < body::kPoseDims; i++) pose[i] = style.base_pose.data[static_cast<size_t>(i)];
    for (size_t ji = 0; ji < joints.size(); ji++)
      for (int k = 0; k < 3; k++) {
        double acc = 0.0;
        for (int64_t c = 0; c < 8; c++) {
          double coord = walk.data[static_cast<size_t>(c)];
          double pulse = targets[u0].data[static_cast<size_t>(c)] +
                         alpha * (targets[u1].data[static_cast<size_t>(c)] -
                                  targets[u0].data[static_cast<size_t>(c)]);
          coord += corr * 1.6 * pulse;
          acc += style.pose_map.at(static_cast<int64_t>(ji) * 3 + k, c) * coord;
        }
        pose[3 + joints[ji].first * 3 + k] += acc;
      }
  }

  clip.motion = body::extract_hybrid(tree, clip.pose_gt);

  // --- face: jaw opens on beats, expression pulses with style pattern ---
  clip.face_gt = Tensor({t_len, 53});
  Tensor face_noise({50});
  const double frho = std::exp(-1.0 / (30.0 * 0.25));
  for (int64_t t = 0; t < t_len; t++) {
    double time = static_cast<double>(t) / 30.0;
    double env = 0.0;
    for (double bt : clip.beat_times) env += raised_cosine(time - bt, 0.15);
    env = std::min(env, 1.0);
    for (int64_t c = 0; c < 50; c++) {
      face_noise.data[static_cast<size_t>(c)] =
          frho * face_noise.data[static_cast<size_t>(c)] + std::sqrt(1.0 - frho * frho) * rng.normal();
      clip.face_gt.at(t, c) = 0.35 * env * style.face_pattern.data[static_cast<size_t>(c)] +
                              0.05 * face_noise.data[static_cast<size_t>(c)];
    }
    clip.face_gt.at(t, 50) = 0.45 * env;  // jaw pitch
    clip.face_gt.at(t, 51) = 0.05 * env * style.style_vector.data[0];
    clip.face_gt.at(t, 52) = 0.0;
  }
  return clip;
}

void gen_dataset(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string echo = config_echo(cfg);

  body::KinematicTree tree = body::build_minibody();
  save_minibody(out_dir + "/minibody.mbdy", tree, echo);
  uint64_t body_hash = tree.content_hash();

  std::vector<SpeakerStyle> styles;
  for (int64_t s = 0; s < cfg.n_speakers; s++) styles.push_back(SpeakerStyle::derive(cfg.seed, s));

  std::ostringstream manifest;
  manifest << "# motionact corpus\n";
  manifest << "# build " << kBuildTag << "\n";
  manifest << "# minibody_hash " << body_hash << "\n";

  int64_t n_clips = cfg.n_speakers * cfg.clips_per_speaker;
  for (int64_t i = 0; i < n_clips; i++) {
    int64_t speaker = i / cfg.clips_per_speaker;
    uint64_t clip_seed = cfg.seed ^ (0x2545F4914F6CDD1DULL * static_cast<uint64_t>(i + 1));
    SynthClip clip = gen_clip(clip_seed, styles[static_cast<size_t>(speaker)], cfg.clip_seconds,
                              cfg.beat_corr, tree);
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "clip_%04lld", static_cast<long long>(i));
    std::string stem = out_dir + "/" + prefix;
    audio::save_wav(stem + ".wav", clip.audio, echo);
    write_motn(stem + ".motn", clip.motion, cfg.fps, echo);
    write_pose(stem + ".pose", clip.pose_gt, echo);
    write_face(stem + ".face", clip.face_gt, echo);

    const char* split = (i % 10 == 8) ? "val" : (i % 10 == 9) ? "test" : "train";
    manifest << prefix << " " << speaker << " " << split << " " << cfg.clip_seconds << " "
             << clip_seed << "\n";
  }

  std::ofstream mf(out_dir + "/manifest.txt");
  if (!mf) fail("cannot create '" + out_dir + "/manifest.txt'");
  mf << manifest.str();
  std::ofstream cf(out_dir + "/config.echo.txt");
  cf << echo;
}

Manifest load_manifest(const std::string& dir) {
  std::ifstream in(dir + "/manifest.txt");
  if (!in) fail("missing-file: '" + dir + "/manifest.txt'");
  Manifest m;
  m.dir = dir;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line);
      std::string hash_tag, key;
      ls >> hash_tag >> key;
      if (key == "minibody_hash") ls >> m.minibody_hash;
      continue;
    }
    std::istringstream ls(line);
    ManifestEntry e;
    ls >> e.prefix >> e.speaker >> e.split >> e.duration >> e.seed;
    if (ls.fail()) fail("corrupt manifest line: '" + line + "'");
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) fail("empty manifest in '" + dir + "'");
  return m;
}

std::vector<const ManifestEntry*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(&e);
  return out;
}

std::string Manifest::path(const ManifestEntry& e, const std::string& ext) const {
  return dir + "/" + e.prefix + ext;
}

}  // namespace motionact::synth
