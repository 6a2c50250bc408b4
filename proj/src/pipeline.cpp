#include "motionact/pipeline.hpp"

#include <ostream>

#include "motionact/io.hpp"

namespace motionact::pipeline {

Tensor motion_from_decode(const vq::VqModel& vq_model, const body::KinematicTree& tree,
                          const Tensor& rep_out, const Tensor& pose) {
  if (vq_model.rep == "hybrid") return rep_out;
  return body::extract_hybrid(tree, pose);
}

Generated generate_for_audio(const vq::VqModel& vq_model,
                             const translator::TranslatorModel& tr_model,
                             const face::FaceModel& face_model, const body::KinematicTree& tree,
                             const audio::AudioClip& clip, int64_t speaker, uint64_t seed,
                             int64_t n_samples) {
  if (n_samples < 1) fail("generate: n_samples must be >= 1");
  Tensor features = audio::mfcc(clip);
  int64_t t_len = features.shape[0] - features.shape[0] % vq_model.w_m;
  if (t_len < vq_model.w_m) fail("generate: audio shorter than one token window");
  if (t_len != features.shape[0]) {
    Tape t;
    features = t.value(t.slice_rows(t.leaf(features), 0, t_len));
  }

  Generated out;
  for (int64_t i = 0; i < n_samples; i++) {
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(i + 1)));
    vq::TokenSeq tokens = tr_model.generate(features, speaker, true, rng);
    auto [rep_out, pose] = vq_model.decode_tokens(tokens);
    out.motions.push_back(motion_from_decode(vq_model, tree, rep_out, pose));
    out.poses.push_back(std::move(pose));
    out.tokens.push_back(std::move(tokens));
  }
  out.face = face_forward(face_model, features, speaker);
  return out;
}

metrics::MetricReport evaluate_split(const synth::Manifest& corpus,
                                     const body::KinematicTree& tree, const vq::VqModel* vq_model,
                                     const translator::TranslatorModel* tr_model,
                                     const face::FaceModel* face_model, const RunConfig& cfg,
                                     const EvalOptions& opt, std::ostream* log) {
  auto clips = corpus.split(opt.split);
  if (clips.size() < 2) fail("evaluate: split '" + opt.split + "' needs at least two clips");
  if (opt.n_samples < 2) fail("evaluate: div-out needs two samples per audio");

  std::vector<Tensor> gen_kin, gen_geo, ref_kin, ref_geo;
  double align = 0.0, divin = 0.0, divout = 0.0, skate = 0.0, sum_lvd = 0.0, sum_ld = 0.0;

  for (size_t ci = 0; ci < clips.size(); ci++) {
    const auto* e = clips[ci];
    Tensor gt_motion = read_motn(corpus.path(*e, ".motn"), nullptr);
    Tensor gt_face = read_face(corpus.path(*e, ".face"));
    audio::AudioClip wav = audio::load_wav(corpus.path(*e, ".wav"));

    std::vector<Tensor> samples;
    Tensor face_track;
    if (opt.reference_as_generated) {
      samples.assign(static_cast<size_t>(opt.n_samples), gt_motion);
      face_track = gt_face;
    } else if (!opt.generated_dir.empty()) {
      for (int64_t s = 0; s < opt.n_samples; s++)
        samples.push_back(read_motn(
            opt.generated_dir + "/" + e->prefix + "_s" + std::to_string(s) + ".motn", nullptr));
      face_track = read_face(opt.generated_dir + "/" + e->prefix + ".face");
    } else {
      if (!vq_model || !tr_model || !face_model)
        fail("evaluate: models required unless a generated dir is given");
      uint64_t clip_seed = opt.seed ^ (0x2545F4914F6CDD1DULL * (ci + 1));
      Generated g = generate_for_audio(*vq_model, *tr_model, *face_model, tree, wav, e->speaker,
                                       clip_seed, opt.n_samples);
      samples = std::move(g.motions);
      face_track = std::move(g.face);
    }

    // align lengths (generated motion is trimmed to the token grid)
    int64_t t_len = samples[0].shape[0];
    auto trim = [&](const Tensor& m) {
      if (m.shape[0] == t_len) return m;
      Tape t;
      return t.value(t.slice_rows(t.leaf(m), 0, t_len));
    };
    Tensor gt_trimmed = trim(gt_motion);

    gen_kin.push_back(metrics::kinetic_features(samples[0], cfg.fps));
    gen_geo.push_back(metrics::geometric_features(samples[0]));
    ref_kin.push_back(metrics::kinetic_features(gt_trimmed, cfg.fps));
    ref_geo.push_back(metrics::geometric_features(gt_trimmed));

    auto audio_beats = audio::detect_audio_beats(wav);
    if (!audio_beats.empty())
      align += metrics::beat_align(audio_beats, metrics::detect_motion_beats(samples[0], cfg.fps),
                                   cfg.sigma_beat);
    divin += metrics::div_in(samples[0]);
    divout += metrics::div_out(samples[0], trim(samples[1]));
    skate += metrics::fsr(samples[0], tree, cfg.fsr_height, cfg.fsr_slide);

    Tensor gt_face_trimmed = gt_face;
    if (gt_face.shape[0] != face_track.shape[0]) {
      Tape t;
      gt_face_trimmed = t.value(t.slice_rows(t.leaf(gt_face), 0, face_track.shape[0]));
    }
    sum_lvd += metrics::lvd(face_track, gt_face_trimmed);
    sum_ld += metrics::ld(face_track, gt_face_trimmed);

    if (log && ci % 8 == 0) *log << "evaluate: clip " << ci + 1 << "/" << clips.size() << "\n";
  }

  auto n = static_cast<double>(clips.size());
  metrics::MetricReport r;
  r.fid_k = metrics::fid(gen_kin, ref_kin);
  r.fid_g = metrics::fid(gen_geo, ref_geo);
  r.beat_align = align / n;
  r.div_in = divin / n;
  r.div_out = divout / n;
  r.fsr = skate / n;
  r.lvd = sum_lvd / n;
  r.ld = sum_ld / n;
  r.n_clips = static_cast<int64_t>(clips.size());
  r.n_samples = opt.n_samples;
  return r;
}

}  // namespace motionact::pipeline
