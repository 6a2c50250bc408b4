#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "motionact/facegen.hpp"
#include "motionact/io.hpp"
#include "motionact/metrics.hpp"
#include "oracles.hpp"

using namespace motionact;
using namespace motionact::face;

namespace {

RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.face_hidden = 20;
  cfg.face_epochs = 4;
  cfg.n_speakers = 2;
  cfg.clips_per_speaker = 3;
  cfg.clip_seconds = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("face_forward: shape, determinism, attention rows sum to one") {
  RunConfig cfg = tiny_cfg();
  Rng rng(3);
  FaceModel model = FaceModel::init(cfg, cfg.n_speakers, rng);
  Tensor mfcc = rng.normal_tensor({9, 64}, 0.4);

  Tensor attn;
  Tensor out = face_forward(model, mfcc, 1, &attn);
  CHECK(out.shape == Shape{9, kFaceDims});

  Tensor out2 = face_forward(model, mfcc, 1);
  CHECK(out.data == out2.data);

  CHECK(attn.shape == Shape{9, 9});
  for (int64_t r = 0; r < 9; r++) {
    double s = 0.0;
    for (int64_t c = 0; c < 9; c++) s += attn.at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(face_forward(model, mfcc, 5), std::runtime_error);
}

TEST_CASE("face_loss: identities, constant offset, loop oracle") {
  Rng rng(9);
  Tensor a = rng.normal_tensor({6, kFaceDims});
  CHECK(face_loss_value(a, a) == 0.0);

  Tensor b = a;
  for (auto& v : b.data) v += 0.2;  // constant in time: velocity term stays zero
  CHECK(face_loss_value(b, a) == doctest::Approx(0.2).epsilon(1e-12));

  Tensor c = rng.normal_tensor({6, kFaceDims});
  double l1 = 0.0;
  for (int64_t i = 0; i < a.numel(); i++) l1 += std::fabs(a.data[i] - c.data[i]);
  l1 /= static_cast<double>(a.numel());
  double lv = 0.0;
  for (int64_t t = 0; t + 1 < 6; t++)
    for (int64_t k = 0; k < kFaceDims; k++) {
      double va = a.at(t + 1, k) - a.at(t, k);
      double vc = c.at(t + 1, k) - c.at(t, k);
      lv += std::fabs(va - vc);
    }
  lv /= static_cast<double>(5 * kFaceDims);
  CHECK(face_loss_value(a, c) == doctest::Approx(l1 + lv).epsilon(1e-12));

  Tensor wrong({4, kFaceDims});
  CHECK_THROWS_AS(face_loss_value(a, wrong), std::runtime_error);
}

TEST_CASE("face loss gradient through the model matches finite differences on a T=3 toy") {
  RunConfig cfg = tiny_cfg();
  cfg.face_hidden = 8;
  Rng rng(31);
  FaceModel model = FaceModel::init(cfg, cfg.n_speakers, rng);
  Tensor mfcc = rng.normal_tensor({3, 64}, 0.5);
  Tensor target = rng.normal_tensor({3, kFaceDims}, 0.5);

  Tape t;
  nn::Binding b(t, model.params);
  NodeId pred = model.forward(t, b, mfcc, 0);
  t.backward(face_loss_graph(t, pred, t.leaf(target)));

  for (const std::string& pname : {"aenc.c1.w", "adapt.attn.wq.w", "dec.out.w", "spk_proj.w"}) {
    Tensor base = *model.params.find(pname);
    auto f = [&](const Tensor& w) {
      Tensor saved = *model.params.find(pname);
      *model.params.find(pname) = w;
      Tape tt;
      nn::Binding bb(tt, model.params);
      NodeId p = model.forward(tt, bb, mfcc, 0);
      double v = tt.value(face_loss_graph(tt, p, tt.leaf(target))).item();
      *model.params.find(pname) = saved;
      return v;
    };
    Tensor fd = oracles::finite_diff(f, base);
    INFO(pname);
    CHECK(oracles::max_rel_err(t.grad(b[pname]), fd, 1e-3) <= 1e-4);
  }
}

TEST_CASE("training drops the loss, beats a shuffled baseline, and reproduces") {
  RunConfig cfg = tiny_cfg();
  cfg.clips_per_speaker = 10;  // 20 clips -> 2 val clips for the baseline
  cfg.face_epochs = 30;
  cfg.lr = 2e-3;
  std::string dir = "/tmp/ma_face_train";
  std::filesystem::remove_all(dir);
  synth::gen_dataset(cfg, dir);
  synth::Manifest m = synth::load_manifest(dir);

  FaceTrainStats stats;
  FaceModel model = train_face(m, cfg, nullptr, &stats);
  REQUIRE(stats.epoch_loss.size() == 30);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());

  // held-out LVD under the shuffled-prediction baseline
  auto val = m.split("val");
  REQUIRE(!val.empty());
  double matched = 0.0, shuffled = 0.0;
  std::vector<Tensor> preds, gts;
  for (const auto* e : val) {
    Tensor mfcc = audio::mfcc(audio::load_wav(m.path(*e, ".wav")));
    preds.push_back(face_forward(model, mfcc, e->speaker));
    gts.push_back(read_face(m.path(*e, ".face")));
  }
  for (size_t i = 0; i < preds.size(); i++) {
    matched += metrics::lvd(preds[i], gts[i]);
    shuffled += metrics::lvd(preds[(i + 1) % preds.size()], gts[i]);
  }
  CHECK(matched < shuffled);

  // seed-reproducible checkpoint round trip
  FaceTrainStats stats2;
  FaceModel model2 = train_face(m, cfg, nullptr, &stats2);
  for (size_t i = 0; i < model.params.entries().size(); i++)
    CHECK(model.params.entries()[i].value.data == model2.params.entries()[i].value.data);

  save_face_checkpoint(dir + "/face.fcck", model, config_echo(cfg), 1234);
  FaceModel loaded = load_face_checkpoint(dir + "/face.fcck", 1234);
  for (size_t i = 0; i < model.params.entries().size(); i++)
    CHECK(model.params.entries()[i].value.data == loaded.params.entries()[i].value.data);
  std::filesystem::remove_all(dir);
}
