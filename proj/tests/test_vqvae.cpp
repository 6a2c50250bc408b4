#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "motionact/io.hpp"
#include "motionact/metrics.hpp"
#include "motionact/vqvae.hpp"
#include "oracles.hpp"

using namespace motionact;
using namespace motionact::vq;

namespace {

const body::KinematicTree& tree() {
  static body::KinematicTree t = body::build_minibody();
  return t;
}

RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.codebook_size = 32;
  cfg.enc_hidden_hand = 16;
  cfg.enc_hidden_body = 24;
  cfg.dec_hidden = 24;
  cfg.gp_hidden = 32;
  cfg.vq_epochs = 2;
  cfg.n_speakers = 1;
  cfg.clips_per_speaker = 4;
  cfg.clip_seconds = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("part split is a disjoint exhaustive partition with the declared hand rows") {
  PartLayout layout = make_part_layout(tree(), "hybrid", 3);
  std::set<int64_t> seen;
  int64_t total = 0;
  for (const auto& cols : layout.part_cols) {
    for (int64_t c : cols) {
      CHECK(seen.insert(c).second);  // no duplicates
      total++;
    }
  }
  CHECK(total == body::kHybridDims);

  // hand parts hold exactly the 15 finger-joint keypoints plus the surface
  // points whose dominant skin joint is that hand (wrist included)
  for (int64_t p = 0; p < 2; p++) {
    int64_t keypoint_cols = 0;
    for (int64_t c : layout.part_cols[static_cast<size_t>(p)])
      if (c >= body::kSurfacePoints * 3) keypoint_cols++;
    CHECK(keypoint_cols == 15 * 3);
  }
  // both hands own the same number of surface points by construction
  CHECK(layout.part_cols[0].size() == layout.part_cols[1].size());

  // ownership table stable across runs
  CHECK(layout.table_hash == make_part_layout(tree(), "hybrid", 3).table_hash);

  // code dims follow the codebook count
  CHECK(layout.code_dims == std::vector<int64_t>{128, 128, 512});
  CHECK(make_part_layout(tree(), "hybrid", 2).code_dims == std::vector<int64_t>{256, 512});
  CHECK(make_part_layout(tree(), "hybrid", 1).code_dims == std::vector<int64_t>{768});
}

TEST_CASE("quantize picks the nearer code and breaks ties low") {
  Tensor cb = Tensor::from({2, 2}, {0.0, 0.0, 1.0, 1.0});
  auto [i0, c0] = quantize(Tensor::from({2}, {0.2, 0.1}), cb);
  CHECK(i0 == 0);
  CHECK(c0.data == std::vector<double>{0.0, 0.0});

  auto [i1, c1] = quantize(Tensor::from({2}, {0.5, 0.5}), cb);
  CHECK(i1 == 0);  // exact tie goes to the lowest index

  CHECK_THROWS_AS(quantize(Tensor::from({3}, {0, 0, 0}), cb), std::runtime_error);
}

TEST_CASE("quantize matches an exhaustive expanded-form scan over 1000 random cases") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; trial++) {
    Tensor cb = rng.normal_tensor({16, 8});
    Tensor z = rng.normal_tensor({8});
    // oracle via the expanded form |z|^2 - 2 z.c + |c|^2
    int64_t want = 0;
    double best = 1e300;
    for (int64_t i = 0; i < 16; i++) {
      double zc = 0.0, cc = 0.0;
      for (int64_t k = 0; k < 8; k++) {
        zc += z.data[static_cast<size_t>(k)] * cb.at(i, k);
        cc += cb.at(i, k) * cb.at(i, k);
      }
      double d = cc - 2.0 * zc;
      if (d < best) {
        best = d;
        want = i;
      }
    }
    CHECK(quantize(z, cb).first == want);
  }
}

TEST_CASE("quantized rows are exact codebook rows (bitwise)") {
  Rng rng(5);
  Tensor cb = rng.normal_tensor({8, 4});
  Tensor z = rng.normal_tensor({4});
  auto [idx, code] = quantize(z, cb);
  for (int64_t c = 0; c < 4; c++) CHECK(code.data[static_cast<size_t>(c)] == cb.at(idx, c));
}

TEST_CASE("loss_rec basics and loop oracle") {
  Rng rng(17);
  Tensor v = rng.normal_tensor({5, 6});
  CHECK(loss_rec_value(v, v, 0.5, 0.5) == 0.0);

  // T=1: only the positional term survives
  Tensor a({1, 4}, 0.0), b({1, 4}, 0.0);
  for (auto& x : a.data) x = 0.3;
  CHECK(loss_rec_value(a, b, 0.5, 0.5) == doctest::Approx(0.3).epsilon(1e-12));

  // random T=5 pair against a scalar loop oracle
  Tensor p = rng.normal_tensor({5, 6});
  double l0 = 0.0, l1 = 0.0, l2 = 0.0;
  for (int64_t t = 0; t < 5; t++)
    for (int64_t c = 0; c < 6; c++) l0 += std::fabs(p.at(t, c) - v.at(t, c));
  l0 /= 30.0;
  for (int64_t t = 0; t < 4; t++)
    for (int64_t c = 0; c < 6; c++) {
      double dp = p.at(t + 1, c) - p.at(t, c);
      double dv = v.at(t + 1, c) - v.at(t, c);
      l1 += std::fabs(dp - dv);
    }
  l1 /= 24.0;
  for (int64_t t = 0; t < 3; t++)
    for (int64_t c = 0; c < 6; c++) {
      double ddp = p.at(t + 2, c) - 2.0 * p.at(t + 1, c) + p.at(t, c);
      double ddv = v.at(t + 2, c) - 2.0 * v.at(t + 1, c) + v.at(t, c);
      l2 += std::fabs(ddp - ddv);
    }
  l2 /= 18.0;
  CHECK(loss_rec_value(p, v, 0.5, 0.25) == doctest::Approx(l0 + 0.5 * l1 + 0.25 * l2).epsilon(1e-12));
}

TEST_CASE("loss_vq arithmetic and gradient routing") {
  Tensor z({3, 4}, 0.0);
  Tensor zq({3, 4}, 1.0);
  CHECK(loss_vq_value(z, z, 0.25) == 0.0);
  CHECK(loss_vq_value(z, zq, 0.25) == doctest::Approx(1.25).epsilon(1e-12));

  // commitment branch is the only path into z
  Rng rng(3);
  Tensor zv = rng.normal_tensor({2, 3});
  Tensor qv = rng.normal_tensor({2, 3});
  Tape t;
  NodeId zn = t.leaf(zv);
  NodeId qn = t.leaf(qv);
  t.backward(loss_vq_graph(t, zn, qn, 0.25));
  auto commit_only = [&](const Tensor& x) {
    Tape tt;
    return 0.25 * tt.value(tt.sq_mean(tt.sub(tt.leaf(x), tt.leaf(qv)))).item();
  };
  CHECK(oracles::max_rel_err(t.grad(zn), oracles::finite_diff(commit_only, zv)) <= 1e-4);
  auto codebook_only = [&](const Tensor& x) {
    Tape tt;
    return tt.value(tt.sq_mean(tt.sub(tt.leaf(zv), tt.leaf(x)))).item();
  };
  CHECK(oracles::max_rel_err(t.grad(qn), oracles::finite_diff(codebook_only, qv)) <= 1e-4);
}

TEST_CASE("encoder shape contract and temporal equivariance at stride 1") {
  Rng rng(23);
  RunConfig cfg = tiny_cfg();
  VqModel model = VqModel::init(cfg, tree(), rng);
  Tensor motion = rng.normal_tensor({32, body::kHybridDims}, 0.1);

  Tape t;
  nn::Binding b(t, model.params);
  auto blocks = part_split(model.layout, motion);
  std::vector<NodeId> inputs;
  for (auto& blk : blocks) inputs.push_back(t.leaf(blk));
  auto zs = model.encode_parts(t, b, inputs);
  NodeId z = zs[0];
  for (size_t p = 1; p < zs.size(); p++) z = t.concat_cols(z, zs[p]);
  CHECK(t.value(z).shape == Shape{32, kCodeDims});

  // shift the input by k frames: interior feature rows shift along
  const int64_t k = 5;
  Tensor shifted({32, body::kHybridDims});
  for (int64_t r = 0; r < 32; r++)
    for (int64_t c = 0; c < body::kHybridDims; c++)
      shifted.at(r, c) = motion.at(std::max<int64_t>(0, r - k) % 32, c);
  for (int64_t r = k; r < 32; r++)
    for (int64_t c = 0; c < body::kHybridDims; c++) shifted.at(r, c) = motion.at(r - k, c);

  Tape t2;
  nn::Binding b2(t2, model.params);
  auto blocks2 = part_split(model.layout, shifted);
  std::vector<NodeId> inputs2;
  for (auto& blk : blocks2) inputs2.push_back(t2.leaf(blk));
  auto zs2 = model.encode_parts(t2, b2, inputs2);
  NodeId z2 = zs2[0];
  for (size_t p = 1; p < zs2.size(); p++) z2 = t2.concat_cols(z2, zs2[p]);

  // interior rows (away from both boundaries and the receptive field)
  const int64_t guard = 6;
  for (int64_t r = k + guard; r < 32 - guard; r++)
    for (int64_t c = 0; c < kCodeDims; c++)
      CHECK(t2.value(z2).at(r, c) == doctest::Approx(t.value(z).at(r - k, c)).epsilon(1e-9));
}

TEST_CASE("encoder gradients match finite differences on a tiny model") {
  Rng rng(31);
  RunConfig cfg = tiny_cfg();
  cfg.enc_hidden_hand = 6;
  cfg.enc_hidden_body = 8;
  cfg.dec_hidden = 8;
  VqModel model = VqModel::init(cfg, tree(), rng);
  Tensor motion = rng.normal_tensor({4, body::kHybridDims}, 0.2);
  auto blocks = part_split(model.layout, motion);

  auto loss_with = [&]() {
    Tape t;
    nn::Binding b(t, model.params);
    std::vector<NodeId> inputs;
    for (auto& blk : blocks) inputs.push_back(t.leaf(blk));
    auto zs = model.encode_parts(t, b, inputs);
    NodeId z = zs[0];
    for (size_t p = 1; p < zs.size(); p++) z = t.concat_cols(z, zs[p]);
    return std::pair<Tape*, NodeId>{nullptr, 0};
  };
  (void)loss_with;

  Tape t;
  nn::Binding b(t, model.params);
  std::vector<NodeId> inputs;
  for (auto& blk : blocks) inputs.push_back(t.leaf(blk));
  auto zs = model.encode_parts(t, b, inputs);
  NodeId z = zs[0];
  for (size_t p = 1; p < zs.size(); p++) z = t.concat_cols(z, zs[p]);
  NodeId loss = t.sq_mean(z);
  t.backward(loss);

  for (const std::string& pname : {"enc0.c1.w", "enc2.c4.b"}) {
    Tensor base = *model.params.find(pname);
    auto f = [&](const Tensor& w) {
      Tensor saved = *model.params.find(pname);
      *model.params.find(pname) = w;
      Tape tt;
      nn::Binding bb(tt, model.params);
      std::vector<NodeId> ins;
      for (auto& blk : blocks) ins.push_back(tt.leaf(blk));
      auto zz = model.encode_parts(tt, bb, ins);
      NodeId zc = zz[0];
      for (size_t p = 1; p < zz.size(); p++) zc = tt.concat_cols(zc, zz[p]);
      double v = tt.value(tt.sq_mean(zc)).item();
      *model.params.find(pname) = saved;
      return v;
    };
    Tensor fd = oracles::finite_diff(f, base);
    CHECK(oracles::max_rel_err(t.grad(b[pname]), fd, 1e-3) <= 1e-4);
  }
}

TEST_CASE("decoder emits the representation dims and pose recovery shape") {
  Rng rng(41);
  RunConfig cfg = tiny_cfg();
  VqModel model = VqModel::init(cfg, tree(), rng);
  TokenSeq tokens(6, std::vector<int64_t>(3, 1));
  auto [vhat, pose] = model.decode_tokens(tokens);
  CHECK(vhat.shape == Shape{6, body::kHybridDims});
  CHECK(pose.shape == Shape{6, body::kPoseDims});

  TokenSeq bad(2, std::vector<int64_t>(3, cfg.codebook_size + 5));
  CHECK_THROWS_AS(model.decode_tokens(bad), std::runtime_error);
}

TEST_CASE("one training step on a singleton batch decreases the loss") {
  RunConfig cfg = tiny_cfg();
  cfg.vq_epochs = 1;
  cfg.clips_per_speaker = 2;
  // Adam's first bias-corrected step moves every parameter by +-lr, so the
  // descent property holds for lr small enough
  cfg.lr = 1e-5;

  std::string dir = "/tmp/ma_vq_single";
  std::filesystem::remove_all(dir);
  synth::gen_dataset(cfg, dir);
  synth::Manifest m = synth::load_manifest(dir);

  // manual: measure loss on one clip, take one optimizer step, remeasure
  Rng rng(cfg.seed);
  VqModel model = VqModel::init(cfg, tree(), rng);
  Tensor pose = read_pose(m.path(*m.split("train")[0], ".pose"));
  Tensor motion = read_motn(m.path(*m.split("train")[0], ".motn"), nullptr);

  auto eval_loss = [&](bool step) {
    Tape t;
    nn::Binding b(t, model.params);
    auto blocks = part_split(model.layout, motion);
    std::vector<NodeId> inputs;
    for (auto& blk : blocks) inputs.push_back(t.leaf(blk));
    NodeId target = t.leaf(motion);
    auto zs = model.encode_parts(t, b, inputs);
    std::vector<NodeId> zq_parts, st_parts;
    for (int64_t p = 0; p < model.layout.n_parts; p++) {
      const Tensor& z = t.value(zs[static_cast<size_t>(p)]);
      std::vector<int64_t> idx;
      for (int64_t r = 0; r < z.shape[0]; r++) {
        Tensor row({z.shape[1]});
        for (int64_t c = 0; c < z.shape[1]; c++) row.data[static_cast<size_t>(c)] = z.at(r, c);
        idx.push_back(quantize(row, model.codebook(p)).first);
      }
      NodeId zq = t.gather_rows(b["cb" + std::to_string(p)], idx);
      zq_parts.push_back(zq);
      st_parts.push_back(t.straight_through(zs[static_cast<size_t>(p)], zq));
    }
    NodeId z_all = zs[0], zq_all = zq_parts[0], st_all = st_parts[0];
    for (int64_t p = 1; p < model.layout.n_parts; p++) {
      z_all = t.concat_cols(z_all, zs[static_cast<size_t>(p)]);
      zq_all = t.concat_cols(zq_all, zq_parts[static_cast<size_t>(p)]);
      st_all = t.concat_cols(st_all, st_parts[static_cast<size_t>(p)]);
    }
    NodeId vhat = model.decode_graph(t, b, st_all);
    NodeId loss = loss_rec_graph(t, vhat, target, cfg.alpha1, cfg.alpha2);
    loss = t.add(loss, loss_vq_graph(t, z_all, zq_all, cfg.beta));
    NodeId theta = model.gp_graph(t, b, vhat);
    loss = t.add(loss, t.abs_mean(t.sub(theta, t.leaf(pose))));
    double v = t.value(loss).item();
    if (step) {
      t.backward(loss);
      AdamConfig adam;
      adam.lr = cfg.lr;
      b.apply_adam(adam);
    }
    return v;
  };

  double before = eval_loss(true);
  double after = eval_loss(false);
  CHECK(after < before);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic and the checkpoint round-trips") {
  RunConfig cfg = tiny_cfg();
  std::string dir = "/tmp/ma_vq_det";
  std::filesystem::remove_all(dir);
  synth::gen_dataset(cfg, dir);
  synth::Manifest m = synth::load_manifest(dir);

  VqTrainStats s1, s2;
  VqModel a = train_vqvae(m, tree(), cfg, nullptr, &s1);
  VqModel b = train_vqvae(m, tree(), cfg, nullptr, &s2);
  for (size_t i = 0; i < a.params.entries().size(); i++)
    CHECK(a.params.entries()[i].value.data == b.params.entries()[i].value.data);
  CHECK(s1.epoch_loss == s2.epoch_loss);

  save_vq_checkpoint(dir + "/vq.vqck", a, s1, config_echo(cfg), tree().content_hash());
  VqTrainStats loaded_stats;
  RunConfig loaded_cfg;
  VqModel c = load_vq_checkpoint(dir + "/vq.vqck", tree(), tree().content_hash(), &loaded_stats,
                                 &loaded_cfg);
  for (size_t i = 0; i < a.params.entries().size(); i++)
    CHECK(a.params.entries()[i].value.data == c.params.entries()[i].value.data);
  CHECK(loaded_cfg.codebook_size == cfg.codebook_size);

  // refuses to load against a different body
  CHECK_THROWS_WITH_AS(load_vq_checkpoint(dir + "/vq.vqck", tree(), 12345, nullptr, nullptr),
                       doctest::Contains("checkpoint-hash-mismatch"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("token round trip through files") {
  TokenSeq tokens = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  write_toks("/tmp/ma_toks.toks", tokens, "k=v\n");
  CHECK(read_toks("/tmp/ma_toks.toks") == tokens);
  std::remove("/tmp/ma_toks.toks");
}

TEST_CASE("total training gradient matches finite differences on a toy model") {
  // 2 frames, 4 codes: the full objective (rec + vq + sx). The oracle is the
  // surrogate objective the estimator actually differentiates: nearest-code
  // assignments frozen at the base point, the straight-through decoder input
  // written as z plus a frozen code residual, and each stop-gradient branch
  // pinned to its base value.
  Rng rng(53);
  RunConfig cfg = tiny_cfg();
  cfg.codebook_size = 4;
  cfg.enc_hidden_hand = 4;
  cfg.enc_hidden_body = 6;
  cfg.dec_hidden = 6;
  cfg.gp_hidden = 8;
  VqModel model = VqModel::init(cfg, tree(), rng);
  Tensor pose = rng.normal_tensor({2, body::kPoseDims}, 0.3);
  Tensor motion = body::extract_hybrid(tree(), pose);
  auto blocks = part_split(model.layout, motion);

  auto concat_parts = [](Tape& t, const std::vector<NodeId>& parts) {
    NodeId all = parts[0];
    for (size_t p = 1; p < parts.size(); p++) all = t.concat_cols(all, parts[p]);
    return all;
  };

  auto encode_all = [&](Tape& t, nn::Binding& b) {
    std::vector<NodeId> inputs;
    for (auto& blk : blocks) inputs.push_back(t.leaf(blk));
    return model.encode_parts(t, b, inputs);
  };

  // base pass: the real training graph, plus the frozen quantities
  Tape t;
  nn::Binding b(t, model.params);
  auto zs = encode_all(t, b);
  std::vector<std::vector<int64_t>> frozen_idx;
  std::vector<NodeId> zq_parts, st_parts;
  for (int64_t p = 0; p < model.layout.n_parts; p++) {
    const Tensor& z = t.value(zs[static_cast<size_t>(p)]);
    std::vector<int64_t> idx;
    for (int64_t r = 0; r < z.shape[0]; r++) {
      Tensor row({z.shape[1]});
      for (int64_t c = 0; c < z.shape[1]; c++) row.data[static_cast<size_t>(c)] = z.at(r, c);
      idx.push_back(quantize(row, model.codebook(p)).first);
    }
    NodeId zq = t.gather_rows(b["cb" + std::to_string(p)], idx);
    frozen_idx.push_back(idx);
    zq_parts.push_back(zq);
    st_parts.push_back(t.straight_through(zs[static_cast<size_t>(p)], zq));
  }
  NodeId z_all = concat_parts(t, zs);
  NodeId zq_all = concat_parts(t, zq_parts);
  NodeId st_all = concat_parts(t, st_parts);
  Tensor z_base = t.value(z_all);
  Tensor zq_base = t.value(zq_all);
  Tensor residual = zq_base;
  for (int64_t i = 0; i < residual.numel(); i++) residual.data[i] -= z_base.data[i];

  NodeId vhat = model.decode_graph(t, b, st_all);
  NodeId loss = loss_rec_graph(t, vhat, t.leaf(motion), cfg.alpha1, cfg.alpha2);
  loss = t.add(loss, loss_vq_graph(t, z_all, zq_all, cfg.beta));
  NodeId theta = model.gp_graph(t, b, vhat);
  loss = t.add(loss, t.abs_mean(t.sub(theta, t.leaf(pose))));
  t.backward(loss);

  auto surrogate = [&](Tape& tt, nn::Binding& bb) {
    auto zz = encode_all(tt, bb);
    std::vector<NodeId> zq_p;
    for (int64_t p = 0; p < model.layout.n_parts; p++)
      zq_p.push_back(tt.gather_rows(bb["cb" + std::to_string(p)], frozen_idx[static_cast<size_t>(p)]));
    NodeId z = concat_parts(tt, zz);
    NodeId zq = concat_parts(tt, zq_p);
    NodeId dec_in = tt.add(z, tt.leaf(residual));
    NodeId vh = model.decode_graph(tt, bb, dec_in);
    NodeId l = loss_rec_graph(tt, vh, tt.leaf(motion), cfg.alpha1, cfg.alpha2);
    // sg branches pinned at their base values
    NodeId codebook_term = tt.sq_mean(tt.sub(tt.leaf(z_base), zq));
    NodeId commit_term = tt.sq_mean(tt.sub(z, tt.leaf(zq_base)));
    l = tt.add(l, tt.add(codebook_term, tt.scale(commit_term, cfg.beta)));
    NodeId th = model.gp_graph(tt, bb, vh);
    return tt.add(l, tt.abs_mean(tt.sub(th, tt.leaf(pose))));
  };

  for (const std::string& pname : {"dec.c2.w", "cb2", "gp.proj.w", "enc1.c1.w"}) {
    Tensor base = *model.params.find(pname);
    auto f = [&](const Tensor& w) {
      Tensor saved = *model.params.find(pname);
      *model.params.find(pname) = w;
      Tape tt;
      nn::Binding bb(tt, model.params);
      double v = tt.value(surrogate(tt, bb)).item();
      *model.params.find(pname) = saved;
      return v;
    };
    Tensor fd = oracles::finite_diff(f, base);
    INFO(pname);
    CHECK(oracles::max_rel_err(t.grad(b[pname]), fd, 1e-3) <= 1e-4);
  }
}
