#include "motionact/vqvae.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "motionact/io.hpp"

namespace motionact::vq {

namespace {

using body::Joint;

bool is_left_hand_joint(int32_t j) {
  return j == Joint::LWrist || (j >= Joint::LIndex1 && j <= Joint::LThumb3);
}
bool is_right_hand_joint(int32_t j) {
  return j == Joint::RWrist || (j >= Joint::RIndex1 && j <= Joint::RThumb3);
}

// 0 = left hand, 1 = right hand, 2 = body
int hand_part_of_joint(int32_t j) {
  if (j >= Joint::LIndex1 && j <= Joint::LThumb3) return 0;
  if (j >= Joint::RIndex1 && j <= Joint::RThumb3) return 1;
  return 2;
}

std::string part_prefix(int64_t p) { return "enc" + std::to_string(p); }

}  // namespace

PartLayout make_part_layout(const body::KinematicTree& tree, const std::string& rep,
                            int64_t n_codebooks) {
  if (n_codebooks < 1 || n_codebooks > 3) fail("part layout: n_codebooks must be 1..3");

  // three-way ownership first, merged afterwards
  std::vector<int> owner;  // per representation column
  auto push_cols = [&owner](int part, int64_t n) {
    for (int64_t i = 0; i < n; i++) owner.push_back(part);
  };

  if (rep == "hybrid") {
    for (int64_t i = 0; i < body::kSurfacePoints; i++) {
      int64_t dominant = 0;
      double best = -1.0;
      for (int64_t j = 0; j < body::kJoints; j++)
        if (tree.skin_weights.at(i, j) > best) {
          best = tree.skin_weights.at(i, j);
          dominant = j;
        }
      int part = is_left_hand_joint(static_cast<int32_t>(dominant))    ? 0
                 : is_right_hand_joint(static_cast<int32_t>(dominant)) ? 1
                                                                       : 2;
      push_cols(part, 3);
    }
    for (int32_t j = 0; j < body::kJoints; j++) push_cols(hand_part_of_joint(j), 3);
  } else if (rep == "aa3d" || rep == "rot6d") {
    int64_t per_joint = rep == "aa3d" ? 3 : 6;
    push_cols(2, 3);  // root translation
    for (int32_t j = 0; j < body::kJoints; j++) push_cols(hand_part_of_joint(j), per_joint);
  } else {
    fail("part layout: unknown representation '" + rep + "'");
  }

  PartLayout layout;
  layout.n_parts = n_codebooks;
  layout.part_cols.resize(static_cast<size_t>(n_codebooks));
  for (size_t col = 0; col < owner.size(); col++) {
    int three_way = owner[col];
    // 2 codebooks merge the hands; 1 codebook merges everything
    int part = n_codebooks == 3 ? three_way
               : n_codebooks == 2 ? (three_way == 2 ? 1 : 0)
                                  : 0;
    layout.part_cols[static_cast<size_t>(part)].push_back(static_cast<int64_t>(col));
  }
  switch (n_codebooks) {
    case 3: layout.code_dims = {128, 128, 512}; break;
    case 2: layout.code_dims = {256, 512}; break;
    default: layout.code_dims = {kCodeDims}; break;
  }

  uint64_t h = fnv1a64(rep.data(), rep.size());
  h = fnv1a64_append(h, owner.data(), owner.size() * sizeof(int));
  layout.table_hash = h;
  return layout;
}

std::vector<Tensor> part_split(const PartLayout& layout, const Tensor& motion) {
  if (motion.shape.size() != 2) fail("part_split: expected [T,dims] motion");
  std::vector<Tensor> parts;
  for (const auto& cols : layout.part_cols) {
    Tensor block({motion.shape[0], static_cast<int64_t>(cols.size())});
    for (int64_t t = 0; t < motion.shape[0]; t++)
      for (size_t c = 0; c < cols.size(); c++)
        block.at(t, static_cast<int64_t>(c)) = motion.at(t, cols[c]);
    parts.push_back(std::move(block));
  }
  return parts;
}

std::pair<int64_t, Tensor> quantize(const Tensor& z_row, const Tensor& codebook) {
  if (codebook.shape.size() != 2 || codebook.shape[0] < 1)
    fail("quantize: empty codebook");
  int64_t n = codebook.shape[0], d = codebook.shape[1];
  if (z_row.numel() != d)
    fail("quantize: feature dim " + std::to_string(z_row.numel()) + " vs codebook dim " +
         std::to_string(d));
  int64_t best = 0;
  double best_d = 1e300;
  for (int64_t i = 0; i < n; i++) {
    double dist = 0.0;
    for (int64_t c = 0; c < d; c++) {
      double diff = z_row.data[static_cast<size_t>(c)] - codebook.at(i, c);
      dist += diff * diff;
    }
    if (dist < best_d) {  // strict: ties keep the lowest index
      best_d = dist;
      best = i;
    }
  }
  Tensor code({d});
  for (int64_t c = 0; c < d; c++) code.data[static_cast<size_t>(c)] = codebook.at(best, c);
  return {best, std::move(code)};
}

VqModel VqModel::init(const RunConfig& cfg, const body::KinematicTree& tree, Rng& rng) {
  VqModel m;
  m.rep = cfg.representation;
  m.rep_dims = m.rep == "hybrid" ? body::kHybridDims : m.rep == "aa3d" ? body::kPoseDims : 333;
  m.layout = make_part_layout(tree, m.rep, cfg.n_codebooks);
  m.w_m = cfg.w_m;
  m.codebook_size = cfg.codebook_size;
  m.dec_hidden = cfg.dec_hidden;
  m.has_gp = m.rep == "hybrid";
  m.gp_hidden = cfg.gp_hidden;

  for (int64_t p = 0; p < m.layout.n_parts; p++) {
    // hands get the slim stack; merged or body parts the wide one
    bool is_hand = m.layout.n_parts == 3 && p < 2;
    int64_t h = is_hand ? cfg.enc_hidden_hand : cfg.enc_hidden_body;
    m.enc_hidden.push_back(h);
    auto in = static_cast<int64_t>(m.layout.part_cols[static_cast<size_t>(p)].size());
    int64_t d = m.layout.code_dims[static_cast<size_t>(p)];
    std::string pre = part_prefix(p);
    // kernel w+2 with unit padding keeps output length exactly T/w
    nn::add_conv1d(m.params, pre + ".c1", m.w_m + 2, in, h, rng);
    nn::add_conv1d(m.params, pre + ".c2", 3, h, h, rng);
    nn::add_conv1d(m.params, pre + ".c3", 3, h, h, rng);
    nn::add_conv1d(m.params, pre + ".c4", 3, h, d, rng);
  }

  {
    int64_t h = m.dec_hidden;
    nn::add_conv1d(m.params, "dec.c1", m.w_m + 2, kCodeDims, h, rng);
    nn::add_conv1d(m.params, "dec.c2", 3, h, h, rng);
    nn::add_conv1d(m.params, "dec.c3", 3, h, h, rng);
    nn::add_conv1d(m.params, "dec.c4", 3, h, m.rep_dims, rng);
  }

  for (int64_t p = 0; p < m.layout.n_parts; p++) {
    double scale = 1.0 / static_cast<double>(m.codebook_size);
    m.params.add("cb" + std::to_string(p),
                 rng.uniform_tensor({m.codebook_size, m.layout.code_dims[static_cast<size_t>(p)]},
                                    -scale, scale));
  }

  if (m.has_gp) {
    body::GpNetwork gp = body::GpNetwork::init(body::kHybridDims, m.gp_hidden, rng);
    for (auto& e : gp.params.entries()) m.params.add(e.name, e.value);
  }
  return m;
}

const Tensor& VqModel::codebook(int64_t part) const {
  return params.get("cb" + std::to_string(part));
}

std::vector<NodeId> VqModel::encode_parts(Tape& t, const nn::Binding& b,
                                          const std::vector<NodeId>& part_inputs) const {
  if (static_cast<int64_t>(part_inputs.size()) != layout.n_parts)
    fail("encode: expected " + std::to_string(layout.n_parts) + " part inputs");
  std::vector<NodeId> zs;
  for (int64_t p = 0; p < layout.n_parts; p++) {
    std::string pre = part_prefix(p);
    NodeId h = nn::conv1d(t, b, pre + ".c1", part_inputs[static_cast<size_t>(p)], w_m, 1);
    h = t.gelu(h);
    h = t.gelu(nn::conv1d(t, b, pre + ".c2", h, 1, 1));
    h = t.gelu(nn::conv1d(t, b, pre + ".c3", h, 1, 1));
    h = nn::conv1d(t, b, pre + ".c4", h, 1, 1);
    zs.push_back(h);
  }
  return zs;
}

NodeId VqModel::decode_graph(Tape& t, const nn::Binding& b, NodeId zq) const {
  NodeId h = nn::conv1d_transpose(t, b, "dec.c1", zq, w_m, 1);
  h = t.gelu(h);
  h = t.gelu(nn::conv1d_transpose(t, b, "dec.c2", h, 1, 1));
  h = t.gelu(nn::conv1d_transpose(t, b, "dec.c3", h, 1, 1));
  return nn::conv1d_transpose(t, b, "dec.c4", h, 1, 1);
}

NodeId VqModel::gp_graph(Tape& t, const nn::Binding& b, NodeId vhat) const {
  if (!has_gp) fail("gp_graph: this representation has no pose generator");
  return body::gp_forward_graph(t, b, vhat);
}

TokenSeq VqModel::encode_tokens(const Tensor& rep_motion) const {
  Tape t;
  nn::Binding b(t, const_cast<nn::ParamSet&>(params));
  auto blocks = part_split(layout, rep_motion);
  std::vector<NodeId> inputs;
  for (auto& blk : blocks) inputs.push_back(t.leaf(std::move(blk)));
  auto zs = encode_parts(t, b, inputs);

  int64_t rows = t.value(zs[0]).shape[0];
  TokenSeq tokens(static_cast<size_t>(rows), std::vector<int64_t>(layout.n_parts));
  for (int64_t p = 0; p < layout.n_parts; p++) {
    const Tensor& z = t.value(zs[static_cast<size_t>(p)]);
    const Tensor& cb = codebook(p);
    for (int64_t r = 0; r < rows; r++) {
      Tensor row({z.shape[1]});
      for (int64_t c = 0; c < z.shape[1]; c++) row.data[static_cast<size_t>(c)] = z.at(r, c);
      tokens[static_cast<size_t>(r)][static_cast<size_t>(p)] = quantize(row, cb).first;
    }
  }
  return tokens;
}

std::pair<Tensor, Tensor> VqModel::decode_tokens(const TokenSeq& tokens) const {
  if (tokens.empty()) fail("decode_tokens: empty token sequence");
  Tape t;
  nn::Binding b(t, const_cast<nn::ParamSet&>(params));
  std::vector<NodeId> parts;
  for (int64_t p = 0; p < layout.n_parts; p++) {
    std::vector<int64_t> idx;
    for (const auto& row : tokens) {
      if (static_cast<int64_t>(row.size()) != layout.n_parts)
        fail("decode_tokens: token row arity mismatch");
      if (row[static_cast<size_t>(p)] < 0 || row[static_cast<size_t>(p)] >= codebook_size)
        fail("decode_tokens: index " + std::to_string(row[static_cast<size_t>(p)]) +
             " out of range for codebook " + std::to_string(p));
      idx.push_back(row[static_cast<size_t>(p)]);
    }
    parts.push_back(t.gather_rows(b["cb" + std::to_string(p)], idx));
  }
  NodeId zq = parts[0];
  for (size_t p = 1; p < parts.size(); p++) zq = t.concat_cols(zq, parts[p]);
  NodeId vhat = decode_graph(t, b, zq);
  Tensor rep_out = t.value(vhat);
  Tensor pose;
  if (has_gp) {
    pose = t.value(gp_graph(t, b, vhat));
  } else {
    pose = pose_from_rep(rep, rep_out);
  }
  return {std::move(rep_out), std::move(pose)};
}

std::pair<Tensor, Tensor> VqModel::reconstruct(const Tensor& rep_motion) const {
  return decode_tokens(encode_tokens(rep_motion));
}

NodeId loss_rec_graph(Tape& t, NodeId pred, NodeId target, double alpha1, double alpha2) {
  const Tensor& pv = t.value(pred);
  if (!pv.same_shape(t.value(target)))
    fail("loss_rec: shape mismatch " + shape_str(pv.shape) + " vs " +
         shape_str(t.value(target).shape));
  int64_t rows = pv.shape[0];
  NodeId diff = t.sub(pred, target);
  NodeId loss = t.abs_mean(diff);
  if (rows >= 2) {
    NodeId dp = t.sub(t.slice_rows(pred, 1, rows), t.slice_rows(pred, 0, rows - 1));
    NodeId dt = t.sub(t.slice_rows(target, 1, rows), t.slice_rows(target, 0, rows - 1));
    loss = t.add(loss, t.scale(t.abs_mean(t.sub(dp, dt)), alpha1));
    if (rows >= 3) {
      NodeId ddp = t.sub(t.slice_rows(dp, 1, rows - 1), t.slice_rows(dp, 0, rows - 2));
      NodeId ddt = t.sub(t.slice_rows(dt, 1, rows - 1), t.slice_rows(dt, 0, rows - 2));
      loss = t.add(loss, t.scale(t.abs_mean(t.sub(ddp, ddt)), alpha2));
    }
  }
  return loss;
}

NodeId loss_vq_graph(Tape& t, NodeId z, NodeId zq, double beta) {
  NodeId codebook_term = t.sq_mean(t.sub(t.stop_gradient(z), zq));
  NodeId commit_term = t.sq_mean(t.sub(z, t.stop_gradient(zq)));
  return t.add(codebook_term, t.scale(commit_term, beta));
}

double loss_rec_value(const Tensor& pred, const Tensor& target, double alpha1, double alpha2) {
  Tape t;
  return t.value(loss_rec_graph(t, t.leaf(pred), t.leaf(target), alpha1, alpha2)).item();
}

double loss_vq_value(const Tensor& z, const Tensor& zq, double beta) {
  Tape t;
  return t.value(loss_vq_graph(t, t.leaf(z), t.leaf(zq), beta)).item();
}

Tensor rep_from_pose(const std::string& rep, const body::KinematicTree& tree, const Tensor& pose,
                     const Tensor& hybrid_motion) {
  if (rep == "hybrid") {
    if (hybrid_motion.numel() > 0) return hybrid_motion;
    return body::extract_hybrid(tree, pose);
  }
  if (rep == "aa3d") return pose;
  if (rep == "rot6d") return body::aa_to_rot6d(pose);
  fail("unknown representation '" + rep + "'");
  return {};
}

Tensor pose_from_rep(const std::string& rep, const Tensor& rep_motion) {
  if (rep == "aa3d") return rep_motion;
  if (rep == "rot6d") return body::rot6d_to_aa(rep_motion);
  fail("pose_from_rep: representation '" + rep + "' recovers pose through G_P");
  return {};
}

VqModel train_vqvae(const synth::Manifest& corpus, const body::KinematicTree& tree,
                    const RunConfig& cfg, std::ostream* log, VqTrainStats* stats) {
  auto train = corpus.split("train");
  if (train.empty()) fail("train_vqvae: empty training split");

  Rng rng(cfg.seed);
  VqModel model = VqModel::init(cfg, tree, rng);

  // Load the training split once; everything fits at desk scale.
  struct ClipData {
    Tensor rep;   // [T, rep_dims]
    Tensor pose;  // [T, 168]
  };
  std::vector<ClipData> clips;
  for (const auto* e : train) {
    ClipData d;
    d.pose = read_pose(corpus.path(*e, ".pose"));
    Tensor motion;
    if (model.rep == "hybrid") motion = read_motn(corpus.path(*e, ".motn"), nullptr);
    d.rep = rep_from_pose(model.rep, tree, d.pose, motion);
    // trim to a multiple of the token window
    int64_t t_len = d.rep.shape[0] - d.rep.shape[0] % cfg.w_m;
    if (t_len < d.rep.shape[0]) {
      Tape t;
      d.rep = t.value(t.slice_rows(t.leaf(d.rep), 0, t_len));
      d.pose = t.value(t.slice_rows(t.leaf(d.pose), 0, t_len));
    }
    clips.push_back(std::move(d));
  }

  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;

  int64_t crop = cfg.crop_frames > 0 ? cfg.crop_frames - cfg.crop_frames % cfg.w_m : 0;
  Tensor usage({model.layout.n_parts, model.codebook_size});

  if (stats) *stats = VqTrainStats{};
  for (int64_t epoch = 0; epoch < cfg.vq_epochs; epoch++) {
    // seeded shuffle
    std::vector<size_t> order(clips.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = i;
    for (size_t i = order.size(); i > 1; i--)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);

    bool last_epoch = epoch == cfg.vq_epochs - 1;
    if (last_epoch) usage = Tensor({model.layout.n_parts, model.codebook_size});

    double epoch_loss = 0.0;
    int64_t n_steps = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_clips)) {
      Tape t;
      nn::Binding b(t, model.params);
      NodeId total = -1;
      int64_t in_batch = 0;
      for (size_t bi = at; bi < std::min(order.size(), at + static_cast<size_t>(cfg.batch_clips));
           bi++) {
        const ClipData& clip = clips[order[bi]];
        int64_t t_len = clip.rep.shape[0];
        int64_t lo = 0, hi = t_len;
        if (crop > 0 && crop < t_len) {
          int64_t max_start = (t_len - crop) / cfg.w_m;
          lo = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(max_start + 1))) * cfg.w_m;
          hi = lo + crop;
        }
        Tensor rep_in({hi - lo, clip.rep.shape[1]});
        std::copy(clip.rep.data.begin() + lo * clip.rep.shape[1],
                  clip.rep.data.begin() + hi * clip.rep.shape[1], rep_in.data.begin());
        Tensor pose_in({hi - lo, clip.pose.shape[1]});
        std::copy(clip.pose.data.begin() + lo * clip.pose.shape[1],
                  clip.pose.data.begin() + hi * clip.pose.shape[1], pose_in.data.begin());

        auto blocks = part_split(model.layout, rep_in);
        std::vector<NodeId> inputs;
        for (auto& blk : blocks) inputs.push_back(t.leaf(std::move(blk)));
        NodeId target = t.leaf(std::move(rep_in));

        auto zs = model.encode_parts(t, b, inputs);
        std::vector<NodeId> zq_parts, st_parts;
        for (int64_t p = 0; p < model.layout.n_parts; p++) {
          const Tensor& z = t.value(zs[static_cast<size_t>(p)]);
          const Tensor& cb = model.codebook(p);
          std::vector<int64_t> idx;
          for (int64_t r = 0; r < z.shape[0]; r++) {
            Tensor row({z.shape[1]});
            for (int64_t c = 0; c < z.shape[1]; c++) row.data[static_cast<size_t>(c)] = z.at(r, c);
            int64_t best = quantize(row, cb).first;
            idx.push_back(best);
            if (last_epoch) usage.at(p, best) += 1.0;
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
        if (model.has_gp) {
          NodeId theta = model.gp_graph(t, b, vhat);
          loss = t.add(loss, t.abs_mean(t.sub(theta, t.leaf(std::move(pose_in)))));
        }
        total = total < 0 ? loss : t.add(total, loss);
        in_batch++;
      }
      if (in_batch > 1) total = t.scale(total, 1.0 / static_cast<double>(in_batch));
      double loss_val = t.value(total).item();
      if (!std::isfinite(loss_val)) fail("train_vqvae: loss diverged (non-finite)");
      t.backward(total);
      b.apply_adam(adam);
      epoch_loss += loss_val;
      n_steps++;
    }
    epoch_loss /= static_cast<double>(n_steps);
    if (stats) stats->epoch_loss.push_back(epoch_loss);
    if (log && (epoch % 10 == 0 || epoch == cfg.vq_epochs - 1))
      *log << "vqvae epoch " << epoch << " loss " << epoch_loss << "\n";
  }

  if (stats) {
    stats->usage_counts = usage;
    for (int64_t p = 0; p < model.layout.n_parts; p++) {
      int64_t used = 0;
      double total = 0.0;
      for (int64_t i = 0; i < model.codebook_size; i++) {
        if (usage.at(p, i) > 0.0) used++;
        total += usage.at(p, i);
      }
      double frac = static_cast<double>(used) / static_cast<double>(model.codebook_size);
      stats->usage_fraction.push_back(frac);
      double entropy = 0.0;
      for (int64_t i = 0; i < model.codebook_size; i++) {
        if (usage.at(p, i) <= 0.0) continue;
        double prob = usage.at(p, i) / total;
        entropy -= prob * std::log(prob);
      }
      stats->perplexity.push_back(std::exp(entropy));
      if (frac < 0.5) {
        stats->dead_code_alarm = true;
        if (log)
          *log << "dead-code alarm: codebook " << p << " uses " << frac * 100.0
               << "% of its entries\n";
      }
    }
  }
  return model;
}

void save_vq_checkpoint(const std::string& path, const VqModel& model, const VqTrainStats& stats,
                        const std::string& config_echo, uint64_t minibody_hash) {
  std::vector<std::pair<std::string, Tensor>> extras;
  if (stats.usage_counts.numel() > 0) extras.emplace_back("stats.usage", stats.usage_counts);
  save_checkpoint(path, "VQCK", config_echo, minibody_hash, model.params, extras);
}

VqModel load_vq_checkpoint(const std::string& path, const body::KinematicTree& tree,
                           uint64_t expect_minibody_hash, VqTrainStats* stats,
                           RunConfig* cfg_out) {
  Checkpoint ck = load_checkpoint(path, "VQCK");
  if (expect_minibody_hash != 0 && ck.minibody_hash != expect_minibody_hash)
    fail("checkpoint-hash-mismatch: '" + path + "' was trained against a different MiniBody");
  RunConfig cfg = config_from_echo(ck.config_echo);
  Rng rng(cfg.seed);
  VqModel model = VqModel::init(cfg, tree, rng);
  restore_params(ck, model.params);
  if (stats) {
    *stats = VqTrainStats{};
    for (const auto& [name, tensor] : ck.tensors)
      if (name == "stats.usage") stats->usage_counts = tensor;
  }
  if (cfg_out) *cfg_out = cfg;
  return model;
}

}  // namespace motionact::vq
