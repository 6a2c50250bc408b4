#include "motionact/translator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "motionact/audiofront.hpp"
#include "motionact/io.hpp"

namespace motionact::translator {

namespace {

// start-token row appended to each embedding table
int64_t start_index(int64_t codebook_size) { return codebook_size; }

Tensor decay_matrix(int64_t t_len, double gamma) {
  Tensor d({t_len, t_len});
  for (int64_t t = 0; t < t_len; t++) {
    double w = 1.0;
    for (int64_t s = t; s >= 0; s--) {
      d.at(t, s) = w;
      w *= gamma;
    }
  }
  return d;
}

std::string block_prefix(int64_t i) { return "blk" + std::to_string(i); }

// --- plain row math for the recurrent decoder ---

std::vector<double> linear_row(const std::vector<double>& x, const Tensor& w, const Tensor& b) {
  auto out_dim = static_cast<size_t>(w.shape[1]);
  std::vector<double> y(out_dim, 0.0);
  for (size_t i = 0; i < x.size(); i++) {
    double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = &w.data[i * out_dim];
    for (size_t j = 0; j < out_dim; j++) y[j] += xi * row[j];
  }
  for (size_t j = 0; j < out_dim; j++) y[j] += b.data[j];
  return y;
}

std::vector<double> layer_norm_row(const std::vector<double>& x, const Tensor& g, const Tensor& b,
                                   double eps = 1e-5) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  double rs = 1.0 / std::sqrt(var + eps);
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); i++) y[i] = (x[i] - mu) * rs * g.data[i] + b.data[i];
  return y;
}

}  // namespace

Tensor retention_parallel(const Tensor& q, const Tensor& k, const Tensor& v, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail("retention: gamma must be in (0,1)");
  if (!q.same_shape(k) || !q.same_shape(v) || q.shape.size() != 2)
    fail("retention: q/k/v must share a [T,d] shape");
  if (!q.all_finite() || !k.all_finite() || !v.all_finite())
    fail("retention: non-finite inputs");
  Tensor scores = matmul_val(q, transpose_val(k));  // [T,T]
  Tensor d = decay_matrix(q.shape[0], gamma);
  for (int64_t i = 0; i < scores.numel(); i++) scores.data[i] *= d.data[i];
  return matmul_val(scores, v);
}

Tensor retention_recurrent(const Tensor& q, const Tensor& k, const Tensor& v, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail("retention: gamma must be in (0,1)");
  if (!q.same_shape(k) || !q.same_shape(v) || q.shape.size() != 2)
    fail("retention: q/k/v must share a [T,d] shape");
  int64_t t_len = q.shape[0], dim = q.shape[1];
  Tensor state({dim, dim});
  Tensor out({t_len, dim});
  for (int64_t t = 0; t < t_len; t++) {
    // S_t = gamma * S_{t-1} + k_t^T v_t
    for (int64_t r = 0; r < dim; r++)
      for (int64_t c = 0; c < dim; c++)
        state.at(r, c) = gamma * state.at(r, c) + k.at(t, r) * v.at(t, c);
    for (int64_t c = 0; c < dim; c++) {
      double acc = 0.0;
      for (int64_t r = 0; r < dim; r++) acc += q.at(t, r) * state.at(r, c);
      out.at(t, c) = acc;
    }
  }
  return out;
}

Tensor pool_code(const Tensor& zq) {
  if (zq.shape.size() != 2 || zq.shape[0] < 1)
    fail("pool_code: expected [T,d] features, got " + shape_str(zq.shape));
  int64_t t_len = zq.shape[0], d = zq.shape[1];
  Tensor out({d});
  for (int64_t t = 0; t < t_len; t++)
    for (int64_t c = 0; c < d; c++) out.data[static_cast<size_t>(c)] += zq.at(t, c);
  double norm = 1e-12;
  for (auto& v : out.data) v /= static_cast<double>(t_len);
  for (double v : out.data) norm += v * v;
  norm = std::sqrt(norm);
  for (auto& v : out.data) v /= norm;
  return out;
}

double contrastive_loss_value(const Tensor& p, const Tensor& p_pos,
                              const std::vector<Tensor>& negatives, double tau) {
  if (negatives.empty()) fail("contrastive_loss: empty negative set");
  if (tau <= 0.0) fail("contrastive_loss: tau must be positive");
  Tensor negs({static_cast<int64_t>(negatives.size()), p.numel()});
  for (size_t i = 0; i < negatives.size(); i++)
    for (int64_t c = 0; c < p.numel(); c++) negs.at(static_cast<int64_t>(i), c) = negatives[i].data[static_cast<size_t>(c)];
  Tape t;
  NodeId pn = t.leaf(p.reshaped({1, p.numel()}));
  NodeId posn = t.leaf(p_pos.reshaped({1, p.numel()}));
  return t.value(contrastive_loss_graph(t, pn, posn, negs, tau)).item();
}

NodeId contrastive_loss_graph(Tape& t, NodeId p, NodeId p_pos, const Tensor& negatives,
                              double tau) {
  if (tau <= 0.0) fail("contrastive_loss: tau must be positive");
  if (negatives.shape.size() != 2 || negatives.shape[0] < 1)
    fail("contrastive_loss: empty negative set");
  NodeId pos_sim = t.matmul(p, t.transpose(p_pos));               // [1,1]
  NodeId neg_sim = t.matmul(p, t.transpose(t.leaf(negatives)));   // [1,L]
  NodeId logits = t.scale(t.concat_cols(pos_sim, neg_sim), 1.0 / tau);
  return t.cross_entropy_rows(logits, {0});
}

int64_t argmax_low(const double* v, int64_t n) {
  int64_t best = 0;
  for (int64_t i = 1; i < n; i++)
    if (v[i] > v[best]) best = i;
  return best;
}

double ce_loss_value(const std::vector<Tensor>& head_logits, const TokenSeq& targets) {
  if (head_logits.empty()) fail("ce_loss: no heads");
  Tape t;
  NodeId total = -1;
  for (size_t h = 0; h < head_logits.size(); h++) {
    std::vector<int64_t> tg;
    for (const auto& row : targets) tg.push_back(row[h]);
    NodeId l = t.cross_entropy_rows(t.leaf(head_logits[h]), tg);
    total = total < 0 ? l : t.add(total, l);
  }
  return t.value(total).item() / static_cast<double>(head_logits.size());
}

void NegativeBank::push(Tensor code, int64_t speaker, int64_t clip) {
  entries_.push_back(Entry{std::move(code), speaker, clip});
  while (static_cast<int64_t>(entries_.size()) > capacity_) entries_.pop_front();
}

Tensor NegativeBank::negatives(int64_t speaker, int64_t clip, bool exclude_same_speaker) const {
  std::vector<const Entry*> keep;
  for (const auto& e : entries_) {
    if (e.clip == clip) continue;
    if (exclude_same_speaker && e.speaker == speaker) continue;
    keep.push_back(&e);
  }
  if (keep.empty()) return Tensor{};
  Tensor out({static_cast<int64_t>(keep.size()), keep[0]->code.numel()});
  for (size_t i = 0; i < keep.size(); i++)
    for (int64_t c = 0; c < keep[i]->code.numel(); c++)
      out.at(static_cast<int64_t>(i), c) = keep[i]->code.data[static_cast<size_t>(c)];
  return out;
}

TranslatorModel TranslatorModel::init(const RunConfig& cfg, int64_t n_speakers, int64_t n_parts,
                                      int64_t codebook_size, Rng& rng) {
  TranslatorModel m;
  m.width = cfg.tr_width;
  m.n_blocks = cfg.tr_blocks;
  m.embed = cfg.tr_embed;
  m.n_speakers = n_speakers;
  m.n_parts = n_parts;
  m.codebook_size = codebook_size;
  for (int64_t i = 0; i < m.n_blocks; i++) m.gammas.push_back(1.0 - std::pow(2.0, -static_cast<double>(i) - 2.0));

  for (int64_t p = 0; p < n_parts; p++)
    m.params.add("emb" + std::to_string(p),
                 rng.normal_tensor({codebook_size + 1, m.embed}, 0.02));
  int64_t in_dims = m.mfcc_dims + n_speakers + n_parts * m.embed;
  nn::add_linear(m.params, "in", in_dims, m.width, rng);
  for (int64_t i = 0; i < m.n_blocks; i++) {
    std::string pre = block_prefix(i);
    nn::add_layer_norm(m.params, pre + ".ln1", m.width);
    nn::add_linear(m.params, pre + ".wq", m.width, m.width, rng);
    nn::add_linear(m.params, pre + ".wk", m.width, m.width, rng);
    nn::add_linear(m.params, pre + ".wv", m.width, m.width, rng);
    nn::add_linear(m.params, pre + ".wo", m.width, m.width, rng);
    nn::add_layer_norm(m.params, pre + ".ln2", m.width);
    nn::add_linear(m.params, pre + ".fc1", m.width, 2 * m.width, rng);
    nn::add_linear(m.params, pre + ".fc2", 2 * m.width, m.width, rng);
  }
  for (int64_t p = 0; p < n_parts; p++)
    nn::add_linear(m.params, "head" + std::to_string(p), m.width, codebook_size, rng);
  return m;
}

std::vector<NodeId> TranslatorModel::logits_graph(Tape& t, const nn::Binding& b,
                                                  const Tensor& mfcc, int64_t speaker,
                                                  const TokenSeq& teacher) const {
  if (mfcc.shape.size() != 2 || mfcc.shape[1] != mfcc_dims)
    fail("translate: mfcc must be [T,64], got " + shape_str(mfcc.shape));
  if (speaker < 0 || speaker >= n_speakers)
    fail("translate: speaker id " + std::to_string(speaker) + " out of range [0," +
         std::to_string(n_speakers) + ")");
  auto t_len = static_cast<int64_t>(teacher.size());
  if (t_len < 1 || t_len > mfcc.shape[0])
    fail("translate: teacher length " + std::to_string(t_len) + " exceeds mfcc rows " +
         std::to_string(mfcc.shape[0]));

  // audio + one-hot speaker rows (constant inputs)
  Tensor base({t_len, mfcc_dims + n_speakers});
  for (int64_t r = 0; r < t_len; r++) {
    for (int64_t c = 0; c < mfcc_dims; c++) base.at(r, c) = mfcc.at(r, c);
    base.at(r, mfcc_dims + speaker) = 1.0;
  }
  NodeId x = t.leaf(std::move(base));

  // previous-token embeddings (start token at step 0)
  for (int64_t p = 0; p < n_parts; p++) {
    std::vector<int64_t> prev(static_cast<size_t>(t_len));
    prev[0] = start_index(codebook_size);
    for (int64_t r = 1; r < t_len; r++) {
      int64_t tok = teacher[static_cast<size_t>(r - 1)][static_cast<size_t>(p)];
      if (tok < 0 || tok >= codebook_size)
        fail("translate: teacher token " + std::to_string(tok) + " out of range");
      prev[static_cast<size_t>(r)] = tok;
    }
    x = t.concat_cols(x, t.gather_rows(b["emb" + std::to_string(p)], prev));
  }

  NodeId h = nn::linear(t, b, "in", x);
  for (int64_t i = 0; i < n_blocks; i++) {
    std::string pre = block_prefix(i);
    NodeId n1 = nn::layer_norm(t, b, pre + ".ln1", h);
    NodeId q = nn::linear(t, b, pre + ".wq", n1);
    NodeId k = nn::linear(t, b, pre + ".wk", n1);
    NodeId v = nn::linear(t, b, pre + ".wv", n1);
    NodeId scores = t.mul(t.matmul(q, t.transpose(k)), t.leaf(decay_matrix(t_len, gammas[static_cast<size_t>(i)])));
    NodeId o = nn::linear(t, b, pre + ".wo", t.matmul(scores, v));
    h = t.add(h, o);
    NodeId n2 = nn::layer_norm(t, b, pre + ".ln2", h);
    NodeId f = nn::linear(t, b, pre + ".fc2", t.gelu(nn::linear(t, b, pre + ".fc1", n2)));
    h = t.add(h, f);
  }

  std::vector<NodeId> heads;
  for (int64_t p = 0; p < n_parts; p++) heads.push_back(nn::linear(t, b, "head" + std::to_string(p), h));
  return heads;
}

std::vector<Tensor> translate_logits(const TranslatorModel& model, const Tensor& mfcc,
                                     int64_t speaker, const TokenSeq& teacher) {
  Tape t;
  nn::Binding b(t, const_cast<nn::ParamSet&>(model.params));
  auto heads = model.logits_graph(t, b, mfcc, speaker, teacher);
  std::vector<Tensor> out;
  for (NodeId h : heads) out.push_back(t.value(h));
  return out;
}

TokenSeq TranslatorModel::generate(const Tensor& mfcc, int64_t speaker, bool mode_diverse,
                                   Rng& rng) const {
  if (mfcc.shape.size() != 2 || mfcc.shape[1] != mfcc_dims)
    fail("generate: mfcc must be [T,64], got " + shape_str(mfcc.shape));
  if (speaker < 0 || speaker >= n_speakers)
    fail("generate: speaker id " + std::to_string(speaker) + " out of range [0," +
         std::to_string(n_speakers) + ")");
  int64_t t_len = mfcc.shape[0];

  // per-block retention state S [width x width]
  std::vector<Tensor> state(static_cast<size_t>(n_blocks), Tensor({width, width}));
  std::vector<int64_t> prev(static_cast<size_t>(n_parts), start_index(codebook_size));
  TokenSeq out;

  for (int64_t step = 0; step < t_len; step++) {
    std::vector<double> x;
    x.reserve(static_cast<size_t>(mfcc_dims + n_speakers + n_parts * embed));
    for (int64_t c = 0; c < mfcc_dims; c++) x.push_back(mfcc.at(step, c));
    for (int64_t s = 0; s < n_speakers; s++) x.push_back(s == speaker ? 1.0 : 0.0);
    for (int64_t p = 0; p < n_parts; p++) {
      const Tensor& emb = params.get("emb" + std::to_string(p));
      for (int64_t c = 0; c < embed; c++) x.push_back(emb.at(prev[static_cast<size_t>(p)], c));
    }

    std::vector<double> h = linear_row(x, params.get("in.w"), params.get("in.b"));
    for (int64_t i = 0; i < n_blocks; i++) {
      std::string pre = block_prefix(i);
      auto n1 = layer_norm_row(h, params.get(pre + ".ln1.g"), params.get(pre + ".ln1.b"));
      auto q = linear_row(n1, params.get(pre + ".wq.w"), params.get(pre + ".wq.b"));
      auto k = linear_row(n1, params.get(pre + ".wk.w"), params.get(pre + ".wk.b"));
      auto v = linear_row(n1, params.get(pre + ".wv.w"), params.get(pre + ".wv.b"));
      Tensor& s = state[static_cast<size_t>(i)];
      double gamma = gammas[static_cast<size_t>(i)];
      for (int64_t r = 0; r < width; r++) {
        double kr = k[static_cast<size_t>(r)];
        double* row = &s.data[static_cast<size_t>(r * width)];
        for (int64_t c = 0; c < width; c++) row[c] = gamma * row[c] + kr * v[static_cast<size_t>(c)];
      }
      std::vector<double> o(static_cast<size_t>(width), 0.0);
      for (int64_t r = 0; r < width; r++) {
        double qr = q[static_cast<size_t>(r)];
        if (qr == 0.0) continue;
        const double* row = &s.data[static_cast<size_t>(r * width)];
        for (int64_t c = 0; c < width; c++) o[static_cast<size_t>(c)] += qr * row[c];
      }
      o = linear_row(o, params.get(pre + ".wo.w"), params.get(pre + ".wo.b"));
      for (int64_t c = 0; c < width; c++) h[static_cast<size_t>(c)] += o[static_cast<size_t>(c)];
      auto n2 = layer_norm_row(h, params.get(pre + ".ln2.g"), params.get(pre + ".ln2.b"));
      auto f1 = linear_row(n2, params.get(pre + ".fc1.w"), params.get(pre + ".fc1.b"));
      for (auto& vv : f1) vv = gelu_scalar(vv);
      auto f2 = linear_row(f1, params.get(pre + ".fc2.w"), params.get(pre + ".fc2.b"));
      for (int64_t c = 0; c < width; c++) h[static_cast<size_t>(c)] += f2[static_cast<size_t>(c)];
    }

    std::vector<int64_t> tokens(static_cast<size_t>(n_parts));
    for (int64_t p = 0; p < n_parts; p++) {
      if (step == 0 && mode_diverse) {
        tokens[static_cast<size_t>(p)] =
            static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(codebook_size)));
        continue;
      }
      auto logits = linear_row(h, params.get("head" + std::to_string(p) + ".w"),
                               params.get("head" + std::to_string(p) + ".b"));
      tokens[static_cast<size_t>(p)] = argmax_low(logits.data(), codebook_size);
    }
    out.push_back(tokens);
    prev = out.back();
  }
  return out;
}

TranslatorModel train_translator(const synth::Manifest& corpus, const vq::VqModel& vq_model,
                                 const body::KinematicTree& tree, const RunConfig& cfg,
                                 std::ostream* log, TranslatorTrainStats* stats) {
  auto train = corpus.split("train");
  if (train.empty()) fail("train_translator: empty training split");

  Rng rng(cfg.seed + 0x7261);
  TranslatorModel model =
      TranslatorModel::init(cfg, cfg.n_speakers, vq_model.layout.n_parts, vq_model.codebook_size, rng);

  // Frozen stage-1 artifacts per clip: MFCC, GT tokens, GT pooled code.
  struct ClipData {
    Tensor mfcc;
    TokenSeq tokens;
    Tensor pos_code;  // [768]
    int64_t speaker;
    int64_t clip_id;
  };
  std::vector<ClipData> clips;
  std::vector<Tensor> codebooks;
  for (int64_t p = 0; p < vq_model.layout.n_parts; p++) codebooks.push_back(vq_model.codebook(p));

  for (size_t i = 0; i < train.size(); i++) {
    const auto* e = train[i];
    ClipData d;
    d.speaker = e->speaker;
    d.clip_id = static_cast<int64_t>(i);
    d.mfcc = audio::mfcc(audio::load_wav(corpus.path(*e, ".wav")));
    Tensor pose = read_pose(corpus.path(*e, ".pose"));
    Tensor motion;
    if (vq_model.rep == "hybrid") motion = read_motn(corpus.path(*e, ".motn"), nullptr);
    Tensor rep = vq::rep_from_pose(vq_model.rep, tree, pose, motion);
    int64_t t_len = std::min(rep.shape[0], d.mfcc.shape[0]);
    t_len -= t_len % cfg.w_m;
    {
      Tape t;
      rep = t.value(t.slice_rows(t.leaf(rep), 0, t_len));
      d.mfcc = t.value(t.slice_rows(t.leaf(d.mfcc), 0, t_len));
    }
    d.tokens = vq_model.encode_tokens(rep);
    // GT quantized features -> pooled positive
    Tensor zq({static_cast<int64_t>(d.tokens.size()), vq::kCodeDims});
    for (size_t r = 0; r < d.tokens.size(); r++) {
      int64_t off = 0;
      for (int64_t p = 0; p < vq_model.layout.n_parts; p++) {
        const Tensor& cb = codebooks[static_cast<size_t>(p)];
        int64_t idx = d.tokens[r][static_cast<size_t>(p)];
        for (int64_t c = 0; c < cb.shape[1]; c++)
          zq.at(static_cast<int64_t>(r), off + c) = cb.at(idx, c);
        off += cb.shape[1];
      }
    }
    d.pos_code = pool_code(zq);
    clips.push_back(std::move(d));
  }

  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  NegativeBank bank(cfg.bank_capacity);
  if (stats) *stats = TranslatorTrainStats{};

  for (int64_t epoch = 0; epoch < cfg.tr_epochs; epoch++) {
    std::vector<size_t> order(clips.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = i;
    for (size_t i = order.size(); i > 1; i--) std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double epoch_ce = 0.0, epoch_cm = 0.0;
    int64_t cm_steps = 0;
    for (size_t oi = 0; oi < order.size(); oi++) {
      const ClipData& clip = clips[order[oi]];
      Tape t;
      nn::Binding b(t, model.params);
      auto heads = model.logits_graph(t, b, clip.mfcc, clip.speaker, clip.tokens);

      NodeId ce = -1;
      for (int64_t p = 0; p < model.n_parts; p++) {
        std::vector<int64_t> tg;
        for (const auto& row : clip.tokens) tg.push_back(row[static_cast<size_t>(p)]);
        NodeId l = t.cross_entropy_rows(heads[static_cast<size_t>(p)], tg);
        ce = ce < 0 ? l : t.add(ce, l);
      }
      ce = t.scale(ce, 1.0 / static_cast<double>(model.n_parts));
      NodeId loss = ce;

      // contrastive motion learning on the soft expected codes
      NodeId p_node = -1;
      Tensor negs;
      if (cfg.contrastive)
        negs = bank.negatives(clip.speaker, clip.clip_id, cfg.negatives_exclude_same_speaker);
      double cm_val = 0.0;
      if (cfg.contrastive && negs.numel() > 0) {
        NodeId soft = -1;
        for (int64_t p = 0; p < model.n_parts; p++) {
          NodeId probs = t.softmax_rows(heads[static_cast<size_t>(p)]);
          NodeId part = t.matmul(probs, t.leaf(codebooks[static_cast<size_t>(p)]));
          soft = soft < 0 ? part : t.concat_cols(soft, part);
        }
        NodeId pooled = t.mean_axis(soft, 0);
        p_node = t.l2_normalize_rows(t.reshape(pooled, {1, vq::kCodeDims}));
        NodeId pos = t.leaf(clip.pos_code.reshaped({1, vq::kCodeDims}));
        NodeId cm = contrastive_loss_graph(t, p_node, pos, negs, cfg.tau);
        cm_val = t.value(cm).item();
        loss = t.add(loss, t.scale(cm, cfg.lambda_cm));
        cm_steps++;
      } else if (cfg.contrastive) {
        if (stats) stats->skipped_contrastive_steps++;
        if (log && epoch == 0 && oi == 0) *log << "contrastive step skipped: bank empty\n";
      }

      double loss_val = t.value(loss).item();
      if (!std::isfinite(loss_val)) fail("train_translator: loss diverged (non-finite)");
      t.backward(loss);
      b.apply_adam(adam);
      epoch_ce += t.value(ce).item();
      epoch_cm += cm_val;

      // the clip's generated code joins the bank (hard tokens, detached)
      TokenSeq sampled;
      for (size_t r = 0; r < clip.tokens.size(); r++) {
        std::vector<int64_t> row(static_cast<size_t>(model.n_parts));
        for (int64_t p = 0; p < model.n_parts; p++) {
          const Tensor& lg = t.value(heads[static_cast<size_t>(p)]);
          row[static_cast<size_t>(p)] =
              argmax_low(&lg.data[r * static_cast<size_t>(model.codebook_size)], model.codebook_size);
        }
        sampled.push_back(std::move(row));
      }
      Tensor zq({static_cast<int64_t>(sampled.size()), vq::kCodeDims});
      for (size_t r = 0; r < sampled.size(); r++) {
        int64_t off = 0;
        for (int64_t p = 0; p < model.n_parts; p++) {
          const Tensor& cb = codebooks[static_cast<size_t>(p)];
          for (int64_t c = 0; c < cb.shape[1]; c++)
            zq.at(static_cast<int64_t>(r), off + c) = cb.at(sampled[r][static_cast<size_t>(p)], c);
          off += cb.shape[1];
        }
      }
      bank.push(pool_code(zq), clip.speaker, clip.clip_id);
    }

    if (stats) {
      stats->epoch_ce.push_back(epoch_ce / static_cast<double>(clips.size()));
      stats->epoch_cm.push_back(cm_steps > 0 ? epoch_cm / static_cast<double>(cm_steps) : 0.0);
    }
    if (log && (epoch % 5 == 0 || epoch == cfg.tr_epochs - 1))
      *log << "translator epoch " << epoch << " ce " << epoch_ce / static_cast<double>(clips.size())
           << " cm " << (cm_steps > 0 ? epoch_cm / static_cast<double>(cm_steps) : 0.0) << "\n";
  }
  return model;
}

void save_translator_checkpoint(const std::string& path, const TranslatorModel& model,
                                const std::string& config_echo, uint64_t minibody_hash) {
  std::vector<std::pair<std::string, Tensor>> extras;
  extras.emplace_back("meta.n_speakers", Tensor::scalar(static_cast<double>(model.n_speakers)));
  extras.emplace_back("meta.n_parts", Tensor::scalar(static_cast<double>(model.n_parts)));
  extras.emplace_back("meta.codebook_size",
                      Tensor::scalar(static_cast<double>(model.codebook_size)));
  save_checkpoint(path, "TRCK", config_echo, minibody_hash, model.params, extras);
}

TranslatorModel load_translator_checkpoint(const std::string& path, uint64_t expect_minibody_hash,
                                           RunConfig* cfg_out) {
  Checkpoint ck = load_checkpoint(path, "TRCK");
  if (expect_minibody_hash != 0 && ck.minibody_hash != expect_minibody_hash)
    fail("checkpoint-hash-mismatch: '" + path + "' was trained against a different MiniBody");
  RunConfig cfg = config_from_echo(ck.config_echo);
  int64_t n_speakers = 0, n_parts = 0, codebook_size = 0;
  for (const auto& [name, tensor] : ck.tensors) {
    if (name == "meta.n_speakers") n_speakers = static_cast<int64_t>(tensor.data[0]);
    if (name == "meta.n_parts") n_parts = static_cast<int64_t>(tensor.data[0]);
    if (name == "meta.codebook_size") codebook_size = static_cast<int64_t>(tensor.data[0]);
  }
  if (n_speakers == 0 || n_parts == 0 || codebook_size == 0)
    fail("'" + path + "': missing translator metadata");
  Rng rng(cfg.seed + 0x7261);
  TranslatorModel model = TranslatorModel::init(cfg, n_speakers, n_parts, codebook_size, rng);
  restore_params(ck, model.params);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

}  // namespace motionact::translator
