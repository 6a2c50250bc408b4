#include "motionact/facegen.hpp"

#include <cmath>
#include <ostream>

#include "motionact/audiofront.hpp"
#include "motionact/io.hpp"

namespace motionact::face {

namespace {

void add_res_block(nn::ParamSet& ps, const std::string& pre, int64_t h, Rng& rng) {
  nn::add_layer_norm(ps, pre + ".ln", h);
  nn::add_conv1d(ps, pre + ".conv", 3, h, h, rng);
}

NodeId res_block(Tape& t, const nn::Binding& b, const std::string& pre, NodeId x) {
  NodeId y = nn::layer_norm(t, b, pre + ".ln", x);
  y = t.gelu(nn::conv1d(t, b, pre + ".conv", y, 1, 1));
  return t.add(x, y);
}

}  // namespace

FaceModel FaceModel::init(const RunConfig& cfg, int64_t n_speakers, Rng& rng) {
  FaceModel m;
  m.hidden = cfg.face_hidden;
  m.n_speakers = n_speakers;
  int64_t h = m.hidden;

  // learned audio front-end (depth 3)
  nn::add_conv1d(m.params, "aenc.c1", 3, audio::kMfccCoeffs, h, rng);
  nn::add_conv1d(m.params, "aenc.c2", 3, h, h, rng);
  nn::add_conv1d(m.params, "aenc.c3", 3, h, h, rng);

  nn::add_linear(m.params, "spk_proj", h + n_speakers, h, rng);

  // adaptive module: residual, attention, two residuals
  add_res_block(m.params, "adapt.r1", h, rng);
  nn::add_layer_norm(m.params, "adapt.attn.ln", h);
  nn::add_linear(m.params, "adapt.attn.wq", h, h, rng);
  nn::add_linear(m.params, "adapt.attn.wk", h, h, rng);
  nn::add_linear(m.params, "adapt.attn.wv", h, h, rng);
  nn::add_linear(m.params, "adapt.attn.wo", h, h, rng);
  add_res_block(m.params, "adapt.r2", h, rng);
  add_res_block(m.params, "adapt.r3", h, rng);

  // residual conv decoder down to the face channels
  add_res_block(m.params, "dec.r1", h, rng);
  nn::add_conv1d(m.params, "dec.out", 3, h, kFaceDims, rng);
  return m;
}

NodeId FaceModel::forward(Tape& t, const nn::Binding& b, const Tensor& mfcc, int64_t speaker,
                          NodeId* attention_rows) const {
  if (mfcc.shape.size() != 2 || mfcc.shape[1] != audio::kMfccCoeffs)
    fail("face_forward: mfcc must be [T,64], got " + shape_str(mfcc.shape));
  if (speaker < 0 || speaker >= n_speakers)
    fail("face_forward: speaker id " + std::to_string(speaker) + " out of range");
  int64_t t_len = mfcc.shape[0];

  NodeId h = t.gelu(nn::conv1d(t, b, "aenc.c1", t.leaf(mfcc), 1, 1));
  h = t.gelu(nn::conv1d(t, b, "aenc.c2", h, 1, 1));
  h = nn::conv1d(t, b, "aenc.c3", h, 1, 1);

  Tensor onehot({t_len, n_speakers});
  for (int64_t r = 0; r < t_len; r++) onehot.at(r, speaker) = 1.0;
  h = nn::linear(t, b, "spk_proj", t.concat_cols(h, t.leaf(std::move(onehot))));

  h = res_block(t, b, "adapt.r1", h);
  {
    NodeId n = nn::layer_norm(t, b, "adapt.attn.ln", h);
    NodeId q = nn::linear(t, b, "adapt.attn.wq", n);
    NodeId k = nn::linear(t, b, "adapt.attn.wk", n);
    NodeId v = nn::linear(t, b, "adapt.attn.wv", n);
    NodeId scores = t.scale(t.matmul(q, t.transpose(k)), 1.0 / std::sqrt(static_cast<double>(hidden)));
    NodeId rows = t.softmax_rows(scores);
    if (attention_rows) *attention_rows = rows;
    NodeId o = nn::linear(t, b, "adapt.attn.wo", t.matmul(rows, v));
    h = t.add(h, o);
  }
  h = res_block(t, b, "adapt.r2", h);
  h = res_block(t, b, "adapt.r3", h);

  h = res_block(t, b, "dec.r1", h);
  return nn::conv1d(t, b, "dec.out", h, 1, 1);
}

Tensor face_forward(const FaceModel& model, const Tensor& mfcc, int64_t speaker,
                    Tensor* attention) {
  Tape t;
  nn::Binding b(t, const_cast<nn::ParamSet&>(model.params));
  NodeId attn = -1;
  NodeId out = model.forward(t, b, mfcc, speaker, attention ? &attn : nullptr);
  if (attention) *attention = t.value(attn);
  return t.value(out);
}

NodeId face_loss_graph(Tape& t, NodeId pred, NodeId gt) {
  const Tensor& pv = t.value(pred);
  if (!pv.same_shape(t.value(gt)))
    fail("face_loss: length mismatch " + shape_str(pv.shape) + " vs " +
         shape_str(t.value(gt).shape));
  int64_t rows = pv.shape[0];
  NodeId loss = t.abs_mean(t.sub(pred, gt));
  if (rows >= 2) {
    NodeId vp = t.sub(t.slice_rows(pred, 1, rows), t.slice_rows(pred, 0, rows - 1));
    NodeId vg = t.sub(t.slice_rows(gt, 1, rows), t.slice_rows(gt, 0, rows - 1));
    loss = t.add(loss, t.abs_mean(t.sub(vp, vg)));
  }
  return loss;
}

double face_loss_value(const Tensor& pred, const Tensor& gt) {
  Tape t;
  return t.value(face_loss_graph(t, t.leaf(pred), t.leaf(gt))).item();
}

FaceModel train_face(const synth::Manifest& corpus, const RunConfig& cfg, std::ostream* log,
                     FaceTrainStats* stats) {
  auto train = corpus.split("train");
  if (train.empty()) fail("train_face: empty training split");

  Rng rng(cfg.seed + 0xFACE);
  FaceModel model = FaceModel::init(cfg, cfg.n_speakers, rng);

  struct ClipData {
    Tensor mfcc;
    Tensor face;
    int64_t speaker;
  };
  std::vector<ClipData> clips;
  for (const auto* e : train) {
    ClipData d;
    d.mfcc = audio::mfcc(audio::load_wav(corpus.path(*e, ".wav")));
    d.face = read_face(corpus.path(*e, ".face"));
    d.speaker = e->speaker;
    int64_t t_len = std::min(d.mfcc.shape[0], d.face.shape[0]);
    if (d.mfcc.shape[0] != t_len || d.face.shape[0] != t_len) {
      Tape t;
      d.mfcc = t.value(t.slice_rows(t.leaf(d.mfcc), 0, t_len));
      d.face = t.value(t.slice_rows(t.leaf(d.face), 0, t_len));
    }
    clips.push_back(std::move(d));
  }

  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  if (stats) *stats = FaceTrainStats{};

  for (int64_t epoch = 0; epoch < cfg.face_epochs; epoch++) {
    std::vector<size_t> order(clips.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = i;
    for (size_t i = order.size(); i > 1; i--) std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double epoch_loss = 0.0;
    for (size_t oi : order) {
      const ClipData& clip = clips[oi];
      Tape t;
      nn::Binding b(t, model.params);
      NodeId pred = model.forward(t, b, clip.mfcc, clip.speaker);
      NodeId loss = face_loss_graph(t, pred, t.leaf(clip.face));
      double v = t.value(loss).item();
      if (!std::isfinite(v)) fail("train_face: loss diverged (non-finite)");
      t.backward(loss);
      b.apply_adam(adam);
      epoch_loss += v;
    }
    if (stats) stats->epoch_loss.push_back(epoch_loss / static_cast<double>(clips.size()));
    if (log && (epoch % 10 == 0 || epoch == cfg.face_epochs - 1))
      *log << "face epoch " << epoch << " loss " << epoch_loss / static_cast<double>(clips.size())
           << "\n";
  }
  return model;
}

void save_face_checkpoint(const std::string& path, const FaceModel& model,
                          const std::string& config_echo, uint64_t minibody_hash) {
  std::vector<std::pair<std::string, Tensor>> extras;
  extras.emplace_back("meta.n_speakers", Tensor::scalar(static_cast<double>(model.n_speakers)));
  save_checkpoint(path, "FCCK", config_echo, minibody_hash, model.params, extras);
}

FaceModel load_face_checkpoint(const std::string& path, uint64_t expect_minibody_hash,
                               RunConfig* cfg_out) {
  Checkpoint ck = load_checkpoint(path, "FCCK");
  if (expect_minibody_hash != 0 && ck.minibody_hash != expect_minibody_hash)
    fail("checkpoint-hash-mismatch: '" + path + "' was trained against a different MiniBody");
  RunConfig cfg = config_from_echo(ck.config_echo);
  int64_t n_speakers = 0;
  for (const auto& [name, tensor] : ck.tensors)
    if (name == "meta.n_speakers") n_speakers = static_cast<int64_t>(tensor.data[0]);
  if (n_speakers == 0) fail("'" + path + "': missing face metadata");
  Rng rng(cfg.seed + 0xFACE);
  FaceModel model = FaceModel::init(cfg, n_speakers, rng);
  restore_params(ck, model.params);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

}  // namespace motionact::face
