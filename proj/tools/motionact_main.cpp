#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "motionact/config.hpp"
#include "motionact/facegen.hpp"
#include "motionact/io.hpp"
#include "motionact/pipeline.hpp"
#include "motionact/synthdata.hpp"
#include "motionact/translator.hpp"
#include "motionact/version.hpp"
#include "motionact/vqvae.hpp"

namespace {

using namespace motionact;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value configuration file");
  cmd->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
}

// defaults -> file -> MOTIONACT_SEED -> explicit --set overrides
RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = config_from_file(args.config_path);
  config_apply_env(cfg);
  config_apply_overrides(cfg, args.overrides);
  config_validate(cfg);
  return cfg;
}

void write_echo_file(const std::string& dir, const RunConfig& cfg) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/config.echo.txt");
  out << config_echo(cfg);
}

std::string error_kind(const std::string& msg) {
  if (msg.find("checkpoint-hash-mismatch") != std::string::npos) return "checkpoint-hash-mismatch";
  if (msg.find("config") != std::string::npos) return "config-invalid";
  if (msg.find("cannot open") != std::string::npos || msg.find("missing-file") != std::string::npos)
    return "missing-file";
  return "runtime";
}

int run(int argc, char** argv) {
  CLI::App app{"motionact: speech to whole-body motion at desk scale"};
  app.require_subcommand(1);

  // --- synth-data ---
  auto* synth_cmd = app.add_subcommand("synth-data", "generate a synthetic paired corpus");
  CommonArgs synth_args;
  std::string synth_out;
  add_common(synth_cmd, synth_args);
  synth_cmd->add_option("--out", synth_out, "corpus output directory")->required();

  // --- train-vqvae ---
  auto* vq_cmd = app.add_subcommand("train-vqvae", "stage 1: motion codebook training");
  CommonArgs vq_args;
  std::string vq_corpus, vq_out;
  add_common(vq_cmd, vq_args);
  vq_cmd->add_option("--corpus", vq_corpus, "corpus directory")->required();
  vq_cmd->add_option("--out", vq_out, "checkpoint path (.vqck)")->required();

  // --- train-translator ---
  auto* tr_cmd = app.add_subcommand("train-translator", "stage 2: audio to motion tokens");
  CommonArgs tr_args;
  std::string tr_corpus, tr_vq, tr_out;
  add_common(tr_cmd, tr_args);
  tr_cmd->add_option("--corpus", tr_corpus, "corpus directory")->required();
  tr_cmd->add_option("--vq", tr_vq, "frozen stage-1 checkpoint")->required();
  tr_cmd->add_option("--out", tr_out, "checkpoint path (.trck)")->required();

  // --- train-face ---
  auto* face_cmd = app.add_subcommand("train-face", "deterministic face regressor");
  CommonArgs face_args;
  std::string face_corpus, face_out;
  add_common(face_cmd, face_args);
  face_cmd->add_option("--corpus", face_corpus, "corpus directory")->required();
  face_cmd->add_option("--out", face_out, "checkpoint path (.fcck)")->required();

  // --- generate ---
  auto* gen_cmd = app.add_subcommand("generate", "audio in, motion samples out");
  CommonArgs gen_args;
  std::string gen_audio, gen_vq, gen_tr, gen_face, gen_body, gen_out;
  int64_t gen_speaker = 0, gen_samples = 2;
  add_common(gen_cmd, gen_args);
  gen_cmd->add_option("--audio", gen_audio, "input WAV")->required();
  gen_cmd->add_option("--speaker", gen_speaker, "speaker id")->required();
  gen_cmd->add_option("--vq", gen_vq)->required();
  gen_cmd->add_option("--tr", gen_tr)->required();
  gen_cmd->add_option("--face", gen_face)->required();
  gen_cmd->add_option("--minibody", gen_body, "MiniBody file from the corpus")->required();
  gen_cmd->add_option("--out", gen_out, "output directory")->required();
  gen_cmd->add_option("--n-samples", gen_samples, "samples per audio");

  // --- evaluate ---
  auto* eval_cmd = app.add_subcommand("evaluate", "metric report over a corpus split");
  CommonArgs eval_args;
  std::string eval_corpus, eval_vq, eval_tr, eval_face, eval_out, eval_split = "test";
  std::string eval_generated;
  bool eval_reference = false;
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--corpus", eval_corpus)->required();
  eval_cmd->add_option("--split", eval_split, "train | val | test");
  eval_cmd->add_option("--vq", eval_vq);
  eval_cmd->add_option("--tr", eval_tr);
  eval_cmd->add_option("--face", eval_face);
  eval_cmd->add_option("--generated", eval_generated, "directory of pre-generated samples");
  eval_cmd->add_flag("--reference-as-generated", eval_reference,
                     "score the reference corpus against itself");
  eval_cmd->add_option("--out", eval_out, "report output directory")->required();

  // --- inspect-codebook ---
  auto* ins_cmd = app.add_subcommand("inspect-codebook", "usage histogram and perplexity");
  std::string ins_vq;
  ins_cmd->add_option("--vq", ins_vq)->required();

  CLI11_PARSE(app, argc, argv);

  if (synth_cmd->parsed()) {
    RunConfig cfg = resolve_config(synth_args);
    synth::gen_dataset(cfg, synth_out);
    std::cout << "corpus written to " << synth_out << " ("
              << cfg.n_speakers * cfg.clips_per_speaker << " clips)\n";
    return 0;
  }

  if (vq_cmd->parsed()) {
    RunConfig cfg = resolve_config(vq_args);
    synth::Manifest corpus = synth::load_manifest(vq_corpus);
    body::KinematicTree tree = body::load_minibody(vq_corpus + "/minibody.mbdy");
    vq::VqTrainStats stats;
    vq::VqModel model = vq::train_vqvae(corpus, tree, cfg, &std::cout, &stats);
    vq::save_vq_checkpoint(vq_out, model, stats, config_echo(cfg), tree.content_hash());
    write_echo_file(std::filesystem::path(vq_out).parent_path().string(), cfg);
    std::cout << "checkpoint written to " << vq_out << "\n";
    return 0;
  }

  if (tr_cmd->parsed()) {
    RunConfig cfg = resolve_config(tr_args);
    synth::Manifest corpus = synth::load_manifest(tr_corpus);
    body::KinematicTree tree = body::load_minibody(tr_corpus + "/minibody.mbdy");
    vq::VqModel vq_model = vq::load_vq_checkpoint(tr_vq, tree, tree.content_hash());
    translator::TranslatorTrainStats stats;
    translator::TranslatorModel model =
        translator::train_translator(corpus, vq_model, tree, cfg, &std::cout, &stats);
    translator::save_translator_checkpoint(tr_out, model, config_echo(cfg), tree.content_hash());
    write_echo_file(std::filesystem::path(tr_out).parent_path().string(), cfg);
    std::cout << "checkpoint written to " << tr_out << "\n";
    return 0;
  }

  if (face_cmd->parsed()) {
    RunConfig cfg = resolve_config(face_args);
    synth::Manifest corpus = synth::load_manifest(face_corpus);
    body::KinematicTree tree = body::load_minibody(face_corpus + "/minibody.mbdy");
    face::FaceTrainStats stats;
    face::FaceModel model = face::train_face(corpus, cfg, &std::cout, &stats);
    face::save_face_checkpoint(face_out, model, config_echo(cfg), tree.content_hash());
    write_echo_file(std::filesystem::path(face_out).parent_path().string(), cfg);
    std::cout << "checkpoint written to " << face_out << "\n";
    return 0;
  }

  if (gen_cmd->parsed()) {
    RunConfig cfg = resolve_config(gen_args);
    body::KinematicTree tree = body::load_minibody(gen_body);
    vq::VqModel vq_model = vq::load_vq_checkpoint(gen_vq, tree, tree.content_hash());
    translator::TranslatorModel tr_model =
        translator::load_translator_checkpoint(gen_tr, tree.content_hash());
    face::FaceModel face_model = face::load_face_checkpoint(gen_face, tree.content_hash());
    audio::AudioClip clip = audio::load_wav(gen_audio);

    pipeline::Generated g = pipeline::generate_for_audio(vq_model, tr_model, face_model, tree,
                                                         clip, gen_speaker, cfg.seed, gen_samples);
    std::filesystem::create_directories(gen_out);
    std::string echo = config_echo(cfg);
    for (size_t i = 0; i < g.motions.size(); i++) {
      std::string stem = gen_out + "/sample_" + std::to_string(i);
      write_motn(stem + ".motn", g.motions[i], cfg.fps, echo);
      write_pose(stem + ".pose", g.poses[i], echo);
      write_toks(stem + ".toks", g.tokens[i], echo);
    }
    write_face(gen_out + "/face.face", g.face, echo);
    write_echo_file(gen_out, cfg);
    std::cout << "wrote " << g.motions.size() << " samples to " << gen_out << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    RunConfig cfg = resolve_config(eval_args);
    synth::Manifest corpus = synth::load_manifest(eval_corpus);
    body::KinematicTree tree = body::load_minibody(eval_corpus + "/minibody.mbdy");

    pipeline::EvalOptions opt;
    opt.split = eval_split;
    opt.seed = cfg.seed;
    opt.generated_dir = eval_generated;
    opt.reference_as_generated = eval_reference;

    vq::VqModel vq_model;
    translator::TranslatorModel tr_model;
    face::FaceModel face_model;
    bool have_models = !eval_vq.empty();
    if (have_models) {
      vq_model = vq::load_vq_checkpoint(eval_vq, tree, tree.content_hash());
      tr_model = translator::load_translator_checkpoint(eval_tr, tree.content_hash());
      face_model = face::load_face_checkpoint(eval_face, tree.content_hash());
    } else if (eval_generated.empty() && !eval_reference) {
      fail("config-invalid: evaluate needs --vq/--tr/--face, --generated, or --reference-as-generated");
    }

    metrics::MetricReport report = pipeline::evaluate_split(
        corpus, tree, have_models ? &vq_model : nullptr, have_models ? &tr_model : nullptr,
        have_models ? &face_model : nullptr, cfg, opt, &std::cout);

    std::filesystem::create_directories(eval_out);
    std::string echo = config_echo(cfg);
    metrics::write_report_text(eval_out + "/report.txt", report, echo);
    metrics::write_report_binary(eval_out + "/report.mrpt", report, echo);
    write_echo_file(eval_out, cfg);
    std::cout << metrics::format_report_table(report);
    return 0;
  }

  if (ins_cmd->parsed()) {
    body::KinematicTree tree = body::build_minibody();
    vq::VqTrainStats stats;
    RunConfig ck_cfg;
    vq::VqModel model = vq::load_vq_checkpoint(ins_vq, tree, 0, &stats, &ck_cfg);
    const char* names3[] = {"left hand", "right hand", "body"};
    for (int64_t p = 0; p < model.layout.n_parts; p++) {
      const Tensor& cb = model.codebook(p);
      std::cout << "codebook " << p;
      if (model.layout.n_parts == 3) std::cout << " (" << names3[p] << ")";
      std::cout << ": " << cb.shape[0] << " codes x " << cb.shape[1] << " dims";
      if (stats.usage_counts.numel() > 0) {
        int64_t used = 0;
        double total = 0.0, entropy = 0.0;
        for (int64_t i = 0; i < cb.shape[0]; i++) {
          double c = stats.usage_counts.at(p, i);
          if (c > 0.0) used++;
          total += c;
        }
        for (int64_t i = 0; i < cb.shape[0]; i++) {
          double c = stats.usage_counts.at(p, i);
          if (c <= 0.0) continue;
          double prob = c / total;
          entropy -= prob * std::log(prob);
        }
        std::cout << ", used " << used << "/" << cb.shape[0] << ", perplexity "
                  << std::exp(entropy) << "\n";
        // coarse usage histogram over code indices
        int64_t bins = 32, per = std::max<int64_t>(1, cb.shape[0] / bins);
        std::cout << "  usage ";
        for (int64_t bin = 0; bin * per < cb.shape[0]; bin++) {
          double acc = 0.0;
          for (int64_t i = bin * per; i < std::min((bin + 1) * per, cb.shape[0]); i++)
            acc += stats.usage_counts.at(p, i);
          double frac = total > 0 ? acc / total : 0.0;
          const char* glyphs = " .:-=+*#%@";
          int g = std::min(9, static_cast<int>(frac * static_cast<double>(bins) * 2.5));
          std::cout << glyphs[g];
        }
        std::cout << "\n";
      } else {
        std::cout << " (no usage statistics in checkpoint)\n";
      }
    }
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << error_kind(msg) << ": " << msg << "\n";
    return 1;
  }
}
