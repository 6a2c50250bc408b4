#include "motionact/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "motionact/tensor.hpp"

namespace motionact {

namespace {

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int64_t r = 0;
  try {
    r = std::stoll(v, &pos);
  } catch (...) {
    fail("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  if (pos != v.size()) fail("config: key '" + key + "' expects an integer, got '" + v + "'");
  return r;
}

double parse_f64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double r = 0;
  try {
    r = std::stod(v, &pos);
  } catch (...) {
    fail("config: key '" + key + "' expects a number, got '" + v + "'");
  }
  if (pos != v.size()) fail("config: key '" + key + "' expects a number, got '" + v + "'");
  return r;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail("config: key '" + key + "' expects true/false, got '" + v + "'");
  return false;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> m;
    auto u64 = [&m](const std::string& k, uint64_t RunConfig::*p) {
      m[k] = {[p](const RunConfig& c) { return std::to_string(c.*p); },
              [p, k](RunConfig& c, const std::string& v) {
                c.*p = static_cast<uint64_t>(parse_i64(k, v));
              }};
    };
    auto i64 = [&m](const std::string& k, int64_t RunConfig::*p) {
      m[k] = {[p](const RunConfig& c) { return std::to_string(c.*p); },
              [p, k](RunConfig& c, const std::string& v) { c.*p = parse_i64(k, v); }};
    };
    auto f64 = [&m](const std::string& k, double RunConfig::*p) {
      m[k] = {[p](const RunConfig& c) { return fmt_double(c.*p); },
              [p, k](RunConfig& c, const std::string& v) { c.*p = parse_f64(k, v); }};
    };
    auto b = [&m](const std::string& k, bool RunConfig::*p) {
      m[k] = {[p](const RunConfig& c) { return std::string(c.*p ? "true" : "false"); },
              [p, k](RunConfig& c, const std::string& v) { c.*p = parse_bool(k, v); }};
    };
    auto s = [&m](const std::string& k, std::string RunConfig::*p) {
      m[k] = {[p](const RunConfig& c) { return c.*p; },
              [p](RunConfig& c, const std::string& v) { c.*p = v; }};
    };

    u64("seed", &RunConfig::seed);
    f64("fps", &RunConfig::fps);
    f64("alpha1", &RunConfig::alpha1);
    f64("alpha2", &RunConfig::alpha2);
    f64("beta", &RunConfig::beta);
    f64("tau", &RunConfig::tau);
    f64("lambda_cm", &RunConfig::lambda_cm);
    i64("n_codebooks", &RunConfig::n_codebooks);
    i64("codebook_size", &RunConfig::codebook_size);
    i64("w_m", &RunConfig::w_m);
    f64("lr", &RunConfig::lr);
    f64("adam_beta1", &RunConfig::adam_beta1);
    f64("adam_beta2", &RunConfig::adam_beta2);
    s("representation", &RunConfig::representation);
    i64("enc_hidden_hand", &RunConfig::enc_hidden_hand);
    i64("enc_hidden_body", &RunConfig::enc_hidden_body);
    i64("dec_hidden", &RunConfig::dec_hidden);
    i64("gp_hidden", &RunConfig::gp_hidden);
    i64("vq_epochs", &RunConfig::vq_epochs);
    i64("crop_frames", &RunConfig::crop_frames);
    i64("batch_clips", &RunConfig::batch_clips);
    i64("tr_width", &RunConfig::tr_width);
    i64("tr_blocks", &RunConfig::tr_blocks);
    i64("tr_embed", &RunConfig::tr_embed);
    i64("tr_epochs", &RunConfig::tr_epochs);
    i64("bank_capacity", &RunConfig::bank_capacity);
    b("contrastive", &RunConfig::contrastive);
    b("negatives_exclude_same_speaker", &RunConfig::negatives_exclude_same_speaker);
    i64("face_hidden", &RunConfig::face_hidden);
    i64("face_epochs", &RunConfig::face_epochs);
    f64("sigma_beat", &RunConfig::sigma_beat);
    f64("fsr_height", &RunConfig::fsr_height);
    f64("fsr_slide", &RunConfig::fsr_slide);
    i64("n_speakers", &RunConfig::n_speakers);
    i64("clips_per_speaker", &RunConfig::clips_per_speaker);
    f64("clip_seconds", &RunConfig::clip_seconds);
    f64("beat_corr", &RunConfig::beat_corr);
    return m;
  }();
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) fail("config: unknown key '" + key + "'");
  it->second.set(cfg, value);
}

std::string config_get(const RunConfig& cfg, const std::string& key) {
  auto it = fields().find(key);
  if (it == fields().end()) fail("config: unknown key '" + key + "'");
  return it->second.get(cfg);
}

std::string config_echo(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, f] : fields()) os << k << "=" << f.get(cfg) << "\n";
  return os.str();
}

RunConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open '" + path + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail("config: '" + path + "' line " + std::to_string(lineno) + ": expected key = value");
    config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig config_from_echo(const std::string& echo) {
  RunConfig cfg;
  std::istringstream in(echo);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail("config echo: malformed line '" + line + "'");
    config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void config_apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_eq_value) {
  for (const auto& kv : key_eq_value) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) fail("config: override '" + kv + "' must be key=value");
    config_set(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

void config_apply_env(RunConfig& cfg) {
  if (const char* s = std::getenv("MOTIONACT_SEED")) config_set(cfg, "seed", s);
}

void config_validate(const RunConfig& cfg) {
  if (cfg.n_codebooks < 1 || cfg.n_codebooks > 3) fail("config: n_codebooks must be 1, 2, or 3");
  if (cfg.codebook_size < 2) fail("config: codebook_size must be >= 2");
  if (cfg.w_m < 1) fail("config: w_m must be >= 1");
  if (cfg.tau <= 0.0) fail("config: tau must be positive");
  if (cfg.fps <= 0.0) fail("config: fps must be positive");
  if (cfg.bank_capacity < 1) fail("config: bank_capacity must be >= 1");
  if (cfg.representation != "hybrid" && cfg.representation != "aa3d" &&
      cfg.representation != "rot6d")
    fail("config: representation must be hybrid, aa3d, or rot6d");
  if (cfg.n_speakers < 1) fail("config: n_speakers must be >= 1");
  if (cfg.clip_seconds < 1.0) fail("config: clip_seconds must be >= 1");
  if (cfg.beat_corr < 0.0 || cfg.beat_corr > 1.0) fail("config: beat_corr must be in [0,1]");
}

}  // namespace motionact
