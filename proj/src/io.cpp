#include "motionact/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "motionact/version.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact formats are little-endian; big-endian hosts are unsupported");

namespace motionact {

uint64_t fnv1a64(const void* data, size_t len) {
  return fnv1a64_append(0xcbf29ce484222325ULL, data, len);
}

uint64_t fnv1a64_append(uint64_t h, const void* data, size_t len) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < len; i++) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path + "'");
  in.seekg(0, std::ios::end);
  std::vector<uint8_t> bytes(static_cast<size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) fail("short read from '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail("short write to '" + path + "'");
}

void ByteWriter::magic(const char m[4]) { buf_.insert(buf_.end(), m, m + 4); }

void ByteWriter::u16(uint16_t v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  buf_.insert(buf_.end(), p, p + 2);
}

void ByteWriter::u32(uint32_t v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  buf_.insert(buf_.end(), p, p + 4);
}

void ByteWriter::u64(uint64_t v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  buf_.insert(buf_.end(), p, p + 8);
}

void ByteWriter::f64(double v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  buf_.insert(buf_.end(), p, p + 8);
}

void ByteWriter::f64s(const std::vector<double>& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(v.data());
  buf_.insert(buf_.end(), p, p + v.size() * 8);
}

void ByteWriter::raw(const void* data, size_t len) {
  const auto* p = static_cast<const uint8_t*>(data);
  buf_.insert(buf_.end(), p, p + len);
}

void ByteWriter::str(const std::string& s) {
  u64(s.size());
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::trailer(const std::string& config_echo) {
  magic("CFGE");
  str(config_echo);
  str(kBuildTag);
}

void ByteWriter::save(const std::string& path) const { write_file_bytes(path, buf_); }

ByteReader::ByteReader(std::vector<uint8_t> bytes, std::string origin)
    : buf_(std::move(bytes)), origin_(std::move(origin)) {}

void ByteReader::need(size_t n) {
  if (pos_ + n > buf_.size()) fail("'" + origin_ + "': truncated file");
}

void ByteReader::expect_magic(const char m[4]) {
  need(4);
  if (std::memcmp(buf_.data() + pos_, m, 4) != 0)
    fail("'" + origin_ + "': bad magic, expected " + std::string(m, 4));
  pos_ += 4;
}

uint32_t ByteReader::u32() {
  need(4);
  uint32_t v;
  std::memcpy(&v, buf_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::u64() {
  need(8);
  uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void ByteReader::f64s(double* out, size_t n) {
  need(n * 8);
  std::memcpy(out, buf_.data() + pos_, n * 8);
  pos_ += n * 8;
}

std::string ByteReader::str() {
  uint64_t n = u64();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::trailer(std::string* config_echo, std::string* build_tag) {
  if (config_echo) config_echo->clear();
  if (build_tag) build_tag->clear();
  if (remaining() < 4 || std::memcmp(buf_.data() + pos_, "CFGE", 4) != 0) return;
  pos_ += 4;
  std::string echo = str();
  std::string tag = str();
  if (config_echo) *config_echo = echo;
  if (build_tag) *build_tag = tag;
}

// --- artifact formats -------------------------------------------------------

namespace {

void check_2d_file(const char* what, const Tensor& m) {
  if (m.shape.size() != 2 || m.shape[0] < 1)
    fail(std::string(what) + ": expected a [T,dims] tensor, got " + shape_str(m.shape));
}

}  // namespace

void write_motn(const std::string& path, const Tensor& frames, double fps,
                const std::string& echo) {
  check_2d_file("write_motn", frames);
  if (frames.shape[1] % 3 != 0) fail("write_motn: columns not a multiple of 3");
  ByteWriter w;
  w.magic("MOTN");
  w.u32(static_cast<uint32_t>(frames.shape[0]));
  w.f64(fps);
  w.u32(static_cast<uint32_t>(frames.shape[1] / 3));
  w.f64s(frames.data);
  w.trailer(echo);
  w.save(path);
}

Tensor read_motn(const std::string& path, double* fps) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("MOTN");
  int64_t t = r.u32();
  double f = r.f64();
  int64_t npts = r.u32();
  if (t < 1 || npts < 1 || f <= 0.0) fail("'" + path + "': bad MOTN header");
  Tensor frames({t, npts * 3});
  r.f64s(frames.data.data(), frames.data.size());
  if (fps) *fps = f;
  return frames;
}

void write_pose(const std::string& path, const Tensor& params, const std::string& echo) {
  check_2d_file("write_pose", params);
  ByteWriter w;
  w.magic("POSE");
  w.u32(static_cast<uint32_t>(params.shape[0]));
  w.u32(static_cast<uint32_t>(params.shape[1]));
  w.f64s(params.data);
  w.trailer(echo);
  w.save(path);
}

Tensor read_pose(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("POSE");
  int64_t t = r.u32();
  int64_t d = r.u32();
  if (t < 1 || d < 1) fail("'" + path + "': bad POSE header");
  Tensor params({t, d});
  r.f64s(params.data.data(), params.data.size());
  return params;
}

void write_face(const std::string& path, const Tensor& track, const std::string& echo) {
  check_2d_file("write_face", track);
  ByteWriter w;
  w.magic("FACE");
  w.u32(static_cast<uint32_t>(track.shape[0]));
  w.u32(static_cast<uint32_t>(track.shape[1]));
  w.f64s(track.data);
  w.trailer(echo);
  w.save(path);
}

Tensor read_face(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("FACE");
  int64_t t = r.u32();
  int64_t d = r.u32();
  if (t < 1 || d < 1) fail("'" + path + "': bad FACE header");
  Tensor track({t, d});
  r.f64s(track.data.data(), track.data.size());
  return track;
}

void write_mfcc_dump(const std::string& path, const Tensor& m, const std::string& echo) {
  check_2d_file("write_mfcc_dump", m);
  ByteWriter w;
  w.magic("MFCC");
  w.u32(static_cast<uint32_t>(m.shape[0]));
  w.u32(static_cast<uint32_t>(m.shape[1]));
  w.f64s(m.data);
  w.trailer(echo);
  w.save(path);
}

Tensor read_mfcc_dump(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("MFCC");
  int64_t t = r.u32();
  int64_t d = r.u32();
  if (t < 1 || d < 1) fail("'" + path + "': bad MFCC header");
  Tensor m({t, d});
  r.f64s(m.data.data(), m.data.size());
  return m;
}

void write_toks(const std::string& path, const std::vector<std::vector<int64_t>>& tokens,
                const std::string& echo) {
  if (tokens.empty()) fail("write_toks: empty token sequence");
  ByteWriter w;
  w.magic("TOKS");
  w.u32(static_cast<uint32_t>(tokens.size()));
  w.u32(static_cast<uint32_t>(tokens[0].size()));
  for (const auto& row : tokens) {
    if (row.size() != tokens[0].size()) fail("write_toks: ragged token rows");
    for (int64_t v : row) w.u32(static_cast<uint32_t>(v));
  }
  w.trailer(echo);
  w.save(path);
}

std::vector<std::vector<int64_t>> read_toks(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("TOKS");
  uint32_t rows = r.u32();
  uint32_t heads = r.u32();
  std::vector<std::vector<int64_t>> tokens(rows, std::vector<int64_t>(heads));
  for (auto& row : tokens)
    for (auto& v : row) v = r.u32();
  return tokens;
}

// --- checkpoints ------------------------------------------------------------

void save_checkpoint(const std::string& path, const char magic[4], const std::string& config_echo,
                     uint64_t minibody_hash, const nn::ParamSet& params,
                     const std::vector<std::pair<std::string, Tensor>>& extras) {
  ByteWriter w;
  w.magic(magic);
  w.u32(1);  // version
  w.str(kBuildTag);
  w.str(config_echo);
  w.u64(minibody_hash);
  w.u32(static_cast<uint32_t>(params.entries().size() + extras.size()));
  auto put = [&w](const std::string& name, const Tensor& t) {
    w.str(name);
    w.u32(static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) w.u64(static_cast<uint64_t>(d));
    w.f64s(t.data);
  };
  for (const auto& p : params.entries()) put(p.name, p.value);
  for (const auto& [name, t] : extras) put(name, t);
  w.save(path);
}

Checkpoint load_checkpoint(const std::string& path, const char magic[4]) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic(magic);
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != 1) fail("'" + path + "': unsupported checkpoint version");
  ck.build_tag = r.str();
  ck.config_echo = r.str();
  ck.minibody_hash = r.u64();
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; i++) {
    std::string name = r.str();
    uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<int64_t>(r.u64());
    Tensor t(shape);
    r.f64s(t.data.data(), t.data.size());
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void restore_params(const Checkpoint& ck, nn::ParamSet& params) {
  for (auto& p : params.entries()) {
    const Tensor* found = nullptr;
    for (const auto& [name, t] : ck.tensors)
      if (name == p.name) {
        found = &t;
        break;
      }
    if (!found) fail("checkpoint: missing tensor '" + p.name + "'");
    if (!found->same_shape(p.value))
      fail("checkpoint: tensor '" + p.name + "' has shape " + shape_str(found->shape) +
           ", expected " + shape_str(p.value.shape));
    p.value = *found;
  }
}

}  // namespace motionact
