#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motionact/nn.hpp"
#include "motionact/tensor.hpp"

namespace motionact {

// FNV-1a 64-bit; used for content hashes of artifacts and tables.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64_append(uint64_t h, const void* data, size_t len);
uint64_t fnv1a64_file(const std::string& path);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

// Little-endian byte stream helpers. Every artifact format below ends with a
// "CFGE" trailer holding the effective config echo and the build tag.
class ByteWriter {
 public:
  void magic(const char m[4]);
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f64(double v);
  void f64s(const std::vector<double>& v);
  void raw(const void* data, size_t len);
  void str(const std::string& s);  // u64 length + raw bytes
  void trailer(const std::string& config_echo);
  void save(const std::string& path) const;
  const std::vector<uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<uint8_t> bytes, std::string origin);
  void expect_magic(const char m[4]);
  uint32_t u32();
  uint64_t u64();
  double f64();
  void f64s(double* out, size_t n);
  std::string str();
  bool at_end() const { return pos_ == buf_.size(); }
  size_t remaining() const { return buf_.size() - pos_; }
  // Reads the trailing CFGE block if present; empty strings otherwise.
  void trailer(std::string* config_echo, std::string* build_tag);

 private:
  void need(size_t n);
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
  std::string origin_;
};

// --- artifact formats -------------------------------------------------------

// "MOTN": u32 T, f64 fps, u32 n_points, T*(n_points*3) f64, trailer
void write_motn(const std::string& path, const Tensor& frames, double fps,
                const std::string& echo);
Tensor read_motn(const std::string& path, double* fps);

// "POSE": u32 T, u32 dims, payload, trailer
void write_pose(const std::string& path, const Tensor& params, const std::string& echo);
Tensor read_pose(const std::string& path);

// "FACE": u32 T, u32 dims, payload, trailer
void write_face(const std::string& path, const Tensor& track, const std::string& echo);
Tensor read_face(const std::string& path);

// "MFCC": u32 T, u32 n_coeffs, payload, trailer
void write_mfcc_dump(const std::string& path, const Tensor& m, const std::string& echo);
Tensor read_mfcc_dump(const std::string& path);

// "TOKS": u32 rows, u32 heads, rows*heads u32, trailer
void write_toks(const std::string& path, const std::vector<std::vector<int64_t>>& tokens,
                const std::string& echo);
std::vector<std::vector<int64_t>> read_toks(const std::string& path);

// --- checkpoints ------------------------------------------------------------

struct Checkpoint {
  uint32_t version = 1;
  std::string build_tag;
  std::string config_echo;
  uint64_t minibody_hash = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const char magic[4], const std::string& config_echo,
                     uint64_t minibody_hash, const nn::ParamSet& params,
                     const std::vector<std::pair<std::string, Tensor>>& extras = {});
Checkpoint load_checkpoint(const std::string& path, const char magic[4]);
// Copies checkpoint tensors into an already-constructed ParamSet; names and
// shapes must match exactly.
void restore_params(const Checkpoint& ck, nn::ParamSet& params);

}  // namespace motionact
