#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace motionact {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

[[noreturn]] void fail(const std::string& msg);

// Dense row-major f64 tensor. Everything in this project is 64-bit; clip
// lengths and feature widths are small enough that precision beats speed.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  static Tensor from(Shape s, std::vector<double> values);
  static Tensor scalar(double v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
  int64_t cols() const;

  double& at(int64_t r, int64_t c);
  double at(int64_t r, int64_t c) const;
  double item() const;  // numel()==1

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  Tensor reshaped(Shape s) const;
};

// Deterministic RNG. mt19937_64 has a standard-defined bit stream, and the
// uniform/normal transforms below are hand-rolled so streams do not depend
// on the C++ library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();
  uint64_t uniform_int(uint64_t n);  // [0, n)

  Tensor normal_tensor(const Shape& s, double stddev = 1.0);
  Tensor uniform_tensor(const Shape& s, double a, double b);

  // Independent child stream; lets clip generation run per-clip seeds.
  uint64_t derive(uint64_t salt);

 private:
  std::mt19937_64 gen_;
};

// C(m,n) = op(A)(m,k) * op(B)(k,n), optionally accumulating into C.
// Backed by cblas_dgemm.
void matmul_raw(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
                bool accumulate = false, bool transpose_a = false, bool transpose_b = false);

Tensor matmul_val(const Tensor& a, const Tensor& b);
Tensor transpose_val(const Tensor& a);

}  // namespace motionact
