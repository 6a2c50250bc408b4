#include "motionact/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace motionact {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); i++) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

void fail(const std::string& msg) { throw std::runtime_error(msg); }

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)) {
  int64_t n = shape_numel(shape);
  if (n < 0) fail("tensor: negative dimension in " + shape_str(shape));
  data.assign(static_cast<size_t>(n), fill);
}

Tensor Tensor::from(Shape s, std::vector<double> values) {
  Tensor t;
  t.shape = std::move(s);
  if (shape_numel(t.shape) != static_cast<int64_t>(values.size()))
    fail("tensor: " + shape_str(t.shape) + " cannot hold " + std::to_string(values.size()) +
         " values");
  t.data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

int64_t Tensor::cols() const {
  if (shape.size() < 2) return shape.empty() ? 0 : 1;
  int64_t c = 1;
  for (size_t i = 1; i < shape.size(); i++) c *= shape[i];
  return c;
}

double& Tensor::at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
double Tensor::at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

double Tensor::item() const {
  if (numel() != 1) fail("item: tensor " + shape_str(shape) + " is not a scalar");
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape s) const {
  if (shape_numel(s) != numel())
    fail("reshape: " + shape_str(shape) + " -> " + shape_str(s) + " changes element count");
  Tensor t;
  t.shape = std::move(s);
  t.data = data;
  return t;
}

double Rng::normal() {
  // Box-Muller; one fresh pair of uniforms per draw keeps the stream simple.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t Rng::uniform_int(uint64_t n) {
  if (n == 0) fail("uniform_int: n must be positive");
  // Rejection sampling for an unbiased draw.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = gen_();
  while (x >= limit) x = gen_();
  return x % n;
}

Tensor Rng::normal_tensor(const Shape& s, double stddev) {
  Tensor t(s);
  for (auto& v : t.data) v = normal() * stddev;
  return t;
}

Tensor Rng::uniform_tensor(const Shape& s, double a, double b) {
  Tensor t(s);
  for (auto& v : t.data) v = uniform(a, b);
  return t;
}

uint64_t Rng::derive(uint64_t salt) {
  // splitmix64 finalizer over (next raw, salt)
  uint64_t z = raw() + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void matmul_raw(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
                bool accumulate, bool transpose_a, bool transpose_b) {
  cblas_dgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
              transpose_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), 1.0, a, static_cast<int>(transpose_a ? m : k), b,
              static_cast<int>(transpose_b ? k : n), accumulate ? 1.0 : 0.0, c,
              static_cast<int>(n));
}

Tensor matmul_val(const Tensor& a, const Tensor& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
    fail("matmul: incompatible shapes " + shape_str(a.shape) + " x " + shape_str(b.shape));
  Tensor c({a.shape[0], b.shape[1]});
  matmul_raw(a.data.data(), b.data.data(), c.data.data(), a.shape[0], a.shape[1], b.shape[1]);
  return c;
}

Tensor transpose_val(const Tensor& a) {
  if (a.shape.size() != 2) fail("transpose: tensor " + shape_str(a.shape) + " is not 2-D");
  Tensor t({a.shape[1], a.shape[0]});
  for (int64_t r = 0; r < a.shape[0]; r++)
    for (int64_t c = 0; c < a.shape[1]; c++) t.at(c, r) = a.at(r, c);
  return t;
}

}  // namespace motionact
