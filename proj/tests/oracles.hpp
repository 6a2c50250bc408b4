#pragma once

// Independent oracles used by the test suites. Everything here is written
// against the plain math, not against the library's own forward/backward
// paths, so a test that compares the two is a real cross-check.

#include <cmath>
#include <functional>
#include <vector>

#include "motionact/tensor.hpp"

namespace oracles {

using motionact::Tensor;

// Central finite differences of a scalar function of one tensor, h = 1e-5.
inline Tensor finite_diff(const std::function<double(const Tensor&)>& f, Tensor x,
                          double h = 1e-5) {
  Tensor g(x.shape);
  for (int64_t i = 0; i < x.numel(); i++) {
    double keep = x.data[i];
    x.data[i] = keep + h;
    double fp = f(x);
    x.data[i] = keep - h;
    double fm = f(x);
    x.data[i] = keep;
    g.data[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(const Tensor& got, const Tensor& want, double floor = 1e-6) {
  double worst = 0.0;
  for (int64_t i = 0; i < got.numel(); i++) {
    double denom = std::max(std::fabs(want.data[i]), floor);
    worst = std::max(worst, std::fabs(got.data[i] - want.data[i]) / denom);
  }
  return worst;
}

inline double max_abs_err(const Tensor& got, const Tensor& want) {
  double worst = 0.0;
  for (int64_t i = 0; i < got.numel(); i++)
    worst = std::max(worst, std::fabs(got.data[i] - want.data[i]));
  return worst;
}

// --- small dense helpers (row-major n x n) ---

inline std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                                   int n) {
  std::vector<double> c(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; i++)
    for (int k = 0; k < n; k++)
      for (int j = 0; j < n; j++) c[i * n + j] += a[i * n + k] * b[k * n + j];
  return c;
}

// Gauss-Jordan inverse; fine for the tiny matrices the oracles handle.
inline std::vector<double> mat_inv(std::vector<double> a, int n) {
  std::vector<double> inv(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; i++) inv[i * n + i] = 1.0;
  for (int col = 0; col < n; col++) {
    int piv = col;
    for (int r = col + 1; r < n; r++)
      if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
    for (int j = 0; j < n; j++) {
      std::swap(a[piv * n + j], a[col * n + j]);
      std::swap(inv[piv * n + j], inv[col * n + j]);
    }
    double d = a[col * n + col];
    for (int j = 0; j < n; j++) {
      a[col * n + j] /= d;
      inv[col * n + j] /= d;
    }
    for (int r = 0; r < n; r++) {
      if (r == col) continue;
      double f = a[r * n + col];
      for (int j = 0; j < n; j++) {
        a[r * n + j] -= f * a[col * n + j];
        inv[r * n + j] -= f * inv[col * n + j];
      }
    }
  }
  return inv;
}

// Denman-Beavers iteration for the principal matrix square root.
inline std::vector<double> denman_beavers_sqrt(std::vector<double> y, int n, int iters = 60) {
  std::vector<double> z(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; i++) z[i * n + i] = 1.0;
  for (int it = 0; it < iters; it++) {
    auto yi = mat_inv(y, n);
    auto zi = mat_inv(z, n);
    for (int i = 0; i < n * n; i++) {
      double ny = 0.5 * (y[i] + zi[i]);
      double nz = 0.5 * (z[i] + yi[i]);
      y[i] = ny;
      z[i] = nz;
    }
  }
  return y;
}

// --- quaternion forward-kinematics oracle helpers ---

struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

inline Quat quat_from_axis_angle(double ax, double ay, double az) {
  double angle = std::sqrt(ax * ax + ay * ay + az * az);
  if (angle < 1e-300) return Quat{};
  double s = std::sin(angle / 2.0) / angle;
  return Quat{std::cos(angle / 2.0), ax * s, ay * s, az * s};
}

inline Quat quat_mul(const Quat& a, const Quat& b) {
  return Quat{a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
              a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
              a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
              a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline void quat_rotate(const Quat& q, const double v[3], double out[3]) {
  // v' = q v q*
  Quat p{0.0, v[0], v[1], v[2]};
  Quat qc{q.w, -q.x, -q.y, -q.z};
  Quat r = quat_mul(quat_mul(q, p), qc);
  out[0] = r.x;
  out[1] = r.y;
  out[2] = r.z;
}

}  // namespace oracles
