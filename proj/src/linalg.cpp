#include "motionact/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace motionact {

namespace {

void check_symmetric(const char* op, const Tensor& s) {
  if (s.shape.size() != 2 || s.shape[0] != s.shape[1])
    fail(std::string(op) + ": expected square matrix, got " + shape_str(s.shape));
  int64_t n = s.shape[0];
  double scale = 0.0;
  for (double v : s.data) scale = std::max(scale, std::fabs(v));
  double tol = 1e-9 * (1.0 + scale);
  for (int64_t r = 0; r < n; r++)
    for (int64_t c = r + 1; c < n; c++)
      if (std::fabs(s.at(r, c) - s.at(c, r)) > tol)
        fail(std::string(op) + ": matrix is not symmetric at (" + std::to_string(r) + "," +
             std::to_string(c) + ")");
}

}  // namespace

EigResult sym_eig(const Tensor& s) {
  check_symmetric("sym_eig", s);
  int64_t n = s.shape[0];
  Tensor a = s;
  Tensor v({n, n});
  for (int64_t i = 0; i < n; i++) v.at(i, i) = 1.0;

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; sweep++) {
    double off = 0.0;
    for (int64_t p = 0; p < n; p++)
      for (int64_t q = p + 1; q < n; q++) off += a.at(p, q) * a.at(p, q);
    if (off <= 1e-26 * static_cast<double>(n * n)) break;

    for (int64_t p = 0; p < n; p++) {
      for (int64_t q = p + 1; q < n; q++) {
        double apq = a.at(p, q);
        if (apq == 0.0) continue;
        double app = a.at(p, p), aqq = a.at(q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double sn = t * c;
        for (int64_t k = 0; k < n; k++) {
          double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - sn * akq;
          a.at(k, q) = sn * akp + c * akq;
        }
        for (int64_t k = 0; k < n; k++) {
          double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - sn * aqk;
          a.at(q, k) = sn * apk + c * aqk;
        }
        for (int64_t k = 0; k < n; k++) {
          double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - sn * vkq;
          v.at(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int64_t i, int64_t j) { return a.at(i, i) < a.at(j, j); });

  EigResult res{Tensor({n}), Tensor({n, n})};
  for (int64_t i = 0; i < n; i++) {
    res.values.data[static_cast<size_t>(i)] = a.at(order[static_cast<size_t>(i)], order[static_cast<size_t>(i)]);
    for (int64_t k = 0; k < n; k++) res.vectors.at(k, i) = v.at(k, order[static_cast<size_t>(i)]);
  }
  return res;
}

double sqrtm_trace(const Tensor& s1, const Tensor& s2) {
  check_symmetric("sqrtm_trace", s1);
  check_symmetric("sqrtm_trace", s2);
  if (s1.shape[0] != s2.shape[0])
    fail("sqrtm_trace: dimension mismatch " + shape_str(s1.shape) + " vs " + shape_str(s2.shape));
  int64_t n = s1.shape[0];

  auto clamp_eval = [](double lam) {
    if (lam >= 0.0) return lam;
    if (lam >= -1e-8) return 0.0;
    fail("sqrtm_trace: negative eigenvalue " + std::to_string(lam) + " beyond tolerance");
    return 0.0;  // unreachable
  };

  EigResult e1 = sym_eig(s1);
  // S1^{1/2} = V * diag(sqrt(lambda)) * V^T
  Tensor vs({n, n});
  for (int64_t r = 0; r < n; r++)
    for (int64_t c = 0; c < n; c++)
      vs.at(r, c) = e1.vectors.at(r, c) * std::sqrt(clamp_eval(e1.values.data[static_cast<size_t>(c)]));
  Tensor half = matmul_val(vs, transpose_val(e1.vectors));

  Tensor m = matmul_val(matmul_val(half, s2), half);
  // Symmetrize away the rounding skew before the second eigensolve.
  for (int64_t r = 0; r < n; r++)
    for (int64_t c = r + 1; c < n; c++) {
      double avg = 0.5 * (m.at(r, c) + m.at(c, r));
      m.at(r, c) = avg;
      m.at(c, r) = avg;
    }
  EigResult e2 = sym_eig(m);
  double tr = 0.0;
  for (double lam : e2.values.data) tr += std::sqrt(clamp_eval(lam));
  return tr;
}

}  // namespace motionact
