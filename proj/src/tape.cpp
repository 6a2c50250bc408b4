#include "motionact/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace motionact {

namespace {

void check_2d(const char* op, const Tensor& t) {
  if (t.shape.size() != 2) fail(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.shape));
}

void check_same(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    fail(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad_scalar(double x) {
  double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

NodeId Tape::push(Tensor value, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) { return grad_buf(id); }

NodeId Tape::leaf(Tensor v) { return push(std::move(v)); }

void Tape::backward(NodeId root) {
  if (nodes_[static_cast<size_t>(root)].value.numel() != 1)
    fail("backward: root must be a scalar, got " +
         shape_str(nodes_[static_cast<size_t>(root)].value.shape));
  grad_buf(root).data[0] = 1.0;
  for (NodeId id = root; id >= 0; id--) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.back && !n.grad.data.empty()) n.back(*this);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

NodeId Tape::add(NodeId a, NodeId b) {
  check_same("add", val(a), val(b));
  Tensor out = val(a);
  for (int64_t i = 0; i < out.numel(); i++) out.data[i] += val(b).data[i];
  NodeId id = push(std::move(out), [a, b, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (int64_t i = 0; i < g.numel(); i++) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  });
  return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_same("sub", val(a), val(b));
  Tensor out = val(a);
  for (int64_t i = 0; i < out.numel(); i++) out.data[i] -= val(b).data[i];
  return push(std::move(out), [a, b, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (int64_t i = 0; i < g.numel(); i++) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  });
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check_same("mul", val(a), val(b));
  Tensor out = val(a);
  for (int64_t i = 0; i < out.numel(); i++) out.data[i] *= val(b).data[i];
  return push(std::move(out), [a, b, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& va = t.val(a);
    const Tensor& vb = t.val(b);
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (int64_t i = 0; i < g.numel(); i++) {
      ga.data[i] += g.data[i] * vb.data[i];
      gb.data[i] += g.data[i] * va.data[i];
    }
  });
}

NodeId Tape::scale(NodeId a, double c) {
  Tensor out = val(a);
  for (auto& v : out.data) v *= c;
  return push(std::move(out), [a, c, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < g.numel(); i++) ga.data[i] += c * g.data[i];
  });
}

NodeId Tape::add_rowvec(NodeId x, NodeId v) {
  check_2d("add_rowvec", val(x));
  const Tensor& xv = val(x);
  const Tensor& vv = val(v);
  if (vv.numel() != xv.shape[1])
    fail("add_rowvec: shape mismatch " + shape_str(xv.shape) + " vs " + shape_str(vv.shape));
  Tensor out = xv;
  int64_t rows = xv.shape[0], cols = xv.shape[1];
  for (int64_t r = 0; r < rows; r++)
    for (int64_t c = 0; c < cols; c++) out.data[r * cols + c] += vv.data[c];
  return push(std::move(out), [x, v, rows, cols, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gx = t.grad_buf(x);
    Tensor& gv = t.grad_buf(v);
    for (int64_t r = 0; r < rows; r++)
      for (int64_t c = 0; c < cols; c++) {
        gx.data[r * cols + c] += g.data[r * cols + c];
        gv.data[c] += g.data[r * cols + c];
      }
  });
}

NodeId Tape::mul_rowvec(NodeId x, NodeId v) {
  check_2d("mul_rowvec", val(x));
  const Tensor& xv = val(x);
  const Tensor& vv = val(v);
  if (vv.numel() != xv.shape[1])
    fail("mul_rowvec: shape mismatch " + shape_str(xv.shape) + " vs " + shape_str(vv.shape));
  Tensor out = xv;
  int64_t rows = xv.shape[0], cols = xv.shape[1];
  for (int64_t r = 0; r < rows; r++)
    for (int64_t c = 0; c < cols; c++) out.data[r * cols + c] *= vv.data[c];
  return push(std::move(out), [x, v, rows, cols, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& xv = t.val(x);
    const Tensor& vv = t.val(v);
    Tensor& gx = t.grad_buf(x);
    Tensor& gv = t.grad_buf(v);
    for (int64_t r = 0; r < rows; r++)
      for (int64_t c = 0; c < cols; c++) {
        gx.data[r * cols + c] += g.data[r * cols + c] * vv.data[c];
        gv.data[c] += g.data[r * cols + c] * xv.data[r * cols + c];
      }
  });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

NodeId Tape::reshape(NodeId a, Shape s) {
  Tensor out = val(a).reshaped(std::move(s));
  return push(std::move(out), [a, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < g.numel(); i++) ga.data[i] += g.data[i];
  });
}

NodeId Tape::transpose(NodeId a) {
  Tensor out = transpose_val(val(a));
  int64_t rows = val(a).shape[0], cols = val(a).shape[1];
  return push(std::move(out), [a, rows, cols, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    for (int64_t r = 0; r < rows; r++)
      for (int64_t c = 0; c < cols; c++) ga.data[r * cols + c] += g.data[c * rows + r];
  });
}

NodeId Tape::concat_rows(NodeId a, NodeId b) {
  check_2d("concat_rows", val(a));
  check_2d("concat_rows", val(b));
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (av.shape[1] != bv.shape[1])
    fail("concat_rows: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor out({av.shape[0] + bv.shape[0], av.shape[1]});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.numel());
  int64_t na = av.numel();
  return push(std::move(out), [a, b, na, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (int64_t i = 0; i < na; i++) ga.data[i] += g.data[i];
    for (int64_t i = na; i < g.numel(); i++) gb.data[i - na] += g.data[i];
  });
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  check_2d("concat_cols", val(a));
  check_2d("concat_cols", val(b));
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (av.shape[0] != bv.shape[0])
    fail("concat_cols: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  int64_t rows = av.shape[0], ca = av.shape[1], cb = bv.shape[1];
  Tensor out({rows, ca + cb});
  for (int64_t r = 0; r < rows; r++) {
    std::copy(av.data.begin() + r * ca, av.data.begin() + (r + 1) * ca,
              out.data.begin() + r * (ca + cb));
    std::copy(bv.data.begin() + r * cb, bv.data.begin() + (r + 1) * cb,
              out.data.begin() + r * (ca + cb) + ca);
  }
  return push(std::move(out), [a, b, rows, ca, cb, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    Tensor& gb = t.grad_buf(b);
    for (int64_t r = 0; r < rows; r++) {
      for (int64_t c = 0; c < ca; c++) ga.data[r * ca + c] += g.data[r * (ca + cb) + c];
      for (int64_t c = 0; c < cb; c++) gb.data[r * cb + c] += g.data[r * (ca + cb) + ca + c];
    }
  });
}

NodeId Tape::slice_rows(NodeId a, int64_t r0, int64_t r1) {
  check_2d("slice_rows", val(a));
  const Tensor& av = val(a);
  if (r0 < 0 || r1 > av.shape[0] || r0 >= r1)
    fail("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) + ") out of " +
         shape_str(av.shape));
  int64_t cols = av.shape[1];
  Tensor out({r1 - r0, cols});
  std::copy(av.data.begin() + r0 * cols, av.data.begin() + r1 * cols, out.data.begin());
  return push(std::move(out), [a, r0, cols, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < g.numel(); i++) ga.data[r0 * cols + i] += g.data[i];
  });
}

NodeId Tape::slice_cols(NodeId a, int64_t c0, int64_t c1) {
  check_2d("slice_cols", val(a));
  const Tensor& av = val(a);
  if (c0 < 0 || c1 > av.shape[1] || c0 >= c1)
    fail("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) + ") out of " +
         shape_str(av.shape));
  int64_t rows = av.shape[0], cols = av.shape[1], w = c1 - c0;
  Tensor out({rows, w});
  for (int64_t r = 0; r < rows; r++)
    std::copy(av.data.begin() + r * cols + c0, av.data.begin() + r * cols + c1,
              out.data.begin() + r * w);
  return push(std::move(out), [a, c0, rows, cols, w, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    for (int64_t r = 0; r < rows; r++)
      for (int64_t c = 0; c < w; c++) ga.data[r * cols + c0 + c] += g.data[r * w + c];
  });
}

// ---------------------------------------------------------------------------
// linear / convolution / lookup
// ---------------------------------------------------------------------------

NodeId Tape::matmul(NodeId a, NodeId b) {
  Tensor out = matmul_val(val(a), val(b));
  return push(std::move(out), [a, b, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    int64_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    // dA += G * B^T ; dB += A^T * G
    matmul_raw(g.data.data(), bv.data.data(), t.grad_buf(a).data.data(), m, n, k, true, false,
               true);
    matmul_raw(av.data.data(), g.data.data(), t.grad_buf(b).data.data(), k, m, n, true, true,
               false);
  });
}

namespace {

// im2col for [T,Cin] signals: row t of the result is the flattened K*Cin
// window feeding output step t.
Tensor im2col(const Tensor& x, int64_t k, int64_t stride, int64_t pad, int64_t t_out) {
  int64_t t_in = x.shape[0], cin = x.shape[1];
  Tensor col({t_out, k * cin});
  for (int64_t t = 0; t < t_out; t++) {
    for (int64_t j = 0; j < k; j++) {
      int64_t src = t * stride + j - pad;
      if (src < 0 || src >= t_in) continue;
      std::copy(x.data.begin() + src * cin, x.data.begin() + (src + 1) * cin,
                col.data.begin() + t * k * cin + j * cin);
    }
  }
  return col;
}

void col2im_add(const Tensor& col, Tensor& gx, int64_t k, int64_t stride, int64_t pad) {
  int64_t t_in = gx.shape[0], cin = gx.shape[1], t_out = col.shape[0];
  for (int64_t t = 0; t < t_out; t++) {
    for (int64_t j = 0; j < k; j++) {
      int64_t dst = t * stride + j - pad;
      if (dst < 0 || dst >= t_in) continue;
      const double* src = col.data.data() + t * k * cin + j * cin;
      double* out = gx.data.data() + dst * cin;
      for (int64_t c = 0; c < cin; c++) out[c] += src[c];
    }
  }
}

}  // namespace

NodeId Tape::conv1d(NodeId x, NodeId w, NodeId bias, int64_t stride, int64_t pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  check_2d("conv1d", xv);
  if (wv.shape.size() != 3 || wv.shape[1] != xv.shape[1])
    fail("conv1d: shape mismatch " + shape_str(xv.shape) + " vs kernel " + shape_str(wv.shape));
  int64_t k = wv.shape[0], cin = wv.shape[1], cout = wv.shape[2];
  int64_t t_out = (xv.shape[0] + 2 * pad - k) / stride + 1;
  if (t_out < 1) fail("conv1d: input " + shape_str(xv.shape) + " shorter than kernel");

  Tensor col = im2col(xv, k, stride, pad, t_out);
  Tensor out({t_out, cout});
  // w is stored [K,Cin,Cout] row-major, i.e. already a [K*Cin, Cout] matrix.
  matmul_raw(col.data.data(), wv.data.data(), out.data.data(), t_out, k * cin, cout);
  if (bias >= 0) {
    const Tensor& bv = val(bias);
    if (bv.numel() != cout) fail("conv1d: bias shape " + shape_str(bv.shape));
    for (int64_t t = 0; t < t_out; t++)
      for (int64_t c = 0; c < cout; c++) out.data[t * cout + c] += bv.data[c];
  }
  auto col_shared = std::make_shared<Tensor>(std::move(col));
  return push(std::move(out),
              [x, w, bias, stride, pad, k, cin, cout, t_out, col_shared, id = nodes_.size()](Tape& t) {
                const Tensor& g = t.nodes_[id].grad;
                // dW += col^T * G
                matmul_raw(col_shared->data.data(), g.data.data(), t.grad_buf(w).data.data(),
                           k * cin, t_out, cout, true, true, false);
                // dcol = G * W^T, scattered back to x
                Tensor dcol({t_out, k * cin});
                matmul_raw(g.data.data(), t.val(w).data.data(), dcol.data.data(), t_out, cout,
                           k * cin, false, false, true);
                col2im_add(dcol, t.grad_buf(x), k, stride, pad);
                if (bias >= 0) {
                  Tensor& gb = t.grad_buf(bias);
                  for (int64_t r = 0; r < t_out; r++)
                    for (int64_t c = 0; c < cout; c++) gb.data[c] += g.data[r * cout + c];
                }
              });
}

NodeId Tape::conv1d_transpose(NodeId x, NodeId w, NodeId bias, int64_t stride, int64_t pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  check_2d("conv1d_transpose", xv);
  if (wv.shape.size() != 3 || wv.shape[1] != xv.shape[1])
    fail("conv1d_transpose: shape mismatch " + shape_str(xv.shape) + " vs kernel " +
         shape_str(wv.shape));
  int64_t k = wv.shape[0], cin = wv.shape[1], cout = wv.shape[2];
  int64_t t_in = xv.shape[0];
  int64_t t_out = (t_in - 1) * stride + k - 2 * pad;
  if (t_out < 1) fail("conv1d_transpose: empty output for input " + shape_str(xv.shape));

  // prod[t, j*Cout+c] = sum_ci x[t,ci] * w[j,ci,c]; needs w as [Cin, K*Cout].
  Tensor wperm({cin, k * cout});
  for (int64_t j = 0; j < k; j++)
    for (int64_t ci = 0; ci < cin; ci++)
      for (int64_t c = 0; c < cout; c++)
        wperm.data[ci * k * cout + j * cout + c] = wv.data[(j * cin + ci) * cout + c];
  Tensor prod({t_in, k * cout});
  matmul_raw(xv.data.data(), wperm.data.data(), prod.data.data(), t_in, cin, k * cout);

  Tensor out({t_out, cout});
  for (int64_t t = 0; t < t_in; t++)
    for (int64_t j = 0; j < k; j++) {
      int64_t dst = t * stride + j - pad;
      if (dst < 0 || dst >= t_out) continue;
      for (int64_t c = 0; c < cout; c++)
        out.data[dst * cout + c] += prod.data[t * k * cout + j * cout + c];
    }
  if (bias >= 0) {
    const Tensor& bv = val(bias);
    if (bv.numel() != cout) fail("conv1d_transpose: bias shape " + shape_str(bv.shape));
    for (int64_t t = 0; t < t_out; t++)
      for (int64_t c = 0; c < cout; c++) out.data[t * cout + c] += bv.data[c];
  }
  return push(std::move(out), [x, w, bias, stride, pad, k, cin, cout, t_in, t_out,
                               id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& xv = t.val(x);
    const Tensor& wv = t.val(w);
    // dprod[t, j*Cout+c] = g[t*stride+j-pad, c]
    Tensor dprod({t_in, k * cout});
    for (int64_t ti = 0; ti < t_in; ti++)
      for (int64_t j = 0; j < k; j++) {
        int64_t src = ti * stride + j - pad;
        if (src < 0 || src >= t_out) continue;
        for (int64_t c = 0; c < cout; c++)
          dprod.data[ti * k * cout + j * cout + c] = g.data[src * cout + c];
      }
    // dx += dprod * wperm^T
    Tensor wperm({cin, k * cout});
    for (int64_t j = 0; j < k; j++)
      for (int64_t ci = 0; ci < cin; ci++)
        for (int64_t c = 0; c < cout; c++)
          wperm.data[ci * k * cout + j * cout + c] = wv.data[(j * cin + ci) * cout + c];
    matmul_raw(dprod.data.data(), wperm.data.data(), t.grad_buf(x).data.data(), t_in, k * cout,
               cin, true, false, true);
    // dwperm = x^T * dprod, folded back into [K,Cin,Cout]
    Tensor dwperm({cin, k * cout});
    matmul_raw(xv.data.data(), dprod.data.data(), dwperm.data.data(), cin, t_in, k * cout, false,
               true, false);
    Tensor& gw = t.grad_buf(w);
    for (int64_t j = 0; j < k; j++)
      for (int64_t ci = 0; ci < cin; ci++)
        for (int64_t c = 0; c < cout; c++)
          gw.data[(j * cin + ci) * cout + c] += dwperm.data[ci * k * cout + j * cout + c];
    if (bias >= 0) {
      Tensor& gb = t.grad_buf(bias);
      for (int64_t r = 0; r < t_out; r++)
        for (int64_t c = 0; c < cout; c++) gb.data[c] += g.data[r * cout + c];
    }
  });
}

NodeId Tape::gather_rows(NodeId table, std::vector<int64_t> indices) {
  const Tensor& tv = val(table);
  check_2d("gather_rows", tv);
  int64_t n = tv.shape[0], d = tv.shape[1];
  for (int64_t i : indices)
    if (i < 0 || i >= n)
      fail("gather_rows: index " + std::to_string(i) + " out of table " + shape_str(tv.shape));
  Tensor out({static_cast<int64_t>(indices.size()), d});
  for (size_t r = 0; r < indices.size(); r++)
    std::copy(tv.data.begin() + indices[r] * d, tv.data.begin() + (indices[r] + 1) * d,
              out.data.begin() + static_cast<int64_t>(r) * d);
  return push(std::move(out), [table, idx = std::move(indices), d, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gt = t.grad_buf(table);
    for (size_t r = 0; r < idx.size(); r++)
      for (int64_t c = 0; c < d; c++) gt.data[idx[r] * d + c] += g.data[static_cast<int64_t>(r) * d + c];
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

NodeId Tape::sum_all(NodeId a) {
  double s = 0.0;
  for (double v : val(a).data) s += v;
  return push(Tensor::scalar(s), [a, id = nodes_.size()](Tape& t) {
    double g = t.nodes_[id].grad.data[0];
    Tensor& ga = t.grad_buf(a);
    for (auto& v : ga.data) v += g;
  });
}

NodeId Tape::mean_all(NodeId a) {
  int64_t n = val(a).numel();
  double s = 0.0;
  for (double v : val(a).data) s += v;
  return push(Tensor::scalar(s / static_cast<double>(n)), [a, n, id = nodes_.size()](Tape& t) {
    double g = t.nodes_[id].grad.data[0] / static_cast<double>(n);
    Tensor& ga = t.grad_buf(a);
    for (auto& v : ga.data) v += g;
  });
}

NodeId Tape::sum_axis(NodeId a, int axis) {
  check_2d("sum_axis", val(a));
  const Tensor& av = val(a);
  int64_t rows = av.shape[0], cols = av.shape[1];
  if (axis == 0) {
    Tensor out({cols});
    for (int64_t r = 0; r < rows; r++)
      for (int64_t c = 0; c < cols; c++) out.data[c] += av.data[r * cols + c];
    return push(std::move(out), [a, rows, cols, id = nodes_.size()](Tape& t) {
      const Tensor& g = t.nodes_[id].grad;
      Tensor& ga = t.grad_buf(a);
      for (int64_t r = 0; r < rows; r++)
        for (int64_t c = 0; c < cols; c++) ga.data[r * cols + c] += g.data[c];
    });
  }
  if (axis != 1) fail("sum_axis: axis must be 0 or 1");
  Tensor out({rows});
  for (int64_t r = 0; r < rows; r++)
    for (int64_t c = 0; c < cols; c++) out.data[r] += av.data[r * cols + c];
  return push(std::move(out), [a, rows, cols, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& ga = t.grad_buf(a);
    for (int64_t r = 0; r < rows; r++)
      for (int64_t c = 0; c < cols; c++) ga.data[r * cols + c] += g.data[r];
  });
}

NodeId Tape::mean_axis(NodeId a, int axis) {
  check_2d("mean_axis", val(a));
  int64_t denom = axis == 0 ? val(a).shape[0] : val(a).shape[1];
  return scale(sum_axis(a, axis), 1.0 / static_cast<double>(denom));
}

NodeId Tape::abs_mean(NodeId a) {
  const Tensor& av = val(a);
  int64_t n = av.numel();
  double s = 0.0;
  for (double v : av.data) s += std::fabs(v);
  return push(Tensor::scalar(s / static_cast<double>(n)), [a, n, id = nodes_.size()](Tape& t) {
    double g = t.nodes_[id].grad.data[0] / static_cast<double>(n);
    const Tensor& av = t.val(a);
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < av.numel(); i++)
      ga.data[i] += g * (av.data[i] > 0.0 ? 1.0 : av.data[i] < 0.0 ? -1.0 : 0.0);
  });
}

NodeId Tape::sq_mean(NodeId a) {
  const Tensor& av = val(a);
  int64_t n = av.numel();
  double s = 0.0;
  for (double v : av.data) s += v * v;
  return push(Tensor::scalar(s / static_cast<double>(n)), [a, n, id = nodes_.size()](Tape& t) {
    double g = t.nodes_[id].grad.data[0] * 2.0 / static_cast<double>(n);
    const Tensor& av = t.val(a);
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < av.numel(); i++) ga.data[i] += g * av.data[i];
  });
}

// ---------------------------------------------------------------------------
// nonlinearities / normalization
// ---------------------------------------------------------------------------

NodeId Tape::relu(NodeId a) {
  Tensor out = val(a);
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), [a, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& av = t.val(a);
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < g.numel(); i++)
      if (av.data[i] > 0.0) ga.data[i] += g.data[i];
  });
}

NodeId Tape::gelu(NodeId a) {
  Tensor out = val(a);
  for (auto& v : out.data) v = gelu_scalar(v);
  return push(std::move(out), [a, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& av = t.val(a);
    Tensor& ga = t.grad_buf(a);
    for (int64_t i = 0; i < g.numel(); i++) ga.data[i] += g.data[i] * gelu_grad_scalar(av.data[i]);
  });
}

NodeId Tape::softmax_rows(NodeId a) {
  check_2d("softmax", val(a));
  const Tensor& av = val(a);
  int64_t rows = av.shape[0], cols = av.shape[1];
  Tensor out(av.shape);
  for (int64_t r = 0; r < rows; r++) {
    double mx = av.data[r * cols];
    for (int64_t c = 1; c < cols; c++) mx = std::max(mx, av.data[r * cols + c]);
    double z = 0.0;
    for (int64_t c = 0; c < cols; c++) {
      out.data[r * cols + c] = std::exp(av.data[r * cols + c] - mx);
      z += out.data[r * cols + c];
    }
    for (int64_t c = 0; c < cols; c++) out.data[r * cols + c] /= z;
  }
  return push(std::move(out), [a, rows, cols, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& y = t.nodes_[id].value;
    Tensor& ga = t.grad_buf(a);
    for (int64_t r = 0; r < rows; r++) {
      double dot = 0.0;
      for (int64_t c = 0; c < cols; c++) dot += g.data[r * cols + c] * y.data[r * cols + c];
      for (int64_t c = 0; c < cols; c++)
        ga.data[r * cols + c] += y.data[r * cols + c] * (g.data[r * cols + c] - dot);
    }
  });
}

NodeId Tape::layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps) {
  check_2d("layer_norm", val(x));
  const Tensor& xv = val(x);
  int64_t rows = xv.shape[0], cols = xv.shape[1];
  if (val(gain).numel() != cols || val(bias).numel() != cols)
    fail("layer_norm: gain/bias shape mismatch vs " + shape_str(xv.shape));
  Tensor out(xv.shape);
  Tensor xhat(xv.shape);
  Tensor rstd({rows});
  const Tensor& gv = val(gain);
  const Tensor& bv = val(bias);
  for (int64_t r = 0; r < rows; r++) {
    double mu = 0.0;
    for (int64_t c = 0; c < cols; c++) mu += xv.data[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; c++) {
      double d = xv.data[r * cols + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double rs = 1.0 / std::sqrt(var + eps);
    rstd.data[r] = rs;
    for (int64_t c = 0; c < cols; c++) {
      double xh = (xv.data[r * cols + c] - mu) * rs;
      xhat.data[r * cols + c] = xh;
      out.data[r * cols + c] = xh * gv.data[c] + bv.data[c];
    }
  }
  auto xh = std::make_shared<Tensor>(std::move(xhat));
  auto rs = std::make_shared<Tensor>(std::move(rstd));
  return push(std::move(out), [x, gain, bias, rows, cols, xh, rs, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& gv = t.val(gain);
    Tensor& gx = t.grad_buf(x);
    Tensor& gg = t.grad_buf(gain);
    Tensor& gb = t.grad_buf(bias);
    for (int64_t r = 0; r < rows; r++) {
      double m_dxhat = 0.0, m_dxhat_xhat = 0.0;
      for (int64_t c = 0; c < cols; c++) {
        double dxh = g.data[r * cols + c] * gv.data[c];
        m_dxhat += dxh;
        m_dxhat_xhat += dxh * xh->data[r * cols + c];
        gg.data[c] += g.data[r * cols + c] * xh->data[r * cols + c];
        gb.data[c] += g.data[r * cols + c];
      }
      m_dxhat /= static_cast<double>(cols);
      m_dxhat_xhat /= static_cast<double>(cols);
      for (int64_t c = 0; c < cols; c++) {
        double dxh = g.data[r * cols + c] * gv.data[c];
        gx.data[r * cols + c] +=
            (dxh - m_dxhat - xh->data[r * cols + c] * m_dxhat_xhat) * rs->data[r];
      }
    }
  });
}

NodeId Tape::l2_normalize_rows(NodeId x, double eps) {
  check_2d("l2_normalize", val(x));
  const Tensor& xv = val(x);
  int64_t rows = xv.shape[0], cols = xv.shape[1];
  Tensor out(xv.shape);
  Tensor norms({rows});
  for (int64_t r = 0; r < rows; r++) {
    double s = eps;
    for (int64_t c = 0; c < cols; c++) s += xv.data[r * cols + c] * xv.data[r * cols + c];
    double n = std::sqrt(s);
    norms.data[r] = n;
    for (int64_t c = 0; c < cols; c++) out.data[r * cols + c] = xv.data[r * cols + c] / n;
  }
  auto nm = std::make_shared<Tensor>(std::move(norms));
  return push(std::move(out), [x, rows, cols, nm, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& xv = t.val(x);
    Tensor& gx = t.grad_buf(x);
    for (int64_t r = 0; r < rows; r++) {
      double n = nm->data[r];
      double dot = 0.0;
      for (int64_t c = 0; c < cols; c++) dot += g.data[r * cols + c] * xv.data[r * cols + c];
      for (int64_t c = 0; c < cols; c++)
        gx.data[r * cols + c] += g.data[r * cols + c] / n - xv.data[r * cols + c] * dot / (n * n * n);
    }
  });
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

NodeId Tape::cross_entropy_rows(NodeId logits, std::vector<int64_t> targets) {
  check_2d("cross_entropy", val(logits));
  const Tensor& lv = val(logits);
  int64_t rows = lv.shape[0], cols = lv.shape[1];
  if (static_cast<int64_t>(targets.size()) != rows)
    fail("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
         shape_str(lv.shape));
  for (int64_t y : targets)
    if (y < 0 || y >= cols) fail("cross_entropy: target " + std::to_string(y) + " out of range");
  double loss = 0.0;
  for (int64_t r = 0; r < rows; r++) {
    double mx = lv.data[r * cols];
    for (int64_t c = 1; c < cols; c++) mx = std::max(mx, lv.data[r * cols + c]);
    double z = 0.0;
    for (int64_t c = 0; c < cols; c++) z += std::exp(lv.data[r * cols + c] - mx);
    loss += std::log(z) + mx - lv.data[r * cols + targets[static_cast<size_t>(r)]];
  }
  loss /= static_cast<double>(rows);
  return push(Tensor::scalar(loss),
              [logits, tg = std::move(targets), rows, cols, id = nodes_.size()](Tape& t) {
                double g = t.nodes_[id].grad.data[0] / static_cast<double>(rows);
                const Tensor& lv = t.val(logits);
                Tensor& gl = t.grad_buf(logits);
                for (int64_t r = 0; r < rows; r++) {
                  double mx = lv.data[r * cols];
                  for (int64_t c = 1; c < cols; c++) mx = std::max(mx, lv.data[r * cols + c]);
                  double z = 0.0;
                  for (int64_t c = 0; c < cols; c++) z += std::exp(lv.data[r * cols + c] - mx);
                  for (int64_t c = 0; c < cols; c++) {
                    double p = std::exp(lv.data[r * cols + c] - mx) / z;
                    gl.data[r * cols + c] += g * (p - (c == tg[static_cast<size_t>(r)] ? 1.0 : 0.0));
                  }
                }
              });
}

// ---------------------------------------------------------------------------
// gradient routing
// ---------------------------------------------------------------------------

NodeId Tape::stop_gradient(NodeId a) { return push(val(a)); }

NodeId Tape::straight_through(NodeId z, NodeId z_q) {
  check_same("straight_through", val(z), val(z_q));
  return push(val(z_q), [z, id = nodes_.size()](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gz = t.grad_buf(z);
    for (int64_t i = 0; i < g.numel(); i++) gz.data[i] += g.data[i];
  });
}

}  // namespace motionact
