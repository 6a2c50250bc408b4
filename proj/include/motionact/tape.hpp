#pragma once

#include <functional>
#include <vector>

#include "motionact/tensor.hpp"

namespace motionact {

using NodeId = int32_t;

// Define-by-run reverse-mode tape. Each op appends a node holding its forward
// value and a closure that scatters the node's gradient into its parents.
// Nodes are created in topological order, so one reverse sweep from the loss
// visits every node exactly once; nodes the loss never touched keep a zero
// gradient. A tape is single-owner and must not be shared across threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves: parameters and inputs alike. Gradients are tracked for all nodes;
  // callers read back only the ones they care about.
  NodeId leaf(Tensor v);

  // --- elementwise / arithmetic ---
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_rowvec(NodeId x, NodeId v);  // x:[R,C] + v:[C] on every row
  NodeId mul_rowvec(NodeId x, NodeId v);

  // --- shape ---
  NodeId reshape(NodeId a, Shape s);
  NodeId transpose(NodeId a);
  NodeId concat_rows(NodeId a, NodeId b);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_rows(NodeId a, int64_t r0, int64_t r1);
  NodeId slice_cols(NodeId a, int64_t c0, int64_t c1);

  // --- linear / convolution / lookup ---
  NodeId matmul(NodeId a, NodeId b);
  // x:[T,Cin], w:[K,Cin,Cout], bias:[Cout] (or -1 for none). Zero padding.
  NodeId conv1d(NodeId x, NodeId w, NodeId bias, int64_t stride, int64_t pad);
  // Transposed counterpart: out length (T-1)*stride + K - 2*pad.
  NodeId conv1d_transpose(NodeId x, NodeId w, NodeId bias, int64_t stride, int64_t pad);
  NodeId gather_rows(NodeId table, std::vector<int64_t> indices);

  // --- reductions ---
  NodeId sum_all(NodeId a);
  NodeId mean_all(NodeId a);
  NodeId mean_axis(NodeId a, int axis);  // 2-D; axis 0 -> [C], axis 1 -> [R]
  NodeId sum_axis(NodeId a, int axis);
  NodeId abs_mean(NodeId a);  // L1 reduction
  NodeId sq_mean(NodeId a);   // squared-L2 reduction

  // --- nonlinearities / normalization ---
  NodeId relu(NodeId a);
  NodeId gelu(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm_rows(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId l2_normalize_rows(NodeId x, double eps = 1e-12);

  // --- losses ---
  NodeId cross_entropy_rows(NodeId logits, std::vector<int64_t> targets);

  // --- gradient routing ---
  NodeId stop_gradient(NodeId a);
  // Forward copies z_q bitwise; backward hands the incoming gradient to z.
  NodeId straight_through(NodeId z, NodeId z_q);

  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(NodeId id);
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    std::function<void(Tape&)> back;
  };

  NodeId push(Tensor value, std::function<void(Tape&)> back = nullptr);
  Tensor& grad_buf(NodeId id);
  const Tensor& val(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

  std::vector<Node> nodes_;
};

// Forward GELU/erf helpers shared with no-tape inference paths.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

}  // namespace motionact
