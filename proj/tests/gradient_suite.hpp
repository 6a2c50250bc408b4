#pragma once

// Finite-difference gradient checks for every differentiable tape op.
// Shared between the tensorcore unit tests and the acceptance suite.

#include <functional>
#include <string>
#include <vector>

#include "motionact/tape.hpp"
#include "oracles.hpp"

namespace gradcheck {

using motionact::NodeId;
using motionact::Shape;
using motionact::Tape;
using motionact::Tensor;

struct OpCase {
  std::string name;
  std::vector<Tensor> inputs;
  // Builds the op under test from bound input ids.
  std::function<NodeId(Tape&, const std::vector<NodeId>&)> build;
};

// Scalarizes an arbitrary output by dotting it with a fixed random weight so
// every output element gets a distinct upstream gradient.
inline double eval_case(const OpCase& c, const Tensor& weights,
                        const std::vector<Tensor>& inputs) {
  Tape t;
  std::vector<NodeId> ids;
  for (const auto& in : inputs) ids.push_back(t.leaf(in));
  NodeId out = c.build(t, ids);
  NodeId w = t.leaf(weights.reshaped(t.value(out).shape));
  return t.value(t.sum_all(t.mul(out, w))).item();
}

struct Result {
  std::string name;
  double rel_err = 0.0;
};

// Checks d(loss)/d(input_i) for every input of every case against central
// finite differences (h = 1e-5).
inline std::vector<Result> run(uint64_t seed, int trials_per_op = 4) {
  motionact::Rng rng(seed);
  std::vector<Result> results;

  auto make_cases = [&rng]() {
    std::vector<OpCase> cases;
    int64_t r = 2 + static_cast<int64_t>(rng.uniform_int(3));  // 2..4 rows
    int64_t c = 2 + static_cast<int64_t>(rng.uniform_int(4));  // 2..5 cols
    int64_t k = 2 + static_cast<int64_t>(rng.uniform_int(3));
    auto rt = [&](Shape s) { return rng.normal_tensor(s, 0.8); };

    cases.push_back({"add", {rt({r, c}), rt({r, c})}, [](Tape& t, auto& in) {
                       return t.add(in[0], in[1]);
                     }});
    cases.push_back({"sub", {rt({r, c}), rt({r, c})}, [](Tape& t, auto& in) {
                       return t.sub(in[0], in[1]);
                     }});
    cases.push_back({"mul", {rt({r, c}), rt({r, c})}, [](Tape& t, auto& in) {
                       return t.mul(in[0], in[1]);
                     }});
    cases.push_back({"scale", {rt({r, c})}, [](Tape& t, auto& in) {
                       return t.scale(in[0], -1.7);
                     }});
    cases.push_back({"add_rowvec", {rt({r, c}), rt({c})}, [](Tape& t, auto& in) {
                       return t.add_rowvec(in[0], in[1]);
                     }});
    cases.push_back({"mul_rowvec", {rt({r, c}), rt({c})}, [](Tape& t, auto& in) {
                       return t.mul_rowvec(in[0], in[1]);
                     }});
    cases.push_back({"matmul", {rt({r, k}), rt({k, c})}, [](Tape& t, auto& in) {
                       return t.matmul(in[0], in[1]);
                     }});
    cases.push_back({"transpose", {rt({r, c})}, [](Tape& t, auto& in) {
                       return t.transpose(in[0]);
                     }});
    cases.push_back({"reshape", {rt({r, c})}, [r, c](Tape& t, auto& in) {
                       return t.reshape(in[0], {c * r});
                     }});
    cases.push_back({"concat_rows", {rt({r, c}), rt({r + 1, c})}, [](Tape& t, auto& in) {
                       return t.concat_rows(in[0], in[1]);
                     }});
    cases.push_back({"concat_cols", {rt({r, c}), rt({r, c + 2})}, [](Tape& t, auto& in) {
                       return t.concat_cols(in[0], in[1]);
                     }});
    cases.push_back({"slice_rows", {rt({r + 2, c})}, [r](Tape& t, auto& in) {
                       return t.slice_rows(in[0], 1, r + 1);
                     }});
    cases.push_back({"slice_cols", {rt({r, c + 2})}, [c](Tape& t, auto& in) {
                       return t.slice_cols(in[0], 1, c + 1);
                     }});
    cases.push_back({"conv1d", {rt({r + 3, c}), rt({3, c, k}), rt({k})}, [](Tape& t, auto& in) {
                       return t.conv1d(in[0], in[1], in[2], 1, 1);
                     }});
    cases.push_back(
        {"conv1d_s2", {rt({r + 5, c}), rt({3, c, k}), rt({k})}, [](Tape& t, auto& in) {
           return t.conv1d(in[0], in[1], in[2], 2, 1);
         }});
    cases.push_back({"conv1d_transpose", {rt({r + 2, c}), rt({3, c, k}), rt({k})},
                     [](Tape& t, auto& in) {
                       return t.conv1d_transpose(in[0], in[1], in[2], 1, 1);
                     }});
    cases.push_back({"conv1d_transpose_s2", {rt({r + 2, c}), rt({4, c, k}), rt({k})},
                     [](Tape& t, auto& in) {
                       return t.conv1d_transpose(in[0], in[1], in[2], 2, 1);
                     }});
    cases.push_back({"gather_rows", {rt({r + 3, c})}, [r](Tape& t, auto& in) {
                       std::vector<int64_t> idx{0, r, 1, 1};
                       return t.gather_rows(in[0], idx);
                     }});
    cases.push_back({"sum_all", {rt({r, c})}, [](Tape& t, auto& in) { return t.sum_all(in[0]); }});
    cases.push_back(
        {"mean_all", {rt({r, c})}, [](Tape& t, auto& in) { return t.mean_all(in[0]); }});
    cases.push_back(
        {"sum_axis0", {rt({r, c})}, [](Tape& t, auto& in) { return t.sum_axis(in[0], 0); }});
    cases.push_back(
        {"mean_axis1", {rt({r, c})}, [](Tape& t, auto& in) { return t.mean_axis(in[0], 1); }});
    cases.push_back(
        {"abs_mean", {rt({r, c})}, [](Tape& t, auto& in) { return t.abs_mean(in[0]); }});
    cases.push_back({"sq_mean", {rt({r, c})}, [](Tape& t, auto& in) { return t.sq_mean(in[0]); }});
    cases.push_back({"relu", {rt({r, c})}, [](Tape& t, auto& in) { return t.relu(in[0]); }});
    cases.push_back({"gelu", {rt({r, c})}, [](Tape& t, auto& in) { return t.gelu(in[0]); }});
    cases.push_back(
        {"softmax", {rt({r, c})}, [](Tape& t, auto& in) { return t.softmax_rows(in[0]); }});
    cases.push_back({"layer_norm", {rt({r, c}), rt({c}), rt({c})}, [](Tape& t, auto& in) {
                       return t.layer_norm_rows(in[0], in[1], in[2]);
                     }});
    cases.push_back({"l2_normalize", {rt({r, c})}, [](Tape& t, auto& in) {
                       return t.l2_normalize_rows(in[0]);
                     }});
    cases.push_back({"cross_entropy", {rt({r, c})}, [r, c, &rng](Tape& t, auto& in) {
                       std::vector<int64_t> tg;
                       for (int64_t i = 0; i < r; i++)
                         tg.push_back(static_cast<int64_t>(i % c));
                       return t.cross_entropy_rows(in[0], tg);
                     }});
    // straight_through and stop_gradient route gradients on purpose, so they
    // are exercised by definition tests rather than finite differences.
    return cases;
  };

  std::vector<double> worst;
  std::vector<std::string> names;
  for (int trial = 0; trial < trials_per_op; trial++) {
    auto cases = make_cases();
    if (names.empty()) {
      for (auto& c : cases) names.push_back(c.name);
      worst.assign(cases.size(), 0.0);
    }
    for (size_t ci = 0; ci < cases.size(); ci++) {
      auto& c = cases[ci];
      // relu/abs kink guard: nudge inputs away from zero
      for (auto& in : c.inputs)
        for (auto& v : in.data)
          if (std::fabs(v) < 1e-3) v += (v >= 0 ? 2e-3 : -2e-3);

      Tape t;
      std::vector<NodeId> ids;
      for (const auto& in : c.inputs) ids.push_back(t.leaf(in));
      NodeId out = c.build(t, ids);
      Tensor weights = rng.normal_tensor(t.value(out).shape, 1.0);
      NodeId w = t.leaf(weights);
      NodeId loss = t.sum_all(t.mul(out, w));
      t.backward(loss);

      for (size_t ii = 0; ii < c.inputs.size(); ii++) {
        auto f = [&](const Tensor& x) {
          auto inputs = c.inputs;
          inputs[ii] = x;
          return eval_case(c, weights, inputs);
        };
        Tensor fd = oracles::finite_diff(f, c.inputs[ii]);
        double err = oracles::max_rel_err(t.grad(ids[ii]), fd, 1e-3);
        worst[ci] = std::max(worst[ci], err);
      }
    }
  }

  for (size_t i = 0; i < names.size(); i++) results.push_back({names[i], worst[i]});
  return results;
}

}  // namespace gradcheck
