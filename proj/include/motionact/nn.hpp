#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "motionact/adam.hpp"
#include "motionact/tape.hpp"
#include "motionact/tensor.hpp"

namespace motionact::nn {

struct Param {
  std::string name;
  Tensor value;
  AdamState opt;
};

// Named parameter collection; one per model. Ordering is insertion order and
// is part of the checkpoint format.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor init);
  Tensor* find(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::vector<Param>& entries() { return params_; }
  const std::vector<Param>& entries() const { return params_; }
  int64_t total_elements() const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Leaves every parameter onto a tape for one training step and routes the
// gradients back into Adam afterwards.
class Binding {
 public:
  Binding(Tape& tape, ParamSet& params);
  NodeId operator[](const std::string& name) const;
  // Applies one Adam step per parameter using the tape gradients.
  void apply_adam(const AdamConfig& cfg);

 private:
  Tape* tape_;
  ParamSet* params_;
  std::unordered_map<std::string, NodeId> ids_;
};

// Layer registration (init) + forward helpers. Prefixes name the layer in the
// ParamSet: "<prefix>.w", "<prefix>.b", "<prefix>.g".
void add_linear(ParamSet& ps, const std::string& prefix, int64_t in, int64_t out, Rng& rng);
NodeId linear(Tape& t, const Binding& b, const std::string& prefix, NodeId x);

void add_conv1d(ParamSet& ps, const std::string& prefix, int64_t k, int64_t cin, int64_t cout,
                Rng& rng);
NodeId conv1d(Tape& t, const Binding& b, const std::string& prefix, NodeId x, int64_t stride = 1,
              int64_t pad = 1);
NodeId conv1d_transpose(Tape& t, const Binding& b, const std::string& prefix, NodeId x,
                        int64_t stride = 1, int64_t pad = 1);

void add_layer_norm(ParamSet& ps, const std::string& prefix, int64_t dim);
NodeId layer_norm(Tape& t, const Binding& b, const std::string& prefix, NodeId x);

}  // namespace motionact::nn
