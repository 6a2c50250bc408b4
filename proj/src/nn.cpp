#include "motionact/nn.hpp"

#include <cmath>

namespace motionact::nn {

Tensor& ParamSet::add(const std::string& name, Tensor init) {
  if (index_.count(name)) fail("param '" + name + "' already registered");
  index_[name] = params_.size();
  params_.push_back(Param{name, std::move(init), AdamState{}});
  return params_.back().value;
}

Tensor* ParamSet::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second].value;
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail("param '" + name + "' not found");
  return params_[it->second].value;
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

Binding::Binding(Tape& tape, ParamSet& params) : tape_(&tape), params_(&params) {
  for (auto& p : params.entries()) ids_[p.name] = tape.leaf(p.value);
}

NodeId Binding::operator[](const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) fail("binding: param '" + name + "' not bound");
  return it->second;
}

void Binding::apply_adam(const AdamConfig& cfg) {
  for (auto& p : params_->entries()) adam_step(p.value, tape_->grad(ids_[p.name]), p.opt, cfg);
}

void add_linear(ParamSet& ps, const std::string& prefix, int64_t in, int64_t out, Rng& rng) {
  ps.add(prefix + ".w", rng.normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in))));
  ps.add(prefix + ".b", Tensor({out}));
}

NodeId linear(Tape& t, const Binding& b, const std::string& prefix, NodeId x) {
  return t.add_rowvec(t.matmul(x, b[prefix + ".w"]), b[prefix + ".b"]);
}

void add_conv1d(ParamSet& ps, const std::string& prefix, int64_t k, int64_t cin, int64_t cout,
                Rng& rng) {
  ps.add(prefix + ".w",
         rng.normal_tensor({k, cin, cout}, 1.0 / std::sqrt(static_cast<double>(k * cin))));
  ps.add(prefix + ".b", Tensor({cout}));
}

NodeId conv1d(Tape& t, const Binding& b, const std::string& prefix, NodeId x, int64_t stride,
              int64_t pad) {
  return t.conv1d(x, b[prefix + ".w"], b[prefix + ".b"], stride, pad);
}

NodeId conv1d_transpose(Tape& t, const Binding& b, const std::string& prefix, NodeId x,
                        int64_t stride, int64_t pad) {
  return t.conv1d_transpose(x, b[prefix + ".w"], b[prefix + ".b"], stride, pad);
}

void add_layer_norm(ParamSet& ps, const std::string& prefix, int64_t dim) {
  ps.add(prefix + ".g", Tensor({dim}, 1.0));
  ps.add(prefix + ".b", Tensor({dim}));
}

NodeId layer_norm(Tape& t, const Binding& b, const std::string& prefix, NodeId x) {
  return t.layer_norm_rows(x, b[prefix + ".g"], b[prefix + ".b"]);
}

}  // namespace motionact::nn
