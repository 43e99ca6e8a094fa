#pragma once

#include <map>
#include <string>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace amod::neural {

// Named parameter tensors. Weight tensors end in "/W" or are attention
// parameters ("/w"); bias tensors end in "/b" and are exempt from L2.
class ParameterSet {
 public:
  void add(const std::string& name, Mat value);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

  const std::map<std::string, Mat>& tensors() const { return tensors_; }
  std::map<std::string, Mat>& tensors() { return tensors_; }

  bool same_shapes(const ParameterSet& other) const;

 private:
  std::map<std::string, Mat> tensors_;
};

struct Gradients {
  std::map<std::string, Mat> tensors;

  void accumulate(const std::string& name, const Mat& grad);
  void zero_like(const ParameterSet& params);
};

double global_norm(const Gradients& grads);

// Clip-by-global-norm: if ||g|| exceeds the ratio, scale every gradient by
// ratio / ||g||.
void clip_gradients(Gradients& grads, double ratio);

struct AdamState {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::map<std::string, Mat> m;
  std::map<std::string, Mat> v;
};

// Standard bias-corrected Adam update (descent direction; pass the gradient
// of the loss to be minimized).
void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state);

// coefficient * sum of squared weight entries; biases excluded.
double l2_penalty(const ParameterSet& params, double coefficient);
void add_l2_gradients(const ParameterSet& params, double coefficient, Gradients& grads);

bool is_bias_name(const std::string& name);

// Glorot-style uniform fan-in/fan-out initialization.
Mat glorot_uniform(int rows, int cols, Rng& rng);

// Checkpoint container: metadata JSON plus named tensors, persisted as
// length-prefixed binary sections with little-endian 64-bit float payloads.
struct Checkpoint {
  std::string metadata_json = "{}";
  std::map<std::string, Mat> tensors;

  void pack(const std::string& prefix, const ParameterSet& params);
  ParameterSet unpack(const std::string& prefix) const;
  void pack_adam(const std::string& prefix, const AdamState& state);
  AdamState unpack_adam(const std::string& prefix) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace amod::neural
