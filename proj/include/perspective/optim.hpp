#pragma once

#include <cstdint>
#include <string>

#include "perspective/tensor.hpp"

namespace perspective {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// Bias-corrected Adam. Moments are keyed by parameter name, so the update
/// does not depend on the order of the gradient set.
template <typename T>
class Adam {
 public:
  Adam(AdamConfig config, const ParamSet<T>& like);

  void step(ParamSet<T>& params, const ParamSet<T>& grads);

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return t_; }
  const ParamSet<T>& first_moment() const { return m_; }
  const ParamSet<T>& second_moment() const { return v_; }

  /// Restores moments and the step count, e.g. from a checkpoint.
  void restore(ParamSet<T> m, ParamSet<T> v, std::int64_t steps);

 private:
  AdamConfig config_;
  ParamSet<T> m_;
  ParamSet<T> v_;
  std::int64_t t_ = 0;
};

enum class ClipMode { GlobalNorm, Value };

const char* to_string(ClipMode m);
ClipMode parse_clip_mode(const std::string& s);

template <typename T>
double global_norm(const ParamSet<T>& grads);

/// GlobalNorm rescales every gradient by threshold/norm when the joint L2
/// norm exceeds the threshold. Value clamps each element to [-threshold, threshold].
/// Returns the norm before clipping.
template <typename T>
double clip_gradients(ParamSet<T>& grads, double threshold, ClipMode mode = ClipMode::GlobalNorm);

}  // namespace perspective
