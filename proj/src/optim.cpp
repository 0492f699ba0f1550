#include "perspective/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace perspective {

template <typename T>
Adam<T>::Adam(AdamConfig config, const ParamSet<T>& like)
    : config_(config), m_(like.zeros_like()), v_(like.zeros_like()) {}

template <typename T>
void Adam<T>::step(ParamSet<T>& params, const ParamSet<T>& grads) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  for (auto& [name, p] : params) {
    const Tensor<T>& g = grads.at(name);
    Tensor<T>& m = m_.at(name);
    Tensor<T>& v = v_.at(name);
    if (!g.same_shape(p) || !m.same_shape(p)) throw ShapeError("adam: shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
  }
}

template <typename T>
void Adam<T>::restore(ParamSet<T> m, ParamSet<T> v, std::int64_t steps) {
  m.check_compatible(m_);
  v.check_compatible(v_);
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = steps;
}

const char* to_string(ClipMode m) { return m == ClipMode::GlobalNorm ? "global_norm" : "value"; }

ClipMode parse_clip_mode(const std::string& s) {
  if (s == "global_norm") return ClipMode::GlobalNorm;
  if (s == "value") return ClipMode::Value;
  throw std::invalid_argument("unknown clip mode '" + s + "'");
}

template <typename T>
double global_norm(const ParamSet<T>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (T v : g.values()) sq += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sq);
}

template <typename T>
double clip_gradients(ParamSet<T>& grads, double threshold, ClipMode mode) {
  const double norm = global_norm(grads);
  if (mode == ClipMode::GlobalNorm) {
    if (norm > threshold) {
      const double factor = threshold / norm;
      for (auto& [name, g] : grads)
        for (T& v : g.values()) v = static_cast<T>(static_cast<double>(v) * factor);
    }
  } else {
    const T hi = static_cast<T>(threshold);
    for (auto& [name, g] : grads)
      for (T& v : g.values()) v = std::clamp(v, -hi, hi);
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double global_norm<float>(const ParamSet<float>&);
template double global_norm<double>(const ParamSet<double>&);
template double clip_gradients<float>(ParamSet<float>&, double, ClipMode);
template double clip_gradients<double>(ParamSet<double>&, double, ClipMode);

}  // namespace perspective
