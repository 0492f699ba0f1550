#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/analysis.hpp"
#include "perspective/network.hpp"

namespace perspective {

class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbeOptions {
  double train_fraction = 0.8;
  /// Independent random splits averaged per layer.
  int repeats = 20;
  double ridge = 1e-3;
  /// Subsample the majority class so chance level is exactly one half.
  bool balance = true;
  /// Permute the labels afresh for every repeat (chance-level control).
  bool shuffle_labels = false;
  std::uint64_t seed = 0;
  bool operator==(const ProbeOptions&) const = default;
};

void to_json(nlohmann::json& j, const ProbeOptions& o);
void update_from_json(const nlohmann::json& j, ProbeOptions& o);

/// Activations [samples x features] for each entry of kLayerTaps, taken at
/// the first step of an episode from a zero LSTM state.
std::vector<Tensor<float>> layer_activations(const NetworkSpec& spec, const ParamSet<float>& params,
                                             VisualMode vision, const WorldConfig& world,
                                             const std::vector<InitialConfig>& configs);

/// Two-class linear discriminant with pooled covariance. Constant features
/// are dropped and the rest standardised before adding `ridge` to the diagonal.
class LinearDiscriminant {
 public:
  /// Throws ProbeError when the training rows hold a single class.
  void fit(const Tensor<float>& x, const std::vector<int>& labels, const std::vector<std::size_t>& rows,
           double ridge);
  int predict(const float* row) const;
  double accuracy(const Tensor<float>& x, const std::vector<int>& labels,
                  const std::vector<std::size_t>& rows) const;

 private:
  std::vector<std::size_t> kept_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

struct LayerAccuracy {
  std::string layer;
  int features = 0;
  double accuracy = 0.0;
  double sem = 0.0;
};

struct ProbeReport {
  bool shuffled = false;
  std::size_t samples = 0;
  std::vector<LayerAccuracy> layers;

  /// Index into `layers` of the best layer; the first one on ties.
  std::size_t argmax() const;
};

/// Held-out accuracy of one probe per layer.
ProbeReport probe_layers(const std::vector<Tensor<float>>& activations, const std::vector<int>& labels,
                         const ProbeOptions& options);
ProbeReport probe_layers(const NetworkSpec& spec, const ParamSet<float>& params, VisualMode vision,
                         const WorldConfig& world, const ProbeOptions& options);

nlohmann::json to_json(const ProbeReport& r);
std::string to_csv(const ProbeReport& r);

}  // namespace perspective
