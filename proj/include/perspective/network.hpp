#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/autograd.hpp"
#include "perspective/percept.hpp"
#include "perspective/rng.hpp"
#include "perspective/tensor.hpp"

namespace perspective {

enum class HeadKind { Dueling, Logits };

/// Layer sizes and options for the controller network:
/// conv -> flatten -> concat(orientations) -> dense -> dense -> [LSTM] -> head.
struct NetworkSpec {
  ObservationShape input;
  int conv_filters = 6;
  int kernel = 3;
  ad::Padding padding = ad::Padding::Valid;
  ad::Activation conv_activation = ad::Activation::Relu;
  int dense1 = 32;
  int dense2 = 32;
  ad::Activation dense_activation = ad::Activation::Relu;
  /// Zero removes the recurrent layer.
  int lstm_cells = 128;
  HeadKind head = HeadKind::Dueling;
  /// Actions for a dueling head, classes for a logits head.
  int outputs = kActionCount;
  double forget_bias = 1.0;

  static NetworkSpec q_network(VisualMode vision, int side);
  /// Same trunk without the LSTM and with a two-class logits head.
  static NetworkSpec classifier(VisualMode vision, int side);

  int conv_rows() const;
  int conv_cols() const;
  int flatten_size() const { return conv_filters * conv_rows() * conv_cols(); }
  int merge_size() const { return flatten_size() + input.orientation_dim; }
  int trunk_size() const { return lstm_cells > 0 ? lstm_cells : dense2; }

  /// Closed-form parameter count.
  std::size_t parameter_count() const;
  /// Throws ConfigError for impossible layer sizes.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

void to_json(nlohmann::json& j, const NetworkSpec& s);
void update_from_json(const nlohmann::json& j, NetworkSpec& s);

struct ParamLayout {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;  // zero for biases
  int fan_out = 0;
};

/// Parameter names and shapes in their fixed order.
std::vector<ParamLayout> param_layout(const NetworkSpec& spec);
/// Throws ShapeError unless `actual` matches param_layout(spec) exactly.
void check_param_layout(const NetworkSpec& spec, const std::vector<std::pair<std::string, std::vector<int>>>& actual);

/// Fan-in scaled uniform initialisation: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero except the LSTM forget gate.
template <typename T>
ParamSet<T> init_params(const NetworkSpec& spec, Rng& rng);

/// Layer names exposed for probing, in network order.
inline constexpr std::array<const char*, 8> kLayerTaps = {"Input", "flatten", "merge", "FC_1",
                                                         "FC_2",  "LSTM",    "FC_3",  "output"};

template <typename T>
struct RecurrentVars {
  ad::Var<T> hidden;
  ad::Var<T> cell;
};

/// Everything one forward step produces. `heads` is [advantage | value] for a
/// dueling network and the logits for a classifier.
template <typename T>
struct StepVars {
  ad::Var<T> input;
  ad::Var<T> flatten;
  ad::Var<T> merge;
  ad::Var<T> fc1;
  ad::Var<T> fc2;
  ad::Var<T> lstm;
  ad::Var<T> value;
  ad::Var<T> advantage;
  ad::Var<T> heads;
  ad::Var<T> output;
  RecurrentVars<T> state;

  /// Tap by index into kLayerTaps; LSTM falls back to FC_2 without a recurrent layer.
  ad::Var<T> tap(std::size_t layer) const;
};

/// Parameters placed on a tape, ready to run forward steps.
template <typename T>
class BoundNetwork {
 public:
  BoundNetwork(const NetworkSpec& spec, const ParamSet<T>& params, ad::Tape<T>& tape);

  /// maps [B x C x H x W], orientations [B x D].
  StepVars<T> step(ad::Var<T> maps, ad::Var<T> orientations, const RecurrentVars<T>& state,
                   bool with_taps = false);
  RecurrentVars<T> zero_state(int batch);

  /// Adds the tape's parameter gradients into `grads` (same layout as params).
  void accumulate_gradients(ParamSet<T>& grads) const;

  const NetworkSpec& spec() const { return spec_; }
  ad::Tape<T>& tape() { return tape_; }

 private:
  ad::Var<T> param(const std::string& name) const;

  NetworkSpec spec_;
  ad::Tape<T>& tape_;
  std::vector<std::pair<std::string, ad::Var<T>>> vars_;
};

/// Packs observations into batch tensors.
template <typename T>
Tensor<T> maps_tensor(const std::vector<const Observation*>& batch, const ObservationShape& shape);
template <typename T>
Tensor<T> orientations_tensor(const std::vector<const Observation*>& batch, const ObservationShape& shape);

}  // namespace perspective
