#include "perspective/network.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/QR>

namespace perspective {

NetworkSpec NetworkSpec::q_network(VisualMode vision, int side) {
  NetworkSpec s;
  s.input = observation_shape(vision, side);
  return s;
}

NetworkSpec NetworkSpec::classifier(VisualMode vision, int side) {
  NetworkSpec s;
  s.input = observation_shape(vision, side);
  s.lstm_cells = 0;
  s.head = HeadKind::Logits;
  s.outputs = 2;
  return s;
}

int NetworkSpec::conv_rows() const {
  return padding == ad::Padding::Same ? input.rows : input.rows - kernel + 1;
}

int NetworkSpec::conv_cols() const {
  return padding == ad::Padding::Same ? input.cols : input.cols - kernel + 1;
}

void NetworkSpec::validate() const {
  if (input.channels < 1 || input.rows < 1 || input.cols < 1) throw ConfigError("network: empty input shape");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("network: kernel size must be odd and positive");
  if (conv_rows() < 1 || conv_cols() < 1) throw ConfigError("network: input smaller than the kernel");
  if (conv_filters < 1 || dense1 < 1 || dense2 < 1 || lstm_cells < 0 || outputs < 1)
    throw ConfigError("network: layer sizes must be positive");
  if (head == HeadKind::Logits && outputs < 2) throw ConfigError("network: a classifier needs two classes");
}

std::size_t NetworkSpec::parameter_count() const {
  auto dense = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t n = static_cast<std::size_t>(conv_filters) * (input.channels * kernel * kernel + 1);
  n += dense(static_cast<std::size_t>(merge_size()), static_cast<std::size_t>(dense1));
  n += dense(static_cast<std::size_t>(dense1), static_cast<std::size_t>(dense2));
  if (lstm_cells > 0) n += dense(static_cast<std::size_t>(dense2 + lstm_cells), 4 * static_cast<std::size_t>(lstm_cells));
  const auto trunk = static_cast<std::size_t>(trunk_size());
  if (head == HeadKind::Dueling)
    n += dense(trunk, static_cast<std::size_t>(outputs)) + dense(trunk, 1);
  else
    n += dense(trunk, static_cast<std::size_t>(outputs));
  return n;
}

void to_json(nlohmann::json& j, const NetworkSpec& s) {
  j = nlohmann::json{{"input", {s.input.channels, s.input.rows, s.input.cols, s.input.orientation_dim}},
                     {"conv_filters", s.conv_filters},
                     {"kernel", s.kernel},
                     {"padding", ad::to_string(s.padding)},
                     {"conv_activation", ad::to_string(s.conv_activation)},
                     {"dense1", s.dense1},
                     {"dense2", s.dense2},
                     {"dense_activation", ad::to_string(s.dense_activation)},
                     {"lstm_cells", s.lstm_cells},
                     {"head", s.head == HeadKind::Dueling ? "dueling" : "logits"},
                     {"outputs", s.outputs},
                     {"forget_bias", s.forget_bias}};
}

void update_from_json(const nlohmann::json& j, NetworkSpec& s) {
  if (!j.is_object()) throw ConfigError("network: expected an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "input") {
        auto d = v.get<std::vector<int>>();
        if (d.size() != 4) throw ConfigError("network.input: expected [channels, rows, cols, orientation_dim]");
        s.input = {d[0], d[1], d[2], d[3]};
      } else if (key == "conv_filters") s.conv_filters = v.get<int>();
      else if (key == "kernel") s.kernel = v.get<int>();
      else if (key == "padding") s.padding = ad::parse_padding(v.get<std::string>());
      else if (key == "conv_activation") s.conv_activation = ad::parse_activation(v.get<std::string>());
      else if (key == "dense1") s.dense1 = v.get<int>();
      else if (key == "dense2") s.dense2 = v.get<int>();
      else if (key == "dense_activation") s.dense_activation = ad::parse_activation(v.get<std::string>());
      else if (key == "lstm_cells") s.lstm_cells = v.get<int>();
      else if (key == "head") {
        const auto h = v.get<std::string>();
        if (h == "dueling") s.head = HeadKind::Dueling;
        else if (h == "logits") s.head = HeadKind::Logits;
        else throw ConfigError("network.head: unknown head '" + h + "'");
      } else if (key == "outputs") s.outputs = v.get<int>();
      else if (key == "forget_bias") s.forget_bias = v.get<double>();
      else throw ConfigError("unknown key network." + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("network." + key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("network." + key + ": " + e.what());
    }
  }
}

std::vector<ParamLayout> param_layout(const NetworkSpec& spec) {
  spec.validate();
  const int C = spec.input.channels, K = spec.kernel, F = spec.conv_filters;
  const int trunk = spec.trunk_size();
  std::vector<ParamLayout> l = {
      {"conv.kernel", {F, C, K, K}, C * K * K, F * K * K},
      {"conv.bias", {F}, 0, 0},
      {"fc1.w", {spec.merge_size(), spec.dense1}, spec.merge_size(), spec.dense1},
      {"fc1.b", {spec.dense1}, 0, 0},
      {"fc2.w", {spec.dense1, spec.dense2}, spec.dense1, spec.dense2},
      {"fc2.b", {spec.dense2}, 0, 0},
  };
  if (spec.lstm_cells > 0) {
    const int H = spec.lstm_cells;
    // Input rows then recurrent rows; only the input block is Glorot-scaled.
    l.push_back({"lstm.w", {spec.dense2 + H, 4 * H}, spec.dense2, 4 * H});
    l.push_back({"lstm.b", {4 * H}, 0, 0});
  }
  if (spec.head == HeadKind::Dueling) {
    l.push_back({"advantage.w", {trunk, spec.outputs}, trunk, spec.outputs});
    l.push_back({"advantage.b", {spec.outputs}, 0, 0});
    l.push_back({"value.w", {trunk, 1}, trunk, 1});
    l.push_back({"value.b", {1}, 0, 0});
  } else {
    l.push_back({"logits.w", {trunk, spec.outputs}, trunk, spec.outputs});
    l.push_back({"logits.b", {spec.outputs}, 0, 0});
  }
  return l;
}

void check_param_layout(const NetworkSpec& spec, const std::vector<std::pair<std::string, std::vector<int>>>& actual) {
  const auto layout = param_layout(spec);
  if (layout.size() != actual.size())
    throw ShapeError("network expects " + std::to_string(layout.size()) + " parameter tensors, got " +
                     std::to_string(actual.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].name != actual[i].first)
      throw ShapeError("parameter " + std::to_string(i) + " is '" + actual[i].first + "', expected '" +
                       layout[i].name + "'");
    if (layout[i].shape != actual[i].second)
      throw ShapeError("parameter '" + layout[i].name + "' has shape " + shape_string(actual[i].second) +
                       ", expected " + shape_string(layout[i].shape));
  }
}

namespace {

double standard_normal(Rng& rng) {
  const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// rows x cols with orthonormal rows (rows <= cols): QR of a Gaussian matrix,
// signs fixed by diag(R) so the result is uniformly distributed.
Eigen::MatrixXd orthogonal_rows(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd a(cols, rows);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = standard_normal(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  for (int j = 0; j < rows; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q.transpose();
}

}  // namespace

template <typename T>
ParamSet<T> init_params(const NetworkSpec& spec, Rng& rng) {
  ParamSet<T> p;
  for (const ParamLayout& entry : param_layout(spec)) {
    Tensor<T> t(entry.shape);
    if (entry.fan_in > 0) {
      const double limit = std::sqrt(6.0 / static_cast<double>(entry.fan_in + entry.fan_out));
      const bool lstm = entry.name == "lstm.w";
      const std::size_t glorot = lstm ? static_cast<std::size_t>(entry.fan_in * entry.fan_out) : t.size();
      for (std::size_t i = 0; i < glorot; ++i) t[i] = static_cast<T>(rng.uniform(-limit, limit));
      if (lstm) {
        const int H = spec.lstm_cells;
        const Eigen::MatrixXd rec = orthogonal_rows(H, 4 * H, rng);
        for (int r = 0; r < H; ++r)
          for (int c = 0; c < 4 * H; ++c)
            t[glorot + static_cast<std::size_t>(r * 4 * H + c)] = static_cast<T>(rec(r, c));
      }
    } else if (entry.name == "lstm.b") {
      const int H = spec.lstm_cells;
      for (int i = H; i < 2 * H; ++i) t[static_cast<std::size_t>(i)] = static_cast<T>(spec.forget_bias);
    }
    p.add(entry.name, std::move(t));
  }
  return p;
}

template <typename T>
ad::Var<T> StepVars<T>::tap(std::size_t layer) const {
  switch (layer) {
    case 0: return input;
    case 1: return flatten;
    case 2: return merge;
    case 3: return fc1;
    case 4: return fc2;
    case 5: return lstm.valid() ? lstm : fc2;
    case 6: return heads;
    case 7: return output;
  }
  throw std::out_of_range("no layer tap " + std::to_string(layer));
}

template <typename T>
BoundNetwork<T>::BoundNetwork(const NetworkSpec& spec, const ParamSet<T>& params, ad::Tape<T>& tape)
    : spec_(spec), tape_(tape) {
  std::vector<std::pair<std::string, std::vector<int>>> actual;
  for (const auto& [name, t] : params) actual.emplace_back(name, t.shape());
  check_param_layout(spec_, actual);
  for (const auto& [name, t] : params) vars_.emplace_back(name, tape_.leaf(t));
}

template <typename T>
ad::Var<T> BoundNetwork<T>::param(const std::string& name) const {
  for (const auto& [n, v] : vars_)
    if (n == name) return v;
  throw std::out_of_range("no parameter '" + name + "'");
}

template <typename T>
RecurrentVars<T> BoundNetwork<T>::zero_state(int batch) {
  const int H = std::max(spec_.lstm_cells, 1);
  return {tape_.constant(Tensor<T>({batch, H})), tape_.constant(Tensor<T>({batch, H}))};
}

template <typename T>
StepVars<T> BoundNetwork<T>::step(ad::Var<T> maps, ad::Var<T> orientations, const RecurrentVars<T>& state,
                                  bool with_taps) {
  using namespace ad;
  const int batch = maps.value().dim(0);
  if (maps.value().rank() != 4 || maps.value().dim(1) != spec_.input.channels ||
      maps.value().dim(2) != spec_.input.rows || maps.value().dim(3) != spec_.input.cols)
    throw ShapeError("network input " + shape_string(maps.value().shape()) + " does not match the network");
  if (orientations.value().rank() != 2 || orientations.value().dim(1) != spec_.input.orientation_dim)
    throw ShapeError("orientation input " + shape_string(orientations.value().shape()) + " does not match the network");

  StepVars<T> out;
  if (with_taps)
    out.input = concat_cols(reshape(maps, {batch, static_cast<int>(spec_.input.map_size())}), orientations);
  Var<T> conv = activate(conv2d(maps, param("conv.kernel"), param("conv.bias"), spec_.padding), spec_.conv_activation);
  out.flatten = reshape(conv, {batch, spec_.flatten_size()});
  out.merge = concat_cols(out.flatten, orientations);
  out.fc1 = activate(add_bias(matmul(out.merge, param("fc1.w")), param("fc1.b")), spec_.dense_activation);
  out.fc2 = activate(add_bias(matmul(out.fc1, param("fc2.w")), param("fc2.b")), spec_.dense_activation);

  Var<T> trunk = out.fc2;
  if (spec_.lstm_cells > 0) {
    const int H = spec_.lstm_cells;
    Var<T> z = add_bias(matmul(concat_cols(out.fc2, state.hidden), param("lstm.w")), param("lstm.b"));
    Var<T> in_gate = sigmoid(slice_cols(z, 0, H));
    Var<T> forget_gate = sigmoid(slice_cols(z, H, H));
    Var<T> candidate = tanh(slice_cols(z, 2 * H, H));
    Var<T> out_gate = sigmoid(slice_cols(z, 3 * H, H));
    Var<T> cell = add(mul(forget_gate, state.cell), mul(in_gate, candidate));
    Var<T> hidden = mul(out_gate, tanh(cell));
    out.state = {hidden, cell};
    out.lstm = hidden;
    trunk = hidden;
  } else {
    out.state = state;
  }

  if (spec_.head == HeadKind::Dueling) {
    out.advantage = add_bias(matmul(trunk, param("advantage.w")), param("advantage.b"));
    out.value = add_bias(matmul(trunk, param("value.w")), param("value.b"));
    if (with_taps) out.heads = concat_cols(out.advantage, out.value);
    out.output = dueling(out.value, out.advantage);
  } else {
    out.heads = add_bias(matmul(trunk, param("logits.w")), param("logits.b"));
    out.output = out.heads;
  }
  return out;
}

template <typename T>
void BoundNetwork<T>::accumulate_gradients(ParamSet<T>& grads) const {
  for (const auto& [name, v] : vars_) {
    if (!tape_.has_grad(v.id)) continue;
    Tensor<T>& g = grads.at(name);
    const Tensor<T>& src = tape_.grad(v.id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
  }
}

template <typename T>
Tensor<T> maps_tensor(const std::vector<const Observation*>& batch, const ObservationShape& shape) {
  const std::size_t n = shape.map_size();
  Tensor<T> t({static_cast<int>(batch.size()), shape.channels, shape.rows, shape.cols});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (!batch[b]) continue;
    if (batch[b]->shape != shape) throw ShapeError("observation shape does not match the network input");
    const auto& m = batch[b]->maps;
    T* dst = t.data() + b * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(m[i]);
  }
  return t;
}

template <typename T>
Tensor<T> orientations_tensor(const std::vector<const Observation*>& batch, const ObservationShape& shape) {
  const auto d = static_cast<std::size_t>(shape.orientation_dim);
  Tensor<T> t({static_cast<int>(batch.size()), shape.orientation_dim});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (!batch[b]) continue;
    for (std::size_t i = 0; i < d; ++i) t[b * d + i] = static_cast<T>(batch[b]->orientations[i]);
  }
  return t;
}

template ParamSet<float> init_params<float>(const NetworkSpec&, Rng&);
template ParamSet<double> init_params<double>(const NetworkSpec&, Rng&);
template struct StepVars<float>;
template struct StepVars<double>;
template class BoundNetwork<float>;
template class BoundNetwork<double>;
template Tensor<float> maps_tensor<float>(const std::vector<const Observation*>&, const ObservationShape&);
template Tensor<double> maps_tensor<double>(const std::vector<const Observation*>&, const ObservationShape&);
template Tensor<float> orientations_tensor<float>(const std::vector<const Observation*>&, const ObservationShape&);
template Tensor<double> orientations_tensor<double>(const std::vector<const Observation*>&, const ObservationShape&);

}  // namespace perspective
