#include "perspective/qagent.hpp"

#include <algorithm>
#include <stdexcept>

namespace perspective {

template <typename T>
std::vector<T> dueling_q(T value, std::span<const T> advantage) {
  if (advantage.empty()) throw std::invalid_argument("dueling_q: no actions");
  const T top = *std::max_element(advantage.begin(), advantage.end());
  std::vector<T> q(advantage.size());
  for (std::size_t a = 0; a < advantage.size(); ++a) q[a] = value + (advantage[a] - top);
  return q;
}

template <typename T>
int greedy_action(std::span<const T> q) {
  if (q.empty()) throw std::invalid_argument("greedy_action: no actions");
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

template <typename T>
QOutput<T> q_values(const NetworkSpec& spec, const ParamSet<T>& params, const Observation& obs,
                    const LstmState<T>& state) {
  if (obs.shape != spec.input) throw ShapeError("observation does not match the network's vision mode");
  if (spec.head != HeadKind::Dueling) throw std::invalid_argument("q_values needs a dueling network");
  ad::Tape<T> tape(false);
  BoundNetwork<T> net(spec, params, tape);
  const std::vector<const Observation*> one{&obs};
  const int H = std::max(spec.lstm_cells, 1);
  RecurrentVars<T> rec{tape.constant(Tensor<T>({1, H}, state.hidden)), tape.constant(Tensor<T>({1, H}, state.cell))};
  StepVars<T> s = net.step(tape.constant(maps_tensor<T>(one, spec.input)),
                           tape.constant(orientations_tensor<T>(one, spec.input)), rec);
  QOutput<T> out;
  const auto& q = s.output.value();
  out.q.assign(q.data(), q.data() + q.size());
  const auto& a = s.advantage.value();
  out.advantage.assign(a.data(), a.data() + a.size());
  out.value = s.value.value()[0];
  const auto& h = s.state.hidden.value();
  const auto& c = s.state.cell.value();
  out.state.hidden.assign(h.data(), h.data() + h.size());
  out.state.cell.assign(c.data(), c.data() + c.size());
  return out;
}

template <typename T>
void soft_update(ParamSet<T>& target, const ParamSet<T>& source, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  target.check_compatible(source);
  for (std::size_t k = 0; k < target.size(); ++k) {
    Tensor<T>& t = target.entries()[k].second;
    const Tensor<T>& s = source.entries()[k].second;
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<T>(static_cast<double>(s[i]) * tau + static_cast<double>(t[i]) * (1.0 - tau));
  }
}

template <typename T>
Tensor<T> batch_maps(const PaddedBatch& batch, int t) {
  const std::size_t ms = batch.shape.map_size();
  Tensor<T> m({batch.batch, batch.shape.channels, batch.shape.rows, batch.shape.cols});
  const std::uint8_t* src = batch.maps.data() + batch.at(t, 0) * ms;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<T>(src[i]);
  return m;
}

template <typename T>
Tensor<T> batch_orientations(const PaddedBatch& batch, int t) {
  const auto od = static_cast<std::size_t>(batch.shape.orientation_dim);
  Tensor<T> o({batch.batch, batch.shape.orientation_dim});
  const std::uint8_t* src = batch.orientations.data() + batch.at(t, 0) * od;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<T>(src[i]);
  return o;
}

namespace {

// Step t of the rows order[0..n), which must all be real (unpadded) steps.
template <typename T>
void active_inputs(const PaddedBatch& batch, int t, const std::vector<int>& order, int n, Tensor<T>& maps,
                   Tensor<T>& orientations) {
  const std::size_t ms = batch.shape.map_size();
  const auto od = static_cast<std::size_t>(batch.shape.orientation_dim);
  maps = Tensor<T>({n, batch.shape.channels, batch.shape.rows, batch.shape.cols});
  orientations = Tensor<T>({n, batch.shape.orientation_dim});
  for (int k = 0; k < n; ++k) {
    const std::size_t i = batch.at(t, order[static_cast<std::size_t>(k)]);
    const std::uint8_t* m = batch.maps.data() + i * ms;
    T* dst = maps.data() + static_cast<std::size_t>(k) * ms;
    for (std::size_t e = 0; e < ms; ++e) dst[e] = static_cast<T>(m[e]);
    const std::uint8_t* o = batch.orientations.data() + i * od;
    for (std::size_t e = 0; e < od; ++e) orientations[static_cast<std::size_t>(k) * od + e] = static_cast<T>(o[e]);
  }
}

template <typename T>
RecurrentVars<T> keep_rows(const RecurrentVars<T>& s, int n) {
  if (s.hidden.value().dim(0) == n) return s;
  return {ad::slice_rows(s.hidden, 0, n), ad::slice_rows(s.cell, 0, n)};
}

}  // namespace

template <typename T>
LossResult<T> q_learning_loss(const PaddedBatch& batch, const NetworkSpec& spec, const ParamSet<T>& online,
                              const ParamSet<T>& target, const TdConfig& td) {
  if (batch.batch == 0 || batch.lengths.empty()) throw std::invalid_argument("q_learning_loss: empty batch");
  if (batch.shape != spec.input) throw ShapeError("q_learning_loss: batch does not match the network input");
  const int B = batch.batch;
  const int L = batch.max_length();

  std::size_t count = 0;
  for (std::uint8_t m : batch.mask) count += m;
  if (count == 0) throw std::invalid_argument("q_learning_loss: batch has no unmasked steps");

  // Rows sorted by decreasing length, so the rows still running at step t are
  // a prefix and padded steps are never computed. Their loss weight is zero
  // and they cannot influence earlier steps, so the result is unchanged.
  std::vector<int> order(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) order[static_cast<std::size_t>(b)] = b;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return batch.lengths[static_cast<std::size_t>(a)] > batch.lengths[static_cast<std::size_t>(b)];
  });
  std::vector<int> active(static_cast<std::size_t>(L), 0);
  for (int t = 0; t < L; ++t)
    for (int b = 0; b < B; ++b) active[static_cast<std::size_t>(t)] += batch.lengths[static_cast<std::size_t>(b)] > t;

  // Bootstrap values from the target network, unrolled over the same steps.
  // next_max[t * B + k] belongs to sorted row k.
  std::vector<T> next_max(static_cast<std::size_t>(L * B), T(0));
  {
    ad::Tape<T> tape(false);
    BoundNetwork<T> net(spec, target, tape);
    RecurrentVars<T> state = net.zero_state(active[0]);
    for (int t = 0; t < L; ++t) {
      const int n = active[static_cast<std::size_t>(t)];
      Tensor<T> maps, orientations;
      active_inputs(batch, t, order, n, maps, orientations);
      StepVars<T> s = net.step(tape.constant(std::move(maps)), tape.constant(std::move(orientations)),
                               keep_rows(state, n));
      state = s.state;
      if (t == 0) continue;
      const Tensor<T>& q = s.output.value();
      for (int k = 0; k < n; ++k) {
        const T* row = q.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(spec.outputs);
        next_max[static_cast<std::size_t>((t - 1) * B + k)] = *std::max_element(row, row + spec.outputs);
      }
    }
  }

  ad::Tape<T> tape(true);
  BoundNetwork<T> net(spec, online, tape);
  RecurrentVars<T> state = net.zero_state(active[0]);
  const T inv = T(1) / static_cast<T>(count);
  ad::Var<T> total;
  for (int t = 0; t < L; ++t) {
    const int n = active[static_cast<std::size_t>(t)];
    Tensor<T> maps, orientations;
    active_inputs(batch, t, order, n, maps, orientations);
    StepVars<T> s = net.step(tape.constant(std::move(maps)), tape.constant(std::move(orientations)),
                             keep_rows(state, n));
    state = s.state;
    std::vector<int> actions(static_cast<std::size_t>(n));
    std::vector<T> y(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n), inv);
    for (int k = 0; k < n; ++k) {
      const int b = order[static_cast<std::size_t>(k)];
      const std::size_t i = batch.at(t, b);
      actions[static_cast<std::size_t>(k)] = batch.actions[i];
      double target_value = td.reward_scale * batch.rewards[i];
      const bool last = t + 1 >= batch.lengths[static_cast<std::size_t>(b)];
      if (!batch.terminals[i] && !last)
        target_value += td.gamma * static_cast<double>(next_max[static_cast<std::size_t>(t * B + k)]);
      y[static_cast<std::size_t>(k)] = static_cast<T>(target_value);
    }
    ad::Var<T> pred = ad::gather_cols(s.output, std::span<const int>(actions));
    ad::Var<T> term = ad::weighted_squared_error(pred, std::span<const T>(y), std::span<const T>(w));
    total = total.valid() ? ad::add(total, term) : term;
  }
  tape.backward(total);

  LossResult<T> out;
  out.loss = static_cast<double>(total.value()[0]);
  out.grads = online.zeros_like();
  net.accumulate_gradients(out.grads);
  out.steps = count;
  return out;
}

template std::vector<float> dueling_q<float>(float, std::span<const float>);
template std::vector<double> dueling_q<double>(double, std::span<const double>);
template int greedy_action<float>(std::span<const float>);
template int greedy_action<double>(std::span<const double>);
template QOutput<float> q_values<float>(const NetworkSpec&, const ParamSet<float>&, const Observation&,
                                        const LstmState<float>&);
template QOutput<double> q_values<double>(const NetworkSpec&, const ParamSet<double>&, const Observation&,
                                          const LstmState<double>&);
template void soft_update<float>(ParamSet<float>&, const ParamSet<float>&, double);
template void soft_update<double>(ParamSet<double>&, const ParamSet<double>&, double);
template Tensor<float> batch_maps<float>(const PaddedBatch&, int);
template Tensor<double> batch_maps<double>(const PaddedBatch&, int);
template Tensor<float> batch_orientations<float>(const PaddedBatch&, int);
template Tensor<double> batch_orientations<double>(const PaddedBatch&, int);
template LossResult<float> q_learning_loss<float>(const PaddedBatch&, const NetworkSpec&, const ParamSet<float>&,
                                                  const ParamSet<float>&, const TdConfig&);
template LossResult<double> q_learning_loss<double>(const PaddedBatch&, const NetworkSpec&, const ParamSet<double>&,
                                                    const ParamSet<double>&, const TdConfig&);

}  // namespace perspective
