#include "perspective/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "perspective/train.hpp"

namespace perspective {

void to_json(nlohmann::json& j, const ProbeOptions& o) {
  j = {{"train_fraction", o.train_fraction}, {"repeats", o.repeats}, {"ridge", o.ridge},
       {"balance", o.balance},               {"shuffle_labels", o.shuffle_labels}, {"seed", o.seed}};
}

void update_from_json(const nlohmann::json& j, ProbeOptions& o) {
  if (!j.is_object()) throw ConfigError("probe: expected an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "train_fraction") o.train_fraction = v.get<double>();
      else if (key == "repeats") o.repeats = v.get<int>();
      else if (key == "ridge") o.ridge = v.get<double>();
      else if (key == "balance") o.balance = v.get<bool>();
      else if (key == "shuffle_labels") o.shuffle_labels = v.get<bool>();
      else if (key == "seed") o.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown key probe." + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("probe." + key + ": " + e.what());
    }
  }
  if (!(o.train_fraction > 0.0 && o.train_fraction < 1.0)) throw ConfigError("probe.train_fraction must lie in (0, 1)");
  if (o.repeats < 1) throw ConfigError("probe.repeats must be positive");
  if (!(o.ridge > 0.0)) throw ConfigError("probe.ridge must be positive");
}

std::vector<Tensor<float>> layer_activations(const NetworkSpec& spec, const ParamSet<float>& params,
                                             VisualMode vision, const WorldConfig& world,
                                             const std::vector<InitialConfig>& configs) {
  if (spec.input != observation_shape(vision, world.side))
    throw ShapeError("network input does not match the probed vision mode");
  std::vector<Tensor<float>> out(kLayerTaps.size());
  const int n = static_cast<int>(configs.size());
  constexpr std::size_t kChunk = 512;
  for (std::size_t begin = 0; begin < configs.size(); begin += kChunk) {
    const std::size_t end = std::min(configs.size(), begin + kChunk);
    std::vector<Observation> obs;
    obs.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) obs.push_back(encode(vision, world, configs[i].state()));
    std::vector<const Observation*> ptrs;
    for (const Observation& o : obs) ptrs.push_back(&o);
    ad::Tape<float> tape(false);
    BoundNetwork<float> net(spec, params, tape);
    const StepVars<float> s = net.step(tape.constant(maps_tensor<float>(ptrs, spec.input)),
                                       tape.constant(orientations_tensor<float>(ptrs, spec.input)),
                                       net.zero_state(static_cast<int>(ptrs.size())), true);
    for (std::size_t layer = 0; layer < kLayerTaps.size(); ++layer) {
      const Tensor<float>& v = s.tap(layer).value();
      const int d = v.dim(1);
      if (begin == 0) out[layer] = Tensor<float>({n, d});
      std::copy_n(v.data(), v.size(), out[layer].data() + begin * static_cast<std::size_t>(d));
    }
  }
  return out;
}

void LinearDiscriminant::fit(const Tensor<float>& x, const std::vector<int>& labels,
                             const std::vector<std::size_t>& rows, double ridge) {
  const int d = x.dim(1);
  std::size_t n1 = 0;
  for (std::size_t r : rows) n1 += labels[r] == 1;
  const std::size_t n0 = rows.size() - n1;
  if (n0 == 0 || n1 == 0) throw ProbeError("probe training split holds a single class");

  // Keep features that vary over the training rows, standardised.
  kept_.clear();
  mean_.clear();
  scale_.clear();
  for (int f = 0; f < d; ++f) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t r : rows) {
      const double v = x.at(static_cast<int>(r), f);
      sum += v;
      sq += v * v;
    }
    const double m = sum / static_cast<double>(rows.size());
    const double var = sq / static_cast<double>(rows.size()) - m * m;
    if (var > 1e-12) {
      kept_.push_back(static_cast<std::size_t>(f));
      mean_.push_back(m);
      scale_.push_back(1.0 / std::sqrt(var));
    }
  }
  const auto k = static_cast<Eigen::Index>(kept_.size());
  weights_.assign(kept_.size(), 0.0);
  const double prior = std::log(static_cast<double>(n1) / static_cast<double>(n0));
  if (k == 0) {
    bias_ = prior;
    return;
  }
  Eigen::MatrixXd z(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index f = 0; f < k; ++f)
      z(static_cast<Eigen::Index>(i), f) =
          (x.at(static_cast<int>(rows[i]), static_cast<int>(kept_[static_cast<std::size_t>(f)])) -
           mean_[static_cast<std::size_t>(f)]) *
          scale_[static_cast<std::size_t>(f)];
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(k), mu1 = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < rows.size(); ++i)
    (labels[rows[i]] == 1 ? mu1 : mu0) += z.row(static_cast<Eigen::Index>(i)).transpose();
  mu0 /= static_cast<double>(n0);
  mu1 /= static_cast<double>(n1);
  for (std::size_t i = 0; i < rows.size(); ++i)
    z.row(static_cast<Eigen::Index>(i)) -= (labels[rows[i]] == 1 ? mu1 : mu0).transpose();
  Eigen::MatrixXd cov = z.transpose() * z / std::max<double>(1.0, static_cast<double>(rows.size()) - 2.0);
  cov.diagonal().array() += ridge;
  const Eigen::VectorXd w = cov.ldlt().solve(mu1 - mu0);
  for (Eigen::Index f = 0; f < k; ++f) weights_[static_cast<std::size_t>(f)] = w(f);
  bias_ = -0.5 * w.dot(mu0 + mu1) + prior;
}

int LinearDiscriminant::predict(const float* row) const {
  double s = bias_;
  for (std::size_t f = 0; f < kept_.size(); ++f) s += weights_[f] * (row[kept_[f]] - mean_[f]) * scale_[f];
  return s > 0.0 ? 1 : 0;
}

double LinearDiscriminant::accuracy(const Tensor<float>& x, const std::vector<int>& labels,
                                    const std::vector<std::size_t>& rows) const {
  if (rows.empty()) return 0.0;
  const auto d = static_cast<std::size_t>(x.dim(1));
  std::size_t correct = 0;
  for (std::size_t r : rows) correct += predict(x.data() + r * d) == labels[r];
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

std::size_t ProbeReport::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i].accuracy > layers[best].accuracy) best = i;
  return best;
}

ProbeReport probe_layers(const std::vector<Tensor<float>>& activations, const std::vector<int>& labels,
                         const ProbeOptions& options) {
  if (activations.size() != kLayerTaps.size()) throw ProbeError("expected one activation matrix per layer tap");
  Rng root(options.seed);

  // Sample pool, balanced by subsampling the majority class.
  std::vector<std::size_t> pool;
  {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1].push_back(i);
    if (by_class[0].empty() || by_class[1].empty()) throw ProbeError("probe dataset holds a single class");
    if (options.balance) {
      Rng rng = root.split(0);
      const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
      for (auto& c : by_class) {
        rng.shuffle(std::span<std::size_t>(c));
        c.resize(keep);
        std::sort(c.begin(), c.end());
      }
    }
    pool = by_class[0];
    pool.insert(pool.end(), by_class[1].begin(), by_class[1].end());
    std::sort(pool.begin(), pool.end());
  }

  ProbeReport report;
  report.shuffled = options.shuffle_labels;
  report.samples = pool.size();
  std::vector<std::vector<double>> acc(kLayerTaps.size());
  for (int rep = 0; rep < options.repeats; ++rep) {
    Rng rng = root.split(1000 + static_cast<std::uint64_t>(rep));
    std::vector<int> y = labels;
    if (options.shuffle_labels) {
      std::vector<int> pooled;
      for (std::size_t i : pool) pooled.push_back(labels[i]);
      rng.shuffle(std::span<int>(pooled));
      for (std::size_t k = 0; k < pool.size(); ++k) y[pool[k]] = pooled[k];
    }
    std::vector<std::size_t> order = pool;
    rng.shuffle(std::span<std::size_t>(order));
    const auto cut = static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(order.size())));
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
    if (test.empty()) throw ProbeError("probe test split is empty");
    for (std::size_t layer = 0; layer < kLayerTaps.size(); ++layer) {
      LinearDiscriminant lda;
      lda.fit(activations[layer], y, train, options.ridge);
      acc[layer].push_back(lda.accuracy(activations[layer], y, test));
    }
  }
  for (std::size_t layer = 0; layer < kLayerTaps.size(); ++layer) {
    const MeanSem ms = mean_sem(acc[layer]);
    report.layers.push_back({kLayerTaps[layer], activations[layer].dim(1), ms.mean, ms.sem});
  }
  return report;
}

ProbeReport probe_layers(const NetworkSpec& spec, const ParamSet<float>& params, VisualMode vision,
                         const WorldConfig& world, const ProbeOptions& options) {
  const std::vector<InitialConfig> configs = enumerate_initial_configs(world);
  std::vector<int> labels;
  for (const InitialConfig& c : configs) labels.push_back(c.label ? 1 : 0);
  return probe_layers(layer_activations(spec, params, vision, world, configs), labels, options);
}

nlohmann::json to_json(const ProbeReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerAccuracy& l : r.layers)
    layers.push_back({{"layer", l.layer}, {"features", l.features}, {"accuracy", l.accuracy}, {"sem", l.sem}});
  return {{"shuffled_labels", r.shuffled}, {"samples", r.samples}, {"layers", layers},
          {"best_layer", r.layers.empty() ? "" : r.layers[r.argmax()].layer}};
}

std::string to_csv(const ProbeReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "layer,features,accuracy,sem,shuffled_labels\n";
  for (const LayerAccuracy& l : r.layers)
    os << l.layer << ',' << l.features << ',' << l.accuracy << ',' << l.sem << ',' << int(r.shuffled) << '\n';
  return os.str();
}

}  // namespace perspective
