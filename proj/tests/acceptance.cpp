// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "perspective/analysis.hpp"
#include "perspective/probe.hpp"
#include "perspective/qagent.hpp"
#include "perspective/report.hpp"
#include "perspective/runner.hpp"
#include "perspective/train.hpp"

using namespace perspective;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path output_root() {
  const fs::path root = fs::current_path() / "acceptance-runs";
  fs::create_directories(root);
  return root;
}

// ---------------------------------------------------------------- 1
Outcome supervised_ordering() {
  std::map<VisualMode, std::vector<AccuracyCurveRow>> curves;
  for (VisualMode v : {VisualMode::Allocentric, VisualMode::Egocentric}) {
    SupervisedConfig c = SupervisedConfig::for_vision(v);
    c.weight_seeds = {0, 1, 2, 3, 4};
    curves[v] = aggregate_supervised(train_supervised(c));
  }
  const auto& allo = curves[VisualMode::Allocentric];
  const auto& ego = curves[VisualMode::Egocentric];
  int first90 = 0;
  for (const auto& r : allo)
    if (r.val_acc.mean >= 0.90) {
      first90 = r.epoch;
      break;
    }
  int ordered = 0;
  for (std::size_t e = 0; e < 20; ++e) ordered += allo[e].val_acc.mean > ego[e].val_acc.mean;
  const double ego20 = ego[19].val_acc.mean;
  Outcome o;
  o.pass = first90 >= 1 && first90 <= 6 && ego20 >= 0.75 && ego20 <= 0.92 && ordered == 20;
  o.detail = "allo first >= 0.90 at epoch " + std::to_string(first90) + " (need <= 6), allo@6 " +
             fmt("%.4f", allo[5].val_acc.mean) + ", ego@20 " + fmt("%.4f", ego20) + " (need [0.75, 0.92]), allo > ego at " +
             std::to_string(ordered) + "/20 epochs, 5 weight seeds";
  return o;
}

// ---------------------------------------------------------------- 2
Outcome enumeration_counts() {
  const std::size_t ego = enumerate_initial_configs(WorldConfig::egocentric()).size();
  const std::size_t allo = enumerate_initial_configs(WorldConfig::allocentric()).size();
  FlagOverrides flags;
  flags.vision = "allo";
  flags.out = output_root().string();
  std::ostringstream console;
  const RunOutcome run = execute_run(resolve_run_config(RunKind::Enumerate, nullptr, flags, "runs"), {}, console);
  const auto summary = nlohmann::json::parse(read_text(run.dir / "report" / "summary.json"));
  const std::string note = summary.value("note", "");
  Outcome o;
  o.pass = ego == 26400 && allo == 31200 && summary.at("published_count") == 32100 &&
           note.find("32100") != std::string::npos && note.find("900") != std::string::npos;
  o.detail = "ego " + std::to_string(ego) + ", allo " + std::to_string(allo) + "; report note: " + note;
  return o;
}

// ---------------------------------------------------------------- 3
Outcome visibility_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t checked = 0, mismatches = 0;
  for (int side : {11, 13}) {
    WorldConfig w = side == 11 ? WorldConfig::egocentric() : WorldConfig::allocentric();
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c)
        for (Orientation o : {Orientation::North, Orientation::East, Orientation::South, Orientation::West}) {
          const AgentPose viewer{r, c, o};
          const VisibilityMask mask = field_of_view(viewer, side, true);
          for (int tr = 0; tr < side; ++tr)
            for (int tc = 0; tc < side; ++tc) {
              const Cell t{tr, tc};
              const bool expect = oracle::angle_visible(viewer, t);
              mismatches += mask.visible(t) != expect;
              mismatches += in_field_of_view(viewer, t, true) != expect;
              if (!(t == viewer.cell())) {
                WorldState s;
                s.dominant = viewer;
                s.food = t;
                s.subordinate = {0, 0, Orientation::East};
                mismatches += dominant_sees_food(w, s) != expect;
              }
              ++checked;
            }
        }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome o;
  o.pass = mismatches == 0 && seconds < 1.0;
  o.detail = std::to_string(checked) + " viewer/target pairs on sides 11 and 13, " + std::to_string(mismatches) +
             " mismatches, " + fmt("%.3f s", seconds) + " (need < 1 s)";
  return o;
}

// ---------------------------------------------------------------- 4
Outcome dueling_identities() {
  std::size_t passes = 0, value_fail = 0, argmax_fail = 0;
  Rng rng(2024);
  for (VisualMode v : {VisualMode::Egocentric, VisualMode::Allocentric}) {
    const WorldConfig w = v == VisualMode::Egocentric ? WorldConfig::egocentric() : WorldConfig::allocentric();
    const NetworkSpec spec = NetworkSpec::q_network(v, w.side);
    for (int net = 0; net < 10; ++net) {
      Rng init = rng.split(static_cast<std::uint64_t>(net) + (v == VisualMode::Egocentric ? 0 : 100));
      const ParamSet<float> params = init_params<float>(spec, init);
      auto state = LstmState<float>::zeros(spec.lstm_cells);
      GridWorld env(w, init.split(7));
      env.reset();
      for (int i = 0; i < 500; ++i, ++passes) {
        const QOutput<float> out = q_values(spec, params, encode(v, w, env.state()), state);
        state = out.state;
        const float maxq = *std::max_element(out.q.begin(), out.q.end());
        const float ulp = std::nextafter(std::fabs(out.value), std::numeric_limits<float>::infinity()) - std::fabs(out.value);
        value_fail += std::fabs(maxq - out.value) > ulp;
        argmax_fail += greedy_action(std::span<const float>(out.q)) != greedy_action(std::span<const float>(out.advantage));
        const int a = static_cast<int>(rng.uniform_index(kActionCount));
        if (env.step(decode_action(a, ActionMode::Egocentric, env.state().subordinate.orientation)).state.terminal) {
          env.reset();
          state = LstmState<float>::zeros(spec.lstm_cells);
        }
      }
    }
  }
  Outcome o;
  o.pass = passes >= 10000 && value_fail == 0 && argmax_fail == 0;
  o.detail = std::to_string(passes) + " forward passes; max Q != V (beyond 1 ulp): " + std::to_string(value_fail) +
             ", argmax Q != argmax A: " + std::to_string(argmax_fail);
  return o;
}

// ---------------------------------------------------------------- 5
Outcome soft_update_exact() {
  const NetworkSpec spec = NetworkSpec::q_network(VisualMode::Egocentric, 11);
  Rng rng(5);
  const ParamSet<double> source = init_params<double>(spec, rng);
  const ParamSet<double> start = init_params<double>(spec, rng);
  std::size_t bad = 0;
  for (double tau : {0.0, 1.0, 0.01, 0.37}) {
    ParamSet<double> t = start;
    soft_update(t, source, tau);
    for (std::size_t e = 0; e < t.size(); ++e)
      for (std::size_t i = 0; i < t.entries()[e].second.size(); ++i) {
        const double s = source.entries()[e].second[i], s0 = start.entries()[e].second[i];
        const double got = t.entries()[e].second[i];
        const double want = tau == 0.0 ? s0 : tau == 1.0 ? s : s * tau + s0 * (1.0 - tau);
        bad += got != want;
      }
  }
  ParamSet<float> fs0 = init_params<float>(spec, rng), fs1 = init_params<float>(spec, rng);
  ParamSet<float> f = fs0;
  soft_update(f, fs1, 1.0);
  bad += !(f == fs1);
  f = fs0;
  soft_update(f, fs1, 0.0);
  bad += !(f == fs0);
  ParamSet<double> one, zero;
  one.add("w", Tensor<double>({1}, 1.0));
  zero.add("w", Tensor<double>({1}, 0.0));
  soft_update(zero, one, 0.01);
  bad += zero.at("w")[0] != 0.01;
  Outcome o;
  o.pass = bad == 0;
  o.detail = std::to_string(bad) + " elements differ from tau*theta + (1-tau)*target across tau in {0, 1, 0.01, 0.37}; "
             "scalar probe 0.01 -> " + fmt("%.17g", zero.at("w")[0]);
  return o;
}

// ---------------------------------------------------------------- 6
double recurrent_check(VisualMode vision, std::uint64_t seed) {
  const NetworkSpec spec = fixture::small_spec(vision, 5);
  Rng rng(seed);
  const ParamSet<double> params = fixture::generic_params<double>(spec, rng);
  std::vector<Tensor<double>> maps, orients, weights;
  for (int t = 0; t < 5; ++t) {
    maps.push_back(gradcheck::random_tensor({2, spec.input.channels, spec.input.rows, spec.input.cols}, rng, 0, 1));
    orients.push_back(gradcheck::random_tensor({2, spec.input.orientation_dim}, rng, 0, 1));
    weights.push_back(gradcheck::random_tensor({2, spec.outputs}, rng));
  }
  auto loss = [&](const ParamSet<double>& p, ParamSet<double>* grads) {
    ad::Tape<double> tape(grads != nullptr);
    BoundNetwork<double> net(spec, p, tape);
    RecurrentVars<double> state = net.zero_state(2);
    ad::Var<double> total;
    for (int t = 0; t < 5; ++t) {
      StepVars<double> s = net.step(tape.constant(maps[static_cast<std::size_t>(t)]),
                                    tape.constant(orients[static_cast<std::size_t>(t)]), state);
      state = s.state;
      ad::Var<double> term = ad::sum(ad::mul(s.output, tape.constant(weights[static_cast<std::size_t>(t)])));
      total = total.valid() ? ad::add(total, term) : term;
    }
    if (grads) {
      tape.backward(total);
      net.accumulate_gradients(*grads);
    }
    return total.value()[0];
  };
  ParamSet<double> grads = params.zeros_like();
  loss(params, &grads);
  std::vector<double> analytic, numeric;
  ParamSet<double> probe = params;
  for (auto& [name, t] : probe)
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + 1e-6;
      const double up = loss(probe, nullptr);
      t[i] = saved - 1e-6;
      const double down = loss(probe, nullptr);
      t[i] = saved;
      numeric.push_back((up - down) / 2e-6);
      analytic.push_back(grads.at(name)[i]);
    }
  return oracle::relative_error(analytic, numeric);
}

Outcome finite_differences() {
  using gradcheck::random_tensor;
  std::map<std::string, double> worst;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    for (ad::Padding pad : {ad::Padding::Valid, ad::Padding::Same}) {
      const auto w = pad == ad::Padding::Valid ? random_tensor({2, 4, 5, 5}, rng) : random_tensor({2, 4, 7, 7}, rng);
      const double e = gradcheck::check(
          [&](ad::Tape<double>& tape, const std::vector<ad::Var<double>>& v) {
            return ad::sum(ad::mul(ad::conv2d(v[0], v[1], v[2], pad), tape.constant(w)));
          },
          {random_tensor({2, 3, 7, 7}, rng), random_tensor({4, 3, 3, 3}, rng), random_tensor({4}, rng)});
      worst["conv"] = std::max(worst["conv"], e);
    }
    for (ad::Activation act : {ad::Activation::Relu, ad::Activation::Tanh, ad::Activation::Sigmoid, ad::Activation::Linear}) {
      const auto w = random_tensor({6, 5}, rng);
      const double e = gradcheck::check(
          [&](ad::Tape<double>& tape, const std::vector<ad::Var<double>>& v) {
            return ad::sum(ad::mul(ad::activate(ad::add_bias(ad::matmul(v[0], v[1]), v[2]), act), tape.constant(w)));
          },
          {random_tensor({6, 8}, rng), random_tensor({8, 5}, rng), random_tensor({5}, rng)});
      worst["dense"] = std::max(worst["dense"], e);
    }
    const std::vector<int> labels = {0, 2, 1, 2, 0, 1};
    worst["cross-entropy"] = std::max(
        worst["cross-entropy"],
        gradcheck::check(
            [&](ad::Tape<double>&, const std::vector<ad::Var<double>>& v) {
              return ad::softmax_cross_entropy(v[0], std::span<const int>(labels));
            },
            {random_tensor({6, 3}, rng, -3, 3)}));
    const auto w = random_tensor({4, 5}, rng);
    worst["dueling"] = std::max(
        worst["dueling"],
        gradcheck::check(
            [&](ad::Tape<double>& tape, const std::vector<ad::Var<double>>& v) {
              const auto h = ad::tanh(ad::matmul(v[0], v[1]));
              const auto q = ad::dueling(ad::matmul(h, v[2]), ad::matmul(h, v[3]));
              return ad::sum(ad::mul(q, tape.constant(w)));
            },
            {random_tensor({4, 6}, rng), random_tensor({6, 7}, rng), random_tensor({7, 1}, rng),
             random_tensor({7, 5}, rng)}));
    for (VisualMode v : {VisualMode::Allocentric, VisualMode::Egocentric})
      worst["LSTM network x5 steps"] = std::max(worst["LSTM network x5 steps"], recurrent_check(v, seed));
  }
  Outcome o;
  o.pass = true;
  for (const auto& [name, e] : worst) {
    o.pass = o.pass && e < 1e-4;
    o.detail += (o.detail.empty() ? "" : ", ") + name + " " + fmt("%.2e", e);
  }
  o.detail = "worst relative error over 10 seeds (need < 1e-4): " + o.detail;
  return o;
}

// ---------------------------------------------------------------- 7
struct RlResult {
  fs::path dir;
  std::vector<double> eat, avoid;
  std::int64_t steps = 0;
  double score() const {
    double s = 0.0;
    for (std::size_t i = 0; i < eat.size(); ++i) s += (eat[i] + avoid[i]) / 2.0;
    return eat.empty() ? 0.0 : s / static_cast<double>(eat.size());
  }
  double mean(const std::vector<double>& v) const {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
};

std::map<std::string, RlResult> g_rl;

const RlResult& desk_rl(const std::string& vision, const std::string& action) {
  const std::string key = vision + "-" + action;
  if (auto it = g_rl.find(key); it != g_rl.end()) return it->second;
  FlagOverrides flags;
  flags.profile = "desk";
  flags.vision = vision;
  flags.action = action;
  flags.out = output_root().string();
  const RunConfig config = resolve_run_config(RunKind::Rl, nullptr, flags, "runs");
  std::cout << "  training " << key << " on the desk profile (" << config.rl.schedule.total_steps << " steps x "
            << config.seeds.size() << " seeds)" << std::endl;
  std::ostringstream console;
  const RunOutcome run = execute_run(config, {"acceptance", "run", "rl", "--vision", vision, "--action", action}, console);
  RlResult r;
  r.dir = run.dir;
  r.steps = config.rl.schedule.total_steps;
  for (const auto& seed : run.manifest.at("artifacts").at("seeds")) {
    const auto b = nlohmann::json::parse(read_text(run.dir / seed.at("behavior").get<std::string>()));
    r.eat.push_back(b.at("pct_correct_when_should_eat").get<double>());
    r.avoid.push_back(b.at("pct_correct_when_should_avoid").get<double>());
  }
  return g_rl[key] = r;
}

Outcome desk_rl_learning() {
  const RlResult& ego = desk_rl("ego", "ego");
  const RlResult& allo = desk_rl("allo", "allo");
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : "/") + fmt("%.1f", x);
    return s;
  };
  Outcome o;
  o.pass = ego.eat.size() >= 3 && ego.steps <= 1'000'000 && ego.mean(ego.eat) >= 80.0 &&
           ego.mean(ego.avoid) >= 80.0 && ego.score() > allo.score();
  o.detail = "ego-ego eat " + fmt("%.1f%%", ego.mean(ego.eat)) + " [" + list(ego.eat) + "], avoid " +
             fmt("%.1f%%", ego.mean(ego.avoid)) + " [" + list(ego.avoid) + "] (need >= 80 on both); allo-allo eat " +
             fmt("%.1f%%", allo.mean(allo.eat)) + ", avoid " + fmt("%.1f%%", allo.mean(allo.avoid)) +
             "; balanced score ego " + fmt("%.1f", ego.score()) + " vs allo " + fmt("%.1f", allo.score()) + "; " +
             std::to_string(ego.eat.size()) + " seeds x " + std::to_string(ego.steps) + " steps";
  return o;
}

// ---------------------------------------------------------------- 8
Outcome baseline_agents() {
  bool pass = true;
  std::string detail;
  for (VisualMode v : {VisualMode::Egocentric, VisualMode::Allocentric}) {
    const WorldConfig w = v == VisualMode::Egocentric ? WorldConfig::egocentric() : WorldConfig::allocentric();
    const auto configs = enumerate_initial_configs(w);
    for (ActionMode a : {ActionMode::Egocentric, ActionMode::Allocentric}) {
      OracleAgent oracle(w, a);
      const BehaviorReport r = evaluate_behavior(oracle, w, v, a, configs);
      pass = pass && r.pct_correct_when_should_eat() == 100.0 && r.pct_correct_when_should_avoid() == 100.0;
      detail += std::string(detail.empty() ? "" : "; ") + "oracle " + to_string(v) + "/" + to_string(a) + " " +
                fmt("%.2f", r.pct_correct_when_should_eat()) + "/" + fmt("%.2f", r.pct_correct_when_should_avoid());
    }
    RandomAgent random{Rng(99)};
    const BehaviorReport r = evaluate_behavior(random, w, v, ActionMode::Egocentric, configs);
    pass = pass && r.pct_correct_when_should_eat() < 100.0 && r.pct_correct_when_should_avoid() < 100.0;
    detail += "; random " + to_string(v) + " " + fmt("%.2f", r.pct_correct_when_should_eat()) + "/" +
              fmt("%.2f", r.pct_correct_when_should_avoid());
  }
  return {pass, detail + " (eat/avoid %)"};
}

// ---------------------------------------------------------------- 9
Outcome probe_suite() {
  const RlResult& ego = desk_rl("ego", "ego");
  const RlTrainer trained = RlTrainer::load(ego.dir / "seed-0" / "checkpoint.bin");
  const RlConfig& c = trained.config();
  ProbeOptions opt;
  const ProbeReport truth = probe_layers(c.network, trained.params(), c.vision, c.world, opt);
  opt.shuffle_labels = true;
  const ProbeReport shuffled = probe_layers(c.network, trained.params(), c.vision, c.world, opt);
  bool chance = true;
  std::string s_list, t_list;
  for (std::size_t l = 0; l < shuffled.layers.size(); ++l) {
    chance = chance && std::fabs(shuffled.layers[l].accuracy - 0.5) <= 0.02;
    s_list += (l ? " " : "") + fmt("%.3f", shuffled.layers[l].accuracy);
    t_list += std::string(l ? " " : "") + truth.layers[l].layer + "=" + fmt("%.3f", truth.layers[l].accuracy);
  }
  const std::size_t best = truth.argmax();
  Outcome o;
  o.pass = chance && shuffled.layers.size() == 8 && best >= 2;
  o.detail = "shuffled [" + s_list + "] (need 0.5 +- 0.02); trained ego-ego seed 0: " + t_list + "; max at " +
             truth.layers[best].layer + " (need at or after merge)";
  return o;
}

// ---------------------------------------------------------------- 10
Outcome manifest_rerun() {
  FlagOverrides flags;
  flags.profile = "desk";
  flags.steps = 3000;
  flags.seeds = "2";
  flags.out = output_root().string();
  std::ostringstream console;
  const RunOutcome first = execute_run(resolve_run_config(RunKind::Rl, nullptr, flags, "runs"), {"acceptance"}, console);
  const RunOutcome second = rerun_manifest(first.dir / "manifest.json", "", {"acceptance", "rerun"}, console);
  std::size_t compared = 0, differ = 0;
  for (const auto& seed : first.manifest.at("artifacts").at("seeds"))
    for (const char* key : {"log", "checkpoint"}) {
      const std::string rel = seed.at(key).get<std::string>();
      ++compared;
      differ += read_text(first.dir / rel) != read_text(second.dir / rel);
    }
  Outcome o;
  o.pass = compared == 4 && differ == 0;
  o.detail = std::to_string(compared) + " log/checkpoint files compared byte for byte, " + std::to_string(differ) +
             " differ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"supervised ordering", supervised_ordering},
      {"enumeration counts", enumeration_counts},
      {"visibility matches the angle oracle", visibility_oracle},
      {"dueling identities", dueling_identities},
      {"soft update exactness", soft_update_exact},
      {"finite-difference gradients", finite_differences},
      {"desk RL learning", desk_rl_learning},
      {"oracle and random baselines", baseline_agents},
      {"probe suite", probe_suite},
      {"manifest rerun is bit-exact", manifest_rerun},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt("%.1f", seconds) << " s)" << std::endl;
    ++ran;
    failed += !o.pass;
  }
  std::cout << "acceptance: " << ran - failed << "/" << ran << " passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
