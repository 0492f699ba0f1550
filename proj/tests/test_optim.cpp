#include <doctest.h>

#include <cmath>

#include "perspective/checkpoint.hpp"
#include "perspective/network.hpp"
#include "perspective/optim.hpp"

using namespace perspective;

TEST_CASE("first Adam step moves by the learning rate against the gradient sign") {
  Rng rng(1);
  ParamSet<double> p;
  p.add("w", Tensor<double>({50}));
  ParamSet<double> g = p.zeros_like();
  for (double& v : g.at("w").values()) v = rng.uniform(-5, 5);
  Adam<double> adam({}, p);
  adam.step(p, g);
  for (std::size_t i = 0; i < 50; ++i) {
    const double gi = g.at("w")[i];
    CHECK(p.at("w")[i] == doctest::Approx(-1e-3 * (gi > 0 ? 1 : -1)).epsilon(1e-6));
  }
  CHECK(adam.steps() == 1);
}

TEST_CASE("zero gradients leave parameters unchanged") {
  ParamSet<double> p;
  p.add("w", Tensor<double>({3}, std::vector<double>{1, -2, 3}));
  const ParamSet<double> start = p;
  Adam<double> adam({}, p);
  for (int i = 0; i < 100; ++i) adam.step(p, p.zeros_like());
  CHECK(p == start);
}

TEST_CASE("Adam descends a quadratic") {
  ParamSet<double> p;
  p.add("w", Tensor<double>({1}, 1.0));
  Adam<double> adam({}, p);
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    ParamSet<double> g = p.zeros_like();
    g.at("w")[0] = 2 * p.at("w")[0];
    adam.step(p, g);
    const double w = std::fabs(p.at("w")[0]);
    CHECK(w < prev);
    prev = w;
  }
  CHECK(prev < 0.95);
}

TEST_CASE("Adam is keyed by parameter name") {
  ParamSet<double> p1, p2;
  p1.add("a", Tensor<double>({2}, 1.0));
  p1.add("b", Tensor<double>({1}, -1.0));
  p2.add("b", Tensor<double>({1}, -1.0));
  p2.add("a", Tensor<double>({2}, 1.0));
  ParamSet<double> g1, g2;
  g1.add("a", Tensor<double>({2}, std::vector<double>{0.3, -0.2}));
  g1.add("b", Tensor<double>({1}, 0.7));
  g2.add("b", Tensor<double>({1}, 0.7));
  g2.add("a", Tensor<double>({2}, std::vector<double>{0.3, -0.2}));
  Adam<double> a1({}, p1), a2({}, p2);
  for (int i = 0; i < 5; ++i) {
    a1.step(p1, g1);
    a2.step(p2, g2);
  }
  CHECK(p1.at("a") == p2.at("a"));
  CHECK(p1.at("b") == p2.at("b"));
}

TEST_CASE("gradient clipping") {
  ParamSet<double> g;
  g.add("a", Tensor<double>({2}, std::vector<double>{0.6, 0.0}));
  g.add("b", Tensor<double>({1}, 0.8));
  CHECK(clip_gradients(g, 2.0) == doctest::Approx(1.0));
  CHECK(g.at("a")[0] == 0.6);

  g.at("a")[0] = 2.4;
  g.at("b")[0] = 3.2;
  CHECK(clip_gradients(g, 2.0) == doctest::Approx(4.0));
  CHECK(global_norm(g) == doctest::Approx(2.0));
  CHECK(g.at("a")[0] == doctest::Approx(1.2));

  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    ParamSet<double> r;
    r.add("x", Tensor<double>({20}));
    for (double& v : r.at("x").values()) v = rng.uniform(-3, 3);
    const ParamSet<double> before = r;
    clip_gradients(r, 2.0);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      dot += before.at("x")[i] * r.at("x")[i];
      na += before.at("x")[i] * before.at("x")[i];
      nb += r.at("x")[i] * r.at("x")[i];
    }
    CHECK(dot / std::sqrt(na * nb) == doctest::Approx(1.0));
    CHECK(std::sqrt(nb) <= 2.0 + 1e-12);
  }

  ParamSet<double> v;
  v.add("x", Tensor<double>({3}, std::vector<double>{-5, 1, 3}));
  clip_gradients(v, 2.0, ClipMode::Value);
  CHECK(v.at("x") == Tensor<double>({3}, std::vector<double>{-2, 1, 2}));
  CHECK(parse_clip_mode("value") == ClipMode::Value);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(2);
  const NetworkSpec spec = NetworkSpec::q_network(VisualMode::Allocentric, 13);
  const ParamSet<float> params = init_params<float>(spec, rng);
  const ParamSet<double> dparams = init_params<double>(spec, rng);
  CheckpointWriter w(nlohmann::json{{"kind", "test"}});
  w.add_params("p.", params);
  w.add_params("d.", dparams);
  w.add_blob("blob", {1, 2, 3});
  const std::vector<std::uint8_t> bytes = w.bytes();
  CHECK(std::string(bytes.begin(), bytes.begin() + 7) == "PTLCKPT");

  const CheckpointReader r(bytes);
  CHECK(r.meta().at("kind") == "test");
  ParamSet<float> back = params.zeros_like();
  r.load_params("p.", back);
  CHECK(back == params);
  ParamSet<double> dback = dparams.zeros_like();
  r.load_params("d.", dback);
  CHECK(dback == dparams);
  CHECK(r.blob("blob") == std::vector<std::uint8_t>{1, 2, 3});
  CHECK_FALSE(r.has("nothing"));
  CHECK_THROWS_AS(r.blob("nothing"), CheckpointError);
  CHECK_THROWS_AS(r.tensor<double>("p.fc1.w"), CheckpointError);

  // An allocentric checkpoint does not fit an egocentric network.
  Rng rng2(3);
  ParamSet<float> ego = init_params<float>(NetworkSpec::q_network(VisualMode::Egocentric, 11), rng2);
  CHECK_THROWS_AS(r.load_params("p.", ego), CheckpointError);

  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(CheckpointReader{bad}, CheckpointError);
  bad = bytes;
  bad[8] = 99;
  CHECK_THROWS_AS(CheckpointReader{bad}, CheckpointError);
  bad = bytes;
  bad.resize(bytes.size() - 10);
  CHECK_THROWS_AS(CheckpointReader{bad}, CheckpointError);
}
