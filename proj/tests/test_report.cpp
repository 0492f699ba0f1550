#include <doctest.h>

#include <cmath>

#include "perspective/report.hpp"

using namespace perspective;

namespace {

RunLog rl_log(std::uint64_t seed, std::vector<std::pair<double, double>> rewards) {
  RunLog log;
  log.kind = RunLog::Kind::Rl;
  std::int64_t step = 0;
  for (const auto& [mean, best] : rewards) {
    step += 100 + static_cast<std::int64_t>(seed);
    log.rl.push_back({seed, step, step / 10, 0.5, mean, best, mean - 1, 0.01, step / 4});
  }
  return log;
}

}  // namespace

TEST_CASE("RL curves aggregate per block across seeds") {
  const auto rows = aggregate_rl({rl_log(0, {{10, 20}, {30, 40}}), rl_log(2, {{14, 20}, {50, 44}})});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].seeds == 2);
  CHECK(rows[0].step == 101.0);
  CHECK(rows[0].mean_reward.mean == 12.0);
  // Sample sd of {10, 14} is 2*sqrt(2); over sqrt(2) that is 2.
  CHECK(rows[0].mean_reward.sem == doctest::Approx(2.0));
  CHECK(rows[0].max_possible_reward.sem == 0.0);
  CHECK(rows[1].mean_reward.mean == 40.0);
  CHECK(rows[1].mean_reward.sem == doctest::Approx(10.0));
  CHECK(rows[1].train_mean_reward.mean == 39.0);

  const auto single = aggregate_rl({rl_log(1, {{5, 9}})});
  CHECK(single[0].mean_reward.sem == 0.0);
  CHECK(single[0].mean_reward.mean == 5.0);

  CHECK_THROWS_AS(aggregate_rl({}), IncompleteRunError);
  const auto ragged = aggregate_rl({rl_log(0, {{1, 2}}), rl_log(1, {{1, 2}, {3, 4}})});
  REQUIRE(ragged.size() == 2);
  CHECK(ragged[0].seeds == 2);
  CHECK(ragged[1].seeds == 1);
  CHECK(ragged[1].mean_reward.mean == 3.0);
  CHECK(ragged[1].mean_reward.sem == 0.0);

  const std::string csv = to_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("accuracy curves group by epoch") {
  RunLog log;
  log.kind = RunLog::Kind::Supervised;
  log.supervised = {{0, 1, 0.7, 0.6, 0.5}, {0, 2, 0.5, 0.8, 0.7}, {1, 1, 0.7, 0.6, 0.7}, {1, 2, 0.5, 0.8, 0.9}};
  const auto rows = aggregate_supervised(log);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].epoch == 1);
  CHECK(rows[0].val_acc.mean == doctest::Approx(0.6));
  CHECK(rows[1].val_acc.mean == doctest::Approx(0.8));
  CHECK(rows[1].val_acc.sem == doctest::Approx(0.1));
  CHECK(rows[1].train_acc.sem == 0.0);

  log.supervised.pop_back();
  CHECK_THROWS_AS(aggregate_supervised(log), IncompleteRunError);
  CHECK_THROWS_AS(aggregate_supervised(rl_log(0, {{1, 2}})), IncompleteRunError);
}
