#include "perspective/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "perspective/runner.hpp"

namespace perspective {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json mean_sem_json(const MeanSem& m) { return {{"mean", m.mean}, {"sem", m.sem}}; }

}  // namespace

std::vector<RlCurveRow> aggregate_rl(const std::vector<RunLog>& logs) {
  if (logs.empty()) throw IncompleteRunError("no RL logs to aggregate");
  std::size_t blocks = 0;
  for (const RunLog& log : logs) {
    if (log.kind != RunLog::Kind::Rl) throw IncompleteRunError("expected RL logs");
    blocks = std::max(blocks, log.rl.size());
  }
  std::vector<RlCurveRow> out;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<double> mean, best, train;
    RlCurveRow row;
    row.block = b;
    for (const RunLog& log : logs) {
      if (b >= log.rl.size()) continue;
      const RlRow& r = log.rl[b];
      row.step += static_cast<double>(r.step);
      row.epsilon += r.epsilon;
      mean.push_back(r.mean_reward);
      best.push_back(r.max_possible_reward);
      train.push_back(r.train_mean_reward);
    }
    row.seeds = mean.size();
    row.step /= static_cast<double>(row.seeds);
    row.epsilon /= static_cast<double>(row.seeds);
    row.mean_reward = mean_sem(mean);
    row.max_possible_reward = mean_sem(best);
    row.train_mean_reward = mean_sem(train);
    out.push_back(row);
  }
  return out;
}

std::vector<AccuracyCurveRow> aggregate_supervised(const RunLog& log) {
  if (log.kind != RunLog::Kind::Supervised) throw IncompleteRunError("expected a supervised log");
  std::map<int, std::vector<const SupervisedRow*>> by_epoch;
  std::map<std::uint64_t, std::size_t> per_seed;
  for (const SupervisedRow& r : log.supervised) {
    by_epoch[r.epoch].push_back(&r);
    per_seed[r.seed] += 1;
  }
  if (by_epoch.empty()) throw IncompleteRunError("supervised log has no rows");
  for (const auto& [seed, n] : per_seed)
    if (n != by_epoch.size())
      throw IncompleteRunError("seed " + std::to_string(seed) + " is missing epochs");
  std::vector<AccuracyCurveRow> out;
  for (const auto& [epoch, rows] : by_epoch) {
    std::vector<double> train, val;
    for (const SupervisedRow* r : rows) {
      train.push_back(r->train_acc);
      val.push_back(r->val_acc);
    }
    out.push_back({epoch, rows.size(), mean_sem(train), mean_sem(val)});
  }
  return out;
}

std::string to_csv(const std::vector<RlCurveRow>& rows) {
  std::ostringstream os;
  os << "block,seeds,step,epsilon,mean_reward,mean_reward_sem,max_possible_reward,max_possible_reward_sem,"
        "train_mean_reward,train_mean_reward_sem\n";
  for (const RlCurveRow& r : rows)
    os << r.block << ',' << r.seeds << ',' << num(r.step) << ',' << num(r.epsilon) << ',' << num(r.mean_reward.mean)
       << ',' << num(r.mean_reward.sem) << ',' << num(r.max_possible_reward.mean) << ','
       << num(r.max_possible_reward.sem) << ',' << num(r.train_mean_reward.mean) << ','
       << num(r.train_mean_reward.sem) << '\n';
  return os.str();
}

std::string to_csv(const std::vector<AccuracyCurveRow>& rows) {
  std::ostringstream os;
  os << "epoch,seeds,train_acc,train_acc_sem,val_acc,val_acc_sem\n";
  for (const AccuracyCurveRow& r : rows)
    os << r.epoch << ',' << r.seeds << ',' << num(r.train_acc.mean) << ',' << num(r.train_acc.sem) << ','
       << num(r.val_acc.mean) << ',' << num(r.val_acc.sem) << '\n';
  return os.str();
}

nlohmann::json report_run(const std::filesystem::path& run_dir) {
  const std::filesystem::path manifest_path = run_dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IncompleteRunError("no manifest.json in " + run_dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IncompleteRunError("unreadable manifest: " + std::string(e.what()));
  }
  const std::string status = manifest.value("status", "");
  if (status != "complete") throw IncompleteRunError("run status is '" + status + "', not complete");
  const std::string kind = manifest.at("config").at("kind").get<std::string>();
  const std::filesystem::path report_dir = run_dir / "report";
  std::filesystem::create_directories(report_dir);
  nlohmann::json summary = {{"kind", kind}, {"run", run_dir.filename().string()}};

  if (kind == "rl") {
    std::vector<RunLog> logs;
    std::vector<double> eat, avoid;
    for (const auto& seed : manifest.at("artifacts").at("seeds")) {
      const std::filesystem::path log_path = run_dir / seed.at("log").get<std::string>();
      if (!std::filesystem::exists(log_path)) throw IncompleteRunError("missing " + log_path.string());
      logs.push_back(RunLog::read(log_path));
      if (!logs.back().halt_reason.empty())
        summary["halted"].push_back({{"seed", seed.at("seed")}, {"reason", logs.back().halt_reason}});
      const std::filesystem::path behavior = run_dir / seed.at("behavior").get<std::string>();
      if (!std::filesystem::exists(behavior)) throw IncompleteRunError("missing " + behavior.string());
      const auto b = nlohmann::json::parse(read_text(behavior));
      eat.push_back(b.at("pct_correct_when_should_eat").get<double>());
      avoid.push_back(b.at("pct_correct_when_should_avoid").get<double>());
    }
    const auto curve = aggregate_rl(logs);
    write_text(report_dir / "reward_curve.csv", to_csv(curve));
    summary["seeds"] = logs.size();
    summary["blocks"] = curve.size();
    summary["pct_correct_when_should_eat"] = mean_sem_json(mean_sem(eat));
    summary["pct_correct_when_should_avoid"] = mean_sem_json(mean_sem(avoid));
    if (!curve.empty()) {
      summary["final_mean_reward"] = mean_sem_json(curve.back().mean_reward);
      summary["final_max_possible_reward"] = mean_sem_json(curve.back().max_possible_reward);
    }
    summary["tables"] = {"report/reward_curve.csv"};
  } else if (kind == "supervised") {
    const std::filesystem::path log_path = run_dir / manifest.at("artifacts").at("log").get<std::string>();
    if (!std::filesystem::exists(log_path)) throw IncompleteRunError("missing " + log_path.string());
    const auto curve = aggregate_supervised(RunLog::read(log_path));
    write_text(report_dir / "accuracy_curve.csv", to_csv(curve));
    summary["seeds"] = curve.front().seeds;
    summary["epochs"] = curve.size();
    summary["final_val_acc"] = mean_sem_json(curve.back().val_acc);
    summary["tables"] = {"report/accuracy_curve.csv"};
  } else {
    summary["artifacts"] = manifest.at("artifacts");
  }
  write_text(report_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace perspective
