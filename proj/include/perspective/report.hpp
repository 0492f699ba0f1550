#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perspective/train.hpp"

namespace perspective {

class IncompleteRunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per evaluation block, across seeds.
struct RlCurveRow {
  std::size_t block = 0;
  std::size_t seeds = 0;
  double step = 0.0;  // mean over seeds
  double epsilon = 0.0;
  MeanSem mean_reward;
  MeanSem max_possible_reward;
  MeanSem train_mean_reward;
};

struct AccuracyCurveRow {
  int epoch = 0;
  std::size_t seeds = 0;
  MeanSem train_acc;
  MeanSem val_acc;
};

/// Rows are matched by block index. Seeds finish different numbers of
/// episodes, so late blocks average over the seeds that reached them.
std::vector<RlCurveRow> aggregate_rl(const std::vector<RunLog>& logs);
/// Groups supervised rows by epoch; every seed must report every epoch.
std::vector<AccuracyCurveRow> aggregate_supervised(const RunLog& log);

std::string to_csv(const std::vector<RlCurveRow>& rows);
std::string to_csv(const std::vector<AccuracyCurveRow>& rows);

/// Reads a run directory's manifest and logs, writes the aggregate tables to
/// <run_dir>/report/ and returns a JSON summary. Throws IncompleteRunError
/// when the manifest is not marked complete or an artifact is missing.
nlohmann::json report_run(const std::filesystem::path& run_dir);

}  // namespace perspective
