#pragma once

#include "ccl/dataset.hpp"
#include "ccl/serialize.hpp"
#include "ccl/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ccl {

enum class RunMode { Baseline, BaselineDS, BaselineOD, Ccl, CclOD };

RunMode parse_mode(const std::string& name);
std::string mode_name(RunMode mode);

struct DatasetSpec {
  std::string format;  // "synthetic" | "idx" | "csv"
  SyntheticSpec synthetic;
  std::string train_images, train_labels_path, test_images, test_labels_path;  // idx
  std::string train_csv, test_csv, label_column;                               // csv
  double test_fraction = 0.2;  // csv without a test file: seeded split
};

struct PropertiesSpec {
  std::string kind = "robustness";  // "robustness" | "fairness"
  int count = 25;
  double epsilon = 0.01;
  std::uint64_t seed = 11;
  int sensitive_index = 0;                // fairness
  std::vector<double> sensitive_values;   // fairness
  double epsilon_other = 0.0;             // fairness
};

// A continual-learning run: round 0 trains from scratch on the first label
// group and certifies properties; each later round adds the next group via
// ccl_retrain with the mode's switches (augmentation, regularizer + anchor,
// old-data replay, repair).
struct Scenario {
  DatasetSpec dataset;
  std::vector<std::vector<int>> task_stream;
  PropertiesSpec properties;
  std::vector<Index> init_hidden = {10, 10, 10};
  std::optional<GrowSpec> grow;
  TrainConfig train;
  RunMode mode = RunMode::Ccl;
  std::uint64_t seed = 0;
};

Scenario scenario_from_json(const Json& j);
Scenario load_scenario(const std::string& path);

struct ScenarioReport {
  std::vector<RoundRecord> rounds;

  // accuracy over a subset of labels in one round, count-weighted
  double accuracy_over(std::size_t round, const std::vector<int>& labels) const;
};

// Number of verification worker threads, from CCL_THREADS (default 1).
int thread_budget();

// Runs all rounds, writing round_<r>_model.json / round_<r>_certs.json plus
// report.jsonl into out_dir (created if needed) and a rendered table to
// stdout unless quiet.
ScenarioReport run_scenario(const Scenario& scenario, const std::string& out_dir,
                            bool quiet = false);

std::string render_report_table(const ScenarioReport& report);

}  // namespace ccl
