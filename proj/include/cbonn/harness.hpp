#pragma once

// Experiment runner for the four experiments, per-run records, multi-seed
// aggregation and CSV output.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbonn/config.hpp"
#include "cbonn/dataset.hpp"

namespace cbonn {

const char* version();

/// One evaluation on the full training set. `risk` is the risk of the
/// consensus network (CBO, hybrid), the barycenter network (OT) or the single
/// network (Adam); for multitask it is the median task risk. Task columns are
/// NaN outside multitask runs.
struct EpochRow {
  std::size_t epoch = 0;
  double risk = 0.0;
  double median_task_risk = 0.0;
  double min_task_risk = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;
};

struct RunRecord {
  std::string experiment;
  std::string method;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  std::string config_text;  // resolved config with run.seed = seed, run.seeds = 1
  std::string config_hash;
  std::string code_version;
  std::vector<EpochRow> rows;  // rows[0] is the initial evaluation
  std::vector<double> wall_ms; // per row, kept out of the CSV
  std::vector<std::string> notes;
  bool completed = true;
  std::string diagnostic;

  bool multitask() const { return method == "multitask_cbo"; }
};

struct RunOptions {
  std::function<void(const std::string&)> log;
  bool write_files = true;
};

/// Loads the MNIST subset named by cfg (mnist experiment only).
Dataset load_experiment_mnist(const ExperimentConfig& cfg);

/// One seed. `mnist` may carry a preloaded dataset for the mnist experiment.
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const Dataset* mnist = nullptr,
                   const RunOptions& options = {});

/// Every seed of cfg.seed_list(); writes run CSVs and sidecars when asked.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

struct AggregateRecord {
  std::string experiment;
  std::string method;
  std::size_t seeds = 0;
  std::vector<std::size_t> epochs;
  std::map<std::string, std::vector<double>> stats;  // stat -> value per epoch
};

/// Per-epoch statistics over the completed records: median_risk, mean_risk,
/// and for multitask median_task_risk / min_task_risk (median over seeds).
AggregateRecord aggregate(std::span<const RunRecord> records);

double median(std::vector<double> values);

std::string run_csv_text(const RunRecord& record);
std::string run_meta_json(const RunRecord& record);
std::string plot_data_text(const AggregateRecord& agg);

/// experiment_method_M<width>
std::string file_stem(const std::string& experiment, const std::string& method, std::size_t width);

void write_text_file(const std::string& path, const std::string& text);
void write_run_files(const RunRecord& record, const std::string& dir);
/// Tidy CSV: experiment,method,epoch,stat,value.
void emit_plot_data(const AggregateRecord& agg, const std::string& path);

struct PlotRow {
  std::string experiment;
  std::string method;
  std::size_t epoch = 0;
  std::string stat;
  double value = 0.0;
};
std::vector<PlotRow> read_plot_data(const std::string& path);

}  // namespace cbonn
