#pragma once

// Experiment configuration: a flat set of dotted keys with a published schema,
// full-scale presets per (experiment, method), and a canonical text echo.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbonn/network.hpp"
#include "cbonn/optimizers.hpp"

namespace cbonn {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ScheduleUnit { Epoch, Iteration };

struct ExperimentConfig {
  std::string experiment = "sine";  // sine | mnist | multitask | square_ot
  std::string method = "cbo";       // adam | cbo | hybrid | multitask_cbo | ot_cbo

  std::size_t width = 100;

  std::size_t samples = 8000;  // S; for mnist the subset size
  double noise_std = 0.01;
  std::size_t batch_size = 800;  // S'
  std::size_t tasks = 100;       // P, multitask only
  std::string mnist_dir = "data/mnist";

  CBOConfig cbo;
  double init_low = -1.0;
  double init_high = 1.0;
  double gamma = 0.7;
  AdamConfig adam;

  ScheduleConfig schedule;
  ScheduleUnit schedule_unit = ScheduleUnit::Epoch;

  double ot_tol = 1e-12;
  std::size_t ot_max_iters = 50;
  bool ot_warm_start = false;  // start each barycenter from the previous one

  std::size_t epochs = 500;
  std::uint64_t seed = 1;
  std::size_t seeds = 10;
  std::size_t workers = 1;
  std::string out_dir = "runs";

  NetworkShape shape() const;
  LossKind loss() const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
  std::vector<std::uint64_t> seed_list() const;
};

const std::vector<std::string>& experiment_ids();
/// Methods that make sense for an experiment; the first one is the default.
const std::vector<std::string>& methods_for(const std::string& experiment);

/// Full-scale parameter block for (experiment, method).
ExperimentConfig preset(const std::string& experiment, const std::string& method);

struct SchemaEntry {
  std::string key;
  std::string type;
  std::string description;
};
const std::vector<SchemaEntry>& config_schema();

/// Sets one key from its text form. Unknown keys and malformed values throw.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_setting(const ExperimentConfig& cfg, const std::string& key);

/// "key=value" from the command line.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

struct ConfigLine {
  std::string key;
  std::string value;
  std::size_t line = 0;
};
/// `key = value` lines; '#' starts a comment; blank lines are skipped.
std::vector<ConfigLine> parse_config_text(const std::string& text);

/// Preset for the experiment/method named in `text` (or the fallbacks), then
/// every line of `text` applied in order.
ExperimentConfig config_from_text(const std::string& text, const std::string& experiment = "",
                                  const std::string& method = "");
ExperimentConfig load_config_file(const std::string& path, const std::string& experiment = "",
                                  const std::string& method = "");

/// Every schema key in schema order, reals at 17 significant digits. Feeding
/// this back through config_from_text reproduces `cfg` exactly.
std::string resolved_text(const ExperimentConfig& cfg);
/// FNV-1a 64 of resolved_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Methods compared within one experiment must share S' and dt.
void check_shared_parameters(const std::vector<ExperimentConfig>& configs);

std::string format_real(double v);

}  // namespace cbonn
