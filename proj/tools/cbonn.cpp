// cbonn: run experiments, verification suites and MNIST file checks.
//
// Exit codes: 0 success, 1 verification or run failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbonn/config.hpp"
#include "cbonn/harness.hpp"
#include "cbonn/mnist.hpp"
#include "cbonn/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct RunArgs {
  std::string config_path;
  std::string experiment;
  std::vector<std::string> methods;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t seeds = 0;
  std::size_t epochs = 0;
  std::size_t workers = 0;
  std::string out;
  bool quiet = false;
  bool dry_run = false;
};

cbonn::ExperimentConfig resolve(const RunArgs& a, const std::string& method, const CLI::App& cmd) {
  cbonn::ExperimentConfig cfg = a.config_path.empty() ? cbonn::preset(a.experiment, method)
                                                      : cbonn::load_config_file(a.config_path, a.experiment, method);
  if (const char* env = std::getenv("CBONN_OUT_DIR"); env != nullptr && *env != '\0') cfg.out_dir = env;
  if (cmd.count("--seed")) cfg.seed = a.seed;
  if (cmd.count("--seeds")) cfg.seeds = a.seeds;
  if (cmd.count("--epochs")) cfg.epochs = a.epochs;
  if (cmd.count("--workers")) cfg.workers = a.workers;
  if (cmd.count("--out")) cfg.out_dir = a.out;
  for (const auto& o : a.overrides) cbonn::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

int do_run(const RunArgs& a, const CLI::App& cmd) {
  if (a.config_path.empty() && a.experiment.empty()) {
    std::cerr << "run: give --config PATH or --experiment NAME; `cbonn list-experiments --schema` lists the config keys\n";
    return kUsage;
  }
  std::vector<cbonn::ExperimentConfig> configs;
  try {
    if (a.methods.empty()) {
      configs.push_back(resolve(a, "", cmd));
    } else {
      for (const auto& m : a.methods) configs.push_back(resolve(a, m, cmd));
    }
    cbonn::check_shared_parameters(configs);
  } catch (const cbonn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  }

  int status = kOk;
  for (const auto& cfg : configs) {
    const std::string stem = cbonn::file_stem(cfg.experiment, cfg.method, cfg.width);
    std::cout << "# resolved config, hash " << cbonn::config_hash(cfg) << "\n"
              << cbonn::resolved_text(cfg);
    const double margin = cfg.cbo.consensus_margin();
    if (cfg.method != "adam") {
      std::cout << "# consensus margin 2 lambda - sigma^2 = " << cbonn::format_real(margin) << "\n";
      if (margin <= 0.0) std::cerr << "warning: 2 lambda <= sigma^2 for " << stem << "\n";
    }
    if (a.dry_run) continue;

    cbonn::RunOptions opts;
    if (!a.quiet) opts.log = [](const std::string& line) { std::cout << line << "\n" << std::flush; };
    std::vector<cbonn::RunRecord> records;
    try {
      cbonn::write_text_file((std::filesystem::path(cfg.out_dir) / (stem + ".config")).string(),
                             cbonn::resolved_text(cfg));
      records = cbonn::run_experiment(cfg, opts);
    } catch (const std::exception& e) {
      std::cerr << "run failed: " << e.what() << "\n";
      return kFailed;
    }
    std::size_t incomplete = 0;
    for (const auto& r : records)
      if (!r.completed) {
        ++incomplete;
        std::cerr << stem << " seed " << r.seed << " aborted: " << r.diagnostic << "\n";
      }
    if (incomplete == records.size()) {
      status = kFailed;
      continue;
    }
    const auto agg = cbonn::aggregate(records);
    const std::string agg_path = (std::filesystem::path(cfg.out_dir) / (stem + "_aggregate.csv")).string();
    cbonn::emit_plot_data(agg, agg_path);
    const auto& med = agg.stats.at("median_risk");
    std::cout << stem << ": " << agg.seeds << " runs, median risk epoch 0 " << cbonn::format_real(med.front())
              << ", epoch " << agg.epochs.back() << " " << cbonn::format_real(med.back()) << "\n"
              << "wrote " << agg_path << "\n";
    if (incomplete > 0) status = kFailed;
  }
  return status;
}

int do_verify(const std::vector<std::string>& suites_in, std::uint64_t seed) {
  const auto& all = cbonn::verify_suites();
  const std::vector<std::string> suites = suites_in.empty() ? all : suites_in;
  bool ok = true;
  std::cout << std::left << std::setw(12) << "suite" << std::setw(8) << "result" << std::setw(10) << "checks"
            << std::setw(10) << "failures" << std::setw(14) << "worst" << "tolerance\n";
  for (const auto& s : suites) {
    cbonn::SuiteResult r;
    try {
      r = cbonn::run_suite(s, seed);
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << "\n";
      return kUsage;
    }
    ok = ok && r.passed;
    std::cout << std::left << std::setw(12) << r.name << std::setw(8) << (r.passed ? "PASS" : "FAIL")
              << std::setw(10) << r.checks << std::setw(10) << r.failures << std::setw(14)
              << std::setprecision(3) << r.worst << r.tolerance;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
  }
  return ok ? kOk : kFailed;
}

int do_mnist_check(const std::string& dir, std::string images, std::string labels) {
  if (images.empty()) images = (std::filesystem::path(dir) / "train-images-idx3-ubyte").string();
  if (labels.empty()) labels = (std::filesystem::path(dir) / "train-labels-idx1-ubyte").string();
  try {
    const auto img = cbonn::read_idx_images(images);
    const auto lab = cbonn::read_idx_labels(labels);
    std::cout << images << ": magic 0x00000803, " << img.count << " images of " << img.rows << "x" << img.cols
              << "\n"
              << labels << ": magic 0x00000801, " << lab.labels.size() << " labels\n";
    const auto data = cbonn::load_mnist_idx(images, labels, 0);
    std::vector<std::size_t> per_class(10, 0);
    for (auto l : data.labels) ++per_class[l];
    std::cout << "class counts:";
    for (auto c : per_class) std::cout << " " << c;
    std::cout << "\nok\n";
  } catch (const std::exception& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}

int do_list(bool schema) {
  for (const auto& id : cbonn::experiment_ids()) {
    std::cout << id << "  methods:";
    for (const auto& m : cbonn::methods_for(id)) std::cout << " " << m;
    std::cout << "\n";
  }
  if (schema) {
    std::cout << "\nconfig keys (file lines `key = value`, or --override key=value):\n";
    for (const auto& e : cbonn::config_schema())
      std::cout << "  " << std::left << std::setw(24) << e.key << std::setw(8) << e.type << e.description << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-based optimisation for two-layer networks"};
  app.set_version_flag("--version", std::string(cbonn::version()));
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "train with one or more methods and write CSVs");
  run_cmd->add_option("--config", run.config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
  run_cmd->add_option("--experiment", run.experiment, "sine | mnist | multitask | square_ot");
  run_cmd->add_option("--method", run.methods, "method; repeat to compare methods on one experiment");
  run_cmd->add_option("--seed", run.seed, "first seed");
  run_cmd->add_option("--seeds", run.seeds, "number of seeds")->check(CLI::PositiveNumber);
  run_cmd->add_option("--epochs", run.epochs, "training epochs");
  run_cmd->add_option("--workers", run.workers, "threads for per-particle work")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run.out, "output directory (default: $CBONN_OUT_DIR, else run.out_dir)");
  run_cmd->add_option("--override", run.overrides, "key=value, repeatable");
  run_cmd->add_flag("--dry-run", run.dry_run, "print the resolved config and stop");
  run_cmd->add_flag("--quiet", run.quiet, "no per-epoch progress");

  std::vector<std::string> suites;
  std::uint64_t verify_seed = 7;
  auto* verify_cmd = app.add_subcommand("verify", "oracle and property checks; exit 1 on failure");
  verify_cmd->add_option("--suite", suites, "gradient | w2 | barycenter | frechet | contraction | consensus (default: all)");
  verify_cmd->add_option("--seed", verify_seed, "fixture seed");

  std::string mnist_dir = "data/mnist", images, labels;
  auto* mnist_cmd = app.add_subcommand("mnist-check", "validate MNIST IDX files and print their headers");
  mnist_cmd->add_option("--dir", mnist_dir, "directory with the standard file names");
  mnist_cmd->add_option("--images", images, "image file (overrides --dir)");
  mnist_cmd->add_option("--labels", labels, "label file (overrides --dir)");

  bool schema = false;
  auto* list_cmd = app.add_subcommand("list-experiments", "print experiment ids and their methods");
  list_cmd->add_flag("--schema", schema, "also print the config schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*run_cmd) return do_run(run, *run_cmd);
  if (*verify_cmd) return do_verify(suites, verify_seed);
  if (*mnist_cmd) return do_mnist_check(mnist_dir, images, labels);
  if (*list_cmd) return do_list(schema);
  return kUsage;
}
