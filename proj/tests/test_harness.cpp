#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbonn/config.hpp"
#include "cbonn/harness.hpp"

using namespace cbonn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(const std::string& experiment, const std::string& method) {
  ExperimentConfig c = preset(experiment, method);
  c.samples = 200;
  c.batch_size = 50;
  c.cbo.particles = 12;
  c.width = 6;
  c.tasks = 3;
  c.epochs = 3;
  c.seeds = 1;
  return c;
}

RunOptions quiet() {
  RunOptions o;
  o.write_files = false;
  return o;
}

RunRecord record_with(std::vector<double> risks, std::size_t first_epoch = 0) {
  RunRecord r;
  r.experiment = "sine";
  r.method = "cbo";
  for (std::size_t k = 0; k < risks.size(); ++k) r.rows.push_back({first_epoch + k, risks[k], NAN, NAN, 1e5, 1.0});
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("zero epochs record only the initial evaluation") {
  for (const auto& exp : experiment_ids()) {
    if (exp == "mnist") continue;
    for (const auto& method : methods_for(exp)) {
      auto cfg = small(exp, method);
      cfg.epochs = 0;
      const auto rec = run_seed(cfg, 1, nullptr, quiet());
      CAPTURE(method);
      CHECK(rec.completed);
      REQUIRE(rec.rows.size() == 1);
      CHECK(rec.rows[0].epoch == 0);
      CHECK(std::isfinite(rec.rows[0].risk));
    }
  }
}

TEST_CASE("a run is byte-identical across repeats and worker counts") {
  for (const auto& [exp, method] : std::vector<std::pair<std::string, std::string>>{
           {"sine", "cbo"}, {"sine", "adam"}, {"multitask", "multitask_cbo"}, {"square_ot", "ot_cbo"}}) {
    auto cfg = small(exp, method);
    const auto a = run_csv_text(run_seed(cfg, 4, nullptr, quiet()));
    const auto b = run_csv_text(run_seed(cfg, 4, nullptr, quiet()));
    cfg.workers = 2;
    const auto c = run_csv_text(run_seed(cfg, 4, nullptr, quiet()));
    CAPTURE(method);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a != run_csv_text(run_seed(small(exp, method), 5, nullptr, quiet())));
  }
}

TEST_CASE("every epoch gets one row") {
  const auto rec = run_seed(small("sine", "cbo"), 2, nullptr, quiet());
  REQUIRE(rec.rows.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(rec.rows[k].epoch == k);
  CHECK(rec.wall_ms.size() == 4);
  CHECK(rec.rows[3].risk < rec.rows[0].risk);
}

TEST_CASE("aggregate statistics") {
  SUBCASE("median and mean of three seeds") {
    const std::vector<RunRecord> rs{record_with({1}), record_with({2}), record_with({9})};
    const auto agg = aggregate(rs);
    CHECK(agg.seeds == 3);
    CHECK(agg.stats.at("median_risk")[0] == 2.0);
    CHECK(agg.stats.at("mean_risk")[0] == 4.0);
  }
  SUBCASE("one seed aggregates to itself") {
    const std::vector<RunRecord> rs{record_with({0.5, 0.25, 0.125})};
    const auto agg = aggregate(rs);
    CHECK(agg.stats.at("median_risk") == std::vector<double>{0.5, 0.25, 0.125});
    CHECK(agg.epochs == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("misaligned epoch grids are rejected") {
    const std::vector<RunRecord> rs{record_with({1, 2}), record_with({1, 2}, 1)};
    CHECK_THROWS(aggregate(rs));
    const std::vector<RunRecord> short_run{record_with({1, 2}), record_with({1})};
    CHECK_THROWS(aggregate(short_run));
  }
  SUBCASE("incomplete runs are left out") {
    auto broken = record_with({100});
    broken.completed = false;
    const std::vector<RunRecord> rs{record_with({1}), broken, record_with({3})};
    const auto agg = aggregate(rs);
    CHECK(agg.seeds == 2);
    CHECK(agg.stats.at("median_risk")[0] == 2.0);
  }
  CHECK(median({4, 1, 3, 2}) == 2.5);
}

TEST_CASE("multitask aggregates carry task statistics") {
  auto cfg = small("multitask", "multitask_cbo");
  cfg.seeds = 2;
  const auto recs = run_experiment(cfg, quiet());
  REQUIRE(recs.size() == 2);
  const auto agg = aggregate(recs);
  CHECK(agg.stats.count("median_task_risk") == 1);
  CHECK(agg.stats.count("min_task_risk") == 1);
  for (const auto& r : recs)
    for (const auto& row : r.rows) {
      CHECK(row.min_task_risk <= row.median_task_risk);
      CHECK(row.risk == row.median_task_risk);
    }
  CHECK(run_csv_text(recs[0]).rfind("epoch,risk,alpha,sigma,median_task_risk,min_task_risk\n", 0) == 0);
}

TEST_CASE("plot data round trips with full precision") {
  const std::vector<RunRecord> rs{record_with({0.1, 1.0 / 3.0, std::sqrt(2.0)})};
  const auto agg = aggregate(rs);
  const auto path = (fs::temp_directory_path() / "cbonn_test_plot.csv").string();
  emit_plot_data(agg, path);
  CHECK(slurp(path).rfind("experiment,method,epoch,stat,value\n", 0) == 0);
  const auto rows = read_plot_data(path);
  bool seen = false;
  for (const auto& r : rows)
    if (r.stat == "median_risk" && r.epoch == 1) {
      CHECK(r.value == 1.0 / 3.0);
      CHECK(r.experiment == "sine");
      seen = true;
    }
  CHECK(seen);
}

TEST_CASE("run files: deterministic CSV, timing in the sidecar") {
  auto cfg = small("sine", "cbo");
  const auto dir = fs::temp_directory_path() / "cbonn_test_runs";
  fs::remove_all(dir);
  cfg.out_dir = dir.string();
  cfg.seeds = 2;
  run_experiment(cfg);
  const auto stem = file_stem("sine", "cbo", 6);
  CHECK(stem == "sine_cbo_M6");
  for (int s : {1, 2}) {
    const auto csv = dir / (stem + "_seed" + std::to_string(s) + ".csv");
    const auto meta = dir / (stem + "_seed" + std::to_string(s) + ".meta.json");
    REQUIRE(fs::exists(csv));
    REQUIRE(fs::exists(meta));
    CHECK(slurp(csv).find("wall") == std::string::npos);
    CHECK(slurp(meta).find("\"wall_ms\"") != std::string::npos);
    CHECK(slurp(meta).find("\"config_hash\"") != std::string::npos);
  }
}

TEST_CASE("config echo round trips") {
  for (const auto& exp : experiment_ids())
    for (const auto& method : methods_for(exp)) {
      const auto cfg = preset(exp, method);
      const auto text = resolved_text(cfg);
      const auto back = config_from_text(text);
      CAPTURE(method);
      CHECK(resolved_text(back) == text);
      CHECK(config_hash(back) == config_hash(cfg));
      CHECK(config_hash(cfg).size() == 16);
    }
  auto a = preset("sine", "cbo");
  auto b = a;
  b.cbo.alpha = 1e4;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("record carries the per-seed config") {
  auto cfg = small("sine", "cbo");
  cfg.seeds = 3;
  const auto rec = run_seed(cfg, 7, nullptr, quiet());
  const auto back = config_from_text(rec.config_text);
  CHECK(back.seed == 7);
  CHECK(back.seeds == 1);
  CHECK(rec.config_hash == config_hash(back));
  CHECK(rec.code_version == version());
}

TEST_CASE("presets satisfy the consensus condition and share step sizes") {
  for (const auto& exp : experiment_ids()) {
    std::vector<ExperimentConfig> cfgs;
    for (const auto& method : methods_for(exp)) {
      const auto cfg = preset(exp, method);
      CHECK_NOTHROW(cfg.validate());
      if (method != "adam") CHECK(cfg.cbo.consensus_margin() > 0.0);
      cfgs.push_back(cfg);
    }
    CHECK_NOTHROW(check_shared_parameters(cfgs));
  }
  auto a = preset("sine", "cbo"), b = preset("sine", "adam");
  b.batch_size = 400;
  CHECK_THROWS_AS(check_shared_parameters({a, b}), ConfigError);
}

TEST_CASE("config errors") {
  auto cfg = preset("sine", "cbo");
  CHECK_THROWS_AS(apply_override(cfg, "cbo.nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "cbo.alpha"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "cbo.particles=many"), ConfigError);
  CHECK_THROWS_AS(config_from_text("experiment = sine\nmethod = ot_cbo\n").validate(), ConfigError);
  apply_override(cfg, "cbo.alpha=1e6");
  CHECK(cfg.cbo.alpha == 1e6);
  CHECK(get_setting(cfg, "cbo.alpha") == "1000000");
  try {
    apply_override(cfg, "cbo.nope=1");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("--schema") != std::string::npos);
  }
}

TEST_CASE("a diverging run stops with a partial record") {
  auto cfg = small("sine", "cbo");
  cfg.cbo.sigma = 1e100;
  cfg.epochs = 50;
  const auto rec = run_seed(cfg, 1, nullptr, quiet());
  CHECK_FALSE(rec.completed);
  CHECK(rec.diagnostic.find("non-finite") != std::string::npos);
  CHECK(rec.rows.size() >= 1);
  CHECK(rec.rows.size() < 51);
  for (const auto& row : rec.rows) CHECK(std::isfinite(row.risk));
}
