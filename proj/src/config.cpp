#include "cbonn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cbonn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (!v.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || !std::isfinite(out))
    throw ConfigError(key + ": expected a finite real, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  SchemaEntry meta;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field real_field(std::string key, std::string desc, T ExperimentConfig::*outer, double T::*inner) {
  return {{key, "real", std::move(desc)},
          [key, outer, inner](ExperimentConfig& c, const std::string& v) { c.*outer.*inner = parse_real(key, v); },
          [outer, inner](const ExperimentConfig& c) { return format_real(c.*outer.*inner); }};
}

Field real_field(std::string key, std::string desc, double ExperimentConfig::*member) {
  return {{key, "real", std::move(desc)},
          [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_real(key, v); },
          [member](const ExperimentConfig& c) { return format_real(c.*member); }};
}

template <class U>
Field uint_field(std::string key, std::string desc, U ExperimentConfig::*member) {
  return {{key, "int", std::move(desc)},
          [key, member](ExperimentConfig& c, const std::string& v) {
            c.*member = static_cast<U>(parse_uint(key, v));
          },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field string_field(std::string key, std::string desc, std::string ExperimentConfig::*member) {
  return {{key, "string", std::move(desc)},
          [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(string_field("experiment", "sine | mnist | multitask | square_ot", &ExperimentConfig::experiment));
    f.push_back(string_field("method", "adam | cbo | hybrid | multitask_cbo | ot_cbo", &ExperimentConfig::method));
    f.push_back(uint_field("network.width", "hidden neurons M", &ExperimentConfig::width));
    f.push_back(uint_field("data.samples", "training samples S (mnist: subset size, 0 = all)", &ExperimentConfig::samples));
    f.push_back(real_field("data.noise_std", "target noise standard deviation", &ExperimentConfig::noise_std));
    f.push_back(uint_field("data.batch_size", "minibatch size S'", &ExperimentConfig::batch_size));
    f.push_back(uint_field("data.tasks", "number of tasks P (multitask)", &ExperimentConfig::tasks));
    f.push_back(string_field("data.mnist_dir", "directory with train-images-idx3-ubyte and train-labels-idx1-ubyte",
                             &ExperimentConfig::mnist_dir));
    f.push_back({{"cbo.particles", "int", "ensemble size N"},
                 [](ExperimentConfig& c, const std::string& v) { c.cbo.particles = parse_uint("cbo.particles", v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.cbo.particles); }});
    f.push_back(real_field("cbo.lambda", "drift rate lambda", &ExperimentConfig::cbo, &CBOConfig::lambda));
    f.push_back(real_field("cbo.sigma", "diffusion scale sigma", &ExperimentConfig::cbo, &CBOConfig::sigma));
    f.push_back(real_field("cbo.alpha", "inverse temperature alpha", &ExperimentConfig::cbo, &CBOConfig::alpha));
    f.push_back(real_field("cbo.dt", "time step / learning rate, shared by every method", &ExperimentConfig::cbo,
                           &CBOConfig::dt));
    f.push_back(real_field("init.low", "lower bound of the uniform particle initialisation", &ExperimentConfig::init_low));
    f.push_back(real_field("init.high", "upper bound of the uniform particle initialisation", &ExperimentConfig::init_high));
    f.push_back(real_field("hybrid.gamma", "Adam share gamma of the hybrid update", &ExperimentConfig::gamma));
    f.push_back(real_field("adam.beta1", "first moment decay", &ExperimentConfig::adam, &AdamConfig::beta1));
    f.push_back(real_field("adam.beta2", "second moment decay", &ExperimentConfig::adam, &AdamConfig::beta2));
    f.push_back(real_field("adam.delta", "denominator guard", &ExperimentConfig::adam, &AdamConfig::delta));
    f.push_back({{"schedule.alpha_enabled", "bool", "multiply alpha every alpha_every units"},
                 [](ExperimentConfig& c, const std::string& v) {
                   c.schedule.alpha_enabled = parse_bool("schedule.alpha_enabled", v);
                 },
                 [](const ExperimentConfig& c) { return std::string(c.schedule.alpha_enabled ? "true" : "false"); }});
    f.push_back(real_field("schedule.alpha_factor", "alpha multiplier", &ExperimentConfig::schedule,
                           &ScheduleConfig::alpha_factor));
    f.push_back({{"schedule.alpha_every", "int", "units between alpha updates"},
                 [](ExperimentConfig& c, const std::string& v) {
                   c.schedule.alpha_every = parse_uint("schedule.alpha_every", v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.schedule.alpha_every); }});
    f.push_back(real_field("schedule.alpha_cap", "alpha never exceeds this", &ExperimentConfig::schedule,
                           &ScheduleConfig::alpha_cap));
    f.push_back({{"schedule.sigma_enabled", "bool", "multiply sigma every sigma_every units"},
                 [](ExperimentConfig& c, const std::string& v) {
                   c.schedule.sigma_enabled = parse_bool("schedule.sigma_enabled", v);
                 },
                 [](const ExperimentConfig& c) { return std::string(c.schedule.sigma_enabled ? "true" : "false"); }});
    f.push_back(real_field("schedule.sigma_factor", "sigma multiplier", &ExperimentConfig::schedule,
                           &ScheduleConfig::sigma_factor));
    f.push_back({{"schedule.sigma_every", "int", "units between sigma updates"},
                 [](ExperimentConfig& c, const std::string& v) {
                   c.schedule.sigma_every = parse_uint("schedule.sigma_every", v);
                 },
                 [](const ExperimentConfig& c) { return std::to_string(c.schedule.sigma_every); }});
    f.push_back({{"schedule.unit", "enum", "epoch | iteration: what the schedule counts"},
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "epoch") c.schedule_unit = ScheduleUnit::Epoch;
                   else if (v == "iteration") c.schedule_unit = ScheduleUnit::Iteration;
                   else throw ConfigError("schedule.unit: expected epoch or iteration, got '" + v + "'");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.schedule_unit == ScheduleUnit::Epoch ? "epoch" : "iteration");
                 }});
    f.push_back(real_field("ot.tol", "relative objective decrease that stops the barycenter iteration",
                           &ExperimentConfig::ot_tol));
    f.push_back(uint_field("ot.max_iters", "barycenter iteration cap", &ExperimentConfig::ot_max_iters));
    f.push_back({{"ot.warm_start", "bool", "start each barycenter from the previous step's barycenter"},
                 [](ExperimentConfig& c, const std::string& v) { c.ot_warm_start = parse_bool("ot.warm_start", v); },
                 [](const ExperimentConfig& c) { return std::string(c.ot_warm_start ? "true" : "false"); }});
    f.push_back(uint_field("run.epochs", "training epochs", &ExperimentConfig::epochs));
    f.push_back(uint_field("run.seed", "first seed", &ExperimentConfig::seed));
    f.push_back(uint_field("run.seeds", "number of consecutive seeds", &ExperimentConfig::seeds));
    f.push_back(uint_field("run.workers", "threads for per-particle work (results do not depend on it)",
                           &ExperimentConfig::workers));
    f.push_back(string_field("run.out_dir", "output directory", &ExperimentConfig::out_dir));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.meta.key == key) return f;
  throw ConfigError("unknown config key '" + key + "' (see `cbonn list-experiments --schema`)");
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

NetworkShape ExperimentConfig::shape() const {
  NetworkShape s;
  s.width = width;
  if (experiment == "mnist") {
    s.input_dim = 784;
    s.output_dim = 10;
  }
  return s;
}

LossKind ExperimentConfig::loss() const {
  return experiment == "mnist" ? LossKind::CrossEntropy : LossKind::SquaredError;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
  std::vector<std::uint64_t> out(seeds);
  for (std::size_t i = 0; i < seeds; ++i) out[i] = seed + i;
  return out;
}

void ExperimentConfig::validate() const {
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), experiment) == ids.end())
    throw ConfigError("unknown experiment '" + experiment + "'");
  const auto& ms = methods_for(experiment);
  if (std::find(ms.begin(), ms.end(), method) == ms.end())
    throw ConfigError("method '" + method + "' does not apply to experiment '" + experiment + "'");
  if (width == 0) throw ConfigError("network.width must be positive");
  if (experiment != "mnist" && samples == 0) throw ConfigError("data.samples must be positive");
  if (batch_size == 0) throw ConfigError("data.batch_size must be positive");
  if (experiment != "mnist" && batch_size > samples)
    throw ConfigError("data.batch_size exceeds data.samples");
  if (noise_std < 0.0) throw ConfigError("data.noise_std must be non-negative");
  if (experiment == "multitask" && tasks < 2) throw ConfigError("data.tasks must be at least 2");
  if (!(init_low < init_high)) throw ConfigError("init.low must be below init.high");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("hybrid.gamma must lie in [0, 1]");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.delta > 0.0))
    throw ConfigError("adam.beta1, adam.beta2 must lie in [0, 1) and adam.delta must be positive");
  if (workers == 0) throw ConfigError("run.workers must be positive");
  if (seeds == 0) throw ConfigError("run.seeds must be positive");
  if (ot_max_iters == 0) throw ConfigError("ot.max_iters must be positive");
  if (!(ot_tol >= 0.0)) throw ConfigError("ot.tol must be non-negative");
  if (method == "adam") {
    if (!(cbo.dt > 0.0)) throw ConfigError("cbo.dt must be positive");
    return;
  }
  try {
    if (method == "multitask_cbo" && cbo.particles < tasks)
      throw std::invalid_argument("cbo.particles must be at least data.tasks");
    cbo.validate();
    schedule.validate(cbo);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"sine", "mnist", "multitask", "square_ot"};
  return ids;
}

const std::vector<std::string>& methods_for(const std::string& experiment) {
  static const std::vector<std::string> sine{"cbo", "adam"};
  static const std::vector<std::string> mnist{"cbo", "adam", "hybrid"};
  static const std::vector<std::string> multitask{"multitask_cbo"};
  static const std::vector<std::string> square{"ot_cbo"};
  static const std::vector<std::string> none;
  if (experiment == "sine") return sine;
  if (experiment == "mnist") return mnist;
  if (experiment == "multitask") return multitask;
  if (experiment == "square_ot") return square;
  return none;
}

ExperimentConfig preset(const std::string& experiment, const std::string& method_in) {
  const auto& ms = methods_for(experiment);
  if (ms.empty()) throw ConfigError("unknown experiment '" + experiment + "'");
  const std::string method = method_in.empty() ? ms.front() : method_in;

  ExperimentConfig c;
  c.experiment = experiment;
  c.method = method;
  c.cbo.lambda = 1.0;
  if (experiment == "sine") {
    c.width = 100;
    c.samples = 8000;
    c.noise_std = 0.01;
    c.batch_size = 800;
    c.cbo = {200, 1.0, std::sqrt(1.6), 1e5, 0.1};
    c.epochs = 500;
    c.seeds = 10;
  } else if (experiment == "mnist") {
    c.width = 20;
    c.samples = 10000;
    c.noise_std = 0.0;
    c.batch_size = 1000;
    c.cbo = {1000, 1.0, std::sqrt(1.4), 1e5, 0.1};
    if (method == "hybrid") c.cbo = {1000, 1.0, std::sqrt(1.2), 1e4, 0.1};
    c.schedule.alpha_enabled = false;
    c.epochs = 100;
    c.seeds = 1;
  } else if (experiment == "multitask") {
    c.width = 100;
    c.samples = 8000;
    c.noise_std = 0.0;
    c.batch_size = 800;
    c.tasks = 100;
    c.cbo = {200, 1.0, std::sqrt(1.8), 1e4, 0.2};
    c.epochs = 500;
    c.seeds = 10;
  } else if (experiment == "square_ot") {
    c.width = 10;
    c.samples = 5000;
    c.noise_std = 0.01;
    c.batch_size = 2500;
    c.cbo = {100, 1.0, std::sqrt(1.2), 1e4, 0.1};
    c.init_low = -2.0;
    c.init_high = 2.0;
    c.schedule.sigma_enabled = true;
    c.epochs = 500;
    c.seeds = 10;
  }
  return c;
}

const std::vector<SchemaEntry>& config_schema() {
  static const std::vector<SchemaEntry> schema = [] {
    std::vector<SchemaEntry> s;
    for (const auto& f : fields()) s.push_back(f.meta);
    return s;
  }();
  return schema;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, value);
}

std::string get_setting(const ExperimentConfig& cfg, const std::string& key) {
  return field(key).get(cfg);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<ConfigLine> parse_config_text(const std::string& text) {
  std::vector<ConfigLine> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
    if (out.back().key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
  }
  return out;
}

ExperimentConfig config_from_text(const std::string& text, const std::string& experiment,
                                  const std::string& method) {
  const auto lines = parse_config_text(text);
  std::string exp = experiment;
  std::string meth = method;
  for (const auto& l : lines) {
    if (l.key == "experiment" && experiment.empty()) exp = l.value;
    if (l.key == "method" && method.empty()) meth = l.value;
  }
  if (exp.empty()) throw ConfigError("config names no experiment");
  ExperimentConfig cfg = preset(exp, meth);
  for (const auto& l : lines) {
    if (l.key == "experiment" || l.key == "method") continue;
    try {
      apply_setting(cfg, l.key, l.value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(l.line) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path, const std::string& experiment,
                                  const std::string& method) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_text(ss.str(), experiment, method);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string resolved_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.meta.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : resolved_text(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_shared_parameters(const std::vector<ExperimentConfig>& configs) {
  for (const auto& c : configs) {
    if (c.experiment != configs.front().experiment)
      throw ConfigError("compared runs must belong to one experiment");
    if (c.batch_size != configs.front().batch_size)
      throw ConfigError("data.batch_size differs between " + configs.front().method + " and " + c.method);
    if (c.cbo.dt != configs.front().cbo.dt)
      throw ConfigError("cbo.dt differs between " + configs.front().method + " and " + c.method);
  }
}

}  // namespace cbonn
