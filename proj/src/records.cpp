#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cbonn/harness.hpp"

namespace cbonn {

std::string file_stem(const std::string& experiment, const std::string& method, std::size_t width) {
  return experiment + "_" + method + "_M" + std::to_string(width);
}

std::string run_csv_text(const RunRecord& record) {
  std::ostringstream out;
  out << "epoch,risk,alpha,sigma";
  if (record.multitask()) out << ",median_task_risk,min_task_risk";
  out << "\n";
  for (const auto& r : record.rows) {
    out << r.epoch << ',' << format_real(r.risk) << ',' << format_real(r.alpha) << ','
        << format_real(r.sigma);
    if (record.multitask()) out << ',' << format_real(r.median_task_risk) << ',' << format_real(r.min_task_risk);
    out << "\n";
  }
  return out.str();
}

std::string run_meta_json(const RunRecord& record) {
  nlohmann::ordered_json j;
  j["experiment"] = record.experiment;
  j["method"] = record.method;
  j["width"] = record.width;
  j["seed"] = record.seed;
  j["config_hash"] = record.config_hash;
  j["code_version"] = record.code_version;
  j["completed"] = record.completed;
  j["diagnostic"] = record.diagnostic;
  j["notes"] = record.notes;
  j["config"] = record.config_text;
  j["wall_ms"] = record.wall_ms;
  return j.dump(2) + "\n";
}

std::string plot_data_text(const AggregateRecord& agg) {
  std::ostringstream out;
  out << "experiment,method,epoch,stat,value\n";
  for (const auto& [stat, values] : agg.stats)
    for (std::size_t i = 0; i < values.size(); ++i)
      out << agg.experiment << ',' << agg.method << ',' << agg.epochs[i] << ',' << stat << ','
          << format_real(values[i]) << "\n";
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw std::runtime_error(path + ": cannot create directory: " + ec.message());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_run_files(const RunRecord& record, const std::string& dir) {
  const std::string base = (std::filesystem::path(dir) /
                            (file_stem(record.experiment, record.method, record.width) + "_seed" +
                             std::to_string(record.seed)))
                               .string();
  write_text_file(base + ".csv", run_csv_text(record));
  write_text_file(base + ".meta.json", run_meta_json(record));
}

void emit_plot_data(const AggregateRecord& agg, const std::string& path) {
  write_text_file(path, plot_data_text(agg));
}

std::vector<PlotRow> read_plot_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "experiment,method,epoch,stat,value")
    throw std::runtime_error(path + ": unexpected header");
  std::vector<PlotRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 columns");
    try {
      rows.push_back({cells[0], cells[1], std::stoull(cells[2]), cells[3], std::stod(cells[4])});
    } catch (const std::logic_error&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace cbonn
