#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lagscope/harness.hpp"

namespace lagscope::harness {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string bool_name(bool b) { return b ? "true" : "false"; }

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["noise"] = noise_name(cfg.noise_kind);
  j["mixed"] = cfg.mixed;
  j["snr_grid"] = cfg.snr_grid;
  j["n_trial"] = cfg.n_trial;
  j["tau_min"] = cfg.tau_min;
  j["tau_max"] = cfg.tau_max;
  j["seg_len"] = cfg.seg_len;
  j["n_segments"] = cfg.n_segments;
  j["fs"] = cfg.fs;
  j["n_boot"] = cfg.n_boot;
  j["ci_width"] = cfg.ci_width;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(estimators::method_name(m));
  j["methods"] = methods;
  j["seed"] = cfg.master_seed;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  const auto noise = noise_from_name(j.at("noise").get<std::string>());
  if (!noise) throw std::invalid_argument("config: unknown noise kind");
  cfg.noise_kind = *noise;
  cfg.mixed = j.at("mixed").get<bool>();
  cfg.snr_grid = j.at("snr_grid").get<std::vector<double>>();
  cfg.n_trial = j.at("n_trial").get<std::size_t>();
  cfg.tau_min = j.at("tau_min").get<std::int64_t>();
  cfg.tau_max = j.at("tau_max").get<std::int64_t>();
  cfg.seg_len = j.at("seg_len").get<std::size_t>();
  cfg.n_segments = j.at("n_segments").get<std::size_t>();
  cfg.fs = j.at("fs").get<double>();
  cfg.n_boot = j.at("n_boot").get<std::size_t>();
  cfg.ci_width = j.at("ci_width").get<double>();
  cfg.methods.clear();
  for (const auto& name : j.at("methods")) {
    const auto m = estimators::method_from_name(name.get<std::string>());
    if (!m) throw std::invalid_argument("config: unknown method " + name.get<std::string>());
    cfg.methods.push_back(*m);
  }
  cfg.master_seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canonical = config_to_json(cfg).dump();
  // FNV-1a, stable across platforms
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string results_to_csv(const ExperimentResult& result) {
  std::string out = "method,alpha,mixed,mae_ms,mae_ms_filtered,rejection_rate,n_accepted\n";
  for (const ResultRow& row : result.rows) {
    out += estimators::method_name(row.method);
    out += ',';
    out += format_double(row.alpha);
    out += ',';
    out += bool_name(row.mixed);
    out += ',';
    out += format_double(row.mae_ms);
    out += ',';
    out += format_double(row.mae_ms_filtered);
    out += ',';
    out += format_double(row.rejection_rate);
    out += ',';
    out += std::to_string(row.n_accepted);
    out += '\n';
  }
  return out;
}

std::string results_to_json(const ExperimentResult& result) {
  json j;
  j["schema"] = 1;
  j["config"] = config_to_json(result.config);
  j["config_hash"] = result.config_hash;
  json rows = json::array();
  for (const ResultRow& row : result.rows) {
    json r;
    r["method"] = estimators::method_name(row.method);
    r["alpha"] = row.alpha;
    r["mixed"] = row.mixed;
    r["mae_ms"] = row.mae_ms;
    r["mae_ms_filtered"] = row.mae_ms_filtered;
    r["rejection_rate"] = row.rejection_rate;
    r["n_accepted"] = row.n_accepted;
    rows.push_back(std::move(r));
  }
  j["results"] = rows;
  return j.dump(2) + "\n";
}

ExperimentResult results_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("schema").get<int>() != 1) throw std::invalid_argument("results: unknown schema");
  ExperimentResult result;
  result.config = config_from_json(j.at("config"));
  result.master_seed = result.config.master_seed;
  result.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& r : j.at("results")) {
    ResultRow row;
    const auto m = estimators::method_from_name(r.at("method").get<std::string>());
    if (!m) throw std::invalid_argument("results: unknown method");
    row.method = *m;
    row.alpha = r.at("alpha").get<double>();
    row.mixed = r.at("mixed").get<bool>();
    row.mae_ms = r.at("mae_ms").is_null() ? std::nan("") : r.at("mae_ms").get<double>();
    row.mae_ms_filtered =
        r.at("mae_ms_filtered").is_null() ? std::nan("") : r.at("mae_ms_filtered").get<double>();
    row.rejection_rate = r.at("rejection_rate").get<double>();
    row.n_accepted = r.at("n_accepted").get<std::size_t>();
    result.rows.push_back(row);
  }
  return result;
}

std::string bias_to_csv(const BiasResult& result) {
  std::string out = "method,alpha,mixed,tau_true,tau_est\n";
  for (const BiasRow& row : result.rows) {
    out += estimators::method_name(row.method);
    out += ',';
    out += format_double(row.alpha);
    out += ',';
    out += bool_name(row.mixed);
    out += ',';
    out += std::to_string(row.tau_true);
    out += ',';
    out += format_double(row.tau_est);
    out += '\n';
  }
  return out;
}

std::string bias_to_json(const BiasResult& result) {
  json j;
  j["schema"] = 1;
  j["config_hash"] = result.config_hash;
  j["seed"] = result.master_seed;
  json rows = json::array();
  for (const BiasRow& row : result.rows) {
    json r;
    r["method"] = estimators::method_name(row.method);
    r["alpha"] = row.alpha;
    r["mixed"] = row.mixed;
    r["tau_true"] = row.tau_true;
    r["tau_est"] = row.tau_est;
    rows.push_back(std::move(r));
  }
  j["rows"] = rows;
  json pcc = json::array();
  for (const PccSummary& s : result.pcc) {
    json r;
    r["method"] = estimators::method_name(s.method);
    r["alpha"] = s.alpha;
    r["mixed"] = s.mixed;
    r["pcc"] = s.defined ? json(s.r) : json(nullptr);
    r["p_value"] = s.defined ? json(s.p) : json(nullptr);
    r["dof"] = s.dof;
    r["n"] = s.n;
    pcc.push_back(std::move(r));
  }
  j["pcc"] = pcc;
  return j.dump(2) + "\n";
}

void write_results(const ExperimentResult& result, OutputFormat format, const std::string& path) {
  write_file(path, format == OutputFormat::csv ? results_to_csv(result) : results_to_json(result));
}

void write_bias(const BiasResult& result, OutputFormat format, const std::string& path) {
  write_file(path, format == OutputFormat::csv ? bias_to_csv(result) : bias_to_json(result));
}

siggen::TrialPair load_pair_csv(const std::string& path, double fs, std::size_t seg_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);

  siggen::TrialPair pair;
  pair.fs = fs;
  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 2)
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": expected 2 columns, found " +
                               std::to_string(fields.size()));

    auto parse_field = [&](const std::string& raw, double& value) {
      std::size_t begin = raw.find_first_not_of(" \t");
      if (begin == std::string::npos) return false;
      const std::size_t end = raw.find_last_not_of(" \t") + 1;
      const char* ptr = raw.data() + begin;
      char* parsed_end = nullptr;
      value = std::strtod(ptr, &parsed_end);
      return parsed_end == raw.data() + end && parsed_end != ptr;
    };

    double x = 0.0, y = 0.0;
    const bool ok = parse_field(fields[0], x) && parse_field(fields[1], y);
    if (!ok) {
      if (first_data_line) {
        // optional header
        first_data_line = false;
        continue;
      }
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": non-numeric value");
    }
    if (!std::isfinite(x) || !std::isfinite(y))
      throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                               ": non-finite value");
    first_data_line = false;
    pair.x_obs.push_back(x);
    pair.y_obs.push_back(y);
  }
  if (pair.x_obs.size() < 2 * seg_len)
    throw std::invalid_argument("csv: need at least 2 full segments (" +
                                std::to_string(2 * seg_len) + " rows), found " +
                                std::to_string(pair.x_obs.size()));
  return pair;
}

}  // namespace lagscope::harness
