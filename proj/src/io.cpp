#include "ebspec/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ebspec {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw input_error(msg); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim spaces and a trailing CR
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const char* column, std::size_t row) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    char msg[160];
    std::snprintf(msg, sizeof(msg), "row %zu: cannot parse '%s' in column %s",
                  row, s.c_str(), column);
    fail(msg);
  }
  return v;
}

std::ifstream open_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open file: " + path);
  return in;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  auto header = split_csv_line(line);
  auto find_col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  int col_delta = find_col("delta_hat");
  int col_s = find_col("s");
  int col_truth = find_col("delta_true");
  if (col_delta < 0) fail(path + ": missing required column delta_hat");
  if (col_s < 0) fail(path + ": missing required column s");

  Dataset ds;
  ds.has_truth = col_truth >= 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    int needed = std::max(col_delta, std::max(col_s, col_truth));
    if (static_cast<int>(fields.size()) <= needed) {
      char msg[128];
      std::snprintf(msg, sizeof(msg), "row %zu: expected %d fields, got %zu",
                    row, needed + 1, fields.size());
      fail(msg);
    }
    ExperimentRecord r;
    r.delta_hat = parse_double(fields[col_delta], "delta_hat", row);
    r.s = parse_double(fields[col_s], "s", row);
    if (!std::isfinite(r.delta_hat) || !std::isfinite(r.s) || r.s < 0.0) {
      char msg[128];
      std::snprintf(msg, sizeof(msg),
                    "row %zu: invalid record (delta_hat=%g, s=%g)", row,
                    r.delta_hat, r.s);
      fail(msg);
    }
    ds.records.push_back(r);
    if (ds.has_truth) {
      ds.delta_true.push_back(parse_double(fields[col_truth], "delta_true", row));
    }
  }
  if (ds.records.empty()) fail(path + ": no data rows");
  return ds;
}

void write_dataset_csv(const std::string& path,
                       const std::vector<ExperimentRecord>& records) {
  std::ofstream out(path);
  if (!out) fail("cannot write file: " + path);
  out << "delta_hat,s\n";
  char buf[96];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r.delta_hat, r.s);
    out << buf;
  }
}

void write_dataset_csv(const std::string& path,
                       const std::vector<SimRecord>& records) {
  std::ofstream out(path);
  if (!out) fail("cannot write file: " + path);
  out << "delta_hat,s,delta_true\n";
  char buf[144];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r.delta_hat, r.s,
                  r.delta_true);
    out << buf;
  }
}

nlohmann::json spectral_model_to_json(const SpectralPrior& prior) {
  return nlohmann::json{{"N", prior.order()},
                        {"L", prior.domain().half_length},
                        {"x0", prior.domain().x0},
                        {"t_max", prior.domain().t_max},
                        {"f", prior.node_weights()}};
}

SpectralPrior spectral_model_from_json(const nlohmann::json& j) {
  try {
    DomainSpec dom;
    dom.half_length = j.at("L").get<double>();
    dom.x0 = j.at("x0").get<double>();
    dom.t_max = j.at("t_max").get<double>();
    if (!(dom.half_length > 0.0) || !(dom.t_max >= 0.0)) {
      fail("model: L must be > 0 and t_max >= 0");
    }
    int order = j.at("N").get<int>();
    auto f = j.at("f").get<std::vector<double>>();
    return SpectralPrior(order, std::move(f), dom);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed spectral model: ") + e.what());
  }
}

nlohmann::json gmm_model_to_json(const GmmPrior& prior) {
  return nlohmann::json{{"K", prior.K},
                        {"alpha", prior.alpha},
                        {"mu", prior.mu},
                        {"V", prior.V}};
}

GmmPrior gmm_model_from_json(const nlohmann::json& j) {
  try {
    GmmPrior p;
    p.K = j.at("K").get<int>();
    p.alpha = j.at("alpha").get<std::vector<double>>();
    p.mu = j.at("mu").get<std::vector<double>>();
    p.V = j.at("V").get<std::vector<double>>();
    if (p.K < 1 || p.alpha.size() != static_cast<std::size_t>(p.K) ||
        p.mu.size() != static_cast<std::size_t>(p.K) ||
        p.V.size() != static_cast<std::size_t>(p.K)) {
      fail("malformed mixture model: inconsistent sizes");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed mixture model: ") + e.what());
  }
}

AnyModel load_model(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(path + ": invalid JSON: " + e.what());
  }
  if (j.contains("f")) return spectral_model_from_json(j);
  if (j.contains("alpha")) return gmm_model_from_json(j);
  fail(path + ": unrecognized model file (expected key 'f' or 'alpha')");
}

void save_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) fail("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

std::vector<double> read_value_list(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  std::vector<double> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    auto fields = split_csv_line(line);
    if (fields.empty() || fields[0].empty()) continue;
    out.push_back(parse_double(fields[0], "value", row));
  }
  if (out.empty()) fail(path + ": no values");
  return out;
}

TabulatedPrior read_tabulated_prior(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "x" || header[1] != "density") {
    fail(path + ": expected header x,density");
  }
  TabulatedPrior prior;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() < 2) fail(path + ": short row in tabulated prior");
    prior.x.push_back(parse_double(fields[0], "x", row));
    prior.density.push_back(parse_double(fields[1], "density", row));
  }
  if (prior.x.size() < 2) fail(path + ": need at least two grid points");
  // normalize so users can pass unnormalized shapes
  double integral = 0.0;
  for (std::size_t i = 1; i < prior.x.size(); ++i) {
    integral += 0.5 * (prior.density[i] + prior.density[i - 1]) *
                (prior.x[i] - prior.x[i - 1]);
  }
  if (!(integral > 0.0)) fail(path + ": density integrates to zero");
  for (double& d : prior.density) d /= integral;
  return prior;
}

}  // namespace ebspec
