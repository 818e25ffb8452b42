#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ebspec/gmm.hpp"
#include "ebspec/sim.hpp"
#include "ebspec/spectral.hpp"
#include "ebspec/types.hpp"

namespace ebspec {

// Dataset CSV: header row with columns delta_hat,s and optionally
// delta_true (any column order); one record per line.
struct Dataset {
  std::vector<ExperimentRecord> records;
  std::vector<double> delta_true;  // aligned with records when has_truth
  bool has_truth = false;
};

Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path,
                       const std::vector<ExperimentRecord>& records);
void write_dataset_csv(const std::string& path,
                       const std::vector<SimRecord>& records);

// Model files are JSON.  Spectral: {N, L, x0, t_max, f} with f in node
// order nu = -N..N (coefficients are derived, never serialized).
// Gaussian mixture: {K, alpha, mu, V}.
nlohmann::json spectral_model_to_json(const SpectralPrior& prior);
SpectralPrior spectral_model_from_json(const nlohmann::json& j);
nlohmann::json gmm_model_to_json(const GmmPrior& prior);
GmmPrior gmm_model_from_json(const nlohmann::json& j);

using AnyModel = std::variant<SpectralPrior, GmmPrior>;
AnyModel load_model(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

// One number per line (used for tabulated noise laws).
std::vector<double> read_value_list(const std::string& path);
// Two-column CSV x,density for tabulated priors.
TabulatedPrior read_tabulated_prior(const std::string& path);

}  // namespace ebspec
