#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sweep/models.hpp"

namespace sweep {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parsed model + run configuration. The file format is strict JSON: unknown
// fields are rejected with the offending key in the diagnostic.
struct ModelConfig {
  std::string model;              // builtin-car | builtin-crowd | custom
  std::string variant = "standard";  // car: standard | heavy-energy
  std::string case_name = "contact"; // crowd: contact | free
  int k = 100;
  std::vector<int> k_list = {25, 50, 100, 200};
  double tol = 1e-6;
  unsigned seed = 1u;
  SolverOptions solver;
  double epsilon_loc = 0.5;
  double mu = 0.1;

  // Custom-model payload (required when model == custom).
  struct Custom {
    int n = 0, d = 0, m = 0;
    double horizon = 1.0;
    std::vector<double> x0;
    double r1 = 1e-3, r2 = 1.0;
    double m1 = 1.0, m2 = 1.0, m3 = 0.0, beta = 1.0, rho = 1.0;
    double lipschitz_k = 0.0, growth_m = 1.0;
    std::vector<ConstraintForm> constraints;
    // f forms: "linear" (f = B a) with row-major matrix, or "affine"
    // (f = A x + B a + c).
    std::string f_type;
    std::vector<double> f_matrix;   // B, n*d row-major
    std::vector<double> f_state;    // A, n*n row-major (affine only)
    std::vector<double> f_offset;   // c, length n (affine only)
    std::string phi_type = "half-norm-squared";
    double phi_weight = 1.0;
    std::string ell_type = "control-energy";
    double ell_weight = 1.0;
    std::vector<double> u_init;  // constant node value, length n
    std::vector<double> a_init;  // constant node value, length d
  };
  std::optional<Custom> custom;
};

ModelConfig parse_config(const std::string& path);
ModelConfig parse_config_text(const std::string& json_text);

// Canonical JSON round-trip of a parsed configuration.
std::string config_to_json(const ModelConfig& cfg);

// Instantiates the model described by the configuration.
Model instantiate(const ModelConfig& cfg);

}  // namespace sweep
