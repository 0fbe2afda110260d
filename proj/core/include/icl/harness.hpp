#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icl/features.hpp"
#include "icl/lasso.hpp"
#include "icl/transformer.hpp"

namespace icl {

enum class InputDistribution { Ball, Sphere, Gaussian };
enum class NoiseDistribution { Gaussian, Uniform };

const char* to_string(InputDistribution v);
const char* to_string(NoiseDistribution v);
InputDistribution input_distribution_from_string(const std::string& s);
NoiseDistribution noise_distribution_from_string(const std::string& s);

struct ExperimentConfig {
  int schema_version = 1;
  std::shared_ptr<const ClassSpec> spec;
  int d = 4;
  int n = 16;
  int N = 64;
  int L = 21;
  double sigma = 0.0;
  double tau = 1e6;
  double tau_ff = 100.0;
  std::optional<double> eta;     // unset: 1 / (2(n+1))
  std::optional<double> lambda;  // unset: default_lambda with c1
  double c1 = 1.0;
  double eps_dis = 0.0;
  double eps_hat = 0.0;
  double log_cover = 0.0;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t member_seed = 0;
  std::uint64_t bank_seed = 0;
  int test_points = 256;
  InputDistribution input = InputDistribution::Ball;
  NoiseDistribution noise = NoiseDistribution::Gaussian;
  int workers = 1;
  std::string output;

  void validate() const;
  double resolved_eta() const;
  double resolved_lambda() const;
};

struct Task {
  FunctionInstance f;
  Prompt prompt;
  Vec x_query;
};

Vec sample_input(int d, InputDistribution dist, std::mt19937_64& rng);

Task generate_task(std::shared_ptr<const ClassSpec> spec, std::uint64_t member_seed, int N, int d,
                   double sigma, std::uint64_t data_seed,
                   InputDistribution input = InputDistribution::Ball,
                   NoiseDistribution noise = NoiseDistribution::Gaussian);

struct EpisodeReport {
  double y_hat = 0.0;
  double truth = 0.0;
  double squared_error = 0.0;
  double eps_opt_vs_rho_star = 0.0;
  double eps_opt_vs_minimizer = 0.0;
  double l1_of_rho_L = 0.0;
  double max_emulation_residual = 0.0;
  double readout_consistency_gap = 0.0;
  bool emulation_ok = false;
  bool oracle_empirical = false;
};

// Everything an episode builds, kept for callers that want to inspect it.
struct EpisodeArtifacts {
  std::shared_ptr<const FeatureBank> bank;
  Task task;
  LassoProblem problem;
  TransformerWeights weights;
  EmulationReport emulation;
  Vec rho_L;
};

EpisodeReport run_episode(const ExperimentConfig& config, std::uint64_t member_seed,
                          std::uint64_t data_seed, EpisodeArtifacts* artifacts = nullptr);

struct EpisodeRisk {
  std::uint64_t data_seed = 0;
  double mse = 0.0;
};

struct RiskEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<EpisodeRisk> episodes;
};

RiskEstimate risk_estimate(const ExperimentConfig& config, std::uint64_t member_seed,
                           const std::vector<std::uint64_t>& data_seeds);

struct SweepGrid {
  std::vector<int> N, L, n;
  std::vector<double> tau, lambda;
};

// Parses "N=32,128,512" style axis assignments into the grid.
void add_grid_axis(SweepGrid& grid, const std::string& assignment);

struct SweepRow {
  std::string cell_key;
  ExperimentConfig config;
  RiskEstimate risk;
  std::string error;
};

// Streams one CSV row per grid cell to `csv_path` (header first). Cells whose
// key already appears in an existing file are skipped. Returns all rows of
// this run, in grid order.
std::vector<SweepRow> sweep(const ExperimentConfig& config, const SweepGrid& grid,
                            const std::string& csv_path);
std::vector<SweepRow> sweep(const ExperimentConfig& config, const SweepGrid& grid, std::ostream& os);

}  // namespace icl
