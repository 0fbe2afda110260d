#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "icl/common.hpp"

namespace icl {

enum class ClassKind { FiniteSpectrum, TwoLayerLogistic, Linear, LinearCombination };

const char* to_string(ClassKind kind);
ClassKind class_kind_from_string(const std::string& s);

struct Atom {
  Vec omega;
  double amplitude_bound = 0.0;
};

// One direction of a discretized two-layer logistic class. rho_max is the
// envelope mass carried by that direction (cell weight already folded in).
struct Direction {
  Vec a;
  double rho_max = 0.0;
};

struct ClassSpec {
  ClassKind kind = ClassKind::FiniteSpectrum;
  int dim = 1;
  std::vector<Atom> atoms;            // FiniteSpectrum
  double b_max = 0.0;                 // FiniteSpectrum offset bound
  std::vector<Direction> directions;  // TwoLayerLogistic
  double c_a = 0.0;                   // Linear: ||a||_2 bound; combination: l1 bound on mixing weights
  double c_b = 0.0;                   // Linear / combination offset bound
  std::vector<ClassSpec> children;    // LinearCombination

  void validate() const;
};

// A member f of a class. Which fields are populated depends on parent->kind:
//   FiniteSpectrum    f(x) = sum_k amplitudes_k cos(omega_k.x + phases_k) + offset
//   TwoLayerLogistic  f(x) = sum_j amplitudes_j sigmoid(a_j.x)
//   Linear            f(x) = slope.x + offset
//   LinearCombination f(x) = sum_i mix_i components_i(x) + offset
struct FunctionInstance {
  std::shared_ptr<const ClassSpec> parent;
  Vec amplitudes;
  Vec phases;
  double offset = 0.0;
  Vec slope;
  std::vector<FunctionInstance> components;
  Vec mix;

  double operator()(const Vec& x) const;
  void validate() const;
};

struct FeaturePair {
  double t = 0.0;
  Vec omega;
};

struct FeatureBank {
  int n = 0;
  int dim = 0;
  double tau = 0.0;
  std::vector<FeaturePair> pairs;
  std::uint64_t seed = 0;

  void validate() const;
  // n x dim matrix of omega_i / ||omega_i||.
  Mat unit_directions() const;
  Vec thresholds() const;
};

struct OracleCoefficients {
  Vec rho_star;  // [rho_1/n, ..., rho_n/n, f(0)]
  double certified_error = 0.0;
  bool empirical = false;
};

double ramp(double z);

double barron_parameter(const ClassSpec& spec);

// Gamma_F = 3 * integral of ||omega|| F^sup(omega).
double lambda_mass(const ClassSpec& spec);

// |f(0)| + sum ||omega|| |F_f(omega)| for a concrete member.
double barron_moment(const FunctionInstance& f);

struct LambdaDraw {
  double t = 0.0;
  Vec omega;
};

LambdaDraw sample_lambda_measure(const ClassSpec& spec, std::mt19937_64& rng);

// Magnitude law with density proportional to u / sinh(pi u) on u > 0.
double sample_sinh_magnitude(std::mt19937_64& rng);

FeatureBank make_feature_bank(const ClassSpec& spec, int n, double tau, std::uint64_t seed);

Vec eval_features(const FeatureBank& bank, const Vec& x);
// Column j of the result is eval_features(bank, X.col(j)).
Mat eval_features_batch(const FeatureBank& bank, const Mat& X);

double gamma_coefficient(double norm_omega, double theta, double t);

std::vector<Vec> unit_ball_grid(int dim, int count, std::uint64_t seed);

OracleCoefficients oracle_coefficients(const FunctionInstance& f, const FeatureBank& bank,
                                       const std::vector<Vec>& grid);
OracleCoefficients oracle_coefficients(const FunctionInstance& f, const FeatureBank& bank);

// Least-squares fit on the grid with the l1 cap 4 C_F; used when the class
// has no closed-form Fourier data.
OracleCoefficients empirical_oracle_coefficients(const FunctionInstance& f, const FeatureBank& bank,
                                                 const std::vector<Vec>& grid);

double approximation_error(const FunctionInstance& f, const FeatureBank& bank, const Vec& rho_star,
                           const std::vector<Vec>& grid);

FunctionInstance sample_member(std::shared_ptr<const ClassSpec> spec, std::mt19937_64& rng);

// Linear map x -> a.x + b written as a single low-frequency sine atom of
// frequency h along a. Returns the spec and the member.
std::pair<std::shared_ptr<const ClassSpec>, FunctionInstance> embed_linear_member(const Vec& a,
                                                                                  double b,
                                                                                  double h);

Vec uniform_in_ball(int dim, std::mt19937_64& rng);

}  // namespace icl
