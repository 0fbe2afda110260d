#pragma once

#include <memory>

#include "icl/harness.hpp"

namespace icl::testing {

// Three atoms in d = 4; the workhorse instance for emulation checks.
inline std::shared_ptr<const ClassSpec> three_atom_class() {
  auto s = std::make_shared<ClassSpec>();
  s->kind = ClassKind::FiniteSpectrum;
  s->dim = 4;
  s->b_max = 0.2;
  Vec a(4), b(4), c(4);
  a << 2, 0, 0, 0;
  b << 0, 1.5, 1.5, 0;
  c << 1, -1, 0, 2;
  s->atoms = {{a, 0.5}, {b, 0.4}, {c, 0.3}};
  return s;
}

// Offset plus one cosine; used for the risk scaling runs.
inline std::shared_ptr<const ClassSpec> offset_cosine_class() {
  auto s = std::make_shared<ClassSpec>();
  s->kind = ClassKind::FiniteSpectrum;
  s->dim = 4;
  s->b_max = 1.0;
  Vec a(4);
  a << 2, 0, 0, 0;
  s->atoms = {{a, 0.3}};
  return s;
}

inline std::shared_ptr<const ClassSpec> single_cosine_class(double norm = 2.0, double s = 1.0) {
  auto c = std::make_shared<ClassSpec>();
  c->kind = ClassKind::FiniteSpectrum;
  c->dim = 4;
  Vec a = Vec::Zero(4);
  a[0] = norm;
  c->atoms = {{a, s}};
  return c;
}

inline ExperimentConfig small_config() {
  ExperimentConfig c;
  c.spec = three_atom_class();
  c.d = 4;
  c.n = 16;
  c.N = 64;
  c.L = 21;
  c.sigma = 0.1;
  c.tau = 1e6;
  c.lambda = 0.01;
  c.member_seed = 1;
  c.bank_seed = 2;
  c.seeds = {7, 8};
  c.test_points = 8;
  return c;
}

inline LassoProblem problem_for(const FeatureBank& bank, const Prompt& prompt, double lambda, double eta) {
  LassoProblem p;
  p.phi = eval_features_batch(bank, prompt.x).transpose();
  p.y = prompt.y;
  p.lambda = lambda;
  p.eta = eta;
  return p;
}

inline double relu(double z) { return z > 0 ? z : 0.0; }

}  // namespace icl::testing
