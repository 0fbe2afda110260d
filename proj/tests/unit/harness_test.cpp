#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "icl/harness.hpp"
#include "support.hpp"

using namespace icl;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c = icl::testing::small_config();
  c.n = 8;
  c.N = 16;
  c.L = 5;
  c.test_points = 4;
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("icl_" + name)).string();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no icl::Error thrown";
  return ErrorKind::InvalidConfig;
}

}  // namespace

TEST(GenerateTask, NoiselessLabelsAndBallInputs) {
  auto spec = icl::testing::three_atom_class();
  const Task t = generate_task(spec, 3, 50, 4, 0.0, 11);
  ASSERT_EQ(t.prompt.x.cols(), 50);
  for (int i = 0; i < 50; ++i) {
    EXPECT_LE(t.prompt.x.col(i).norm(), 1.0);
    EXPECT_EQ(t.prompt.y[i], t.f(t.prompt.x.col(i)));
  }
  EXPECT_LE(t.x_query.norm(), 1.0);
}

TEST(GenerateTask, SeedsControlMemberAndData) {
  auto spec = icl::testing::three_atom_class();
  const Task a = generate_task(spec, 3, 20, 4, 0.1, 11);
  const Task b = generate_task(spec, 3, 20, 4, 0.1, 11);
  EXPECT_EQ(a.prompt.x, b.prompt.x);
  EXPECT_EQ(a.prompt.y, b.prompt.y);
  EXPECT_EQ(a.x_query, b.x_query);
  const Task c = generate_task(spec, 3, 20, 4, 0.1, 12);
  EXPECT_NE(a.prompt.x, c.prompt.x);
  const Task m = generate_task(spec, 4, 20, 4, 0.1, 11);
  EXPECT_EQ(a.prompt.x, m.prompt.x);
  EXPECT_NE(a.f(a.x_query), m.f(a.x_query));
}

TEST(GenerateTask, NoiseHasRoughlyTheRequestedScale) {
  auto spec = icl::testing::three_atom_class();
  const Task t = generate_task(spec, 3, 4000, 4, 0.5, 1);
  double ss = 0.0;
  for (int i = 0; i < 4000; ++i) {
    const double r = t.prompt.y[i] - t.f(t.prompt.x.col(i));
    ss += r * r;
  }
  EXPECT_NEAR(std::sqrt(ss / 4000), 0.5, 0.03);
  const Task u = generate_task(spec, 3, 4000, 4, 0.5, 1, InputDistribution::Sphere, NoiseDistribution::Uniform);
  for (int i = 0; i < 4000; ++i) {
    EXPECT_NEAR(u.prompt.x.col(i).norm(), 1.0, 1e-12);
    EXPECT_LE(std::abs(u.prompt.y[i] - u.f(u.prompt.x.col(i))), 0.5);
  }
}

TEST(Episode, ReportFieldsAreConsistent) {
  const ExperimentConfig c = icl::testing::small_config();
  EpisodeArtifacts art;
  const EpisodeReport r = run_episode(c, 1, 7, &art);
  EXPECT_TRUE(r.emulation_ok);
  EXPECT_LE(r.max_emulation_residual, 1e-3);
  const Vec rho = art.rho_L;
  const double z = eval_features(*art.bank, art.task.x_query).dot(rho);
  EXPECT_LE(r.readout_consistency_gap, 2.0 * rho.lpNorm<1>() * rho.lpNorm<1>() / c.tau + 1e-12);
  EXPECT_NEAR(r.y_hat, z, 1e-9);
  EXPECT_EQ(r.squared_error, (r.y_hat - r.truth) * (r.y_hat - r.truth));
  EXPECT_EQ(r.l1_of_rho_L, rho.lpNorm<1>());
  EXPECT_GE(r.eps_opt_vs_minimizer, -1e-10);
  // rho_star is feasible for the same objective, so it cannot beat the minimizer.
  EXPECT_GE(r.eps_opt_vs_minimizer, r.eps_opt_vs_rho_star - 1e-9);
  EXPECT_FALSE(r.oracle_empirical);
}

TEST(Episode, OptimizationGapTracksPlainIsta) {
  ExperimentConfig c = icl::testing::small_config();
  c.n = 64;
  c.N = 256;
  c.L = 41;
  EpisodeArtifacts art;
  const EpisodeReport r = run_episode(c, 1, 7, &art);
  const LassoTrajectory traj = run_ista(art.problem, (c.L - 1) / 2);
  const double f_star = lasso_objective(art.problem, oracle_solve(art.problem));
  const double ista_gap = traj.objectives.back() - f_star;
  ASSERT_GT(ista_gap, 0.0);
  EXPECT_NEAR(r.eps_opt_vs_minimizer, ista_gap, 0.1 * ista_gap);
}

TEST(Episode, Deterministic) {
  const ExperimentConfig c = tiny_config();
  const EpisodeReport a = run_episode(c, 2, 5), b = run_episode(c, 2, 5);
  EXPECT_EQ(a.y_hat, b.y_hat);
  EXPECT_EQ(a.eps_opt_vs_minimizer, b.eps_opt_vs_minimizer);
}

TEST(Episode, ZeroTargetThroughTheLowLevelPipeline) {
  // A class with no atoms has no Lambda measure, so the bank comes from another class.
  auto bank = std::make_shared<const FeatureBank>(make_feature_bank(*icl::testing::three_atom_class(), 8, 100.0, 2));
  Task t = generate_task(icl::testing::three_atom_class(), 1, 16, 4, 0.0, 3);
  t.prompt.y.setZero();
  const double eta = LassoProblem::default_eta(9);
  const TransformerWeights w = build_icl_transformer(bank, 7, 0.01, 1e6, eta, 16);
  const ForwardResult fr = forward(w, init_hidden(t.prompt, t.x_query, 8));
  EXPECT_LE(std::abs(readout(fr.final_state)), 1e-12);
  EXPECT_LE(extract_state(fr.final_state).rho.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Risk, NeedsTwoSeedsAndRecomputes) {
  const ExperimentConfig c = tiny_config();
  EXPECT_EQ(kind_of([&] { risk_estimate(c, 1, {7}); }), ErrorKind::InvalidConfig);
  const RiskEstimate r = risk_estimate(c, 1, {7, 8, 9});
  ASSERT_EQ(r.episodes.size(), 3u);
  double mean = 0.0;
  for (const EpisodeRisk& e : r.episodes) mean += e.mse;
  mean /= 3.0;
  double ss = 0.0;
  for (const EpisodeRisk& e : r.episodes) ss += (e.mse - mean) * (e.mse - mean);
  EXPECT_NEAR(r.mean, mean, 1e-15);
  EXPECT_NEAR(r.standard_error, std::sqrt(ss / 2.0 / 3.0), 1e-15);
  EXPECT_EQ(r.episodes[1].data_seed, 8u);
}

TEST(Risk, PointwiseFromRepeatedEpisodes) {
  // With one test point the per-seed MSE is a squared error at a fresh query.
  ExperimentConfig c = tiny_config();
  c.test_points = 1;
  const RiskEstimate r = risk_estimate(c, 1, {7, 8});
  for (const EpisodeRisk& e : r.episodes) {
    EXPECT_GE(e.mse, 0.0);
    EXPECT_TRUE(std::isfinite(e.mse));
  }
}

TEST(Sweep, SingleCellMatchesRiskEstimate) {
  const ExperimentConfig c = tiny_config();
  std::ostringstream os;
  const std::vector<SweepRow> rows = sweep(c, SweepGrid{}, os);
  ASSERT_EQ(rows.size(), 1u);
  const RiskEstimate r = risk_estimate(c, c.member_seed, c.seeds);
  EXPECT_EQ(rows[0].risk.mean, r.mean);
  EXPECT_EQ(rows[0].risk.standard_error, r.standard_error);
  EXPECT_EQ(lines_of(os.str()).size(), 2u);
}

TEST(Sweep, GridOrderAndDeterminism) {
  const ExperimentConfig c = tiny_config();
  SweepGrid g;
  add_grid_axis(g, "N=8,16,32");
  std::ostringstream a, b;
  const auto rows = sweep(c, g, a);
  sweep(c, g, b);
  EXPECT_EQ(a.str(), b.str());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].config.N, 8);
  EXPECT_EQ(rows[2].config.N, 32);
  const auto lines = lines_of(a.str());
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[1].rfind("N=8;", 0), 0u);
}

TEST(Sweep, WorkersDoNotChangeOutput) {
  ExperimentConfig c = tiny_config();
  SweepGrid g;
  add_grid_axis(g, "N=8,16");
  add_grid_axis(g, "L=3,5");
  std::ostringstream one, two;
  sweep(c, g, one);
  c.workers = 2;
  sweep(c, g, two);
  EXPECT_EQ(one.str(), two.str());
}

TEST(Sweep, ErroredCellIsRecorded) {
  const ExperimentConfig c = tiny_config();
  SweepGrid g;
  add_grid_axis(g, "L=3,4");
  std::ostringstream os;
  const auto rows = sweep(c, g, os);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_FALSE(rows[1].error.empty());
  const auto lines = lines_of(os.str());
  EXPECT_NE(lines[2].find("odd"), std::string::npos);
}

TEST(Sweep, ResumesAfterInterruption) {
  const ExperimentConfig c = tiny_config();
  SweepGrid g;
  add_grid_axis(g, "N=8,16,32");
  const std::string path = temp_path("sweep_resume.csv");
  std::filesystem::remove(path);
  sweep(c, g, path);
  const std::string full = read_file(path);
  const auto lines = lines_of(full);
  ASSERT_EQ(lines.size(), 4u);

  // Keep the header, the first row and half of the second.
  {
    std::ofstream out(path, std::ios::trunc);
    out << lines[0] << '\n' << lines[1] << '\n' << lines[2].substr(0, lines[2].size() / 2);
  }
  const auto rerun = sweep(c, g, path);
  EXPECT_EQ(rerun.size(), 2u);
  EXPECT_EQ(read_file(path), full);

  // A complete file means nothing left to do.
  EXPECT_TRUE(sweep(c, g, path).empty());
  EXPECT_EQ(read_file(path), full);
  std::filesystem::remove(path);
}

TEST(Grid, AxisParsing) {
  SweepGrid g;
  add_grid_axis(g, "tau=1e4,1e5");
  add_grid_axis(g, "lambda=0.1");
  EXPECT_EQ(g.tau, (std::vector<double>{1e4, 1e5}));
  EXPECT_EQ(g.lambda, (std::vector<double>{0.1}));
  for (const char* bad : {"N", "=1", "N=", "N=1.5", "q=1", "tau=abc"})
    EXPECT_EQ(kind_of([&] { add_grid_axis(g, bad); }), ErrorKind::InvalidConfig) << bad;
}

TEST(Config, Validation) {
  ExperimentConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  auto expect_kind = [](ExperimentConfig bad, ErrorKind k) { EXPECT_EQ(kind_of([&] { bad.validate(); }), k); };
  ExperimentConfig b = c;
  b.L = 6;
  expect_kind(b, ErrorKind::InvalidDepth);
  b = c;
  b.tau = 0;
  expect_kind(b, ErrorKind::NonPositiveTau);
  b = c;
  b.d = 3;
  expect_kind(b, ErrorKind::InvalidConfig);
  b = c;
  b.seeds.clear();
  expect_kind(b, ErrorKind::InvalidConfig);
  b = c;
  b.tau_ff = 2;
  expect_kind(b, ErrorKind::InvalidConfig);
  b = c;
  b.schema_version = 2;
  expect_kind(b, ErrorKind::InvalidConfig);
}

TEST(Config, ResolvedDefaults) {
  ExperimentConfig c = tiny_config();
  c.eta.reset();
  EXPECT_EQ(c.resolved_eta(), 1.0 / 18.0);
  c.lambda.reset();
  c.c1 = 0.3;
  EXPECT_EQ(c.resolved_lambda(), default_lambda(16, 0.1, barron_parameter(*c.spec), 0, 0, 0.3));
}
