#include "icl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace icl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::InvalidConfig, msg);
}

// Seed streams carved out of a data seed.
constexpr std::uint64_t kPromptStream = 1;
constexpr std::uint64_t kQueryStream = 2;
constexpr std::uint64_t kBatchStream = 3;
constexpr std::uint64_t kNoiseStream = 4;

Vec evaluate_all(const FunctionInstance& f, const Mat& X) {
  Vec out(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) out[j] = f(X.col(j));
  return out;
}

LassoProblem make_problem(const FeatureBank& bank, const Prompt& prompt, double lambda, double eta) {
  LassoProblem p;
  p.phi = eval_features_batch(bank, prompt.x).transpose();
  p.y = prompt.y;
  p.lambda = lambda;
  p.eta = eta;
  p.validate();
  return p;
}

OracleCoefficients reference_coefficients(const FunctionInstance& f, const FeatureBank& bank) {
  try {
    return oracle_coefficients(f, bank);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnsupportedClass) throw;
    return empirical_oracle_coefficients(f, bank, unit_ball_grid(bank.dim, 1000, 0x51ed2701u));
  }
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string lambda_text(const std::optional<double>& v) { return v ? format_double(*v) : "auto"; }

std::string cell_key(const ExperimentConfig& c) {
  return "N=" + std::to_string(c.N) + ";L=" + std::to_string(c.L) + ";n=" + std::to_string(c.n) +
         ";tau=" + format_double(c.tau) + ";lambda=" + lambda_text(c.lambda);
}

const char* kSweepHeader =
    "cell_key,schema_version,class,C_F,d,n,N,L,sigma,tau,tau_ff,eta,lambda,c1,eps_dis,eps_hat,log_cover,"
    "member_seed,bank_seed,seeds,test_points,input,noise,mean_mse,standard_error,episodes,error";

std::string sweep_csv_row(const SweepRow& r) {
  const ExperimentConfig& c = r.config;
  std::ostringstream os;
  std::string eta = "", lambda = "";
  try {
    eta = format_double(c.resolved_eta());
    lambda = format_double(c.resolved_lambda());
  } catch (const std::exception&) {
  }
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) seeds += (i ? ";" : "") + std::to_string(c.seeds[i]);
  os << r.cell_key << ',' << c.schema_version << ',' << (c.spec ? to_string(c.spec->kind) : "") << ','
     << (c.spec ? format_double(barron_parameter(*c.spec)) : "") << ',' << c.d << ',' << c.n << ','
     << c.N << ',' << c.L << ',' << format_double(c.sigma) << ',' << format_double(c.tau) << ','
     << format_double(c.tau_ff) << ',' << eta << ',' << lambda << ',' << format_double(c.c1) << ','
     << format_double(c.eps_dis) << ',' << format_double(c.eps_hat) << ',' << format_double(c.log_cover)
     << ',' << c.member_seed << ',' << c.bank_seed << ',' << seeds << ',' << c.test_points << ','
     << to_string(c.input) << ',' << to_string(c.noise) << ',';
  if (r.error.empty())
    os << format_double(r.risk.mean) << ',' << format_double(r.risk.standard_error) << ','
       << r.risk.episodes.size() << ',';
  else
    os << ",,0," << csv_quote(r.error);
  return os.str();
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const SweepGrid& grid) {
  auto ints = [](const std::vector<int>& v, int dflt) { return v.empty() ? std::vector<int>{dflt} : v; };
  const std::vector<int> Ns = ints(grid.N, base.N), Ls = ints(grid.L, base.L), ns = ints(grid.n, base.n);
  const std::vector<double> taus = grid.tau.empty() ? std::vector<double>{base.tau} : grid.tau;
  std::vector<std::optional<double>> lambdas;
  if (grid.lambda.empty())
    lambdas.push_back(base.lambda);
  else
    for (double l : grid.lambda) lambdas.emplace_back(l);
  std::vector<ExperimentConfig> cells;
  for (int N : Ns)
    for (int L : Ls)
      for (int n : ns)
        for (double tau : taus)
          for (const auto& lam : lambdas) {
            ExperimentConfig c = base;
            c.N = N;
            c.L = L;
            c.n = n;
            c.tau = tau;
            c.lambda = lam;
            cells.push_back(std::move(c));
          }
  return cells;
}

SweepRow run_cell(const ExperimentConfig& c) {
  SweepRow row;
  row.config = c;
  row.cell_key = cell_key(c);
  try {
    row.risk = risk_estimate(c, c.member_seed, c.seeds);
  } catch (const std::exception& e) {
    row.error = e.what();
    row.risk = {};
  }
  return row;
}

// Runs `cells` on up to `workers` threads and hands rows to `sink` in order.
template <typename Sink>
std::vector<SweepRow> run_cells(const std::vector<ExperimentConfig>& cells, int workers, Sink sink) {
  std::vector<std::optional<SweepRow>> done(cells.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= cells.size()) return;
      SweepRow r = run_cell(cells[i]);
      {
        std::lock_guard<std::mutex> lock(mu);
        done[i] = std::move(r);
      }
      cv.notify_all();
    }
  };
  const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  std::vector<SweepRow> rows;
  if (nthreads == 1) {
    for (const ExperimentConfig& c : cells) {
      rows.push_back(run_cell(c));
      sink(rows.back());
    }
    return rows;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done[i].has_value(); });
    SweepRow r = std::move(*done[i]);
    lock.unlock();
    sink(r);
    rows.push_back(std::move(r));
  }
  for (std::thread& t : pool) t.join();
  return rows;
}

}  // namespace

const char* to_string(InputDistribution v) {
  switch (v) {
    case InputDistribution::Ball: return "ball";
    case InputDistribution::Sphere: return "sphere";
    case InputDistribution::Gaussian: return "gaussian";
  }
  return "ball";
}

const char* to_string(NoiseDistribution v) {
  switch (v) {
    case NoiseDistribution::Gaussian: return "gaussian";
    case NoiseDistribution::Uniform: return "uniform";
  }
  return "gaussian";
}

InputDistribution input_distribution_from_string(const std::string& s) {
  if (s == "ball") return InputDistribution::Ball;
  if (s == "sphere") return InputDistribution::Sphere;
  if (s == "gaussian") return InputDistribution::Gaussian;
  throw Error(ErrorKind::InvalidConfig, "unknown input distribution '" + s + "'");
}

NoiseDistribution noise_distribution_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseDistribution::Gaussian;
  if (s == "uniform") return NoiseDistribution::Uniform;
  throw Error(ErrorKind::InvalidConfig, "unknown noise distribution '" + s + "'");
}

void ExperimentConfig::validate() const {
  require(schema_version == 1, "unsupported schema_version " + std::to_string(schema_version));
  require(spec != nullptr, "config has no class spec");
  spec->validate();
  require(spec->dim == d, "class dimension differs from d");
  require(n >= 1, "n must be >= 1");
  require(N >= 1, "N must be >= 1");
  if (L < 3 || L % 2 == 0) throw Error(ErrorKind::InvalidDepth, "L must be odd and >= 3");
  require(sigma >= 0 && std::isfinite(sigma), "sigma must be >= 0");
  if (!(tau > 0) || !std::isfinite(tau)) throw Error(ErrorKind::NonPositiveTau, "tau must be > 0");
  require(tau_ff > 4 && std::isfinite(tau_ff), "tau_ff must exceed 4");
  require(!eta || (*eta > 0 && std::isfinite(*eta)), "eta must be > 0");
  require(!lambda || (*lambda >= 0 && std::isfinite(*lambda)), "lambda must be >= 0");
  require(c1 >= 0 && eps_dis >= 0 && eps_hat >= 0 && log_cover >= 0, "analysis knobs must be >= 0");
  require(!seeds.empty(), "seed list is empty");
  require(test_points >= 1, "test_points must be >= 1");
  require(workers >= 1, "workers must be >= 1");
}

double ExperimentConfig::resolved_eta() const { return eta ? *eta : LassoProblem::default_eta(n + 1); }

double ExperimentConfig::resolved_lambda() const {
  if (lambda) return *lambda;
  require(spec != nullptr, "config has no class spec");
  return default_lambda(std::max(N, 2), sigma, barron_parameter(*spec), eps_dis, eps_hat, c1);
}

Vec sample_input(int d, InputDistribution dist, std::mt19937_64& rng) {
  switch (dist) {
    case InputDistribution::Ball:
      return uniform_in_ball(d, rng);
    case InputDistribution::Sphere: {
      Vec v = uniform_in_ball(d, rng);
      return v / v.norm();
    }
    case InputDistribution::Gaussian: {
      // Isotropic with per-coordinate variance 1/d, truncated to the ball.
      std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
      Vec v(d);
      do {
        for (int i = 0; i < d; ++i) v[i] = g(rng);
      } while (v.squaredNorm() > 1.0);
      return v;
    }
  }
  return uniform_in_ball(d, rng);
}

Task generate_task(std::shared_ptr<const ClassSpec> spec, std::uint64_t member_seed, int N, int d,
                   double sigma, std::uint64_t data_seed, InputDistribution input, NoiseDistribution noise) {
  require(sigma >= 0, "sigma must be >= 0");
  require(N >= 1, "N must be >= 1");
  require(spec && spec->dim == d, "class dimension differs from d");
  Task task;
  std::mt19937_64 member_rng(member_seed);
  task.f = sample_member(spec, member_rng);

  std::mt19937_64 prompt_rng(derive_seed(data_seed, kPromptStream));
  task.prompt.x.resize(d, N);
  for (int i = 0; i < N; ++i) task.prompt.x.col(i) = sample_input(d, input, prompt_rng);
  task.prompt.y = evaluate_all(task.f, task.prompt.x);
  if (sigma > 0) {
    std::mt19937_64 noise_rng(derive_seed(data_seed, kNoiseStream));
    std::normal_distribution<double> gauss(0.0, sigma);
    std::uniform_real_distribution<double> unif(-sigma, sigma);
    for (int i = 0; i < N; ++i)
      task.prompt.y[i] += noise == NoiseDistribution::Gaussian ? gauss(noise_rng) : unif(noise_rng);
  }
  std::mt19937_64 query_rng(derive_seed(data_seed, kQueryStream));
  task.x_query = sample_input(d, input, query_rng);
  return task;
}

EpisodeReport run_episode(const ExperimentConfig& config, std::uint64_t member_seed, std::uint64_t data_seed,
                          EpisodeArtifacts* artifacts) {
  config.validate();
  const double eta = config.resolved_eta();
  const double lambda = config.resolved_lambda();
  auto bank = std::make_shared<const FeatureBank>(
      make_feature_bank(*config.spec, config.n, config.tau_ff, config.bank_seed));
  Task task = generate_task(config.spec, member_seed, config.N, config.d, config.sigma, data_seed,
                            config.input, config.noise);
  LassoProblem problem = make_problem(*bank, task.prompt, lambda, eta);
  TransformerWeights weights = build_icl_transformer(bank, config.L, lambda, config.tau, eta, config.N);

  const HiddenState H0 = init_hidden(task.prompt, task.x_query, config.n);
  EmulationMonitor monitor(problem, eta, lambda, config.tau);
  const ForwardResult fr =
      forward(weights, H0, false, [&](int i, const HiddenState& s) { monitor.observe(i, s); });
  const ExtractedState st = extract_state(fr.final_state);

  EpisodeReport r;
  r.y_hat = readout(fr.final_state);
  r.truth = task.f(task.x_query);
  r.squared_error = (r.y_hat - r.truth) * (r.y_hat - r.truth);
  const OracleCoefficients ref = reference_coefficients(task.f, *bank);
  const double obj = lasso_objective(problem, st.rho);
  r.eps_opt_vs_rho_star = obj - lasso_objective(problem, ref.rho_star);
  r.eps_opt_vs_minimizer = obj - lasso_objective(problem, oracle_solve(problem));
  r.l1_of_rho_L = st.rho.lpNorm<1>();
  r.max_emulation_residual = monitor.report().max_e_inf;
  r.readout_consistency_gap = std::abs(r.y_hat - st.phi.col(config.N).dot(st.rho));
  r.emulation_ok = monitor.report().all_ok;
  r.oracle_empirical = ref.empirical;

  if (artifacts) {
    artifacts->bank = bank;
    artifacts->task = std::move(task);
    artifacts->problem = std::move(problem);
    artifacts->weights = std::move(weights);
    artifacts->emulation = monitor.report();
    artifacts->rho_L = st.rho;
  }
  return r;
}

RiskEstimate risk_estimate(const ExperimentConfig& config, std::uint64_t member_seed,
                           const std::vector<std::uint64_t>& data_seeds) {
  config.validate();
  require(data_seeds.size() >= 2, "risk_estimate needs at least two seeds");
  const double eta = config.resolved_eta();
  const double lambda = config.resolved_lambda();
  auto bank = std::make_shared<const FeatureBank>(
      make_feature_bank(*config.spec, config.n, config.tau_ff, config.bank_seed));
  const TransformerWeights weights =
      build_icl_transformer(bank, config.L, lambda, config.tau, eta, config.N);

  RiskEstimate out;
  for (std::uint64_t seed : data_seeds) {
    const Task task = generate_task(config.spec, member_seed, config.N, config.d, config.sigma, seed,
                                    config.input, config.noise);
    HiddenState H0 = init_hidden(task.prompt, task.x_query, config.n);
    std::mt19937_64 batch_rng(derive_seed(seed, kBatchStream));
    double total = 0.0;
    for (int q = 0; q < config.test_points; ++q) {
      const Vec xq = sample_input(config.d, config.input, batch_rng);
      H0.H.block(0, config.N, config.d, 1) = xq;
      const double err = readout(forward(weights, H0).final_state) - task.f(xq);
      total += err * err;
    }
    out.episodes.push_back({seed, total / config.test_points});
  }
  const double m = static_cast<double>(out.episodes.size());
  for (const EpisodeRisk& e : out.episodes) out.mean += e.mse / m;
  double ss = 0.0;
  for (const EpisodeRisk& e : out.episodes) ss += (e.mse - out.mean) * (e.mse - out.mean);
  out.standard_error = std::sqrt(ss / (m - 1.0) / m);
  return out;
}

void add_grid_axis(SweepGrid& grid, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "grid axis must look like NAME=v1,v2,...");
  const std::string name = assignment.substr(0, eq);
  std::vector<std::string> parts;
  std::stringstream ss(assignment.substr(eq + 1));
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) parts.push_back(item);
  require(!parts.empty(), "grid axis '" + name + "' has no values");
  try {
    for (const std::string& p : parts) {
      std::size_t used = 0;
      if (name == "N" || name == "L" || name == "n") {
        const int v = std::stoi(p, &used);
        require(used == p.size(), "bad integer '" + p + "'");
        (name == "N" ? grid.N : name == "L" ? grid.L : grid.n).push_back(v);
      } else if (name == "tau" || name == "lambda") {
        const double v = std::stod(p, &used);
        require(used == p.size(), "bad number '" + p + "'");
        (name == "tau" ? grid.tau : grid.lambda).push_back(v);
      } else {
        throw Error(ErrorKind::InvalidConfig, "unknown grid axis '" + name + "'");
      }
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidConfig, "cannot parse grid axis '" + assignment + "'");
  }
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const SweepGrid& grid, std::ostream& os) {
  const std::vector<ExperimentConfig> cells = expand_grid(config, grid);
  require(!cells.empty(), "sweep grid is empty");
  os << kSweepHeader << '\n';
  return run_cells(cells, config.workers, [&](const SweepRow& r) { os << sweep_csv_row(r) << '\n' << std::flush; });
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const SweepGrid& grid, const std::string& csv_path) {
  std::set<std::string> finished;
  bool need_header = true;
  {
    std::ifstream in(csv_path, std::ios::binary);
    if (in) {
      std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      // Drop a trailing partial row left by an interrupted run.
      const auto last_nl = content.rfind('\n');
      const std::string complete = last_nl == std::string::npos ? "" : content.substr(0, last_nl + 1);
      if (complete.size() != content.size()) {
        in.close();
        std::ofstream trunc(csv_path, std::ios::binary | std::ios::trunc);
        trunc << complete;
      }
      std::stringstream ss(complete);
      std::string line;
      if (std::getline(ss, line) && line == kSweepHeader) need_header = false;
      while (std::getline(ss, line)) {
        const std::string key = line.substr(0, line.find(','));
        // Successful rows end with an empty error field; errored cells are retried.
        if (!key.empty() && line.back() == ',') finished.insert(key);
      }
    }
  }
  std::vector<ExperimentConfig> cells;
  for (ExperimentConfig& c : expand_grid(config, grid))
    if (!finished.count(cell_key(c))) cells.push_back(std::move(c));
  std::ofstream os(csv_path, std::ios::binary | std::ios::app);
  if (!os) throw Error(ErrorKind::InvalidConfig, "cannot open '" + csv_path + "' for writing");
  if (need_header) os << kSweepHeader << '\n' << std::flush;
  return run_cells(cells, config.workers, [&](const SweepRow& r) { os << sweep_csv_row(r) << '\n' << std::flush; });
}

}  // namespace icl
