#include "icl/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace icl {

namespace {

constexpr double kPi = std::numbers::pi;

bool finite_vec(const Vec& v) { return v.allFinite(); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::InvalidConfig, msg);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Inverse-CDF table for density 4u / sinh(pi u) on (0, u_max].
class SinhTable {
 public:
  SinhTable() {
    constexpr double step = 1e-3;
    auto density = [](double u) { return u == 0.0 ? 4.0 / kPi : 4.0 * u / std::sinh(kPi * u); };
    grid_.push_back(0.0);
    cdf_.push_back(0.0);
    double u = 0.0;
    double prev = density(0.0);
    while (true) {
      const double next_u = u + step;
      const double cur = density(next_u);
      cdf_.push_back(cdf_.back() + 0.5 * step * (prev + cur));
      grid_.push_back(next_u);
      u = next_u;
      prev = cur;
      if (cur < 1e-12) break;
    }
    const double total = cdf_.back();
    for (double& c : cdf_) c /= total;
  }

  double inverse(double v) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), v);
    if (it == cdf_.begin()) return grid_.front();
    if (it == cdf_.end()) return grid_.back();
    const std::size_t hi = static_cast<std::size_t>(it - cdf_.begin());
    const std::size_t lo = hi - 1;
    const double span = cdf_[hi] - cdf_[lo];
    const double frac = span > 0 ? (v - cdf_[lo]) / span : 0.0;
    return grid_[lo] + frac * (grid_[hi] - grid_[lo]);
  }

 private:
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

const SinhTable& sinh_table() {
  static const SinhTable table;
  return table;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Euclidean projection onto {v : ||v||_1 <= r}.
Vec project_l1_ball(const Vec& v, double r) {
  if (v.lpNorm<1>() <= r) return v;
  if (r <= 0) return Vec::Zero(v.size());
  std::vector<double> u(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = std::abs(v[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double cand = (cumsum - r) / static_cast<double>(j + 1);
    if (u[j] - cand > 0) theta = cand;
  }
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::max(std::abs(v[i]) - theta, 0.0);
    out[i] = v[i] < 0 ? -m : m;
  }
  return out;
}

}  // namespace

const char* to_string(ClassKind kind) {
  switch (kind) {
    case ClassKind::FiniteSpectrum: return "FiniteSpectrum";
    case ClassKind::TwoLayerLogistic: return "TwoLayerLogistic";
    case ClassKind::Linear: return "Linear";
    case ClassKind::LinearCombination: return "LinearCombination";
  }
  return "Unknown";
}

ClassKind class_kind_from_string(const std::string& s) {
  if (s == "FiniteSpectrum") return ClassKind::FiniteSpectrum;
  if (s == "TwoLayerLogistic") return ClassKind::TwoLayerLogistic;
  if (s == "Linear") return ClassKind::Linear;
  if (s == "LinearCombination") return ClassKind::LinearCombination;
  throw Error(ErrorKind::InvalidConfig, "unknown class kind '" + s + "'");
}

void ClassSpec::validate() const {
  require(dim >= 1, "class dim must be >= 1");
  switch (kind) {
    case ClassKind::FiniteSpectrum:
      require(b_max >= 0 && std::isfinite(b_max), "b_max must be finite and >= 0");
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        const Atom& a = atoms[k];
        require(a.omega.size() == dim, "atom frequency has wrong dimension");
        require(finite_vec(a.omega) && a.omega.norm() > 0, "atom frequency must be finite and nonzero");
        require(a.amplitude_bound >= 0 && std::isfinite(a.amplitude_bound),
                "amplitude bound must be finite and >= 0");
        for (std::size_t j = 0; j < k; ++j)
          require(atoms[j].omega != a.omega, "atom frequencies must be distinct");
      }
      break;
    case ClassKind::TwoLayerLogistic:
      for (const Direction& d : directions) {
        require(d.a.size() == dim, "direction has wrong dimension");
        require(finite_vec(d.a) && d.a.norm() > 0, "direction must be finite and nonzero");
        require(d.rho_max >= 0 && std::isfinite(d.rho_max), "rho_max must be finite and >= 0");
      }
      for (std::size_t k = 0; k < directions.size(); ++k)
        for (std::size_t j = 0; j < k; ++j)
          require((directions[j].a.normalized() - directions[k].a.normalized()).norm() > 1e-12,
                  "directions must be distinct");
      break;
    case ClassKind::Linear:
      require(c_a >= 0 && c_b >= 0 && std::isfinite(c_a) && std::isfinite(c_b),
              "linear bounds must be finite and >= 0");
      break;
    case ClassKind::LinearCombination:
      require(!children.empty(), "combination needs at least one child");
      require(c_a >= 0 && c_b >= 0 && std::isfinite(c_a) && std::isfinite(c_b),
              "combination bounds must be finite and >= 0");
      for (const ClassSpec& c : children) {
        require(c.dim == dim, "child dimension differs from parent");
        c.validate();
      }
      break;
  }
}

// Branch form of relu(z + 1/2) - relu(z - 1/2); the difference form can land
// one ulp above 1 on the saturated branch.
double ramp(double z) {
  if (z <= -0.5) return 0.0;
  if (z >= 0.5) return 1.0;
  return z + 0.5;
}

double barron_parameter(const ClassSpec& spec) {
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum: {
      // sup |f(0)| = b_max + sum s_k, plus the first Fourier moment.
      double c = spec.b_max;
      for (const Atom& a : spec.atoms) c += a.amplitude_bound * (1.0 + a.omega.norm());
      return c;
    }
    case ClassKind::TwoLayerLogistic: {
      double c = 0.0;
      for (const Direction& d : spec.directions) c += d.rho_max * (d.a.norm() + 2.0);
      return 0.25 * c;
    }
    case ClassKind::Linear:
      return spec.c_a + spec.c_b;
    case ClassKind::LinearCombination: {
      double m = 0.0;
      for (const ClassSpec& c : spec.children) m = std::max(m, barron_parameter(c));
      return 2.0 * spec.c_a * m + spec.c_b;
    }
  }
  return 0.0;
}

double lambda_mass(const ClassSpec& spec) {
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum: {
      double g = 0.0;
      for (const Atom& a : spec.atoms) g += a.omega.norm() * a.amplitude_bound;
      return 3.0 * g;
    }
    case ClassKind::TwoLayerLogistic: {
      double g = 0.0;
      for (const Direction& d : spec.directions) g += d.rho_max * d.a.norm();
      return 0.75 * g;
    }
    case ClassKind::Linear:
      return 0.0;
    case ClassKind::LinearCombination: {
      double g = 0.0;
      for (const ClassSpec& c : spec.children) g += lambda_mass(c);
      return spec.c_a * g;
    }
  }
  return 0.0;
}

double barron_moment(const FunctionInstance& f) {
  const ClassSpec& spec = *f.parent;
  const Vec zero = Vec::Zero(spec.dim);
  const double f0 = std::abs(f(zero));
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum: {
      double m = f0;
      for (std::size_t k = 0; k < spec.atoms.size(); ++k)
        m += spec.atoms[k].omega.norm() * std::abs(f.amplitudes[k]);
      return m;
    }
    case ClassKind::TwoLayerLogistic: {
      double m = 0.0;
      for (std::size_t j = 0; j < spec.directions.size(); ++j)
        m += std::abs(f.amplitudes[j]) * spec.directions[j].a.norm();
      return f0 + 0.25 * m;
    }
    case ClassKind::Linear:
      return std::abs(f.offset) + f.slope.norm();
    case ClassKind::LinearCombination: {
      double m = f0;
      for (std::size_t i = 0; i < f.components.size(); ++i) {
        const FunctionInstance& c = f.components[i];
        m += std::abs(f.mix[i]) * (barron_moment(c) - std::abs(c(zero)));
      }
      return m;
    }
  }
  return 0.0;
}

double FunctionInstance::operator()(const Vec& x) const {
  const ClassSpec& spec = *parent;
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum: {
      double v = offset;
      for (std::size_t k = 0; k < spec.atoms.size(); ++k)
        v += amplitudes[k] * std::cos(spec.atoms[k].omega.dot(x) + phases[k]);
      return v;
    }
    case ClassKind::TwoLayerLogistic: {
      double v = 0.0;
      for (std::size_t j = 0; j < spec.directions.size(); ++j)
        v += amplitudes[j] * sigmoid(spec.directions[j].a.dot(x));
      return v;
    }
    case ClassKind::Linear:
      return slope.dot(x) + offset;
    case ClassKind::LinearCombination: {
      double v = offset;
      for (std::size_t i = 0; i < components.size(); ++i) v += mix[i] * components[i](x);
      return v;
    }
  }
  return 0.0;
}

void FunctionInstance::validate() const {
  require(parent != nullptr, "function instance has no parent class");
  const ClassSpec& spec = *parent;
  constexpr double slack = 1e-12;
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum:
      require(amplitudes.size() == static_cast<Eigen::Index>(spec.atoms.size()) &&
                  phases.size() == amplitudes.size(),
              "amplitude/phase count must match atoms");
      for (std::size_t k = 0; k < spec.atoms.size(); ++k)
        require(std::abs(amplitudes[k]) <= spec.atoms[k].amplitude_bound + slack &&
                    std::isfinite(phases[k]),
                "amplitude exceeds its bound");
      require(std::abs(offset) <= spec.b_max + slack, "offset exceeds b_max");
      break;
    case ClassKind::TwoLayerLogistic:
      require(amplitudes.size() == static_cast<Eigen::Index>(spec.directions.size()),
              "weight count must match directions");
      for (std::size_t j = 0; j < spec.directions.size(); ++j)
        require(std::abs(amplitudes[j]) <= spec.directions[j].rho_max + slack,
                "outer weight exceeds rho_max");
      break;
    case ClassKind::Linear:
      require(slope.size() == spec.dim, "slope has wrong dimension");
      require(slope.norm() <= spec.c_a + slack, "slope norm exceeds C_a");
      require(std::abs(offset) <= spec.c_b + slack, "offset exceeds C_b");
      break;
    case ClassKind::LinearCombination:
      require(components.size() == spec.children.size() &&
                  mix.size() == static_cast<Eigen::Index>(components.size()),
              "component count must match children");
      require(mix.lpNorm<1>() <= spec.c_a + slack, "mixing weights exceed C_a");
      require(std::abs(offset) <= spec.c_b + slack, "offset exceeds C_b");
      for (const FunctionInstance& c : components) c.validate();
      break;
  }
}

void FeatureBank::validate() const {
  require(n >= 1, "feature bank needs n >= 1");
  require(dim >= 1, "feature bank needs dim >= 1");
  require(tau > 4 && std::isfinite(tau), "feature sharpness must exceed 4");
  require(pairs.size() == static_cast<std::size_t>(n), "pair count differs from n");
  for (const FeaturePair& p : pairs) {
    require(p.t >= -2.0 && p.t <= 1.0, "threshold outside [-2, 1]");
    require(p.omega.size() == dim, "frequency has wrong dimension");
    require(finite_vec(p.omega) && p.omega.norm() > 0, "frequency must be finite and nonzero");
  }
}

Mat FeatureBank::unit_directions() const {
  Mat out(n, dim);
  for (int i = 0; i < n; ++i) out.row(i) = pairs[i].omega.transpose() / pairs[i].omega.norm();
  return out;
}

Vec FeatureBank::thresholds() const {
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = pairs[i].t;
  return out;
}

double sample_sinh_magnitude(std::mt19937_64& rng) {
  return sinh_table().inverse(uniform(rng, 0.0, 1.0));
}

LambdaDraw sample_lambda_measure(const ClassSpec& spec, std::mt19937_64& rng) {
  if (!(lambda_mass(spec) > 0))
    throw Error(ErrorKind::DegenerateMeasure, "class has zero first Fourier moment");
  LambdaDraw draw;
  draw.t = uniform(rng, -2.0, 1.0);
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum: {
      std::vector<double> w;
      for (const Atom& a : spec.atoms) w.push_back(a.omega.norm() * a.amplitude_bound);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      draw.omega = spec.atoms[pick(rng)].omega;
      break;
    }
    case ClassKind::TwoLayerLogistic: {
      std::vector<double> w;
      for (const Direction& d : spec.directions) w.push_back(d.rho_max * d.a.norm());
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      const Direction& d = spec.directions[pick(rng)];
      draw.omega = d.a * sample_sinh_magnitude(rng);
      break;
    }
    case ClassKind::LinearCombination: {
      std::vector<double> w;
      for (const ClassSpec& c : spec.children) w.push_back(lambda_mass(c));
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      draw.omega = sample_lambda_measure(spec.children[pick(rng)], rng).omega;
      break;
    }
    case ClassKind::Linear:
      break;  // unreachable: zero mass
  }
  return draw;
}

FeatureBank make_feature_bank(const ClassSpec& spec, int n, double tau, std::uint64_t seed) {
  require(n >= 1, "feature bank needs n >= 1");
  require(tau > 4 && std::isfinite(tau), "feature sharpness must exceed 4");
  spec.validate();
  FeatureBank bank;
  bank.n = n;
  bank.dim = spec.dim;
  bank.tau = tau;
  bank.seed = seed;
  std::mt19937_64 rng(seed);
  bank.pairs.reserve(n);
  for (int i = 0; i < n; ++i) {
    LambdaDraw d = sample_lambda_measure(spec, rng);
    bank.pairs.push_back({d.t, std::move(d.omega)});
  }
  return bank;
}

Vec eval_features(const FeatureBank& bank, const Vec& x) {
  if (x.size() != bank.dim) throw Error(ErrorKind::DimensionMismatch, "input dimension differs from bank");
  if (x.squaredNorm() > 1.0 + 1e-12) throw Error(ErrorKind::InputOutsideBall, "input norm exceeds 1");
  Vec phi(bank.n + 1);
  for (int i = 0; i < bank.n; ++i) {
    const FeaturePair& p = bank.pairs[i];
    phi[i] = ramp(bank.tau * (p.omega.dot(x) / p.omega.norm() - p.t));
  }
  phi[bank.n] = 1.0;
  return phi;
}

Mat eval_features_batch(const FeatureBank& bank, const Mat& X) {
  Mat out(bank.n + 1, X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) out.col(j) = eval_features(bank, X.col(j));
  return out;
}

double gamma_coefficient(double norm_omega, double theta, double t) {
  if (t >= -1.0 && t <= 1.0) return -std::sin(norm_omega * t + theta);
  const double g_minus = (std::cos(-norm_omega + theta) - std::cos(theta)) / norm_omega;
  if (t < -1.0 && t >= -1.0 - std::abs(g_minus)) return g_minus > 0 ? 1.0 : (g_minus < 0 ? -1.0 : 0.0);
  return 0.0;
}

Vec uniform_in_ball(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(dim);
  double nrm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
    nrm = v.norm();
  } while (nrm == 0.0);
  const double r = std::pow(uniform(rng, 0.0, 1.0), 1.0 / dim);
  return v * (r / nrm);
}

std::vector<Vec> unit_ball_grid(int dim, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> grid;
  grid.reserve(count);
  for (int i = 0; i < count; ++i) grid.push_back(uniform_in_ball(dim, rng));
  return grid;
}

double approximation_error(const FunctionInstance& f, const FeatureBank& bank, const Vec& rho_star,
                           const std::vector<Vec>& grid) {
  if (grid.empty()) throw Error(ErrorKind::EmptyGrid, "approximation grid is empty");
  if (rho_star.size() != bank.n + 1)
    throw Error(ErrorKind::DimensionMismatch, "coefficient vector must have n+1 entries");
  const double f0 = f(Vec::Zero(bank.dim));
  double worst = 0.0;
  for (const Vec& x : grid) {
    const Vec phi = eval_features(bank, x);
    const double approx = rho_star.head(bank.n).dot(phi.head(bank.n));
    worst = std::max(worst, std::abs(f(x) - f0 - approx));
  }
  return worst;
}

namespace {
const std::vector<Vec>& default_grid(int dim) {
  thread_local std::vector<std::pair<int, std::vector<Vec>>> cache;
  for (const auto& [d, g] : cache)
    if (d == dim) return g;
  cache.emplace_back(dim, unit_ball_grid(dim, 1000, 0x51ed2701u));
  return cache.back().second;
}
}  // namespace

OracleCoefficients oracle_coefficients(const FunctionInstance& f, const FeatureBank& bank,
                                       const std::vector<Vec>& grid) {
  const ClassSpec& spec = *f.parent;
  if (spec.dim != bank.dim) throw Error(ErrorKind::BankMismatch, "bank and class dimensions differ");
  const double gamma_mass = lambda_mass(spec);
  Vec rho = Vec::Zero(bank.n + 1);

  switch (spec.kind) {
    case ClassKind::FiniteSpectrum:
      for (int i = 0; i < bank.n; ++i) {
        const FeaturePair& p = bank.pairs[i];
        std::size_t k = 0;
        while (k < spec.atoms.size() && spec.atoms[k].omega != p.omega) ++k;
        if (k == spec.atoms.size())
          throw Error(ErrorKind::BankMismatch, "bank frequency is not an atom of the class");
        const double alpha = f.amplitudes[k];
        if (alpha == 0.0) continue;
        const double theta = alpha < 0 ? f.phases[k] + kPi : f.phases[k];
        const double ratio = std::abs(alpha) / spec.atoms[k].amplitude_bound;
        rho[i] = gamma_mass * gamma_coefficient(p.omega.norm(), theta, p.t) * ratio / bank.n;
      }
      break;
    case ClassKind::TwoLayerLogistic:
      for (int i = 0; i < bank.n; ++i) {
        const FeaturePair& p = bank.pairs[i];
        const Vec dir = p.omega / p.omega.norm();
        std::size_t j = 0;
        while (j < spec.directions.size() &&
               (spec.directions[j].a.normalized() - dir).norm() > 1e-12)
          ++j;
        if (j == spec.directions.size())
          throw Error(ErrorKind::BankMismatch, "bank frequency is not along a class direction");
        const double c = f.amplitudes[j];
        if (c == 0.0) continue;
        const double theta = c >= 0 ? -kPi / 2 : kPi / 2;
        const double ratio = std::abs(c) / spec.directions[j].rho_max;
        rho[i] = gamma_mass * gamma_coefficient(p.omega.norm(), theta, p.t) * ratio / bank.n;
      }
      break;
    default:
      throw Error(ErrorKind::UnsupportedClass,
                  std::string("no closed-form Fourier data for ") + to_string(spec.kind));
  }
  rho[bank.n] = f(Vec::Zero(bank.dim));
  OracleCoefficients out;
  out.rho_star = rho;
  out.certified_error = approximation_error(f, bank, rho, grid);
  out.empirical = false;
  return out;
}

OracleCoefficients oracle_coefficients(const FunctionInstance& f, const FeatureBank& bank) {
  return oracle_coefficients(f, bank, default_grid(bank.dim));
}

OracleCoefficients empirical_oracle_coefficients(const FunctionInstance& f, const FeatureBank& bank,
                                                 const std::vector<Vec>& grid) {
  if (grid.empty()) throw Error(ErrorKind::EmptyGrid, "fit grid is empty");
  const int n = bank.n;
  const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
  const double f0 = f(Vec::Zero(bank.dim));
  Mat Phi(m, n);
  Vec target(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    Phi.row(r) = eval_features(bank, grid[r]).head(n).transpose();
    target[r] = f(grid[r]) - f0;
  }
  const double radius = std::max(4.0 * barron_parameter(*f.parent) - std::abs(f0), 0.0);

  // Largest eigenvalue of Phi^T Phi / m by power iteration.
  Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
  double top = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vec w = Phi.transpose() * (Phi * v) / static_cast<double>(m);
    top = w.norm();
    if (top == 0.0) break;
    v = w / top;
  }
  Vec c = Vec::Zero(n);
  if (top > 0 && radius > 0) {
    const double step = 1.0 / (2.0 * top * 1.01);
    Vec z = c;
    double tk = 1.0;
    for (int it = 0; it < 3000; ++it) {
      const Vec grad = 2.0 * Phi.transpose() * (Phi * z - target) / static_cast<double>(m);
      const Vec next = project_l1_ball(z - step * grad, radius * (1.0 - 1e-12));
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      z = next + ((tk - 1.0) / tn) * (next - c);
      c = next;
      tk = tn;
    }
  }
  OracleCoefficients out;
  out.rho_star = Vec::Zero(n + 1);
  out.rho_star.head(n) = c;
  out.rho_star[n] = f0;
  out.certified_error = approximation_error(f, bank, out.rho_star, grid);
  out.empirical = true;
  return out;
}

FunctionInstance sample_member(std::shared_ptr<const ClassSpec> spec, std::mt19937_64& rng) {
  spec->validate();
  FunctionInstance f;
  f.parent = spec;
  switch (spec->kind) {
    case ClassKind::FiniteSpectrum: {
      const std::size_t k = spec->atoms.size();
      f.amplitudes.resize(k);
      f.phases.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        const double s = spec->atoms[i].amplitude_bound;
        f.amplitudes[i] = uniform(rng, -s, s);
        f.phases[i] = uniform(rng, 0.0, 2.0 * kPi);
      }
      f.offset = uniform(rng, -spec->b_max, spec->b_max);
      break;
    }
    case ClassKind::TwoLayerLogistic: {
      const std::size_t k = spec->directions.size();
      f.amplitudes.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        const double r = spec->directions[j].rho_max;
        f.amplitudes[j] = uniform(rng, -r, r);
      }
      break;
    }
    case ClassKind::Linear:
      f.slope = uniform_in_ball(spec->dim, rng) * spec->c_a;
      f.offset = uniform(rng, -spec->c_b, spec->c_b);
      break;
    case ClassKind::LinearCombination: {
      const std::size_t k = spec->children.size();
      Vec w(k);
      for (std::size_t i = 0; i < k; ++i) w[i] = uniform(rng, -1.0, 1.0);
      const double l1 = w.lpNorm<1>();
      f.mix = l1 > 0 ? Vec(w * (spec->c_a * uniform(rng, 0.0, 1.0) / l1)) : Vec(Vec::Zero(k));
      for (std::size_t i = 0; i < k; ++i)
        f.components.push_back(
            sample_member(std::shared_ptr<const ClassSpec>(spec, &spec->children[i]), rng));
      f.offset = uniform(rng, -spec->c_b, spec->c_b);
      break;
    }
  }
  return f;
}

std::pair<std::shared_ptr<const ClassSpec>, FunctionInstance> embed_linear_member(const Vec& a,
                                                                                  double b,
                                                                                  double h) {
  require(h > 0, "embedding frequency must be positive");
  auto spec = std::make_shared<ClassSpec>();
  spec->kind = ClassKind::FiniteSpectrum;
  spec->dim = static_cast<int>(a.size());
  spec->b_max = std::abs(b);
  FunctionInstance f;
  const double na = a.norm();
  if (na > 0) {
    spec->atoms.push_back({a * (h / na), na / h});
    f.amplitudes = Vec::Constant(1, na / h);
    f.phases = Vec::Constant(1, -kPi / 2);
  } else {
    f.amplitudes = Vec(0);
    f.phases = Vec(0);
  }
  f.offset = b;
  f.parent = spec;
  return {spec, f};
}

}  // namespace icl
