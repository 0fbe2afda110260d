#include "icl/io.hpp"

#include <fstream>
#include <set>

namespace icl {

namespace {

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidConfig, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json mat_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Mat json_mat(const Json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidConfig, "expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw Error(ErrorKind::DimensionMismatch, "ragged matrix rows");
    m.row(r) = json_vec(j[r]).transpose();
  }
  return m;
}

Json triplets(const Mat& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) a.push_back(Json::array({r, c, m(r, c)}));
  return a;
}

Mat from_triplets(const Json& j, int D) {
  Mat m = Mat::Zero(D, D);
  for (const Json& t : j) {
    const int r = t.at(0).get<int>(), c = t.at(1).get<int>();
    if (r < 0 || c < 0 || r >= D || c >= D) throw Error(ErrorKind::ShapeMismatch, "triplet index out of range");
    m(r, c) = t.at(2).get<double>();
  }
  return m;
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, std::string(what) + " must be a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw Error(ErrorKind::InvalidConfig, std::string("unknown field '") + it.key() + "' in " + what);
}

// Turns nlohmann's type/lookup errors into validation errors.
template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed ") + what + ": " + e.what());
  }
}

void fill_function(FunctionInstance& f, const Json& j, std::shared_ptr<const ClassSpec> parent) {
  f.parent = parent;
  f.amplitudes = json_vec(j.value("amplitudes", Json::array()));
  f.phases = json_vec(j.value("phases", Json::array()));
  f.offset = j.value("offset", 0.0);
  f.slope = json_vec(j.value("slope", Json::array()));
  f.mix = json_vec(j.value("mix", Json::array()));
  const Json comps = j.value("components", Json::array());
  if (comps.size() > parent->children.size())
    throw Error(ErrorKind::InvalidConfig, "more components than class children");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    FunctionInstance c;
    fill_function(c, comps[i], std::shared_ptr<const ClassSpec>(parent, &parent->children[i]));
    f.components.push_back(std::move(c));
  }
}

Json function_body(const FunctionInstance& f) {
  Json j;
  j["amplitudes"] = vec_json(f.amplitudes);
  j["phases"] = vec_json(f.phases);
  j["offset"] = f.offset;
  j["slope"] = vec_json(f.slope);
  j["mix"] = vec_json(f.mix);
  j["components"] = Json::array();
  for (const FunctionInstance& c : f.components) j["components"].push_back(function_body(c));
  return j;
}

}  // namespace

Json to_json(const ClassSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind);
  j["dim"] = spec.dim;
  switch (spec.kind) {
    case ClassKind::FiniteSpectrum:
      j["atoms"] = Json::array();
      for (const Atom& a : spec.atoms)
        j["atoms"].push_back({{"omega", vec_json(a.omega)}, {"amplitude_bound", a.amplitude_bound}});
      j["b_max"] = spec.b_max;
      break;
    case ClassKind::TwoLayerLogistic:
      j["directions"] = Json::array();
      for (const Direction& d : spec.directions)
        j["directions"].push_back({{"a", vec_json(d.a)}, {"rho_max", d.rho_max}});
      break;
    case ClassKind::Linear:
      j["c_a"] = spec.c_a;
      j["c_b"] = spec.c_b;
      break;
    case ClassKind::LinearCombination:
      j["c_a"] = spec.c_a;
      j["c_b"] = spec.c_b;
      j["children"] = Json::array();
      for (const ClassSpec& c : spec.children) j["children"].push_back(to_json(c));
      break;
  }
  return j;
}

ClassSpec class_spec_from_json(const Json& j) {
  return guarded("class spec", [&] {
    reject_unknown(j, {"kind", "dim", "atoms", "b_max", "directions", "c_a", "c_b", "children"}, "class spec");
    ClassSpec s;
    s.kind = class_kind_from_string(j.at("kind").get<std::string>());
    s.dim = j.at("dim").get<int>();
    for (const Json& a : j.value("atoms", Json::array()))
      s.atoms.push_back({json_vec(a.at("omega")), a.at("amplitude_bound").get<double>()});
    s.b_max = j.value("b_max", 0.0);
    for (const Json& d : j.value("directions", Json::array()))
      s.directions.push_back({json_vec(d.at("a")), d.at("rho_max").get<double>()});
    s.c_a = j.value("c_a", 0.0);
    s.c_b = j.value("c_b", 0.0);
    for (const Json& c : j.value("children", Json::array())) s.children.push_back(class_spec_from_json(c));
    s.validate();
    return s;
  });
}

Json to_json(const FunctionInstance& f) {
  Json j = function_body(f);
  j["parent"] = to_json(*f.parent);
  return j;
}

FunctionInstance function_instance_from_json(const Json& j) {
  return guarded("function instance", [&] {
    auto parent = std::make_shared<const ClassSpec>(class_spec_from_json(j.at("parent")));
    FunctionInstance f;
    fill_function(f, j, parent);
    f.validate();
    return f;
  });
}

Json to_json(const FeatureBank& bank) {
  Json j;
  j["n"] = bank.n;
  j["dim"] = bank.dim;
  j["tau"] = bank.tau;
  j["seed"] = bank.seed;
  j["pairs"] = Json::array();
  for (const FeaturePair& p : bank.pairs) j["pairs"].push_back({{"t", p.t}, {"omega", vec_json(p.omega)}});
  return j;
}

FeatureBank feature_bank_from_json(const Json& j) {
  return guarded("feature bank", [&] {
    reject_unknown(j, {"n", "dim", "tau", "seed", "pairs"}, "feature bank");
    FeatureBank b;
    b.n = j.at("n").get<int>();
    b.dim = j.at("dim").get<int>();
    b.tau = j.at("tau").get<double>();
    b.seed = j.at("seed").get<std::uint64_t>();
    for (const Json& p : j.at("pairs")) b.pairs.push_back({p.at("t").get<double>(), json_vec(p.at("omega"))});
    b.validate();
    return b;
  });
}

Json to_json(const OracleCoefficients& o) {
  return {{"rho_star", vec_json(o.rho_star)}, {"certified_error", o.certified_error}, {"empirical", o.empirical}};
}

OracleCoefficients oracle_coefficients_from_json(const Json& j) {
  return guarded("oracle coefficients", [&] {
    OracleCoefficients o;
    o.rho_star = json_vec(j.at("rho_star"));
    o.certified_error = j.at("certified_error").get<double>();
    o.empirical = j.at("empirical").get<bool>();
    if (o.rho_star.size() < 1 || !(o.certified_error >= 0))
      throw Error(ErrorKind::InvalidConfig, "oracle coefficients are malformed");
    return o;
  });
}

Json to_json(const LassoProblem& p) {
  return {{"phi", mat_json(p.phi)}, {"y", vec_json(p.y)}, {"lambda", p.lambda}, {"eta", p.eta}};
}

LassoProblem lasso_problem_from_json(const Json& j) {
  return guarded("lasso problem", [&] {
    LassoProblem p;
    p.phi = json_mat(j.at("phi"));
    p.y = json_vec(j.at("y"));
    p.lambda = j.at("lambda").get<double>();
    p.eta = j.at("eta").get<double>();
    p.validate();
    return p;
  });
}

Json to_json(const LassoTrajectory& t) {
  Json j;
  j["iterates"] = Json::array();
  for (const Vec& v : t.iterates) j["iterates"].push_back(vec_json(v));
  j["injected_residuals"] = Json::array();
  for (const Vec& v : t.injected_residuals) j["injected_residuals"].push_back(vec_json(v));
  j["objectives"] = t.objectives;
  return j;
}

LassoTrajectory lasso_trajectory_from_json(const Json& j) {
  return guarded("lasso trajectory", [&] {
    LassoTrajectory t;
    for (const Json& v : j.at("iterates")) t.iterates.push_back(json_vec(v));
    for (const Json& v : j.at("injected_residuals")) t.injected_residuals.push_back(json_vec(v));
    t.objectives = j.at("objectives").get<std::vector<double>>();
    if (t.iterates.empty() || t.iterates[0].lpNorm<Eigen::Infinity>() != 0.0)
      throw Error(ErrorKind::InvalidConfig, "trajectory must start at the zero vector");
    if (t.injected_residuals.size() != t.iterates.size() || t.objectives.size() != t.iterates.size())
      throw Error(ErrorKind::DimensionMismatch, "trajectory columns differ in length");
    return t;
  });
}

Json to_json(const HiddenState& s) { return {{"d", s.layout.d}, {"n", s.layout.n}, {"H", mat_json(s.H)}}; }

HiddenState hidden_state_from_json(const Json& j) {
  return guarded("hidden state", [&] {
    HiddenState s;
    s.layout = {j.at("d").get<int>(), j.at("n").get<int>()};
    s.H = json_mat(j.at("H"));
    if (s.H.rows() != s.layout.D() || s.H.cols() < 2)
      throw Error(ErrorKind::ShapeMismatch, "hidden state is not D x (N+1)");
    return s;
  });
}

Json to_json(const TransformerWeights& w) {
  Json j;
  const SlabLayout s = w.layout();
  j["meta"] = {{"tau", w.meta.tau},   {"tau_ff", w.meta.tau_ff}, {"eta", w.meta.eta},
               {"lambda_bar", w.meta.lambda_bar}, {"d", w.meta.d}, {"n", w.meta.n}, {"N", w.meta.N}};
  if (w.meta.bank) j["meta"]["bank"] = to_json(*w.meta.bank);
  j["layout"] = {{"D", s.D()},
                 {"x", {s.x(0), s.x(s.d - 1)}},
                 {"ones", s.ones()},
                 {"y", s.y()},
                 {"w", s.w()},
                 {"phi", {s.phi(0), s.phi(s.n)}},
                 {"rho", {s.rho(0), s.rho(s.n)}},
                 {"lambda", s.lambda()},
                 {"yhat", s.yhat()}};
  std::vector<const LayerWeights*> blocks;
  j["layers"] = Json::array();
  for (const auto& lw : w.layers) {
    auto it = std::find(blocks.begin(), blocks.end(), lw.get());
    if (it == blocks.end()) {
      blocks.push_back(lw.get());
      it = blocks.end() - 1;
    }
    j["layers"].push_back(it - blocks.begin());
  }
  j["blocks"] = Json::array();
  for (const LayerWeights* b : blocks) {
    Json bj;
    bj["tag"] = to_string(b->tag);
    bj["heads"] = Json::array();
    for (const AttentionHead& h : b->heads)
      bj["heads"].push_back({{"Q", triplets(h.Q)}, {"K", triplets(h.K)}, {"V", triplets(h.V)}});
    bj["U"] = triplets(b->U);
    bj["W"] = triplets(b->W);
    j["blocks"].push_back(bj);
  }
  return j;
}

TransformerWeights transformer_weights_from_json(const Json& j) {
  return guarded("transformer weights", [&] {
    TransformerWeights w;
    const Json& m = j.at("meta");
    w.meta.tau = m.at("tau").get<double>();
    w.meta.tau_ff = m.at("tau_ff").get<double>();
    w.meta.eta = m.at("eta").get<double>();
    w.meta.lambda_bar = m.at("lambda_bar").get<double>();
    w.meta.d = m.at("d").get<int>();
    w.meta.n = m.at("n").get<int>();
    w.meta.N = m.at("N").get<int>();
    if (m.contains("bank")) w.meta.bank = std::make_shared<const FeatureBank>(feature_bank_from_json(m.at("bank")));
    if (!(w.meta.tau > 0)) throw Error(ErrorKind::NonPositiveTau, "tau must be > 0");
    const int D = w.layout().D();
    std::vector<std::shared_ptr<const LayerWeights>> blocks;
    for (const Json& bj : j.at("blocks")) {
      auto lw = std::make_shared<LayerWeights>();
      lw->tag = block_tag_from_string(bj.at("tag").get<std::string>());
      for (const Json& h : bj.at("heads"))
        lw->heads.push_back({from_triplets(h.at("Q"), D), from_triplets(h.at("K"), D), from_triplets(h.at("V"), D)});
      lw->U = from_triplets(bj.at("U"), D);
      lw->W = from_triplets(bj.at("W"), D);
      blocks.push_back(lw);
    }
    for (const Json& idx : j.at("layers")) {
      const std::size_t i = idx.get<std::size_t>();
      if (i >= blocks.size()) throw Error(ErrorKind::InvalidConfig, "layer references a missing block");
      w.layers.push_back(blocks[i]);
    }
    if (w.L() < 3 || w.L() % 2 == 0) throw Error(ErrorKind::InvalidDepth, "L must be odd and >= 3");
    validate_layout(w);
    return w;
  });
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  if (c.spec) j["spec"] = to_json(*c.spec);
  j["d"] = c.d;
  j["n"] = c.n;
  j["N"] = c.N;
  j["L"] = c.L;
  j["sigma"] = c.sigma;
  j["tau"] = c.tau;
  j["tau_ff"] = c.tau_ff;
  j["eta"] = c.eta ? Json(*c.eta) : Json("auto");
  j["lambda"] = c.lambda ? Json(*c.lambda) : Json("auto");
  j["c1"] = c.c1;
  j["eps_dis"] = c.eps_dis;
  j["eps_hat"] = c.eps_hat;
  j["log_cover"] = c.log_cover;
  j["seeds"] = c.seeds;
  j["member_seed"] = c.member_seed;
  j["bank_seed"] = c.bank_seed;
  j["test_points"] = c.test_points;
  j["input"] = to_string(c.input);
  j["noise"] = to_string(c.noise);
  j["workers"] = c.workers;
  j["output"] = c.output;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  return guarded("experiment config", [&] {
    reject_unknown(j,
                   {"schema_version", "spec", "d", "n", "N", "L", "sigma", "tau", "tau_ff", "eta", "lambda", "c1",
                    "eps_dis", "eps_hat", "log_cover", "seeds", "member_seed", "bank_seed", "test_points", "input",
                    "noise", "workers", "output"},
                   "experiment config");
    ExperimentConfig c;
    c.schema_version = j.value("schema_version", 1);
    c.spec = std::make_shared<const ClassSpec>(class_spec_from_json(j.at("spec")));
    c.d = j.value("d", c.spec->dim);
    c.n = j.value("n", c.n);
    c.N = j.value("N", c.N);
    c.L = j.value("L", c.L);
    c.sigma = j.value("sigma", c.sigma);
    c.tau = j.value("tau", c.tau);
    c.tau_ff = j.value("tau_ff", c.tau_ff);
    auto optional_number = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key)) return std::nullopt;
      const Json& v = j.at(key);
      if (v.is_string()) {
        if (v.get<std::string>() != "auto")
          throw Error(ErrorKind::InvalidConfig, std::string(key) + " must be a number or \"auto\"");
        return std::nullopt;
      }
      return v.get<double>();
    };
    c.eta = optional_number("eta");
    c.lambda = optional_number("lambda");
    c.c1 = j.value("c1", c.c1);
    c.eps_dis = j.value("eps_dis", c.eps_dis);
    c.eps_hat = j.value("eps_hat", c.eps_hat);
    c.log_cover = j.value("log_cover", c.log_cover);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.member_seed = j.value("member_seed", c.member_seed);
    c.bank_seed = j.value("bank_seed", c.bank_seed);
    c.test_points = j.value("test_points", c.test_points);
    c.input = input_distribution_from_string(j.value("input", std::string("ball")));
    c.noise = noise_distribution_from_string(j.value("noise", std::string("gaussian")));
    c.workers = j.value("workers", c.workers);
    c.output = j.value("output", std::string());
    c.validate();
    return c;
  });
}

Json to_json(const EpisodeReport& r) {
  return {{"y_hat", r.y_hat},
          {"truth", r.truth},
          {"squared_error", r.squared_error},
          {"eps_opt_vs_rho_star", r.eps_opt_vs_rho_star},
          {"eps_opt_vs_minimizer", r.eps_opt_vs_minimizer},
          {"l1_of_rho_L", r.l1_of_rho_L},
          {"max_emulation_residual", r.max_emulation_residual},
          {"readout_consistency_gap", r.readout_consistency_gap},
          {"emulation_ok", r.emulation_ok},
          {"oracle_empirical", r.oracle_empirical}};
}

EpisodeReport episode_report_from_json(const Json& j) {
  return guarded("episode report", [&] {
    EpisodeReport r;
    r.y_hat = j.at("y_hat").get<double>();
    r.truth = j.at("truth").get<double>();
    r.squared_error = j.at("squared_error").get<double>();
    r.eps_opt_vs_rho_star = j.at("eps_opt_vs_rho_star").get<double>();
    r.eps_opt_vs_minimizer = j.at("eps_opt_vs_minimizer").get<double>();
    r.l1_of_rho_L = j.at("l1_of_rho_L").get<double>();
    r.max_emulation_residual = j.at("max_emulation_residual").get<double>();
    r.readout_consistency_gap = j.at("readout_consistency_gap").get<double>();
    r.emulation_ok = j.at("emulation_ok").get<bool>();
    r.oracle_empirical = j.at("oracle_empirical").get<bool>();
    if (!(r.squared_error >= 0)) throw Error(ErrorKind::InvalidConfig, "squared_error must be >= 0");
    return r;
  });
}

Json to_json(const EmulationReport& r) {
  Json j;
  j["tau"] = r.tau;
  j["max_e_inf"] = r.max_e_inf;
  j["max_etilde"] = r.max_etilde;
  j["all_ok"] = r.all_ok;
  j["blocks"] = Json::array();
  for (const BlockResidual& b : r.blocks)
    j["blocks"].push_back({{"t", b.t},
                           {"e_inf", b.e_inf},
                           {"e_bound", b.e_bound},
                           {"e_slack", b.e_slack},
                           {"e_ok", b.e_ok},
                           {"etilde", b.etilde},
                           {"etilde_bound", b.etilde_bound},
                           {"etilde_slack", b.etilde_slack},
                           {"etilde_ok", b.etilde_ok}});
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, "cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

ExperimentConfig load_config(const std::string& path) { return experiment_config_from_json(read_json_file(path)); }

}  // namespace icl
