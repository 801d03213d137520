// Copyright 2026 The bicomp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "bicomp/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "bicomp/errors.hpp"

namespace bicomp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key()))
      throw ConfigError(where + ": unknown field \"" + item.key() + "\"");
}

double get_double(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

std::uint64_t get_uint(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return static_cast<std::uint64_t>(v.get<long long>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(where + "." + key + ": expected a nonnegative integer");
}

bool get_bool(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

Eigen::VectorXd to_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ConfigError(where + ": expected numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

Eigen::MatrixXd to_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = to_vector(j[static_cast<std::size_t>(r)], where);
    if (row.size() != rows) throw ConfigError(where + ": matrices must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

ProblemConfig parse_problem(const json& j) {
  const std::string where = "problem";
  reject_unknown_keys(j,
                      {"kind", "A", "b", "noise_sigma", "random", "dataset", "synthetic",
                       "classes", "regularizer", "d_features", "scale_features", "reference",
                       "reference_tolerance"},
                      where);
  ProblemConfig p;
  const std::string kind = j.contains("kind") ? get_string(j, "kind", where) : "quadratic";
  if (kind == "quadratic") {
    p.kind = ProblemConfig::Kind::kQuadratic;
    if (j.contains("random")) {
      const json& r = j.at("random");
      const std::string w = where + ".random";
      reject_unknown_keys(r,
                          {"dim", "eig_min", "eig_max", "b_scale", "interpolation",
                           "noise_sigma", "seed"},
                          w);
      RandomQuadraticOptions o;
      if (r.contains("dim")) o.dim = get_uint(r, "dim", w);
      if (r.contains("eig_min")) o.eig_min = get_double(r, "eig_min", w);
      if (r.contains("eig_max")) o.eig_max = get_double(r, "eig_max", w);
      if (r.contains("b_scale")) o.b_scale = get_double(r, "b_scale", w);
      if (r.contains("interpolation")) o.interpolation = get_bool(r, "interpolation", w);
      if (r.contains("noise_sigma")) o.noise_sigma = get_double(r, "noise_sigma", w);
      if (r.contains("seed")) o.seed = get_uint(r, "seed", w);
      p.random_quadratic = o;
    } else {
      if (!j.contains("A") || !j.contains("b"))
        throw ConfigError("problem: a quadratic needs \"A\" and \"b\" (or \"random\")");
      const json& A = j.at("A");
      const json& b = j.at("b");
      if (!A.is_array() || !b.is_array() || A.size() != b.size() || A.empty())
        throw ConfigError("problem: \"A\" and \"b\" must be equally long nonempty lists");
      QuadraticSpec spec;
      for (std::size_t i = 0; i < A.size(); ++i) {
        spec.A.push_back(to_matrix(A[i], "problem.A[" + std::to_string(i) + "]"));
        spec.b.push_back(to_vector(b[i], "problem.b[" + std::to_string(i) + "]"));
      }
      if (j.contains("noise_sigma")) spec.noise_sigma = get_double(j, "noise_sigma", where);
      p.quadratic = std::move(spec);
    }
  } else if (kind == "logreg") {
    p.kind = ProblemConfig::Kind::kLogreg;
    if (j.contains("dataset")) p.dataset = get_string(j, "dataset", where);
    if (j.contains("synthetic")) {
      const json& s = j.at("synthetic");
      const std::string w = where + ".synthetic";
      reject_unknown_keys(s, {"samples", "features", "classes", "label_noise", "density", "seed"},
                          w);
      SyntheticLogisticOptions o;
      if (s.contains("samples")) o.samples = get_uint(s, "samples", w);
      if (s.contains("features")) o.features = get_uint(s, "features", w);
      if (s.contains("classes")) o.classes = get_uint(s, "classes", w);
      if (s.contains("label_noise")) o.label_noise = get_double(s, "label_noise", w);
      if (s.contains("density")) o.density = get_double(s, "density", w);
      if (s.contains("seed")) o.seed = get_uint(s, "seed", w);
      p.synthetic = o;
    }
    if (p.dataset.empty() == !p.synthetic.has_value())
      throw ConfigError("problem: logreg needs exactly one of \"dataset\" or \"synthetic\"");
    if (j.contains("classes")) p.classes = get_uint(j, "classes", where);
    if (j.contains("regularizer") && !j.at("regularizer").is_null()) {
      const json& r = j.at("regularizer");
      reject_unknown_keys(r, {"lambda"}, where + ".regularizer");
      p.lambda = get_double(r, "lambda", where + ".regularizer");
      if (*p.lambda < 0.0) throw ConfigError("problem.regularizer.lambda must be >= 0");
    }
    if (j.contains("d_features")) p.d_features = get_uint(j, "d_features", where);
    if (j.contains("scale_features")) p.scale_features = get_bool(j, "scale_features", where);
    // Gradient descent reaches a stationary point, not a certified minimizer,
    // once the nonconvex penalty is on; skip the reference unless asked.
    p.reference = !p.lambda.has_value();
  } else {
    throw ConfigError("problem.kind: expected \"quadratic\" or \"logreg\", got \"" + kind + "\"");
  }
  if (j.contains("reference")) p.reference = get_bool(j, "reference", where);
  if (j.contains("reference_tolerance"))
    p.reference_tolerance = get_double(j, "reference_tolerance", where);
  return p;
}

AbcConfig parse_abc(const json& j) {
  const std::string where = "algorithm.abc";
  reject_unknown_keys(j, {"case", "epsilon", "D", "sigma2", "f_lower", "f_i_lower"}, where);
  AbcConfig a;
  if (j.contains("case")) a.abc_case = theory::abc_case_from_string(get_string(j, "case", where));
  if (!j.contains("epsilon")) throw ConfigError(where + ": missing \"epsilon\"");
  a.epsilon = get_double(j, "epsilon", where);
  if (!(a.epsilon > 0.0)) throw ConfigError(where + ".epsilon must be positive");
  if (j.contains("D")) a.D = get_double(j, "D", where);
  if (j.contains("sigma2")) a.sigma2 = get_double(j, "sigma2", where);
  if (j.contains("f_lower")) a.f_lower = get_double(j, "f_lower", where);
  if (j.contains("f_i_lower")) a.f_i_lower = get_double(j, "f_i_lower", where);
  return a;
}

AlgorithmConfig parse_algorithm(const json& j) {
  const std::string where = "algorithm";
  reject_unknown_keys(j,
                      {"algo", "gamma", "gamma_multiplier", "beta", "batch_size", "shift_init",
                       "abc"},
                      where);
  AlgorithmConfig a;
  if (!j.contains("algo")) throw ConfigError("algorithm: missing \"algo\"");
  a.algo = algorithm_from_string(get_string(j, "algo", where));
  if (j.contains("gamma")) {
    const json& g = j.at("gamma");
    if (g.is_number()) {
      a.gamma_mode = AlgorithmConfig::GammaMode::kValue;
      a.gamma = g.get<double>();
      if (!(a.gamma > 0.0)) throw ConfigError("algorithm.gamma must be positive");
    } else if (g == "theory") {
      a.gamma_mode = AlgorithmConfig::GammaMode::kTheory;
    } else if (g == "abc") {
      a.gamma_mode = AlgorithmConfig::GammaMode::kAbc;
    } else {
      throw ConfigError("algorithm.gamma: expected a number, \"theory\" or \"abc\"");
    }
  }
  if (j.contains("gamma_multiplier")) {
    a.gamma_multiplier = get_double(j, "gamma_multiplier", where);
    if (!(a.gamma_multiplier > 0.0)) throw ConfigError("algorithm.gamma_multiplier must be positive");
  }
  if (j.contains("beta")) {
    const json& b = j.at("beta");
    if (b.is_number()) {
      a.beta = b.get<double>();
    } else if (b != "theory") {
      throw ConfigError("algorithm.beta: expected a number or \"theory\"");
    }
  }
  if (j.contains("batch_size")) {
    const json& b = j.at("batch_size");
    if (b.is_string()) {
      if (b != "full") throw ConfigError("algorithm.batch_size: expected an integer or \"full\"");
    } else {
      const std::uint64_t bs = get_uint(j, "batch_size", where);
      if (bs == 0) throw ConfigError("algorithm.batch_size must be at least 1");
      if (bs > (std::uint64_t{1} << 32)) throw ConfigError("algorithm.batch_size exceeds 2^32");
      a.batch_size = static_cast<std::size_t>(bs);
    }
  }
  if (j.contains("shift_init")) {
    const std::string s = get_string(j, "shift_init", where);
    if (s == "zero") a.shift_init = ShiftInit::kZero;
    else if (s == "gradient") a.shift_init = ShiftInit::kGradient;
    else throw ConfigError("algorithm.shift_init: expected \"zero\" or \"gradient\"");
  }
  if (j.contains("abc")) a.abc = parse_abc(j.at("abc"));
  if (a.gamma_mode == AlgorithmConfig::GammaMode::kAbc && !a.abc)
    throw ConfigError("algorithm.gamma = \"abc\" needs an \"abc\" section");
  return a;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  try {
    reject_unknown_keys(j,
                        {"problem", "n_workers", "partition", "algorithm", "dual", "primal",
                         "seed", "rounds", "stop", "metric_stride", "seeds_for_averaging", "x0",
                         "downlink_times_n", "divergence_factor"},
                        "config");
    RunConfig c;
    if (!j.contains("problem")) throw ConfigError("config: missing \"problem\"");
    if (!j.contains("algorithm")) throw ConfigError("config: missing \"algorithm\"");
    c.problem = parse_problem(j.at("problem"));
    c.algorithm = parse_algorithm(j.at("algorithm"));
    if (j.contains("n_workers")) {
      c.n_workers = get_uint(j, "n_workers", "config");
      if (c.n_workers == 0) throw ConfigError("config.n_workers must be at least 1");
    } else if (c.problem.quadratic) {
      c.n_workers = c.problem.quadratic->A.size();
    }
    if (c.problem.quadratic && c.problem.quadratic->A.size() != c.n_workers)
      throw ConfigError("config.n_workers does not match the number of matrices in problem.A");
    if (j.contains("partition")) {
      const json& p = j.at("partition");
      reject_unknown_keys(p, {"strategy", "seed"}, "partition");
      if (p.contains("strategy"))
        c.partition = partition_strategy_from_string(get_string(p, "strategy", "partition"));
      if (p.contains("seed")) c.partition_seed = get_uint(p, "seed", "partition");
    }
    if (j.contains("dual") && !j.at("dual").is_null()) c.dual = j.at("dual");
    if (j.contains("primal") && !j.at("primal").is_null()) c.primal = j.at("primal");
    if (j.contains("seed")) c.seed = get_uint(j, "seed", "config");
    if (j.contains("rounds")) c.rounds = get_uint(j, "rounds", "config");
    if (j.contains("stop")) {
      const json& s = j.at("stop");
      reject_unknown_keys(s, {"grad_norm_sq", "f_gap"}, "stop");
      if (s.contains("grad_norm_sq")) c.stop.grad_norm_sq = get_double(s, "grad_norm_sq", "stop");
      if (s.contains("f_gap")) c.stop.f_gap = get_double(s, "f_gap", "stop");
    }
    if (j.contains("metric_stride")) {
      c.metric_stride = get_uint(j, "metric_stride", "config");
      if (*c.metric_stride == 0) throw ConfigError("config.metric_stride must be at least 1");
    }
    if (j.contains("seeds_for_averaging")) {
      const json& s = j.at("seeds_for_averaging");
      if (!s.is_array()) throw ConfigError("config.seeds_for_averaging: expected a list");
      for (const auto& v : s) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
          throw ConfigError("config.seeds_for_averaging: expected nonnegative integers");
        c.seeds_for_averaging.push_back(v.get<std::uint64_t>());
      }
    }
    if (j.contains("x0")) c.x0 = j.at("x0");
    if (j.contains("downlink_times_n"))
      c.downlink_times_n = get_bool(j, "downlink_times_n", "config");
    if (j.contains("divergence_factor"))
      c.divergence_factor = get_double(j, "divergence_factor", "config");
    const bool abc_mode = c.algorithm.gamma_mode == AlgorithmConfig::GammaMode::kAbc;
    if (c.rounds && *c.rounds == 0 && !abc_mode)
      throw ConfigError("config.rounds must be at least 1");
    if (!c.rounds && !abc_mode && !c.stop.grad_norm_sq && !c.stop.f_gap)
      throw ConfigError("config: set \"rounds\" or a \"stop\" rule");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  RunConfig c = parse_run_config(j);
  // Relative dataset paths resolve against the config file's directory.
  if (!c.problem.dataset.empty()) {
    std::filesystem::path ds(c.problem.dataset);
    if (ds.is_relative()) {
      const auto candidate = std::filesystem::path(path).parent_path() / ds;
      if (!std::filesystem::exists(ds) && std::filesystem::exists(candidate))
        c.problem.dataset = candidate.string();
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

constexpr std::uint64_t kStopOnlyRoundCap = 1'000'000;

std::shared_ptr<Problem> build_problem(const RunConfig& c) {
  const ProblemConfig& p = c.problem;
  if (p.kind == ProblemConfig::Kind::kQuadratic) {
    if (p.random_quadratic) {
      RandomQuadraticOptions o = *p.random_quadratic;
      o.n_workers = c.n_workers;
      return std::make_shared<QuadraticProblem>(random_quadratic(o));
    }
    return std::make_shared<QuadraticProblem>(*p.quadratic);
  }
  Dataset data = p.synthetic ? synthetic_logistic_dataset(*p.synthetic) : load_libsvm(p.dataset);
  if (p.scale_features) scale_max_abs(data);
  const std::size_t distinct = map_labels(data).classes.size();
  if (p.classes != 0 && p.classes < distinct)
    throw ConfigError("problem.classes = " + std::to_string(p.classes) + " but the dataset has " +
                      std::to_string(distinct) + " distinct labels");
  const Partition part = partition(data.n_samples(), c.n_workers, c.partition, c.partition_seed);
  auto shared = std::make_shared<const Dataset>(std::move(data));
  return std::make_shared<LogisticProblem>(
      make_logistic_spec(shared, part, p.lambda, std::max<std::size_t>(2, p.classes), p.d_features));
}

DenseVector build_x0(const json& j, std::size_t dim) {
  if (j.is_string()) {
    if (j != "zeros") throw ConfigError("config.x0: expected \"zeros\", a list or {\"gaussian\":...}");
    return DenseVector(dim, 0.0);
  }
  if (j.is_array()) {
    if (j.size() != dim)
      throw ConfigError("config.x0 has " + std::to_string(j.size()) + " entries, model dimension is " +
                        std::to_string(dim));
    DenseVector x(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!j[k].is_number()) throw ConfigError("config.x0: expected numbers");
      x[k] = j[k].get<double>();
    }
    return x;
  }
  if (j.is_object()) {
    reject_unknown_keys(j, {"gaussian", "seed"}, "x0");
    const double scale = j.contains("gaussian") ? get_double(j, "gaussian", "x0") : 1.0;
    const std::uint64_t seed = j.contains("seed") ? get_uint(j, "seed", "x0") : 0;
    Rng rng(StreamKey{seed, StreamRole::kData, 3, 0});
    DenseVector x(dim);
    for (double& v : x) v = scale * rng.normal();
    return x;
  }
  throw ConfigError("config.x0: unsupported value");
}

bool diana_family(Algorithm a) { return uses_gradient_shifts(a); }

}  // namespace

Experiment::Experiment(RunConfig config) : config_(std::move(config)) {
  const AlgorithmConfig& ac = config_.algorithm;
  problem_ = build_problem(config_);
  constants_ = problem_->estimate_constants();
  const std::size_t dim = problem_->dim();

  if (config_.problem.reference) {
    const bool quad = config_.problem.kind == ProblemConfig::Kind::kQuadratic;
    double tol = config_.problem.reference_tolerance;
    if (tol <= 0.0) tol = quad ? 1e-10 : 1e-8;
    if (quad && constants_.mu <= 0.0) {
      reference_.reset();  // no unique minimizer
    } else {
      reference_ = problem_->compute_opt_reference(tol);
      if (!reference_->usable) reference_.reset();
    }
  }

  if (uses_dual_compressor(ac.algo)) {
    if (!config_.dual) throw ConfigError(std::string(to_string(ac.algo)) + " needs a \"dual\" compressor");
    dual_ = compressor_from_json(*config_.dual, dim);
  }
  if (uses_primal_compressor(ac.algo)) {
    if (!config_.primal)
      throw ConfigError(std::string(to_string(ac.algo)) + " needs a \"primal\" compressor");
    primal_ = compressor_from_json(*config_.primal, dim);
  }
  validate_compressors(ac.algo, context(config_.seed, nullptr));
  x0_ = build_x0(config_.x0, dim);

  if (config_.stop.f_gap && !reference_ && !(ac.abc && ac.abc->f_lower))
    throw ConfigError("stop.f_gap needs a reference optimum (problem.reference)");

  // Stepsizes.
  const theory::TheoryInputs in = theory_inputs();
  switch (ac.gamma_mode) {
    case AlgorithmConfig::GammaMode::kValue:
      gamma_ = ac.gamma;
      break;
    case AlgorithmConfig::GammaMode::kTheory: {
      theory::StepsizeBound b;
      switch (ac.algo) {
        case Algorithm::kGD:
          if (!(in.L > 0.0)) throw ConfigError("theory stepsize needs L > 0");
          b.gamma = 1.0 / in.L;
          b.terms = {b.gamma};
          break;
        case Algorithm::kEF21P: b = theory::stepsize_ef21p_strong(in); break;
        case Algorithm::kDCGD:
        case Algorithm::kEF21P_DCGD: b = theory::stepsize_dcgd_strong(in); break;
        case Algorithm::kDIANA:
        case Algorithm::kEF21P_DIANA: b = theory::stepsize_diana_strong(in); break;
      }
      theory_caps_ = b.terms;
      gamma_ = b.gamma * ac.gamma_multiplier;
      break;
    }
    case AlgorithmConfig::GammaMode::kAbc: {
      const auto abc = theory::abc_constants(ac.abc->abc_case, in);
      const auto s = theory::stepsize_abc(in, abc);
      theory_caps_ = s.terms;
      gamma_ = s.gamma * ac.gamma_multiplier;
      rounds_ = s.horizon.T;
      break;
    }
  }
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_))
    throw ConfigError("resolved stepsize is not a positive finite number");

  if (diana_family(ac.algo)) {
    const double cap = 1.0 / (omega() + 1.0);
    beta_ = ac.beta.value_or(cap);
    if (beta_ < 0.0 || beta_ > cap * (1.0 + 1e-12))
      throw ConfigError("algorithm.beta must lie in [0, 1/(omega+1)] = [0, " + format_double(cap) +
                        "]");
  }

  if (config_.rounds) {
    rounds_ = *config_.rounds;
  } else if (ac.gamma_mode != AlgorithmConfig::GammaMode::kAbc) {
    rounds_ = kStopOnlyRoundCap;
  }
}

double Experiment::omega() const { return dual_ ? omega_of(*dual_) : 0.0; }
double Experiment::alpha() const { return primal_ ? alpha_of(*primal_) : 1.0; }

theory::TheoryInputs Experiment::theory_inputs() const {
  theory::TheoryInputs in;
  in.n = static_cast<double>(problem_->n_workers());
  in.omega = omega();
  in.alpha = alpha();
  in.L = constants_.L;
  in.L_max = constants_.L_max;
  in.L_hat = constants_.L_hat;
  in.mu = constants_.mu;
  const auto& abc = config_.algorithm.abc;
  const double f0 = problem_->value(x0_);
  double f_lower = 0.0;
  if (abc && abc->f_lower) f_lower = *abc->f_lower;
  else if (reference_) f_lower = reference_->f_star;
  in.delta0 = std::max(0.0, f0 - f_lower);
  // f* <= f(x_ref) (or f(x0)) and f_i* >= f_i_lower give an upper bound on Delta*.
  const double f_star_upper = reference_ ? reference_->f_star : f0;
  in.delta_star = std::max(0.0, f_star_upper - (abc ? abc->f_i_lower : 0.0));
  if (abc) {
    in.epsilon = abc->epsilon;
    in.D = abc->D;
    if (abc->sigma2) in.sigma2 = *abc->sigma2;
  }
  return in;
}

std::size_t Experiment::metric_stride() const {
  if (config_.metric_stride) return *config_.metric_stride;
  if (rounds_ <= 10'000) return 1;
  return static_cast<std::size_t>((rounds_ + 9'999) / 10'000);
}

RoundContext Experiment::context(std::uint64_t seed, WorkerPool* pool) const {
  RoundContext ctx;
  ctx.problem = problem_.get();
  ctx.dual = dual_;
  ctx.primal = primal_;
  ctx.seed = seed;
  ctx.downlink_times_n = config_.downlink_times_n;
  ctx.pool = pool;
  if (config_.algorithm.batch_size) ctx = attach_stochastic(ctx, *config_.algorithm.batch_size, seed);
  return ctx;
}

// ---------------------------------------------------------------------------
// Round loop

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kCompleted: return "completed";
    case RunStatus::kStopped: return "stopped";
    case RunStatus::kDiverged: return "diverged";
  }
  return "?";
}

namespace {

struct Evaluator {
  const Experiment& exp;
  double gamma;

  RoundMetrics operator()(const AlgoState& s, std::uint64_t uplink, std::uint64_t downlink) const {
    const Problem& p = exp.problem();
    RoundMetrics m;
    m.round = s.t;
    m.f = p.value(s.x);
    m.grad_norm_sq = norm_sq(p.grad(s.x));
    m.w_drift = dist_sq(s.w_server, s.x);
    if (const auto& ref = exp.reference()) {
      m.dist_sq = dist_sq(s.x, ref->x_star);
      if (diana_family(exp.config().algorithm.algo)) {
        m.lyapunov =
            theory::lyapunov_diana(p, s.x, s.h_workers, *ref, gamma, exp.omega()).total();
      } else {
        m.lyapunov = *m.dist_sq / (2.0 * gamma) + (m.f - ref->f_star);
      }
    }
    m.uplink_cum = uplink;
    m.downlink_cum = downlink;
    return m;
  }
};

}  // namespace

RunResult run(const Experiment& exp, const RunOptions& opts) {
  const RunConfig& cfg = exp.config();
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const double gamma = opts.gamma.value_or(exp.gamma());
  const std::uint64_t rounds = opts.rounds.value_or(exp.rounds());
  const std::size_t stride = std::max<std::size_t>(1, opts.metric_stride.value_or(exp.metric_stride()));
  const Problem& problem = exp.problem();

  std::unique_ptr<WorkerPool> pool;
  const std::size_t threads = std::min(opts.threads, problem.n_workers());
  if (threads > 1) pool = std::make_unique<WorkerPool>(threads);
  const RoundContext ctx = exp.context(seed, pool.get());
  const Algorithm algo = cfg.algorithm.algo;
  validate_compressors(algo, ctx);

  RunResult res;
  res.gamma = gamma;
  res.beta = exp.beta();
  res.final_state = init_state(problem, exp.x0(), gamma, exp.beta(),
                               diana_family(algo) ? cfg.algorithm.shift_init : ShiftInit::kZero);
  AlgoState& state = res.final_state;
  const Evaluator eval{exp, gamma};

  std::optional<double> f_star;
  if (cfg.algorithm.abc && cfg.algorithm.abc->f_lower) f_star = cfg.algorithm.abc->f_lower;
  if (exp.reference()) f_star = exp.reference()->f_star;

  const double f0 = problem.value(state.x);
  const double limit = cfg.divergence_factor * std::abs(f0) + 1e3;
  std::uint64_t uplink = 0;
  std::uint64_t downlink = 0;

  auto note_grad = [&](double g) {
    if (!res.min_grad_norm_sq || g < *res.min_grad_norm_sq) res.min_grad_norm_sq = g;
  };
  auto stop_hit = [&](double f, std::optional<double> g) {
    if (cfg.stop.grad_norm_sq && g && *g <= *cfg.stop.grad_norm_sq) return true;
    if (cfg.stop.f_gap && f_star && f - *f_star <= *cfg.stop.f_gap) return true;
    return false;
  };

  RoundMetrics row = eval(state, 0, 0);
  res.metrics.push_back(row);
  note_grad(*row.grad_norm_sq);
  if (stop_hit(row.f, row.grad_norm_sq)) {
    res.status = RunStatus::kStopped;
    res.message = "stop rule met at round 0";
    return res;
  }

  const bool need_grad = opts.track_min_grad_norm || cfg.stop.grad_norm_sq.has_value();
  for (std::uint64_t t = 0; t < rounds; ++t) {
    const RoundMessages msgs = run_round(algo, state, ctx);
    uplink += msgs.uplink_coords;
    downlink += msgs.downlink_coords;
    if (opts.on_round) opts.on_round(state, msgs);
    res.rounds_executed = state.t;

    const bool last = t + 1 == rounds;
    const bool emit = last || state.t % stride == 0;
    std::optional<double> f;
    std::optional<double> g;
    if (emit) {
      row = eval(state, uplink, downlink);
      f = row.f;
      g = row.grad_norm_sq;
    } else {
      f = problem.value(state.x);
      if (need_grad) g = norm_sq(problem.grad(state.x));
    }
    if (g) note_grad(*g);

    if (!all_finite(state.x) || !std::isfinite(*f) || *f > limit) {
      if (!emit) row = eval(state, uplink, downlink);
      res.metrics.push_back(row);
      res.status = RunStatus::kDiverged;
      res.message = "divergence guard: f(x^" + std::to_string(state.t) + ") = " + format_double(*f) +
                    " exceeds " + format_double(limit);
      return res;
    }
    if (stop_hit(*f, g)) {
      if (!emit) row = eval(state, uplink, downlink);
      res.metrics.push_back(row);
      res.status = RunStatus::kStopped;
      res.message = "stop rule met at round " + std::to_string(state.t);
      return res;
    }
    if (emit) res.metrics.push_back(row);
  }
  res.status = RunStatus::kCompleted;
  return res;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  const Experiment exp(config);
  return run(exp, options);
}

// ---------------------------------------------------------------------------
// Sweeps and seed averaging

std::vector<double> pow2_grid(int lo, int hi) {
  if (lo > hi) throw ConfigError("pow2_grid: empty range");
  std::vector<double> g;
  for (int i = lo; i <= hi; ++i) g.push_back(std::ldexp(1.0, i));
  return g;
}

SweepResult sweep(const Experiment& exp, const std::vector<double>& gammas,
                  const RunOptions& options, std::optional<double> f_gap_target) {
  if (gammas.empty()) throw ConfigError("sweep: empty stepsize grid");
  SweepResult out;
  std::optional<double> f_star;
  if (exp.reference()) f_star = exp.reference()->f_star;
  for (double g : gammas) {
    RunOptions o = options;
    o.gamma = g;
    const RunResult r = run(exp, o);
    SweepCell cell;
    cell.gamma = g;
    cell.status = r.status;
    cell.final_f = r.metrics.back().f;
    cell.min_grad_norm_sq = r.min_grad_norm_sq;
    if (f_gap_target && f_star) {
      for (const auto& m : r.metrics)
        if (m.f - *f_star <= *f_gap_target) {
          cell.coords_to_target = m.uplink_cum + m.downlink_cum;
          break;
        }
    }
    cell.metrics = r.metrics;
    out.cells.push_back(std::move(cell));
  }
  for (std::size_t k = 0; k < out.cells.size(); ++k) {
    const SweepCell& c = out.cells[k];
    if (c.status == RunStatus::kDiverged || !std::isfinite(c.final_f)) continue;
    if (!out.best_final_f || c.final_f < out.cells[*out.best_final_f].final_f) out.best_final_f = k;
    if (c.coords_to_target &&
        (!out.best_coords_to_target ||
         *c.coords_to_target < *out.cells[*out.best_coords_to_target].coords_to_target))
      out.best_coords_to_target = k;
  }
  return out;
}

namespace {

SeriesStats column_stats(const std::vector<RunResult>& runs, std::size_t rows,
                         const std::function<std::optional<double>(const RoundMetrics&)>& get) {
  SeriesStats s;
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    bool ok = true;
    for (const auto& run : runs) {
      const auto v = get(run.metrics[r]);
      if (!v) {
        ok = false;
        break;
      }
      sum += *v;
    }
    if (!ok) return {};
    const double k = static_cast<double>(runs.size());
    double mean = sum / k;
    // Identical runs report their common value and zero spread exactly.
    const double first = *get(runs.front().metrics[r]);
    if (std::all_of(runs.begin(), runs.end(),
                    [&](const RunResult& run) { return *get(run.metrics[r]) == first; }))
      mean = first;
    double var = 0.0;
    for (const auto& run : runs) {
      const double dv = *get(run.metrics[r]) - mean;
      var += dv * dv;
    }
    s.mean.push_back(mean);
    s.stderr_.push_back(runs.size() >= 2 ? std::sqrt(var / (k - 1.0) / k) : 0.0);
  }
  return s;
}

}  // namespace

MultiSeedResult multi_seed(const Experiment& exp, const std::vector<std::uint64_t>& seeds,
                           const RunOptions& options) {
  if (seeds.empty()) throw ConfigError("multi_seed: no seeds");
  std::vector<RunResult> runs;
  runs.reserve(seeds.size());
  for (std::uint64_t s : seeds) {
    RunOptions o = options;
    o.seed = s;
    runs.push_back(run(exp, o));
  }
  MultiSeedResult out;
  out.seeds = seeds.size();
  std::size_t rows = runs.front().metrics.size();
  for (const auto& r : runs) {
    if (r.metrics.size() != rows) out.truncated = true;
    rows = std::min(rows, r.metrics.size());
  }
  for (std::size_t r = 0; r < rows; ++r) out.rounds.push_back(runs.front().metrics[r].round);
  out.f = column_stats(runs, rows, [](const RoundMetrics& m) { return std::optional<double>(m.f); });
  out.grad_norm_sq = column_stats(runs, rows, [](const RoundMetrics& m) { return m.grad_norm_sq; });
  out.dist_sq = column_stats(runs, rows, [](const RoundMetrics& m) { return m.dist_sq; });
  out.lyapunov = column_stats(runs, rows, [](const RoundMetrics& m) { return m.lyapunov; });
  out.w_drift = column_stats(runs, rows, [](const RoundMetrics& m) { return m.w_drift; });
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
  if (v) out << format_double(*v);
}

std::optional<double> parse_optional(std::string_view s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError(line, "bad number '" + std::string(s) + "'");
  return v;
}

std::uint64_t parse_count(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError(line, "bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& m : rows) {
    out << m.round << ',' << format_double(m.f) << ',';
    put(out, m.grad_norm_sq);
    out << ',';
    put(out, m.dist_sq);
    out << ',';
    put(out, m.lyapunov);
    out << ',';
    put(out, m.w_drift);
    out << ',' << m.uplink_cum << ',' << m.downlink_cum << '\n';
  }
}

std::vector<RoundMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw ParseError(1, "unexpected metrics header: " + line);
  std::vector<RoundMetrics> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 8) throw ParseError(lineno, "expected 8 fields");
    RoundMetrics m;
    m.round = parse_count(fields[0], lineno);
    const auto f = parse_optional(fields[1], lineno);
    if (!f) throw ParseError(lineno, "missing f");
    m.f = *f;
    m.grad_norm_sq = parse_optional(fields[2], lineno);
    m.dist_sq = parse_optional(fields[3], lineno);
    m.lyapunov = parse_optional(fields[4], lineno);
    m.w_drift = parse_optional(fields[5], lineno);
    m.uplink_cum = parse_count(fields[6], lineno);
    m.downlink_cum = parse_count(fields[7], lineno);
    rows.push_back(m);
  }
  return rows;
}

json run_summary(const Experiment& exp, const RunResult& r) {
  const RoundMetrics& last = r.metrics.back();
  json j;
  j["algo"] = std::string(to_string(exp.config().algorithm.algo));
  j["status"] = std::string(to_string(r.status));
  if (!r.message.empty()) j["message"] = r.message;
  j["final_f"] = last.f;
  j["final_grad_norm_sq"] = last.grad_norm_sq ? json(*last.grad_norm_sq) : json(nullptr);
  if (r.min_grad_norm_sq) j["min_grad_norm_sq"] = *r.min_grad_norm_sq;
  j["rounds"] = r.rounds_executed;
  j["uplink_cum"] = last.uplink_cum;
  j["downlink_cum"] = last.downlink_cum;
  j["gamma_used"] = r.gamma;
  j["beta_used"] = r.beta;
  json caps = json::array();
  for (double c : exp.theory_caps()) caps.push_back(std::isfinite(c) ? json(c) : json("inf"));
  j["theory_caps"] = caps;
  j["omega"] = exp.omega();
  j["alpha"] = exp.alpha();
  return j;
}

}  // namespace bicomp
