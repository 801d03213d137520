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

// bicomp: run, sweep, constants and report subcommands.
//
// Exit codes: 0 success, 1 configuration or input error, 2 divergence guard
// tripped, 3 internal invariant violation.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bicomp/engine.hpp"
#include "bicomp/errors.hpp"
#include "bicomp/theory.hpp"
#include "bicomp/thread_pool.hpp"

namespace {

using nlohmann::json;
using namespace bicomp;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitInvariant = 3;

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json num_list(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::size_t resolve_threads(std::optional<std::size_t> requested) {
  const bool capped = std::getenv("BICOMP_THREADS") != nullptr;
  const std::size_t cap = threads_from_env();
  if (!requested) return cap;
  return capped ? std::min(*requested, cap) : std::max<std::size_t>(1, *requested);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> rounds;
  std::optional<double> gamma;
  std::string out = "-";
  std::string summary;
  std::optional<std::size_t> threads;
  bool downlink_times_n = false;
};

int cmd_run(const RunArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.downlink_times_n) cfg.downlink_times_n = true;
  const Experiment exp(std::move(cfg));
  RunOptions opts;
  opts.seed = a.seed;
  opts.rounds = a.rounds;
  opts.gamma = a.gamma;
  opts.threads = resolve_threads(a.threads);
  const RunResult r = run(exp, opts);

  std::ostringstream csv;
  write_metrics_csv(csv, r.metrics);
  const std::string summary = run_summary(exp, r).dump(2) + "\n";
  if (a.out == "-") {
    std::cout << csv.str();
    if (!a.summary.empty()) write_text(a.summary, summary);
    else std::cerr << summary;
  } else {
    write_text(a.out, csv.str());
    if (!a.summary.empty()) write_text(a.summary, summary);
    else std::cout << summary;
  }
  if (r.status == RunStatus::kDiverged) {
    std::cerr << "bicomp: " << r.message << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  int lo = -10;
  int hi = 10;
  std::optional<double> target;
  std::string out_dir;
  std::optional<std::size_t> threads;
};

int cmd_sweep(const SweepArgs& a) {
  const Experiment exp(load_run_config(a.config));
  RunOptions opts;
  opts.threads = resolve_threads(a.threads);
  const SweepResult s = sweep(exp, pow2_grid(a.lo, a.hi), opts, a.target);
  json cells = json::array();
  for (std::size_t k = 0; k < s.cells.size(); ++k) {
    const SweepCell& c = s.cells[k];
    json j;
    j["gamma"] = c.gamma;
    j["status"] = std::string(to_string(c.status));
    j["diverged"] = c.status == RunStatus::kDiverged;
    j["final_f"] = num(c.final_f);
    j["min_grad_norm_sq"] = c.min_grad_norm_sq ? num(*c.min_grad_norm_sq) : json(nullptr);
    j["coords_to_target"] = c.coords_to_target ? json(*c.coords_to_target) : json(nullptr);
    if (!a.out_dir.empty()) {
      std::filesystem::create_directories(a.out_dir);
      const std::string path = (std::filesystem::path(a.out_dir) /
                                ("gamma_2p" + std::to_string(a.lo + static_cast<int>(k)) + ".csv"))
                                   .string();
      std::ostringstream csv;
      write_metrics_csv(csv, c.metrics);
      write_text(path, csv.str());
      j["metrics"] = path;
    }
    cells.push_back(j);
  }
  json out;
  out["cells"] = cells;
  out["best_final_f"] = s.best_final_f ? json(s.cells[*s.best_final_f].gamma) : json(nullptr);
  out["best_coords_to_target"] =
      s.best_coords_to_target ? json(s.cells[*s.best_coords_to_target].gamma) : json(nullptr);
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

json bound_json(const theory::StepsizeBound& b) {
  return {{"gamma", num(b.gamma)}, {"terms", num_list(b.terms)}};
}

json schedule_json(const theory::AbcSchedule& s) {
  return {{"gamma", num(s.gamma)},
          {"terms", num_list(s.terms)},
          {"T", s.horizon.T},
          {"T_bound", num(s.horizon.bound)}};
}

int cmd_constants(const std::string& config_path) {
  const Experiment exp(load_run_config(config_path));
  const theory::TheoryInputs in = exp.theory_inputs();
  const SmoothnessConstants& c = exp.constants();
  json out;

  out["theory_inputs"] = {{"n", in.n},
                          {"omega", in.omega},
                          {"alpha", in.alpha},
                          {"L", in.L},
                          {"L_max", in.L_max},
                          {"L_hat", in.L_hat},
                          {"mu", in.mu},
                          {"sigma2", in.sigma2},
                          {"delta0", in.delta0},
                          {"delta_star", in.delta_star},
                          {"D", in.D ? json(*in.D) : json(nullptr)},
                          {"epsilon", in.epsilon}};
  out["smoothness"] = {{"L", c.L},
                       {"L_i", c.L_i},
                       {"L_max", c.L_max},
                       {"L_hat", c.L_hat},
                       {"mu", c.mu},
                       {"upper_bound", c.upper_bound},
                       {"converged", c.converged}};
  out["compressors"] = {
      {"dual", exp.dual() ? json(exp.dual()->describe()) : json(nullptr)},
      {"primal", exp.primal() ? json(exp.primal()->describe()) : json(nullptr)}};
  const double beta = 1.0 / (in.omega + 1.0);
  out["beta"] = beta;

  const auto diana = theory::stepsize_diana_strong(in);
  json steps;
  steps["gd"] = num(1.0 / in.L);
  steps["ef21p_strong"] = bound_json(theory::stepsize_ef21p_strong(in));
  steps["diana_strong"] = bound_json(diana);
  steps["dcgd_strong"] = bound_json(theory::stepsize_dcgd_strong(in));
  steps["diana_convex"] = bound_json(theory::stepsize_convex_general(in, theory::Family::kDIANA));
  steps["dcgd_convex"] = bound_json(theory::stepsize_convex_general(in, theory::Family::kDCGD));
  out["stepsizes"] = steps;
  out["gamma_used"] = exp.gamma();

  if (const auto& ref = exp.reference()) {
    const double g = ref->mean_grad_norm_sq_at_opt();
    out["reference"] = {{"f_star", ref->f_star},
                        {"grad_norm", ref->grad_norm},
                        {"mean_grad_norm_sq_at_opt", g}};
    if (in.mu > 0.0) out["dcgd_neighborhood"] = num(theory::dcgd_neighborhood(in, g));
  }
  if (in.sigma2 > 0.0) out["diana_statistical_term"] = num(theory::diana_statistical_term(in));

  if (in.epsilon > 0.0) {
    json table = json::array();
    for (auto k : {theory::AbcCase::kFullGradient, theory::AbcCase::kStrongGrowth,
                   theory::AbcCase::kBoundedVariance, theory::AbcCase::kHomogeneous}) {
      if (k == theory::AbcCase::kStrongGrowth && !in.D) continue;
      const auto abc = theory::abc_constants(k, in);
      json row = schedule_json(theory::stepsize_abc(in, abc));
      row["case"] = std::string(theory::to_string(k));
      row["A"] = abc.A;
      row["B"] = abc.B;
      row["C"] = abc.C;
      table.push_back(row);
    }
    out["abc"] = table;
    json closed;
    closed["nonconvex_general"] = schedule_json(theory::nonconvex_general_closed_form(in));
    if (in.D) closed["strong_growth"] = schedule_json(theory::strong_growth_closed_form(in));
    closed["homogeneous"] = schedule_json(theory::homogeneous_closed_form(in));
    out["closed_forms"] = closed;
  } else {
    out["abc"] = nullptr;
    out["abc_note"] = "set algorithm.abc.epsilon to evaluate the nonconvex schedules";
  }

  json checks = json::array();
  const auto report = theory::smoothness_audit(c, static_cast<std::size_t>(in.n));
  for (const auto& k : report.checks)
    checks.push_back({{"check", std::string(k.name)},
                      {"lhs", k.lhs},
                      {"rhs", k.rhs},
                      {"holds", k.holds},
                      {"slack", k.slack()}});
  out["smoothness_audit"] = {{"checks", checks},
                             {"all_hold", report.all_hold()},
                             {"constants_are_upper_bounds", c.upper_bound}};
  const auto w = theory::proof_weights(in, diana.gamma, beta);
  out["proof_weights"] = {{"kappa", num(w.kappa)}, {"nu", num(w.nu)}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> labels;
  std::string x = "round";
  std::string out = "-";
};

int cmd_report(const ReportArgs& a) {
  if (!a.labels.empty() && a.labels.size() != a.inputs.size())
    throw ConfigError("report: give one --labels entry per input");
  std::ostringstream csv;
  csv << "run_label,x,f,grad_norm_sq\n";
  for (std::size_t k = 0; k < a.inputs.size(); ++k) {
    std::ifstream in(a.inputs[k]);
    if (!in) throw ConfigError("cannot open " + a.inputs[k]);
    std::vector<RoundMetrics> rows;
    try {
      rows = read_metrics_csv(in);
    } catch (const ParseError& e) {
      throw ConfigError(a.inputs[k] + ":" + std::to_string(e.line()) + ": " + e.what());
    }
    const std::string label =
        a.labels.empty() ? std::filesystem::path(a.inputs[k]).stem().string() : a.labels[k];
    for (const auto& m : rows) {
      std::uint64_t x = m.round;
      if (a.x == "total_coords") x = m.uplink_cum + m.downlink_cum;
      else if (a.x == "downlink") x = m.downlink_cum;
      csv << label << ',' << x << ',' << format_double(m.f) << ','
          << (m.grad_norm_sq ? format_double(*m.grad_norm_sq) : "") << '\n';
    }
  }
  if (a.out == "-") std::cout << csv.str();
  else write_text(a.out, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bidirectionally compressed distributed optimization laboratory"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment and write its metrics CSV");
  run_cmd->add_option("--config", run_args.config, "JSON run configuration")->required();
  run_cmd->add_option("--seed", run_args.seed, "Override the run seed");
  run_cmd->add_option("--rounds", run_args.rounds, "Override the number of rounds");
  run_cmd->add_option("--gamma", run_args.gamma, "Override the stepsize");
  run_cmd->add_option("--out", run_args.out, "Metrics CSV path ('-' for stdout)");
  run_cmd->add_option("--summary", run_args.summary, "JSON summary path");
  run_cmd->add_option("--threads", run_args.threads, "Worker pool size");
  run_cmd->add_flag("--downlink-times-n", run_args.downlink_times_n,
                    "Count each broadcast once per worker");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a stepsize grid {2^i : lo <= i <= hi}");
  sweep_cmd->add_option("--config", sweep_args.config, "JSON run configuration")->required();
  sweep_cmd->add_option("--lo", sweep_args.lo, "Smallest exponent");
  sweep_cmd->add_option("--hi", sweep_args.hi, "Largest exponent");
  sweep_cmd->add_option("--target", sweep_args.target, "f - f* target for coords-to-target");
  sweep_cmd->add_option("--out-dir", sweep_args.out_dir, "Directory for per-cell CSVs");
  sweep_cmd->add_option("--threads", sweep_args.threads, "Worker pool size");

  std::string constants_config;
  auto* constants_cmd = app.add_subcommand("constants", "Print smoothness constants and stepsize bounds");
  constants_cmd->add_option("--config", constants_config, "JSON run configuration")->required();

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Merge metrics CSVs into one long-format CSV");
  report_cmd->add_option("--inputs", report_args.inputs, "Metrics CSV files")->required();
  report_cmd->add_option("--labels", report_args.labels, "Run labels (default: file stems)");
  report_cmd->add_option("--x", report_args.x, "Abscissa")
      ->check(CLI::IsMember({"round", "total_coords", "downlink"}));
  report_cmd->add_option("--out", report_args.out, "Output path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run_args);
    if (*sweep_cmd) return cmd_sweep(sweep_args);
    if (*constants_cmd) return cmd_constants(constants_config);
    if (*report_cmd) return cmd_report(report_args);
  } catch (const ConfigError& e) {
    std::cerr << "bicomp: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "bicomp: parse error at line " << e.line() << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    std::cerr << "bicomp: invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bicomp: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "bicomp: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
