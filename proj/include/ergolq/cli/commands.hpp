#pragma once

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ergolq/analytic1d.hpp"
#include "ergolq/cli/problem_file.hpp"
#include "ergolq/ergodic.hpp"
#include "ergolq/riccati.hpp"
#include "ergolq/simulate.hpp"
#include "ergolq/stationary.hpp"

namespace ergolq::cli {

// Exit codes are part of the command-line interface.
enum ExitCode : int { kOk = 0, kFailure = 1, kParse = 2, kDims = 3, kNotStabilizing = 4, kDiverging = 5 };

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidInput: return kParse;
    case Errc::DimensionMismatch: return kDims;
    case Errc::NotStabilizing:
    case Errc::StabilizerNotFound: return kNotStabilizing;
    case Errc::Diverging: return kDiverging;
    default: return kFailure;
  }
}

namespace detail {

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Shortest representation that reads back to the same double.
inline std::string csv_num(double x) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, r.ptr};
}

inline std::string mat(const Matrix& M) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (i) s += "; ";
    for (Eigen::Index k = 0; k < M.cols(); ++k) {
      if (k) s += ", ";
      s += num(M(i, k));
    }
  }
  return s + "]";
}

inline std::string vec_str(const Vector& v) { return mat(v.transpose()); }

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error(Errc::InvalidInput, what + ": empty entry");
    item = item.substr(b, e - b + 1);
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !std::isfinite(x))
      throw Error(Errc::InvalidInput, what + ": cannot read \"" + item + "\" as a finite number");
    out.push_back(x);
  }
  if (out.empty()) throw Error(Errc::InvalidInput, what + ": no values");
  return out;
}

inline Matrix parse_matrix_arg(const std::string& text, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  const auto xs = parse_list(text, what);
  if (static_cast<Eigen::Index>(xs.size()) != rows * cols)
    throw Error(Errc::DimensionMismatch, what + ": expected " + std::to_string(rows * cols) + " comma-separated values");
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = xs[static_cast<std::size_t>(i * cols + k)];
  return M;
}

inline std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("ERGOLQ_SEED");
  if (!s || !*s) return std::nullopt;
  std::uint64_t v = 0;
  const std::string_view sv(s);
  const auto r = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (r.ec != std::errc() || r.ptr != sv.data() + sv.size())
    throw Error(Errc::InvalidInput, "ERGOLQ_SEED must be an unsigned 64-bit integer");
  return v;
}

inline Strategy resolve_strategy(const ProblemFile& pf, const std::optional<std::string>& theta,
                                 const std::optional<std::string>& v) {
  const auto n = static_cast<Eigen::Index>(pf.sys.n()), m = static_cast<Eigen::Index>(pf.sys.m());
  if (!theta && !pf.strategy) throw Error(Errc::InvalidInput, "no strategy: pass --theta (and --v) or add one to the file");
  Strategy s = pf.strategy ? *pf.strategy : Strategy{Matrix::Zero(m, n), Vector::Zero(m)};
  if (theta) {
    s.Theta = parse_matrix_arg(*theta, m, n, "--theta");
    s.v = Vector::Zero(m);
  }
  if (v) s.v = parse_matrix_arg(*v, m, 1, "--v").col(0);
  return s;
}

inline void print_residuals(std::ostream& out, const std::map<std::string, double>& r) {
  for (const auto& [k, x] : r) out << "    " << k << " = " << num(x) << "\n";
}

template <class T>
void print_attempt(std::ostream& out, const char* name, const Checked<T>& r) {
  if (succeeded(r)) {
    out << "  " << name << ": holds\n";
    print_residuals(out, std::get<T>(r).residuals);
  } else {
    const auto& f = std::get<Failure>(r);
    out << "  " << name << ": fails (" << f.condition << ", " << num(f.value) << ")\n";
  }
}

inline void print_verdict_1d(std::ostream& out, const analytic1d::Verdict1D& v) {
  using analytic1d::to_string;
  out << "  finite: " << to_string(v.finite) << "\n  solvable: " << to_string(v.solvable) << "\n  "
      << v.optimal_description << "\n";
  if (v.value) out << "  value: " << num(*v.value) << "\n";
  for (const auto& [k, x] : v.quantities) out << "  " << k << " = " << num(x) << "\n";
}

// One-line summary for scalar problems in one of the closed-form families.
inline std::optional<std::string> fast_path_1d(const ProblemFile& pf) {
  using namespace analytic1d;
  if (auto p = as_example2(pf.sys, pf.w)) {
    if (!(abg_example2(*p).alpha > 0)) return std::nullopt;
    const auto v = classify_example2(*p);
    if (v.case_label.empty()) return "no Table-2 row applies (1-D fast path)";
    if (v.solvable == Tri::Yes) return "H3-style solvable via Table-2 row " + v.case_label + " (1-D fast path)";
    return "finite via Table-2 row " + v.case_label + " (1-D fast path)";
  }
  if (auto p = as_example1(pf.sys, pf.w)) {
    const auto v = classify_example1(*p);
    return "Table-1 case " + v.case_label + ": finite " + to_string(v.finite) + ", solvable " +
           to_string(v.solvable) + " (1-D fast path)";
  }
  return std::nullopt;
}

}  // namespace detail

struct CheckArgs {
  std::optional<std::string> pi0;
};

inline int cmd_check(const ProblemFile& pf, const CheckArgs& args, std::ostream& out) {
  using namespace detail;
  const auto& sys = pf.sys;
  const auto n = static_cast<Eigen::Index>(sys.n());
  ClassifyOptions opts;
  if (pf.schedule) opts.schedule = *pf.schedule;
  if (args.pi0) opts.pi0 = parse_matrix_arg(*args.pi0, n, n, "--pi0");
  out << "problem: n = " << sys.n() << ", m = " << sys.m() << ", d = " << sys.d() << "\n";

  const Report rep = classify(sys, pf.w, opts);
  if (!rep.stabilizer) {
    out << "stabilizer not found\n";
    return kNotStabilizing;
  }
  out << "stabilizer: Theta = " << mat(*rep.stabilizer) << "\n  lambda(Theta) = "
      << num(lambda_of_theta(sys, *rep.stabilizer)) << "\n";
  out << (rep.positive_definite ? "positive definite: Corollary 3.3 path available\n"
                                : "positive definite: no\n");
  if (auto line = fast_path_1d(pf)) out << *line << "\n";

  if (opts.pi0) {
    out << "user Pi0 = " << mat(*opts.pi0) << "\n";
    print_attempt(out, "H3", check_h3(sys, pf.w, *opts.pi0, *rep.stabilizer, Vector::Zero(sys.m())));
    print_attempt(out, "H2", check_h2(sys, pf.w, *opts.pi0, *rep.stabilizer));
  }
  if (rep.h3) {
    out << "H3 certificate: Pi0 = " << mat(rep.h3->Pi0) << " (" << rep.certificate_source << ")\n"
        << "  Theta = " << mat(rep.h3->ThetaBar0) << ", v = " << vec_str(rep.h3->vBar0)
        << ", value = " << num(rep.h3->value) << "\n";
    print_residuals(out, rep.h3->residuals);
  } else if (!rep.positive_definite) {
    out << "H3 certificate: none found\n";
  }
  if (rep.h2) {
    out << "H2 certificate: Pi0 = " << mat(rep.h2->Pi0) << " (" << rep.certificate_source << ")\n"
        << "  lower bound = " << num(rep.h2->lower_bound) << "\n";
    print_residuals(out, rep.h2->residuals);
  } else if (!rep.h3 && !rep.positive_definite) {
    out << "H2 certificate: none found\n";
  }
  if (rep.trace) {
    out << "regularization: " << to_string(rep.trace->status) << ", last value "
        << num(rep.trace->limit_estimate) << " at delta = " << num(rep.trace->entries.back().delta) << "\n";
  }
  out << "verdict: " << to_string(rep.verdict) << "\n";
  if (rep.value) out << "value: " << num(*rep.value) << "\n";
  for (const auto& note : rep.notes) out << "note: " << note << "\n";
  return kOk;
}

struct EvalArgs {
  std::optional<std::string> theta, v;
};

inline int cmd_eval(const ProblemFile& pf, const EvalArgs& args, std::ostream& out) {
  using namespace detail;
  const auto strat = resolve_strategy(pf, args.theta, args.v);
  const double E = ergodic_cost(pf.sys, pf.w, strat);
  out << "Theta = " << mat(strat.Theta) << ", v = " << vec_str(strat.v) << "\n";
  out << "ergodic cost: " << num(E) << "\n";

  std::mt19937_64 rng(env_seed().value_or(1));
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(pf.sys.n());
  Matrix Pi(n, n);
  for (auto& x : Pi.reshaped()) x = normal(rng);
  Pi = symmetrize(Pi);
  const double rep = cost_representation(pf.sys, pf.w, strat, Pi);
  out << "representation check (random Pi): " << num(rep) << ", difference " << num(std::abs(rep - E)) << "\n";

  const auto mom = stationary_moments(pf.sys, strat);
  out << "moments:\n  m1 = " << vec_str(mom.m1) << "\n  M2 = " << mat(mom.M2) << "\n  cov = " << mat(mom.covariance())
      << "\n";
  return kOk;
}

inline int cmd_solve(const ProblemFile& pf, std::ostream& out) {
  using namespace detail;
  if (block_positive_definite(pf.w)) {
    const auto sol = solve_positive_definite(pf.sys, pf.w);
    out << "positive definite weights: direct Riccati solve\n"
        << "value: " << num(sol.value) << "\nTheta = " << mat(sol.Theta_hat) << "\nv = " << vec_str(sol.v_hat)
        << "\nP = " << mat(sol.P_hat) << "\neta = " << vec_str(sol.eta_hat) << "\nARE residual: "
        << num(sol.are_residual) << " after " << sol.nk_iterations << " Newton-Kleinman iterations\n";
    return kOk;
  }
  ClassifyOptions opts;
  if (pf.schedule) opts.schedule = *pf.schedule;
  const Report rep = classify(pf.sys, pf.w, opts);
  out << "verdict: " << to_string(rep.verdict) << "\n";
  if (rep.value) out << "value: " << num(*rep.value) << "\n";
  if (rep.strategy) out << "Theta = " << mat(rep.strategy->Theta) << "\nv = " << vec_str(rep.strategy->v) << "\n";
  if (!rep.certificate_source.empty()) out << "certificate Pi0 from: " << rep.certificate_source << "\n";
  for (const auto& note : rep.notes) out << "note: " << note << "\n";
  if (!rep.stabilizer) return kNotStabilizing;
  if (rep.verdict == Verdict::RegularizationDiverged) return kDiverging;
  return kOk;
}

struct RegularizeArgs {
  std::optional<std::string> schedule, csv;
};

inline const char* kRegularizeCsvHeader = "delta,value,theta_norm,v_norm,are_residual";

inline void write_regularize_csv(std::ostream& os, const RegularizationTrace& tr) {
  using detail::csv_num;
  os << kRegularizeCsvHeader << "\n";
  for (const auto& e : tr.entries)
    os << csv_num(e.delta) << "," << csv_num(e.value) << "," << csv_num(e.Theta_hat.norm()) << ","
       << csv_num(e.v_hat.norm()) << "," << csv_num(e.are_residual) << "\n";
}

inline int cmd_regularize(const ProblemFile& pf, const RegularizeArgs& args, std::ostream& out) {
  using namespace detail;
  std::vector<double> schedule = geometric_schedule();
  if (pf.schedule) schedule = *pf.schedule;
  if (args.schedule) schedule = parse_list(*args.schedule, "--schedule");
  const auto tr = value_by_regularization(pf.sys, pf.w, schedule);

  if (args.csv) {
    if (*args.csv == "-") {
      write_regularize_csv(out, tr);
    } else {
      std::ofstream f(*args.csv);
      if (!f) throw Error(Errc::InvalidInput, "cannot write " + *args.csv);
      write_regularize_csv(f, tr);
    }
  }
  out << "delta            value              |Theta|          |v|              ARE residual\n";
  for (const auto& e : tr.entries) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16.6g %-18.12g %-16.6g %-16.6g %.3g\n", e.delta, e.value,
                  e.Theta_hat.norm(), e.v_hat.norm(), e.are_residual);
    out << line;
  }
  out << "status: " << to_string(tr.status) << "\nvalue estimate: " << num(tr.limit_estimate)
      << "\nsqrt(delta) extrapolation: " << num(tr.extrapolated)
      << "\nstrategies settle: " << (tr.strategy_convergent ? "yes" : "no") << "\n";
  return tr.status == TraceStatus::Diverging ? kDiverging : kOk;
}

struct SimulateArgs {
  std::optional<std::string> theta, v, x0, trace;
  long long trace_every = 100;
};

inline int cmd_simulate(const ProblemFile& pf, const SimulateArgs& args, std::ostream& out) {
  using namespace detail;
  const auto strat = resolve_strategy(pf, args.theta, args.v);
  const auto n = static_cast<Eigen::Index>(pf.sys.n());
  SimConfig cfg = pf.sim.value_or(SimConfig{});
  if (auto s = env_seed()) cfg.seed = *s;
  const Vector x0 = args.x0 ? Vector(parse_matrix_arg(*args.x0, n, 1, "--x0").col(0)) : Vector::Zero(n);

  const auto st = cesaro_cost(pf.sys, pf.w, strat, x0, cfg);
  const double E = ergodic_cost(pf.sys, pf.w, strat);
  const auto mom = stationary_moments(pf.sys, strat);
  out << "paths: " << st.n_paths << ", dt = " << num(cfg.dt) << ", T = " << num(cfg.horizon_T)
      << ", burn-in = " << num(cfg.burn_in_T) << ", seed = " << cfg.seed << "\n";
  out << "Cesaro mean cost: " << num(st.cesaro_mean) << " +- " << num(st.cesaro_stderr) << "\n";
  if (st.abel_mean)
    out << "Abel mean cost (lambda = " << num(cfg.abel_lambda) << "): " << num(*st.abel_mean) << " +- "
        << num(*st.abel_stderr) << "\n";
  out << "ergodic cost (exact): " << num(E) << "\n";
  out << "empirical m1 = " << vec_str(st.emp_m1) << " +- " << vec_str(st.m1_stderr) << " (exact "
      << vec_str(mom.m1) << ")\n";
  out << "empirical M2 = " << mat(st.emp_M2) << " +- " << mat(st.M2_stderr) << " (exact " << mat(mom.M2) << ")\n";

  if (args.trace) {
    std::ofstream f(*args.trace);
    if (!f) throw Error(Errc::InvalidInput, "cannot write " + *args.trace);
    f << "t";
    for (Eigen::Index i = 0; i < n; ++i) f << ",x" << (i + 1);
    f << ",running_mean\n";
    simulate_closed_loop(
        pf.sys, pf.w, strat, x0, cfg, 0,
        [&](double t, const Vector& x, double running) {
          f << csv_num(t);
          for (Eigen::Index i = 0; i < n; ++i) f << "," << csv_num(x(i));
          f << "," << csv_num(running) << "\n";
        },
        args.trace_every);
    out << "trace of path 0 written to " << *args.trace << "\n";
  }
  return kOk;
}

inline int cmd_classify1d(const ProblemFile& pf, std::ostream& out) {
  using namespace analytic1d;
  using detail::num;
  if (pf.sys.n() != 1 || pf.sys.m() != 1 || pf.sys.d() != 1)
    throw Error(Errc::DimensionMismatch, "classify1d needs n = m = d = 1");
  if (auto p = as_example2(pf.sys, pf.w)) {
    const auto v = classify_example2(*p);
    out << "family: D != 0\n";
    if (v.case_label.empty())
      out << "no Table-2 row applies\n";
    else
      out << "Table-2 row " << v.case_label << ": " << (v.solvable == Tri::Yes ? "Solvable" : "Finite") << "\n";
    detail::print_verdict_1d(out, v);
    const auto ts = theta_star_example2(*p);
    out << "  Theta* = " << num(ts.theta) << (ts.sign_tie ? " (sign tie, sgn(0) = +1 used)" : "") << "\n";
    return kOk;
  }
  if (auto p = as_example1(pf.sys, pf.w)) {
    const auto v = classify_example1(*p);
    out << "family: D = R = 0, B = 1\nTable-1 case " << v.case_label << "\n";
    detail::print_verdict_1d(out, v);
    return kOk;
  }
  throw Error(Errc::InvalidInput,
              "classify1d covers D != 0, or D = R = q = rho = 0 with B = 1; this problem is neither");
}

/// Entry point shared by the executable and the tests.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Ergodic linear-quadratic control: certificates, Riccati solves, regularization, Monte Carlo"};
  app.require_subcommand(0, 1);
  std::string dump_file;
  app.add_option("--dump-normalized", dump_file, "Print the canonical form of a problem file and exit");

  std::string file;
  CheckArgs check_args;
  EvalArgs eval_args;
  RegularizeArgs reg_args;
  SimulateArgs sim_args;

  auto* check = app.add_subcommand("check", "Stabilizer search and H2/H3 certificate attempts");
  check->add_option("file", file, "Problem file")->required();
  check->add_option("--pi0", check_args.pi0, "Candidate Pi0, n*n comma-separated values (row-major)");

  auto* eval = app.add_subcommand("eval", "Ergodic cost and stationary moments of a strategy");
  eval->add_option("file", file, "Problem file")->required();
  eval->add_option("--theta", eval_args.theta, "Gain, m*n comma-separated values (row-major)");
  eval->add_option("--v", eval_args.v, "Offset, m comma-separated values");

  auto* solve = app.add_subcommand("solve", "Optimal value and strategy");
  solve->add_option("file", file, "Problem file")->required();

  auto* reg = app.add_subcommand("regularize", "Value by delta-regularization");
  reg->add_option("file", file, "Problem file")->required();
  reg->add_option("--schedule", reg_args.schedule, "Decreasing deltas, comma-separated");
  reg->add_option("--csv", reg_args.csv, "Write the trace as CSV ('-' for stdout)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimates of the ergodic cost");
  sim->add_option("file", file, "Problem file")->required();
  sim->add_option("--theta", sim_args.theta, "Gain, m*n comma-separated values (row-major)");
  sim->add_option("--v", sim_args.v, "Offset, m comma-separated values");
  sim->add_option("--x0", sim_args.x0, "Initial state, n comma-separated values");
  sim->add_option("--trace", sim_args.trace, "Write path 0 as CSV");
  sim->add_option("--trace-every", sim_args.trace_every, "Trace stride in steps")->check(CLI::PositiveNumber);

  auto* c1d = app.add_subcommand("classify1d", "Closed-form classification of scalar problems");
  c1d->add_option("file", file, "Problem file")->required();

  std::vector<const char*> argv{"ergolq"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kParse;
  }

  try {
    if (!dump_file.empty()) {
      out << to_json(load_problem(dump_file)).dump(2) << "\n";
      return kOk;
    }
    if (app.get_subcommands().empty()) {
      err << app.help();
      return kParse;
    }
    const ProblemFile pf = load_problem(file);
    if (*check) return cmd_check(pf, check_args, out);
    if (*eval) return cmd_eval(pf, eval_args, out);
    if (*solve) return cmd_solve(pf, out);
    if (*reg) return cmd_regularize(pf, reg_args, out);
    if (*sim) return cmd_simulate(pf, sim_args, out);
    if (*c1d) return cmd_classify1d(pf, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace ergolq::cli
