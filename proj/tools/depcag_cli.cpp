// depcag: command-line front end.
#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "depcag/conjugacy.hpp"
#include "depcag/error.hpp"
#include "depcag/green_operator.hpp"
#include "depcag/model.hpp"
#include "depcag/solve.hpp"
#include "depcag/transition.hpp"
#include "depcag/verify.hpp"

using namespace depcag;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kRuntime = 1, kHypothesis = 2;

struct Args {
  std::string config;
  double t = 0, s = 0, from = 0, to = 0;
  std::string init, state, stage = "all", out;
  bool inverse = false, timing = false;
  int grid = 5, threads = 1;
  unsigned seed = 0;
};

std::string config_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec parse_vec(const std::string& text, int n, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError(std::string(what) + ": cannot parse '" + item + "' as a number");
    }
  }
  if (static_cast<int>(v.size()) != n)
    throw DomainError(std::string(what) + ": expected " + std::to_string(n) + " components, got " +
                      std::to_string(v.size()));
  return Eigen::Map<Vec>(v.data(), n);
}

// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DomainError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

json run_header(const std::string& command, const Args& a, const Config& c) {
  json j = to_json(c);
  return {{"command", command},
          {"config", a.config},
          {"config_hash", config_hash(a.config)},
          {"seed", a.seed},
          {"numerics", j["numerics"]}};
}

void print_table(const HypothesisReport& r) {
  std::fprintf(stderr, "%-18s %-6s %-14s %-14s  %s\n", "condition", "pass", "lhs", "rhs", "inequality");
  for (const auto& e : r.entries)
    std::fprintf(stderr, "%-18s %-6s %-14.6g %-14.6g  %s\n", e.name.c_str(), e.pass ? "yes" : "NO", e.lhs,
                 e.rhs, e.inequality.c_str());
}

void write_csv_row(std::ostream& os, double t, const Vec& v) {
  os << fmt17(t);
  for (int i = 0; i < v.size(); ++i) os << ',' << fmt17(v(i));
  os << '\n';
}

void write_header(std::ostream& os, int n) {
  os << 't';
  for (int i = 1; i <= n; ++i) os << ",z" << i;
  os << '\n';
}

int cmd_verify(const Args& a) {
  Config c;
  try {
    c = load_config(a.config);
  } catch (const ConfigError& e) {
    if (e.condition().empty()) throw;
    json j = {{"command", "verify"}, {"config", a.config}, {"failed_condition", e.condition()},
              {"message", e.what()}, {"all_pass", false}};
    Sink sink(a.out);
    sink.os() << j.dump(2) << '\n';
    std::cerr << "hypothesis failure: " << e.condition() << ": " << e.what() << '\n';
    return kHypothesis;
  }
  const auto t0 = std::chrono::steady_clock::now();
  HypothesisReport r = verify_config(c, a.seed);
  json j = run_header("verify", a, c);
  j["report"] = r.to_json();
  if (!r.all_pass()) j["failed_condition"] = r.first_failure();
  if (a.timing)
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  print_table(r);
  Sink sink(a.out);
  sink.os() << j.dump(2) << '\n';
  return r.all_pass() ? kOk : kHypothesis;
}

int cmd_simulate(const Args& a) {
  Config c = load_config(a.config);
  PcaRhs rhs;
  bool nonlinear = false;
  if (auto d = std::get_if<DepcagSystem>(&c.system)) {
    rhs = make_rhs(*d);
    nonlinear = d->h.has_value();
  } else {
    const auto& b = std::get<BlockSystem>(c.system);
    rhs = make_rhs(b, true);
    nonlinear = !(b.f.is_zero() && b.g.is_zero() && b.phi.is_zero() && b.psi.is_zero());
  }
  if (nonlinear && !(rhs.upsilon < 1.0))
    throw HypothesisError("eq14", "upsilon = " + fmt17(rhs.upsilon) + " >= 1: the anchor fixed point may not contract");
  const Vec xi = parse_vec(a.init, rhs.dim, "--init");
  Trajectory tr = solve_ivp(rhs, a.from, xi, a.to, c.numerics);
  Sink sink(a.out);
  write_header(sink.os(), rhs.dim);
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    if (k > 0 && tr.times[k] == tr.times[k - 1]) continue;
    write_csv_row(sink.os(), tr.times[k], tr.values[k]);
  }
  return kOk;
}

LinearDepcag linear_of(const Config& c) {
  if (auto d = std::get_if<DepcagSystem>(&c.system)) return linear_part(*d);
  return full_linear(std::get<BlockSystem>(c.system));
}

int cmd_transition(const Args& a) {
  Config c = load_config(a.config);
  TransitionOperator op(linear_of(c), c.numerics);
  const Mat Z = op.transition_z(a.t, a.s);
  Sink sink(a.out);
  for (int i = 0; i < Z.rows(); ++i) {
    for (int k = 0; k < Z.cols(); ++k) sink.os() << (k ? "," : "") << fmt17(Z(i, k));
    sink.os() << '\n';
  }
  return kOk;
}

int cmd_bounded(const Args& a) {
  Config c = load_config(a.config);
  const auto* d = std::get_if<DepcagSystem>(&c.system);
  if (!d) throw DomainError("bounded expects a system of kind \"depcag\"");
  PicardOptions opt;
  opt.half_step_check = true;
  BoundedSolution sol = bounded_solution(*d, c.dichotomy, c.numerics, opt);
  std::fprintf(stderr,
               "sigma %.6g  residual %.3g  residual_half %.3g  iterations %d  horizon %.6g  trusted [%.6g, %.6g]\n",
               sol.sigma, sol.residual, sol.residual_half, sol.iterations, sol.horizon, sol.trusted_lo,
               sol.trusted_hi);
  Sink sink(a.out);
  write_header(sink.os(), d->dim());
  const auto& ts = sol.phi0.times();
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (ts[k] >= sol.trusted_lo && ts[k] <= sol.trusted_hi) write_csv_row(sink.os(), ts[k], sol.phi0.values()[k]);
  return kOk;
}

int cmd_conjugate(const Args& a) {
  Config c = load_config(a.config);
  const auto* b = std::get_if<BlockSystem>(&c.system);
  if (!b) throw DomainError("conjugate expects a system of kind \"block\"");
  Stage stage = Stage::Composed;
  if (a.stage == "6") stage = Stage::Section6;
  else if (a.stage == "7") stage = Stage::Section7;
  else if (a.stage != "all") throw DomainError("--stage must be 6, 7 or all");
  Conjugacy conj(*b, c.dichotomy, c.numerics);
  const Vec z = parse_vec(a.state, b->n1() + b->n2(), "--state");
  const Vec img = conj.apply(stage, a.inverse, a.t, z);
  Sink sink(a.out);
  for (int i = 0; i < img.size(); ++i) sink.os() << (i ? "," : "") << fmt17(img(i));
  sink.os() << '\n';
  return kOk;
}

int cmd_check_conjugacy(const Args& a) {
  Config c = load_config(a.config);
  const auto* b = std::get_if<BlockSystem>(&c.system);
  if (!b) throw DomainError("check-conjugacy expects a system of kind \"block\"");
  const auto t0 = std::chrono::steady_clock::now();
  Conjugacy conj(*b, c.dichotomy, c.numerics);
  ConjugacyOptions opt;
  opt.grid = a.grid;
  json j = run_header("check-conjugacy", a, c);
  j["report"] = conjugacy_report(conj, opt);
  if (a.timing)
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Sink sink(a.out);
  sink.os() << j.dump(2) << '\n';
  return j["report"]["all_pass"].get<bool>() ? kOk : kHypothesis;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DEPCAG transition matrices, bounded solutions and conjugacy maps"};
  app.require_subcommand(1);
  Args a;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config,--config", a.config, "configuration file");
    sub->add_option("--seed", a.seed, "seed for sampling-based checks")->capture_default_str();
    sub->add_option("--threads", a.threads, "OpenMP threads")->capture_default_str();
    sub->add_option("--out", a.out, "output file (default stdout)");
  };
  auto* verify = app.add_subcommand("verify", "check every hypothesis and print a report");
  add_common(verify);
  verify->add_flag("--timing", a.timing, "include wall time in the JSON report");
  auto* simulate = app.add_subcommand("simulate", "solve an initial value problem, CSV output");
  add_common(simulate);
  simulate->add_option("--from", a.from, "initial time")->required();
  simulate->add_option("--to", a.to, "final time")->required();
  simulate->add_option("--init", a.init, "initial state, comma separated")->required();
  auto* transition = app.add_subcommand("transition", "print the transition matrix Z(t,s)");
  add_common(transition);
  transition->add_option("--t", a.t, "time t")->required();
  transition->add_option("--s", a.s, "time s")->required();
  auto* bounded = app.add_subcommand("bounded", "unique bounded solution, CSV output");
  add_common(bounded);
  auto* conjugate = app.add_subcommand("conjugate", "apply a conjugacy map to one state");
  add_common(conjugate);
  conjugate->add_option("--t", a.t, "time")->required();
  conjugate->add_option("--state", a.state, "state, comma separated")->required();
  conjugate->add_flag("--inverse", a.inverse, "apply the inverse map");
  conjugate->add_option("--stage", a.stage, "6, 7 or all")->capture_default_str();
  auto* check = app.add_subcommand("check-conjugacy", "round-trip and dynamics defects, JSON output");
  add_common(check);
  check->add_option("--grid", a.grid, "states per axis")->capture_default_str();
  check->add_flag("--timing", a.timing, "include wall time in the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kRuntime;
  }
  if (a.config.empty()) {
    std::cerr << "error: a configuration file is required\n";
    return kRuntime;
  }
  omp_set_num_threads(std::max(1, a.threads));

  try {
    if (*verify) return cmd_verify(a);
    if (*simulate) return cmd_simulate(a);
    if (*transition) return cmd_transition(a);
    if (*bounded) return cmd_bounded(a);
    if (*conjugate) return cmd_conjugate(a);
    if (*check) return cmd_check_conjugacy(a);
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis failure: " << e.condition() << ": " << e.what() << '\n';
    return kHypothesis;
  } catch (const ConfigError& e) {
    std::cerr << "config error" << (e.path().empty() ? "" : " at " + e.path()) << ": " << e.what() << '\n';
    return e.condition().empty() ? kRuntime : kHypothesis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
