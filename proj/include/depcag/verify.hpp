#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "depcag/model.hpp"
#include "depcag/trajectory.hpp"

namespace depcag {

class TransitionOperator;

struct GrowthConstants {
  // Per interval: exp of int |Q| over [t_i, zeta_i] (plus) and [zeta_i, t_{i+1}] (minus).
  std::vector<double> rho_plus_M, rho_minus_M, rho_plus_M0, rho_minus_M0;
  double nu_plus = 0, nu_minus = 0;
  double rho = 1, rho0 = 1, rho_star = 1, rho_tilde = 1;
  bool condition_c = true;  // nu_plus < 1 and nu_minus < 1
};

GrowthConstants growth_constants(const LinearDepcag& sys, double alpha, double ode_step);

struct CheckEntry {
  std::string name;
  std::string inequality;
  double lhs = 0;
  double rhs = 0;
  bool pass = false;
  std::string note;
};

struct HypothesisReport {
  std::vector<CheckEntry> entries;
  std::map<std::string, double> derived;
  std::vector<std::string> notes;

  bool all_pass() const;
  const CheckEntry* find(const std::string& name) const;
  // First failing entry name, empty when all pass.
  std::string first_failure() const;
  void add(CheckEntry e) { entries.push_back(std::move(e)); }
  void merge(const HypothesisReport& o);
  nlohmann::json to_json() const;
};

// F(l, theta) = (e^{(beta+l) theta} - 1) / ((beta+l) theta), equal to 1 in the limit.
double f_factor(double beta, double l, double theta);
// upsilon = F (beta0 + l) theta.
double upsilon(double beta, double beta0, double l, double theta);

// Bounded-solution hypotheses: eq10a, eq10b and the sigma denominator.
HypothesisReport check_theorem1(const GrowthConstants& gc, const DichotomySpec& d, double r,
                                double mu, double l, double theta);
HypothesisReport check_theorem1(const DepcagSystem& sys, const DichotomySpec& d,
                                const NumericsConfig& num);

// Conjugacy hypotheses: eq11..eq14 over both blocks plus the continuity constants.
HypothesisReport check_theorem2(const BlockSystem& sys, const DichotomySpec& d,
                                const NumericsConfig& num);

struct DichotomyReport {
  bool pass = true;
  int samples = 0;
  int failures = 0;
  double worst_ratio = 0;  // max |Z_P| / (K e^{-alpha|t-s|})
  double fitted_K = 0, fitted_alpha = 0;
  std::string note;
  nlohmann::json to_json() const;
};

DichotomyReport check_dichotomy(const TransitionOperator& op, const DichotomySpec& d, int samples,
                                unsigned seed);
// Condition frakD on a block system: |Z1(t,s)| <= e^{-alpha(t-s)} for t >= s,
// |Z2(t,s)| <= K e^{alpha(t-s)} for s > t.
DichotomyReport check_block_dichotomy(const TransitionOperator& x_op, const TransitionOperator& y_op,
                                      double K, double alpha, int samples, unsigned seed);

struct GronwallReport {
  double theta_bar = 0;
  double theta_tilde = 0;
  bool premise = true;
  bool conclusions_hold = true;
  int pairs_checked = 0;
  double worst_ratio = 0;
  std::string note;
};

// varrho(t) = |traj(t)|; eta(t) is an expression in t.
GronwallReport gronwall_check(const Trajectory& traj, const TimeGrid& grid, const std::string& eta,
                              const std::map<std::string, double>& constants = {});
// Premise quantities only.
GronwallReport gronwall_premise(const TimeGrid& grid, const std::string& eta,
                                const std::map<std::string, double>& constants = {});

// Full report for the CLI.
HypothesisReport verify_config(const Config& c, unsigned seed);

}  // namespace depcag
