#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "depcag/expr.hpp"
#include "depcag/linalg.hpp"

namespace depcag {

// Knots t_0 < ... < t_N, one anchor per interval, and the length bound theta.
struct TimeGrid {
  std::vector<double> knots;
  std::vector<double> anchors;
  double theta = 0.0;

  int intervals() const { return static_cast<int>(anchors.size()); }
  double t_min() const { return knots.front(); }
  double t_max() const { return knots.back(); }
  double length(int i) const { return knots[i + 1] - knots[i]; }
  bool contains(double t) const { return t >= t_min() && t <= t_max(); }

  // Interval i with t in [t_i, t_{i+1}); t_max belongs to the last interval.
  int interval_of(double t) const;
  // Interval i with t in (t_i, t_{i+1}]; t_min belongs to the first interval.
  int interval_of_left(double t) const;
  double gamma(double t) const { return anchors[interval_of(t)]; }

  // Throws ConfigError naming A1 or A4.
  void validate() const;

  static TimeGrid uniform(double a, double b, double step, double anchor_fraction,
                          std::optional<double> theta = std::nullopt);
};

// Matrix whose entries are expressions in t and named constants.
class MatrixExpr {
 public:
  MatrixExpr() = default;
  MatrixExpr(int rows, int cols, std::vector<std::string> sources,
             const std::map<std::string, double>& constants);
  static MatrixExpr zero(int rows, int cols);
  static MatrixExpr block_diag(const MatrixExpr& a, const MatrixExpr& b);

  Mat operator()(double t) const;
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  // Row-major entry sources.
  const std::vector<std::string>& sources() const { return sources_; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<std::string> sources_;
  std::vector<expr::Compiled> entries_;
};

// A vector field (t, z, w) -> R^n with declared bound constants.
// Variables: t, <prefix>1..<prefix>n, w1..wn, where w is the frozen copy.
class NonlinearTerm {
 public:
  NonlinearTerm() = default;
  // One source per output component; inputs are dim_in-dimensional.
  NonlinearTerm(char prefix, int dim_in, std::vector<std::string> sources,
                const std::map<std::string, double>& constants, double growth_r,
                double offset_mu, double lipschitz_l);
  static NonlinearTerm zero(char prefix, int dim_in, int dim_out);

  Vec operator()(double t, const Vec& z, const Vec& w) const;
  void eval(double t, const Vec& z, const Vec& w, double* out) const;

  int dim_in() const { return dim_in_; }
  int dim_out() const { return static_cast<int>(comps_.size()); }
  char prefix() const { return prefix_; }
  const std::vector<std::string>& sources() const { return sources_; }
  bool is_zero() const { return zero_; }

  double growth_r = 0.0;
  double offset_mu = 0.0;
  double lipschitz_l = 0.0;

 private:
  char prefix_ = 'z';
  int dim_in_ = 0;
  bool zero_ = true;
  std::vector<std::string> sources_;
  std::vector<expr::Compiled> comps_;
};

struct DepcagSystem {
  TimeGrid grid;
  MatrixExpr M, M0;
  std::optional<NonlinearTerm> h;
  int dim() const { return M.rows(); }
};

struct BlockSystem {
  TimeGrid grid;
  MatrixExpr A, A0, B, B0;
  NonlinearTerm f, g, phi, psi;
  double lambda = 0, delta = 0, omega = 0, beta = 0, beta0 = 0;
  int n1() const { return A.rows(); }
  int n2() const { return B.rows(); }
};

struct DichotomySpec {
  Mat P;
  double K = 1.0;
  double alpha = 1.0;
  void validate(int n) const;
};

struct NumericsConfig {
  double ode_step = 0.01;
  double fp_tol = 1e-12;
  double picard_tol = 1e-8;
  double tail_tol = 1e-8;
  double crossing_tol = 1e-10;
  int max_iters = 200;
  void validate() const;
};

struct Config {
  std::variant<DepcagSystem, BlockSystem> system;
  DichotomySpec dichotomy;
  NumericsConfig numerics;
  std::map<std::string, double> constants;
  std::optional<std::string> gronwall_eta;

  bool is_block() const { return std::holds_alternative<BlockSystem>(system); }
  const TimeGrid& grid() const;
  int dim() const;
};

// Linear part z' = M z + M0 z(gamma) as callables; used by transition/verify.
struct LinearDepcag {
  TimeGrid grid;
  int dim = 0;
  MatrixFn M, M0;
};

LinearDepcag linear_part(const DepcagSystem& s);
LinearDepcag x_block(const BlockSystem& s);
LinearDepcag y_block(const BlockSystem& s);
LinearDepcag full_linear(const BlockSystem& s);

Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);
nlohmann::json to_json(const Config& c);

// Spot checks of declared bounds; throw ConfigError naming the condition.
void spot_check(const DepcagSystem& s, unsigned seed = 0);
void spot_check(const BlockSystem& s, unsigned seed = 0);

// Largest sampled |M(t)| over the window (knots, anchors, midpoints).
double sampled_sup_norm(const MatrixFn& m, const TimeGrid& g);

}  // namespace depcag
