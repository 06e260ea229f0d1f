#include "depcag/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace depcag {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

[[noreturn]] void schema(const std::string& path, const std::string& msg) {
  throw ConfigError(path, "", path + ": " + msg);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) schema(path, "expected object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) schema(path + "/" + it.key(), "unknown key");
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) schema(path, "expected number");
  return j.get<double>();
}

double number_or(const json& j, const char* key, const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  return number(j.at(key), path + "/" + key);
}

std::string entry_source(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return fmt(j.get<double>());
  schema(path, "expected string or number");
}

// Splits "[[a, b], [c, min(d,e)]]" into rows of entry sources.
std::vector<std::vector<std::string>> split_matrix_string(const std::string& s,
                                                          const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  int bracket = 0, paren = 0;
  std::string cur;
  for (char c : s) {
    if (c == '[') {
      ++bracket;
      if (bracket == 2) {
        rows.emplace_back();
        cur.clear();
        continue;
      }
      if (bracket > 2) schema(path, "matrix nesting too deep");
      continue;
    }
    if (c == ']') {
      if (bracket == 2) {
        if (cur.find_first_not_of(" \t\n") == std::string::npos) schema(path, "empty matrix entry");
        rows.back().push_back(cur);
        cur.clear();
      }
      --bracket;
      if (bracket < 0) schema(path, "unbalanced ']'");
      continue;
    }
    if (bracket == 2) {
      if (c == '(') ++paren;
      if (c == ')') --paren;
      if (c == ',' && paren == 0) {
        if (cur.find_first_not_of(" \t\n") == std::string::npos) schema(path, "empty matrix entry");
        rows.back().push_back(cur);
        cur.clear();
        continue;
      }
      cur += c;
    } else if (c != ',' && !std::isspace(static_cast<unsigned char>(c))) {
      schema(path, std::string("unexpected character '") + c + "' in matrix literal");
    }
  }
  if (bracket != 0) schema(path, "unbalanced '['");
  return rows;
}

std::vector<std::vector<std::string>> matrix_sources(const json& j, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  if (j.is_string()) {
    rows = split_matrix_string(j.get<std::string>(), path);
  } else if (j.is_number()) {
    rows = {{fmt(j.get<double>())}};
  } else if (j.is_array()) {
    for (std::size_t r = 0; r < j.size(); ++r) {
      const std::string rp = path + "/" + std::to_string(r);
      if (!j[r].is_array()) schema(rp, "expected array (matrix row)");
      rows.emplace_back();
      for (std::size_t c = 0; c < j[r].size(); ++c)
        rows.back().push_back(entry_source(j[r][c], rp + "/" + std::to_string(c)));
    }
  } else {
    schema(path, "expected matrix (array of rows or string)");
  }
  if (rows.empty() || rows[0].empty()) schema(path, "empty matrix");
  for (const auto& r : rows)
    if (r.size() != rows[0].size()) schema(path, "ragged matrix rows");
  return rows;
}

MatrixExpr parse_matrix(const json& j, const std::string& path, int n,
                        const std::map<std::string, double>& constants) {
  auto rows = matrix_sources(j, path);
  if (static_cast<int>(rows.size()) != n || static_cast<int>(rows[0].size()) != n)
    schema(path, "expected " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  std::vector<std::string> flat;
  for (auto& r : rows)
    for (auto& e : r) flat.push_back(e);
  try {
    return MatrixExpr(n, n, flat, constants);
  } catch (const expr::ParseError& e) {
    schema(path, e.what());
  } catch (const expr::UnboundVariable& e) {
    schema(path, e.what());
  }
}

int matrix_dim(const json& j, const std::string& path) {
  auto rows = matrix_sources(j, path);
  if (rows.size() != rows[0].size()) schema(path, "matrix must be square");
  return static_cast<int>(rows.size());
}

std::vector<std::string> term_sources(const json& j, const std::string& path, int n) {
  std::vector<std::string> out;
  if (j.is_string() || j.is_number()) {
    out.push_back(entry_source(j, path));
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      out.push_back(entry_source(j[i], path + "/" + std::to_string(i)));
  } else {
    schema(path, "expected expression string or array of strings");
  }
  if (static_cast<int>(out.size()) != n)
    schema(path, "expected " + std::to_string(n) + " component(s)");
  return out;
}

NonlinearTerm make_term(char prefix, int n, std::vector<std::string> src,
                        const std::map<std::string, double>& constants, double r, double mu,
                        double l, const std::string& path) {
  try {
    return NonlinearTerm(prefix, n, std::move(src), constants, r, mu, l);
  } catch (const expr::ParseError& e) {
    schema(path, e.what());
  } catch (const expr::UnboundVariable& e) {
    schema(path, e.what());
  }
}

TimeGrid parse_grid(const json& j, const std::string& path) {
  check_keys(j, path, {"uniform", "window", "step", "anchor", "anchor_fraction", "knots",
                       "anchors", "theta"});
  std::optional<double> theta;
  if (j.contains("theta")) theta = number(j["theta"], path + "/theta");
  TimeGrid g;
  const json* uni = nullptr;
  std::string upath = path;
  if (j.contains("uniform")) {
    uni = &j["uniform"];
    upath = path + "/uniform";
    check_keys(*uni, upath, {"window", "step", "anchor", "anchor_fraction"});
  } else if (j.contains("window")) {
    uni = &j;
  }
  if (uni) {
    if (!uni->contains("window") || !(*uni)["window"].is_array() || (*uni)["window"].size() != 2)
      schema(upath + "/window", "expected [t_min, t_max]");
    double a = number((*uni)["window"][0], upath + "/window/0");
    double b = number((*uni)["window"][1], upath + "/window/1");
    if (!uni->contains("step")) schema(upath + "/step", "missing");
    double step = number((*uni)["step"], upath + "/step");
    double frac = number_or(*uni, "anchor", upath, number_or(*uni, "anchor_fraction", upath, 0.0));
    if (!(step > 0)) throw ConfigError(upath + "/step", "A1", "A1 violated: step must be positive");
    if (!(b > a)) throw ConfigError(upath + "/window", "A1", "A1 violated: empty window");
    return TimeGrid::uniform(a, b, step, frac, theta);
  }
  if (!j.contains("knots") || !j["knots"].is_array()) schema(path + "/knots", "expected array");
  for (std::size_t i = 0; i < j["knots"].size(); ++i)
    g.knots.push_back(number(j["knots"][i], path + "/knots/" + std::to_string(i)));
  if (g.knots.size() < 2) schema(path + "/knots", "need at least two knots");
  if (j.contains("anchors")) {
    if (!j["anchors"].is_array()) schema(path + "/anchors", "expected array");
    for (std::size_t i = 0; i < j["anchors"].size(); ++i)
      g.anchors.push_back(number(j["anchors"][i], path + "/anchors/" + std::to_string(i)));
    if (g.anchors.size() + 1 != g.knots.size())
      schema(path + "/anchors", "expected one anchor per interval");
  } else {
    double frac = number_or(j, "anchor_fraction", path, 0.0);
    for (std::size_t i = 0; i + 1 < g.knots.size(); ++i)
      g.anchors.push_back(g.knots[i] + frac * (g.knots[i + 1] - g.knots[i]));
  }
  if (theta) {
    g.theta = *theta;
  } else {
    g.theta = 0.0;
    for (std::size_t i = 0; i + 1 < g.knots.size(); ++i)
      g.theta = std::max(g.theta, g.knots[i + 1] - g.knots[i]);
  }
  return g;
}

std::vector<double> sample_times(const TimeGrid& g) {
  std::vector<double> ts;
  for (int i = 0; i < g.intervals(); ++i) {
    double a = g.knots[i], len = g.length(i);
    for (double f : {0.0, 0.25, 0.5, 0.75}) ts.push_back(a + f * len);
    ts.push_back(g.anchors[i]);
  }
  ts.push_back(g.t_max());
  return ts;
}

void check_finite(const MatrixExpr& m, const TimeGrid& g, const std::string& path) {
  for (double t : sample_times(g)) {
    Mat v = m(t);
    if (!v.allFinite())
      throw ConfigError(path, "B1", "B1 violated: " + path + " is not finite at t = " + fmt(t));
  }
}

Mat parse_numeric_matrix(const json& j, const std::string& path) {
  auto rows = matrix_sources(j, path);
  Mat m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      try {
        m(r, c) = expr::parse(rows[r][c]).eval({});
      } catch (const Error& e) {
        schema(path, e.what());
      }
    }
  return m;
}

json matrix_json(const MatrixExpr& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m.sources()[r * m.cols() + c]);
    rows.push_back(row);
  }
  return rows;
}

json numeric_matrix_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------- TimeGrid

int TimeGrid::interval_of(double t) const {
  if (!(t >= t_min() && t <= t_max()))
    throw DomainError("time " + fmt(t) + " outside window [" + fmt(t_min()) + ", " +
                      fmt(t_max()) + "]");
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  int i = static_cast<int>(it - knots.begin()) - 1;
  return std::min(i, intervals() - 1);
}

int TimeGrid::interval_of_left(double t) const {
  if (!(t >= t_min() && t <= t_max()))
    throw DomainError("time " + fmt(t) + " outside window [" + fmt(t_min()) + ", " +
                      fmt(t_max()) + "]");
  auto it = std::lower_bound(knots.begin(), knots.end(), t);
  int i = static_cast<int>(it - knots.begin()) - 1;
  return std::max(i, 0);
}

void TimeGrid::validate() const {
  if (knots.size() < 2) throw ConfigError("/grid", "A1", "A1 violated: need at least one interval");
  if (anchors.size() + 1 != knots.size())
    throw ConfigError("/grid/anchors", "A1", "A1 violated: expected one anchor per interval");
  for (int i = 0; i < intervals(); ++i) {
    if (!(knots[i] < knots[i + 1]))
      throw ConfigError("/grid/knots", "A1",
                        "A1 violated at interval " + std::to_string(i) + ": knots not increasing");
    if (!(anchors[i] >= knots[i] && anchors[i] <= knots[i + 1]))
      throw ConfigError("/grid/anchors", "A1",
                        "A1 violated at interval " + std::to_string(i) + ": anchor " +
                            fmt(anchors[i]) + " outside [" + fmt(knots[i]) + ", " +
                            fmt(knots[i + 1]) + "]");
  }
  if (!(theta > 0)) throw ConfigError("/grid/theta", "A4", "A4 violated: theta must be positive");
  for (int i = 0; i < intervals(); ++i)
    if (length(i) > theta * (1 + 1e-12))
      throw ConfigError("/grid/theta", "A4",
                        "A4 violated at interval " + std::to_string(i) + ": length " +
                            fmt(length(i)) + " exceeds theta " + fmt(theta));
}

TimeGrid TimeGrid::uniform(double a, double b, double step, double anchor_fraction,
                           std::optional<double> theta) {
  TimeGrid g;
  double cnt = (b - a) / step;
  long n = std::lround(cnt);
  if (n < 1 || std::fabs(cnt - static_cast<double>(n)) > 1e-9 * std::max(1.0, cnt))
    throw ConfigError("/grid", "A1", "A1 violated: step does not divide the window");
  for (long i = 0; i <= n; ++i) g.knots.push_back(i == n ? b : a + static_cast<double>(i) * step);
  for (long i = 0; i < n; ++i)
    g.anchors.push_back(g.knots[i] + anchor_fraction * (g.knots[i + 1] - g.knots[i]));
  g.theta = theta ? *theta : step;
  return g;
}

// ------------------------------------------------------------- MatrixExpr

MatrixExpr::MatrixExpr(int rows, int cols, std::vector<std::string> sources,
                       const std::map<std::string, double>& constants)
    : rows_(rows), cols_(cols), sources_(std::move(sources)) {
  for (const auto& s : sources_) entries_.push_back(expr::compile(expr::parse(s), {"t"}, constants));
}

MatrixExpr MatrixExpr::zero(int rows, int cols) {
  return MatrixExpr(rows, cols, std::vector<std::string>(rows * cols, "0"), {});
}

MatrixExpr MatrixExpr::block_diag(const MatrixExpr& a, const MatrixExpr& b) {
  MatrixExpr m;
  m.rows_ = a.rows_ + b.rows_;
  m.cols_ = a.cols_ + b.cols_;
  expr::Compiled z = expr::constant(0.0);
  m.sources_.assign(m.rows_ * m.cols_, "0");
  m.entries_.assign(m.rows_ * m.cols_, z);
  for (int r = 0; r < a.rows_; ++r)
    for (int c = 0; c < a.cols_; ++c) {
      m.sources_[r * m.cols_ + c] = a.sources_[r * a.cols_ + c];
      m.entries_[r * m.cols_ + c] = a.entries_[r * a.cols_ + c];
    }
  for (int r = 0; r < b.rows_; ++r)
    for (int c = 0; c < b.cols_; ++c) {
      int idx = (a.rows_ + r) * m.cols_ + a.cols_ + c;
      m.sources_[idx] = b.sources_[r * b.cols_ + c];
      m.entries_[idx] = b.entries_[r * b.cols_ + c];
    }
  return m;
}

Mat MatrixExpr::operator()(double t) const {
  Mat m(rows_, cols_);
  const double slot[1] = {t};
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) m(r, c) = entries_[r * cols_ + c].eval(slot);
  return m;
}

// ---------------------------------------------------------- NonlinearTerm

NonlinearTerm::NonlinearTerm(char prefix, int dim_in, std::vector<std::string> sources,
                             const std::map<std::string, double>& constants, double r, double mu,
                             double l)
    : growth_r(r), offset_mu(mu), lipschitz_l(l), prefix_(prefix), dim_in_(dim_in),
      sources_(std::move(sources)) {
  std::vector<std::string> slots{"t"};
  for (int i = 1; i <= dim_in; ++i) slots.push_back(std::string(1, prefix) + std::to_string(i));
  for (int i = 1; i <= dim_in; ++i) slots.push_back("w" + std::to_string(i));
  zero_ = true;
  for (const auto& s : sources_) {
    comps_.push_back(expr::compile(expr::parse(s), slots, constants));
    if (!(comps_.back().is_constant() && comps_.back().eval({}) == 0.0)) zero_ = false;
  }
}

NonlinearTerm NonlinearTerm::zero(char prefix, int dim_in, int dim_out) {
  return NonlinearTerm(prefix, dim_in, std::vector<std::string>(dim_out, "0"), {}, 0, 0, 0);
}

void NonlinearTerm::eval(double t, const Vec& z, const Vec& w, double* out) const {
  const int m = dim_out();
  if (zero_) {
    std::fill(out, out + m, 0.0);
    return;
  }
  double buf[64];
  std::vector<double> big;
  double* s = buf;
  if (1 + 2 * dim_in_ > 64) {
    big.resize(1 + 2 * dim_in_);
    s = big.data();
  }
  s[0] = t;
  for (int i = 0; i < dim_in_; ++i) {
    s[1 + i] = z[i];
    s[1 + dim_in_ + i] = w[i];
  }
  std::span<const double> sp(s, 1 + 2 * dim_in_);
  for (int i = 0; i < m; ++i) out[i] = comps_[i].eval(sp);
}

Vec NonlinearTerm::operator()(double t, const Vec& z, const Vec& w) const {
  Vec out(dim_out());
  eval(t, z, w, out.data());
  return out;
}

// ---------------------------------------------------------------- others

void DichotomySpec::validate(int n) const {
  if (P.rows() != n || P.cols() != n)
    throw ConfigError("/dichotomy/P", "", "/dichotomy/P: expected " + std::to_string(n) + "x" +
                                              std::to_string(n) + " projection");
  if ((P * P - P).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("/dichotomy/P", "frakD", "projection P is not idempotent");
  if (!(K >= 1.0)) throw ConfigError("/dichotomy/K", "frakD", "dichotomy constant K must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("/dichotomy/alpha", "frakD", "alpha must be positive");
}

void NumericsConfig::validate() const {
  auto pos = [](double v, const char* k) {
    if (!(v > 0)) throw ConfigError(std::string("/numerics/") + k, "", std::string(k) + " must be positive");
  };
  pos(ode_step, "ode_step");
  pos(fp_tol, "fp_tol");
  pos(picard_tol, "picard_tol");
  pos(tail_tol, "tail_tol");
  pos(crossing_tol, "crossing_tol");
  if (max_iters < 1) throw ConfigError("/numerics/max_iters", "", "max_iters must be >= 1");
}

const TimeGrid& Config::grid() const {
  return std::visit([](const auto& s) -> const TimeGrid& { return s.grid; }, system);
}

int Config::dim() const {
  if (auto d = std::get_if<DepcagSystem>(&system)) return d->dim();
  const auto& b = std::get<BlockSystem>(system);
  return b.n1() + b.n2();
}

LinearDepcag linear_part(const DepcagSystem& s) {
  return {s.grid, s.dim(), [m = s.M](double t) { return m(t); },
          [m = s.M0](double t) { return m(t); }};
}

LinearDepcag x_block(const BlockSystem& s) {
  return {s.grid, s.n1(), [m = s.A](double t) { return m(t); },
          [m = s.A0](double t) { return m(t); }};
}

LinearDepcag y_block(const BlockSystem& s) {
  return {s.grid, s.n2(), [m = s.B](double t) { return m(t); },
          [m = s.B0](double t) { return m(t); }};
}

LinearDepcag full_linear(const BlockSystem& s) {
  return {s.grid, s.n1() + s.n2(), [m = MatrixExpr::block_diag(s.A, s.B)](double t) { return m(t); },
          [m = MatrixExpr::block_diag(s.A0, s.B0)](double t) { return m(t); }};
}

double sampled_sup_norm(const MatrixFn& m, const TimeGrid& g) {
  double sup = 0.0;
  for (double t : sample_times(g)) sup = std::max(sup, norm(m(t)));
  return sup;
}

// ------------------------------------------------------------ spot checks

namespace {

struct Sampler {
  std::mt19937_64 rng;
  const TimeGrid& g;
  Sampler(unsigned seed, const TimeGrid& grid) : rng(seed), g(grid) {}
  double time() { return std::uniform_real_distribution<double>(g.t_min(), g.t_max())(rng); }
  Vec state(int n, int k) {
    static constexpr double radii[] = {0.01, 1.0, 10.0};
    double r = radii[k % 3];
    Vec v(n);
    std::uniform_real_distribution<double> u(-r, r);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v;
  }
};

constexpr int kSpotSamples = 600;

bool exceeds(double lhs, double rhs) { return lhs > rhs + 1e-12 * (1.0 + std::fabs(rhs)); }

void check_term(const NonlinearTerm& h, const TimeGrid& g, unsigned seed, double r, double mu,
                const char* bound_cond, const char* lip_cond, const std::string& name) {
  if (h.is_zero()) return;
  Sampler s(seed, g);
  const int n = h.dim_in();
  for (int k = 0; k < kSpotSamples; ++k) {
    double t = s.time();
    Vec z = s.state(n, k), w = s.state(n, k + 1);
    Vec v = h(t, z, w);
    if (!v.allFinite())
      throw ConfigError("/system/" + name, bound_cond, std::string(bound_cond) + " violated: " + name +
                                                           " not finite at t = " + fmt(t));
    double bound = r * (norm(z) + norm(w)) + mu;
    if (exceeds(norm(v), bound))
      throw ConfigError("/system/" + name, bound_cond,
                        std::string(bound_cond) + " violated: |" + name + "| = " + fmt(norm(v)) +
                            " exceeds declared bound " + fmt(bound) + " at t = " + fmt(t));
    static constexpr double scales[] = {1e-3, 0.1, 2.0};
    Vec dz = s.state(n, 1) * scales[k % 3], dw = s.state(n, 1) * scales[(k + 1) % 3];
    Vec v2 = h(t, z + dz, w + dw);
    double lip = h.lipschitz_l * (norm(dz) + norm(dw));
    if (exceeds(norm(Vec(v2 - v)), lip))
      throw ConfigError("/system/" + name, lip_cond,
                        std::string(lip_cond) + " violated: Lipschitz estimate for " + name +
                            " fails (difference " + fmt(norm(Vec(v2 - v))) + " > " + fmt(lip) + ")");
  }
}

}  // namespace

void spot_check(const DepcagSystem& s, unsigned seed) {
  if (!s.h) return;
  check_term(*s.h, s.grid, seed, s.h->growth_r, s.h->offset_mu, "B2", "B2", "h");
}

void spot_check(const BlockSystem& s, unsigned seed) {
  auto sup = [&](const MatrixExpr& m) { return sampled_sup_norm([&m](double t) { return m(t); }, s.grid); };
  double a = sup(s.A), b = sup(s.B), a0 = sup(s.A0), b0 = sup(s.B0);
  if (exceeds(std::max(a, b), s.beta))
    throw ConfigError("/system/beta", "frakB1",
                      "frakB1 violated: sup |A|,|B| = " + fmt(std::max(a, b)) + " exceeds beta " + fmt(s.beta));
  if (exceeds(std::max(a0, b0), s.beta0))
    throw ConfigError("/system/beta0", "frakB1",
                      "frakB1 violated: sup |A0|,|B0| = " + fmt(std::max(a0, b0)) + " exceeds beta0 " +
                          fmt(s.beta0));
  auto with_l = [&](NonlinearTerm t) {
    t.lipschitz_l = s.omega;
    return t;
  };
  check_term(with_l(s.f), s.grid, seed, s.lambda, 0.0, "frakB2", "frakB3", "f");
  check_term(with_l(s.g), s.grid, seed + 1, s.lambda, 0.0, "frakB2", "frakB3", "g");
  check_term(with_l(s.phi), s.grid, seed + 2, 0.0, s.delta, "frakB2", "frakB3", "phi");
  check_term(with_l(s.psi), s.grid, seed + 3, 0.0, s.delta, "frakB2", "frakB3", "psi");
}

// ------------------------------------------------------------ config I/O

Config parse_config(const json& j) {
  check_keys(j, "", {"constants", "grid", "system", "dichotomy", "numerics", "gronwall"});
  Config c;
  if (j.contains("constants")) {
    const json& cs = j["constants"];
    if (!cs.is_object()) schema("/constants", "expected object");
    for (auto it = cs.begin(); it != cs.end(); ++it) {
      const std::string& k = it.key();
      bool ident = !k.empty() && (std::isalpha(static_cast<unsigned char>(k[0])) || k[0] == '_') &&
                   std::all_of(k.begin(), k.end(), [](char ch) {
                     return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
                   });
      bool reserved = k == "t" || k == "pi" || k == "e" ||
                      (k.size() > 1 && std::string("zwxy").find(k[0]) != std::string::npos &&
                       std::all_of(k.begin() + 1, k.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }));
      if (!ident || reserved) schema("/constants/" + k, "invalid or reserved constant name");
      c.constants[k] = number(it.value(), "/constants/" + k);
    }
  }
  if (!j.contains("grid")) schema("/grid", "missing");
  TimeGrid grid = parse_grid(j["grid"], "/grid");
  grid.validate();

  if (!j.contains("system")) schema("/system", "missing");
  const json& sj = j["system"];
  if (!sj.is_object() || !sj.contains("kind") || !sj["kind"].is_string())
    schema("/system/kind", "expected \"depcag\" or \"block\"");
  const std::string kind = sj["kind"].get<std::string>();
  int n = 0;
  if (kind == "depcag") {
    check_keys(sj, "/system", {"kind", "M", "M0", "h"});
    if (!sj.contains("M")) schema("/system/M", "missing");
    n = matrix_dim(sj["M"], "/system/M");
    DepcagSystem d;
    d.grid = grid;
    d.M = parse_matrix(sj["M"], "/system/M", n, c.constants);
    d.M0 = sj.contains("M0") ? parse_matrix(sj["M0"], "/system/M0", n, c.constants)
                             : MatrixExpr::zero(n, n);
    check_finite(d.M, grid, "/system/M");
    check_finite(d.M0, grid, "/system/M0");
    if (sj.contains("h")) {
      const json& hj = sj["h"];
      check_keys(hj, "/system/h", {"expr", "r", "mu", "l"});
      if (!hj.contains("expr")) schema("/system/h/expr", "missing");
      double r = number_or(hj, "r", "/system/h", 0.0), mu = number_or(hj, "mu", "/system/h", 0.0),
             l = number_or(hj, "l", "/system/h", 0.0);
      if (r < 0 || mu < 0 || l < 0) schema("/system/h", "bound constants must be non-negative");
      d.h = make_term('z', n, term_sources(hj["expr"], "/system/h/expr", n), c.constants, r, mu, l,
                      "/system/h/expr");
    }
    spot_check(d);
    c.system = std::move(d);
  } else if (kind == "block") {
    check_keys(sj, "/system", {"kind", "A", "A0", "B", "B0", "f", "g", "phi", "psi", "lambda",
                               "delta", "omega", "beta", "beta0"});
    for (const char* k : {"A", "B"})
      if (!sj.contains(k)) schema(std::string("/system/") + k, "missing");
    BlockSystem b;
    b.grid = grid;
    int n1 = matrix_dim(sj["A"], "/system/A"), n2 = matrix_dim(sj["B"], "/system/B");
    b.A = parse_matrix(sj["A"], "/system/A", n1, c.constants);
    b.B = parse_matrix(sj["B"], "/system/B", n2, c.constants);
    b.A0 = sj.contains("A0") ? parse_matrix(sj["A0"], "/system/A0", n1, c.constants) : MatrixExpr::zero(n1, n1);
    b.B0 = sj.contains("B0") ? parse_matrix(sj["B0"], "/system/B0", n2, c.constants) : MatrixExpr::zero(n2, n2);
    for (auto [m, p] : {std::pair{&b.A, "/system/A"}, {&b.A0, "/system/A0"}, {&b.B, "/system/B"},
                        {&b.B0, "/system/B0"}})
      check_finite(*m, grid, p);
    b.lambda = number_or(sj, "lambda", "/system", 0.0);
    b.delta = number_or(sj, "delta", "/system", 0.0);
    b.omega = number_or(sj, "omega", "/system", 0.0);
    if (!sj.contains("beta")) schema("/system/beta", "missing");
    if (!sj.contains("beta0")) schema("/system/beta0", "missing");
    b.beta = number(sj["beta"], "/system/beta");
    b.beta0 = number(sj["beta0"], "/system/beta0");
    for (double v : {b.lambda, b.delta, b.omega, b.beta, b.beta0})
      if (v < 0) schema("/system", "bound constants must be non-negative");
    auto term = [&](const char* key, char prefix, int dim, int out, double r, double mu) {
      std::string p = std::string("/system/") + key;
      if (!sj.contains(key)) {
        NonlinearTerm z = NonlinearTerm::zero(prefix, dim, out);
        z.growth_r = r;
        z.offset_mu = mu;
        z.lipschitz_l = b.omega;
        return z;
      }
      return make_term(prefix, dim, term_sources(sj[key], p, out), c.constants, r, mu, b.omega, p);
    };
    b.f = term("f", 'x', n1, n1, b.lambda, 0.0);
    b.g = term("g", 'x', n1, n2, b.lambda, 0.0);
    b.phi = term("phi", 'y', n2, n1, 0.0, b.delta);
    b.psi = term("psi", 'y', n2, n2, 0.0, b.delta);
    spot_check(b);
    n = n1 + n2;
    c.system = std::move(b);
  } else {
    schema("/system/kind", "expected \"depcag\" or \"block\"");
  }

  if (j.contains("dichotomy")) {
    const json& dj = j["dichotomy"];
    check_keys(dj, "/dichotomy", {"P", "K", "alpha"});
    c.dichotomy.K = number_or(dj, "K", "/dichotomy", 1.0);
    c.dichotomy.alpha = number_or(dj, "alpha", "/dichotomy", 1.0);
    if (dj.contains("P")) c.dichotomy.P = parse_numeric_matrix(dj["P"], "/dichotomy/P");
  }
  if (c.dichotomy.P.size() == 0) {
    c.dichotomy.P = Mat::Identity(n, n);
    if (auto b = std::get_if<BlockSystem>(&c.system))
      c.dichotomy.P.bottomRightCorner(b->n2(), b->n2()).setZero();
  }
  c.dichotomy.validate(n);

  if (j.contains("numerics")) {
    const json& nj = j["numerics"];
    check_keys(nj, "/numerics",
               {"ode_step", "fp_tol", "picard_tol", "tail_tol", "crossing_tol", "max_iters"});
    NumericsConfig& nc = c.numerics;
    nc.ode_step = number_or(nj, "ode_step", "/numerics", nc.ode_step);
    nc.fp_tol = number_or(nj, "fp_tol", "/numerics", nc.fp_tol);
    nc.picard_tol = number_or(nj, "picard_tol", "/numerics", nc.picard_tol);
    nc.tail_tol = number_or(nj, "tail_tol", "/numerics", nc.tail_tol);
    nc.crossing_tol = number_or(nj, "crossing_tol", "/numerics", nc.crossing_tol);
    if (nj.contains("max_iters")) {
      if (!nj["max_iters"].is_number_integer()) schema("/numerics/max_iters", "expected integer");
      nc.max_iters = nj["max_iters"].get<int>();
    }
  }
  c.numerics.validate();

  if (j.contains("gronwall")) {
    check_keys(j["gronwall"], "/gronwall", {"eta"});
    if (!j["gronwall"].contains("eta")) schema("/gronwall/eta", "missing");
    std::string eta = entry_source(j["gronwall"]["eta"], "/gronwall/eta");
    try {
      expr::compile(expr::parse(eta), {"t"}, c.constants);
    } catch (const Error& e) {
      schema("/gronwall/eta", e.what());
    }
    c.gronwall_eta = eta;
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "", "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const Config& c) {
  json j;
  if (!c.constants.empty()) j["constants"] = c.constants;
  const TimeGrid& g = c.grid();
  j["grid"] = {{"knots", g.knots}, {"anchors", g.anchors}, {"theta", g.theta}};
  if (auto d = std::get_if<DepcagSystem>(&c.system)) {
    json s = {{"kind", "depcag"}, {"M", matrix_json(d->M)}, {"M0", matrix_json(d->M0)}};
    if (d->h)
      s["h"] = {{"expr", d->h->sources()}, {"r", d->h->growth_r}, {"mu", d->h->offset_mu},
                {"l", d->h->lipschitz_l}};
    j["system"] = s;
  } else {
    const auto& b = std::get<BlockSystem>(c.system);
    j["system"] = {{"kind", "block"},     {"A", matrix_json(b.A)},   {"A0", matrix_json(b.A0)},
                   {"B", matrix_json(b.B)}, {"B0", matrix_json(b.B0)}, {"f", b.f.sources()},
                   {"g", b.g.sources()},  {"phi", b.phi.sources()}, {"psi", b.psi.sources()},
                   {"lambda", b.lambda},  {"delta", b.delta},       {"omega", b.omega},
                   {"beta", b.beta},      {"beta0", b.beta0}};
  }
  j["dichotomy"] = {{"P", numeric_matrix_json(c.dichotomy.P)},
                    {"K", c.dichotomy.K},
                    {"alpha", c.dichotomy.alpha}};
  const NumericsConfig& n = c.numerics;
  j["numerics"] = {{"ode_step", n.ode_step},         {"fp_tol", n.fp_tol},
                   {"picard_tol", n.picard_tol},     {"tail_tol", n.tail_tol},
                   {"crossing_tol", n.crossing_tol}, {"max_iters", n.max_iters}};
  if (c.gronwall_eta) j["gronwall"] = {{"eta", *c.gronwall_eta}};
  return j;
}

}  // namespace depcag
