#include "depcag/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "depcag/quadrature.hpp"
#include "depcag/transition.hpp"

namespace depcag {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate_norm(const MatrixFn& q, double a, double b, double step) {
  if (b <= a) return 0.0;
  std::size_t m = 2 * static_cast<std::size_t>(std::ceil((b - a) / (2.0 * step)));
  m = std::max<std::size_t>(m, 2);
  std::vector<double> f(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    double s = k == m ? b : a + (b - a) * k / m;
    f[k] = norm(q(s));
    if (!std::isfinite(f[k])) throw NumericError("non-finite integrand in growth constants");
  }
  return quad::composite(f.data(), m, (b - a) / m);
}

double integrate_scalar(const expr::Compiled& e, double a, double b, double step) {
  if (b == a) return 0.0;
  std::size_t m = 2 * static_cast<std::size_t>(std::ceil(std::fabs(b - a) / (2.0 * step)));
  m = std::max<std::size_t>(m, 2);
  std::vector<double> f(m + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    double s = k == m ? b : a + (b - a) * k / m;
    const double slot[1] = {s};
    f[k] = e.eval_checked(slot);
  }
  return quad::composite(f.data(), m, (b - a) / m);
}

CheckEntry entry(std::string name, std::string ineq, double lhs, double rhs, bool pass,
                 std::string note = {}) {
  return {std::move(name), std::move(ineq), lhs, rhs, pass, std::move(note)};
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

GrowthConstants growth_constants(const LinearDepcag& sys, double alpha, double ode_step) {
  const TimeGrid& g = sys.grid;
  GrowthConstants gc;
  const int N = g.intervals();
  const double step = std::min(ode_step, 0.01);
  gc.rho = 1.0;
  for (int i = 0; i < N; ++i) {
    const double a = g.knots[i], z = g.anchors[i], b = g.knots[i + 1];
    const double pm = std::exp(integrate_norm(sys.M, a, z, step));
    const double mm = std::exp(integrate_norm(sys.M, z, b, step));
    const double p0 = integrate_norm(sys.M0, a, z, step);
    const double m0 = integrate_norm(sys.M0, z, b, step);
    gc.rho_plus_M.push_back(pm);
    gc.rho_minus_M.push_back(mm);
    gc.rho_plus_M0.push_back(std::exp(p0));
    gc.rho_minus_M0.push_back(std::exp(m0));
    gc.nu_plus = std::max(gc.nu_plus, pm * p0);
    gc.nu_minus = std::max(gc.nu_minus, mm * m0);
    gc.rho = std::max(gc.rho, pm * mm);
  }
  gc.condition_c = gc.nu_plus < 1.0 && gc.nu_minus < 1.0;
  gc.rho0 = gc.nu_plus < 1.0 ? gc.rho * gc.rho * (1.0 + gc.nu_minus) / (1.0 - gc.nu_plus) : kInf;
  gc.rho_star = gc.rho * std::exp(alpha * g.theta);
  gc.rho_tilde = std::max(gc.rho * gc.rho0, gc.rho_star);
  return gc;
}

// ------------------------------------------------------------- reports

bool HypothesisReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass; });
}

const CheckEntry* HypothesisReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string HypothesisReport::first_failure() const {
  for (const auto& e : entries)
    if (!e.pass) return e.name;
  return {};
}

void HypothesisReport::merge(const HypothesisReport& o) {
  for (const auto& e : o.entries) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& x) { return x.name == e.name; });
    if (it == entries.end()) entries.push_back(e);
    else *it = e;
  }
  for (const auto& [k, v] : o.derived) derived[k] = v;
  notes.insert(notes.end(), o.notes.begin(), o.notes.end());
}

json HypothesisReport::to_json() const {
  json checks = json::object();
  for (const auto& e : entries) {
    json j = {{"inequality", e.inequality}, {"lhs", num(e.lhs)}, {"rhs", num(e.rhs)},
              {"pass", e.pass}};
    if (!e.note.empty()) j["note"] = e.note;
    checks[e.name] = j;
  }
  json d = json::object();
  for (const auto& [k, v] : derived) d[k] = num(v);
  return {{"checks", checks}, {"derived", d}, {"notes", notes}, {"all_pass", all_pass()}};
}

// ---------------------------------------------------------- arithmetic

double f_factor(double beta, double l, double theta) {
  const double x = (beta + l) * theta;
  if (std::fabs(x) < 1e-12) return 1.0;
  return std::expm1(x) / x;
}

double upsilon(double beta, double beta0, double l, double theta) {
  return f_factor(beta, l, theta) * (beta0 + l) * theta;
}

HypothesisReport check_theorem1(const GrowthConstants& gc, const DichotomySpec& d, double r,
                                double mu, double l, double theta) {
  HypothesisReport rep;
  const double K = d.K, a = d.alpha;
  const double e10a = 8.0 * K * l * gc.rho_star / a;
  const double e10b = 4.0 * K * r * gc.rho_star / a;
  const double denom = a - 4.0 * r * K * gc.rho_tilde;
  rep.add(entry("eq10a", "8 K l rho* / alpha <= 1", e10a, 1.0, e10a <= 1.0));
  rep.add(entry("eq10b", "4 K r rho* / alpha <= 1", e10b, 1.0, e10b <= 1.0));
  rep.add(entry("sigma_denominator", "alpha - 4 r K rho~ > 0", denom, 0.0, denom > 0.0));
  const double sigma = denom > 0 ? 2.0 * K * mu * gc.rho_tilde / denom : kInf;
  rep.derived["sigma"] = sigma;
  rep.derived["rho"] = gc.rho;
  rep.derived["rho0"] = gc.rho0;
  rep.derived["rho_star"] = gc.rho_star;
  rep.derived["rho_tilde"] = gc.rho_tilde;
  rep.derived["nu_plus"] = gc.nu_plus;
  rep.derived["nu_minus"] = gc.nu_minus;
  rep.derived["theta"] = theta;
  rep.derived["r"] = r;
  rep.derived["mu"] = mu;
  rep.derived["l"] = l;
  return rep;
}

HypothesisReport check_theorem1(const DepcagSystem& sys, const DichotomySpec& d,
                                const NumericsConfig& num) {
  const LinearDepcag lin = linear_part(sys);
  const GrowthConstants gc = growth_constants(lin, d.alpha, num.ode_step);
  double r = 0, mu = 0, l = 0;
  if (sys.h) {
    r = sys.h->growth_r;
    mu = sys.h->offset_mu;
    l = sys.h->lipschitz_l;
  }
  HypothesisReport rep = check_theorem1(gc, d, r, mu, l, sys.grid.theta);
  rep.entries.insert(rep.entries.begin(),
                     entry("C", "nu+ < 1 and nu- < 1", std::max(gc.nu_plus, gc.nu_minus), 1.0,
                           gc.condition_c));
  const double beta = sampled_sup_norm(lin.M, sys.grid), beta0 = sampled_sup_norm(lin.M0, sys.grid);
  rep.derived["upsilon"] = upsilon(beta, beta0, l, sys.grid.theta);
  return rep;
}

HypothesisReport check_theorem2(const BlockSystem& sys, const DichotomySpec& d,
                                const NumericsConfig& num) {
  HypothesisReport rep;
  const double K = d.K, a = d.alpha, theta = sys.grid.theta;
  GrowthConstants ga = growth_constants(x_block(sys), a, num.ode_step);
  GrowthConstants gb = growth_constants(y_block(sys), a, num.ode_step);
  GrowthConstants gw = growth_constants(full_linear(sys), a, num.ode_step);
  // nu+- are shared by both blocks
  const double nup = std::max(ga.nu_plus, gb.nu_plus), num_ = std::max(ga.nu_minus, gb.nu_minus);
  auto refit = [&](GrowthConstants& g) {
    g.nu_plus = nup;
    g.nu_minus = num_;
    g.condition_c = nup < 1 && num_ < 1;
    g.rho0 = nup < 1 ? g.rho * g.rho * (1 + num_) / (1 - nup) : kInf;
    g.rho_tilde = std::max(g.rho * g.rho0, g.rho_star);
  };
  refit(ga);
  refit(gb);
  const double rt = std::max(ga.rho_tilde, gb.rho_tilde);
  const double w = sys.omega, lam = sys.lambda, l = sys.omega;

  rep.add(entry("frakC", "nu+ < 1 and nu- < 1 for both blocks", std::max(nup, num_), 1.0,
                nup < 1 && num_ < 1));
  const double e11a = 8 * K * ga.rho_tilde * w / a, e11b = 8 * K * gb.rho_tilde * w / a;
  rep.add(entry("eq11", "8 K rho~(A) omega / alpha < 1 and 8 K rho~(B) omega / alpha < 1",
                std::max(e11a, e11b), 1.0, e11a < 1 && e11b < 1));
  const double e12a = 16 * K * ga.rho_tilde * lam / a, e12b = 16 * K * gb.rho_tilde * lam / a;
  rep.add(entry("eq12", "16 K rho~(A) lambda / alpha < 1 and 16 K rho~(B) lambda / alpha < 1",
                std::max(e12a, e12b), 1.0, e12a < 1 && e12b < 1));
  const double alpha0 = a - 2 * w * ga.rho_tilde * std::exp(a * theta);
  rep.add(entry("eq13", "alpha0 = alpha - 2 omega rho~(A) e^{alpha theta} > 0", alpha0, 0.0, alpha0 > 0));
  const double F = f_factor(sys.beta, l, theta);
  const double ups = F * (sys.beta0 + l) * theta;
  rep.add(entry("eq14", "F(l,theta) (beta0 + l) theta = upsilon < 1", ups, 1.0, ups < 1));

  const double eta1 = sys.beta + l, eta2 = sys.beta0 + l;
  rep.derived["rho_tilde_A"] = ga.rho_tilde;
  rep.derived["rho_tilde_B"] = gb.rho_tilde;
  rep.derived["rho_tilde_W"] = gw.rho_tilde;
  rep.derived["rho_star_W"] = gw.rho_star;
  rep.derived["rho_A"] = ga.rho;
  rep.derived["rho_B"] = gb.rho;
  rep.derived["rho0_A"] = ga.rho0;
  rep.derived["rho0_B"] = gb.rho0;
  rep.derived["rho_tilde"] = rt;
  rep.derived["nu_plus"] = nup;
  rep.derived["nu_minus"] = num_;
  rep.derived["alpha0"] = alpha0;
  rep.derived["F_l_theta"] = F;
  rep.derived["upsilon"] = ups;
  rep.derived["eta1"] = eta1;
  rep.derived["eta2"] = eta2;
  rep.derived["p_l"] = ups < 1 ? eta1 + eta2 * std::exp(eta1 * theta) / (1 - ups) : kInf;
  rep.derived["theta_bar"] = 2 * w * ga.rho_tilde * std::exp(a * theta) * theta;
  // shifted systems: growth 2 lambda, offset 4 delta, Lipschitz 2 omega on W = diag(A, B)
  const double denom = a - 4 * (2 * lam) * K * gw.rho_tilde;
  rep.derived["sigma_bar"] = denom > 0 ? 2 * K * (4 * sys.delta) * gw.rho_tilde / denom : kInf;
  rep.derived["shifted_eq10a"] = 8 * K * (2 * w) * gw.rho_star / a;
  rep.derived["shifted_eq10b"] = 4 * K * (2 * lam) * gw.rho_star / a;
  rep.notes.push_back("continuity constants read the scalar bounds M, M0 as beta, beta0");
  return rep;
}

// ----------------------------------------------------------- dichotomy

json DichotomyReport::to_json() const {
  return {{"pass", pass},           {"samples", samples},       {"failures", failures},
          {"worst_ratio", num(worst_ratio)}, {"fitted_K", num(fitted_K)}, {"fitted_alpha", num(fitted_alpha)},
          {"note", note}};
}

namespace {

struct Fit {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  void add(double x, double y) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  void finish(DichotomyReport& r) const {
    const double den = n * sxx - sx * sx;
    if (n < 2 || std::fabs(den) < 1e-300) return;
    const double slope = (n * sxy - sx * sy) / den;
    const double icpt = (sy - slope * sx) / n;
    r.fitted_alpha = -slope;
    r.fitted_K = std::exp(icpt);
  }
};

constexpr double kSlack = 1e-8;

template <class Eval>
DichotomyReport sample_pairs(const TimeGrid& g, int samples, unsigned seed, Eval&& eval) {
  DichotomyReport rep;
  const int m = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(samples)))));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = g.t_min(), w = (g.t_max() - g.t_min()) / m;
  Fit fit;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) {
      const double t = a + (i + u(rng)) * w, s = a + (k + u(rng)) * w;
      auto [val, bound] = eval(t, s);
      rep.samples++;
      const double ratio = bound > 0 ? val / bound : (val > 0 ? kInf : 0.0);
      rep.worst_ratio = std::max(rep.worst_ratio, ratio);
      if (ratio > 1.0 + kSlack) rep.failures++;
      if (val > 1e-300) fit.add(std::fabs(t - s), std::log(val));
    }
  fit.finish(rep);
  rep.pass = rep.failures == 0;
  rep.note = "sampling evidence over the finite window, not a proof; relative slack 1e-8";
  return rep;
}

}  // namespace

DichotomyReport check_dichotomy(const TransitionOperator& op, const DichotomySpec& d, int samples,
                                unsigned seed) {
  return sample_pairs(op.grid(), samples, seed, [&](double t, double s) {
    return std::pair{norm(op.z_split(t, s, d.P)), d.K * std::exp(-d.alpha * std::fabs(t - s))};
  });
}

DichotomyReport check_block_dichotomy(const TransitionOperator& x_op, const TransitionOperator& y_op,
                                      double K, double alpha, int samples, unsigned seed) {
  return sample_pairs(x_op.grid(), samples, seed, [&](double t, double s) {
    if (t >= s) return std::pair{norm(x_op.transition_z(t, s)), std::exp(-alpha * (t - s))};
    return std::pair{norm(y_op.transition_z(t, s)), K * std::exp(alpha * (t - s))};
  });
}

// ------------------------------------------------------------ Gronwall

GronwallReport gronwall_premise(const TimeGrid& grid, const std::string& eta,
                                const std::map<std::string, double>& constants) {
  GronwallReport rep;
  expr::Compiled e = expr::compile(expr::parse(eta), {"t"}, constants);
  for (int i = 0; i < grid.intervals(); ++i)
    rep.theta_bar =
        std::max(rep.theta_bar, 2.0 * integrate_scalar(e, grid.knots[i], grid.knots[i + 1], 1e-3));
  rep.premise = rep.theta_bar < 1.0;
  rep.theta_tilde = rep.premise ? (2.0 - rep.theta_bar) / (1.0 - rep.theta_bar) : kInf;
  if (!rep.premise) rep.note = "premise failed: theta_bar >= 1";
  return rep;
}

GronwallReport gronwall_check(const Trajectory& traj, const TimeGrid& grid, const std::string& eta,
                              const std::map<std::string, double>& constants) {
  GronwallReport rep = gronwall_premise(grid, eta, constants);
  if (!rep.premise) {
    rep.conclusions_hold = false;
    return rep;
  }
  expr::Compiled e = expr::compile(expr::parse(eta), {"t"}, constants);
  auto eta_at = [&](double t) {
    const double slot[1] = {t};
    return e.eval_checked(slot);
  };
  auto rho = [&](double t) { return norm(traj.at(t)); };
  auto rho_gamma = [&](double t) {
    const int r = grid.interval_of(t);
    auto it = traj.anchor_values.find(r);
    if (it != traj.anchor_values.end()) return norm(it->second);
    return rho(grid.anchors[r]);
  };
  // fine grid with breaks at knots: cumulative int eta and int eta (rho + rho o gamma)
  const double a = traj.t_begin(), b = traj.t_end();
  std::vector<double> ts{a};
  for (double k : grid.knots)
    if (k > a && k < b) ts.push_back(k);
  ts.push_back(b);
  std::vector<double> nodes, ieta, irho;
  double acc_e = 0, acc_r = 0;
  for (std::size_t p = 0; p + 1 < ts.size(); ++p) {
    const double lo = ts[p], hi = ts[p + 1];
    std::size_t m = 2 * static_cast<std::size_t>(std::ceil((hi - lo) / 0.02));
    m = std::max<std::size_t>(m, 2);
    std::vector<double> fe(m + 1), fr(m + 1), ce(m + 1), cr(m + 1), s(m + 1);
    for (std::size_t k = 0; k <= m; ++k) {
      s[k] = k == m ? hi : lo + (hi - lo) * k / m;
      // gamma is right-continuous; at the right end use the interval's own anchor
      const double probe = k == m ? std::nextafter(hi, lo) : s[k];
      fe[k] = eta_at(s[k]);
      fr[k] = fe[k] * (rho(s[k]) + rho_gamma(probe));
    }
    quad::cumulative(fe.data(), m, (hi - lo) / m, ce.data());
    quad::cumulative(fr.data(), m, (hi - lo) / m, cr.data());
    for (std::size_t k = (p == 0 ? 0 : 1); k <= m; ++k) {
      nodes.push_back(s[k]);
      ieta.push_back(acc_e + ce[k]);
      irho.push_back(acc_r + cr[k]);
    }
    acc_e += ce[m];
    acc_r += cr[m];
  }
  // For each tau and each side the premise must hold at every sampled t on that side.
  // The frozen-argument conclusion is tested only where gamma(t) lies on the same side
  // of tau as t: with eta = 0 and a decaying rho it fails whenever gamma(t) < tau < t.
  const std::size_t stride = std::max<std::size_t>(1, nodes.size() / 80);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < nodes.size(); i += stride) idx.push_back(i);
  if (idx.back() != nodes.size() - 1) idx.push_back(nodes.size() - 1);
  for (std::size_t i : idx) {
    const double tau = nodes[i], rtau = rho(tau);
    for (int side : {1, -1}) {
      bool premise = true;
      for (std::size_t k : idx) {
        if ((nodes[k] - tau) * side < 0) continue;
        if (rho(nodes[k]) > (rtau + std::fabs(irho[k] - irho[i])) * (1 + 1e-12) + 1e-15) {
          premise = false;
          break;
        }
      }
      if (!premise) continue;
      for (std::size_t k : idx) {
        const double t = nodes[k];
        if ((t - tau) * side < 0) continue;
        const double grow = std::exp(rep.theta_tilde * std::fabs(ieta[k] - ieta[i]));
        const double c1 = rtau * grow, c2 = c1 / (1.0 - rep.theta_bar);
        const double rt = rho(t);
        double ratio = c1 > 0 ? rt / c1 : (rt > 0 ? kInf : 0.0);
        const double gt = grid.gamma(t);
        if ((gt - tau) * side >= 0) {
          const double g_t = rho_gamma(t);
          ratio = std::max(ratio, c2 > 0 ? g_t / c2 : (g_t > 0 ? kInf : 0.0));
        }
        rep.pairs_checked++;
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        if (ratio > 1.0 + 1e-9) rep.conclusions_hold = false;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------- full report

HypothesisReport verify_config(const Config& c, unsigned seed) {
  HypothesisReport rep;
  const TimeGrid& g = c.grid();
  double maxlen = 0;
  for (int i = 0; i < g.intervals(); ++i) maxlen = std::max(maxlen, g.length(i));
  rep.add(entry("A1", "t_i < t_{i+1} and t_i <= zeta_i <= t_{i+1}", 0, 0, true, "validated at load"));
  rep.add(entry("A2", "t_i -> +-inf", g.t_min(), g.t_max(), true, "finite working window"));
  rep.add(entry("A3", "gamma(t) = zeta_i on [t_i, t_{i+1})", 0, 0, true, "by construction"));
  rep.add(entry("A4", "t_{i+1} - t_i <= theta", maxlen, g.theta, maxlen <= g.theta * (1 + 1e-12)));
  const NumericsConfig& nc = c.numerics;
  if (const auto* d = std::get_if<DepcagSystem>(&c.system)) {
    rep.add(entry("B1", "M, M0 finite on the sample grid", 0, 0, true, "validated at load"));
    rep.add(entry("B2", "|h| <= r(|z|+|w|) + mu, Lipschitz l", 0, 0, true, "spot-checked at load"));
    rep.merge(check_theorem1(*d, c.dichotomy, nc));
    try {
      TransitionOperator op(linear_part(*d), nc);
      DichotomyReport dr = check_dichotomy(op, c.dichotomy, 400, seed);
      rep.add(entry("dichotomy", "|Z_P(t,s)| <= K e^{-alpha|t-s|} on sampled pairs", dr.worst_ratio, 1.0,
                    dr.pass, dr.note));
      rep.derived["fitted_K"] = dr.fitted_K;
      rep.derived["fitted_alpha"] = dr.fitted_alpha;
    } catch (const Error& e) {
      rep.add(entry("dichotomy", "|Z_P(t,s)| <= K e^{-alpha|t-s|} on sampled pairs", kInf, 1.0, false, e.what()));
    }
  } else {
    const auto& b = std::get<BlockSystem>(c.system);
    rep.add(entry("frakB1", "sup |A|,|B| <= beta and sup |A0|,|B0| <= beta0", 0, 0, true, "spot-checked at load"));
    rep.add(entry("frakB2", "|f|,|g| <= lambda(|x|+|x_gamma|), |phi|,|psi| <= delta", 0, 0, true,
                  "spot-checked at load"));
    rep.add(entry("frakB3", "f, g, phi, psi Lipschitz with omega", 0, 0, true, "spot-checked at load"));
    HypothesisReport t2 = check_theorem2(b, c.dichotomy, nc);
    try {
      TransitionOperator xo(x_block(b), nc), yo(y_block(b), nc);
      DichotomyReport dr = check_block_dichotomy(xo, yo, c.dichotomy.K, c.dichotomy.alpha, 400, seed);
      rep.add(entry("frakD", "|Z1(t,s)| <= e^{-alpha(t-s)}, |Z2(t,s)| <= K e^{alpha(t-s)}", dr.worst_ratio,
                    1.0, dr.pass, dr.note));
      rep.derived["fitted_K"] = dr.fitted_K;
      rep.derived["fitted_alpha"] = dr.fitted_alpha;
    } catch (const Error& e) {
      rep.add(entry("frakD", "|Z1(t,s)| <= e^{-alpha(t-s)}, |Z2(t,s)| <= K e^{alpha(t-s)}", kInf, 1.0, false,
                    e.what()));
    }
    rep.merge(t2);
  }
  if (c.gronwall_eta) {
    GronwallReport gr = gronwall_premise(g, *c.gronwall_eta, c.constants);
    rep.add(entry("gronwall_premise", "theta_bar = sup 2 int_{I_i} eta < 1", gr.theta_bar, 1.0, gr.premise));
    rep.derived["theta_tilde"] = gr.theta_tilde;
  }
  return rep;
}

}  // namespace depcag
