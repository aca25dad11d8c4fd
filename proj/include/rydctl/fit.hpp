#ifndef RYDCTL_FIT_HPP
#define RYDCTL_FIT_HPP

// Nonlinear least squares for the two-level scattering-rate model and for
// the nine quantum defects of the five-channel MQDT model, plus ingestion
// of measured spectra.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rydctl/constants.hpp"
#include "rydctl/errors.hpp"
#include "rydctl/mqdt.hpp"
#include "rydctl/parallel.hpp"
#include "rydctl/spectrum.hpp"

namespace rydctl::fit {

// ---------------------------------------------------------------------------
// Data

struct SpectrumDataset {
  std::vector<double> delta_ghz;
  std::vector<double> gamma_ls;
  std::vector<double> sigma; // empty when the file has no sigma column
  std::string provenance;

  std::size_t size() const { return delta_ghz.size(); }
  bool has_sigma() const { return !sigma.empty(); }
  double weight_sigma(std::size_t i) const { return has_sigma() ? sigma[i] : 1.0; }

  /// Sorts rows by detuning and rejects repeated detunings.
  void normalize() {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return delta_ghz[a] < delta_ghz[b]; });
    auto permute = [&](std::vector<double> &v) {
      if (v.empty()) return;
      std::vector<double> out(v.size());
      for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
      v.swap(out);
    };
    permute(delta_ghz);
    permute(gamma_ls);
    permute(sigma);
    for (std::size_t i = 1; i < size(); ++i)
      if (delta_ghz[i] == delta_ghz[i - 1])
        throw DuplicateAbscissa("detuning " + std::to_string(delta_ghz[i]) + " GHz appears twice");
  }
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline bool parse_number(const std::string &s, double &out) {
  if (s.empty()) return false;
  char *end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

} // namespace detail

/// Reads `delta_ghz, gamma_ls[, sigma]` rows. Lines starting with '#' and
/// blank lines are skipped; a leading header row naming delta_ghz is allowed.
inline SpectrumDataset parse_spectrum_csv(std::istream &in, const std::string &provenance = "") {
  SpectrumDataset ds;
  ds.provenance = provenance;
  std::string line;
  std::size_t lineno = 0;
  int columns = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = detail::split_fields(t);
    if (!seen_data && !f.empty() && f[0] == "delta_ghz") {
      seen_data = true;
      continue;
    }
    seen_data = true;
    if (f.size() != 2 && f.size() != 3) throw ParseError(lineno, "expected 2 or 3 comma-separated fields");
    if (columns == 0) columns = static_cast<int>(f.size());
    if (static_cast<int>(f.size()) != columns) throw ParseError(lineno, "inconsistent number of columns");
    double v[3] = {0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < f.size(); ++k)
      if (!detail::parse_number(f[k], v[k])) throw ParseError(lineno, "not a number: '" + f[k] + "'");
    if (v[1] < 0.0) throw ParseError(lineno, "gamma_ls must be non-negative");
    if (columns == 3 && !(v[2] > 0.0)) throw ParseError(lineno, "sigma must be positive");
    ds.delta_ghz.push_back(v[0]);
    ds.gamma_ls.push_back(v[1]);
    if (columns == 3) ds.sigma.push_back(v[2]);
  }
  if (ds.size() == 0) throw EmptyDataset("no data rows");
  ds.normalize();
  return ds;
}

inline SpectrumDataset load_spectrum_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse_spectrum_csv(in, path);
}

// ---------------------------------------------------------------------------
// Optimizers

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;
  double gradient_norm = 0.0; // max_j |J_j . r| / (|J_j| |r|)
  int n_iterations = 0;
  bool converged = false;
  bool degenerate_jacobian = false;
  std::vector<double> cost_history; // 0.5 |r|^2 after each accepted step
  std::string message;

  double param(const std::string &name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return params(static_cast<Eigen::Index>(i));
    throw InputError("no parameter named " + name);
  }
};

inline nlohmann::json to_json(const FitResult &r) {
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) params[r.names[i]] = r.params(static_cast<Eigen::Index>(i));
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) row.push_back(r.covariance(i, j));
    cov.push_back(row);
  }
  return {{"parameters", params},
          {"parameter_order", r.names},
          {"covariance", cov},
          {"residual_norm", r.residual_norm},
          {"gradient_norm", r.gradient_norm},
          {"iterations", r.n_iterations},
          {"converged", r.converged},
          {"degenerate_jacobian", r.degenerate_jacobian},
          {"message", r.message}};
}

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;
using ProjectFn = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;

struct LmOptions {
  int max_iterations = 500;
  double jacobian_step = 1e-6;
  double gtol = 1e-6;       // convergence: scaled gradient below this
  double stop_gtol = 1e-12; // early exit once well below it
  double ftol = 1e-15;      // relative cost change counted as a stall
  double lambda0 = 1e-3;
  ProjectFn project;        // optional map applied to every accepted parameter vector
};

/// Central-difference Jacobian; columns are independent model evaluations.
inline Eigen::MatrixXd numerical_jacobian(const ResidualFn &f, const Eigen::VectorXd &p, std::size_t m,
                                          double step) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), p.size());
  parallel_for(static_cast<std::size_t>(p.size()), [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double h = step * std::max(1.0, std::abs(p(jj)));
    Eigen::VectorXd plus = p, minus = p;
    plus(jj) += h;
    minus(jj) -= h;
    jac.col(jj) = (f(plus) - f(minus)) / (2.0 * h);
  });
  return jac;
}

namespace detail {

inline double safe_cost(const ResidualFn &f, const Eigen::VectorXd &p, Eigen::VectorXd &r) {
  try {
    r = f(p);
  } catch (const NumericalError &) {
    return std::numeric_limits<double>::infinity();
  }
  if (!r.allFinite()) return std::numeric_limits<double>::infinity();
  return 0.5 * r.squaredNorm();
}

inline double scaled_gradient(const Eigen::MatrixXd &jac, const Eigen::VectorXd &r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  const Eigen::VectorXd g = jac.transpose() * r;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double cn = jac.col(j).norm();
    if (cn > 0.0) worst = std::max(worst, std::abs(g(j)) / (cn * rn));
  }
  return worst;
}

} // namespace detail

/// Levenberg-Marquardt with Marquardt's diagonal scaling.
inline FitResult levenberg_marquardt(const ResidualFn &f, Eigen::VectorXd p, const LmOptions &opt = {}) {
  if (opt.project) p = opt.project(p);
  FitResult res;
  Eigen::VectorXd r;
  double cost = detail::safe_cost(f, p, r);
  if (!std::isfinite(cost)) throw NumericalError("model cannot be evaluated at the initial parameters");
  const std::size_t m = static_cast<std::size_t>(r.size());
  res.cost_history.push_back(cost);

  double lambda = opt.lambda0;
  Eigen::MatrixXd jac = numerical_jacobian(f, p, m, opt.jacobian_step);
  int stalls = 0;
  bool stalled = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (detail::scaled_gradient(jac, r) <= opt.stop_gtol || cost == 0.0) break;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index j = 0; j < a.rows(); ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-300);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      Eigen::VectorXd trial = p + step;
      if (opt.project) trial = opt.project(trial);
      Eigen::VectorXd r_trial;
      const double c_trial = detail::safe_cost(f, trial, r_trial);
      if (c_trial < cost) {
        const double rel = (cost - c_trial) / std::max(cost, 1e-300);
        stalls = rel < opt.ftol ? stalls + 1 : 0;
        p = trial;
        r = r_trial;
        cost = c_trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      stalled = true; // no descent direction left at machine precision
      break;
    }
    res.cost_history.push_back(cost);
    jac = numerical_jacobian(f, p, m, opt.jacobian_step);
    if (stalls >= 3) {
      stalled = true;
      break;
    }
  }

  res.params = p;
  res.n_iterations = it;
  res.residual_norm = r.norm();
  res.gradient_norm = detail::scaled_gradient(jac, r);
  // a stall means the cost is flat to round-off, which also covers exact-data fits
  // where the residual is pure noise and the gradient cosine is meaningless
  res.converged = res.gradient_norm <= opt.gtol || stalled;
  res.message = res.gradient_norm <= opt.gtol ? "converged"
                : stalled                     ? "converged (cost stationary to round-off)"
                                              : "iteration limit reached";

  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
  cod.setThreshold(1e-12);
  res.degenerate_jacobian = cod.rank() < jtj.rows();
  const double dof = std::max<double>(1.0, static_cast<double>(m) - static_cast<double>(p.size()));
  res.covariance = cod.pseudoInverse() * (r.squaredNorm() / dof);
  return res;
}

struct NelderMeadOptions {
  int max_iterations = 5000;
  double initial_step = 0.05;
  double ftol = 1e-14;
};

/// Downhill simplex on an arbitrary scalar objective; returns the best vertex.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd &)> &cost,
                                   const Eigen::VectorXd &x0, const NelderMeadOptions &opt = {}) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> x(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> fx(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i + 1)](i) += opt.initial_step;
  for (std::size_t i = 0; i < x.size(); ++i) fx[i] = cost(x[i]);

  std::vector<std::size_t> order(x.size());
  for (int it = 0; it < opt.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fx[a] < fx[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::abs(fx[worst] - fx[best]) <= opt.ftol * (std::abs(fx[best]) + 1e-300)) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += x[order[i]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - x[worst]);
    const double fr = cost(xr);
    if (fr < fx[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = cost(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
    } else if (fr < fx[second]) {
      x[worst] = xr;
      fx[worst] = fr;
    } else {
      const Eigen::VectorXd xc = centroid + 0.5 * (x[worst] - centroid);
      const double fc = cost(xc);
      if (fc < fx[worst]) {
        x[worst] = xc;
        fx[worst] = fc;
      } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (i == best) continue;
          x[i] = x[best] + 0.5 * (x[i] - x[best]);
          fx[i] = cost(x[i]);
        }
      }
    }
  }
  const auto it = std::min_element(fx.begin(), fx.end());
  return x[static_cast<std::size_t>(it - fx.begin())];
}

// ---------------------------------------------------------------------------
// Two-level fit: Gamma_LS(delta) = A Gamma / (4 (2 pi (delta - Delta+))^2 + Gamma^2)

struct TwoLevelFitOptions {
  LmOptions lm;
  bool nelder_mead_fallback = false;
};

/// Two-level scattering rate for a detuning from f+ given in GHz.
inline double two_level_rate(double delta_ghz, double gamma, double delta_plus_hz, double amplitude) {
  const double d = 2.0 * constants::pi * (delta_ghz * 1e9 - delta_plus_hz);
  return amplitude * gamma / (4.0 * d * d + gamma * gamma);
}

/// Fits (Gamma, Delta+, A). The amplitude A = Omega_c^2 starts from the
/// peak of the data when not given. Parameters are internally scaled to
/// GHz and to the initial amplitude.
inline FitResult fit_two_level(const SpectrumDataset &data, const spectrum::TwoLevelParams &init,
                               std::optional<double> amplitude_init = std::nullopt,
                               const TwoLevelFitOptions &opt = {}) {
  if (data.size() < 5) throw InputError("two-level fit needs at least 5 points");
  const double ghz = 2.0 * constants::pi * 1e9;
  const double ymax = *std::max_element(data.gamma_ls.begin(), data.gamma_ls.end());
  const double a0 = amplitude_init ? *amplitude_init : std::max(ymax * init.gamma, 1e-300);

  const ResidualFn residual = [&](const Eigen::VectorXd &p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double y = two_level_rate(data.delta_ghz[i], p(0) * ghz, p(1) * 1e9, p(2) * a0);
      r(static_cast<Eigen::Index>(i)) = (y - data.gamma_ls[i]) / data.weight_sigma(i);
    }
    return r;
  };
  Eigen::VectorXd p0(3);
  p0 << init.gamma / ghz, init.delta_plus_hz * 1e-9, 1.0;

  FitResult r = levenberg_marquardt(residual, p0, opt.lm);
  if (!r.converged && opt.nelder_mead_fallback) {
    const Eigen::VectorXd x = nelder_mead([&](const Eigen::VectorXd &p) { return 0.5 * residual(p).squaredNorm(); },
                                          r.params);
    FitResult polished = levenberg_marquardt(residual, x, opt.lm);
    polished.n_iterations += r.n_iterations;
    r = polished;
  }
  const Eigen::Vector3d scale(ghz, 1e9, a0);
  r.params = r.params.cwiseProduct(scale);
  r.covariance = scale.asDiagonal() * r.covariance * scale.asDiagonal();
  r.names = {"gamma", "delta_plus_hz", "amplitude"};
  return r;
}

// ---------------------------------------------------------------------------
// MQDT fit of the quantum-defect matrices against a measured rate spectrum.

inline const std::vector<std::string> &mu_parameter_names() {
  static const std::vector<std::string> names{"mu0_11", "mu0_12", "mu0_22", "mu1_11", "mu1_12",
                                              "mu1_13", "mu1_22", "mu1_23", "mu1_33"};
  return names;
}

inline Eigen::VectorXd mu_to_params(const mqdt::MuMatrix &j0, const mqdt::MuMatrix &j1) {
  Eigen::VectorXd p(9);
  const auto u0 = j0.upper();
  const auto u1 = j1.upper();
  for (int i = 0; i < 3; ++i) p(i) = u0[static_cast<std::size_t>(i)];
  for (int i = 0; i < 6; ++i) p(3 + i) = u1[static_cast<std::size_t>(i)];
  return p;
}

inline mqdt::ChannelModel model_with_params(const mqdt::ChannelModel &base, const Eigen::VectorXd &p) {
  mqdt::ChannelModel m = base;
  m.mu_j0 = mqdt::MuMatrix::from_upper(mqdt::JBlock::J0, {p(0), p(1), p(2)});
  m.mu_j1 = mqdt::MuMatrix::from_upper(mqdt::JBlock::J1, {p(3), p(4), p(5), p(6), p(7), p(8)});
  return m;
}

/// Folds both mu blocks to eigenvalues in (-0.5, 0.5]; K is unchanged.
inline Eigen::VectorXd canonicalize_mu_params(const Eigen::VectorXd &p) {
  const auto m = model_with_params(mqdt::ChannelModel::reference(), p);
  return mu_to_params(m.mu_j0.canonical(), m.mu_j1.canonical());
}

/// Rates (s^-1) of a model on the dataset's detuning grid.
inline std::vector<double> model_rates(const mqdt::ChannelModel &model, const spectrum::FieldConfig &field,
                                       const std::vector<double> &deltas) {
  const spectrum::SpectrumModel sm(model);
  std::vector<double> out(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) out[i] = sm.rate_at_detuning(deltas[i], field);
  return out;
}

struct MuFitOptions {
  LmOptions lm;
  int restarts = 0;            // extra random starts beyond the given one
  double restart_spread = 0.5; // uniform half-width added to the initial entries
  std::uint64_t seed = 0;
  bool nelder_mead_fallback = false;
};

/// Fits the nine upper-triangle mu entries (3 for J=0, 6 for J=1). The
/// model is under-determined by typical data, so a rank-deficient Jacobian
/// is reported but not treated as failure.
inline FitResult fit_mu(const SpectrumDataset &data, const mqdt::ChannelModel &init,
                        const spectrum::FieldConfig &field, const MuFitOptions &opt = {}) {
  if (data.size() < 9) throw InputError("MQDT fit needs at least 9 points");
  const ResidualFn residual = [&](const Eigen::VectorXd &p) {
    const auto rates = model_rates(model_with_params(init, p), field, data.delta_ghz);
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = (rates[i] - data.gamma_ls[i]) / data.weight_sigma(i);
    return r;
  };
  LmOptions lm = opt.lm;
  lm.project = canonicalize_mu_params;

  auto run = [&](const Eigen::VectorXd &start) {
    FitResult r = levenberg_marquardt(residual, start, lm);
    if (!r.converged && opt.nelder_mead_fallback) {
      const Eigen::VectorXd x = nelder_mead(
          [&](const Eigen::VectorXd &p) {
            Eigen::VectorXd rr;
            return detail::safe_cost(residual, p, rr);
          },
          r.params);
      FitResult polished = levenberg_marquardt(residual, x, lm);
      polished.n_iterations += r.n_iterations;
      if (polished.residual_norm <= r.residual_norm) r = polished;
    }
    return r;
  };

  const Eigen::VectorXd p0 = mu_to_params(init.mu_j0, init.mu_j1);
  FitResult best;
  bool have_best = false;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> spread(-opt.restart_spread, opt.restart_spread);
  for (int k = 0; k <= opt.restarts; ++k) {
    Eigen::VectorXd start = p0;
    if (k > 0)
      for (Eigen::Index i = 0; i < start.size(); ++i) start(i) += spread(rng);
    FitResult r;
    try {
      r = run(start);
    } catch (const NumericalError &) {
      continue;
    }
    if (!have_best || r.residual_norm < best.residual_norm) {
      best = std::move(r);
      have_best = true;
    }
  }
  if (!have_best) throw NumericalError("no start point could be evaluated");
  best.names = mu_parameter_names();
  return best;
}

} // namespace rydctl::fit

#endif // RYDCTL_FIT_HPP
