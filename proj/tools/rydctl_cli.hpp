#ifndef RYDCTL_TOOLS_CLI_HPP
#define RYDCTL_TOOLS_CLI_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "rydctl/constants.hpp"
#include "rydctl/dynamics.hpp"
#include "rydctl/error_budget.hpp"
#include "rydctl/errors.hpp"
#include "rydctl/fit.hpp"
#include "rydctl/grid.hpp"
#include "rydctl/mqdt.hpp"
#include "rydctl/plot.hpp"
#include "rydctl/spectrum.hpp"

namespace rydctl::cli {

inline constexpr const char *version = "0.1.0";

inline std::string sha256_hex(const std::string &data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string constants_digest() {
  std::string s;
  for (double v : {constants::speed_of_light, constants::hbar, constants::elementary_charge,
                   constants::bohr_radius, constants::vacuum_permittivity, constants::rydberg_infinity_cm,
                   constants::hartree_cm, constants::atomic_time, constants::atomic_field,
                   constants::mass_yb174_u, constants::electron_mass_u}) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    s += buf;
  }
  return sha256_hex(s);
}

/// Everything a subcommand needs besides its own options.
struct Context {
  std::string name;
  std::filesystem::path out_dir = ".";
  bool svg = false;
  std::vector<std::string> arguments;
  CLI::App *app = nullptr;
  std::ostream *out = &std::cout;
  std::string model_hash;
  std::vector<std::string> outputs;
  nlohmann::json extra = nlohmann::json::object();

  std::filesystem::path path(const std::string &file) const { return out_dir / file; }

  void write(const std::string &file, const std::string &content) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(path(file), std::ios::binary);
    if (!f) throw InputError("cannot write " + path(file).string());
    f << content;
    outputs.push_back(file);
  }

  void write_svg(const std::string &file, const std::vector<plot::Series> &series, const plot::Axes &axes) {
    if (svg) write(file, plot::render_svg(series, axes));
  }

  nlohmann::json options_json() const {
    nlohmann::json cfg = nlohmann::json::object();
    for (const CLI::Option *opt : app->get_options()) {
      const std::string key = opt->get_single_name();
      if (key.empty() || key == "help" || key == "config") continue;
      if (opt->count() > 0) {
        const auto &res = opt->results();
        cfg[key] = res.size() == 1 ? nlohmann::json(res.front()) : nlohmann::json(res);
      } else {
        cfg[key] = opt->get_default_str();
      }
    }
    return cfg;
  }

  void write_provenance() {
    nlohmann::json j;
    j["subcommand"] = name;
    j["arguments"] = arguments;
    j["config"] = options_json();
    j["model_sha256"] = model_hash;
    j["constants_sha256"] = constants_digest();
    j["versions"] = {{"rydctl", version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"boost", BOOST_LIB_VERSION},
                     {"cli11", CLI11_VERSION},
                     {"compiler", __VERSION__}};
    j["outputs"] = outputs;
    if (!extra.empty()) j["results"] = extra;
    std::filesystem::create_directories(out_dir);
    std::ofstream f(path("run.json"), std::ios::binary);
    f << j.dump(2) << "\n";
  }
};

struct ModelSource {
  mqdt::ChannelModel model;
  std::string hash;
  std::string label;
};

inline ModelSource load_model_source(const std::string &path) {
  if (path.empty()) {
    const auto m = mqdt::ChannelModel::reference();
    return {m, sha256_hex(mqdt::to_json(m).dump()), "builtin:reference"};
  }
  const std::string text = read_file(path);
  return {mqdt::load_model(path), sha256_hex(text), path};
}

// ---------------------------------------------------------------------------

struct SpectrumArgs {
  std::string model;
  std::string delta = "-35:10:0.05";
  double ic = 600.0;
  double dipole = 1.46;
  std::optional<double> field_au;
  bool no_lightshift = false;
  double rel_tol = 1e-8;
  double window = 15.0;
};

inline void add_spectrum_options(CLI::App *sub, SpectrumArgs &a) {
  sub->add_option("--model", a.model, "channel model JSON (default: built-in reference)");
  sub->add_option("--delta", a.delta, "detuning grid in GHz, start:stop:step or list");
  sub->add_option("--ic", a.ic, "control intensity, W/cm^2");
  sub->add_option("--dipole", a.dipole, "r-r' dipole, e a0 (sets the field through I_c)");
  sub->add_option("--field-au", a.field_au, "control field in atomic units (overrides --ic)");
  sub->add_option("--rel-tol", a.rel_tol, "light-shift quadrature tolerance");
  sub->add_option("--window", a.window, "light-shift integration half-width in nu");
}

inline int run_spectrum(Context &ctx, const SpectrumArgs &a, bool light_shift) {
  const auto src = load_model_source(a.model);
  ctx.model_hash = src.hash;
  const auto deltas = grid::parse_grid(a.delta);
  const auto field = a.field_au ? spectrum::FieldConfig::from_field_au(*a.field_au)
                                : spectrum::FieldConfig::from_intensity(a.ic, a.dipole);
  spectrum::LightShiftOptions opt;
  opt.rel_tol = a.rel_tol;
  opt.window_half_width = a.window;
  const spectrum::SpectrumModel sm(src.model);
  const auto pts = spectrum::compute_spectrum(sm, field, deltas, light_shift, opt);

  std::string csv;
  csv += "# model=" + src.label + " sha256=" + src.hash + "\n";
  csv += "# field_au=" + num(field.field_au()) + " core_dipole_ea0=" + num(field.core_dipole());
  if (field.intensity()) csv += " ic_w_cm2=" + num(*field.intensity()) + " dipole_ea0=" + num(*field.dipole());
  csv += "\n";
  csv += "delta_ghz,rate_per_s,lightshift_re_mhz,lightshift_im_mhz\n";
  std::size_t peak = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto &p = pts[i];
    csv += num(p.delta_ghz) + "," + num(p.rate_per_s) + "," + num(p.lightshift_re_mhz) + "," +
           num(p.lightshift_im_mhz) + "\n";
    if (p.rate_per_s > pts[peak].rate_per_s) peak = i;
  }
  ctx.write(ctx.name + ".csv", csv);

  if (deltas.size() >= 2) {
    std::vector<plot::Series> series{{"rate (1/s)", {}, {}}};
    if (light_shift) series.push_back({"|Re light shift| (Hz)", {}, {}});
    for (const auto &p : pts) {
      series[0].x.push_back(p.delta_ghz);
      series[0].y.push_back(p.rate_per_s);
      if (light_shift) {
        series[1].x.push_back(p.delta_ghz);
        series[1].y.push_back(std::abs(p.lightshift_re_mhz) * 1e6);
      }
    }
    ctx.write_svg(ctx.name + ".svg", series, {"detuning (GHz)", "rate, shift", "", false, true});
  }
  ctx.extra = {{"rows", pts.size()}, {"peak_delta_ghz", pts[peak].delta_ghz}, {"peak_rate_per_s", pts[peak].rate_per_s}};
  *ctx.out << "rows=" << pts.size() << " peak_delta_ghz=" << num(pts[peak].delta_ghz)
           << " peak_rate_per_s=" << num(pts[peak].rate_per_s) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SimArgs {
  std::string ic = "0,1,2,5,10,20,50,100,200,400,600";
  double delta_ghz = -5.0;
  double omega_r_mhz = 0.7;
  double gamma_ghz = 0.92;
  double dipole = 1.46;
  double pg_target = 0.03;
  std::optional<double> gamma_r;
  double kappa = 0.7;
  bool no_kappa = false;
  double f_g = 0.994;
  double u_int_ghz = 1.0;
};

inline void add_sim_options(CLI::App *sub, SimArgs &a) {
  sub->add_option("--ic", a.ic, "control intensity grid, W/cm^2");
  sub->add_option("--delta-ghz", a.delta_ghz, "control detuning from r-r', GHz");
  sub->add_option("--omega-r-mhz", a.omega_r_mhz, "Rydberg Rabi frequency / 2pi, MHz");
  sub->add_option("--gamma-ghz", a.gamma_ghz, "r' linewidth / 2pi, GHz");
  sub->add_option("--dipole", a.dipole, "r-r' dipole, e a0");
  sub->add_option("--pg-target", a.pg_target, "P_g(pi/Omega_r) at I_c=0 used to calibrate gamma_r");
  sub->add_option("--gamma-r", a.gamma_r, "Rydberg dephasing rate, 1/s (skips calibration)");
  sub->add_option("--kappa", a.kappa, "intensity/linewidth adjustment factor");
  sub->add_flag("--no-kappa", a.no_kappa, "disable the kappa adjustment");
  sub->add_option("--f-g", a.f_g, "ground-state detection fidelity");
  sub->add_option("--u-int-ghz", a.u_int_ghz, "blockade shift / 2pi, GHz");
}

inline dynamics::PulseConfig pulse_config(const SimArgs &a) {
  dynamics::PulseConfig cfg;
  cfg.omega_r = 2.0 * constants::pi * a.omega_r_mhz * 1e6;
  cfg.delta = 2.0 * constants::pi * a.delta_ghz * 1e9;
  cfg.gamma = 2.0 * constants::pi * a.gamma_ghz * 1e9;
  cfg.dipole_ea0 = a.dipole;
  cfg.kappa = a.kappa;
  cfg.kappa_adjust = !a.no_kappa;
  cfg.f_g = a.f_g;
  cfg.u_int = 2.0 * constants::pi * a.u_int_ghz * 1e9;
  cfg.gamma_r = a.gamma_r ? *a.gamma_r : dynamics::calibrate_dephasing(a.pg_target, cfg);
  cfg.validate();
  return cfg;
}

inline std::string sim_header(const dynamics::PulseConfig &cfg, const SimArgs &a) {
  std::string h;
  h += "# omega_r_rad_s=" + num(cfg.omega_r) + " delta_rad_s=" + num(cfg.delta) + " gamma_rad_s=" + num(cfg.gamma) +
       "\n";
  h += "# gamma_r_per_s=" + num(cfg.gamma_r) + (a.gamma_r ? " (given)" : " (calibrated to p_g=" + num(a.pg_target) + ")") +
       "\n";
  h += "# dipole_ea0=" + num(cfg.dipole_ea0) + " kappa=" + num(cfg.kappa) +
       " kappa_adjust=" + (cfg.kappa_adjust ? "true" : "false") + " f_g=" + num(cfg.f_g) +
       " u_int_rad_s=" + num(cfg.u_int) + "\n";
  return h;
}

inline int run_sim_rabi(Context &ctx, const SimArgs &a) {
  const auto ics = grid::parse_grid(a.ic);
  const auto cfg = pulse_config(a);
  const auto pts = dynamics::figure3a_curve(ics, cfg);
  std::string csv = sim_header(cfg, a) + "ic_w_cm2,p_g\n";
  for (const auto &p : pts) csv += num(p.intensity_w_cm2) + "," + num(p.p_g) + "\n";
  ctx.write("sim_rabi.csv", csv);
  if (pts.size() >= 2) {
    plot::Series s{"F_g P_g", {}, {}};
    for (const auto &p : pts) {
      s.x.push_back(p.intensity_w_cm2);
      s.y.push_back(p.p_g);
    }
    ctx.write_svg("sim_rabi.svg", {s}, {"I_c (W/cm^2)", "P_g", "", false, false});
  }
  ctx.extra = {{"gamma_r_per_s", cfg.gamma_r}, {"p_g_at_max_ic", pts.back().p_g}};
  *ctx.out << "gamma_r=" << num(cfg.gamma_r) << " p_g(" << num(pts.back().intensity_w_cm2)
           << ")=" << num(pts.back().p_g) << "\n";
  return 0;
}

inline int run_sim_blockade(Context &ctx, const SimArgs &a) {
  const auto ics = grid::parse_grid(a.ic);
  const auto cfg = pulse_config(a);
  const auto pts = dynamics::figure3b_curves(ics, cfg);
  std::string csv = sim_header(cfg, a) + "ic_w_cm2,f_exact,f_bound,f_gg\n";
  for (const auto &p : pts)
    csv += num(p.intensity_w_cm2) + "," + num(p.f_exact) + "," + num(p.f_bound) + "," + num(p.f_gg) + "\n";
  ctx.write("sim_blockade.csv", csv);
  if (pts.size() >= 2) {
    std::vector<plot::Series> s{{"F exact", {}, {}}, {"F bound", {}, {}}, {"F_gg", {}, {}}};
    for (const auto &p : pts) {
      for (auto &x : s) x.x.push_back(p.intensity_w_cm2);
      s[0].y.push_back(p.f_exact);
      s[1].y.push_back(p.f_bound);
      s[2].y.push_back(p.f_gg);
    }
    ctx.write_svg("sim_blockade.svg", s, {"I_c (W/cm^2)", "fidelity", "", false, false});
  }
  const auto first_nonzero =
      std::find_if(pts.begin(), pts.end(), [](const auto &p) { return p.intensity_w_cm2 > 0.0; });
  ctx.extra = {{"gamma_r_per_s", cfg.gamma_r}, {"f_gg_at_max_ic", pts.back().f_gg}};
  *ctx.out << "gamma_r=" << num(cfg.gamma_r) << " f_gg(" << num(pts.back().intensity_w_cm2)
           << ")=" << num(pts.back().f_gg);
  if (first_nonzero != pts.end())
    *ctx.out << " f_bound(" << num(first_nonzero->intensity_w_cm2) << ")=" << num(first_nonzero->f_bound);
  *ctx.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FidelityArgs {
  std::string pops_tg;
  std::string pops_2tg;
  std::string basis_order = "gr,rg,rr,gg";
};

/// Reorders four populations given in `order` into (gg, gr, rg, rr) and
/// renormalizes sums that are off by rounding only.
inline dynamics::Populations parse_populations(const std::string &values, const std::string &order) {
  const auto v = grid::parse_list(values);
  std::vector<std::string> names;
  std::stringstream ss(order);
  std::string item;
  while (std::getline(ss, item, ',')) names.push_back(item);
  if (v.size() != 4 || names.size() != 4) throw InputError("expected four populations and four basis labels");
  const std::map<std::string, int> slot{{"gg", 0}, {"gr", 1}, {"rg", 2}, {"rr", 3}};
  dynamics::Populations p{-1.0, -1.0, -1.0, -1.0};
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto it = slot.find(names[i]);
    if (it == slot.end() || p[static_cast<std::size_t>(it->second)] >= 0.0)
      throw InputError("basis order must be a permutation of gg,gr,rg,rr");
    if (v[i] < 0.0) throw InputError("populations must be non-negative");
    p[static_cast<std::size_t>(it->second)] = v[i];
    sum += v[i];
  }
  if (std::abs(sum - 1.0) > 1e-3) throw InputError("populations must sum to 1 (got " + num(sum) + ")");
  for (double &x : p) x /= sum;
  return p;
}

inline int run_fidelity(Context &ctx, const FidelityArgs &a) {
  const auto tg = parse_populations(a.pops_tg, a.basis_order);
  const auto t2 = parse_populations(a.pops_2tg, a.basis_order);
  const double b = dynamics::bell_bound(tg, t2);
  std::string csv = "# populations ordered gg,gr,rg,rr after reordering from " + a.basis_order + "\n";
  csv += "p_gg_tg,p_gr_tg,p_rg_tg,p_rr_tg,p_gg_2tg,p_gr_2tg,p_rg_2tg,p_rr_2tg,f_bound\n";
  for (double x : tg) csv += num(x) + ",";
  for (double x : t2) csv += num(x) + ",";
  csv += num(b) + "\n";
  ctx.write("fidelity.csv", csv);
  ctx.extra = {{"bound", b}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "bound=%.4f", b);
  *ctx.out << buf << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BudgetArgs {
  std::string scheme = "both";
  std::string eps = "1e-4:1e-2";
  double gamma_ghz = 0.92;
  double gamma_r = 1e3;
  double c_rot = 1.0;
  double c_sc = 1.0;
};

inline int run_error_budget(Context &ctx, const BudgetArgs &a) {
  std::vector<std::pair<std::string, error_budget::ShiftTarget>> schemes;
  if (a.scheme == "ground" || a.scheme == "both") schemes.emplace_back("ground", error_budget::ShiftTarget::GroundShift);
  if (a.scheme == "rydberg" || a.scheme == "both")
    schemes.emplace_back("rydberg", error_budget::ShiftTarget::RydbergShift);
  if (schemes.empty()) throw InputError("scheme must be ground, rydberg or both");
  const auto eps = grid::parse_grid(a.eps);
  const double gamma = 2.0 * constants::pi * a.gamma_ghz * 1e9;

  std::vector<plot::Series> series;
  for (const auto &[label, target] : schemes) {
    const error_budget::Scheme s{target, a.c_rot, a.c_sc};
    std::string csv = "# scheme=" + label + " gamma_rad_s=" + num(gamma) + " gamma_r_per_s=" + num(a.gamma_r) +
                      " c_rot=" + num(a.c_rot) + " c_sc=" + num(a.c_sc) + "\n";
    std::vector<double> x, d;
    std::string rows;
    for (double e : eps) {
      const auto o = error_budget::optimize_control(s, e, gamma, a.gamma_r);
      rows += num(e) + "," + num(o.delta) + "," + num(o.omega_c_sq) + "," + num(o.errors.eps_rot) + "," +
              num(o.errors.eps_sc) + "\n";
      x.push_back(o.omega_c_sq);
      d.push_back(o.delta);
    }
    double slope_x = 0.0, slope_d = 0.0;
    if (eps.size() >= 2) {
      slope_x = error_budget::loglog_slope(eps, x);
      slope_d = error_budget::loglog_slope(eps, d);
    }
    csv += "# slope_omega_c_sq=" + num(slope_x) + " slope_delta=" + num(slope_d) + "\n";
    csv += "eps,delta_opt,omega_c_sq_opt,eps_rot,eps_sc\n" + rows;
    ctx.write("error_budget_" + label + ".csv", csv);
    if (eps.size() >= 2) series.push_back({label + " Omega_c^2", eps, x});
    ctx.extra[label] = {{"slope_omega_c_sq", slope_x}, {"slope_delta", slope_d}};
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s slope_omega_c_sq=%.4f slope_delta=%.4f\n", label.c_str(), slope_x, slope_d);
    *ctx.out << buf;
  }
  if (!series.empty()) ctx.write_svg("error_budget.svg", series, {"epsilon", "Omega_c^2 (rad/s)^2", "", true, true});
  return 0;
}

// ---------------------------------------------------------------------------

struct TwoLevelFitArgs {
  std::string data;
  double gamma_ghz = 0.92;
  double delta_plus_ghz = -0.73;
  std::optional<double> amplitude;
  std::optional<double> ic;
  bool nelder_mead = false;
};

inline std::string fit_csv(const fit::SpectrumDataset &ds, const std::vector<double> &model) {
  std::string csv = "# data=" + ds.provenance + "\ndelta_ghz,gamma_ls,fit\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    csv += num(ds.delta_ghz[i]) + "," + num(ds.gamma_ls[i]) + "," + num(model[i]) + "\n";
  return csv;
}

inline void fit_svg(Context &ctx, const std::string &file, const fit::SpectrumDataset &ds,
                    const std::vector<double> &model) {
  if (ds.size() < 2) return;
  ctx.write_svg(file, {{"data", ds.delta_ghz, ds.gamma_ls}, {"fit", ds.delta_ghz, model}},
                {"detuning (GHz)", "Gamma_LS (1/s)", "", false, false});
}

inline int run_fit_two_level(Context &ctx, const TwoLevelFitArgs &a) {
  const auto ds = fit::load_spectrum_csv(a.data);
  ctx.model_hash = sha256_hex(read_file(a.data));
  spectrum::TwoLevelParams init;
  init.gamma = 2.0 * constants::pi * a.gamma_ghz * 1e9;
  init.delta_plus_hz = a.delta_plus_ghz * 1e9;
  fit::TwoLevelFitOptions opt;
  opt.nelder_mead_fallback = a.nelder_mead;
  const auto r = fit::fit_two_level(ds, init, a.amplitude, opt);
  std::vector<double> model(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    model[i] = fit::two_level_rate(ds.delta_ghz[i], r.param("gamma"), r.param("delta_plus_hz"), r.param("amplitude"));
  auto j = fit::to_json(r);
  if (a.ic && *a.ic > 0.0) j["dipole_ea0"] = spectrum::dipole_from_rabi(std::sqrt(r.param("amplitude")), *a.ic);
  ctx.write("fit_two_level.json", j.dump(2) + "\n");
  ctx.write("fit_two_level.csv", fit_csv(ds, model));
  fit_svg(ctx, "fit_two_level.svg", ds, model);
  ctx.extra = j;
  *ctx.out << "gamma_ghz=" << num(r.param("gamma") / (2.0 * constants::pi * 1e9))
           << " delta_plus_ghz=" << num(r.param("delta_plus_hz") * 1e-9) << " amplitude=" << num(r.param("amplitude"))
           << " converged=" << (r.converged ? "true" : "false") << "\n";
  return r.converged ? 0 : 3;
}

struct MuFitArgs {
  std::string data;
  std::string model;
  double ic = 600.0;
  double dipole = 1.46;
  int restarts = 0;
  std::uint64_t seed = 0;
  bool nelder_mead = false;
};

inline int run_fit_mqdt(Context &ctx, const MuFitArgs &a) {
  const auto ds = fit::load_spectrum_csv(a.data);
  const auto src = load_model_source(a.model);
  ctx.model_hash = src.hash;
  const auto field = spectrum::FieldConfig::from_intensity(a.ic, a.dipole);
  fit::MuFitOptions opt;
  opt.restarts = a.restarts;
  opt.seed = a.seed;
  opt.nelder_mead_fallback = a.nelder_mead;
  const auto r = fit::fit_mu(ds, src.model, field, opt);
  const auto fitted = fit::model_with_params(src.model, r.params);
  const auto model = fit::model_rates(fitted, field, ds.delta_ghz);
  auto j = fit::to_json(r);
  j["model"] = mqdt::to_json(fitted);
  ctx.write("fit_mqdt.json", j.dump(2) + "\n");
  ctx.write("model_fit.json", mqdt::to_json(fitted).dump(2) + "\n");
  ctx.write("fit_mqdt.csv", fit_csv(ds, model));
  fit_svg(ctx, "fit_mqdt.svg", ds, model);
  ctx.extra = {{"residual_norm", r.residual_norm}, {"converged", r.converged},
               {"degenerate_jacobian", r.degenerate_jacobian}};
  *ctx.out << "residual_norm=" << num(r.residual_norm) << " iterations=" << r.n_iterations
           << " converged=" << (r.converged ? "true" : "false")
           << " degenerate_jacobian=" << (r.degenerate_jacobian ? "true" : "false") << "\n";
  return r.converged ? 0 : 3;
}

// ---------------------------------------------------------------------------

/// Turns a JSON config object into flags. They are placed before the
/// command-line flags, and the last occurrence of an option wins.
inline std::vector<std::string> config_arguments(const std::string &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception &e) {
    throw InputError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config " + path + " must be a JSON object");
  std::vector<std::string> out;
  for (const auto &[key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      out.push_back(flag);
      out.push_back(value.dump());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto &v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      out.push_back(flag);
      out.push_back(joined);
    } else {
      throw InputError("config key '" + key + "' has an unsupported type");
    }
  }
  return out;
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(std::vector<std::string> args, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  CLI::App app{"rydctl: autoionization spectra, light shifts and Rydberg-blockade simulations"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", version);

  std::string out_dir = ".";
  bool svg = false;
  std::string config;
  auto common = [&](CLI::App *sub) {
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--svg", svg, "also write an SVG plot");
    sub->add_option("--config", config, "JSON config; command-line flags take precedence");
  };

  SpectrumArgs spec_args, ls_args;
  ls_args.delta = "-30:5:0.5";
  auto *spec = app.add_subcommand("spectrum", "photoionization rate and light shift vs detuning");
  add_spectrum_options(spec, spec_args);
  spec->add_flag("--no-lightshift", spec_args.no_lightshift, "skip the light-shift integral");
  auto *ls = app.add_subcommand("lightshift", "complex light shift vs detuning");
  add_spectrum_options(ls, ls_args);

  MuFitArgs mu_args;
  auto *fm = app.add_subcommand("fit-mqdt", "fit the quantum-defect matrices to a rate spectrum");
  fm->add_option("--data", mu_args.data, "CSV delta_ghz,gamma_ls[,sigma]")->required();
  fm->add_option("--model", mu_args.model, "initial channel model JSON");
  fm->add_option("--ic", mu_args.ic, "control intensity, W/cm^2");
  fm->add_option("--dipole", mu_args.dipole, "r-r' dipole, e a0");
  fm->add_option("--restarts", mu_args.restarts, "additional random starts");
  fm->add_option("--seed", mu_args.seed, "random seed for restarts");
  fm->add_flag("--nelder-mead", mu_args.nelder_mead, "simplex fallback when LM stalls");

  TwoLevelFitArgs tl_args;
  auto *ft = app.add_subcommand("fit-two-level", "fit Gamma, Delta+ and amplitude to a rate spectrum");
  ft->add_option("--data", tl_args.data, "CSV delta_ghz,gamma_ls[,sigma]")->required();
  ft->add_option("--gamma-ghz", tl_args.gamma_ghz, "initial Gamma / 2pi, GHz");
  ft->add_option("--delta-plus-ghz", tl_args.delta_plus_ghz, "initial Delta+, GHz");
  ft->add_option("--amplitude", tl_args.amplitude, "initial amplitude Omega_c^2, (rad/s)^2");
  ft->add_option("--ic", tl_args.ic, "intensity of the data, W/cm^2 (reports the dipole)");
  ft->add_flag("--nelder-mead", tl_args.nelder_mead, "simplex fallback when LM stalls");

  SimArgs rabi_args, bl_args;
  auto *sr = app.add_subcommand("sim-rabi", "single-atom P_g after a pi pulse vs control intensity");
  add_sim_options(sr, rabi_args);
  auto *sb = app.add_subcommand("sim-blockade", "two-atom Bell fidelity vs control intensity");
  add_sim_options(sb, bl_args);

  FidelityArgs fid_args;
  auto *fi = app.add_subcommand("fidelity", "Bell-state fidelity bound from measured populations");
  fi->add_option("--pops-tg", fid_args.pops_tg, "populations at t_g")->required();
  fi->add_option("--pops-2tg", fid_args.pops_2tg, "populations at 2 t_g")->required();
  fi->add_option("--basis-order", fid_args.basis_order, "labels of the four populations");

  BudgetArgs eb_args;
  auto *eb = app.add_subcommand("error-budget", "optimal control power and detuning vs target error");
  eb->add_option("--scheme", eb_args.scheme, "ground, rydberg or both");
  eb->add_option("--eps", eb_args.eps, "target error grid; a:b gives 21 log-spaced points");
  eb->add_option("--gamma-ghz", eb_args.gamma_ghz, "r' linewidth / 2pi, GHz");
  eb->add_option("--gamma-r", eb_args.gamma_r, "Rydberg decoherence rate, 1/s");
  eb->add_option("--c-rot", eb_args.c_rot, "rotation-error prefactor");
  eb->add_option("--c-sc", eb_args.c_sc, "scattering-error prefactor");

  for (auto *sub : {spec, ls, fm, ft, sr, sb, fi, eb}) common(sub);

  const std::vector<std::string> original = args;
  try {
    // splice config flags right after the subcommand name
    for (std::size_t i = 1; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (path.empty()) continue;
      auto extra = config_arguments(path);
      args.insert(args.begin() + 1, extra.begin(), extra.end());
      break;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const InputError &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App *sub = app.get_subcommands().front();
  Context ctx;
  ctx.name = sub->get_name();
  ctx.out_dir = out_dir;
  ctx.svg = svg;
  ctx.arguments = original;
  ctx.app = sub;
  ctx.out = &out;
  try {
    int code = 2;
    if (sub == spec) code = run_spectrum(ctx, spec_args, !spec_args.no_lightshift);
    else if (sub == ls) code = run_spectrum(ctx, ls_args, true);
    else if (sub == fm) code = run_fit_mqdt(ctx, mu_args);
    else if (sub == ft) code = run_fit_two_level(ctx, tl_args);
    else if (sub == sr) code = run_sim_rabi(ctx, rabi_args);
    else if (sub == sb) code = run_sim_blockade(ctx, bl_args);
    else if (sub == fi) code = run_fidelity(ctx, fid_args);
    else if (sub == eb) code = run_error_budget(ctx, eb_args);
    ctx.write_provenance();
    return code;
  } catch (const InputError &e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError &e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception &e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error &e) {
    err << "input error: " << e.what() << "\n";
    return 2;
  }
}

} // namespace rydctl::cli

#endif // RYDCTL_TOOLS_CLI_HPP
