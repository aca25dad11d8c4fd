// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rydctl/dynamics.hpp"
#include "rydctl/error_budget.hpp"
#include "rydctl/fit.hpp"
#include "rydctl/spectrum.hpp"
#include "rydctl_cli.hpp"

using namespace rydctl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char *f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const spectrum::SpectrumModel &reference() {
  static const spectrum::SpectrumModel m(mqdt::ChannelModel::reference());
  return m;
}

spectrum::FieldConfig field600() { return spectrum::FieldConfig::from_intensity(600.0, 1.46); }

// ---------------------------------------------------------------------------

Outcome bell_bound_table_s3() {
  const auto t0 = std::chrono::steady_clock::now();
  // Table S3 lists (gr, rg, rr, gg); the bound takes (gg, gr, rg, rr)
  const double b = dynamics::bell_bound({0.014, 0.487, 0.494, 0.005}, {0.968, 0.013, 0.013, 0.006});
  const double dt = seconds_since(t0);
  const bool ok = std::abs(b - 0.9480) <= 0.0005 && dt < 1e-3;
  return {ok, "bound " + fmt("%.6f", b) + ", " + fmt("%.3g", dt * 1e3) + " ms"};
}

Outcome lightshift_rate_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto &m = reference();
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double d = -30.0 + 35.0 * i / 49.0;
    const double rate = m.rate_at_detuning(d, field600());
    const auto s = m.light_shift_at_detuning(d, field600());
    worst = std::max(worst, std::abs(rate + 2.0 * constants::hartree_to_rate(s.imag())) / rate);
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-6 && dt < 30.0, "max relative mismatch " + fmt("%.2e", worst) + ", " + fmt("%.2f", dt) + " s"};
}

Outcome overlap_zeros() {
  const auto &m = reference();
  double peak = 0.0;
  for (int i = 0; i <= 4000; ++i) peak = std::max(peak, m.kernel_at_nu(m.nu_for_detuning(-35.0 + 45.0 * i / 4000.0)));
  double worst = 0.0;
  for (int k : {-3, -2, -1, 1, 2, 3}) worst = std::max(worst, m.kernel_at_nu(m.model().nu0 - k) / peak);
  return {worst < 1e-20, "max kernel/peak at integer offsets " + fmt("%.2e", worst)};
}

Outcome spectrum_morphology() {
  const auto &m = reference();
  const auto f = field600();
  const double h = 0.01;
  std::vector<double> d, r, z1;
  for (double x = -35.0; x <= 10.0 + 1e-9; x += h) {
    d.push_back(x);
    r.push_back(m.rate_at_detuning(x, f));
    z1.push_back(m.kernel_block_at_nu(m.nu_for_detuning(x), mqdt::JBlock::J1));
  }
  const std::size_t imax = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  // satellite: the local maximum closest to the n=74 shake-up line
  double sat_d = NAN, sat_r = -1.0;
  std::vector<double> zeros;
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    if (d[i] < -6.0 && r[i] > r[i - 1] && r[i] > r[i + 1] && (std::isnan(sat_d) || std::abs(d[i] + 19.0) < std::abs(sat_d + 19.0)))
      sat_r = r[i], sat_d = d[i];
    if (d[i] < -5.0 && z1[i] < z1[i - 1] && z1[i] < z1[i + 1] &&
        m.z21_squared(m.nu_for_detuning(d[i]), mqdt::JBlock::J1) < 1e-4)
      zeros.push_back(d[i]);
  }
  auto near = [&](double t) {
    return std::any_of(zeros.begin(), zeros.end(), [&](double z) { return std::abs(z - t) <= 3.0; });
  };
  const spectrum::TwoLevelParams p;
  const double two_level = spectrum::two_level_response(spectrum::rabi_from_intensity(600.0, p.dipole_ea0),
                                                        2.0 * constants::pi * (-18.7e9 - p.delta_plus_hz), p.gamma)
                               .gamma_ls;
  const double ratio = two_level / m.rate_at_detuning(-18.7, f);
  const bool ok = std::abs(d[imax]) <= 3.0 && std::abs(sat_d + 19.0) <= 3.0 && near(-11.0) && near(-31.0) && ratio >= 10.0;
  std::string zs;
  for (double z : zeros) zs += (zs.empty() ? "" : " ") + fmt("%.2f", z);
  return {ok, "peak at " + fmt("%.2f", d[imax]) + " GHz, satellite at " + fmt("%.2f", sat_d) + " GHz, J=1 zeros [" +
                  zs + "] GHz, two-level/MQDT at -18.7 GHz " + fmt("%.1f", ratio)};
}

Outcome lindblad_oracles() {
  using namespace dynamics;
  const auto t0 = std::chrono::steady_clock::now();
  double drift = 0.0, min_eig = 1.0, rabi_err = 0.0, decay_err = 0.0;
  auto track = [&](const std::vector<DensityMatrix> &traj) {
    for (const auto &rho : traj) {
      drift = std::max(drift, std::abs(rho.trace() - 1.0));
      min_eig = std::min(min_eig, rho.min_eigenvalue());
    }
  };
  PulseConfig ideal;
  ideal.gamma = 0.0;
  ideal.omega_c = 0.0;
  std::vector<double> times;
  for (int k = 1; k <= 50; ++k) times.push_back(k * 0.04e-6);
  const auto rabi = evolve(build_single_atom(ideal), DensityMatrix::basis_state(4, kG), times);
  track(rabi);
  for (std::size_t k = 0; k < times.size(); ++k)
    rabi_err = std::max(rabi_err, std::abs(rabi[k].population(kG) - std::pow(std::cos(ideal.omega_r * times[k] / 2), 2)));

  PulseConfig decay = ideal;
  decay.omega_r = 0.0;
  decay.gamma = 2.0 * constants::pi * 10e6;
  std::vector<double> short_times;
  for (int k = 1; k <= 50; ++k) short_times.push_back(k * 1e-9);
  const auto dec = evolve(build_single_atom(decay), DensityMatrix::basis_state(4, kRp), short_times);
  track(dec);
  for (std::size_t k = 0; k < short_times.size(); ++k)
    decay_err = std::max(decay_err, std::abs(dec[k].population(kRp) - std::exp(-decay.gamma * short_times[k])));

  // dissipative trajectories at the operating point
  PulseConfig work;
  work.intensity_w_cm2 = 600.0;
  work.kappa_adjust = true;
  work.gamma_r = 0.02 * work.omega_r;
  track(evolve(build_single_atom(work), DensityMatrix::basis_state(4, kG), times));
  std::vector<double> two_times{0.25e-6, 0.5e-6, 0.75e-6, 1.0e-6};
  track(evolve(build_two_atom(work), DensityMatrix::basis_state(16, 0), two_times));

  PulseConfig block = ideal;
  block.u_int = 2.0 * constants::pi * 1e9;
  Propagator prop(build_two_atom(block));
  const double t_expect = constants::pi / (std::sqrt(2.0) * block.omega_r);
  const double h = 1e-5 * t_expect;
  auto rho = prop.apply(0.98 * t_expect, DensityMatrix::basis_state(16, 0));
  double best = rho.population(0), best_t = 0.98 * t_expect;
  for (int k = 1; k <= 4000; ++k) {
    rho = prop.apply(h, rho);
    if (rho.population(0) < best) best = rho.population(0), best_t = 0.98 * t_expect + k * h;
  }
  const double zero_err = std::abs(best_t / t_expect - 1.0);
  const double dt = seconds_since(t0);
  const bool ok = drift < 1e-9 && min_eig > -1e-8 && rabi_err < 1e-8 && decay_err < 1e-8 && zero_err < 1e-3 && dt < 5.0;
  return {ok, "trace drift " + fmt("%.1e", drift) + ", min eigenvalue " + fmt("%.1e", min_eig) + ", Rabi error " +
                  fmt("%.1e", rabi_err) + ", decay error " + fmt("%.1e", decay_err) + ", first P_gg zero off by " +
                  fmt("%.1e", zero_err) + ", " + fmt("%.2f", dt) + " s"};
}

Outcome figure3_endpoints() {
  using namespace dynamics;
  PulseConfig cfg;
  cfg.kappa_adjust = true;
  cfg.kappa = 0.7;
  cfg.gamma_r = calibrate_dephasing(0.03, cfg);
  const std::vector<double> grid{0, 1, 2, 5, 10, 20, 50, 100, 200, 400, 600};
  const auto a = figure3a_curve({600.0}, cfg);
  const auto b = figure3b_curves(grid, cfg);
  const double pg600 = a.front().p_g;
  const double fgg = b.back().f_gg;
  const double fbound_small = b[1].f_bound;
  double worst_excess = -1.0, at = 0.0;
  for (const auto &p : b)
    if (p.f_bound - p.f_exact > worst_excess) worst_excess = p.f_bound - p.f_exact, at = p.intensity_w_cm2;
  const bool ok_a = pg600 >= 0.98;
  const bool ok_gg = fgg >= 0.97;
  const bool ok_bound = fbound_small >= 0.93 && fbound_small <= 0.97;
  const bool ok_order = worst_excess <= 1e-6;
  auto flag = [](bool x) { return x ? "ok" : "FAIL"; };
  return {ok_a && ok_gg && ok_bound && ok_order,
          "F_g P_g(600) " + fmt("%.4f", pg600) + " [" + flag(ok_a) + "], F_gg(600) " + fmt("%.4f", fgg) + " [" +
              flag(ok_gg) + "], F_bound(1 W/cm^2) " + fmt("%.4f", fbound_small) + " [" + flag(ok_bound) +
              "], max F_bound - F_exact " + fmt("%.2e", worst_excess) + " at " + fmt("%g", at) + " W/cm^2 [" +
              flag(ok_order) + "], gamma_r " + fmt("%.4g", cfg.gamma_r) + " 1/s"};
}

Outcome scaling_exponents() {
  using namespace error_budget;
  const auto grid = log_grid(1e-4, 1e-2, 21);
  const auto g = scaling_exponent({ShiftTarget::GroundShift}, grid);
  const auto r = scaling_exponent({ShiftTarget::RydbergShift}, grid);
  const bool ok = std::abs(g.omega_c_sq_slope + 3.0) <= 0.05 && std::abs(r.omega_c_sq_slope + 2.0) <= 0.05 &&
                  std::abs(g.delta_slope + 1.5) <= 0.05 && std::abs(r.delta_slope + 0.5) <= 0.05;
  return {ok, "ground " + fmt("%.4f", g.omega_c_sq_slope) + " / " + fmt("%.4f", g.delta_slope) + ", rydberg " +
                  fmt("%.4f", r.omega_c_sq_slope) + " / " + fmt("%.4f", r.delta_slope)};
}

Outcome nstar_consistency() {
  const auto s = spectrum::nstar_scaling(75);
  const double g = s.gamma / (2.0 * constants::pi * 1e9);
  const double d = s.delta_plus_abs_hz * 1e-9;
  // quoted to three digits
  const bool ok = std::abs(g - 0.826) <= 1e-3 && std::abs(d - 0.626) <= 1e-3 && std::abs(g / 0.92 - 1.0) <= 0.20 &&
                  std::abs(d / 0.73 - 1.0) <= 0.20;
  return {ok, "Gamma/2pi " + fmt("%.4f", g) + " GHz (" + fmt("%.1f", 100 * (g / 0.92 - 1)) + "%), |Delta+| " +
                  fmt("%.4f", d) + " GHz (" + fmt("%.1f", 100 * (d / 0.73 - 1)) + "%)"};
}

Outcome fit_round_trips() {
  const auto t0 = std::chrono::steady_clock::now();
  const double gamma = 2.0 * constants::pi * 0.92e9, dplus = -0.73e9;
  auto make = [&](double noise, std::uint64_t seed) {
    fit::SpectrumDataset ds;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const double d = -6.0 + 10.0 * i / 49.0;
      const double y = fit::two_level_rate(d, gamma, dplus, 1.0);
      ds.delta_ghz.push_back(d);
      ds.gamma_ls.push_back(y * (1.0 + noise * n(rng)));
      ds.sigma.push_back(std::max(noise, 1e-3) * y);
    }
    return ds;
  };
  auto rel = [&](const fit::FitResult &r) {
    return std::max({std::abs(r.param("gamma") / gamma - 1.0), std::abs(r.param("delta_plus_hz") / dplus - 1.0),
                     std::abs(r.param("amplitude") - 1.0)});
  };
  spectrum::TwoLevelParams init;
  init.gamma *= 1.3;
  init.delta_plus_hz *= 0.7;
  const double clean = rel(fit::fit_two_level(make(0.0, 0), init, 0.7));
  const double noisy = rel(fit::fit_two_level(make(0.01, 0), init));

  const auto model = mqdt::ChannelModel::reference();
  const auto f = field600();
  fit::SpectrumDataset ds;
  for (double d = -35.0; d <= 10.0 + 1e-9; d += 0.5) ds.delta_ghz.push_back(d);
  ds.gamma_ls = fit::model_rates(model, f, ds.delta_ghz);
  for (double y : ds.gamma_ls) ds.sigma.push_back(0.01 * y);
  Eigen::VectorXd p = fit::mu_to_params(model.mu_j0.canonical(), model.mu_j1.canonical());
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += (i % 2 ? 0.02 : -0.02);
  const auto r = fit::fit_mu(ds, fit::model_with_params(model, p), f);
  const auto rates = fit::model_rates(fit::model_with_params(model, r.params), f, ds.delta_ghz);
  double mu_worst = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) mu_worst = std::max(mu_worst, std::abs(rates[i] / ds.gamma_ls[i] - 1.0));
  const double dt = seconds_since(t0);
  const bool ok = clean <= 1e-6 && noisy <= 0.03 && mu_worst <= 1e-4 && dt < 60.0;
  return {ok, "two-level noiseless " + fmt("%.1e", clean) + ", 1% noise " + fmt("%.4f", noisy) +
                  ", mu-fit spectrum mismatch " + fmt("%.1e", mu_worst) + ", " + fmt("%.1f", dt) + " s"};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "rydctl_acceptance";
  fs::remove_all(base);
  const std::vector<std::vector<std::string>> runs{
      {"spectrum", "--delta", "-25:5:2.5"},
      {"sim-rabi", "--ic", "0,10,600"},
      {"error-budget"},
      {"fidelity", "--pops-tg", "0.487,0.494,0.005,0.014", "--pops-2tg", "0.013,0.013,0.006,0.968"}};
  std::vector<std::string> files;
  for (const char *tag : {"a", "b"}) {
    for (auto args : runs) {
      args.push_back("--out-dir");
      args.push_back((base / tag).string());
      std::ostringstream out, err;
      if (cli::run(args, out, err) != 0) return {false, "run failed: " + err.str()};
    }
  }
  int compared = 0;
  for (const auto &entry : fs::directory_iterator(base / "a")) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream a(entry.path(), std::ios::binary), b(base / "b" / entry.path().filename(), std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (sa.str() != sb.str()) return {false, entry.path().filename().string() + " differs"};
    ++compared;
  }
  return {compared >= 5, std::to_string(compared) + " CSV files byte-identical"};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Bell bound on Table S3", bell_bound_table_s3},
      {"light shift reproduces rate", lightshift_rate_consistency},
      {"exact overlap zeros", overlap_zeros},
      {"spectrum morphology", spectrum_morphology},
      {"Lindblad oracles", lindblad_oracles},
      {"Figure 3 endpoints", figure3_endpoints},
      {"scaling exponents", scaling_exponents},
      {"n* scaling consistency", nstar_consistency},
      {"fit round trips", fit_round_trips},
      {"deterministic CSV output", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
