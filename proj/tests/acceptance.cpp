// Acceptance run: one PASS/FAIL line per criterion with the measured values
// and wall time. Exit status is non-zero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gmcsim/analysis.hpp"
#include "gmcsim/bias.hpp"
#include "gmcsim/cli/config.hpp"
#include "gmcsim/diffpair.hpp"
#include "gmcsim/dynamp.hpp"

#ifndef GMCSIM_EXE
#error "GMCSIM_EXE must name the gmcsim executable"
#endif

using namespace gmcsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_budget_s;  // 0 = no runtime bound
  std::function<Outcome()> body;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

const cli::RunConfig& config() {
  static const cli::RunConfig cfg = cli::default_config();
  return cfg;
}

const diffpair::DiffPairSpec kRatioSpecs[] = {
    {10.0, 1.0, 1.0, 100e-6},
    {10.0, 2.0, 1.0, 100e-6},
    {10.0, 5.4, 1.0, 100e-6},
    {10.0, 1.0, 5.4, 100e-6},
};

Outcome gm_oracle() {
  const auto& c = config();
  constexpr double h = 1e-6;
  double worst = 0.0;
  for (const auto& s : kRatioSpecs) {
    const auto b = diffpair::cutoff_bounds(s, c.device, c.nominal);
    for (int i = 0; i < 101; ++i) {
      const double x = b.lo + (b.hi - b.lo) * (i + 1) / 102.0;
      const double fd = (diffpair::solve_current_split(s, x + h, c.device, c.nominal).delta() -
                         diffpair::solve_current_split(s, x - h, c.device, c.nominal).delta()) /
                        (2.0 * h);
      const double g = diffpair::gm_asymmetric(s, x, c.device, c.nominal);
      worst = std::max(worst, std::abs(g - fd) / std::abs(fd));
    }
  }
  return {worst < 1e-6, "max rel err " + fmt(worst) + " (< 1e-6)"};
}

Outcome symmetric_collapse() {
  const auto& c = config();
  const diffpair::DiffPairSpec s{10.0, 1.0, 1.0, 100e-6};
  const double expected = std::sqrt(devmodel::kprime_at(c.device, c.nominal) * s.base_wl * s.iss);
  const double g = diffpair::gm_asymmetric(s, 0.0, c.device, c.nominal);
  const double err = std::abs(g - expected) / expected;
  return {err < 1e-12, "rel err " + fmt(err) + " (< 1e-12)"};
}

Outcome shift_direction() {
  const auto& c = config();
  bool ok = true;
  std::string detail;
  for (const auto& s : kRatioSpecs) {
    const auto b = diffpair::cutoff_bounds(s, c.device, c.nominal);
    const auto xs = analysis::linspace(b.lo, b.hi, 20001);
    double best_x = 0.0;
    double best = -1.0;
    for (double x : xs) {
      const double g = diffpair::gm_asymmetric(s, x, c.device, c.nominal);
      if (g > best) {
        best = g;
        best_x = x;
      }
    }
    const double step = xs[1] - xs[0];
    const int sign = std::abs(best_x) <= step ? 0 : (best_x > 0 ? 1 : -1);
    const int want = s.n > s.m ? 1 : (s.n < s.m ? -1 : 0);
    ok = ok && sign == want;
    detail += "(" + fmt(s.m) + "," + fmt(s.n) + ")->" + fmt(best_x * 1e3) + "mV ";
  }
  return {ok, detail};
}

Outcome constant_gm_bias() {
  const auto& c = config();
  const auto& design = std::get<dynamp::ProposedDesign>(c.proposed.design);
  auto ideal = design.bias;
  ideal.resistor.tempco = 0.0;
  double worst_loop = 0.0;
  double worst_route = 0.0;
  const double wl_m1 = design.pair_a.base_wl * design.pair_a.m;
  const double frac = design.pair_a.m / (design.pair_a.m + design.pair_a.n);
  for (double t : analysis::linspace(233.15, 393.15, 9)) {
    for (double scale : analysis::linspace(0.8, 1.2, 5)) {
      devmodel::DeviceParams p = c.device;
      p.kprime_nominal *= scale;
      const devmodel::Environment env{t, c.nominal.vdd};
      const auto sol = bias::solve_bias_loop(ideal, p, env);
      const double formula = bias::gm_m24_formula(ideal, env);
      worst_loop = std::max(worst_loop, std::abs(sol.gm_m24 - formula) / formula);
      const double physics = std::sqrt(2.0 * devmodel::kprime_at(p, env) * wl_m1 * frac * sol.tail_current);
      const double route = bias::gm_m1_formula(ideal, wl_m1, frac, env);
      worst_route = std::max(worst_route, std::abs(physics - route) / route);
    }
  }
  return {worst_loop < 1e-9 && worst_route < 1e-9,
          "loop vs closed form " + fmt(worst_loop) + ", gm_m1 routes " + fmt(worst_route) + " (< 1e-9)"};
}

Outcome gain_law() {
  const auto& c = config();
  double worst = 0.0;
  for (const auto& amp : {c.proposed, c.traditional}) {
    const double vin = analysis::kSmallSignalProbe;
    const double gain = dynamp::amplify_once(amp, vin, c.device, c.nominal).vout_diff / vin;
    const double law = dynamp::gm_at_zero(amp, c.device, c.nominal) * amp.window_t / amp.cap_c;
    worst = std::max(worst, std::abs(gain - law) / law);
  }
  return {worst < 1e-4, "rel err " + fmt(worst) + " (< 1e-4)"};
}

Outcome linearity_window() {
  const auto& c = config();
  // Flatness search at the nominal tail, then trim the gain to 15.7.
  dynamp::AmpConfig proposed = c.proposed;
  auto& design = std::get<dynamp::ProposedDesign>(proposed.design);
  const double iss = dynamp::tail_current_of(proposed, c.device, c.nominal);
  const auto best = diffpair::optimize_flatness(design.pair_a.with_tail(iss), c.flatness.window,
                                                c.flatness.grid, c.device, c.nominal);
  design.pair_a.m = best.spec.pair_a().m;
  design.pair_a.n = best.spec.pair_a().n;
  dynamp::CalibrationOptions opts;
  opts.probe_vin = c.calibration.probe_vin;
  const auto cal = dynamp::calibrate_gain(proposed, c.calibration.target_gain, c.device, c.nominal, opts);

  const auto pc = analysis::transfer_sweep(cal.config, -0.1, 0.1, 201, c.device, c.nominal);
  const double ripple = analysis::gain_ripple(pc, 0.04);

  const auto tc = analysis::transfer_sweep(c.traditional, -0.1, 0.1, 201, c.device, c.nominal);
  const double peak = *std::max_element(tc.gains.begin(), tc.gains.end());
  const double edge = std::max(dynamp::gain_at(c.traditional, 0.04, c.device, c.nominal),
                               dynamp::gain_at(c.traditional, -0.04, c.device, c.nominal));
  const double drop = 1.0 - edge / peak;
  return {ripple < 0.02 && drop > 0.05,
          "ratio " + fmt(best.ratio) + ", gain " + fmt(cal.achieved_gain) + ", proposed ripple " +
              fmt(ripple * 100) + "% (< 2%), traditional drop " + fmt(drop * 100) + "% (> 5%)"};
}

Outcome thd_margin() {
  const auto& c = config();
  const auto p = analysis::thd_run(c.proposed, c.thd, c.device, c.nominal);
  const auto t = analysis::thd_run(c.traditional, c.thd, c.device, c.nominal);
  const double margin = p.thd_db - t.thd_db;
  double even = analysis::kZeroBinDb;
  const std::size_t n = p.n_samples;
  for (std::size_t h = 2; h <= static_cast<std::size_t>(c.thd.harmonics); h += 2) {
    std::size_t b = (h * p.fundamental_bin) % n;
    if (b > n / 2) b = n - b;
    even = std::max(even, p.magnitudes_db[b]);
  }
  const double parseval = std::max(analysis::parseval_relative_error(p.samples),
                                   analysis::parseval_relative_error(t.samples));
  return {margin >= 15.0 && even < -200.0 && parseval < 1e-9 && !p.clipped && !t.clipped,
          "proposed " + fmt(p.thd_db) + " dB, traditional " + fmt(t.thd_db) + " dB, margin " +
              fmt(margin) + " dB (>= 15), even harmonics " + fmt(even) + " dB (< -200), parseval " +
              fmt(parseval) + " (< 1e-9)"};
}

Outcome pvt_stability() {
  const auto& c = config();
  const auto p = analysis::corner_sweep(c.proposed, c.corners, c.device);
  const auto t = analysis::corner_sweep(c.traditional, c.corners, c.device);
  const double ratio = p.stats.std / t.stats.std;
  const double p_range = p.stats.max - p.stats.min;
  const double t_range = t.stats.max - t.stats.min;
  const double spread = p_range / p.stats.mean;
  const auto& bias = std::get<dynamp::ProposedDesign>(c.proposed.design).bias;
  const bool ideal_r = bias.resistor.tempco == 0.0;
  return {ratio < 0.3 && p_range < t_range / 3.0 && spread < 1e-3 && ideal_r &&
              p.gains.size() == 45,
          "std ratio " + fmt(ratio) + " (< 0.3), ranges " + fmt(p_range) + " vs " + fmt(t_range) +
              " (< 1/3), proposed spread " + fmt(spread * 100) + "% (< 0.1%)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "gmcsim_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> commands{"selftest", "transfer", "thd", "corners"};
  const std::vector<std::string> runs{"w1_a", "w1_b", "w8"};
  for (const auto& cmd : commands) {
    for (const auto& run : runs) {
      const std::string workers = run == "w8" ? "8" : "1";
      const fs::path out = root / run / cmd;
      const std::string line = std::string("\"") + GMCSIM_EXE + "\" --out \"" + out.string() +
                               "\" --workers " + workers + " " + cmd + " > /dev/null";
      if (std::system(line.c_str()) != 0) return {false, "command failed: " + line};
    }
  }
  std::size_t compared = 0;
  for (const auto& cmd : commands) {
    const fs::path ref = root / runs[0] / cmd;
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(ref)) names.push_back(e.path().filename());
    if (names.empty()) return {false, cmd + " produced no files"};
    for (const auto& run : runs) {
      std::size_t count = 0;
      for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / run / cmd)) ++count;
      if (count != names.size()) return {false, cmd + ": file sets differ in " + run};
      for (const auto& name : names) {
        if (slurp(ref / name) != slurp(root / run / cmd / name))
          return {false, cmd + "/" + name.string() + " differs in " + run};
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(compared) + " file comparisons byte-identical (2 runs, workers 1 and 8)"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"gm closed form matches finite differences", 1.0, gm_oracle},
      {"symmetric collapse", 0.0, symmetric_collapse},
      {"gm peak shift direction", 0.0, shift_direction},
      {"constant-gm bias loop", 1.0, constant_gm_bias},
      {"small-signal gain law", 0.0, gain_law},
      {"linearity window", 5.0, linearity_window},
      {"THD margin", 5.0, thd_margin},
      {"PVT stability", 5.0, pvt_stability},
      {"determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.passed;
    std::string timing = fmt(secs) + " s";
    if (c.time_budget_s > 0.0) {
      timing += " (budget " + fmt(c.time_budget_s) + " s)";
      pass = pass && secs < c.time_budget_s;
    }
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail << "; " << timing
              << "\n";
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
