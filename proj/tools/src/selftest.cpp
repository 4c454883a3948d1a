#include "gmcsim/cli/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gmcsim/analysis.hpp"
#include "gmcsim/bias.hpp"
#include "gmcsim/diffpair.hpp"
#include "gmcsim/dynamp.hpp"

namespace gmcsim::cli {

namespace {

using devmodel::DeviceParams;
using devmodel::Environment;
using diffpair::DiffPairSpec;

struct Ratio {
  double m;
  double n;
};
constexpr Ratio kRatios[] = {{1.0, 1.0}, {2.0, 1.0}, {5.4, 1.0}, {1.0, 5.4}};

DiffPairSpec probe_pair(Ratio r) { return {10.0, r.m, r.n, 100e-6}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

CheckResult verdict(std::string name, double measured, double threshold, std::string detail = {}) {
  return {std::move(name), measured < threshold, measured, threshold, std::move(detail)};
}

CheckResult conservation(const DeviceParams& p, const Environment& env) {
  double worst = 0.0;
  for (Ratio r : kRatios) {
    const auto spec = probe_pair(r);
    const auto b = diffpair::cutoff_bounds(spec, p, env);
    const double span = 3.0 * std::max(-b.lo, b.hi);
    for (double x : analysis::linspace(-span, span, 1001)) {
      const auto s = diffpair::solve_current_split(spec, x, p, env);
      worst = std::max(worst, rel(s.id1 + s.id2, spec.iss));
    }
  }
  return verdict("diffpair.conservation", worst, 1e-12);
}

CheckResult monotonicity(const DeviceParams& p, const Environment& env) {
  double worst_drop = 0.0;
  for (Ratio r : kRatios) {
    const auto spec = probe_pair(r);
    const auto b = diffpair::cutoff_bounds(spec, p, env);
    const double span = 3.0 * std::max(-b.lo, b.hi);
    double prev = -spec.iss;
    for (double x : analysis::linspace(-span, span, 1001)) {
      const double d = diffpair::solve_current_split(spec, x, p, env).delta();
      worst_drop = std::max(worst_drop, prev - d);
      prev = d;
    }
  }
  // A non-decreasing sequence never drops.
  return {"diffpair.monotonicity", worst_drop <= 0.0, worst_drop, 0.0, {}};
}

CheckResult gm_oracle(const DeviceParams& p, const Environment& env) {
  constexpr double h = 1e-6;
  double worst = 0.0;
  for (Ratio r : kRatios) {
    const auto spec = probe_pair(r);
    const auto b = diffpair::cutoff_bounds(spec, p, env);
    for (int i = 0; i < 101; ++i) {
      const double x = b.lo + (b.hi - b.lo) * (i + 1) / 102.0;
      const double fd = (diffpair::solve_current_split(spec, x + h, p, env).delta() -
                         diffpair::solve_current_split(spec, x - h, p, env).delta()) /
                        (2.0 * h);
      worst = std::max(worst, rel(diffpair::gm_asymmetric(spec, x, p, env), fd));
    }
  }
  return verdict("diffpair.gm_matches_finite_difference", worst, 1e-6);
}

CheckResult shift_direction(const DeviceParams& p, const Environment& env) {
  bool ok = true;
  std::ostringstream detail;
  for (Ratio r : kRatios) {
    const auto spec = probe_pair(r);
    const auto b = diffpair::cutoff_bounds(spec, p, env);
    const auto xs = analysis::linspace(b.lo, b.hi, 20001);
    const double step = xs[1] - xs[0];
    double best_x = 0.0;
    double best_g = -1.0;
    for (double x : xs) {
      const double g = diffpair::gm_asymmetric(spec, x, p, env);
      if (g > best_g) {
        best_g = g;
        best_x = x;
      }
    }
    const bool pass = r.n > r.m   ? best_x > 0.0
                      : r.n < r.m ? best_x < 0.0
                                  : std::abs(best_x) <= step;
    ok = ok && pass;
    detail << "(" << r.m << "," << r.n << ")->" << best_x << " ";
  }
  return {"diffpair.peak_shift_direction", ok, ok ? 0.0 : 1.0, 0.5, detail.str()};
}

CheckResult composite_evenness(const DeviceParams& p, const Environment& env) {
  double worst = 0.0;
  for (Ratio r : kRatios) {
    const auto c = diffpair::CompositePairSpec::mirrored(probe_pair(r));
    const double g0 = diffpair::gm_composite(c, 0.0, p, env);
    for (double x : analysis::linspace(0.0, 0.2, 401))
      worst = std::max(worst, std::abs(diffpair::gm_composite(c, x, p, env) -
                                       diffpair::gm_composite(c, -x, p, env)) / g0);
  }
  return verdict("diffpair.composite_even", worst, 1e-12);
}

CheckResult symmetric_collapse(const DeviceParams& p, const Environment& env) {
  const DiffPairSpec spec{10.0, 1.0, 1.0, 100e-6};
  const double expected = std::sqrt(devmodel::kprime_at(p, env) * spec.base_wl * spec.iss);
  return verdict("diffpair.symmetric_collapse",
                 rel(diffpair::gm_asymmetric(spec, 0.0, p, env), expected), 1e-12);
}

CheckResult bias_consistency(const RunConfig& cfg) {
  const auto& bias = std::get<dynamp::ProposedDesign>(cfg.proposed.design).bias;
  auto ideal = bias;
  ideal.resistor.tempco = 0.0;
  double worst = 0.0;
  for (double t : analysis::linspace(233.15, 393.15, 9)) {
    for (double scale : analysis::linspace(0.8, 1.2, 5)) {
      DeviceParams p = cfg.device;
      p.kprime_nominal *= scale;
      const Environment env{t, cfg.nominal.vdd};
      const auto sol = bias::solve_bias_loop(ideal, p, env);
      worst = std::max(worst, rel(sol.gm_m24, bias::gm_m24_formula(ideal, env)));
    }
  }
  return verdict("bias.loop_matches_closed_form", worst, 1e-9);
}

CheckResult bias_route_equivalence(const RunConfig& cfg) {
  const auto& design = std::get<dynamp::ProposedDesign>(cfg.proposed.design);
  const auto pair = design.pair_a.with_tail(1.0);
  const double wl_m1 = pair.base_wl * pair.m;
  double worst = 0.0;
  for (double t : analysis::linspace(233.15, 393.15, 9)) {
    for (double vdd : analysis::linspace(4.5, 5.5, 5)) {
      const Environment env{t, vdd};
      const auto sol = bias::solve_bias_loop(design.bias, cfg.device, env);
      const double physics = std::sqrt(2.0 * devmodel::kprime_at(cfg.device, env) * wl_m1 *
                                       pair.split_fraction() * sol.tail_current);
      const double formula = bias::gm_m1_formula(design.bias, wl_m1, pair.split_fraction(), env);
      worst = std::max(worst, rel(physics, formula));
    }
  }
  return verdict("bias.gm_m1_route_equivalence", worst, 1e-9);
}

std::vector<dynamp::AmpConfig> amps(const RunConfig& cfg) {
  std::vector<dynamp::AmpConfig> out{cfg.proposed, cfg.traditional};
  if (cfg.linear) out.push_back(*cfg.linear);
  return out;
}

CheckResult exact_integration(const RunConfig& cfg) {
  double worst = 0.0;
  for (const auto& amp : amps(cfg)) {
    for (double vin : analysis::linspace(-0.06, 0.06, 121)) {
      const auto s = dynamp::amplify_once(amp, vin, cfg.device, cfg.nominal);
      const double algebraic =
          dynamp::delta_id(amp, vin, cfg.device, cfg.nominal) * amp.window_t / amp.cap_c;
      if (algebraic != 0.0) worst = std::max(worst, rel(s.vout_diff, algebraic));
      else worst = std::max(worst, std::abs(s.vout_diff));
    }
  }
  return verdict("dynamp.exact_integration", worst, 1e-12);
}

CheckResult antisymmetry(const RunConfig& cfg) {
  double worst = 0.0;
  for (const auto& amp : amps(cfg)) {
    for (double vin : analysis::linspace(1e-4, 0.1, 100)) {
      const double up = dynamp::amplify_once(amp, vin, cfg.device, cfg.nominal).vout_diff;
      const double dn = dynamp::amplify_once(amp, -vin, cfg.device, cfg.nominal).vout_diff;
      worst = std::max(worst, std::abs(up + dn) / std::abs(up));
    }
  }
  return verdict("dynamp.antisymmetry", worst, 1e-9);
}

CheckResult small_signal_law(const RunConfig& cfg) {
  double worst = 0.0;
  for (const auto& amp : amps(cfg)) {
    const double law = dynamp::gm_at_zero(amp, cfg.device, cfg.nominal) * amp.window_t / amp.cap_c;
    worst = std::max(worst, rel(dynamp::gain_at(amp, 1e-6, cfg.device, cfg.nominal), law));
  }
  return verdict("dynamp.small_signal_gain_law", worst, 1e-4);
}

CheckResult reset_idempotence(const RunConfig& cfg) {
  bool same = true;
  for (const auto& amp : amps(cfg)) {
    for (double vin : {-0.05, 1e-3, 0.03}) {
      const auto a = dynamp::amplify_once(amp, vin, cfg.device, cfg.nominal);
      const auto b = dynamp::amplify_once(amp, vin, cfg.device, cfg.nominal);
      same = same && a.vout_diff == b.vout_diff && a.vout_p == b.vout_p &&
             a.vout_n == b.vout_n && a.clipped == b.clipped;
    }
  }
  return {"dynamp.reset_idempotence", same, same ? 0.0 : 1.0, 0.5, {}};
}

CheckResult parseval(const RunConfig& cfg, unsigned workers) {
  double worst = 0.0;
  for (const auto& amp : amps(cfg)) {
    const auto s = analysis::thd_run(amp, cfg.thd, cfg.device, cfg.nominal, workers);
    worst = std::max(worst, analysis::parseval_relative_error(s.samples));
  }
  return verdict("analysis.parseval", worst, 1e-9);
}

CheckResult coherence(const RunConfig& cfg, unsigned workers) {
  const dynamp::AmpConfig amp = cfg.linear ? *cfg.linear : dynamp::default_linear();
  const auto s = analysis::thd_run(amp, cfg.thd, cfg.device, cfg.nominal, workers);
  double worst = analysis::kZeroBinDb;
  for (std::size_t k = 1; k < s.magnitudes_db.size(); ++k)
    if (k != s.fundamental_bin) worst = std::max(worst, s.magnitudes_db[k]);
  return verdict("analysis.coherent_leakage_db", worst, -250.0);
}

CheckResult stats_recompute(const RunConfig& cfg, unsigned workers) {
  analysis::CornerSpec spec = cfg.corners;
  const auto grid = analysis::corner_sweep(cfg.traditional, spec, cfg.device, workers);
  const auto again = analysis::gain_stats(grid.gains);
  const bool same = again.std == grid.stats.std && again.mean == grid.stats.mean &&
                    again.min == grid.stats.min && again.max == grid.stats.max;
  return {"analysis.stats_recomputable", same, same ? 0.0 : 1.0, 0.5, {}};
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(const RunConfig& cfg, unsigned workers) {
  const auto& p = cfg.device;
  const auto& env = cfg.nominal;
  return {
      conservation(p, env),
      monotonicity(p, env),
      gm_oracle(p, env),
      shift_direction(p, env),
      composite_evenness(p, env),
      symmetric_collapse(p, env),
      bias_consistency(cfg),
      bias_route_equivalence(cfg),
      exact_integration(cfg),
      antisymmetry(cfg),
      small_signal_law(cfg),
      reset_idempotence(cfg),
      parseval(cfg, workers),
      coherence(cfg, workers),
      stats_recompute(cfg, workers),
  };
}

}  // namespace gmcsim::cli
