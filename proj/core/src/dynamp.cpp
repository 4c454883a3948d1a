#include "gmcsim/dynamp.hpp"

#include <algorithm>
#include <cmath>

#include "gmcsim/error.hpp"

namespace gmcsim::dynamp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct BranchCurrents {
  double i1;  // vin+ side devices, discharges vout_n
  double i2;  // vin- side devices, discharges vout_p
  double delta;
};

BranchCurrents branch_currents(const AmpConfig& cfg, double vin,
                               const DeviceParams& params, const Environment& env) {
  return std::visit(
      Overloaded{
          [&](const ProposedDesign& d) {
            const double tail = tail_current_of(cfg, params, env);
            const auto pair = diffpair::CompositePairSpec::mirrored(d.pair_a.with_tail(tail));
            const auto br = diffpair::composite_branches(pair, vin, params, env);
            return BranchCurrents{br.vin_plus, br.vin_minus, br.delta()};
          },
          [&](const TraditionalDesign& d) {
            const double tail = tail_current_of(cfg, params, env);
            const auto s = diffpair::solve_current_split(d.pair.with_tail(tail), vin, params, env);
            return BranchCurrents{s.id1, s.id2, s.delta()};
          },
          [&](const LinearDesign& d) {
            const double half = 0.5 * d.gm * vin;
            return BranchCurrents{d.i_cm + half, d.i_cm - half, d.gm * vin};
          },
      },
      cfg.design);
}

AmpConfig scaled(const AmpConfig& cfg, double scale) {
  AmpConfig out = cfg;
  if (auto* p = std::get_if<ProposedDesign>(&out.design))
    p->bias.resistor.r_nominal *= scale;
  else
    out.window_t *= scale;
  return out;
}

}  // namespace

std::string_view to_string(Topology topology) {
  switch (topology) {
    case Topology::traditional: return "traditional";
    case Topology::proposed: return "proposed";
    case Topology::linear: return "linear";
  }
  return "unknown";
}

std::optional<Topology> parse_topology(std::string_view name) {
  if (name == "traditional") return Topology::traditional;
  if (name == "proposed") return Topology::proposed;
  if (name == "linear") return Topology::linear;
  return std::nullopt;
}

void PairGeometry::validate() const { with_tail(1.0).validate(); }

void TraditionalBias::validate() const {
  if (!(gate_bias_fraction > 0.0 && gate_bias_fraction < 1.0))
    throw PreconditionError("traditional bias: gate_bias_fraction must lie in (0, 1)");
  if (!(tail_wl > 0.0)) throw PreconditionError("traditional bias: tail_wl must be > 0");
}

Topology AmpConfig::topology() const {
  return std::visit(Overloaded{
                        [](const ProposedDesign&) { return Topology::proposed; },
                        [](const TraditionalDesign&) { return Topology::traditional; },
                        [](const LinearDesign&) { return Topology::linear; },
                    },
                    design);
}

void AmpConfig::validate() const {
  if (!(cap_c > 0.0)) throw PreconditionError("amp: cap_c must be > 0");
  if (!(window_t > 0.0)) throw PreconditionError("amp: window_t must be > 0");
  if (vcm_out && !std::isfinite(*vcm_out))
    throw PreconditionError("amp: vcm_out must be finite");
  std::visit(Overloaded{
                 [](const ProposedDesign& d) {
                   d.pair_a.validate();
                   d.bias.validate();
                 },
                 [](const TraditionalDesign& d) {
                   d.pair.validate();
                   if (d.pair.m != d.pair.n)
                     throw PreconditionError("amp: traditional pair must be symmetric (m == n)");
                   d.bias.validate();
                 },
                 [](const LinearDesign& d) {
                   if (!(d.gm > 0.0)) throw PreconditionError("amp: linear gm must be > 0");
                   if (!(d.i_cm >= 0.0)) throw PreconditionError("amp: linear i_cm must be >= 0");
                 },
             },
             design);
}

AmpConfig default_proposed() {
  AmpConfig cfg;
  cfg.cap_c = 17.77e-12;
  cfg.window_t = 250e-9;
  cfg.design = ProposedDesign{};
  return cfg;
}

AmpConfig default_traditional() {
  AmpConfig cfg;
  cfg.cap_c = 40e-12;
  cfg.window_t = 250e-9;
  cfg.design = TraditionalDesign{};
  return cfg;
}

AmpConfig default_linear() {
  AmpConfig cfg;
  cfg.cap_c = 15.625e-12;
  cfg.window_t = 250e-9;
  cfg.design = LinearDesign{};
  return cfg;
}

double tail_current_of(const AmpConfig& cfg, const DeviceParams& params,
                       const Environment& env) {
  return std::visit(
      Overloaded{
          [&](const ProposedDesign& d) {
            return bias::solve_bias_loop(d.bias, params, env).tail_current;
          },
          [&](const TraditionalDesign& d) {
            const double vg = d.bias.gate_bias_fraction * env.vdd;
            const double tail = devmodel::drain_current_sat(params, d.bias.tail_wl, vg, env);
            if (!(tail > 0.0))
              throw ConfigurationError("traditional bias: tail device is cut off");
            return tail;
          },
          [](const LinearDesign&) { return 0.0; },
      },
      cfg.design);
}

double delta_id(const AmpConfig& cfg, double vin_diff, const DeviceParams& params,
                const Environment& env) {
  return branch_currents(cfg, vin_diff, params, env).delta;
}

double gm_at_zero(const AmpConfig& cfg, const DeviceParams& params,
                  const Environment& env) {
  return std::visit(
      Overloaded{
          [&](const ProposedDesign& d) {
            const double tail = tail_current_of(cfg, params, env);
            return diffpair::gm_composite(
                diffpair::CompositePairSpec::mirrored(d.pair_a.with_tail(tail)), 0.0, params,
                env);
          },
          [&](const TraditionalDesign& d) {
            const double tail = tail_current_of(cfg, params, env);
            return diffpair::gm_symmetric(d.pair.with_tail(tail), 0.0, params, env);
          },
          [](const LinearDesign& d) { return d.gm; },
      },
      cfg.design);
}

AmpSample amplify_once(const AmpConfig& cfg, double vin_diff,
                       const DeviceParams& params, const Environment& env) {
  const BranchCurrents i = branch_currents(cfg, vin_diff, params, env);
  const double k = cfg.window_t / cfg.cap_c;
  const double reset = cfg.reset_level(env);

  const double raw_n = reset - i.i1 * k;
  const double raw_p = reset - i.i2 * k;
  AmpSample s;
  s.vout_n = std::clamp(raw_n, 0.0, env.vdd);
  s.vout_p = std::clamp(raw_p, 0.0, env.vdd);
  s.clipped = s.vout_n != raw_n || s.vout_p != raw_p;
  // Unclipped, use the differential current directly: it avoids cancelling
  // two rail-sized node voltages.
  s.vout_diff = s.clipped ? s.vout_p - s.vout_n : i.delta * k;
  return s;
}

double gain_at(const AmpConfig& cfg, double vin_diff, const DeviceParams& params,
               const Environment& env) {
  if (vin_diff == 0.0) throw PreconditionError("gain_at: vin_diff must be nonzero");
  return amplify_once(cfg, vin_diff, params, env).vout_diff / vin_diff;
}

CalibrationResult calibrate_gain(const AmpConfig& cfg, double target_gain,
                                 const DeviceParams& params,
                                 const Environment& nominal_env,
                                 const CalibrationOptions& options) {
  if (!(target_gain > 0.0)) throw PreconditionError("calibrate_gain: target must be > 0");
  cfg.validate();
  const bool scales_resistor = cfg.topology() == Topology::proposed;

  const auto gain_for = [&](double scale) {
    return gain_at(scaled(cfg, scale), options.probe_vin, params, nominal_env);
  };
  const auto converged = [&](double gain) {
    return std::abs(gain - target_gain) <= options.rel_tolerance * target_gain;
  };

  double s0 = 1.0;
  double g0 = gain_for(s0);
  if (converged(g0)) return {cfg, 1.0, g0, 0};
  if (!(g0 > 0.0))
    throw ConvergenceError("calibrate_gain: starting gain is not positive");

  // Gain goes as 1/R for the proposed amplifier and as T otherwise, so the
  // first step is the proportional guess; the secant takes over from there.
  double s1 = scales_resistor ? g0 / target_gain : target_gain / g0;
  double g1 = gain_for(s1);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    if (converged(g1)) return {scaled(cfg, s1), s1, g1, iter};
    if (!std::isfinite(g1) || g1 == g0)
      throw ConvergenceError("calibrate_gain: gain stopped responding (clipping?)");
    double s2 = s1 - (g1 - target_gain) * (s1 - s0) / (g1 - g0);
    if (!(s2 > 0.0) || !std::isfinite(s2)) s2 = 0.5 * s1;
    s0 = s1;
    g0 = g1;
    s1 = s2;
    g1 = gain_for(s1);
  }
  throw ConvergenceError("calibrate_gain: no convergence after " +
                         std::to_string(options.max_iterations) + " iterations");
}

}  // namespace gmcsim::dynamp
