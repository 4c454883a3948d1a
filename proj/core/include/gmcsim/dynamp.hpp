#pragma once

#include <optional>
#include <string_view>
#include <variant>

#include "gmcsim/bias.hpp"
#include "gmcsim/devmodel.hpp"
#include "gmcsim/diffpair.hpp"

namespace gmcsim::dynamp {

using devmodel::DeviceParams;
using devmodel::Environment;

enum class Topology { traditional, proposed, linear };

std::string_view to_string(Topology topology);
std::optional<Topology> parse_topology(std::string_view name);

/// Device sizes of a pair; the tail current comes from the bias network at
/// evaluation time.
struct PairGeometry {
  double base_wl = 10.0;
  double m = 1.0;
  double n = 1.0;

  void validate() const;
  diffpair::DiffPairSpec with_tail(double iss) const { return {base_wl, m, n, iss}; }
};

/// Tail device gate driven from a resistive divider on the supply.
struct TraditionalBias {
  double gate_bias_fraction = 0.28;
  double tail_wl = 2.0;

  void validate() const;
};

/// Composite pair of two mirrored asymmetric pairs, each fed N*I from the
/// constant-gm loop.
struct ProposedDesign {
  PairGeometry pair_a{10.0, 5.4, 1.0};  // pair_b is its mirror
  bias::BiasSpec bias;
};

/// Single symmetric pair (m == n) with a supply-referenced tail.
struct TraditionalDesign {
  PairGeometry pair{150.0, 1.0, 1.0};
  TraditionalBias bias;
};

/// Ideal linear transconductor; environment independent. Used as the
/// distortion-free and drift-free reference stage.
struct LinearDesign {
  double gm = 1e-3;      // S
  double i_cm = 62.5e-6; // A per branch
};

struct AmpConfig {
  double cap_c = 17.77e-12;  // F per output
  double window_t = 250e-9;  // s
  /// Reset level of both outputs; empty means vdd of the evaluation
  /// environment.
  std::optional<double> vcm_out;
  std::variant<ProposedDesign, TraditionalDesign, LinearDesign> design;

  Topology topology() const;
  void validate() const;
  double reset_level(const Environment& env) const { return vcm_out.value_or(env.vdd); }
};

AmpConfig default_proposed();
AmpConfig default_traditional();
AmpConfig default_linear();

struct AmpSample {
  double vout_diff = 0.0;
  double vout_p = 0.0;
  double vout_n = 0.0;
  bool clipped = false;
};

/// Tail current of each input pair. Proposed: N*I from the constant-gm loop.
/// Traditional: square-law tail at Vg = gate_bias_fraction * vdd. Linear: 0.
double tail_current_of(const AmpConfig& cfg, const DeviceParams& params,
                       const Environment& env);

/// Differential output current at dvin (A).
double delta_id(const AmpConfig& cfg, double vin_diff, const DeviceParams& params,
                const Environment& env);

/// Small-signal transconductance at dvin = 0 (S).
double gm_at_zero(const AmpConfig& cfg, const DeviceParams& params,
                  const Environment& env);

/// One reset/amplify/sample cycle.
///
/// Both outputs start at the reset level and are discharged for window_t by
/// the drain currents of the opposite-side devices (M1, driven by vin+, pulls
/// on vout_n). Currents are static for a held input, so the ramp is exact and
/// the sample taken at the end of the window is
///   vout_n = Vreset - i_1 T / C,  vout_p = Vreset - i_2 T / C.
/// Outputs clamp to [0, vdd]; clipped reports whether either clamp engaged.
AmpSample amplify_once(const AmpConfig& cfg, double vin_diff,
                       const DeviceParams& params, const Environment& env);

/// vout_diff / vin_diff. Throws PreconditionError for vin_diff == 0.
double gain_at(const AmpConfig& cfg, double vin_diff, const DeviceParams& params,
               const Environment& env);

struct CalibrationOptions {
  double probe_vin = 1e-3;
  double rel_tolerance = 1e-6;
  int max_iterations = 100;
};

struct CalibrationResult {
  AmpConfig config;
  double scale;  // factor applied to R1 (proposed) or window_t (otherwise)
  double achieved_gain;
  int iterations;
};

/// Secant search on a scale factor for the bias resistor (proposed) or the
/// amplification window (traditional, linear) until gain_at(probe_vin) hits
/// target_gain. Throws ConvergenceError when the target is unreachable.
CalibrationResult calibrate_gain(const AmpConfig& cfg, double target_gain,
                                 const DeviceParams& params,
                                 const Environment& nominal_env,
                                 const CalibrationOptions& options = {});

}  // namespace gmcsim::dynamp
