#pragma once

// Square-law NMOS and linear-tempco resistor models. Everything downstream
// evaluates devices through these functions so that temperature and supply
// dependence lives in exactly one place.

namespace gmcsim::devmodel {

inline constexpr double kZeroCelsius = 273.15;

/// Square-law device parameters. kprime is the product mobility * Cox;
/// only the product ever appears in the current equations.
struct DeviceParams {
  double kprime_nominal = 300e-6;  // A/V^2 at t_ref
  double vth_nominal = 0.7;        // V at t_ref
  double t_ref = 300.0;            // K
  double mobility_exponent = 1.5;  // mu ~ (T/t_ref)^-alpha
  double vth_tempco = -1e-3;       // V/K

  void validate() const;
};

/// Operating point: absolute temperature and supply.
struct Environment {
  double temperature = 300.15;  // K
  double vdd = 5.0;             // V

  static Environment from_celsius(double temp_c, double vdd);
  double celsius() const { return temperature - kZeroCelsius; }
  void validate() const;
};

struct ResistorSpec {
  double r_nominal = 10e3;  // ohm at t_ref
  double tempco = 0.0;      // 1/K
  double t_ref = 300.0;     // K

  void validate() const;
};

double kprime_at(const DeviceParams& params, const Environment& env);
double vth_at(const DeviceParams& params, const Environment& env);

/// Saturation current (k'/2)(W/L)(Vgs - Vth)^2, zero at and below threshold.
double drain_current_sat(const DeviceParams& params, double wl, double vgs,
                         const Environment& env);

/// r_nominal * (1 + tempco * (T - t_ref)). Throws ConfigurationError when the
/// result is not positive.
double resistance_at(const ResistorSpec& spec, const Environment& env);

/// Rejects resistor specs that reach R <= 0 anywhere in [t_lo, t_hi] (K).
void check_resistor_range(const ResistorSpec& spec, double t_lo, double t_hi);

}  // namespace gmcsim::devmodel
