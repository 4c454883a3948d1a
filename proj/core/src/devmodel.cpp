#include "gmcsim/devmodel.hpp"

#include <cmath>
#include <sstream>

#include "gmcsim/error.hpp"

namespace gmcsim::devmodel {

void DeviceParams::validate() const {
  if (!(kprime_nominal > 0.0) || !std::isfinite(kprime_nominal))
    throw PreconditionError("device: kprime_nominal must be > 0");
  if (!(t_ref > 0.0)) throw PreconditionError("device: t_ref must be > 0");
  if (!(mobility_exponent >= 0.0))
    throw PreconditionError("device: mobility_exponent must be >= 0");
  if (!std::isfinite(vth_nominal) || !std::isfinite(vth_tempco))
    throw PreconditionError("device: vth fields must be finite");
}

Environment Environment::from_celsius(double temp_c, double vdd) {
  return Environment{temp_c + kZeroCelsius, vdd};
}

void Environment::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw PreconditionError("environment: temperature must be > 0 K");
  if (!(vdd > 0.0) || !std::isfinite(vdd))
    throw PreconditionError("environment: vdd must be > 0");
}

void ResistorSpec::validate() const {
  if (!(r_nominal > 0.0)) throw PreconditionError("resistor: r_nominal must be > 0");
  if (!(t_ref > 0.0)) throw PreconditionError("resistor: t_ref must be > 0");
  if (!std::isfinite(tempco)) throw PreconditionError("resistor: tempco must be finite");
}

double kprime_at(const DeviceParams& params, const Environment& env) {
  if (params.mobility_exponent == 0.0) return params.kprime_nominal;
  return params.kprime_nominal *
         std::pow(env.temperature / params.t_ref, -params.mobility_exponent);
}

double vth_at(const DeviceParams& params, const Environment& env) {
  return params.vth_nominal + params.vth_tempco * (env.temperature - params.t_ref);
}

double drain_current_sat(const DeviceParams& params, double wl, double vgs,
                         const Environment& env) {
  if (!(wl > 0.0)) throw PreconditionError("drain_current_sat: wl must be > 0");
  const double vov = vgs - vth_at(params, env);
  if (vov <= 0.0) return 0.0;
  return 0.5 * kprime_at(params, env) * wl * vov * vov;
}

double resistance_at(const ResistorSpec& spec, const Environment& env) {
  const double r = spec.r_nominal * (1.0 + spec.tempco * (env.temperature - spec.t_ref));
  if (!(r > 0.0)) {
    std::ostringstream msg;
    msg << "resistor: resistance " << r << " ohm at T=" << env.temperature
        << " K is not positive";
    throw ConfigurationError(msg.str());
  }
  return r;
}

void check_resistor_range(const ResistorSpec& spec, double t_lo, double t_hi) {
  // Linear in T, so the endpoints bound the whole interval.
  resistance_at(spec, Environment{t_lo, 1.0});
  resistance_at(spec, Environment{t_hi, 1.0});
}

}  // namespace gmcsim::devmodel
