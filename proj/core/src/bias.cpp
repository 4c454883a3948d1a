#include "gmcsim/bias.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstdint>

#include "gmcsim/error.hpp"

namespace gmcsim::bias {

void BiasSpec::validate() const {
  if (!(wl_m24 > 0.0)) throw PreconditionError("bias: wl_m24 must be > 0");
  if (!(wl_m25 > wl_m24))
    throw PreconditionError("bias: wl_m25 must be larger than wl_m24");
  if (!(mirror_ratio_n > 0.0)) throw PreconditionError("bias: mirror_ratio_n must be > 0");
  resistor.validate();
}

double gm_m24_formula(const BiasSpec& spec, const Environment& env) {
  spec.validate();
  const double r = devmodel::resistance_at(spec.resistor, env);
  return 2.0 * (1.0 - std::sqrt(spec.wl_m24 / spec.wl_m25)) / r;
}

BiasSolution solve_bias_loop(const BiasSpec& spec, const DeviceParams& params,
                             const Environment& env) {
  spec.validate();
  const double kp = devmodel::kprime_at(params, env);
  const double vth = devmodel::vth_at(params, env);
  const double r = devmodel::resistance_at(spec.resistor, env);

  // VGS24 - VGS25 - I R, with each VGS from inverting the square law. VTH
  // cancels analytically but is kept so the residual reads as the circuit.
  const auto residual = [&](double current) {
    const double vgs24 = vth + std::sqrt(2.0 * current / (kp * spec.wl_m24));
    const double vgs25 = vth + std::sqrt(2.0 * current / (kp * spec.wl_m25));
    return (vgs24 - vgs25) - current * r;
  };

  const double lo = kLoopCurrentFloor;
  if (!(residual(lo) > 0.0))
    throw ConvergenceError("bias loop: only the I = 0 equilibrium solves the loop");

  double hi = 1e-3;
  int expansions = 0;
  while (residual(hi) > 0.0) {
    hi *= 4.0;
    if (++expansions > 40)
      throw ConvergenceError("bias loop: could not bracket the operating point");
  }

  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      residual, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  if (max_iter >= 200)
    throw ConvergenceError("bias loop: root finder exhausted its iterations");

  const double current = 0.5 * (a + b);
  const double gm = std::sqrt(2.0 * kp * spec.wl_m24 * current);
  return {current, gm, spec.mirror_ratio_n * current};
}

double gm_m1_formula(const BiasSpec& spec, double wl_m1, double split_fraction_m,
                     const Environment& env) {
  spec.validate();
  if (!(split_fraction_m > 0.0 && split_fraction_m < 1.0))
    throw PreconditionError("gm_m1_formula: split fraction must lie in (0, 1)");
  if (!(wl_m1 > 0.0)) throw PreconditionError("gm_m1_formula: wl_m1 must be > 0");
  const double r = devmodel::resistance_at(spec.resistor, env);
  return 2.0 * std::sqrt(spec.mirror_ratio_n * split_fraction_m) *
         std::sqrt(wl_m1 / spec.wl_m24) *
         (1.0 - std::sqrt(spec.wl_m24 / spec.wl_m25)) / r;
}

}  // namespace gmcsim::bias
