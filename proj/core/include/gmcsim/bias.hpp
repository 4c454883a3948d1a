#pragma once

#include "gmcsim/devmodel.hpp"

namespace gmcsim::bias {

using devmodel::DeviceParams;
using devmodel::Environment;
using devmodel::ResistorSpec;

/// Constant-gm loop: M24 (narrow) and M25 (wide, source degenerated by R1)
/// carry the same current I; a mirror with gain N copies N*I into each tail.
struct BiasSpec {
  double wl_m24 = 4.0;
  double wl_m25 = 16.0;
  ResistorSpec resistor{5e3, 0.0, 300.0};
  double mirror_ratio_n = 7.0;

  void validate() const;
};

struct BiasSolution {
  double loop_current;  // I, A
  double gm_m24;        // S
  double tail_current;  // N * I, A
};

/// 2 (1 - sqrt(wl_m24 / wl_m25)) / R(T).
double gm_m24_formula(const BiasSpec& spec, const Environment& env);

/// Solves the loop KVL/square-law system for its nonzero operating point.
/// Throws ConvergenceError if the bracketed search fails.
BiasSolution solve_bias_loop(const BiasSpec& spec, const DeviceParams& params,
                             const Environment& env);

/// gm of an input device of size wl_m1 carrying split_fraction_m of N*I:
/// 2 sqrt(N m) sqrt(wl_m1 / wl_m24) (1 - sqrt(wl_m24 / wl_m25)) / R(T).
double gm_m1_formula(const BiasSpec& spec, double wl_m1, double split_fraction_m,
                     const Environment& env);

/// Lower end of the loop-current search; excludes the I = 0 equilibrium.
inline constexpr double kLoopCurrentFloor = 1e-12;

}  // namespace gmcsim::bias
