#pragma once

#include <vector>

#include "gmcsim/devmodel.hpp"

namespace gmcsim::diffpair {

using devmodel::DeviceParams;
using devmodel::Environment;

/// Source-coupled pair with M1 = m*(W/L) and M2 = n*(W/L) sharing tail iss.
/// dvin is the gate-to-gate difference Vg1 - Vg2 and the output is
/// delta_id = id1 - id2.
struct DiffPairSpec {
  double base_wl = 10.0;
  double m = 1.0;
  double n = 1.0;
  double iss = 100e-6;  // A

  void validate() const;
  bool symmetric() const { return m == n; }
  /// Share of the tail carried by M1 at dvin = 0, m / (m + n).
  double split_fraction() const { return m / (m + n); }
  /// The same pair with M1 and M2 exchanged.
  DiffPairSpec mirrored() const { return {base_wl, n, m, iss}; }
};

/// Two pairs summed into shared output branches.
///
/// Wiring: pair_a's M1 and pair_b's M1 both take vin+ and their drains
/// share one branch; the M2 devices take vin- and share the other. With
/// pair_b = pair_a.mirrored() the wide device of one pair faces the narrow
/// device of the other, so each addend sees the same dvin in its own (m, n)
/// frame and the sum is odd in dvin.
class CompositePairSpec {
 public:
  /// Standard construction: pair_b is the exact mirror of pair_a.
  static CompositePairSpec mirrored(const DiffPairSpec& pair_a);
  /// Arbitrary pairs (must share base_wl). is_mirrored() reports whether the
  /// pair happens to be an exact mirror.
  CompositePairSpec(const DiffPairSpec& pair_a, const DiffPairSpec& pair_b);

  const DiffPairSpec& pair_a() const { return a_; }
  const DiffPairSpec& pair_b() const { return b_; }
  bool is_mirrored() const { return mirrored_; }
  /// Both tails replaced by iss (the proposed amplifier feeds both from
  /// identical mirrored current sources).
  CompositePairSpec with_tail(double iss) const;

 private:
  DiffPairSpec a_;
  DiffPairSpec b_;
  bool mirrored_;
};

enum class Region { both_on, first_cutoff, second_cutoff };

struct CurrentSplit {
  double id1 = 0.0;
  double id2 = 0.0;
  Region region = Region::both_on;

  double delta() const { return id1 - id2; }
};

/// Conduction window (lo, hi) in dvin. Outside it one device carries the
/// whole tail: hi = sqrt(2 iss / (k' W/L m)), lo = -sqrt(2 iss / (k' W/L n)).
struct CutoffBounds {
  double lo;
  double hi;
};

CutoffBounds cutoff_bounds(const DiffPairSpec& spec, const DeviceParams& params,
                           const Environment& env);

CurrentSplit solve_current_split(const DiffPairSpec& spec, double dvin,
                                 const DeviceParams& params,
                                 const Environment& env);

/// Closed-form dDeltaId/dDvin of the asymmetric pair, zero in cutoff.
double gm_asymmetric(const DiffPairSpec& spec, double dvin,
                     const DeviceParams& params, const Environment& env);

/// gm_asymmetric restricted to m == n; throws PreconditionError otherwise.
double gm_symmetric(const DiffPairSpec& spec, double dvin,
                    const DeviceParams& params, const Environment& env);

double gm_composite(const CompositePairSpec& spec, double dvin,
                    const DeviceParams& params, const Environment& env);

/// Summed drain currents of the two shared output branches: `vin_plus`
/// collects both devices driven by vin+, `vin_minus` the other two.
struct CompositeBranches {
  double vin_plus = 0.0;
  double vin_minus = 0.0;
  double delta() const { return vin_plus - vin_minus; }
};
/// Branch currents of the composite. For a mirrored composite, a swap of the
/// input polarity swaps the two branches exactly.
CompositeBranches composite_branches(const CompositePairSpec& spec, double dvin,
                                     const DeviceParams& params, const Environment& env);
double delta_id_composite(const CompositePairSpec& spec, double dvin,
                          const DeviceParams& params, const Environment& env);

struct RatioGrid {
  double ratio_min = 1.0;
  double ratio_max = 20.0;
  int n_ratios = 200;  // log-spaced
  int n_samples = 101; // dvin samples across the window

  void validate() const;
  std::vector<double> ratios() const;
};

struct FlatnessResult {
  CompositePairSpec spec;
  double ratio;   // m / n of pair_a
  double ripple;  // (max Gm - min Gm) / mean Gm over [-window, window]
};

/// Ripple of gm_composite sampled at n_samples equispaced points on
/// [-window, window].
double composite_ripple(const CompositePairSpec& spec, double window,
                        int n_samples, const DeviceParams& params,
                        const Environment& env);

/// Exhaustive search over ratio = m / n with n held at base_spec.n and
/// m = ratio * n; returns the mirrored composite with the lowest ripple.
/// Ties resolve to the smallest ratio.
FlatnessResult optimize_flatness(const DiffPairSpec& base_spec, double window,
                                 const RatioGrid& grid,
                                 const DeviceParams& params,
                                 const Environment& env);

}  // namespace gmcsim::diffpair
