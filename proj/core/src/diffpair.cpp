#include "gmcsim/diffpair.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gmcsim/error.hpp"

namespace gmcsim::diffpair {

void DiffPairSpec::validate() const {
  if (!(base_wl > 0.0)) throw PreconditionError("diffpair: base_wl must be > 0");
  if (!(m > 0.0)) throw PreconditionError("diffpair: m must be > 0");
  if (!(n > 0.0)) throw PreconditionError("diffpair: n must be > 0");
  if (!(iss > 0.0)) throw PreconditionError("diffpair: iss must be > 0");
}

CompositePairSpec CompositePairSpec::mirrored(const DiffPairSpec& pair_a) {
  return CompositePairSpec(pair_a, pair_a.mirrored());
}

CompositePairSpec::CompositePairSpec(const DiffPairSpec& pair_a,
                                     const DiffPairSpec& pair_b)
    : a_(pair_a), b_(pair_b) {
  a_.validate();
  b_.validate();
  if (a_.base_wl != b_.base_wl)
    throw PreconditionError("composite pair: pairs must share base_wl");
  mirrored_ = b_.m == a_.n && b_.n == a_.m && b_.iss == a_.iss;
}

CompositePairSpec CompositePairSpec::with_tail(double iss) const {
  DiffPairSpec a = a_;
  DiffPairSpec b = b_;
  a.iss = iss;
  b.iss = iss;
  return CompositePairSpec(a, b);
}

CutoffBounds cutoff_bounds(const DiffPairSpec& spec, const DeviceParams& params,
                           const Environment& env) {
  const double beta = devmodel::kprime_at(params, env) * spec.base_wl;
  return {-std::sqrt(2.0 * spec.iss / (beta * spec.n)),
          std::sqrt(2.0 * spec.iss / (beta * spec.m))};
}

CurrentSplit solve_current_split(const DiffPairSpec& spec, double dvin,
                                 const DeviceParams& params,
                                 const Environment& env) {
  spec.validate();
  const CutoffBounds bounds = cutoff_bounds(spec, params, env);
  if (dvin >= bounds.hi) return {spec.iss, 0.0, Region::second_cutoff};
  if (dvin <= bounds.lo) return {0.0, spec.iss, Region::first_cutoff};

  // With a = k'(W/L)m/2, b = k'(W/L)n/2 and M1 overdrive v:
  //   a v^2 + b (v - dvin)^2 = iss,  v > max(0, dvin).
  const double beta = devmodel::kprime_at(params, env) * spec.base_wl;
  const double a = 0.5 * beta * spec.m;
  const double b = 0.5 * beta * spec.n;
  const double radicand = (a + b) * spec.iss - a * b * dvin * dvin;
  const double v1 = (b * dvin + std::sqrt(radicand)) / (a + b);
  const double id1 = std::clamp(a * v1 * v1, 0.0, spec.iss);
  return {id1, spec.iss - id1, Region::both_on};
}

double gm_asymmetric(const DiffPairSpec& spec, double dvin,
                     const DeviceParams& params, const Environment& env) {
  spec.validate();
  const CutoffBounds bounds = cutoff_bounds(spec, params, env);
  if (dvin >= bounds.hi || dvin <= bounds.lo) return 0.0;

  const double beta = devmodel::kprime_at(params, env) * spec.base_wl;
  const double m = spec.m;
  const double n = spec.n;
  const double mn = m * n;
  const double sum = n + m;
  const double dv2 = dvin * dvin;

  const double p = -2.0 * beta * mn * (m - n) * dvin;
  const double radicand = sum * spec.iss - 0.5 * beta * mn * dv2;
  if (radicand < 0.0)
    throw DomainError("gm_asymmetric: negative radicand inside conduction window");
  const double q = (sum * spec.iss - beta * mn * dv2) / std::sqrt(radicand);
  return (p + 4.0 * mn * std::sqrt(0.5 * beta) * q) / (sum * sum);
}

double gm_symmetric(const DiffPairSpec& spec, double dvin,
                    const DeviceParams& params, const Environment& env) {
  if (!spec.symmetric())
    throw PreconditionError("gm_symmetric: requires m == n");
  return gm_asymmetric(spec, dvin, params, env);
}

double gm_composite(const CompositePairSpec& spec, double dvin,
                    const DeviceParams& params, const Environment& env) {
  // A mirrored pair_b at dvin is pair_a at -dvin with the devices swapped;
  // evaluating it that way makes the even symmetry exact in floating point.
  if (spec.is_mirrored())
    return gm_asymmetric(spec.pair_a(), dvin, params, env) +
           gm_asymmetric(spec.pair_a(), -dvin, params, env);
  return gm_asymmetric(spec.pair_a(), dvin, params, env) +
         gm_asymmetric(spec.pair_b(), dvin, params, env);
}

CompositeBranches composite_branches(const CompositePairSpec& spec, double dvin,
                                     const DeviceParams& params, const Environment& env) {
  const auto a = solve_current_split(spec.pair_a(), dvin, params, env);
  if (spec.is_mirrored()) {
    const auto b = solve_current_split(spec.pair_a(), -dvin, params, env);
    return {a.id1 + b.id2, a.id2 + b.id1};
  }
  const auto b = solve_current_split(spec.pair_b(), dvin, params, env);
  return {a.id1 + b.id1, a.id2 + b.id2};
}

double delta_id_composite(const CompositePairSpec& spec, double dvin,
                          const DeviceParams& params, const Environment& env) {
  return composite_branches(spec, dvin, params, env).delta();
}

void RatioGrid::validate() const {
  if (!(ratio_min >= 1.0) || !(ratio_max <= 20.0) || !(ratio_min <= ratio_max))
    throw PreconditionError("flatness: ratio bounds must satisfy 1 <= min <= max <= 20");
  if (n_ratios < 1) throw PreconditionError("flatness: n_ratios must be >= 1");
  if (n_ratios == 1 && ratio_min != ratio_max)
    throw PreconditionError("flatness: a single ratio point needs min == max");
  if (n_samples < 101) throw PreconditionError("flatness: n_samples must be >= 101");
}

std::vector<double> RatioGrid::ratios() const {
  std::vector<double> out(static_cast<std::size_t>(n_ratios));
  if (n_ratios == 1) {
    out[0] = ratio_min;
    return out;
  }
  const double lmin = std::log(ratio_min);
  const double lmax = std::log(ratio_max);
  for (int i = 0; i < n_ratios; ++i)
    out[i] = std::exp(lmin + (lmax - lmin) * i / (n_ratios - 1));
  out.front() = ratio_min;
  out.back() = ratio_max;
  return out;
}

double composite_ripple(const CompositePairSpec& spec, double window,
                        int n_samples, const DeviceParams& params,
                        const Environment& env) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double x = -window + 2.0 * window * i / (n_samples - 1);
    const double g = gm_composite(spec, x, params, env);
    lo = std::min(lo, g);
    hi = std::max(hi, g);
    sum += g;
  }
  const double mean = sum / n_samples;
  if (!(mean > 0.0)) return std::numeric_limits<double>::infinity();
  return (hi - lo) / mean;
}

FlatnessResult optimize_flatness(const DiffPairSpec& base_spec, double window,
                                 const RatioGrid& grid,
                                 const DeviceParams& params,
                                 const Environment& env) {
  base_spec.validate();
  grid.validate();
  if (!(window >= 0.0)) throw PreconditionError("flatness: window must be >= 0");

  const auto make = [&](double ratio) {
    DiffPairSpec a = base_spec;
    a.n = base_spec.n;
    a.m = ratio * base_spec.n;
    return CompositePairSpec::mirrored(a);
  };

  const std::vector<double> ratios = grid.ratios();
  FlatnessResult best{make(ratios.front()), ratios.front(),
                      std::numeric_limits<double>::infinity()};
  for (double ratio : ratios) {
    CompositePairSpec candidate = make(ratio);
    const double ripple = composite_ripple(candidate, window, grid.n_samples, params, env);
    if (ripple < best.ripple) best = {candidate, ratio, ripple};
  }
  return best;
}

}  // namespace gmcsim::diffpair
