#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmcsim/dynamp.hpp"

namespace gmcsim::analysis {

using devmodel::DeviceParams;
using devmodel::Environment;
using dynamp::AmpConfig;

/// Stand-in for vin = 0 in gain columns.
inline constexpr double kSmallSignalProbe = 1e-6;

struct SweepCurve {
  std::vector<double> inputs;   // V, strictly increasing
  std::vector<double> outputs;  // V
  std::vector<double> gains;
  std::vector<bool> clipped;
  dynamp::Topology topology = dynamp::Topology::proposed;
  Environment env;
  std::string fingerprint;  // filled by the caller
};

/// DC transfer and chord gain over an inclusive linear grid.
SweepCurve transfer_sweep(const AmpConfig& cfg, double v_start, double v_stop,
                          int n_points, const DeviceParams& params,
                          const Environment& env, unsigned workers = 1);

/// max(gain) - min(gain) over mean(gain), on the points of `curve` with
/// |vin| <= half_range.
double gain_ripple(const SweepCurve& curve, double half_range);

struct ThdOptions {
  double amplitude = 0.06;   // V
  int cycles_in_record = 3;
  int n_samples = 1024;
  int harmonics = 9;         // highest harmonic index H
  double clock_hz = 2e6;     // one amplification cycle per sample
  bool strict = false;       // clipping is an error
};

struct Spectrum {
  std::vector<double> samples;       // vout_diff per cycle
  std::vector<double> bin_freqs;     // Hz, bins 0..N/2
  std::vector<double> magnitudes;    // |X_k|, bins 0..N/2
  std::vector<double> magnitudes_db; // dB relative to the fundamental
  std::size_t fundamental_bin = 0;
  std::vector<std::size_t> harmonic_bins;  // folded, h = 2..H, unique
  double thd_db = 0.0;    // 10 log10(P_fund / sum P_harm); +inf when harmonics vanish
  double thd_n_db = 0.0;  // fundamental over every other non-DC bin
  bool below_floor = false;
  bool clipped = false;
  std::size_t n_samples = 0;

  /// Power of bin k of the one-sided spectrum relative to the fundamental.
  double relative_power_db(std::size_t k) const;
};

/// Harmonic power more than this far below the fundamental is numerical
/// noise for a double-precision record.
inline constexpr double kThdFloorDb = 200.0;
/// Floor used when a bin is exactly zero.
inline constexpr double kZeroBinDb = -400.0;

/// Coherent single-tone THD measurement: vin[k] = A sin(2 pi c k / N), one
/// amplify_once per sample, rectangular window.
Spectrum thd_run(const AmpConfig& cfg, const ThdOptions& options,
                 const DeviceParams& params, const Environment& env,
                 unsigned workers = 1);

/// THD of an arbitrary record; shares the bin bookkeeping with thd_run.
Spectrum analyze_record(std::span<const double> samples, int cycles_in_record,
                        int harmonics, double clock_hz);

/// |sum |X_k|^2 / N - sum x_n^2| / sum x_n^2 for the full DFT of samples.
double parseval_relative_error(std::span<const double> samples);

struct GainStats {
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Population statistics with compensated sums; throws PreconditionError on
/// empty input. Non-finite cells are skipped.
GainStats gain_stats(std::span<const double> gains);

struct CornerSpec {
  double t_start = 233.15;  // K
  double t_stop = 393.15;   // K
  int n_t = 9;
  double vdd_nominal = 5.0;
  double vdd_frac = 0.1;
  int n_v = 5;
  double probe_vin = 1e-3;
  bool strict = true;

  void validate() const;
  std::vector<double> temps() const;
  std::vector<double> vdds() const;
};

struct CornerGrid {
  std::vector<double> temps;  // K, ascending
  std::vector<double> vdds;   // V, ascending
  std::vector<double> gains;  // row-major: gains[i * vdds.size() + j]
  GainStats stats;
  std::vector<std::string> errors;  // non-strict mode: failing cells
  dynamp::Topology topology = dynamp::Topology::proposed;

  double at(std::size_t ti, std::size_t vi) const { return gains[ti * vdds.size() + vi]; }
};

CornerGrid corner_sweep(const AmpConfig& cfg, const CornerSpec& spec,
                        const DeviceParams& params, unsigned workers = 1);

/// Inclusive linear grid with exact endpoints.
std::vector<double> linspace(double start, double stop, int n);

}  // namespace gmcsim::analysis
