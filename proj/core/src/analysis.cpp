#include "gmcsim/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "gmcsim/error.hpp"
#include "gmcsim/parallel.hpp"

namespace gmcsim::analysis {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

bool is_power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }

// The FFTW planner is not reentrant; plans are cheap at these sizes, so each
// transform plans, runs and frees under one lock.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> dft(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(x.size());
  std::lock_guard lock(fftw_mutex());
  fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                                    reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_FORWARD, FFTW_ESTIMATE);
  if (plan == nullptr) throw Error("fft: planner failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  return out;
}

std::size_t fold(long long bin, long long n) {
  bin %= n;
  if (bin > n / 2) bin = n - bin;
  return static_cast<std::size_t>(bin);
}

}  // namespace

std::vector<double> linspace(double start, double stop, int n) {
  if (n < 1) throw PreconditionError("linspace: n must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = start;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = start + (stop - start) * i / (n - 1);
  out.back() = stop;
  return out;
}

SweepCurve transfer_sweep(const AmpConfig& cfg, double v_start, double v_stop,
                          int n_points, const DeviceParams& params,
                          const Environment& env, unsigned workers) {
  if (!(v_start < v_stop)) throw PreconditionError("transfer_sweep: v_start must be < v_stop");
  if (n_points < 2) throw PreconditionError("transfer_sweep: n_points must be >= 2");
  cfg.validate();
  params.validate();
  env.validate();

  SweepCurve curve;
  curve.inputs = linspace(v_start, v_stop, n_points);
  curve.outputs.resize(curve.inputs.size());
  curve.gains.resize(curve.inputs.size());
  std::vector<char> clipped(curve.inputs.size(), 0);
  curve.topology = cfg.topology();
  curve.env = env;

  parallel_for(curve.inputs.size(), workers, [&](std::size_t i) {
    const double vin = curve.inputs[i];
    const dynamp::AmpSample s = dynamp::amplify_once(cfg, vin, params, env);
    curve.outputs[i] = s.vout_diff;
    clipped[i] = s.clipped;
    curve.gains[i] = vin == 0.0 ? dynamp::gain_at(cfg, kSmallSignalProbe, params, env)
                                : s.vout_diff / vin;
  });
  curve.clipped.assign(clipped.begin(), clipped.end());
  return curve;
}

double gain_ripple(const SweepCurve& curve, double half_range) {
  std::vector<double> in_range;
  for (std::size_t i = 0; i < curve.inputs.size(); ++i)
    if (std::abs(curve.inputs[i]) <= half_range) in_range.push_back(curve.gains[i]);
  if (in_range.empty()) throw PreconditionError("gain_ripple: no points inside the range");
  const GainStats s = gain_stats(in_range);
  return (s.max - s.min) / s.mean;
}

double Spectrum::relative_power_db(std::size_t k) const { return magnitudes_db.at(k); }

Spectrum analyze_record(std::span<const double> samples, int cycles_in_record,
                        int harmonics, double clock_hz) {
  const auto n = static_cast<long long>(samples.size());
  if (!is_power_of_two(n) || n < 4)
    throw PreconditionError("thd: n_samples must be a power of two >= 4");
  if (cycles_in_record <= 0 || cycles_in_record >= n / 2)
    throw PreconditionError("thd: cycles_in_record must lie in (0, n_samples/2)");
  if (std::gcd(static_cast<long long>(cycles_in_record), n) != 1)
    throw PreconditionError("thd: cycles_in_record and n_samples must be coprime");
  if (harmonics < 2 || harmonics >= n / 2)
    throw PreconditionError("thd: harmonics must lie in [2, n_samples/2)");
  if (!(clock_hz > 0.0)) throw PreconditionError("thd: clock_hz must be > 0");

  const auto x = dft(samples);
  const std::size_t half = static_cast<std::size_t>(n / 2);

  Spectrum s;
  s.samples.assign(samples.begin(), samples.end());
  s.n_samples = samples.size();
  s.fundamental_bin = static_cast<std::size_t>(cycles_in_record);
  s.bin_freqs.resize(half + 1);
  s.magnitudes.resize(half + 1);
  s.magnitudes_db.resize(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    s.bin_freqs[k] = clock_hz * static_cast<double>(k) / static_cast<double>(n);
    s.magnitudes[k] = std::abs(x[k]);
  }

  const double fund = s.magnitudes[s.fundamental_bin];
  for (std::size_t k = 0; k <= half; ++k) {
    const double m = s.magnitudes[k];
    s.magnitudes_db[k] = (m == 0.0 || fund == 0.0) ? kZeroBinDb : 20.0 * std::log10(m / fund);
  }

  std::set<std::size_t> bins;
  for (int h = 2; h <= harmonics; ++h) {
    const std::size_t b = fold(static_cast<long long>(h) * cycles_in_record, n);
    if (b != 0 && b != s.fundamental_bin) bins.insert(b);
  }
  s.harmonic_bins.assign(bins.begin(), bins.end());

  const double p_fund = fund * fund;
  CompensatedSum p_harm;
  for (std::size_t b : s.harmonic_bins) p_harm.add(s.magnitudes[b] * s.magnitudes[b]);
  CompensatedSum p_rest;
  for (std::size_t k = 1; k <= half; ++k)
    if (k != s.fundamental_bin) p_rest.add(s.magnitudes[k] * s.magnitudes[k]);

  const auto ratio_db = [&](double p) {
    return p > 0.0 ? 10.0 * std::log10(p_fund / p) : std::numeric_limits<double>::infinity();
  };
  s.thd_db = ratio_db(p_harm.value());
  s.thd_n_db = ratio_db(p_rest.value());
  s.below_floor = !(s.thd_db <= kThdFloorDb);
  return s;
}

Spectrum thd_run(const AmpConfig& cfg, const ThdOptions& options,
                 const DeviceParams& params, const Environment& env,
                 unsigned workers) {
  const auto n = static_cast<long long>(options.n_samples);
  if (!is_power_of_two(n)) throw PreconditionError("thd: n_samples must be a power of two");
  if (options.cycles_in_record <= 0 ||
      std::gcd(static_cast<long long>(options.cycles_in_record), n) != 1)
    throw PreconditionError("thd: cycles_in_record and n_samples must be coprime");
  cfg.validate();
  params.validate();
  env.validate();

  std::vector<double> record(static_cast<std::size_t>(n));
  std::vector<char> clipped(record.size(), 0);
  parallel_for(record.size(), workers, [&](std::size_t k) {
    // Reduce the phase index first so the sine argument stays in [0, 2 pi).
    const long long phase = (static_cast<long long>(options.cycles_in_record) *
                             static_cast<long long>(k)) % n;
    const double vin = options.amplitude *
                       std::sin(2.0 * std::numbers::pi * static_cast<double>(phase) /
                                static_cast<double>(n));
    const dynamp::AmpSample s = dynamp::amplify_once(cfg, vin, params, env);
    record[k] = s.vout_diff;
    clipped[k] = s.clipped;
  });

  const bool any_clipped = std::any_of(clipped.begin(), clipped.end(), [](char c) { return c; });
  if (any_clipped && options.strict)
    throw Error("thd: output clipped during the record (strict mode)");

  Spectrum s = analyze_record(record, options.cycles_in_record, options.harmonics,
                              options.clock_hz);
  s.clipped = any_clipped;
  return s;
}

double parseval_relative_error(std::span<const double> samples) {
  const auto x = dft(samples);
  CompensatedSum time_energy;
  for (double v : samples) time_energy.add(v * v);
  CompensatedSum freq_energy;
  for (const auto& c : x) freq_energy.add(std::norm(c));
  const double et = time_energy.value();
  const double ef = freq_energy.value() / static_cast<double>(samples.size());
  if (et == 0.0) return ef == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(ef - et) / et;
}

GainStats gain_stats(std::span<const double> gains) {
  GainStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -s.min;
  // Deviations are taken from the first finite cell (shifted-data variance),
  // so a constant grid yields exactly zero spread.
  double shift = 0.0;
  CompensatedSum sum;
  CompensatedSum sq;
  for (double g : gains) {
    if (!std::isfinite(g)) continue;
    if (s.count == 0) shift = g;
    const double d = g - shift;
    sum.add(d);
    sq.add(d * d);
    s.min = std::min(s.min, g);
    s.max = std::max(s.max, g);
    ++s.count;
  }
  if (s.count == 0) throw PreconditionError("gain_stats: empty grid");
  const double n = static_cast<double>(s.count);
  const double mean_d = sum.value() / n;
  s.mean = shift + mean_d;
  s.std = std::sqrt(std::max(0.0, sq.value() / n - mean_d * mean_d));
  return s;
}

void CornerSpec::validate() const {
  if (n_t < 1 || n_v < 1) throw PreconditionError("corners: grid sizes must be >= 1");
  if (!(t_start > 0.0) || !(t_stop >= t_start))
    throw PreconditionError("corners: need 0 < t_start <= t_stop (K)");
  if (!(vdd_nominal > 0.0)) throw PreconditionError("corners: vdd_nominal must be > 0");
  if (!(vdd_frac >= 0.0 && vdd_frac < 1.0))
    throw PreconditionError("corners: vdd_frac must lie in [0, 1)");
  if (probe_vin == 0.0) throw PreconditionError("corners: probe_vin must be nonzero");
}

std::vector<double> CornerSpec::temps() const { return linspace(t_start, t_stop, n_t); }

std::vector<double> CornerSpec::vdds() const {
  if (n_v == 1) return {vdd_nominal};
  return linspace(vdd_nominal * (1.0 - vdd_frac), vdd_nominal * (1.0 + vdd_frac), n_v);
}

CornerGrid corner_sweep(const AmpConfig& cfg, const CornerSpec& spec,
                        const DeviceParams& params, unsigned workers) {
  spec.validate();
  cfg.validate();
  params.validate();

  CornerGrid grid;
  grid.temps = spec.temps();
  grid.vdds = spec.vdds();
  grid.topology = cfg.topology();
  const std::size_t nv = grid.vdds.size();
  const std::size_t cells = grid.temps.size() * nv;
  grid.gains.assign(cells, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(cells);

  parallel_for(cells, workers, [&](std::size_t idx) {
    const Environment env{grid.temps[idx / nv], grid.vdds[idx % nv]};
    try {
      grid.gains[idx] = dynamp::gain_at(cfg, spec.probe_vin, params, env);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "cell T=" << env.temperature << " K, vdd=" << env.vdd << " V: " << e.what();
      errors[idx] = msg.str();
    }
  });

  for (auto& e : errors) {
    if (e.empty()) continue;
    if (spec.strict) throw ConvergenceError("corner_sweep: " + e);
    grid.errors.push_back(std::move(e));
  }
  grid.stats = gain_stats(grid.gains);
  return grid;
}

}  // namespace gmcsim::analysis
