#include "gmcsim/cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "gmcsim/cli/selftest.hpp"
#include "gmcsim/error.hpp"

#ifndef GMCSIM_VERSION
#define GMCSIM_VERSION "0.0.0"
#endif

namespace gmcsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using dynamp::Topology;

std::string_view tool_version() { return GMCSIM_VERSION; }

namespace {

// JSON has no infinities; they become null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string name_of(Topology t) { return std::string(dynamp::to_string(t)); }

json env_json(const devmodel::Environment& env) {
  return {{"temperature", env.temperature}, {"temp_c", env.celsius()}, {"vdd", env.vdd}};
}

json header(const Context& ctx) {
  return {{"tool_version", std::string(tool_version())}, {"config_fingerprint", ctx.fingerprint}};
}

std::string transfer_csv(const analysis::SweepCurve& c) {
  std::string out = "vin_v,vout_v,gain\n";
  for (std::size_t i = 0; i < c.inputs.size(); ++i)
    out += format_double(c.inputs[i]) + "," + format_double(c.outputs[i]) + "," +
           format_double(c.gains[i]) + "\n";
  return out;
}

std::string spectrum_csv(const analysis::Spectrum& s) {
  std::string out = "bin,freq_hz,mag_db\n";
  for (std::size_t k = 0; k < s.magnitudes_db.size(); ++k)
    out += std::to_string(k) + "," + format_double(s.bin_freqs[k]) + "," +
           format_double(s.magnitudes_db[k]) + "\n";
  return out;
}

std::string corners_csv(const analysis::CornerGrid& g) {
  std::string out = "temp_c,vdd_v,gain\n";
  for (std::size_t i = 0; i < g.temps.size(); ++i)
    for (std::size_t j = 0; j < g.vdds.size(); ++j)
      out += format_double(g.temps[i] - devmodel::kZeroCelsius) + "," +
             format_double(g.vdds[j]) + "," + format_double(g.at(i, j)) + "\n";
  return out;
}

json stats_json(const analysis::GainStats& s) {
  return {{"std", s.std}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"count", s.count}};
}

// Largest even-harmonic bin relative to the fundamental, dB.
double even_harmonic_max_db(const analysis::Spectrum& s, int harmonics) {
  double worst = analysis::kZeroBinDb;
  const auto n = static_cast<long long>(s.n_samples);
  for (int h = 2; h <= harmonics; h += 2) {
    long long b = (static_cast<long long>(h) * static_cast<long long>(s.fundamental_bin)) % n;
    if (b > n / 2) b = n - b;
    worst = std::max(worst, s.magnitudes_db[static_cast<std::size_t>(b)]);
  }
  return worst;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

OutputSet cmd_transfer(const Context& ctx, std::ostream& log) {
  const auto& cfg = ctx.config;
  OutputSet files;
  for (Topology t : ctx.topologies) {
    auto curve = analysis::transfer_sweep(cfg.amp(t), cfg.transfer.v_start, cfg.transfer.v_stop,
                                          cfg.transfer.n_points, cfg.device, cfg.nominal,
                                          ctx.workers);
    curve.fingerprint = ctx.fingerprint;
    const std::string name = name_of(t);

    json j = header(ctx);
    j["topology"] = name;
    j["environment"] = env_json(cfg.nominal);
    j["n_points"] = curve.inputs.size();
    j["small_signal_gain"] = dynamp::gain_at(cfg.amp(t), analysis::kSmallSignalProbe,
                                             cfg.device, cfg.nominal);
    const bool covers_40mv = cfg.transfer.v_start <= -0.04 && cfg.transfer.v_stop >= 0.04;
    j["gain_ripple_pm40mv"] = covers_40mv ? json(analysis::gain_ripple(curve, 0.04)) : json(nullptr);
    j["clipped_points"] = std::count(curve.clipped.begin(), curve.clipped.end(), true);
    j["columns"] = {{"vin_v", curve.inputs}, {"vout_v", curve.outputs}, {"gain", curve.gains}};

    files.add("transfer_" + name + ".csv", transfer_csv(curve));
    files.add("transfer_" + name + ".json", dump(j));
    log << "transfer " << name << ": " << curve.inputs.size() << " points, small-signal gain "
        << format_double(j["small_signal_gain"].get<double>()) << "\n";
  }
  return files;
}

OutputSet cmd_gain(const Context& ctx, double vin, std::ostream& log) {
  const auto& cfg = ctx.config;
  OutputSet files;
  for (Topology t : ctx.topologies) {
    const auto& amp = cfg.amp(t);
    const auto sample = dynamp::amplify_once(amp, vin, cfg.device, cfg.nominal);
    const double gain = dynamp::gain_at(amp, vin, cfg.device, cfg.nominal);
    const double gm0 = dynamp::gm_at_zero(amp, cfg.device, cfg.nominal);
    json j = header(ctx);
    j["topology"] = name_of(t);
    j["environment"] = env_json(cfg.nominal);
    j["vin_v"] = vin;
    j["gain"] = gain;
    j["vout_diff_v"] = sample.vout_diff;
    j["vout_p_v"] = sample.vout_p;
    j["vout_n_v"] = sample.vout_n;
    j["clipped"] = sample.clipped;
    j["gm0_s"] = gm0;
    j["gm_t_over_c"] = gm0 * amp.window_t / amp.cap_c;
    j["tail_current_a"] = dynamp::tail_current_of(amp, cfg.device, cfg.nominal);
    files.add("gain_" + name_of(t) + ".json", dump(j));
    log << "gain " << name_of(t) << " at " << format_double(vin) << " V: " << format_double(gain)
        << "\n";
  }
  return files;
}

OutputSet cmd_thd(const Context& ctx, std::ostream& log) {
  const auto& cfg = ctx.config;
  analysis::ThdOptions opts = cfg.thd;
  opts.strict = ctx.strict;

  OutputSet files;
  json summary = header(ctx);
  summary["environment"] = env_json(cfg.nominal);
  summary["protocol"] = {{"amplitude_v", opts.amplitude},
                         {"cycles_in_record", opts.cycles_in_record},
                         {"n_samples", opts.n_samples},
                         {"harmonics", opts.harmonics},
                         {"clock_hz", opts.clock_hz}};
  std::map<Topology, double> thd;
  for (Topology t : ctx.topologies) {
    const auto s = analysis::thd_run(cfg.amp(t), opts, cfg.device, cfg.nominal, ctx.workers);
    const std::string name = name_of(t);
    thd[t] = s.thd_db;
    summary["topologies"][name] = {
        {"thd_db", num(s.thd_db)},
        {"thd_db_negative_convention", num(-s.thd_db)},
        {"thd_n_db", num(s.thd_n_db)},
        {"below_floor", s.below_floor},
        {"clipped", s.clipped},
        {"fundamental_bin", s.fundamental_bin},
        {"fundamental_hz", s.bin_freqs[s.fundamental_bin]},
        {"harmonic_bins", s.harmonic_bins},
        {"even_harmonic_max_db", even_harmonic_max_db(s, opts.harmonics)},
    };
    files.add("spectrum_" + name + ".csv", spectrum_csv(s));
    log << "thd " << name << ": " << (s.below_floor ? "below floor, " : "")
        << format_double(s.thd_db) << " dB\n";
  }
  if (thd.contains(Topology::proposed) && thd.contains(Topology::traditional)) {
    const double delta = thd[Topology::proposed] - thd[Topology::traditional];
    summary["thd_delta_db"] = num(delta);
    log << "thd delta (proposed - traditional): " << format_double(delta) << " dB\n";
  }
  files.add("thd_summary.json", dump(summary));
  return files;
}

OutputSet cmd_corners(const Context& ctx, std::ostream& log) {
  const auto& cfg = ctx.config;
  analysis::CornerSpec spec = cfg.corners;
  spec.strict = ctx.strict;

  OutputSet files;
  json stats = header(ctx);
  stats["grid"] = {{"t_start_c", spec.t_start - devmodel::kZeroCelsius},
                   {"t_stop_c", spec.t_stop - devmodel::kZeroCelsius},
                   {"n_t", spec.n_t},
                   {"vdd_nominal", spec.vdd_nominal},
                   {"vdd_frac", spec.vdd_frac},
                   {"n_v", spec.n_v},
                   {"probe_vin_v", spec.probe_vin}};
  std::map<Topology, analysis::GainStats> by_topology;
  for (Topology t : ctx.topologies) {
    const auto grid = analysis::corner_sweep(cfg.amp(t), spec, cfg.device, ctx.workers);
    const std::string name = name_of(t);
    by_topology[t] = grid.stats;
    json entry = stats_json(grid.stats);
    entry["errors"] = grid.errors;
    stats["topologies"][name] = entry;
    files.add("corners_" + name + ".csv", corners_csv(grid));
    log << "corners " << name << ": std " << format_double(grid.stats.std) << ", range ["
        << format_double(grid.stats.min) << ", " << format_double(grid.stats.max) << "]\n";
  }
  if (by_topology.contains(Topology::proposed) && by_topology.contains(Topology::traditional)) {
    const double denom = by_topology[Topology::traditional].std;
    stats["std_ratio"] = num(denom > 0.0 ? by_topology[Topology::proposed].std / denom
                                         : std::numeric_limits<double>::infinity());
  }
  files.add("corners_stats.json", dump(stats));
  return files;
}

CalibrateOutcome cmd_calibrate(const Context& ctx, double target_gain, std::ostream& log) {
  CalibrateOutcome outcome{{}, ctx.config};
  dynamp::CalibrationOptions opts;
  opts.probe_vin = ctx.config.calibration.probe_vin;

  json report = header(ctx);
  report["target_gain"] = target_gain;
  report["environment"] = env_json(ctx.config.nominal);
  for (Topology t : ctx.topologies) {
    const auto result = dynamp::calibrate_gain(ctx.config.amp(t), target_gain, ctx.config.device,
                                               ctx.config.nominal, opts);
    outcome.updated.amp(t) = result.config;
    json entry = {{"scale", result.scale},
                  {"achieved_gain", result.achieved_gain},
                  {"iterations", result.iterations},
                  {"window_t", result.config.window_t}};
    if (const auto* p = std::get_if<dynamp::ProposedDesign>(&result.config.design))
      entry["r_nominal"] = p->bias.resistor.r_nominal;
    report["topologies"][name_of(t)] = entry;
    log << "calibrate " << name_of(t) << ": gain " << format_double(result.achieved_gain)
        << " (scale " << format_double(result.scale) << ")\n";
  }
  report["calibrated_config_fingerprint"] = fingerprint(outcome.updated);
  outcome.files.add("calibration.json", dump(report));
  return outcome;
}

SelftestOutcome cmd_selftest(const Context& ctx, std::ostream& log) {
  const auto results = run_invariant_suite(ctx.config, ctx.workers);
  json j = header(ctx);
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    j["checks"].push_back({{"name", r.name},
                           {"passed", r.passed},
                           {"measured", num(r.measured)},
                           {"threshold", r.threshold},
                           {"detail", r.detail}});
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << format_double(r.measured)
        << " vs " << format_double(r.threshold) << ")\n";
  }
  j["passed"] = all;
  SelftestOutcome out{{}, all};
  out.files.add("selftest.json", dump(j));
  return out;
}

OutputSet cmd_report(const Context& ctx, std::ostream& log) {
  const auto& cfg = ctx.config;
  OutputSet files;
  const auto merge = [&](const OutputSet& part) {
    for (const auto& [name, content] : part.files()) files.add(name, content);
  };
  merge(cmd_transfer(ctx, log));
  merge(cmd_gain(ctx, cfg.calibration.probe_vin, log));
  merge(cmd_thd(ctx, log));
  merge(cmd_corners(ctx, log));

  const auto thd = json::parse(files.files().at("thd_summary.json"));
  const auto corners = json::parse(files.files().at("corners_stats.json"));
  json report = header(ctx);
  for (Topology t : ctx.topologies) {
    const std::string name = name_of(t);
    const auto transfer = json::parse(files.files().at("transfer_" + name + ".json"));
    const auto gain = json::parse(files.files().at("gain_" + name + ".json"));
    const auto& c = corners["topologies"][name];
    report["summary"][name] = {
        {"gain_nominal", gain["gain"]},
        {"gain_ripple_pm40mv", transfer["gain_ripple_pm40mv"]},
        {"thd_db", thd["topologies"][name]["thd_db"]},
        {"corner_std", c["std"]},
        {"corner_min", c["min"]},
        {"corner_max", c["max"]},
    };
  }
  if (thd.contains("thd_delta_db")) report["thd_delta_db"] = thd["thd_delta_db"];
  if (corners.contains("std_ratio")) report["corner_std_ratio"] = corners["std_ratio"];
  files.add("report.json", dump(report));
  return files;
}

namespace {

std::vector<Topology> select_topologies(const std::string& flag) {
  if (flag == "both") return {Topology::proposed, Topology::traditional};
  if (flag == "all") return {Topology::proposed, Topology::traditional, Topology::linear};
  if (auto t = dynamp::parse_topology(flag)) return {*t};
  throw ConfigError("--topology", "expected traditional, proposed, linear, both or all");
}

fs::path resolve_out_dir(const std::string& flag, const RunConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("GMCSIM_OUT"); env != nullptr && *env != '\0') return env;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "gmcsim_out";
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gmcsim: behavioural Gm-C dynamic amplifier simulator"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::string topology_flag = "both";
  bool strict_flag = false;
  unsigned workers = 1;
  std::optional<double> temp_c;
  std::optional<double> vdd;

  app.add_option("--config", config_path, "JSON run configuration (defaults when omitted)");
  app.add_option("--out", out_flag, "Output directory (falls back to $GMCSIM_OUT)");
  app.add_option("--topology", topology_flag, "traditional | proposed | linear | both | all");
  app.add_flag("--strict", strict_flag, "Reject unknown config keys; fail on clipping or bad cells");
  app.add_option("--workers", workers, "Worker threads for grid evaluation (0 = all cores)");
  app.add_option("--temp-c", temp_c, "Override the nominal temperature, degrees Celsius");
  app.add_option("--vdd", vdd, "Override the nominal supply, V");

  auto* transfer = app.add_subcommand("transfer", "DC transfer and gain sweep");
  auto* gain = app.add_subcommand("gain", "Gain at one DC input");
  double gain_vin = 1e-3;
  gain->add_option("--vin", gain_vin, "Differential input, V")->capture_default_str();
  auto* thd = app.add_subcommand("thd", "Coherent sine THD measurement");
  auto* corners = app.add_subcommand("corners", "Temperature x supply gain statistics");
  auto* calibrate = app.add_subcommand("calibrate", "Trim R1 (proposed) or T to a target gain");
  std::optional<double> target;
  std::string write_config;
  calibrate->add_option("--target", target, "Target gain (default from config)");
  calibrate->add_option("--write-config", write_config,
                        "Path for the calibrated config (default <out>/calibrated_config.json)");
  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");
  auto* report = app.add_subcommand("report", "Run every experiment and summarise");
  auto* init = app.add_subcommand("init-config", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Context ctx;
    if (init->parsed()) {
      out << dump_config(default_config());
      return kExitOk;
    }
    const bool strict_load = strict_flag;
    ctx.config = config_path.empty() ? default_config() : load_config(config_path, strict_load);
    if (temp_c) ctx.config.nominal.temperature = *temp_c + devmodel::kZeroCelsius;
    if (vdd) ctx.config.nominal.vdd = *vdd;
    validate_config(ctx.config);

    ctx.strict = strict_flag || ctx.config.strict;
    ctx.topologies = select_topologies(topology_flag);
    for (Topology t : ctx.topologies) (void)ctx.config.amp(t);
    ctx.out_dir = resolve_out_dir(out_flag, ctx.config);
    ctx.workers = workers;
    ctx.fingerprint = fingerprint(ctx.config);

    if (selftest->parsed()) {
      const auto result = cmd_selftest(ctx, out);
      result.files.commit(ctx.out_dir);
      return result.passed ? kExitOk : kExitRuntime;
    }
    if (calibrate->parsed()) {
      const double goal = target.value_or(ctx.config.calibration.target_gain);
      if (!(goal > 0.0)) throw ConfigError("--target", "must be > 0");
      auto result = cmd_calibrate(ctx, goal, out);
      const fs::path dest = write_config.empty() ? ctx.out_dir / "calibrated_config.json"
                                                 : fs::path(write_config);
      if (!config_path.empty() && fs::exists(dest) && fs::exists(config_path) &&
          fs::equivalent(dest, config_path))
        throw ConfigError("--write-config", "refusing to overwrite the input config");
      result.files.commit(ctx.out_dir);
      write_file_atomic(dest, dump_config(result.updated));
      out << "wrote " << dest.string() << "\n";
      return kExitOk;
    }

    OutputSet files;
    if (transfer->parsed()) files = cmd_transfer(ctx, out);
    else if (gain->parsed()) files = cmd_gain(ctx, gain_vin, out);
    else if (thd->parsed()) files = cmd_thd(ctx, out);
    else if (corners->parsed()) files = cmd_corners(ctx, out);
    else if (report->parsed()) files = cmd_report(ctx, out);
    for (const auto& p : files.commit(ctx.out_dir)) out << "wrote " << p.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace gmcsim::cli
