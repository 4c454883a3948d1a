#include "gmcsim/cli/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "gmcsim/error.hpp"

namespace gmcsim::cli {

using nlohmann::json;
using dynamp::Topology;

namespace {

// Typed view of one JSON object that remembers which keys were read, so the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path, bool strict)
      : node_(node), path_(std::move(path)), strict_(strict) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key_path(key), "must be finite");
    return x;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw ConfigError(key_path(key), "integer out of range");
    return static_cast<int>(x);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError(key_path(key), "expected a string");
    return v.get<std::string>();
  }

  Section child(const std::string& key) {
    static const json empty = json::object();
    return Section(has(key) ? node_.at(key) : empty, key_path(key), strict_);
  }

  void finish() const {
    if (!strict_) return;
    for (const auto& [key, value] : node_.items())
      if (!seen_.contains(key)) throw ConfigError(key_path(key), "unknown key");
  }

 private:
  const json& node_;
  std::string path_;
  bool strict_;
  std::set<std::string> seen_;
};

// Runs a module validator and rethrows its complaint against `key`.
template <class Fn>
void check(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const gmcsim::Error& e) {
    throw ConfigError(key, e.what());
  }
}

dynamp::PairGeometry read_pair(Section s, const dynamp::PairGeometry& d) {
  dynamp::PairGeometry p{s.number("base_wl", d.base_wl), s.number("m", d.m), s.number("n", d.n)};
  s.finish();
  return p;
}

void read_amp_common(Section& s, dynamp::AmpConfig& amp) {
  amp.cap_c = s.number("cap_c", amp.cap_c);
  amp.window_t = s.number("window_t", amp.window_t);
  amp.vcm_out = s.optional_number("vcm_out");
}

dynamp::AmpConfig read_proposed(Section s) {
  dynamp::AmpConfig amp = dynamp::default_proposed();
  read_amp_common(s, amp);
  auto& d = std::get<dynamp::ProposedDesign>(amp.design);
  d.pair_a = read_pair(s.child("pair"), d.pair_a);
  Section b = s.child("bias");
  d.bias.wl_m24 = b.number("wl_m24", d.bias.wl_m24);
  d.bias.wl_m25 = b.number("wl_m25", d.bias.wl_m25);
  d.bias.mirror_ratio_n = b.number("mirror_ratio_n", d.bias.mirror_ratio_n);
  Section r = b.child("resistor");
  d.bias.resistor.r_nominal = r.number("r_nominal", d.bias.resistor.r_nominal);
  d.bias.resistor.tempco = r.number("tempco", d.bias.resistor.tempco);
  d.bias.resistor.t_ref = r.number("t_ref", d.bias.resistor.t_ref);
  r.finish();
  b.finish();
  s.finish();
  return amp;
}

dynamp::AmpConfig read_traditional(Section s) {
  dynamp::AmpConfig amp = dynamp::default_traditional();
  read_amp_common(s, amp);
  auto& d = std::get<dynamp::TraditionalDesign>(amp.design);
  d.pair = read_pair(s.child("pair"), d.pair);
  Section b = s.child("bias");
  d.bias.gate_bias_fraction = b.number("gate_bias_fraction", d.bias.gate_bias_fraction);
  d.bias.tail_wl = b.number("tail_wl", d.bias.tail_wl);
  b.finish();
  s.finish();
  return amp;
}

dynamp::AmpConfig read_linear(Section s) {
  dynamp::AmpConfig amp = dynamp::default_linear();
  read_amp_common(s, amp);
  auto& d = std::get<dynamp::LinearDesign>(amp.design);
  d.gm = s.number("gm", d.gm);
  d.i_cm = s.number("i_cm", d.i_cm);
  s.finish();
  return amp;
}

json amp_common(const dynamp::AmpConfig& amp) {
  json j;
  j["cap_c"] = amp.cap_c;
  j["window_t"] = amp.window_t;
  j["vcm_out"] = amp.vcm_out ? json(*amp.vcm_out) : json(nullptr);
  return j;
}

json pair_json(const dynamp::PairGeometry& p) {
  return {{"base_wl", p.base_wl}, {"m", p.m}, {"n", p.n}};
}

json amp_json(const dynamp::AmpConfig& amp) {
  json j = amp_common(amp);
  if (const auto* p = std::get_if<dynamp::ProposedDesign>(&amp.design)) {
    j["pair"] = pair_json(p->pair_a);
    j["bias"] = {{"wl_m24", p->bias.wl_m24},
                 {"wl_m25", p->bias.wl_m25},
                 {"mirror_ratio_n", p->bias.mirror_ratio_n},
                 {"resistor",
                  {{"r_nominal", p->bias.resistor.r_nominal},
                   {"tempco", p->bias.resistor.tempco},
                   {"t_ref", p->bias.resistor.t_ref}}}};
  } else if (const auto* t = std::get_if<dynamp::TraditionalDesign>(&amp.design)) {
    j["pair"] = pair_json(t->pair);
    j["bias"] = {{"gate_bias_fraction", t->bias.gate_bias_fraction},
                 {"tail_wl", t->bias.tail_wl}};
  } else {
    const auto& l = std::get<dynamp::LinearDesign>(amp.design);
    j["gm"] = l.gm;
    j["i_cm"] = l.i_cm;
  }
  return j;
}

}  // namespace

const dynamp::AmpConfig& RunConfig::amp(Topology topology) const {
  switch (topology) {
    case Topology::proposed: return proposed;
    case Topology::traditional: return traditional;
    case Topology::linear:
      if (!linear) throw ConfigError("linear", "topology 'linear' requested but not configured");
      return *linear;
  }
  throw ConfigError("", "unknown topology");
}

dynamp::AmpConfig& RunConfig::amp(Topology topology) {
  return const_cast<dynamp::AmpConfig&>(std::as_const(*this).amp(topology));
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.linear = dynamp::default_linear();
  return cfg;
}

RunConfig parse_config(const json& doc, bool strict) {
  Section root(doc, "", strict);
  RunConfig cfg;
  cfg.schema_version = root.integer("schema_version", kSchemaVersion);
  if (cfg.schema_version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported schema version " +
                                            std::to_string(cfg.schema_version));

  {
    Section d = root.child("device");
    cfg.device.kprime_nominal = d.number("kprime_nominal", cfg.device.kprime_nominal);
    cfg.device.vth_nominal = d.number("vth_nominal", cfg.device.vth_nominal);
    cfg.device.t_ref = d.number("t_ref", cfg.device.t_ref);
    cfg.device.mobility_exponent = d.number("mobility_exponent", cfg.device.mobility_exponent);
    cfg.device.vth_tempco = d.number("vth_tempco", cfg.device.vth_tempco);
    d.finish();
  }
  {
    Section e = root.child("environment");
    cfg.nominal.temperature = e.number("temperature", cfg.nominal.temperature);
    cfg.nominal.vdd = e.number("vdd", cfg.nominal.vdd);
    e.finish();
  }
  cfg.proposed = read_proposed(root.child("proposed"));
  cfg.traditional = read_traditional(root.child("traditional"));
  if (root.has("linear")) cfg.linear = read_linear(root.child("linear"));

  Section ex = root.child("experiments");
  {
    Section t = ex.child("transfer");
    cfg.transfer.v_start = t.number("v_start", cfg.transfer.v_start);
    cfg.transfer.v_stop = t.number("v_stop", cfg.transfer.v_stop);
    cfg.transfer.n_points = t.integer("n_points", cfg.transfer.n_points);
    t.finish();
  }
  {
    Section t = ex.child("thd");
    cfg.thd.amplitude = t.number("amplitude", cfg.thd.amplitude);
    cfg.thd.cycles_in_record = t.integer("cycles_in_record", cfg.thd.cycles_in_record);
    cfg.thd.n_samples = t.integer("n_samples", cfg.thd.n_samples);
    cfg.thd.harmonics = t.integer("harmonics", cfg.thd.harmonics);
    cfg.thd.clock_hz = t.number("clock_hz", cfg.thd.clock_hz);
    t.finish();
  }
  {
    Section c = ex.child("corners");
    cfg.corners.t_start = c.number("t_start", cfg.corners.t_start);
    cfg.corners.t_stop = c.number("t_stop", cfg.corners.t_stop);
    cfg.corners.n_t = c.integer("n_t", cfg.corners.n_t);
    cfg.corners.vdd_nominal = c.number("vdd_nominal", cfg.corners.vdd_nominal);
    cfg.corners.vdd_frac = c.number("vdd_frac", cfg.corners.vdd_frac);
    cfg.corners.n_v = c.integer("n_v", cfg.corners.n_v);
    cfg.corners.probe_vin = c.number("probe_vin", cfg.corners.probe_vin);
    c.finish();
  }
  {
    Section f = ex.child("flatness");
    cfg.flatness.window = f.number("window", cfg.flatness.window);
    cfg.flatness.grid.ratio_min = f.number("ratio_min", cfg.flatness.grid.ratio_min);
    cfg.flatness.grid.ratio_max = f.number("ratio_max", cfg.flatness.grid.ratio_max);
    cfg.flatness.grid.n_ratios = f.integer("n_ratios", cfg.flatness.grid.n_ratios);
    cfg.flatness.grid.n_samples = f.integer("n_samples", cfg.flatness.grid.n_samples);
    f.finish();
  }
  {
    Section c = ex.child("calibration");
    cfg.calibration.target_gain = c.number("target_gain", cfg.calibration.target_gain);
    cfg.calibration.probe_vin = c.number("probe_vin", cfg.calibration.probe_vin);
    c.finish();
  }
  ex.finish();

  cfg.output_dir = root.string("output_dir", "");
  cfg.strict = root.boolean("strict", false);
  root.finish();

  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, strict);
}

void validate_config(const RunConfig& cfg) {
  check("device", [&] { cfg.device.validate(); });
  check("environment", [&] { cfg.nominal.validate(); });
  check("proposed", [&] { cfg.proposed.validate(); });
  check("traditional", [&] { cfg.traditional.validate(); });
  if (cfg.linear) {
    check("linear", [&] { cfg.linear->validate(); });
    if (cfg.linear->topology() != Topology::linear)
      throw ConfigError("linear", "block does not describe a linear stage");
  }
  if (cfg.proposed.topology() != Topology::proposed)
    throw ConfigError("proposed", "block does not describe the proposed amplifier");
  if (cfg.traditional.topology() != Topology::traditional)
    throw ConfigError("traditional", "block does not describe the traditional amplifier");

  const auto& t = cfg.transfer;
  if (!(t.v_start < t.v_stop))
    throw ConfigError("experiments.transfer.v_start", "must be below v_stop");
  if (t.n_points < 2) throw ConfigError("experiments.transfer.n_points", "must be >= 2");

  const auto& h = cfg.thd;
  const long long n = h.n_samples;
  if (n < 4 || (n & (n - 1)) != 0)
    throw ConfigError("experiments.thd.n_samples", "must be a power of two >= 4");
  if (h.cycles_in_record <= 0 || h.cycles_in_record >= n / 2)
    throw ConfigError("experiments.thd.cycles_in_record", "must lie in (0, n_samples/2)");
  if (h.cycles_in_record % 2 == 0)
    throw ConfigError("experiments.thd.cycles_in_record", "must be coprime with n_samples");
  if (h.harmonics < 2 || h.harmonics >= n / 2)
    throw ConfigError("experiments.thd.harmonics", "must lie in [2, n_samples/2)");
  if (!(h.amplitude > 0.0)) throw ConfigError("experiments.thd.amplitude", "must be > 0");
  if (!(h.clock_hz > 0.0)) throw ConfigError("experiments.thd.clock_hz", "must be > 0");

  check("experiments.corners", [&] { cfg.corners.validate(); });
  check("experiments.flatness", [&] { cfg.flatness.grid.validate(); });
  if (!(cfg.flatness.window >= 0.0))
    throw ConfigError("experiments.flatness.window", "must be >= 0");
  if (!(cfg.calibration.target_gain > 0.0))
    throw ConfigError("experiments.calibration.target_gain", "must be > 0");
  if (cfg.calibration.probe_vin == 0.0)
    throw ConfigError("experiments.calibration.probe_vin", "must be nonzero");

  // R1 must stay positive over every temperature the run can visit.
  const auto& bias = std::get<dynamp::ProposedDesign>(cfg.proposed.design).bias;
  const double t_lo = std::min(cfg.corners.t_start, cfg.nominal.temperature);
  const double t_hi = std::max(cfg.corners.t_stop, cfg.nominal.temperature);
  check("proposed.bias.resistor", [&] { devmodel::check_resistor_range(bias.resistor, t_lo, t_hi); });
}

json to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["device"] = {{"kprime_nominal", cfg.device.kprime_nominal},
                 {"vth_nominal", cfg.device.vth_nominal},
                 {"t_ref", cfg.device.t_ref},
                 {"mobility_exponent", cfg.device.mobility_exponent},
                 {"vth_tempco", cfg.device.vth_tempco}};
  j["environment"] = {{"temperature", cfg.nominal.temperature}, {"vdd", cfg.nominal.vdd}};
  j["proposed"] = amp_json(cfg.proposed);
  j["traditional"] = amp_json(cfg.traditional);
  if (cfg.linear) j["linear"] = amp_json(*cfg.linear);
  j["experiments"] = {
      {"transfer",
       {{"v_start", cfg.transfer.v_start},
        {"v_stop", cfg.transfer.v_stop},
        {"n_points", cfg.transfer.n_points}}},
      {"thd",
       {{"amplitude", cfg.thd.amplitude},
        {"cycles_in_record", cfg.thd.cycles_in_record},
        {"n_samples", cfg.thd.n_samples},
        {"harmonics", cfg.thd.harmonics},
        {"clock_hz", cfg.thd.clock_hz}}},
      {"corners",
       {{"t_start", cfg.corners.t_start},
        {"t_stop", cfg.corners.t_stop},
        {"n_t", cfg.corners.n_t},
        {"vdd_nominal", cfg.corners.vdd_nominal},
        {"vdd_frac", cfg.corners.vdd_frac},
        {"n_v", cfg.corners.n_v},
        {"probe_vin", cfg.corners.probe_vin}}},
      {"flatness",
       {{"window", cfg.flatness.window},
        {"ratio_min", cfg.flatness.grid.ratio_min},
        {"ratio_max", cfg.flatness.grid.ratio_max},
        {"n_ratios", cfg.flatness.grid.n_ratios},
        {"n_samples", cfg.flatness.grid.n_samples}}},
      {"calibration",
       {{"target_gain", cfg.calibration.target_gain},
        {"probe_vin", cfg.calibration.probe_vin}}},
  };
  j["output_dir"] = cfg.output_dir;
  j["strict"] = cfg.strict;
  return j;
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string fingerprint(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();

  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("fingerprint: SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

}  // namespace gmcsim::cli
