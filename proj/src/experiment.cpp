#include "biphoton/experiment.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "json.hpp"

#include "biphoton/error.hpp"
#include "biphoton/random.hpp"
#include "biphoton/timetag_io.hpp"

namespace biphoton::experiment {

namespace {

namespace pt = boost::property_tree;

constexpr std::string_view kChannelPrefix = "channel.";

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) throw Error("config " + where + ": expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& where) {
  std::uint64_t v = 0;
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw Error("config " + where + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error("config " + where + ": expected true or false, got '" + text + "'");
}

// Binds the keys of one section to fields; unknown keys are rejected.
class SectionReader {
 public:
  SectionReader(std::string section, const pt::ptree& tree) : section_(std::move(section)), tree_(tree) {}

  SectionReader& number(const std::string& key, double& field) {
    handlers_[key] = [&field, where = section_ + "." + key](const std::string& v) { field = parse_double(v, where); };
    return *this;
  }
  SectionReader& integer(const std::string& key, std::uint64_t& field) {
    handlers_[key] = [&field, where = section_ + "." + key](const std::string& v) { field = parse_uint(v, where); };
    return *this;
  }
  SectionReader& flag(const std::string& key, bool& field) {
    handlers_[key] = [&field, where = section_ + "." + key](const std::string& v) { field = parse_bool(v, where); };
    return *this;
  }
  SectionReader& text(const std::string& key, std::string& field) {
    handlers_[key] = [&field](const std::string& v) { field = v; };
    return *this;
  }

  void read() const {
    for (const auto& [key, node] : tree_) {
      const auto it = handlers_.find(key);
      if (it == handlers_.end()) throw Error("config: unknown key '" + key + "' in [" + section_ + "]");
      it->second(node.get_value<std::string>());
    }
  }

 private:
  std::string section_;
  const pt::ptree& tree_;
  std::map<std::string, std::function<void(const std::string&)>> handlers_;
};

void bind_channel(SectionReader& r, ChannelSpec& ch) {
  r.number("lambda0_nm", ch.lambda0_nm)
      .number("gamma_nm", ch.gamma_nm)
      .number("amplitude", ch.amplitude)
      .number("phase_deg", ch.phase_deg)
      .number("polarization_deg", ch.polarization_deg)
      .number("rate_per_mw_hz", ch.rate_per_mw_hz)
      .number("coupling_deg", ch.coupling_deg);
}

void bind_section(const std::string& name, SectionReader& r, ExperimentConfig& c, std::uint64_t& schema) {
  if (name == "meta") {
    r.integer("schema_version", schema);
  } else if (name == "pump") {
    r.number("wavelength_nm", c.pump_wavelength_nm)
        .number("power_mw", c.pump_power_mw)
        .number("polarization_deg", c.pump_polarization_deg);
  } else if (name == "detection") {
    r.number("efficiency_a", c.efficiency_a)
        .number("efficiency_b", c.efficiency_b)
        .number("jitter_fwhm_ps", c.jitter_fwhm_ps)
        .number("deadtime_ps", c.deadtime_ps);
  } else if (name == "analyzer") {
    r.flag("enabled", c.analyzer_enabled).number("angle_deg", c.analyzer_angle_deg);
  } else if (name == "background") {
    r.number("pl_rate_per_detector_hz", c.pl_rate_per_detector_hz);
  } else if (name == "passband") {
    r.number("low_nm", c.passband_low_nm).number("high_nm", c.passband_high_nm);
  } else if (name == "acquisition") {
    r.number("duration_s", c.duration_s).number("slice_s", c.slice_s).integer("seed", c.seed);
  } else if (name == "histogram") {
    r.number("bin_width_ps", c.bin_width_ps).number("window_ps", c.window_ps).integer("guard_bins", c.guard_bins);
  } else if (name == "dispersion") {
    r.flag("enabled", c.dispersion_enabled)
        .number("slope_ps_per_nm", c.dispersion_slope_ps_per_nm)
        .number("ref_lambda_nm", c.dispersion_ref_lambda_nm)
        .number("fiber_length_km", c.fiber_length_km);
  } else if (name == "spectrum") {
    r.number("low_nm", c.spectrum_low_nm)
        .number("high_nm", c.spectrum_high_nm)
        .number("bin_nm", c.spectrum_bin_nm)
        .number("accidental_offset_ps", c.accidental_offset_ps);
  } else if (name == "fit") {
    r.flag("poisson_weights", c.fit_poisson_weights);
  } else if (name == "output") {
    r.text("dir", c.output_dir).text("format", c.output_format);
  } else {
    throw Error("config: unknown section [" + name + "]");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (channels.empty()) throw Error("config: at least one [channel.NAME] section is required");
  for (std::size_t i = 0; i < channels.size(); ++i)
    for (std::size_t j = i + 1; j < channels.size(); ++j)
      if (channels[i].name == channels[j].name) throw Error("config: duplicate channel '" + channels[i].name + "'");
  source().validate();
  detection(dispersion_enabled).validate();
  if (!(pl_rate_per_detector_hz >= 0.0)) throw Error("config: background rate must be >= 0");
  if (!(duration_s >= 0.0)) throw Error("config: duration must be >= 0");
  if (!(slice_s > 0.0)) throw Error("config: slice must be > 0");
  if (!(bin_width_ps > 0.0) || !(window_ps >= bin_width_ps))
    throw Error("config: histogram needs bin width > 0 and window >= bin width");
  if (dispersion_enabled) dispersion().validate();
  spectrum_grid().bins();
  if (!(accidental_offset_ps > 0.0)) throw Error("config: accidental offset must be > 0");
  tag_format();
}

io::TagFormat ExperimentConfig::tag_format() const { return io::parse_tag_format(output_format); }

mc::SourceConfig ExperimentConfig::source(std::optional<double> power_mw) const {
  mc::SourceConfig s;
  s.pump.lambda_pump = pump_wavelength_nm;
  s.pump.power = power_mw.value_or(pump_power_mw);
  s.pump.polarization_angle = radians(pump_polarization_deg);
  for (const auto& ch : channels) {
    mc::EmitterChannel e;
    e.resonance.id = ch.name;
    e.resonance.lambda0 = ch.lambda0_nm;
    e.resonance.gamma = ch.gamma_nm;
    e.resonance.amplitude = ch.amplitude;
    e.resonance.phase = radians(ch.phase_deg);
    e.resonance.polarization = spectral::Polarization::linear(radians(ch.polarization_deg));
    e.rate_per_mw = ch.rate_per_mw_hz;
    e.coupling_angle = radians(ch.coupling_deg);
    s.channels.push_back(e);
  }
  s.analyzer = {analyzer_enabled, radians(analyzer_angle_deg)};
  s.passband = passband();
  return s;
}

mc::DetectionChain ExperimentConfig::detection(bool with_dispersion) const {
  mc::DetectionChain d;
  d.efficiency_a = efficiency_a;
  d.efficiency_b = efficiency_b;
  d.jitter_sigma_combined = jitter_sigma_ps();
  d.dispersion_slope = with_dispersion ? dispersion_slope_ps_per_nm : 0.0;
  d.dispersion_ref_lambda = dispersion_ref_lambda_nm;
  d.deadtime = deadtime_ps;
  d.filter = passband();
  return d;
}

tof::DispersionCalibration ExperimentConfig::dispersion() const {
  return {dispersion_slope_ps_per_nm, dispersion_ref_lambda_nm, fiber_length_km};
}

tof::SpectrumGrid ExperimentConfig::spectrum_grid() const { return {spectrum_low_nm, spectrum_high_nm, spectrum_bin_nm}; }

mc::Passband ExperimentConfig::passband() const { return {passband_low_nm, passband_high_nm}; }

double ExperimentConfig::jitter_sigma_ps() const {
  return jitter_fwhm_ps / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

double ExperimentConfig::pl_rate_at(double power_mw) const {
  if (pump_power_mw <= 0.0) return 0.0;
  return pl_rate_per_detector_hz * power_mw / pump_power_mw;
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  ExperimentConfig c;
  std::uint64_t schema = kConfigSchemaVersion;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty()) throw Error("config: key '" + name + "' outside any section");
    SectionReader reader(name, section);
    if (name.rfind(kChannelPrefix, 0) == 0) {
      ChannelSpec ch;
      ch.name = name.substr(kChannelPrefix.size());
      if (ch.name.empty()) throw Error("config: channel section needs a name, as in [channel.qbic]");
      bind_channel(reader, ch);
      reader.read();
      c.channels.push_back(ch);
    } else {
      bind_section(name, reader, c, schema);
      reader.read();
    }
  }
  if (schema != static_cast<std::uint64_t>(kConfigSchemaVersion))
    throw Error("config: unsupported schema_version " + std::to_string(schema));
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  auto num = [](double v) { return format_double(v); };
  auto yes = [](bool b) { return b ? "true" : "false"; };
  out << "[meta]\nschema_version = " << kConfigSchemaVersion << "\n\n";
  out << "[pump]\nwavelength_nm = " << num(c.pump_wavelength_nm) << "\npower_mw = " << num(c.pump_power_mw)
      << "\npolarization_deg = " << num(c.pump_polarization_deg) << "\n\n";
  for (const auto& ch : c.channels) {
    out << "[channel." << ch.name << "]\nlambda0_nm = " << num(ch.lambda0_nm) << "\ngamma_nm = " << num(ch.gamma_nm)
        << "\namplitude = " << num(ch.amplitude) << "\nphase_deg = " << num(ch.phase_deg)
        << "\npolarization_deg = " << num(ch.polarization_deg) << "\nrate_per_mw_hz = " << num(ch.rate_per_mw_hz)
        << "\ncoupling_deg = " << num(ch.coupling_deg) << "\n\n";
  }
  out << "[detection]\nefficiency_a = " << num(c.efficiency_a) << "\nefficiency_b = " << num(c.efficiency_b)
      << "\njitter_fwhm_ps = " << num(c.jitter_fwhm_ps) << "\ndeadtime_ps = " << num(c.deadtime_ps) << "\n\n";
  out << "[analyzer]\nenabled = " << yes(c.analyzer_enabled) << "\nangle_deg = " << num(c.analyzer_angle_deg)
      << "\n\n";
  out << "[background]\npl_rate_per_detector_hz = " << num(c.pl_rate_per_detector_hz) << "\n\n";
  out << "[passband]\nlow_nm = " << num(c.passband_low_nm) << "\nhigh_nm = " << num(c.passband_high_nm) << "\n\n";
  out << "[acquisition]\nduration_s = " << num(c.duration_s) << "\nslice_s = " << num(c.slice_s)
      << "\nseed = " << c.seed << "\n\n";
  out << "[histogram]\nbin_width_ps = " << num(c.bin_width_ps) << "\nwindow_ps = " << num(c.window_ps)
      << "\nguard_bins = " << c.guard_bins << "\n\n";
  out << "[dispersion]\nenabled = " << yes(c.dispersion_enabled)
      << "\nslope_ps_per_nm = " << num(c.dispersion_slope_ps_per_nm)
      << "\nref_lambda_nm = " << num(c.dispersion_ref_lambda_nm) << "\nfiber_length_km = " << num(c.fiber_length_km)
      << "\n\n";
  out << "[spectrum]\nlow_nm = " << num(c.spectrum_low_nm) << "\nhigh_nm = " << num(c.spectrum_high_nm)
      << "\nbin_nm = " << num(c.spectrum_bin_nm) << "\naccidental_offset_ps = " << num(c.accidental_offset_ps)
      << "\n\n";
  out << "[fit]\npoisson_weights = " << yes(c.fit_poisson_weights) << "\n\n";
  out << "[output]\ndir = " << c.output_dir << "\nformat = " << c.output_format << "\n";
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  write_config(out, config);
  return out.str();
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(serialize_config(config)); }

FileDigest digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return {path.string(), sha256_hex(buffer.str())};
}

std::string manifest_json(const ExperimentConfig* config, std::string_view command,
                          std::span<const FileDigest> inputs, std::span<const std::string> outputs) {
  nlohmann::json j;
  j["tool"] = "biphoton";
  j["version"] = kVersion;
  j["command"] = command;
  j["config_schema_version"] = kConfigSchemaVersion;
  j["tag_format_version"] = io::kTagFormatVersion;
  j["inputs"] = nlohmann::json::array();
  for (const auto& in : inputs) j["inputs"].push_back({{"path", in.path}, {"sha256", in.sha256}});
  j["outputs"] = std::vector<std::string>(outputs.begin(), outputs.end());
  if (config) {
    j["config_sha256"] = config_hash(*config);
    j["seed"] = config->seed;
    j["config"] = serialize_config(*config);
  }
  return j.dump(2) + "\n";
}

mc::DetectorStreams simulate(const ExperimentConfig& config, bool with_dispersion, std::optional<double> power_mw) {
  const double power = power_mw.value_or(config.pump_power_mw);
  return mc::simulate_acquisition(config.source(power), config.detection(with_dispersion), config.pl_rate_at(power),
                                  config.duration_s, config.seed, config.slice_s);
}

AnalysisSummary analyze(const mc::DetectorStreams& streams, const ExperimentConfig& config,
                        std::optional<std::size_t> guard) {
  const std::size_t g = guard.value_or(static_cast<std::size_t>(config.guard_bins));
  AnalysisSummary s{coincidence::build_histogram(streams.a, streams.b, config.bin_width_ps, config.window_ps,
                                                 config.duration_s),
                    {}, {}, {}};
  if (s.histogram.total() == 0) return s;
  s.stats = coincidence::peak_statistics(s.histogram, g);
  s.g2 = coincidence::g2_zero(s.histogram, g);
  if (config.duration_s > 0.0) s.rate = coincidence::real_coincidence_rate(s.histogram, g);
  return s;
}

void write_summary_csv(std::ostream& out, const AnalysisSummary& s) {
  const auto& h = s.histogram;
  out.precision(10);
  out << "quantity,value\n";
  out << "duration_s," << h.duration << '\n';
  out << "singles_a," << h.singles_a << '\n';
  out << "singles_b," << h.singles_b << '\n';
  out << "coincidences_in_window," << h.total() << '\n';
  const double nan = std::nan("");
  out << "central_bin_counts," << (s.stats ? s.stats->peak : 0.0) << '\n';
  out << "accidentals_per_bin," << (s.stats ? s.stats->background : nan) << '\n';
  if (s.g2 && s.g2->infinite)
    out << "g2_zero,inf\ng2_zero_sigma,nan\n";
  else
    out << "g2_zero," << (s.g2 ? s.g2->value : nan) << "\ng2_zero_sigma," << (s.g2 ? s.g2->sigma : nan) << '\n';
  out << "real_rate_hz," << (s.rate ? s.rate->value : nan) << '\n';
  out << "real_rate_sigma_hz," << (s.rate ? s.rate->sigma : nan) << '\n';
}

tof::SpectrumEstimate measure_spectrum(const mc::DetectorStreams& streams, const ExperimentConfig& config) {
  if (!config.dispersion_enabled || config.dispersion_slope_ps_per_nm == 0.0)
    throw Error("dispersion required: enable [dispersion] with a non-zero slope_ps_per_nm");
  return tof::measure_spectrum(streams.a, streams.b, config.dispersion(), config.pump_wavelength_nm,
                               config.spectrum_grid(), config.passband(), config.jitter_sigma_ps(),
                               config.accidental_offset_ps);
}

SweepResult power_sweep(const ExperimentConfig& config, std::span<const double> powers_mw) {
  if (powers_mw.size() < 3) throw Error("power sweep fit needs ≥3 points");
  if (!(config.duration_s > 0.0)) throw Error("power sweep needs duration > 0");
  SweepResult result;
  std::vector<std::pair<double, coincidence::RateEstimate>> points;
  for (std::size_t k = 0; k < powers_mw.size(); ++k) {
    if (!(powers_mw[k] >= 0.0)) throw Error("pump powers must be >= 0");
    ExperimentConfig point = config;
    point.seed = substream_seed(config.seed, k, StreamKind::sweep);
    const auto streams = simulate(point, false, powers_mw[k]);
    const auto summary = analyze(streams, point);
    SweepPoint p{powers_mw[k], summary.rate.value_or(coincidence::RateEstimate{}), summary.g2};
    result.points.push_back(p);
    points.emplace_back(p.power_mw, p.rate);
  }
  result.fit = coincidence::power_sweep_fit(points);
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out.precision(10);
  out << "power_mw,rate_hz,rate_sigma_hz,g2_zero\n";
  for (const auto& p : result.points)
    out << p.power_mw << ',' << p.rate.value << ',' << p.rate.sigma << ','
        << (p.g2 && !p.g2->infinite ? p.g2->value : std::nan("")) << '\n';
}

void write_sweep_summary(std::ostream& out, const SweepResult& result) {
  const auto& f = result.fit;
  out.precision(10);
  out << "quantity,value\n";
  out << "slope_hz_per_mw," << f.slope << "\nslope_sigma_hz_per_mw," << f.slope_sigma << '\n';
  out << "intercept_hz," << f.intercept << "\nintercept_sigma_hz," << f.intercept_sigma << '\n';
  out << "r_squared," << f.r_squared << "\nweighted," << (f.weighted ? 1 : 0) << '\n';
}

}  // namespace biphoton::experiment
