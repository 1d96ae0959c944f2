#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biphoton/coincidence.hpp"
#include "biphoton/montecarlo.hpp"
#include "biphoton/timetag_io.hpp"
#include "biphoton/tof_spectrometer.hpp"

namespace biphoton::experiment {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

/// One emission channel as written in a config file. Angles are degrees.
struct ChannelSpec {
  std::string name;
  double lambda0_nm = 1581.6;
  double gamma_nm = 1.0;
  double amplitude = 1.0;
  double phase_deg = 0.0;
  double polarization_deg = 0.0;
  double rate_per_mw_hz = 0.0;
  double coupling_deg = 0.0;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

/// Complete description of a run. Field names carry their units; the config
/// file mirrors them as [section] key = value.
struct ExperimentConfig {
  // [pump]
  double pump_wavelength_nm = 790.8;
  double pump_power_mw = 55.0;
  double pump_polarization_deg = 0.0;
  // [channel.NAME], in file order
  std::vector<ChannelSpec> channels;
  // [detection]
  double efficiency_a = 1.0;
  double efficiency_b = 1.0;
  double jitter_fwhm_ps = 162.0;  // FWHM of t_B − t_A for a coincident pair
  double deadtime_ps = 0.0;
  // [analyzer]
  bool analyzer_enabled = false;
  double analyzer_angle_deg = 0.0;
  // [background]; PL flux per detector at pump_power_mw, linear in power
  double pl_rate_per_detector_hz = 0.0;
  // [passband]
  double passband_low_nm = 1450.0;
  double passband_high_nm = 1650.0;
  // [acquisition]
  double duration_s = 600.0;
  double slice_s = 1.0;
  std::uint64_t seed = 7908;
  // [histogram]
  double bin_width_ps = 900.0;
  double window_ps = 45000.0;
  std::uint64_t guard_bins = 1;
  // [dispersion]
  bool dispersion_enabled = false;
  double dispersion_slope_ps_per_nm = 34.0;
  double dispersion_ref_lambda_nm = 1581.6;
  double fiber_length_km = 2.0;
  // [spectrum]
  double spectrum_low_nm = 1450.0;
  double spectrum_high_nm = 1650.0;
  double spectrum_bin_nm = 0.5;
  double accidental_offset_ps = 30000.0;
  // [fit]
  bool fit_poisson_weights = false;
  // [output]
  std::string output_dir;
  std::string output_format = "bin";

  void validate() const;
  io::TagFormat tag_format() const;

  /// Source at `power_mw` (the configured power when unset).
  mc::SourceConfig source(std::optional<double> power_mw = {}) const;
  /// Detection chain; spools contribute only when dispersion is enabled.
  mc::DetectionChain detection(bool with_dispersion) const;
  tof::DispersionCalibration dispersion() const;
  tof::SpectrumGrid spectrum_grid() const;
  mc::Passband passband() const;
  double pl_rate_at(double power_mw) const;
  /// Standard deviation of t_B − t_A, jitter_fwhm_ps / (2√(2 ln 2)).
  double jitter_sigma_ps() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(write_config(c)) == c.
void write_config(std::ostream& out, const ExperimentConfig& config);
std::string serialize_config(const ExperimentConfig& config);

std::string sha256_hex(std::string_view data);
/// SHA-256 of the canonical serialization.
std::string config_hash(const ExperimentConfig& config);

struct FileDigest {
  std::string path;
  std::string sha256;
};

FileDigest digest_file(const std::filesystem::path& path);

/// JSON run record: tool version, command, format versions, input file
/// digests, produced files and, when a config was used, its hash, seed and
/// canonical text.
std::string manifest_json(const ExperimentConfig* config, std::string_view command,
                          std::span<const FileDigest> inputs, std::span<const std::string> outputs);

/// Simulated acquisition for the config at `power_mw` with the configured seed.
mc::DetectorStreams simulate(const ExperimentConfig& config, bool with_dispersion,
                             std::optional<double> power_mw = {});

struct AnalysisSummary {
  coincidence::CoincidenceHistogram histogram;
  std::optional<coincidence::PeakStatistics> stats;  // unset without coincidences
  std::optional<coincidence::G2Estimate> g2;
  std::optional<coincidence::RateEstimate> rate;
};

AnalysisSummary analyze(const mc::DetectorStreams& streams, const ExperimentConfig& config,
                        std::optional<std::size_t> guard = {});
void write_summary_csv(std::ostream& out, const AnalysisSummary& summary);

tof::SpectrumEstimate measure_spectrum(const mc::DetectorStreams& streams, const ExperimentConfig& config);

struct SweepPoint {
  double power_mw = 0.0;
  coincidence::RateEstimate rate;
  std::optional<coincidence::G2Estimate> g2;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  coincidence::LineFit fit;
};

/// Real coincidence rate against pump power. Each point is an independent
/// acquisition of duration_s with its own seed derived from the master seed
/// and the point index; spools are removed as for any rate measurement.
SweepResult power_sweep(const ExperimentConfig& config, std::span<const double> powers_mw);
void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_sweep_summary(std::ostream& out, const SweepResult& result);

}  // namespace biphoton::experiment
