#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "biphoton/montecarlo.hpp"

namespace biphoton::tof {

/// Linear fiber dispersion: an arm delays a photon by slope·(λ − ref_lambda).
struct DispersionCalibration {
  double slope = 34.0;         // ps/nm per arm
  double ref_lambda = 1581.6;  // nm
  double fiber_length = 2.0;   // km, metadata only

  void validate() const;
};

/// Signal/idler pair for a coincidence delay.
///
/// Solves Δt = slope·(λs − λi) with 1/λs + 1/λi = 1/λp exactly: with
/// D = Δt/slope, λs = ((D + 2λp) + √(D² + 4λp²)) / 2 and λi = λs − D. The
/// signal is the photon seen on detector B (Δt = t_B − t_A), so Δt > 0 gives
/// λs > λi for a positive slope. Throws "out of dispersive range" if either
/// wavelength leaves the passband.
std::pair<double, double> delta_t_to_pair(double delta_t, const DispersionCalibration& cal, double lambda_pump,
                                          const mc::Passband& passband = {});

/// Δt produced by a pair, the forward map of delta_t_to_pair.
double pair_to_delta_t(double lambda_signal, double lambda_idler, const DispersionCalibration& cal);

struct SpectrumGrid {
  double low = 1450.0;
  double high = 1650.0;
  double bin_width = 0.5;

  std::size_t bins() const;
};

/// Coincidence spectrum on a uniform wavelength grid.
struct SpectrumEstimate {
  std::vector<double> grid;         // bin centers, nm
  std::vector<double> counts;       // raw entries per bin
  std::vector<double> accidentals;  // accidental estimate per bin, empty if none
  double resolution = 0.0;          // nm FWHM, 0 if unknown
  std::size_t accepted = 0;         // coincidences mapped
  std::size_t rejected = 0;         // coincidences outside range or grid

  double bin_width() const;
  /// counts − accidentals.
  std::vector<double> net() const;
  /// Per-bin variance of net(), counts + accidentals.
  std::vector<double> variance() const;
  void validate() const;
};

/// Bins both photons of every coincidence. Two photons landing in the same
/// bin give that bin two counts.
SpectrumEstimate accumulate_spectrum(std::span<const std::int64_t> delta_ts, const DispersionCalibration& cal,
                                     double lambda_pump, const SpectrumGrid& grid,
                                     const mc::Passband& passband = {});

/// Spectrum from two detector streams: coincidences within the dispersive
/// window are mapped, and the same window shifted by `accidental_offset`
/// ps gives the accidental estimate.
SpectrumEstimate measure_spectrum(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                  const DispersionCalibration& cal, double lambda_pump, const SpectrumGrid& grid,
                                  const mc::Passband& passband, double jitter_sigma_combined,
                                  double accidental_offset = 30000.0);

/// Jitter-limited FWHM resolution in nm for a combined (difference) jitter σ.
///
/// Near degeneracy dΔt/dλs = slope·(1 + (λi/λs)²) = 2·slope, so a Gaussian
/// delay spread of FWHM 2√(2 ln 2)·σ maps to that over 2·|slope|.
double estimate_resolution(const DispersionCalibration& cal, double jitter_sigma_combined);

struct FwhmOptions {
  /// Fixed background level; when unset the minimum of the 5-bin running
  /// mean of the net spectrum is used.
  std::optional<double> background;
};

/// Width at half of (peak − background), linearly interpolated between bins.
/// A single occupied bin has a width of one bin.
double fwhm(const SpectrumEstimate& spectrum, const FwhmOptions& options = {});

/// Center of the bin with the largest 3-bin running mean of the net counts;
/// ties go to the bin with more net counts.
double peak_wavelength(const SpectrumEstimate& spectrum);

void write_spectrum_csv(std::ostream& out, const SpectrumEstimate& spectrum);

/// Reads "lambda_nm,count[,accidental]" CSV.
SpectrumEstimate read_spectrum_csv(std::istream& in);

}  // namespace biphoton::tof
