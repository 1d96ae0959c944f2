#include "biphoton/tof_spectrometer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "biphoton/coincidence.hpp"
#include "biphoton/error.hpp"

namespace biphoton::tof {

namespace {

const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

std::vector<double> running_mean(std::span<const double> values, std::size_t half) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size() - 1, i + half);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += values[k];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

void bin_pairs(std::span<const std::int64_t> delta_ts, std::int64_t offset, const DispersionCalibration& cal,
               double lambda_pump, const mc::Passband& passband, const SpectrumGrid& grid, std::vector<double>& counts,
               std::size_t& accepted, std::size_t& rejected) {
  const std::size_t bins = counts.size();
  for (const auto dt : delta_ts) {
    std::pair<double, double> pair;
    try {
      pair = delta_t_to_pair(static_cast<double>(dt - offset), cal, lambda_pump, passband);
    } catch (const Error&) {
      ++rejected;
      continue;
    }
    const double fs = std::floor((pair.first - grid.low) / grid.bin_width);
    const double fi = std::floor((pair.second - grid.low) / grid.bin_width);
    if (fs < 0.0 || fi < 0.0 || fs >= static_cast<double>(bins) || fi >= static_cast<double>(bins)) {
      ++rejected;
      continue;
    }
    counts[static_cast<std::size_t>(fs)] += 1.0;
    counts[static_cast<std::size_t>(fi)] += 1.0;
    ++accepted;
  }
}

SpectrumEstimate empty_spectrum(const SpectrumGrid& grid) {
  const std::size_t bins = grid.bins();
  SpectrumEstimate out;
  out.grid.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) out.grid[k] = grid.low + (static_cast<double>(k) + 0.5) * grid.bin_width;
  out.counts.assign(bins, 0.0);
  return out;
}

}  // namespace

void DispersionCalibration::validate() const {
  if (slope == 0.0 || !std::isfinite(slope)) throw Error("dispersion required: calibration slope must be non-zero");
  if (!(ref_lambda > 0.0)) throw Error("dispersion reference wavelength must be > 0");
}

std::pair<double, double> delta_t_to_pair(double delta_t, const DispersionCalibration& cal, double lambda_pump,
                                          const mc::Passband& passband) {
  cal.validate();
  const double d = delta_t / cal.slope;
  const double signal = 0.5 * ((d + 2.0 * lambda_pump) + std::sqrt(d * d + 4.0 * lambda_pump * lambda_pump));
  const double idler = signal - d;
  if (!passband.contains(signal) || !passband.contains(idler)) throw Error("out of dispersive range");
  return {signal, idler};
}

double pair_to_delta_t(double lambda_signal, double lambda_idler, const DispersionCalibration& cal) {
  return cal.slope * (lambda_signal - lambda_idler);
}

std::size_t SpectrumGrid::bins() const {
  if (!(bin_width > 0.0) || !(high > low)) throw Error("spectrum grid needs low < high and bin width > 0");
  return static_cast<std::size_t>(std::llround((high - low) / bin_width));
}

double SpectrumEstimate::bin_width() const {
  if (grid.size() < 2) throw Error("spectrum needs at least two bins");
  return grid[1] - grid[0];
}

std::vector<double> SpectrumEstimate::net() const {
  std::vector<double> out = counts;
  if (!accidentals.empty())
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= accidentals[k];
  return out;
}

std::vector<double> SpectrumEstimate::variance() const {
  std::vector<double> out = counts;
  if (!accidentals.empty())
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += accidentals[k];
  for (auto& v : out) v = std::max(v, 1.0);
  return out;
}

void SpectrumEstimate::validate() const {
  if (grid.size() != counts.size()) throw Error("spectrum grid and counts differ in length");
  if (!accidentals.empty() && accidentals.size() != counts.size())
    throw Error("spectrum accidentals and counts differ in length");
  if (grid.size() >= 2) {
    const double step = grid[1] - grid[0];
    if (!(step > 0.0)) throw Error("spectrum grid must be strictly increasing");
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (std::abs((grid[k] - grid[k - 1]) - step) > 1e-6 * step) throw Error("spectrum grid must be uniform");
  }
  for (double c : counts)
    if (c < 0.0) throw Error("spectrum counts must be >= 0");
  for (double c : accidentals)
    if (c < 0.0) throw Error("spectrum accidentals must be >= 0");
}

SpectrumEstimate accumulate_spectrum(std::span<const std::int64_t> delta_ts, const DispersionCalibration& cal,
                                     double lambda_pump, const SpectrumGrid& grid, const mc::Passband& passband) {
  cal.validate();
  auto out = empty_spectrum(grid);
  bin_pairs(delta_ts, 0, cal, lambda_pump, passband, grid, out.counts, out.accepted, out.rejected);
  return out;
}

SpectrumEstimate measure_spectrum(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                  const DispersionCalibration& cal, double lambda_pump, const SpectrumGrid& grid,
                                  const mc::Passband& passband, double jitter_sigma_combined,
                                  double accidental_offset) {
  cal.validate();
  const auto [low, high] = mc::pair_wavelength_range(passband, lambda_pump);
  const auto reach = static_cast<std::int64_t>(std::ceil(std::abs(cal.slope) * (high - low)));
  const auto offset = static_cast<std::int64_t>(std::llround(accidental_offset));
  if (offset <= 2 * reach) throw Error("accidental offset must exceed twice the dispersive window");

  auto out = empty_spectrum(grid);
  const auto signal = coincidence::find_coincidences(tags_a, tags_b, -reach, reach);
  bin_pairs(signal, 0, cal, lambda_pump, passband, grid, out.counts, out.accepted, out.rejected);

  out.accidentals.assign(out.counts.size(), 0.0);
  const auto shifted = coincidence::find_coincidences(tags_a, tags_b, offset - reach, offset + reach);
  std::size_t ignored_accepted = 0, ignored_rejected = 0;
  bin_pairs(shifted, offset, cal, lambda_pump, passband, grid, out.accidentals, ignored_accepted, ignored_rejected);
  out.resolution = jitter_sigma_combined > 0.0 ? estimate_resolution(cal, jitter_sigma_combined) : 0.0;
  return out;
}

double estimate_resolution(const DispersionCalibration& cal, double jitter_sigma_combined) {
  if (cal.slope == 0.0) throw Error("resolution undefined for zero dispersion slope");
  if (jitter_sigma_combined < 0.0) throw Error("jitter must be >= 0");
  return kFwhmPerSigma * jitter_sigma_combined / (2.0 * std::abs(cal.slope));
}

double fwhm(const SpectrumEstimate& spectrum, const FwhmOptions& options) {
  spectrum.validate();
  const auto net = spectrum.net();
  if (net.size() < 2) throw Error("spectrum needs at least two bins");
  const double background = options.background ? *options.background : [&] {
    const auto smooth = running_mean(net, 2);
    return *std::min_element(smooth.begin(), smooth.end());
  }();
  const auto peak_it = std::max_element(net.begin(), net.end());
  const double peak = *peak_it;
  if (!(peak > background)) throw Error("no peak above background");
  const double half = background + 0.5 * (peak - background);
  const std::size_t k = static_cast<std::size_t>(peak_it - net.begin());
  const double step = spectrum.bin_width();

  std::size_t left = k;
  while (left > 0 && net[left - 1] > half) --left;
  if (left == 0) throw Error("peak is not bounded within the spectrum");
  std::size_t right = k;
  while (right + 1 < net.size() && net[right + 1] > half) ++right;
  if (right + 1 == net.size()) throw Error("peak is not bounded within the spectrum");

  // net[left - 1] <= half < net[left], and likewise on the right.
  const double x_left =
      spectrum.grid[left - 1] + step * (half - net[left - 1]) / (net[left] - net[left - 1]);
  const double x_right =
      spectrum.grid[right] + step * (net[right] - half) / (net[right] - net[right + 1]);
  return x_right - x_left;
}

double peak_wavelength(const SpectrumEstimate& spectrum) {
  spectrum.validate();
  if (spectrum.grid.empty()) throw Error("empty spectrum");
  const auto net = spectrum.net();
  const auto smooth = running_mean(net, 1);
  // Ties in the smoothed curve (an isolated line) go to the larger raw bin.
  std::size_t best = 0;
  for (std::size_t k = 1; k < smooth.size(); ++k)
    if (smooth[k] > smooth[best] || (smooth[k] == smooth[best] && net[k] > net[best])) best = k;
  return spectrum.grid[best];
}

void write_spectrum_csv(std::ostream& out, const SpectrumEstimate& spectrum) {
  const bool with_accidentals = !spectrum.accidentals.empty();
  out << (with_accidentals ? "lambda_nm,count,accidental\n" : "lambda_nm,count\n");
  out.precision(10);
  for (std::size_t k = 0; k < spectrum.grid.size(); ++k) {
    out << spectrum.grid[k] << ',' << spectrum.counts[k];
    if (with_accidentals) out << ',' << spectrum.accidentals[k];
    out << '\n';
  }
}

SpectrumEstimate read_spectrum_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty spectrum csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool with_accidentals = false;
  if (line == "lambda_nm,count,accidental")
    with_accidentals = true;
  else if (line != "lambda_nm,count")
    throw Error("spectrum csv header must be 'lambda_nm,count[,accidental]'");

  SpectrumEstimate out;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double lambda = 0, count = 0, accidental = 0;
    fields >> lambda >> count;
    if (with_accidentals) fields >> accidental;
    if (!fields) throw Error("spectrum csv line " + std::to_string(number) + ": malformed");
    out.grid.push_back(lambda);
    out.counts.push_back(count);
    if (with_accidentals) out.accidentals.push_back(accidental);
  }
  out.validate();
  return out;
}

}  // namespace biphoton::tof
