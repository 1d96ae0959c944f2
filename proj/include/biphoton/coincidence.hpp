#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace biphoton::coincidence {

/// Bin layout of an arrival-time-difference histogram. Bin k covers
/// [first_edge + k·bin_width, first_edge + (k+1)·bin_width).
struct HistogramSpec {
  double bin_width = 900.0;  // ps
  double first_edge = -450.0;
  std::size_t bins = 1;

  /// Odd bin count with the central bin [−w/2, w/2); the outer bin centers
  /// sit at ±round(window / bin_width)·bin_width.
  static HistogramSpec centered(double bin_width, double window);

  double last_edge() const { return first_edge + bin_width * static_cast<double>(bins); }
  double bin_center(std::size_t k) const { return first_edge + (static_cast<double>(k) + 0.5) * bin_width; }
};

struct CoincidenceHistogram {
  HistogramSpec spec;
  std::vector<std::uint64_t> counts;
  double duration = 0.0;  // s
  std::uint64_t singles_a = 0;
  std::uint64_t singles_b = 0;

  /// Index of the bin containing Δt = 0.
  std::size_t central_bin() const;
  std::uint64_t total() const;
};

struct RateEstimate {
  double value = 0.0;  // Hz
  double sigma = 0.0;  // Hz
};

/// Counts every (a, b) pair with Δt = t_b − t_a inside the histogram range.
/// Two-pointer sweep, O(N_A + N_B + C). Throws on unsorted input.
CoincidenceHistogram build_histogram(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                     const HistogramSpec& spec, double duration = 0.0);

CoincidenceHistogram build_histogram(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                     double bin_width, double window, double duration = 0.0);

/// Adds `other` into `into`; both must share the bin layout.
void merge_into(CoincidenceHistogram& into, const CoincidenceHistogram& other);

/// All Δt = t_b − t_a with lo ≤ Δt ≤ hi, in sweep order.
std::vector<std::int64_t> find_coincidences(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                            std::int64_t lo, std::int64_t hi);

/// Peak and off-peak bin statistics under a guard of `guard` bins either side
/// of the central bin.
struct PeakStatistics {
  double peak = 0.0;          // central-bin count
  double background = 0.0;    // mean off-peak count
  std::size_t off_bins = 0;
};

PeakStatistics peak_statistics(const CoincidenceHistogram& hist, std::size_t guard = 1);

struct G2Estimate {
  double value = 0.0;
  double sigma = 0.0;
  bool infinite = false;  // no off-peak counts at all
};

/// Central-bin count over mean off-peak count.
G2Estimate g2_zero(const CoincidenceHistogram& hist, std::size_t guard = 1);

/// (central − mean off-peak) / duration with σ = √(C + C_acc(1 + 1/N)) / T.
RateEstimate real_coincidence_rate(const CoincidenceHistogram& hist, std::size_t guard = 1);

struct LineFit {
  double slope = 0.0;  // Hz/mW
  double intercept = 0.0;
  double slope_sigma = 0.0;
  double intercept_sigma = 0.0;
  double r_squared = 0.0;
  bool weighted = true;
};

/// Weighted (1/σ²) straight-line fit of rate against pump power. Falls back
/// to unit weights when any σ is zero.
LineFit power_sweep_fit(std::span<const std::pair<double, RateEstimate>> points);

/// Rate attributed to the spectral peak window and to its complement.
struct RateSplit {
  RateEstimate peak;
  RateEstimate pedestal;
  double peak_fraction = 0.0;
};

/// Real rate per spectrum bin count (`net`, at `grid`) split by a window.
///
/// The pedestal under [window_low, window_high] is a straight line fitted to
/// sidebands of the same width on either side; the excess above it is the
/// peak share of all counts in the spectrum. `variance` holds per-bin count
/// variances (defaults to max(|net|, 1)).
RateSplit channel_rate_split(std::span<const double> grid, std::span<const double> net, double window_low,
                             double window_high, const RateEstimate& total, std::span<const double> variance = {});

/// Bandwidth-normalized efficiency, Hz/(mW·nm).
double normalized_rate(const RateEstimate& rate, double power_mw, double bandwidth_nm);

void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& hist);

}  // namespace biphoton::coincidence
