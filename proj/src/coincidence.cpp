#include "biphoton/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "biphoton/error.hpp"

namespace biphoton::coincidence {

HistogramSpec HistogramSpec::centered(double bin_width, double window) {
  if (!(bin_width > 0.0)) throw Error("bin width must be > 0");
  if (!(window >= 0.0)) throw Error("window must be >= 0");
  const auto half = static_cast<std::size_t>(std::llround(window / bin_width));
  return {bin_width, -(static_cast<double>(half) + 0.5) * bin_width, 2 * half + 1};
}

std::size_t CoincidenceHistogram::central_bin() const {
  const double index = std::floor(-spec.first_edge / spec.bin_width);
  if (index < 0.0 || index >= static_cast<double>(counts.size())) throw Error("histogram range excludes zero delay");
  return static_cast<std::size_t>(index);
}

std::uint64_t CoincidenceHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

namespace {

void require_sorted(std::span<const std::int64_t> tags) {
  if (!std::is_sorted(tags.begin(), tags.end())) throw Error("unsorted input: time tags must be nondecreasing");
}

// Calls visit(Δt) for every b with lo ≤ Δt < hi relative to each a.
template <typename Visit>
void sweep(std::span<const std::int64_t> a, std::span<const std::int64_t> b, double lo, double hi, bool hi_inclusive,
           Visit&& visit) {
  std::size_t start = 0;
  for (const std::int64_t ta : a) {
    while (start < b.size() && static_cast<double>(b[start] - ta) < lo) ++start;
    for (std::size_t k = start; k < b.size(); ++k) {
      const auto dt = b[k] - ta;
      const auto d = static_cast<double>(dt);
      if (hi_inclusive ? d > hi : d >= hi) break;
      visit(dt);
    }
  }
}

}  // namespace

CoincidenceHistogram build_histogram(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                     const HistogramSpec& spec, double duration) {
  if (!(spec.bin_width > 0.0) || spec.bins == 0) throw Error("histogram needs a positive bin width and >= 1 bin");
  require_sorted(tags_a);
  require_sorted(tags_b);
  CoincidenceHistogram hist{spec, std::vector<std::uint64_t>(spec.bins, 0), duration, tags_a.size(), tags_b.size()};
  sweep(tags_a, tags_b, spec.first_edge, spec.last_edge(), false, [&](std::int64_t dt) {
    auto k = static_cast<std::size_t>(std::floor((static_cast<double>(dt) - spec.first_edge) / spec.bin_width));
    // Guards the last edge against rounding in the division.
    if (k >= spec.bins) k = spec.bins - 1;
    ++hist.counts[k];
  });
  return hist;
}

CoincidenceHistogram build_histogram(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                     double bin_width, double window, double duration) {
  return build_histogram(tags_a, tags_b, HistogramSpec::centered(bin_width, window), duration);
}

void merge_into(CoincidenceHistogram& into, const CoincidenceHistogram& other) {
  if (into.spec.bins != other.spec.bins || into.spec.bin_width != other.spec.bin_width ||
      into.spec.first_edge != other.spec.first_edge)
    throw Error("cannot merge histograms with different bin layouts");
  for (std::size_t k = 0; k < into.counts.size(); ++k) into.counts[k] += other.counts[k];
  into.duration += other.duration;
  into.singles_a += other.singles_a;
  into.singles_b += other.singles_b;
}

std::vector<std::int64_t> find_coincidences(std::span<const std::int64_t> tags_a, std::span<const std::int64_t> tags_b,
                                            std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw Error("coincidence window lower bound exceeds upper bound");
  require_sorted(tags_a);
  require_sorted(tags_b);
  std::vector<std::int64_t> out;
  sweep(tags_a, tags_b, static_cast<double>(lo), static_cast<double>(hi), true,
        [&](std::int64_t dt) { out.push_back(dt); });
  return out;
}

PeakStatistics peak_statistics(const CoincidenceHistogram& hist, std::size_t guard) {
  if (hist.total() == 0) throw Error("no coincidences");
  const std::size_t centre = hist.central_bin();
  double off_sum = 0.0;
  std::size_t off_bins = 0;
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    const std::size_t distance = k > centre ? k - centre : centre - k;
    if (distance <= guard) continue;
    off_sum += static_cast<double>(hist.counts[k]);
    ++off_bins;
  }
  if (off_bins == 0) throw Error("histogram has no off-peak bins for the accidental estimate");
  return {static_cast<double>(hist.counts[centre]), off_sum / static_cast<double>(off_bins), off_bins};
}

G2Estimate g2_zero(const CoincidenceHistogram& hist, std::size_t guard) {
  const auto stats = peak_statistics(hist, guard);
  if (stats.background == 0.0) return {std::numeric_limits<double>::infinity(), 0.0, true};
  const double g2 = stats.peak / stats.background;
  const double rel2 = (stats.peak > 0.0 ? 1.0 / stats.peak : 0.0) +
                      1.0 / (stats.background * static_cast<double>(stats.off_bins));
  return {g2, g2 * std::sqrt(rel2), false};
}

RateEstimate real_coincidence_rate(const CoincidenceHistogram& hist, std::size_t guard) {
  if (!(hist.duration > 0.0)) throw Error("histogram duration must be > 0 to form a rate");
  const auto stats = peak_statistics(hist, guard);
  const double n = static_cast<double>(stats.off_bins);
  const double value = (stats.peak - stats.background) / hist.duration;
  const double sigma = std::sqrt(stats.peak + stats.background * (1.0 + 1.0 / n)) / hist.duration;
  return {value, sigma};
}

LineFit power_sweep_fit(std::span<const std::pair<double, RateEstimate>> points) {
  if (points.size() < 3) throw Error("power sweep fit needs ≥3 points");
  const bool weighted =
      std::all_of(points.begin(), points.end(), [](const auto& p) { return p.second.sigma > 0.0; });
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, rate] : points) {
    const double w = weighted ? 1.0 / (rate.sigma * rate.sigma) : 1.0;
    s += w;
    sx += w * x;
    sy += w * rate.value;
    sxx += w * x * x;
    sxy += w * x * rate.value;
  }
  const double det = s * sxx - sx * sx;
  if (!(det > 0.0)) throw Error("power sweep fit needs at least two distinct powers");
  LineFit fit;
  fit.weighted = weighted;
  fit.slope = (s * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;

  const double mean = sy / s;
  double ss_res = 0, ss_tot = 0;
  for (const auto& [x, rate] : points) {
    const double w = weighted ? 1.0 / (rate.sigma * rate.sigma) : 1.0;
    const double r = rate.value - (fit.intercept + fit.slope * x);
    ss_res += w * r * r;
    ss_tot += w * (rate.value - mean) * (rate.value - mean);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  // Absolute weights give the covariance directly; unit weights need the
  // residual variance.
  const double scale = weighted ? 1.0 : ss_res / static_cast<double>(points.size() - 2);
  fit.slope_sigma = std::sqrt(scale * s / det);
  fit.intercept_sigma = std::sqrt(scale * sxx / det);
  return fit;
}

RateSplit channel_rate_split(std::span<const double> grid, std::span<const double> net, double window_low,
                             double window_high, const RateEstimate& total, std::span<const double> variance) {
  if (grid.size() != net.size() || grid.size() < 2) throw Error("spectrum grid and counts must match");
  if (!variance.empty() && variance.size() != net.size()) throw Error("spectrum variance must match counts");
  auto var_of = [&](std::size_t i) { return variance.empty() ? std::max(std::abs(net[i]), 1.0) : variance[i]; };
  if (!(window_low < window_high)) throw Error("peak window must have low < high");
  const double step = grid[1] - grid[0];
  if (window_low < grid.front() - 0.5 * step || window_high > grid.back() + 0.5 * step)
    throw Error("window outside spectral range");
  const double width = window_high - window_low;

  std::vector<std::size_t> inside, sidebands;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] >= window_low && grid[i] <= window_high)
      inside.push_back(i);
    else if (grid[i] >= window_low - width && grid[i] <= window_high + width)
      sidebands.push_back(i);
  }
  if (inside.empty()) throw Error("peak window contains no spectrum bins");

  // Pedestal under the window as a least-squares line through the sidebands,
  // written as Σ_s c_s·y_s so its variance follows directly.
  std::vector<double> coeff(sidebands.size(), 0.0);
  if (sidebands.size() >= 2) {
    double mx = 0.0;
    for (auto s : sidebands) mx += grid[s];
    mx /= static_cast<double>(sidebands.size());
    double sxx = 0.0;
    for (auto s : sidebands) sxx += (grid[s] - mx) * (grid[s] - mx);
    double sum_dx = 0.0;
    for (auto i : inside) sum_dx += grid[i] - mx;
    const double m = static_cast<double>(inside.size());
    for (std::size_t j = 0; j < sidebands.size(); ++j) {
      const double dx = grid[sidebands[j]] - mx;
      coeff[j] = m / static_cast<double>(sidebands.size()) + (sxx > 0.0 ? sum_dx * dx / sxx : 0.0);
    }
  } else if (sidebands.size() == 1) {
    coeff[0] = static_cast<double>(inside.size());
  }

  double window_sum = 0.0, window_var = 0.0;
  for (auto i : inside) {
    window_sum += net[i];
    window_var += var_of(i);
  }
  double pedestal = 0.0, pedestal_var = 0.0;
  for (std::size_t j = 0; j < sidebands.size(); ++j) {
    pedestal += coeff[j] * net[sidebands[j]];
    pedestal_var += coeff[j] * coeff[j] * var_of(sidebands[j]);
  }
  const double all = std::accumulate(net.begin(), net.end(), 0.0);
  if (!(all > 0.0)) throw Error("spectrum has no net counts to split");

  const double fraction = (window_sum - pedestal) / all;
  const double fraction_sigma = std::sqrt(window_var + pedestal_var) / all;
  RateSplit split;
  split.peak_fraction = fraction;
  split.peak.value = fraction * total.value;
  split.peak.sigma = std::hypot(fraction * total.sigma, total.value * fraction_sigma);
  split.pedestal.value = (1.0 - fraction) * total.value;
  split.pedestal.sigma = std::hypot((1.0 - fraction) * total.sigma, total.value * fraction_sigma);
  return split;
}

double normalized_rate(const RateEstimate& rate, double power_mw, double bandwidth_nm) {
  if (!(power_mw > 0.0) || !(bandwidth_nm > 0.0)) throw Error("normalized rate needs power and bandwidth > 0");
  return rate.value / (power_mw * bandwidth_nm);
}

void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& hist) {
  out << "bin_center_ps,count\n";
  for (std::size_t k = 0; k < hist.counts.size(); ++k) out << hist.spec.bin_center(k) << ',' << hist.counts[k] << '\n';
}

}  // namespace biphoton::coincidence
