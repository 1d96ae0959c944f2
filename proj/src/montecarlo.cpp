#include "biphoton/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "biphoton/error.hpp"

namespace biphoton::mc {

namespace {

constexpr double kPsPerSecond = 1e12;
// Grid step of the tabulated interfering density, nm.
constexpr double kMixedGridStep = 0.01;

// ∫_low^high |a(λ)|² dλ for a single complex-pole Lorentzian.
double lorentzian_integral(const spectral::ResonanceChannel& ch, double low, double high) {
  const double hw = 0.5 * ch.gamma;
  return ch.amplitude * ch.amplitude * hw * (std::atan((high - ch.lambda0) / hw) - std::atan((low - ch.lambda0) / hw));
}

void apply_deadtime(std::vector<std::int64_t>& tags, double deadtime) {
  if (deadtime <= 0.0 || tags.empty()) return;
  std::size_t kept = 1;
  std::int64_t last = tags.front();
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (static_cast<double>(tags[i] - last) >= deadtime) {
      last = tags[i];
      tags[kept++] = tags[i];
    }
  }
  tags.resize(kept);
}

class Detection {
 public:
  Detection(const DetectionChain& chain, std::span<const spectral::ResonanceChannel> channels,
            const spectral::AnalyzerSetting& analyzer)
      : chain_(chain), analyzer_(analyzer), jitter_(0.0, chain.jitter_sigma_combined / std::numbers::sqrt2) {
    survival_.reserve(channels.size());
    for (const auto& ch : channels) survival_.push_back(std::norm(spectral::channel_weight(ch, analyzer)));
  }

  void run(std::span<const PairEvent> pairs, std::span<const BackgroundEvent> background, Rng& rng,
           DetectorStreams& out) {
    // Distributions may cache draws; start every interval clean so a slice
    // depends only on its own substream.
    jitter_.reset();
    unit_.reset();
    for (const auto& pair : pairs) {
      if (analyzer_.enabled && pair.channel != kMixedChannel) {
        const auto idx = static_cast<std::size_t>(pair.channel);
        if (idx >= survival_.size()) throw Error("pair event references unknown channel");
        if (unit_(rng) >= survival_[idx]) continue;
      }
      photon(pair.t_emit, pair.lambda_signal, rng, out);
      photon(pair.t_emit, pair.lambda_idler, rng, out);
    }
    for (const auto& event : background) {
      if (analyzer_.enabled && unit_(rng) >= 0.5) continue;
      photon(event.t_emit, event.lambda, rng, out);
    }
  }

 private:
  void photon(double t_emit, double lambda, Rng& rng, DetectorStreams& out) {
    const bool to_b = unit_(rng) < 0.5;
    const double efficiency = to_b ? chain_.efficiency_b : chain_.efficiency_a;
    if (unit_(rng) >= efficiency) return;
    if (!chain_.filter.contains(lambda)) return;
    double t = t_emit + chain_.dispersion_slope * (lambda - chain_.dispersion_ref_lambda);
    if (chain_.jitter_sigma_combined > 0.0) t += jitter_(rng);
    const auto stamp = static_cast<std::int64_t>(std::llround(t));
    if (stamp < 0) return;
    (to_b ? out.b : out.a).push_back(stamp);
  }

  const DetectionChain& chain_;
  const spectral::AnalyzerSetting& analyzer_;
  std::vector<double> survival_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> jitter_;
};

void finish(DetectorStreams& streams, double deadtime) {
  std::sort(streams.a.begin(), streams.a.end());
  std::sort(streams.b.begin(), streams.b.end());
  apply_deadtime(streams.a, deadtime);
  apply_deadtime(streams.b, deadtime);
}

void append_background(double rate, const Passband& passband, const Interval& interval, Rng& rng,
                       const BackgroundSpectrum& spectrum, std::vector<BackgroundEvent>& out) {
  if (rate < 0.0) throw Error("background rate must be >= 0");
  if (rate == 0.0) return;
  std::exponential_distribution<double> gap(rate / kPsPerSecond);
  std::uniform_real_distribution<double> uniform(passband.low, passband.high);
  std::piecewise_linear_distribution<double> tabulated;
  const bool use_table = !spectrum.lambda.empty();
  if (use_table) {
    if (spectrum.lambda.size() != spectrum.density.size() || spectrum.lambda.size() < 2)
      throw Error("background spectrum table needs matching lambda/density columns");
    tabulated = std::piecewise_linear_distribution<double>(spectrum.lambda.begin(), spectrum.lambda.end(),
                                                           spectrum.density.begin());
  }
  const double end = interval.end * kPsPerSecond;
  double t = interval.begin * kPsPerSecond;
  while (true) {
    t += gap(rng);
    if (t >= end) break;
    out.push_back({t, use_table ? tabulated(rng) : uniform(rng)});
  }
}

}  // namespace

void Passband::validate() const {
  if (!(low > 0.0) || !(low < high)) throw Error("passband requires 0 < low < high");
}

void SourceConfig::validate() const {
  pump.validate();
  passband.validate();
  if (channels.empty()) throw Error("no emission channels");
  for (const auto& ch : channels) {
    ch.resonance.validate();
    if (!(ch.rate_per_mw >= 0.0)) throw Error("channel '" + ch.resonance.id + "': rate must be >= 0");
  }
  if (!(passband.low > pump.lambda_pump)) throw Error("passband must lie above the pump wavelength");
}

std::vector<spectral::ResonanceChannel> SourceConfig::resonances() const {
  std::vector<spectral::ResonanceChannel> out;
  out.reserve(channels.size());
  for (const auto& ch : channels) out.push_back(ch.resonance);
  return out;
}

void DetectionChain::validate() const {
  if (!(efficiency_a >= 0.0 && efficiency_a <= 1.0) || !(efficiency_b >= 0.0 && efficiency_b <= 1.0))
    throw Error("detector efficiency must be within [0, 1]");
  if (!(jitter_sigma_combined >= 0.0)) throw Error("jitter must be >= 0");
  if (!(deadtime >= 0.0)) throw Error("dead time must be >= 0");
  filter.validate();
}

std::vector<Interval> partition(double duration, double slice) {
  if (!(duration >= 0.0)) throw Error("duration must be >= 0");
  if (!(slice > 0.0)) throw Error("slice length must be > 0");
  std::vector<Interval> out;
  for (std::uint64_t k = 0;; ++k) {
    const double begin = static_cast<double>(k) * slice;
    if (begin >= duration) break;
    out.push_back({k, begin, std::min(duration, begin + slice)});
  }
  return out;
}

std::pair<double, double> pair_wavelength_range(const Passband& passband, double lambda_pump) {
  const double low = std::max(passband.low, spectral::conjugate_wavelength(passband.high, lambda_pump));
  const double high = std::min(passband.high, spectral::conjugate_wavelength(passband.low, lambda_pump));
  if (!(low < high)) throw Error("passband admits no energy-conserving pairs");
  return {low, high};
}

PairSampler::PairSampler(const SourceConfig& source) : source_(source) {
  source_.validate();
  std::tie(low_, high_) = pair_wavelength_range(source_.passband, source_.pump.lambda_pump);
  for (const auto& ch : source_.channels) {
    const double coupling = spectral::pump_coupling(source_.pump.polarization_angle, ch.coupling_angle);
    rates_.push_back(ch.rate_per_mw * source_.pump.power * coupling);
  }
  mixed_ = source_.analyzer.enabled;
  if (!mixed_) return;

  std::vector<spectral::ResonanceChannel> scaled;
  for (std::size_t i = 0; i < source_.channels.size(); ++i) {
    auto ch = source_.channels[i].resonance;
    const double norm = lorentzian_integral(ch, low_, high_);
    // Amplitude that integrates to the channel rate on its own; the
    // unit-amplitude integral is norm / A².
    ch.amplitude = norm > 0.0 ? std::sqrt(rates_[i] / (norm / (ch.amplitude * ch.amplitude))) : 0.0;
    scaled.push_back(ch);
  }
  const auto steps = static_cast<std::size_t>(std::ceil((high_ - low_) / kMixedGridStep));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) grid[k] = low_ + (high_ - low_) * static_cast<double>(k) / steps;
  const auto density = spectral::joint_spectral_intensity(grid, scaled, source_.analyzer, true);
  for (std::size_t k = 0; k < steps; ++k) mixed_rate_ += 0.5 * (density[k] + density[k + 1]) * (grid[k + 1] - grid[k]);
  if (mixed_rate_ > 0.0)
    mixed_density_ = std::piecewise_linear_distribution<double>(grid.begin(), grid.end(), density.begin());
}

double PairSampler::total_rate() const {
  if (mixed_) return mixed_rate_;
  double sum = 0.0;
  for (double r : rates_) sum += r;
  return sum;
}

double PairSampler::draw_lorentzian(const spectral::ResonanceChannel& ch, Rng& rng) const {
  const double hw = 0.5 * ch.gamma;
  std::uniform_real_distribution<double> angle(std::atan((low_ - ch.lambda0) / hw), std::atan((high_ - ch.lambda0) / hw));
  return std::clamp(ch.lambda0 + hw * std::tan(angle(rng)), low_, high_);
}

std::vector<PairEvent> PairSampler::sample(double begin, double end, Rng& rng) const {
  std::vector<PairEvent> out;
  const double span = end - begin;
  if (!(span > 0.0)) return out;
  std::uniform_real_distribution<double> when(begin * kPsPerSecond, end * kPsPerSecond);
  const double lambda_pump = source_.pump.lambda_pump;

  auto emit = [&](int channel, double rate, auto&& draw_signal) {
    if (rate <= 0.0) return;
    std::poisson_distribution<long long> count(rate * span);
    const long long n = count(rng);
    for (long long k = 0; k < n; ++k) {
      const double t = when(rng);
      const double signal = draw_signal();
      out.push_back({t, signal, spectral::conjugate_wavelength(signal, lambda_pump), channel});
    }
  };

  if (mixed_) {
    emit(kMixedChannel, mixed_rate_, [&] { return mixed_density_(rng); });
  } else {
    for (std::size_t i = 0; i < rates_.size(); ++i) {
      const auto& ch = source_.channels[i].resonance;
      emit(static_cast<int>(i), rates_[i], [&] { return draw_lorentzian(ch, rng); });
    }
  }
  std::sort(out.begin(), out.end(), [](const PairEvent& x, const PairEvent& y) { return x.t_emit < y.t_emit; });
  return out;
}

std::vector<PairEvent> sample_pair_events(const PairSampler& sampler, const Interval& interval,
                                          std::uint64_t master_seed) {
  Rng rng(substream_seed(master_seed, interval.index, StreamKind::pairs));
  return sampler.sample(interval.begin, interval.end, rng);
}

std::vector<PairEvent> sample_pair_events(const SourceConfig& source, double duration, std::uint64_t master_seed,
                                          double slice) {
  if (!(duration > 0.0)) throw Error("duration must be > 0");
  const PairSampler sampler(source);
  std::vector<PairEvent> out;
  for (const auto& interval : partition(duration, slice)) {
    auto part = sample_pair_events(sampler, interval, master_seed);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<BackgroundEvent> sample_background_events(double rate, const Passband& passband,
                                                      const Interval& interval, std::uint64_t master_seed,
                                                      const BackgroundSpectrum& spectrum) {
  passband.validate();
  Rng rng(substream_seed(master_seed, interval.index, StreamKind::background));
  std::vector<BackgroundEvent> out;
  append_background(rate, passband, interval, rng, spectrum, out);
  return out;
}

std::vector<BackgroundEvent> sample_background_events(double rate, const Passband& passband, double duration,
                                                      std::uint64_t master_seed, double slice,
                                                      const BackgroundSpectrum& spectrum) {
  if (rate < 0.0) throw Error("background rate must be >= 0");
  std::vector<BackgroundEvent> out;
  for (const auto& interval : partition(duration, slice)) {
    auto part = sample_background_events(rate, passband, interval, master_seed, spectrum);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

DetectorStreams detect(std::span<const PairEvent> pairs, std::span<const BackgroundEvent> background,
                       const DetectionChain& chain, std::span<const spectral::ResonanceChannel> channels,
                       const spectral::AnalyzerSetting& analyzer, std::uint64_t seed) {
  chain.validate();
  Rng rng(seed);
  DetectorStreams out;
  Detection(chain, channels, analyzer).run(pairs, background, rng, out);
  finish(out, chain.deadtime);
  return out;
}

DetectorStreams simulate_acquisition(const SourceConfig& source, const DetectionChain& chain,
                                     double pl_rate_per_detector, double duration, std::uint64_t master_seed,
                                     double slice, const BackgroundSpectrum& spectrum) {
  chain.validate();
  if (pl_rate_per_detector < 0.0) throw Error("background rate must be >= 0");
  const PairSampler sampler(source);
  const auto channels = source.resonances();
  Detection detection(chain, channels, source.analyzer);
  DetectorStreams out;
  std::vector<BackgroundEvent> background;
  for (const auto& interval : partition(duration, slice)) {
    const auto pairs = sample_pair_events(sampler, interval, master_seed);
    background.clear();
    Rng bg_rng(substream_seed(master_seed, interval.index, StreamKind::background));
    append_background(2.0 * pl_rate_per_detector, source.passband, interval, bg_rng, spectrum, background);
    Rng det_rng(substream_seed(master_seed, interval.index, StreamKind::detection));
    detection.run(pairs, background, det_rng, out);
  }
  finish(out, chain.deadtime);
  return out;
}

std::vector<TimeTag> merge_streams(const DetectorStreams& streams) {
  std::vector<TimeTag> out;
  out.reserve(streams.a.size() + streams.b.size());
  std::size_t i = 0, j = 0;
  while (i < streams.a.size() || j < streams.b.size()) {
    if (j == streams.b.size() || (i < streams.a.size() && streams.a[i] <= streams.b[j]))
      out.push_back({Detector::A, streams.a[i++]});
    else
      out.push_back({Detector::B, streams.b[j++]});
  }
  return out;
}

DetectorStreams split_tags(std::span<const TimeTag> tags) {
  DetectorStreams out;
  for (const auto& tag : tags) (tag.detector == Detector::A ? out.a : out.b).push_back(tag.t);
  return out;
}

}  // namespace biphoton::mc
