#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "biphoton/random.hpp"
#include "biphoton/spectral_model.hpp"

namespace biphoton::mc {

/// Spectral filter in front of the detectors, [low, high] nm.
struct Passband {
  double low = 1450.0;
  double high = 1650.0;

  void validate() const;
  bool contains(double lambda) const { return lambda >= low && lambda <= high; }
};

/// A resonance together with its pair-emission rate.
struct EmitterChannel {
  spectral::ResonanceChannel resonance;
  double rate_per_mw = 0.0;     // emitted pairs per second per mW of pump
  double coupling_angle = 0.0;  // rad; pump coupling is cos²(θ_pump − θ)
};

struct SourceConfig {
  spectral::PumpConfig pump;
  std::vector<EmitterChannel> channels;
  spectral::AnalyzerSetting analyzer;
  Passband passband;

  void validate() const;
  std::vector<spectral::ResonanceChannel> resonances() const;
};

/// Channel index recorded for pairs drawn from the interfering (analyzer-in)
/// density, where the emitting channel is undefined.
inline constexpr int kMixedChannel = -1;

struct PairEvent {
  double t_emit = 0.0;  // ps since acquisition start
  double lambda_signal = 0.0;
  double lambda_idler = 0.0;
  int channel = kMixedChannel;
};

struct BackgroundEvent {
  double t_emit = 0.0;  // ps
  double lambda = 0.0;  // nm
};

enum class Detector : std::uint8_t { A = 0, B = 1 };

struct TimeTag {
  Detector detector = Detector::A;
  std::int64_t t = 0;  // ps

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Time-sorted click times of the two detectors behind the 50:50 splitter.
struct DetectorStreams {
  std::vector<std::int64_t> a;
  std::vector<std::int64_t> b;

  friend bool operator==(const DetectorStreams&, const DetectorStreams&) = default;
};

struct DetectionChain {
  double efficiency_a = 1.0;
  double efficiency_b = 1.0;
  double jitter_sigma_combined = 162.0;  // ps, σ of t_B − t_A for a coincident pair
  double dispersion_slope = 0.0;         // ps/nm per arm
  double dispersion_ref_lambda = 1581.6;  // nm
  double deadtime = 0.0;                  // ps, non-paralyzable
  Passband filter;

  void validate() const;
};

/// Optional tabulated PL spectrum; empty means uniform over the passband.
struct BackgroundSpectrum {
  std::vector<double> lambda;
  std::vector<double> density;
};

/// One acquisition slice with its own random substreams.
struct Interval {
  std::uint64_t index = 0;
  double begin = 0.0;  // s
  double end = 0.0;    // s
};

/// Splits [0, duration) into consecutive slices of `slice` seconds (the last
/// one may be shorter).
std::vector<Interval> partition(double duration, double slice);

/// Signal-wavelength range whose conjugate idler also lies in the passband.
std::pair<double, double> pair_wavelength_range(const Passband& passband, double lambda_pump);

/// Precomputed emission model for one source configuration.
///
/// With the analyzer out every channel is an independent Poisson source with
/// rate rate_per_mw · P · cos²(θ_pump − θ_ch) and signal density |a_ch(λ)|².
/// With the analyzer in the channels are indistinguishable: each amplitude is
/// scaled so that alone it would integrate to its rate, the projected
/// amplitudes are summed and the resulting |Σ w s a|² is both the signal
/// density and, integrated, the total pair rate.
class PairSampler {
 public:
  explicit PairSampler(const SourceConfig& source);

  /// Pairs emitted in [begin, end) seconds, sorted by emission time.
  std::vector<PairEvent> sample(double begin, double end, Rng& rng) const;

  double total_rate() const;  // Hz
  bool mixed() const { return mixed_; }
  const std::vector<double>& channel_rates() const { return rates_; }
  const SourceConfig& source() const { return source_; }

 private:
  double draw_lorentzian(const spectral::ResonanceChannel& channel, Rng& rng) const;

  SourceConfig source_;
  double low_ = 0.0;
  double high_ = 0.0;
  bool mixed_ = false;
  std::vector<double> rates_;
  double mixed_rate_ = 0.0;
  mutable std::piecewise_linear_distribution<double> mixed_density_;
};

std::vector<PairEvent> sample_pair_events(const PairSampler& sampler, const Interval& interval,
                                          std::uint64_t master_seed);

/// Pairs over [0, duration) as the concatenation of per-slice draws.
std::vector<PairEvent> sample_pair_events(const SourceConfig& source, double duration, std::uint64_t master_seed,
                                          double slice = 1.0);

std::vector<BackgroundEvent> sample_background_events(double rate, const Passband& passband,
                                                      const Interval& interval, std::uint64_t master_seed,
                                                      const BackgroundSpectrum& spectrum = {});

std::vector<BackgroundEvent> sample_background_events(double rate, const Passband& passband, double duration,
                                                      std::uint64_t master_seed, double slice = 1.0,
                                                      const BackgroundSpectrum& spectrum = {});

/// Maps emitted photons to detector clicks.
///
/// A pair first survives the analyzer with probability |w_ch|² (mixed pairs
/// already carry the projection in their density); unpolarized PL passes an
/// enabled analyzer with probability 1/2. Each photon then goes to A or B
/// with equal probability, survives that arm's efficiency and filter, and is
/// stamped at t_emit + slope·(λ − λ_ref) + N(0, σ/√2). Clicks before t = 0 are
/// dropped. Output streams are sorted and dead time is applied per detector.
DetectorStreams detect(std::span<const PairEvent> pairs, std::span<const BackgroundEvent> background,
                       const DetectionChain& chain, std::span<const spectral::ResonanceChannel> channels,
                       const spectral::AnalyzerSetting& analyzer, std::uint64_t seed);

/// Full acquisition: per slice, pairs + background + detection each on their
/// own substream, then merged and sorted. `pl_rate_per_detector` is the PL
/// photon flux reaching each splitter output, so the PL source itself emits
/// twice that rate.
DetectorStreams simulate_acquisition(const SourceConfig& source, const DetectionChain& chain,
                                     double pl_rate_per_detector, double duration, std::uint64_t master_seed,
                                     double slice = 1.0, const BackgroundSpectrum& spectrum = {});

/// Interleaves the two detector streams into one time-ordered tag list.
std::vector<TimeTag> merge_streams(const DetectorStreams& streams);

/// Inverse of merge_streams.
DetectorStreams split_tags(std::span<const TimeTag> tags);

}  // namespace biphoton::mc
