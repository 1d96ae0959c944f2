#include "biphoton/spectral_model.hpp"

#include <cmath>

#include "biphoton/error.hpp"

namespace biphoton::spectral {

Polarization Polarization::linear(double angle) {
  return Polarization{Complex{std::cos(angle), 0.0}, Complex{std::sin(angle), 0.0}};
}

void ResonanceChannel::validate() const {
  if (!(gamma > 0.0)) throw Error("channel '" + id + "': gamma must be > 0");
  if (!(lambda0 > 0.0)) throw Error("channel '" + id + "': lambda0 must be > 0");
  if (!(amplitude >= 0.0)) throw Error("channel '" + id + "': amplitude must be >= 0");
  if (std::abs(polarization.norm_squared() - 1.0) > 1e-12)
    throw Error("channel '" + id + "': polarization must have unit norm");
}

void PumpConfig::validate() const {
  if (!(lambda_pump > 0.0)) throw Error("pump wavelength must be > 0");
  if (!(power >= 0.0)) throw Error("pump power must be >= 0");
}

Complex lorentzian_amplitude(double lambda, const ResonanceChannel& channel) {
  const double half_width = 0.5 * channel.gamma;
  const Complex pole{lambda - channel.lambda0, half_width};
  return channel.amplitude * half_width / pole * std::polar(1.0, channel.phase);
}

Complex channel_weight(const ResonanceChannel& channel, const AnalyzerSetting& analyzer) {
  if (!analyzer.enabled) return Complex{1.0, 0.0};
  // Real analyzer axis, so ê_an† ê = cos·e_x + sin·e_y.
  const Complex projection =
      std::cos(analyzer.angle) * channel.polarization.x + std::sin(analyzer.angle) * channel.polarization.y;
  return projection * projection;
}

Complex polarization_overlap(const ResonanceChannel& a, const ResonanceChannel& b) {
  const Complex inner =
      std::conj(a.polarization.x) * b.polarization.x + std::conj(a.polarization.y) * b.polarization.y;
  return inner * inner;
}

namespace {

double intensity_at(double lambda, std::span<const ResonanceChannel> channels, const AnalyzerSetting& analyzer,
                    bool indistinguishable, std::vector<Complex>& scratch) {
  scratch.resize(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i)
    scratch[i] = channel_weight(channels[i], analyzer) * lorentzian_amplitude(lambda, channels[i]);

  if (!indistinguishable) {
    double sum = 0.0;
    for (const auto& a : scratch) sum += std::norm(a);
    return sum;
  }
  if (analyzer.enabled) {
    Complex total{0.0, 0.0};
    for (const auto& a : scratch) total += a;
    return std::norm(total);
  }
  // Sum in the pair polarization space ê⊗ê; the xy and yx components coincide.
  Complex xx{0.0, 0.0}, xy{0.0, 0.0}, yy{0.0, 0.0};
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    const auto& pol = channels[i].polarization;
    xx += scratch[i] * pol.x * pol.x;
    xy += scratch[i] * pol.x * pol.y;
    yy += scratch[i] * pol.y * pol.y;
  }
  return std::norm(xx) + 2.0 * std::norm(xy) + std::norm(yy);
}

}  // namespace

double joint_spectral_intensity(double lambda, std::span<const ResonanceChannel> channels,
                                const AnalyzerSetting& analyzer, bool indistinguishable) {
  if (channels.empty()) throw Error("no emission channels");
  std::vector<Complex> scratch;
  return intensity_at(lambda, channels, analyzer, indistinguishable, scratch);
}

std::vector<double> joint_spectral_intensity(std::span<const double> lambdas,
                                             std::span<const ResonanceChannel> channels,
                                             const AnalyzerSetting& analyzer, bool indistinguishable) {
  if (channels.empty()) throw Error("no emission channels");
  std::vector<double> out;
  out.reserve(lambdas.size());
  std::vector<Complex> scratch;
  for (double lambda : lambdas) out.push_back(intensity_at(lambda, channels, analyzer, indistinguishable, scratch));
  return out;
}

double conjugate_wavelength(double lambda_signal, double lambda_pump) {
  const double inverse = 1.0 / lambda_pump - 1.0 / lambda_signal;
  if (!(lambda_signal > lambda_pump) || !(inverse > 0.0)) throw Error("signal not below pump energy");
  return 1.0 / inverse;
}

double pump_coupling(double pump_angle, double channel_angle) {
  const double c = std::cos(pump_angle - channel_angle);
  return c * c;
}

}  // namespace biphoton::spectral
