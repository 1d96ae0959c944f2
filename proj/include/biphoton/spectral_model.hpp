#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace biphoton::spectral {

using Complex = std::complex<double>;

/// Jones-style polarization shared by both photons of a pair.
struct Polarization {
  Complex x{1.0, 0.0};
  Complex y{0.0, 0.0};

  /// Linear polarization at `angle` radians from horizontal.
  static Polarization linear(double angle);

  double norm_squared() const { return std::norm(x) + std::norm(y); }
};

/// One biphoton-emitting resonance.
///
/// `gamma` is the full width at half maximum of |a(λ)|², `amplitude` the
/// on-resonance modulus |a(λ0)| and `phase` a constant phase factor applied
/// to the whole amplitude.
struct ResonanceChannel {
  std::string id;
  double lambda0 = 1581.6;  // nm
  double gamma = 1.0;       // nm
  double amplitude = 1.0;
  double phase = 0.0;  // rad
  Polarization polarization;

  /// Throws biphoton::Error if any invariant is violated.
  void validate() const;
};

struct PumpConfig {
  double lambda_pump = 790.8;  // nm
  double power = 0.0;          // mW
  double polarization_angle = 0.0;  // rad

  void validate() const;
};

struct AnalyzerSetting {
  bool enabled = false;
  double angle = 0.0;  // rad, ignored when disabled
};

/// a(λ) = A·(Γ/2) / ((λ − λ0) + iΓ/2) · e^{iφ}
Complex lorentzian_amplitude(double lambda, const ResonanceChannel& channel);

/// Pair amplitude transmission through the analyzer, (ê_an† ê_ch)²; 1 when
/// the analyzer is out.
Complex channel_weight(const ResonanceChannel& channel, const AnalyzerSetting& analyzer);

/// Two-photon polarization overlap (ê_i† ê_j)² between two channels. The
/// analyzer-out indistinguishable intensity equals Σ_ij a_i* a_j overlap_ij.
Complex polarization_overlap(const ResonanceChannel& a, const ResonanceChannel& b);

/// Coincidence spectral intensity at `lambda`.
///
/// Indistinguishable channels add at amplitude level. With the analyzer in,
/// every channel is projected onto the analyzer axis and the projected
/// amplitudes are summed. With the analyzer out the pair polarization states
/// are kept, so cross terms carry the overlap (ê_i† ê_j)² and vanish for
/// orthogonal channels. Distinguishable channels add at intensity level.
double joint_spectral_intensity(double lambda, std::span<const ResonanceChannel> channels,
                                const AnalyzerSetting& analyzer, bool indistinguishable);

/// Vectorized form of joint_spectral_intensity over a wavelength grid.
std::vector<double> joint_spectral_intensity(std::span<const double> lambdas,
                                             std::span<const ResonanceChannel> channels,
                                             const AnalyzerSetting& analyzer,
                                             bool indistinguishable);

/// Idler wavelength from energy conservation: 1/λi = 1/λp − 1/λs.
double conjugate_wavelength(double lambda_signal, double lambda_pump);

/// Multiplicative channel coupling cos²(θ_pump − θ_channel) for a pump
/// polarization rotation.
double pump_coupling(double pump_angle, double channel_angle);

}  // namespace biphoton::spectral
