#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biphoton/levenberg_marquardt.hpp"
#include "biphoton/tof_spectrometer.hpp"

namespace biphoton::fano {

/// Two interfering Lorentzian amplitudes, I(λ) = |a1(λ) + e^{iφ} a2(λ)|².
struct FanoParams {
  double A1 = 1.0;
  double A2 = 0.0;
  double lambda1 = 1581.1;  // nm
  double lambda2 = 1450.0;  // nm
  double gamma1 = 14.2;     // nm
  double gamma2 = 400.0;    // nm
  double phi = 0.0;         // rad

  void validate() const;
};

struct FanoFitResult {
  FanoParams params;         // phi in [0, 2π)
  FanoParams sigmas;         // standard errors; infinity where unidentifiable
  double residual_norm = 0;  // ‖r‖ (weighted if weights were used)
  bool converged = false;
  int iterations = 0;        // of the selected start
  std::size_t start = 0;     // index of the selected φ start
  std::vector<double> cost_history;
};

struct FitOptions {
  /// σ_i = √max(count_i, 1) instead of unit weights.
  bool poisson_weights = false;
  /// Starting point; auto_init when unset. φ is replaced by each start.
  std::optional<FanoParams> init;
  lm::Options solver;
};

inline constexpr std::size_t kFanoParameterCount = 7;

std::vector<double> evaluate_model(const FanoParams& params, std::span<const double> grid);
double evaluate_model(const FanoParams& params, double lambda);

/// Heuristic start from a spectrum: the narrow component is the largest
/// excursion from a median-filtered pedestal, the broad component is a
/// Lorentzian matched to the pedestal. Throws on a flat spectrum.
FanoParams auto_init(std::span<const double> grid, std::span<const double> counts);
FanoParams auto_init(const tof::SpectrumEstimate& spectrum);

/// Least-squares fit from the starts φ ∈ {0, π/2, π, 3π/2}. The lowest-cost
/// converged start wins (lowest start index on ties); if none converged the
/// lowest-cost start is returned with converged = false.
FanoFitResult fit(std::span<const double> grid, std::span<const double> counts, const FitOptions& options = {},
                  std::span<const double> variance = {});
FanoFitResult fit(const tof::SpectrumEstimate& spectrum, const FitOptions& options = {});

/// Internal coordinates (log A1, log A2, λ1, λ2, log Γ1, log Γ2, φ) used by
/// the optimizer, and their inverse.
std::vector<double> to_internal(const FanoParams& params);
FanoParams from_internal(std::span<const double> x);

double wrap_phase(double phi);

/// "parameter,value,sigma" records followed by fit diagnostics.
void write_fit_report(std::ostream& out, const FanoFitResult& result);
void write_model_csv(std::ostream& out, const FanoParams& params, std::span<const double> grid);

}  // namespace biphoton::fano
