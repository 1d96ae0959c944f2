// Acceptance criteria 1-8. Usage: acceptance [N ...]; with no argument all
// criteria run. Prints one PASS/FAIL line per criterion and exits non-zero if
// any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "biphoton/coincidence.hpp"
#include "biphoton/experiment.hpp"
#include "biphoton/fano_fit.hpp"
#include "biphoton/montecarlo.hpp"
#include "biphoton/spectral_model.hpp"
#include "biphoton/tof_spectrometer.hpp"

namespace fs = std::filesystem;
using namespace biphoton;

namespace {

// Tolerances and budgets.
constexpr double kIdentityRelTol = 1e-12;
constexpr double kIdentityBudgetS = 1.0;
constexpr double kDipDepth = 0.05;
constexpr double kDipContrast = 10.0;
constexpr double kFanoBudgetS = 1.0;
constexpr double kQomBRateHz = 7.56;
constexpr double kQomBRateMeasuredSigmaHz = 0.15;
constexpr double kQomBPeakNm = 1581.9;
constexpr double kQomBPeakTolNm = 2.5;
constexpr double kQomBFwhmNm = 4.6;
constexpr double kQomBFwhmTolNm = 1.5;
constexpr double kEndToEndBudgetS = 120.0;
constexpr double kMinRSquared = 0.99;
constexpr double kSweepBudgetS = 180.0;
constexpr double kMeasuredResolutionNm = 4.3;
constexpr double kResolutionMcRelTol = 0.10;
constexpr std::size_t kResolutionMcCoincidences = 10000;
constexpr double kResolutionBudgetS = 30.0;
constexpr double kFitRelTol = 1e-3;
constexpr double kFitPhiTolRad = 0.01;
constexpr double kFitLambda1TolNm = 3 * 0.2;
constexpr double kFitGamma1TolNm = 3 * 0.9;
constexpr double kFitPeakCounts = 1e3;
constexpr int kFitEnsemble = 50;
constexpr double kFitBudgetS = 10.0;
constexpr int kOracleInstances = 50;
constexpr std::size_t kOracleMaxTags = 10000;

constexpr double kPi = std::numbers::pi;
constexpr double kFwhmPerSigma = 2.3548200450309493;

const fs::path kPresets{BIPHOTON_PRESET_DIR};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fano::FanoParams reference_params() { return {33.0, 380.0, 1581.1, 1450.0, 14.2, 400.0, kPi}; }

// |a1 + e^{iφ}a2|² written out directly, without the spectral module.
double direct_model(const fano::FanoParams& p, double x) {
  using C = std::complex<double>;
  const C a1 = p.A1 * (p.gamma1 / 2) / C(x - p.lambda1, p.gamma1 / 2);
  const C a2 = p.A2 * (p.gamma2 / 2) / C(x - p.lambda2, p.gamma2 / 2);
  return std::norm(a1 + std::exp(C(0, p.phi)) * a2);
}

Outcome model_identity() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> grid(10000);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = 1400.0 + 300.0 * static_cast<double>(k) / 9999.0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const fano::FanoParams p{100 * u(rng), 500 * u(rng), 1450 + 200 * u(rng), 1350 + 300 * u(rng),
                             0.5 + 50 * u(rng), 20 + 600 * u(rng), 2 * kPi * u(rng)};
    const auto model = fano::evaluate_model(p, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double ref = direct_model(p, grid[k]);
      if (ref > 0.0) worst = std::max(worst, std::abs(model[k] - ref) / ref);
    }
  }
  const double t = seconds_since(start);
  return {worst < kIdentityRelTol && t < kIdentityBudgetS,
          fmt("max relative error %.3g over 100 x 1e4 points (tol %.0e), %.3f s", worst, kIdentityRelTol, t)};
}

Outcome fano_reproduction() {
  const auto start = std::chrono::steady_clock::now();
  const auto p = reference_params();
  spectral::ResonanceChannel q, m;
  q.id = "qbic";
  q.lambda0 = p.lambda1;
  q.gamma = p.gamma1;
  q.amplitude = p.A1;
  m.id = "mie";
  m.lambda0 = p.lambda2;
  m.gamma = p.gamma2;
  m.amplitude = p.A2;
  m.phase = p.phi;
  const std::vector<spectral::ResonanceChannel> chs{q, m};
  const spectral::AnalyzerSetting analyzer{true, 0.0};
  std::vector<double> grid;
  for (int k = 0; k <= 15000; ++k) grid.push_back(1500.0 + 0.01 * k);
  const auto ind = spectral::joint_spectral_intensity(grid, chs, analyzer, true);
  const auto dist = spectral::joint_spectral_intensity(grid, chs, analyzer, false);
  const auto at = static_cast<std::size_t>(std::min_element(ind.begin(), ind.end()) - ind.begin());
  const double ind_min = ind[at];
  const double dist_min = *std::min_element(dist.begin(), dist.end());
  const double qbic_peak = spectral::joint_spectral_intensity(p.lambda1, chs, analyzer, true);
  const double depth = ind_min / qbic_peak;
  const double contrast = dist_min / ind_min;
  const double t = seconds_since(start);
  return {depth < kDipDepth && contrast >= kDipContrast && t < kFanoBudgetS,
          fmt("indistinguishable min %.6g at %.2f nm, I(qBIC) %.6g, depth ratio %.4f (need < %.2f); "
              "distinguishable min %.6g, contrast %.4f (need >= %.0f), %.3f s",
              ind_min, grid[at], qbic_peak, depth, kDipDepth, dist_min, contrast, kDipContrast, t)};
}

Outcome end_to_end_qom_b() {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = experiment::load_config(kPresets / "qom-b.cfg");
  // Rates without the spools, spectrum with them.
  const auto summary = experiment::analyze(experiment::simulate(cfg, false), cfg);
  if (!summary.g2 || !summary.rate) return {false, "no coincidences recorded"};
  const auto spectrum = experiment::measure_spectrum(experiment::simulate(cfg, true), cfg);
  const double peak = tof::peak_wavelength(spectrum);
  double width = std::nan("");
  try {
    width = tof::fwhm(spectrum);
  } catch (const std::exception&) {
  }
  const double t = seconds_since(start);
  const double rate_sigma = std::hypot(summary.rate->sigma, kQomBRateMeasuredSigmaHz);
  const bool g2_ok = summary.g2->value > 2.0;
  const bool rate_ok = std::abs(summary.rate->value - kQomBRateHz) < 3.0 * rate_sigma;
  const bool peak_ok = std::abs(peak - kQomBPeakNm) <= kQomBPeakTolNm;
  const bool width_ok = std::abs(width - kQomBFwhmNm) <= kQomBFwhmTolNm;
  return {g2_ok && rate_ok && peak_ok && width_ok && t < kEndToEndBudgetS,
          fmt("g2(0) %.3f +- %.3f; real rate %.3f +- %.3f Hz (target %.2f, combined 3 sigma %.3f); "
              "TOF peak %.2f nm (%.1f +- %.1f), FWHM %.2f nm (%.1f +- %.1f), %.1f s",
              summary.g2->value, summary.g2->sigma, summary.rate->value, summary.rate->sigma, kQomBRateHz,
              3.0 * rate_sigma, peak, kQomBPeakNm, kQomBPeakTolNm, width, kQomBFwhmNm, kQomBFwhmTolNm, t)};
}

Outcome linearity() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = experiment::load_config(kPresets / "qom-b.cfg");
  cfg.duration_s = 60.0;
  const std::vector<double> powers{5, 15, 25, 35, 45, 55};
  const auto sweep = experiment::power_sweep(cfg, powers);
  const auto& f = sweep.fit;
  const double t = seconds_since(start);
  const bool intercept_ok = std::abs(f.intercept) < 3.0 * f.intercept_sigma;
  return {intercept_ok && f.r_squared > kMinRSquared && t < kSweepBudgetS,
          fmt("slope %.4f +- %.4f Hz/mW, intercept %.3f +- %.3f Hz, R^2 %.4f (need > %.2f), %.1f s", f.slope,
              f.slope_sigma, f.intercept, f.intercept_sigma, f.r_squared, kMinRSquared, t)};
}

// FWHM of a TOF spectrum of degenerate pairs seen through jitter σ.
double monochromatic_fwhm(double sigma, const tof::DispersionCalibration& cal, const tof::SpectrumGrid& grid,
                          std::uint64_t seed) {
  mc::DetectionChain chain;
  chain.jitter_sigma_combined = sigma;
  chain.dispersion_slope = cal.slope;
  chain.dispersion_ref_lambda = cal.ref_lambda;
  std::vector<mc::PairEvent> pairs;
  // Each pair splits across both detectors half the time.
  for (std::size_t k = 0; k < 2 * kResolutionMcCoincidences; ++k)
    pairs.push_back({1e6 * static_cast<double>(k + 1), 1581.6, 1581.6, 0});
  spectral::ResonanceChannel line;
  line.lambda0 = 1581.6;
  line.gamma = 1e-6;
  const std::vector<spectral::ResonanceChannel> chs{line};
  const auto streams = mc::detect(pairs, {}, chain, chs, {}, seed);
  const auto spectrum = tof::measure_spectrum(streams.a, streams.b, cal, 790.8, grid, mc::Passband{}, sigma);
  return tof::fwhm(spectrum);
}

Outcome resolution() {
  const auto start = std::chrono::steady_clock::now();
  const tof::DispersionCalibration cal;  // 34 ps/nm
  const double as_fwhm = tof::estimate_resolution(cal, 162.0 / kFwhmPerSigma);
  const double as_sigma = tof::estimate_resolution(cal, 162.0);
  const bool bracket = as_fwhm <= kMeasuredResolutionNm && kMeasuredResolutionNm <= as_sigma;

  const tof::SpectrumGrid grid{1560.0, 1600.0, 0.25};
  const double mc_fwhm = monochromatic_fwhm(162.0 / kFwhmPerSigma, cal, grid, 501);
  const double mc_sigma = monochromatic_fwhm(162.0, cal, grid, 502);
  const double err_fwhm = std::abs(mc_fwhm - as_fwhm) / as_fwhm;
  const double err_sigma = std::abs(mc_sigma - as_sigma) / as_sigma;
  const double t = seconds_since(start);
  return {bracket && err_fwhm < kResolutionMcRelTol && err_sigma < kResolutionMcRelTol && t < kResolutionBudgetS,
          fmt("estimator %.2f nm (162 ps FWHM) <= %.1f <= %.2f nm (162 ps sigma): %s; monochromatic MC at 1e4 "
              "coincidences %.2f / %.2f nm, deviation %.1f%% / %.1f%% (tol %.0f%%), %.1f s",
              as_fwhm, kMeasuredResolutionNm, as_sigma, bracket ? "bracketed" : "not bracketed", mc_fwhm, mc_sigma,
              100 * err_fwhm, 100 * err_sigma, 100 * kResolutionMcRelTol, t)};
}

Outcome guard_robustness() {
  const auto cfg = experiment::load_config(kPresets / "qom-b.cfg");
  const auto streams = experiment::simulate(cfg, false);
  const auto g1 = experiment::analyze(streams, cfg, 1);
  const auto g3 = experiment::analyze(streams, cfg, 3);
  if (!g1.g2 || !g3.g2 || !g1.rate || !g3.rate) return {false, "no coincidences recorded"};
  const double dg2 = std::abs(g1.g2->value - g3.g2->value);
  const double drate = std::abs(g1.rate->value - g3.rate->value);
  const double sg2 = std::min(g1.g2->sigma, g3.g2->sigma);
  const double srate = std::min(g1.rate->sigma, g3.rate->sigma);
  return {dg2 < sg2 && drate < srate,
          fmt("guard 1 -> 3: g2(0) %.4f -> %.4f (change %.4f, sigma %.4f); rate %.4f -> %.4f Hz (change %.4f, "
              "sigma %.4f)",
              g1.g2->value, g3.g2->value, dg2, sg2, g1.rate->value, g3.rate->value, drate, srate)};
}

Outcome fit_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const auto truth = reference_params();
  std::vector<double> grid;
  for (int k = 0; k < 400; ++k) grid.push_back(1480.25 + 0.5 * k);
  const auto clean = fano::evaluate_model(truth, grid);
  const auto r = fano::fit(grid, clean);
  const auto& p = r.params;
  const double rel[] = {std::abs(p.A1 / truth.A1 - 1),         std::abs(p.A2 / truth.A2 - 1),
                        std::abs(p.lambda1 / truth.lambda1 - 1), std::abs(p.lambda2 / truth.lambda2 - 1),
                        std::abs(p.gamma1 / truth.gamma1 - 1),   std::abs(p.gamma2 / truth.gamma2 - 1)};
  const double worst = *std::max_element(std::begin(rel), std::end(rel));
  const double dphi = std::abs(p.phi - truth.phi);
  const bool clean_ok = r.converged && worst < kFitRelTol && dphi < kFitPhiTolRad;

  const double peak = *std::max_element(clean.begin(), clean.end());
  std::mt19937_64 rng(7908);
  std::vector<double> noisy;
  for (double v : clean) noisy.push_back(static_cast<double>(std::poisson_distribution<long>(v * kFitPeakCounts / peak)(rng)));
  fano::FitOptions options;
  options.poisson_weights = true;
  const auto n = fano::fit(grid, noisy, options);
  const double dl = std::abs(n.params.lambda1 - truth.lambda1);
  const double dg = std::abs(n.params.gamma1 - truth.gamma1);
  const bool noisy_ok = dl < kFitLambda1TolNm && dg < kFitGamma1TolNm;
  const double t = seconds_since(start);

  // Context only: spread of the same fit over other noise realizations.
  double sum_dl2 = 0.0;
  int inside = 0;
  for (int k = 0; k < kFitEnsemble; ++k) {
    std::mt19937_64 other(1000 + k);
    for (std::size_t i = 0; i < clean.size(); ++i)
      noisy[i] = static_cast<double>(std::poisson_distribution<long>(clean[i] * kFitPeakCounts / peak)(other));
    const auto e = fano::fit(grid, noisy, options);
    const double d = e.params.lambda1 - truth.lambda1;
    sum_dl2 += d * d;
    if (std::abs(d) < kFitLambda1TolNm && std::abs(e.params.gamma1 - truth.gamma1) < kFitGamma1TolNm) ++inside;
  }
  return {clean_ok && noisy_ok && t < kFitBudgetS,
          fmt("noise-free: worst relative error %.2e (tol %.0e), phi error %.2e rad; Poisson (peak %.0f): "
              "lambda1 %.3f +- %.3f nm (off %.3f, tol %.1f), gamma1 %.3f +- %.3f nm (off %.3f, tol %.1f), %.2f s; "
              "%d other seeds: rms lambda1 error %.3f nm, %d inside both bands",
              worst, kFitRelTol, dphi, kFitPeakCounts, n.params.lambda1, n.sigmas.lambda1, dl, kFitLambda1TolNm,
              n.params.gamma1, n.sigmas.gamma1, dg, kFitGamma1TolNm, t, kFitEnsemble,
              std::sqrt(sum_dl2 / kFitEnsemble), inside)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(8);
  int matched = 0;
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    std::uniform_int_distribution<std::size_t> count(1, kOracleMaxTags / 2);
    std::uniform_int_distribution<std::int64_t> when(0, 50'000'000);
    std::vector<std::int64_t> a(count(rng)), b(count(rng));
    for (auto& t : a) t = when(rng);
    for (auto& t : b) t = when(rng);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto spec = coincidence::HistogramSpec::centered(900.0, 45000.0);
    const auto hist = coincidence::build_histogram(a, b, spec);
    std::vector<std::uint64_t> brute(spec.bins, 0);
    for (auto ta : a)
      for (auto tb : b) {
        const double dt = static_cast<double>(tb - ta);
        if (dt >= spec.first_edge && dt < spec.last_edge())
          ++brute[static_cast<std::size_t>(std::floor((dt - spec.first_edge) / spec.bin_width))];
      }
    if (hist.counts == brute) ++matched;
  }
  return {matched == kOracleInstances,
          fmt("%d of %d random instances (<= %zu tags) match all-pairs counting exactly", matched, kOracleInstances,
              kOracleMaxTags)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"model identity", model_identity},
      {"Fano reproduction", fano_reproduction},
      {"end-to-end QOM-B", end_to_end_qom_b},
      {"linearity", linearity},
      {"resolution consistency", resolution},
      {"estimator robustness", guard_robustness},
      {"fit recovery", fit_recovery},
      {"oracle equivalence", oracle_equivalence},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

  bool all = true;
  for (int n : selected) {
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", n);
      return 2;
    }
    const auto& [name, check] = criteria[static_cast<std::size_t>(n - 1)];
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("ACCEPTANCE %d %s [%s]: %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
