#include "biphoton/fano_fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>
#include <ostream>

#include "biphoton/error.hpp"
#include "biphoton/spectral_model.hpp"

namespace biphoton::fano {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHuge = 1e150;

std::array<spectral::ResonanceChannel, 2> channels_of(const FanoParams& p) {
  spectral::ResonanceChannel narrow;
  narrow.id = "narrow";
  narrow.lambda0 = p.lambda1;
  narrow.gamma = p.gamma1;
  narrow.amplitude = p.A1;
  narrow.phase = 0.0;
  spectral::ResonanceChannel broad;
  broad.id = "broad";
  broad.lambda0 = p.lambda2;
  broad.gamma = p.gamma2;
  broad.amplitude = p.A2;
  broad.phase = p.phi;
  return {narrow, broad};
}

// Horizontal analyzer on horizontal channels: both weights are exactly 1.
const spectral::AnalyzerSetting kUnitWeights{true, 0.0};

double median(std::vector<double> values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(values.begin(), mid));
}

// Running median of `width` bins over the unmasked entries of y. The ends are
// extended by point reflection about the median of the outermost bins, so a
// sloped pedestal is followed up to the edges. Masked bins are filled by
// linear interpolation between their unmasked neighbours.
std::vector<double> pedestal(std::span<const double> y, std::size_t width, const std::vector<bool>& mask) {
  const auto n = static_cast<std::ptrdiff_t>(y.size());
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t anchor_bins = std::min<std::ptrdiff_t>(5, n);
  const double left_anchor = median(std::vector<double>(y.begin(), y.begin() + anchor_bins));
  const double right_anchor = median(std::vector<double>(y.end() - anchor_bins, y.end()));
  auto value = [&](std::ptrdiff_t i) {
    if (i < 0) return 2.0 * left_anchor - y[static_cast<std::size_t>(std::min(-i, n - 1))];
    if (i >= n) return 2.0 * right_anchor - y[static_cast<std::size_t>(std::max(2 * (n - 1) - i, std::ptrdiff_t{0}))];
    return y[static_cast<std::size_t>(i)];
  };
  auto masked = [&](std::ptrdiff_t i) {
    const std::ptrdiff_t j = i < 0 ? std::min(-i, n - 1) : (i >= n ? std::max(2 * (n - 1) - i, std::ptrdiff_t{0}) : i);
    return static_cast<bool>(mask[static_cast<std::size_t>(j)]);
  };

  std::vector<double> out(y.size(), 0.0);
  std::vector<bool> known(y.size(), false);
  std::vector<double> window;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) continue;
    window.clear();
    for (std::ptrdiff_t j = i - half; j <= i + half; ++j)
      if (!masked(j)) window.push_back(value(j));
    out[static_cast<std::size_t>(i)] = median(window);
    known[static_cast<std::size_t>(i)] = true;
  }
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (known[static_cast<std::size_t>(i)]) continue;
    std::ptrdiff_t l = i, r = i;
    while (l >= 0 && !known[static_cast<std::size_t>(l)]) --l;
    while (r < n && !known[static_cast<std::size_t>(r)]) ++r;
    if (l < 0 && r >= n) return std::vector<double>(y.size(), 0.0);
    const auto at = [&](std::ptrdiff_t k) { return out[static_cast<std::size_t>(k)]; };
    if (l < 0) out[static_cast<std::size_t>(i)] = at(r);
    else if (r >= n) out[static_cast<std::size_t>(i)] = at(l);
    else out[static_cast<std::size_t>(i)] = at(l) + (at(r) - at(l)) * static_cast<double>(i - l) / static_cast<double>(r - l);
  }
  return out;
}

std::vector<double> running_mean(const std::vector<double>& y, std::size_t half) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(y.size() - 1, i + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += y[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// Bins either side of k over which pred holds, as [left, right].
template <typename Pred>
std::pair<std::size_t, std::size_t> run_around(std::size_t k, std::size_t n, Pred pred) {
  std::size_t left = k, right = k;
  while (left > 0 && pred(left - 1)) --left;
  while (right + 1 < n && pred(right + 1)) ++right;
  return {left, right};
}

FanoParams external_from(const Eigen::VectorXd& x) {
  return from_internal(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

}  // namespace

void FanoParams::validate() const {
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw Error("fano parameters: widths must be > 0");
  if (!(A1 >= 0.0) || !(A2 >= 0.0) || !std::isfinite(A1) || !std::isfinite(A2))
    throw Error("fano parameters: amplitudes must be finite and >= 0");
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(phi) || !std::isfinite(gamma1) ||
      !std::isfinite(gamma2))
    throw Error("fano parameters must be finite");
}

std::vector<double> evaluate_model(const FanoParams& params, std::span<const double> grid) {
  params.validate();
  const auto channels = channels_of(params);
  return spectral::joint_spectral_intensity(grid, channels, kUnitWeights, true);
}

double evaluate_model(const FanoParams& params, double lambda) {
  params.validate();
  const auto channels = channels_of(params);
  return spectral::joint_spectral_intensity(lambda, channels, kUnitWeights, true);
}

double wrap_phase(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

std::vector<double> to_internal(const FanoParams& p) {
  p.validate();
  if (!(p.A1 > 0.0) || !(p.A2 > 0.0)) throw Error("fano parameters: start amplitudes must be > 0");
  return {std::log(p.A1), std::log(p.A2), p.lambda1, p.lambda2, std::log(p.gamma1), std::log(p.gamma2), p.phi};
}

FanoParams from_internal(std::span<const double> x) {
  if (x.size() != kFanoParameterCount) throw Error("fano parameter vector must have 7 entries");
  return {std::exp(x[0]), std::exp(x[1]), x[2], x[3], std::exp(x[4]), std::exp(x[5]), x[6]};
}

FanoParams auto_init(std::span<const double> grid, std::span<const double> counts) {
  if (grid.size() != counts.size()) throw Error("spectrum grid and counts differ in length");
  if (grid.size() < 3) throw Error("spectrum too short to initialize a fit");
  const auto [lo_it, hi_it] = std::minmax_element(counts.begin(), counts.end());
  if (!(*hi_it > *lo_it)) throw Error("flat spectrum: nothing to fit");
  const std::size_t n = grid.size();
  const double step = (grid.back() - grid.front()) / static_cast<double>(n - 1);
  const double span = grid.back() - grid.front();

  // Two passes: locate the narrow feature against a running median, then
  // re-estimate the pedestal with the feature and its wings masked out. The
  // feature is found on a lightly smoothed excess so single noisy bins do
  // not win.
  const std::size_t width = std::max<std::size_t>(5, (n / 2) | 1);
  const std::size_t smooth_half = std::max<std::size_t>(1, n / 100);
  std::vector<bool> mask(n, false);
  std::vector<double> base_line, excess(n);
  std::size_t k = 0, l1 = 0, r1 = 0;
  double sign = 1.0;
  for (int pass = 0; pass < 2; ++pass) {
    base_line = pedestal(counts, width, mask);
    for (std::size_t i = 0; i < n; ++i) excess[i] = counts[i] - base_line[i];
    excess = running_mean(excess, smooth_half);
    if (pass == 0) {
      k = static_cast<std::size_t>(std::max_element(excess.begin(), excess.end(),
                                                    [](double a, double b) { return std::abs(a) < std::abs(b); }) -
                                   excess.begin());
      if (excess[k] == 0.0) throw Error("flat spectrum: nothing to fit");
    }
    sign = excess[k] > 0.0 ? 1.0 : -1.0;
    const double half = 0.5 * std::abs(excess[k]);
    std::tie(l1, r1) = run_around(k, n, [&](std::size_t i) { return sign * excess[i] > half; });
    const std::size_t reach = 3 * (r1 - l1 + 1);
    for (std::size_t i = (k > reach ? k - reach : 0); i <= std::min(n - 1, k + reach); ++i) mask[i] = true;
  }

  FanoParams p;
  p.lambda1 = grid[k];
  p.gamma1 = std::max(step, static_cast<double>(r1 - l1 + 1) * step);
  const double base = std::max(base_line[k], 0.0);
  p.A1 = sign > 0.0 ? std::sqrt(base + excess[k]) - std::sqrt(base)
                    : std::sqrt(base) - std::sqrt(std::max(base + excess[k], 0.0));

  const auto j = static_cast<std::size_t>(std::max_element(base_line.begin(), base_line.end()) - base_line.begin());
  const double top = base_line[j];
  p.lambda2 = grid[j];
  if (top > 0.0) {
    const auto [l2, r2] = run_around(j, n, [&](std::size_t i) { return base_line[i] > 0.5 * top; });
    const bool bounded = l2 > 0 && r2 + 1 < n;
    p.gamma2 = bounded ? std::max(step, static_cast<double>(r2 - l2 + 1) * step) : 2.0 * span;
    p.A2 = std::sqrt(top);
  } else {
    p.gamma2 = 2.0 * span;
    p.A2 = 0.0;
  }
  // Strictly positive amplitudes keep the log parameterization defined.
  const double floor = 1e-3 * std::max(p.A1, p.A2);
  p.A1 = std::max(p.A1, floor);
  p.A2 = std::max(p.A2, floor);
  p.phi = 0.0;
  return p;
}

FanoParams auto_init(const tof::SpectrumEstimate& spectrum) {
  spectrum.validate();
  const auto net = spectrum.net();
  return auto_init(spectrum.grid, net);
}

FanoFitResult fit(std::span<const double> grid, std::span<const double> counts, const FitOptions& options,
                  std::span<const double> variance) {
  if (grid.size() != counts.size()) throw Error("spectrum grid and counts differ in length");
  if (!variance.empty() && variance.size() != counts.size()) throw Error("spectrum variance must match counts");
  const auto occupied = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](double c) { return c != 0.0; }));
  if (occupied < kFanoParameterCount) throw Error("insufficient data: fewer nonzero bins than fit parameters");

  const std::size_t n = counts.size();
  std::vector<double> inv_sigma(n, 1.0);
  if (options.poisson_weights)
    for (std::size_t i = 0; i < n; ++i)
      inv_sigma[i] = 1.0 / std::sqrt(std::max(variance.empty() ? counts[i] : variance[i], 1.0));

  const lm::Residuals internal_residuals = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    const FanoParams q = external_from(x);
    // Overflowed trial steps are rejected by the solver, not raised.
    if (!(q.A1 < kHuge && q.A2 < kHuge && q.gamma1 > 0.0 && q.gamma2 > 0.0 && q.gamma1 < kHuge &&
          q.gamma2 < kHuge && std::isfinite(q.lambda1) && std::isfinite(q.lambda2) && std::isfinite(q.phi))) {
      r.setConstant(std::numeric_limits<double>::infinity());
      return r;
    }
    const auto model = evaluate_model(q, grid);
    for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = (model[i] - counts[i]) * inv_sigma[i];
    return r;
  };

  const FanoParams init = options.init ? *options.init : auto_init(grid, counts);
  const std::array<double, 4> starts{0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};

  std::optional<lm::Result> best;
  std::size_t best_start = 0;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    FanoParams start = init;
    start.phi = starts[s];
    const auto x0 = to_internal(start);
    auto run = lm::minimize(internal_residuals, Eigen::Map<const Eigen::VectorXd>(x0.data(), 7), options.solver);
    const bool better = !best || (run.converged && !best->converged) ||
                        (run.converged == best->converged && run.cost < best->cost * (1.0 - 1e-12));
    if (better) {
      best = std::move(run);
      best_start = s;
    }
  }

  FanoFitResult result;
  result.params = external_from(best->x);
  result.params.phi = wrap_phase(result.params.phi);
  result.residual_norm = best->residuals.norm();
  result.converged = best->converged;
  result.iterations = best->iterations;
  result.start = best_start;
  result.cost_history = best->cost_history;

  // Covariance in external parameters, s²(JᵀJ)⁻¹ over identifiable columns.
  const auto& p = result.params;
  const std::array<double, kFanoParameterCount> ext{p.A1, p.A2, p.lambda1, p.lambda2, p.gamma1, p.gamma2, p.phi};
  const lm::Residuals external_residuals = [&](const Eigen::VectorXd& e) {
    const FanoParams q{std::abs(e[0]), std::abs(e[1]), e[2], e[3], e[4], e[5], e[6]};
    const auto model = evaluate_model(q, grid);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = (model[i] - counts[i]) * inv_sigma[i];
    return r;
  };
  const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(ext.data(), 7);
  // Widths are kept positive under the difference step.
  const double rel = std::min(1e-6, 0.5 * std::min(p.gamma1, p.gamma2) / std::max(1.0, std::max(p.gamma1, p.gamma2)));
  const Eigen::MatrixXd jac = lm::numeric_jacobian(external_residuals, e, rel);

  double data_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) data_scale += counts[i] * counts[i] * inv_sigma[i] * inv_sigma[i];
  data_scale = std::sqrt(data_scale);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < 7; ++j)
    if (jac.col(j).norm() * std::max(1.0, std::abs(e[j])) > 1e-8 * data_scale) kept.push_back(j);

  std::array<double, kFanoParameterCount> sig;
  sig.fill(std::numeric_limits<double>::infinity());
  const auto dof = static_cast<double>(n) - static_cast<double>(kept.size());
  if (!kept.empty() && dof > 0.0) {
    Eigen::MatrixXd reduced(jac.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) reduced.col(static_cast<Eigen::Index>(c)) = jac.col(kept[c]);
    const double s2 = best->residuals.squaredNorm() / dof;
    const Eigen::MatrixXd normal = reduced.transpose() * reduced;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(normal);
    const Eigen::MatrixXd cov = s2 * cod.pseudoInverse();
    for (std::size_t c = 0; c < kept.size(); ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      sig[static_cast<std::size_t>(kept[c])] = std::sqrt(std::max(cov(cc, cc), 0.0));
    }
  }
  result.sigmas = {sig[0], sig[1], sig[2], sig[3], sig[4], sig[5], sig[6]};
  return result;
}

FanoFitResult fit(const tof::SpectrumEstimate& spectrum, const FitOptions& options) {
  spectrum.validate();
  const auto net = spectrum.net();
  const auto var = spectrum.variance();
  return fit(spectrum.grid, net, options, var);
}

void write_fit_report(std::ostream& out, const FanoFitResult& result) {
  const auto& p = result.params;
  const auto& s = result.sigmas;
  out.precision(12);
  out << "parameter,value,sigma\n";
  out << "A1," << p.A1 << ',' << s.A1 << '\n';
  out << "A2," << p.A2 << ',' << s.A2 << '\n';
  out << "lambda1_nm," << p.lambda1 << ',' << s.lambda1 << '\n';
  out << "lambda2_nm," << p.lambda2 << ',' << s.lambda2 << '\n';
  out << "gamma1_nm," << p.gamma1 << ',' << s.gamma1 << '\n';
  out << "gamma2_nm," << p.gamma2 << ',' << s.gamma2 << '\n';
  out << "phi_rad," << p.phi << ',' << s.phi << '\n';
  out << "residual_norm," << result.residual_norm << ",\n";
  out << "converged," << (result.converged ? 1 : 0) << ",\n";
  out << "iterations," << result.iterations << ",\n";
  out << "start," << result.start << ",\n";
}

void write_model_csv(std::ostream& out, const FanoParams& params, std::span<const double> grid) {
  const auto model = evaluate_model(params, grid);
  out.precision(12);
  out << "lambda_nm,model\n";
  for (std::size_t i = 0; i < grid.size(); ++i) out << grid[i] << ',' << model[i] << '\n';
}

}  // namespace biphoton::fano
