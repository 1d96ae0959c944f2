#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "biphoton/error.hpp"
#include "biphoton/spectral_model.hpp"
#include "doctest.h"

using namespace biphoton;
using namespace biphoton::spectral;

namespace {

ResonanceChannel channel(double lambda0, double gamma, double amplitude, double phase = 0.0,
                         Polarization pol = {}) {
  ResonanceChannel ch;
  ch.id = "ch";
  ch.lambda0 = lambda0;
  ch.gamma = gamma;
  ch.amplitude = amplitude;
  ch.phase = phase;
  ch.polarization = pol;
  return ch;
}

std::vector<ResonanceChannel> reference_params(double phi = std::numbers::pi) {
  return {channel(1581.1, 14.2, 33.0), channel(1450.0, 400.0, 380.0, phi)};
}

const AnalyzerSetting kHorizontal{true, 0.0};

}  // namespace

TEST_CASE("lorentzian amplitude closed-form points") {
  const auto ch = channel(1581.1, 14.2, 33.0);
  CHECK(std::abs(lorentzian_amplitude(1581.1, ch)) == doctest::Approx(33.0).epsilon(1e-14));
  CHECK(std::norm(lorentzian_amplitude(1581.1, ch)) == doctest::Approx(1089.0).epsilon(1e-13));
  CHECK(std::norm(lorentzian_amplitude(1581.1 + 7.1, ch)) == doctest::Approx(1089.0 / 2).epsilon(1e-13));
  CHECK(std::norm(lorentzian_amplitude(1581.1 - 7.1, ch)) == doctest::Approx(1089.0 / 2).epsilon(1e-13));
  for (double x : {1400.0, 1575.0, 1590.0, 1700.0})
    CHECK(std::norm(lorentzian_amplitude(x, ch)) < 1089.0);
}

TEST_CASE("channel weight") {
  const auto h = channel(1580, 1, 1);
  CHECK(channel_weight(h, {false, 1.234}) == Complex(1.0, 0.0));
  CHECK(std::abs(channel_weight(h, {true, 0.0}) - 1.0) < 1e-15);
  CHECK(std::abs(channel_weight(h, {true, std::numbers::pi / 4}) - 0.5) < 1e-15);
  CHECK(std::abs(channel_weight(h, {true, std::numbers::pi / 2})) < 1e-15);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(-4.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double a = angle(rng), b = angle(rng);
    const auto ch = channel(1580, 1, 1, 0.0, Polarization{std::polar(std::cos(a), b), std::polar(std::sin(a), -b)});
    CHECK(std::abs(channel_weight(ch, {true, angle(rng)})) <= 1.0 + 1e-15);
  }
}

TEST_CASE("joint spectral intensity errors and one-path case") {
  const std::vector<ResonanceChannel> none;
  CHECK_THROWS_WITH_AS(joint_spectral_intensity(1580.0, none, {}, true), "no emission channels", Error);

  const std::vector<ResonanceChannel> one{channel(1581.1, 14.2, 33.0, 0.7, Polarization::linear(0.3))};
  for (const AnalyzerSetting an : {AnalyzerSetting{false, 0}, AnalyzerSetting{true, 0.2}}) {
    for (double x = 1500; x <= 1650; x += 3.7) {
      const double ind = joint_spectral_intensity(x, one, an, true);
      const double dist = joint_spectral_intensity(x, one, an, false);
      const double ref = std::norm(channel_weight(one[0], an) * lorentzian_amplitude(x, one[0]));
      CHECK(ind == doctest::Approx(ref).epsilon(1e-12));
      CHECK(dist == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("reference spectrum extrema match the frozen grid oracle") {
  // Values from an independent numpy scan at 0.01 nm over [1500, 1650].
  const auto chs = reference_params();
  std::vector<double> grid;
  for (int k = 0; k <= 15000; ++k) grid.push_back(1500.0 + 0.01 * k);
  const auto ind = joint_spectral_intensity(grid, chs, kHorizontal, true);
  const auto dist = joint_spectral_intensity(grid, chs, kHorizontal, false);

  std::size_t local_min = 0, local_max = 0;
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    if (ind[k] < ind[k - 1] && ind[k] < ind[k + 1]) local_min = k;
    if (ind[k] > ind[k - 1] && ind[k] > ind[k + 1]) local_max = k;
  }
  CHECK(grid[local_min] == doctest::Approx(1584.06).epsilon(1e-9));
  CHECK(ind[local_min] == doctest::Approx(81699.5986565828).epsilon(1e-10));
  CHECK(grid[local_max] == doctest::Approx(1597.17).epsilon(1e-9));
  CHECK(ind[local_max] == doctest::Approx(86771.39856863338).epsilon(1e-10));
  CHECK(ind.front() == doctest::Approx(136247.32).epsilon(1e-7));

  const double ind_min = *std::min_element(ind.begin(), ind.end());
  const double dist_min = *std::min_element(dist.begin(), dist.end());
  CHECK(ind_min == doctest::Approx(70801.038).epsilon(1e-7));
  CHECK(dist_min == doctest::Approx(72211.442).epsilon(1e-7));
  CHECK(ind_min < dist_min);
}

TEST_CASE("nonnegativity over random channels") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ResonanceChannel> chs;
    const int n = 1 + static_cast<int>(u(rng) * 3);
    for (int i = 0; i < n; ++i)
      chs.push_back(channel(1450 + 250 * u(rng), 0.1 + 50 * u(rng), 100 * u(rng), 7 * u(rng),
                            Polarization::linear(3 * u(rng))));
    const AnalyzerSetting an{u(rng) < 0.5, 3 * u(rng)};
    for (double x = 1400; x <= 1700; x += 1.3) {
      CHECK(joint_spectral_intensity(x, chs, an, true) >= 0.0);
      CHECK(joint_spectral_intensity(x, chs, an, false) >= 0.0);
    }
  }
}

TEST_CASE("orthogonal channels without analyzer add as intensities") {
  const std::vector<ResonanceChannel> chs{channel(1581.1, 14.2, 33.0, 0.0, Polarization::linear(0.4)),
                                          channel(1450.0, 400.0, 380.0, 2.0,
                                                  Polarization::linear(0.4 + std::numbers::pi / 2))};
  for (double x = 1500; x <= 1650; x += 0.77) {
    const double ind = joint_spectral_intensity(x, chs, {}, true);
    const double dist = joint_spectral_intensity(x, chs, {}, false);
    CHECK(ind == doctest::Approx(dist).epsilon(1e-12));
  }
  // Parallel polarizations without analyzer interfere fully.
  auto same = chs;
  same[1].polarization = same[0].polarization;
  const double x = 1590.0;
  const Complex sum = lorentzian_amplitude(x, same[0]) + lorentzian_amplitude(x, same[1]);
  CHECK(joint_spectral_intensity(x, same, {}, true) == doctest::Approx(std::norm(sum)).epsilon(1e-12));
}

TEST_CASE("mirror symmetry of the inter-channel phase") {
  // I(λ; λ1, λ2, φ) = I(2c − λ; 2c − λ1, 2c − λ2, 2π − φ).
  const double c = 1575.0;
  for (double phi : {0.3, 1.1, std::numbers::pi, 4.0, 5.9}) {
    const auto a = reference_params(phi);
    auto b = reference_params(2 * std::numbers::pi - phi);
    b[0].lambda0 = 2 * c - a[0].lambda0;
    b[1].lambda0 = 2 * c - a[1].lambda0;
    for (double x = 1500; x <= 1650; x += 2.9)
      CHECK(joint_spectral_intensity(x, a, kHorizontal, true) ==
            doctest::Approx(joint_spectral_intensity(2 * c - x, b, kHorizontal, true)).epsilon(1e-12));
  }
  // At φ = 0 and π the two phases coincide modulo 2π.
  for (double phi : {0.0, std::numbers::pi}) {
    const auto a = reference_params(phi);
    const auto b = reference_params(2 * std::numbers::pi - phi);
    for (double x = 1500; x <= 1650; x += 5.3)
      CHECK(joint_spectral_intensity(x, a, kHorizontal, true) ==
            doctest::Approx(joint_spectral_intensity(x, b, kHorizontal, true)).epsilon(1e-12));
  }
}

TEST_CASE("conjugate wavelength") {
  CHECK(conjugate_wavelength(1581.6, 790.8) == doctest::Approx(1581.6).epsilon(1e-14));
  for (double lp : {400.0, 532.0, 775.0, 790.8})
    CHECK(conjugate_wavelength(2 * lp, lp) == doctest::Approx(2 * lp).epsilon(1e-14));
  // Frozen from an independent arithmetic evaluation.
  CHECK(conjugate_wavelength(1500.0, 790.8) == doctest::Approx(1672.5888324873094).epsilon(1e-13));

  for (double ls = 1500; ls < 1700; ls += 3.3) {
    const double li = conjugate_wavelength(ls, 790.8);
    CHECK(1.0 / ls + 1.0 / li == doctest::Approx(1.0 / 790.8).epsilon(1e-12));
    CHECK(conjugate_wavelength(li, 790.8) == doctest::Approx(ls).epsilon(1e-10));
  }
  CHECK_THROWS_WITH_AS(conjugate_wavelength(790.8, 790.8), "signal not below pump energy", Error);
  CHECK_THROWS_WITH_AS(conjugate_wavelength(500.0, 790.8), "signal not below pump energy", Error);
}

TEST_CASE("pump coupling and validation") {
  CHECK(pump_coupling(0.0, 0.0) == doctest::Approx(1.0));
  CHECK(pump_coupling(std::numbers::pi / 4, 0.0) == doctest::Approx(0.5));
  CHECK(pump_coupling(std::numbers::pi / 2, 0.0) == doctest::Approx(0.0).epsilon(1e-15));

  CHECK_THROWS_AS(channel(1580, 0.0, 1).validate(), Error);
  CHECK_THROWS_AS(channel(1580, 1.0, -1).validate(), Error);
  CHECK_THROWS_AS(channel(-1, 1.0, 1).validate(), Error);
  CHECK_THROWS_AS(channel(1580, 1.0, 1, 0, Polarization{{1, 0}, {1, 0}}).validate(), Error);
  CHECK_NOTHROW(channel(1580, 1.0, 1, 0, Polarization::linear(0.7)).validate());
  CHECK_THROWS_AS((PumpConfig{-1.0, 1.0, 0.0}).validate(), Error);
  CHECK_THROWS_AS((PumpConfig{790.8, -1.0, 0.0}).validate(), Error);
}
