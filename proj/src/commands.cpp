#include "biphoton/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <ostream>

#include "biphoton/error.hpp"
#include "biphoton/experiment.hpp"
#include "biphoton/fano_fit.hpp"
#include "biphoton/timetag_io.hpp"
#include "biphoton/tof_spectrometer.hpp"

namespace biphoton::commands {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;
using experiment::FileDigest;

namespace {

ExperimentConfig load(const Options& options) {
  if (!options.config) throw Error("--config is required");
  auto config = experiment::load_config(*options.config);
  if (options.seed) config.seed = *options.seed;
  if (options.format) config.output_format = *options.format;
  if (options.no_dispersion) config.dispersion_enabled = false;
  config.validate();
  return config;
}

fs::path prepare_out(const Options& options, const std::string& config_dir) {
  const auto dir = output_directory(options.out, config_dir);
  fs::create_directories(dir);
  return dir;
}

template <typename Writer>
std::string write_text(const fs::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  writer(out);
  out.flush();
  if (!out) throw Error("failed to write '" + path.string() + "'");
  return path.string();
}

void write_manifest(const fs::path& dir, std::string_view command, const ExperimentConfig* config,
                    const std::vector<FileDigest>& inputs, const std::vector<std::string>& outputs) {
  const auto path = dir / (std::string(command) + ".manifest.json");
  write_text(path, [&](std::ostream& out) { out << experiment::manifest_json(config, command, inputs, outputs); });
}

std::vector<FileDigest> inputs_of(const Options& options, std::initializer_list<std::optional<fs::path>> files) {
  std::vector<FileDigest> out;
  if (options.config) out.push_back(experiment::digest_file(*options.config));
  for (const auto& f : files)
    if (f) out.push_back(experiment::digest_file(*f));
  return out;
}

mc::DetectorStreams read_streams(const Options& options) {
  if (!options.tags) throw Error("--tags is required");
  return mc::split_tags(io::read_tag_file(*options.tags));
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailed;
  }
}

}  // namespace

fs::path output_directory(const std::optional<fs::path>& out, const std::string& config_dir) {
  if (out) return *out;
  if (!config_dir.empty()) return config_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return ".";
}

int simulate(const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load(options);
    const auto dir = prepare_out(options, config.output_dir);
    const auto format = config.tag_format();
    const auto streams = experiment::simulate(config, config.dispersion_enabled);
    const auto tags = mc::merge_streams(streams);
    const auto path = dir / (std::string("tags.") + std::string(io::tag_format_name(format)));
    io::write_tag_file(path, tags, format);
    write_manifest(dir, "simulate", &config, inputs_of(options, {}), {path.string()});
    log << "wrote " << tags.size() << " tags (A " << streams.a.size() << ", B " << streams.b.size() << ") to "
        << path.string() << '\n';
    return kOk;
  });
}

int analyze(const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load(options);
    const auto streams = read_streams(options);
    const auto dir = prepare_out(options, config.output_dir);
    const auto summary = experiment::analyze(streams, config);
    std::vector<std::string> outputs;
    outputs.push_back(write_text(dir / "histogram.csv", [&](std::ostream& out) {
      coincidence::write_histogram_csv(out, summary.histogram);
    }));
    outputs.push_back(
        write_text(dir / "summary.csv", [&](std::ostream& out) { experiment::write_summary_csv(out, summary); }));
    write_manifest(dir, "analyze", &config, inputs_of(options, {options.tags}), outputs);
    experiment::write_summary_csv(log, summary);
    return kOk;
  });
}

int spectrum(const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load(options);
    if (!config.dispersion_enabled || config.dispersion_slope_ps_per_nm == 0.0)
      throw Error("dispersion required: the config has no dispersive spools");
    const auto streams = read_streams(options);
    const auto dir = prepare_out(options, config.output_dir);
    const auto estimate = experiment::measure_spectrum(streams, config);
    const auto path =
        write_text(dir / "spectrum.csv", [&](std::ostream& out) { tof::write_spectrum_csv(out, estimate); });
    write_manifest(dir, "spectrum", &config, inputs_of(options, {options.tags}), {path});
    log << "mapped " << estimate.accepted << " coincidences (" << estimate.rejected << " outside range)\n";
    log << "resolution_nm," << estimate.resolution << '\n';
    if (estimate.accepted > 0) {
      log << "peak_nm," << tof::peak_wavelength(estimate) << '\n';
      try {
        log << "fwhm_nm," << tof::fwhm(estimate) << '\n';
      } catch (const Error& e) {
        log << "fwhm_nm,nan (" << e.what() << ")\n";
      }
    }
    return kOk;
  });
}

int fit(const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (!options.spectrum) throw Error("--spectrum is required");
    std::optional<ExperimentConfig> config;
    if (options.config) config = load(options);
    std::ifstream in(*options.spectrum);
    if (!in) throw Error("cannot open '" + options.spectrum->string() + "'");
    const auto estimate = tof::read_spectrum_csv(in);
    fano::FitOptions fit_options;
    fit_options.poisson_weights = config && config->fit_poisson_weights;
    const auto result = fano::fit(estimate, fit_options);

    const auto dir = prepare_out(options, config ? config->output_dir : std::string());
    std::vector<std::string> outputs;
    outputs.push_back(
        write_text(dir / "fit_report.csv", [&](std::ostream& out) { fano::write_fit_report(out, result); }));
    outputs.push_back(write_text(dir / "fit_model.csv", [&](std::ostream& out) {
      fano::write_model_csv(out, result.params, estimate.grid);
    }));
    write_manifest(dir, "fit", config ? &*config : nullptr, inputs_of(options, {options.spectrum}), outputs);
    fano::write_fit_report(log, result);
    if (!result.converged) {
      err << "warning: no start converged within the iteration limit\n";
      return kNotConverged;
    }
    return kOk;
  });
}

int sweep(const Options& options, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load(options);
    if (options.powers.size() < 3) throw Error("power sweep fit needs ≥3 points");
    const auto dir = prepare_out(options, config.output_dir);
    const auto result = experiment::power_sweep(config, options.powers);
    std::vector<std::string> outputs;
    outputs.push_back(
        write_text(dir / "sweep_rates.csv", [&](std::ostream& out) { experiment::write_sweep_csv(out, result); }));
    outputs.push_back(write_text(dir / "sweep_summary.csv",
                                 [&](std::ostream& out) { experiment::write_sweep_summary(out, result); }));
    write_manifest(dir, "sweep", &config, inputs_of(options, {}), outputs);
    experiment::write_sweep_csv(log, result);
    experiment::write_sweep_summary(log, result);
    return kOk;
  });
}

}  // namespace biphoton::commands
