#include "qmem/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "qmem/config.hpp"
#include "qmem/csv.hpp"
#include "qmem/dephasing.hpp"
#include "qmem/errors.hpp"
#include "qmem/estimation.hpp"
#include "qmem/populations.hpp"
#include "qmem/scan.hpp"

namespace qmem::cli {
namespace {

constexpr const char* kVersion = "0.1.0";

using csv::format_number;

// Every key the commands read. Coherence matrix entries use the pattern
// coherences.P.<n>.<m> and are checked separately.
const std::vector<std::string> kKnownKeys = {
    "consts.g_mhz_per_gauss", "consts.clock_ghz", "consts.mass_kg", "consts.wavelength_nm",
    "model.scheme", "model.a0", "field.gauss",
    "envelope.law", "envelope.tau_us",
    "coherences.matrix", "coherences.p-3", "coherences.p-2", "coherences.p-1",
    "coherences.p0", "coherences.p1", "coherences.p2", "coherences.p3",
    "pump.fraction", "pump.remainder",
    "sel.width_mhz", "sel.detuning_mhz", "sel.shape",
    "sel.calibrate_r", "sel.calibrate_gauss", "sel.calibrate_detuning_mhz",
    "time.start_us", "time.stop_us", "time.points",
    "noise.snr", "noise.relative", "noise.floor", "noise.seed",
    "scan.lo", "scan.hi", "scan.points", "scan.threads",
    "window.start_us", "window.stop_us",
    "cloud.temperature_uk", "cloud.rms_size_cm", "cloud.beam_angle_deg", "cloud.wavelength_nm",
    "lifetime.gradient_mg_per_cm", "lifetime.m_f", "lifetime.tau_us",
    "optimize.objective",
    "stray.fit_tau",
};

bool is_matrix_key(std::string_view key, int& n, int& m) {
  constexpr std::string_view prefix = "coherences.P.";
  if (key.substr(0, prefix.size()) != prefix) return false;
  std::istringstream in(std::string(key.substr(prefix.size())));
  char dot = 0;
  if (!(in >> n >> dot >> m) || dot != '.' || in.peek() != EOF) return false;
  return true;
}

void check_keys(const Config& cfg) {
  for (const auto& [key, value] : cfg.entries()) {
    int n = 0, m = 0;
    if (is_matrix_key(key, n, m)) {
      if (!selection_rule_allowed(n, m)) {
        throw ValidationError("coherence (" + std::to_string(n) + ", " + std::to_string(m) +
                              ") violates the selection rules");
      }
      continue;
    }
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

PhysicalConstants constants_from(const Config& cfg) {
  PhysicalConstants c;
  c.g_factor_mhz_per_gauss = cfg.get_double("consts.g_mhz_per_gauss", c.g_factor_mhz_per_gauss);
  c.clock_frequency_ghz = cfg.get_double("consts.clock_ghz", c.clock_frequency_ghz);
  c.cs_mass_kg = cfg.get_double("consts.mass_kg", c.cs_mass_kg);
  c.signal_wavelength_nm = cfg.get_double("consts.wavelength_nm", c.signal_wavelength_nm);
  c.validate();
  return c;
}

DecayLaw parse_law(const std::string& text) {
  const auto s = lowercase(text);
  if (s == "gaussian") return DecayLaw::Gaussian;
  if (s == "exponential") return DecayLaw::Exponential;
  if (s == "none") return DecayLaw::None;
  throw ValidationError("unknown envelope law '" + text + "'");
}

DecayEnvelope envelope_from(const Config& cfg) {
  const auto law = parse_law(cfg.get_string("envelope.law", "gaussian"));
  if (law == DecayLaw::None) return DecayEnvelope::none();
  return DecayEnvelope::make(law, cfg.get_double("envelope.tau_us", 440.0));
}

PumpState pump_from(const Config& cfg) {
  PumpState pump;
  pump.polarized_fraction = cfg.get_double("pump.fraction", pump.polarized_fraction);
  const auto policy = lowercase(cfg.get_string("pump.remainder", "next_lower"));
  if (policy == "next_lower") {
    pump.remainder_policy = RemainderPolicy::AllInNextLower;
  } else if (policy == "uniform_below") {
    pump.remainder_policy = RemainderPolicy::UniformBelow;
  } else {
    throw ValidationError("pump.remainder must be next_lower or uniform_below");
  }
  pump.validate();
  return pump;
}

LineShape parse_shape(const std::string& text) {
  const auto s = lowercase(text);
  if (s == "lorentzian") return LineShape::Lorentzian;
  if (s == "gaussian") return LineShape::Gaussian;
  throw ValidationError("unknown line shape '" + text + "'");
}

// The width is either given directly or calibrated so that the relative
// amplitude equals sel.calibrate_r at (sel.calibrate_gauss, sel.calibrate_detuning_mhz).
SelectivityModel selectivity_from(const Config& cfg, const PumpState& pump,
                                  const PhysicalConstants& consts) {
  SelectivityModel sel;
  sel.shape = parse_shape(cfg.get_string("sel.shape", "lorentzian"));
  sel.detuning_mhz = cfg.get_double("sel.detuning_mhz", sel.detuning_mhz);
  if (const auto target = cfg.find_double("sel.calibrate_r")) {
    if (cfg.contains("sel.width_mhz")) {
      throw ValidationError("sel.width_mhz and sel.calibrate_r are mutually exclusive");
    }
    sel.eit_width_mhz = calibrate_eit_width(
        pump_distribution(pump), cfg.get_double("sel.calibrate_gauss", 2.6),
        cfg.get_double("sel.calibrate_detuning_mhz", 6.5), *target, sel.shape, consts);
  } else {
    sel.eit_width_mhz = cfg.get_double("sel.width_mhz", sel.eit_width_mhz);
  }
  sel.validate();
  return sel;
}

bool has_prefix_key(const Config& cfg, std::string_view prefix) {
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

DiagonalCoherences diagonal_from(const Config& cfg, const PhysicalConstants& consts) {
  bool any = false;
  DiagonalCoherences::Weights w{};
  for (int m = -DiagonalCoherences::kMaxM; m <= DiagonalCoherences::kMaxM; ++m) {
    if (const auto v = cfg.find_double("coherences.p" + std::to_string(m))) {
      w[DiagonalCoherences::index(m)] = *v;
      any = true;
    }
  }
  if (any) return DiagonalCoherences::normalized(w);
  // Otherwise from the pump, filtered by the storage resonance when configured.
  const auto pump = pump_from(cfg);
  const auto base = pump_distribution(pump);
  if (!has_prefix_key(cfg, "sel.")) return base;
  const auto sel = selectivity_from(cfg, pump, consts);
  return apply_detuning_selectivity(base, sel, cfg.get_double("field.gauss", 1.0), consts);
}

CoherenceMatrix matrix_from(const Config& cfg, const PhysicalConstants& consts) {
  CoherenceMatrix::Weights w{};
  bool any = false;
  for (const auto& [key, value] : cfg.entries()) {
    int n = 0, m = 0;
    if (is_matrix_key(key, n, m)) {
      w[CoherenceMatrix::index(n, m)] = cfg.get_double(key, 0.0);
      any = true;
    }
  }
  const auto kind = lowercase(cfg.get_string("coherences.matrix", any ? "explicit" : "uniform"));
  if (kind == "uniform") {
    if (any) throw ValidationError("coherences.matrix = uniform conflicts with coherences.P.*");
    return CoherenceMatrix::uniform_allowed();
  }
  if (kind == "diagonal") return CoherenceMatrix::from_diagonal(diagonal_from(cfg, consts));
  if (kind == "explicit") {
    if (!any) throw ValidationError("coherences.matrix = explicit needs coherences.P.<n>.<m>");
    return CoherenceMatrix::normalized(w);
  }
  throw ValidationError("coherences.matrix must be uniform, diagonal or explicit");
}

ModelParams model_from(const Config& cfg) {
  const auto consts = constants_from(cfg);
  const auto scheme = parse_scheme(cfg.get_string("model.scheme", "two_level"));
  const double b = cfg.get_double("field.gauss", 1.0);
  const double a0 = cfg.get_double("model.a0", 1.0);
  const auto env = envelope_from(cfg);
  ModelParams params;
  switch (scheme) {
    case Scheme::Unpolarized:
      params = ModelParams::unpolarized(matrix_from(cfg, consts), b, env, a0);
      break;
    case Scheme::SigmaPlus:
      params = ModelParams::sigma_plus(diagonal_from(cfg, consts), b, env, a0);
      break;
    case Scheme::TwoLevel:
      params = ModelParams::two_level(cfg.get_double("coherences.p2", 0.07), b, env, a0);
      break;
  }
  params.constants = consts;
  params.validate();
  return params;
}

std::vector<double> time_grid(const Config& cfg) {
  const auto n = cfg.get_int("time.points", 2000);
  if (n < 1) throw ValidationError("time.points must be >= 1");
  return uniform_grid(cfg.get_double("time.start_us", 0.0), cfg.get_double("time.stop_us", 1000.0),
                      static_cast<std::size_t>(n));
}

NoiseSpec noise_from(const Config& cfg, std::optional<std::uint64_t> seed_flag) {
  const auto seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(cfg.get_int("noise.seed", 0));
  if (const auto snr = cfg.find_double("noise.snr")) {
    if (!(*snr > 0.0)) throw ValidationError("noise.snr must be > 0");
    return NoiseSpec::snr(*snr, seed, cfg.get_double("noise.floor", 1e-3));
  }
  NoiseSpec noise;
  noise.relative_sigma = cfg.get_double("noise.relative", 0.0);
  noise.floor_sigma = cfg.get_double("noise.floor", 0.0);
  noise.seed = seed;
  return noise;
}

RetrievalCurve read_input(const std::string& path) {
  if (path == "-") return csv::read_curve(std::cin);
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file " + path);
  return csv::read_curve(in);
}

ScanSpec scan_spec_from(const Config& cfg, ScanVariable variable) {
  ScanSpec spec;
  spec.variable = variable;
  spec.constants = constants_from(cfg);
  spec.pump = pump_from(cfg);
  spec.selectivity = selectivity_from(cfg, spec.pump, spec.constants);
  spec.b_gauss = cfg.get_double("field.gauss", 1.0);
  spec.amplitude_scale = cfg.get_double("model.a0", 1.0);
  const bool field = variable == ScanVariable::Field;
  spec.range.lo = cfg.get_double("scan.lo", field ? 0.0 : -2.0);
  spec.range.hi = cfg.get_double("scan.hi", field ? 3.0 : 10.0);
  spec.range.n_points = static_cast<int>(cfg.get_int("scan.points", 121));
  const auto threads = cfg.get_int("scan.threads", 0);
  if (threads < 0) throw ValidationError("scan.threads must be >= 0");
  spec.threads = static_cast<unsigned>(threads);
  const auto w0 = cfg.find_double("window.start_us");
  const auto w1 = cfg.find_double("window.stop_us");
  if (w0.has_value() != w1.has_value()) {
    throw ValidationError("window.start_us and window.stop_us must be given together");
  }
  if (w0) spec.window = TimeWindow{*w0, *w1};
  spec.range.validate();
  return spec;
}

void write_fit(std::ostream& out, const FitResult& fit) {
  csv::write_row(out, {"param", "estimate", "sigma"});
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    csv::write_row(out, {fit.names[i], format_number(fit.estimates(static_cast<Eigen::Index>(i))),
                         format_number(fit.sigma(fit.names[i]))});
  }
}

void write_constants(std::ostream& out, const PhysicalConstants& c) {
  out << "qmem " << kVersion << '\n'
      << "g_mhz_per_gauss = " << format_number(c.g_factor_mhz_per_gauss) << '\n'
      << "clock_ghz = " << format_number(c.clock_frequency_ghz) << '\n'
      << "mass_kg = " << format_number(c.cs_mass_kg) << '\n'
      << "wavelength_nm = " << format_number(c.signal_wavelength_nm) << '\n';
}

CloudGeometry cloud_from(const Config& cfg) {
  CloudGeometry cloud;
  cloud.temperature_uk = cfg.get_double("cloud.temperature_uk", cloud.temperature_uk);
  cloud.rms_size_cm = cfg.get_double("cloud.rms_size_cm", cloud.rms_size_cm);
  cloud.beam_angle_rad =
      cfg.get_double("cloud.beam_angle_deg", cloud.beam_angle_rad * 180.0 / std::numbers::pi) *
      std::numbers::pi / 180.0;
  cloud.wavelength_nm = cfg.get_double("cloud.wavelength_nm", cloud.wavelength_nm);
  cloud.validate();
  return cloud;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collapse-and-revival model of a Zeeman-split EIT quantum memory", "qmem"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  bool show_version = false;
  std::optional<std::uint64_t> seed;
  std::string input_path = "-";
  bool with_sigma = false;

  app.add_option("-c,--config", config_path, "key = value configuration file");
  app.add_option("-s,--set", overrides, "override a config key (key=value), repeatable")
      ->allow_extra_args(false);
  app.add_flag("--version", show_version, "print the version and physical constants in effect");

  auto* simulate = app.add_subcommand("simulate", "model retrieval curve t_us,amplitude");
  simulate->add_option("--seed", seed, "noise seed");
  simulate->add_flag("--sigma", with_sigma, "append the generating noise sd as a sigma column");
  auto* revivals = app.add_subcommand("revivals", "predicted revival times k,t_us");
  auto* fit = app.add_subcommand("fit", "fit a measured curve; prints param,estimate,sigma");
  fit->add_option("-i,--input", input_path, "curve CSV (t_us,amplitude[,sigma]); '-' for stdin");
  fit->add_option("--seed", seed, "accepted for uniformity; the fit is deterministic");
  auto* stray = app.add_subcommand("estimate-stray-field",
                                   "unpolarized fit with the field free; param,estimate,sigma");
  stray->add_option("-i,--input", input_path, "curve CSV; '-' for stdin");
  auto* scan_det = app.add_subcommand("scan-detuning", "x,a_max,a_min,r over the detuning");
  auto* scan_fld = app.add_subcommand("scan-field", "x,a_max,a_min,r over the field");
  auto* optimize = app.add_subcommand("optimize", "best control detuning at field.gauss");
  auto* lifetime = app.add_subcommand("lifetime", "dephasing lifetime estimates quantity,value");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitSuccess : kExitUsage;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = Config::load(config_path);
    for (const auto& o : overrides) cfg.set_assignment(o);
    check_keys(cfg);

    if (show_version) {
      write_constants(out, constants_from(cfg));
      return kExitSuccess;
    }
    if (app.get_subcommands().empty()) {
      err << app.help();
      return kExitUsage;
    }

    if (simulate->parsed()) {
      const auto params = model_from(cfg);
      const auto times = time_grid(cfg);
      const auto curve = synthesize_curve(params, times, noise_from(cfg, seed));
      csv::write_curve(out, curve, with_sigma);
    } else if (revivals->parsed()) {
      const auto params = model_from(cfg);
      const auto times =
          revival_times(params.b_gauss, params.scheme, cfg.get_double("time.stop_us", 1000.0),
                        params.constants);
      csv::write_row(out, {"k", "t_us"});
      for (std::size_t k = 0; k < times.size(); ++k) {
        csv::write_row(out, {std::to_string(k), format_number(times[k])});
      }
    } else if (fit->parsed()) {
      const auto curve = read_input(input_path);
      const auto scheme = parse_scheme(cfg.get_string("model.scheme", "two_level"));
      std::optional<ModelParams> guess;
      if (cfg.contains("field.gauss")) {
        // A configured model seeds the fit instead of the spectral guess.
        guess = model_from(cfg);
      }
      write_fit(out, fit_curve(curve, scheme, guess));
    } else if (stray->parsed()) {
      const auto curve = read_input(input_path);
      StrayFieldOptions options;
      options.constants = constants_from(cfg);
      options.coherences = matrix_from(cfg, options.constants);
      if (!cfg.get_bool("stray.fit_tau", true)) options.known_envelope = envelope_from(cfg);
      const auto est = estimate_stray_field(curve, options);
      write_fit(out, est.fit);
    } else if (scan_det->parsed()) {
      csv::write_scan(out, scan_detuning(scan_spec_from(cfg, ScanVariable::Detuning)));
    } else if (scan_fld->parsed()) {
      csv::write_scan(out, scan_field(scan_spec_from(cfg, ScanVariable::Field)));
    } else if (optimize->parsed()) {
      const auto consts = constants_from(cfg);
      const auto pump = pump_from(cfg);
      const auto sel = selectivity_from(cfg, pump, consts);
      const auto objective_name = lowercase(cfg.get_string("optimize.objective", "min_r"));
      DetuningObjective objective;
      if (objective_name == "min_r") {
        objective = DetuningObjective::MinimizeR;
      } else if (objective_name == "max_amax") {
        objective = DetuningObjective::MaximizeAmax;
      } else {
        throw ValidationError("optimize.objective must be min_r or max_amax");
      }
      const auto best =
          optimize_detuning(cfg.get_double("field.gauss", 1.0), pump, sel, objective, consts);
      csv::write_row(out, {"delta_mhz", "value", "flat", "plateau_onset_mhz", "width_mhz"});
      csv::write_row(out, {format_number(best.delta_mhz), format_number(best.value),
                           best.flat ? "1" : "0", format_number(best.plateau_onset_mhz),
                           format_number(sel.eit_width_mhz)});
    } else if (lifetime->parsed()) {
      const auto consts = constants_from(cfg);
      const auto cloud = cloud_from(cfg);
      const int m_f = static_cast<int>(cfg.get_int("lifetime.m_f", 3));
      const double tau_mot = motional_lifetime(cloud, consts);
      csv::write_row(out, {"quantity", "value"});
      csv::write_row(out, {"spin_wave_wavenumber_per_m", format_number(spin_wave_wavenumber(cloud))});
      csv::write_row(out, {"motional_tau_us", format_number(tau_mot)});
      if (const auto grad = cfg.find_double("lifetime.gradient_mg_per_cm")) {
        const double tau_grad = gradient_lifetime(*grad, cloud, m_f, consts);
        csv::write_row(out, {"gradient_tau_us", format_number(tau_grad)});
        csv::write_row(out, {"combined_tau_us", format_number(combined_lifetime(tau_mot, tau_grad))});
      }
      if (const auto tau = cfg.find_double("lifetime.tau_us")) {
        csv::write_row(out, {"gradient_mg_per_cm",
                             format_number(gradient_from_lifetime(*tau, cloud, m_f, consts))});
      }
    }
    return kExitSuccess;
  } catch (const NumericalError& e) {
    err << "qmem: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::logic_error& e) {
    // ValidationError and DomainError: bad input or configuration.
    err << "qmem: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "qmem: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace qmem::cli
