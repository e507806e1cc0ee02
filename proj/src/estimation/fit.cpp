#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "qmem/errors.hpp"
#include "qmem/estimation.hpp"

namespace qmem {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kJacobianStep = 1e-6;

struct FreeParameter {
  std::string name;
  double value = 0.0;
  double lower = -kInf;
  double upper = kInf;
  double scale = 1.0;  // floor for relative finite-difference steps
};

// Maps a free-parameter vector onto ModelParams for one scheme.
class ParameterMap {
 public:
  ParameterMap(Scheme scheme, const ModelParams& guess, double data_scale, bool hold_envelope)
      : scheme_(scheme), template_(guess) {
    template_.scheme = scheme;
    const double a0 = guess.amplitude_scale > 0.0 ? guess.amplitude_scale : data_scale;
    params_.push_back({"A0", a0, 0.0, kInf, std::max(std::abs(a0), 1e-6)});
    params_.push_back({"B_gauss", guess.b_gauss, 0.0, kInf, std::max(guess.b_gauss, 1e-9)});
    law_ = hold_envelope ? DecayLaw::None : guess.envelope.law();
    if (law_ != DecayLaw::None) {
      const double tau = guess.envelope.tau_us();
      params_.push_back({"tau_us", tau, 1e-9, kInf, std::max(tau, 1e-6)});
    }
    switch (scheme) {
      case Scheme::Unpolarized:
        if (!std::holds_alternative<CoherenceMatrix>(guess.coherences)) {
          throw ValidationError("Unpolarized fit requires a coherence matrix in the guess");
        }
        break;
      case Scheme::TwoLevel: {
        const double p2 = diagonal(guess).at(2);
        if (!diagonal(guess).is_two_level()) {
          throw ValidationError("TwoLevel fit requires support on m = 2, 3");
        }
        params_.push_back({"p2", p2, 0.0, 1.0, 0.01});
        break;
      }
      case Scheme::SigmaPlus: {
        const auto& d = diagonal(guess);
        reference_m_ = DiagonalCoherences::kMaxM;
        while (reference_m_ > -DiagonalCoherences::kMaxM && d.at(reference_m_) == 0.0) {
          --reference_m_;
        }
        const double ref = d.at(reference_m_);
        for (int m = -DiagonalCoherences::kMaxM; m < reference_m_; ++m) {
          if (d.at(m) > 0.0) {
            support_.push_back(m);
            params_.push_back({"u_" + std::to_string(m), d.at(m) / ref, 0.0, kInf, 0.01});
          }
        }
        break;
      }
    }
  }

  std::vector<FreeParameter>& parameters() { return params_; }
  const std::vector<FreeParameter>& parameters() const { return params_; }

  Eigen::VectorXd initial() const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(params_.size()));
    for (std::size_t i = 0; i < params_.size(); ++i) x[static_cast<Eigen::Index>(i)] = params_[i].value;
    return x;
  }

  void clamp(Eigen::VectorXd& x) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& v = x[static_cast<Eigen::Index>(i)];
      v = std::clamp(v, params_[i].lower, params_[i].upper);
    }
  }

  ModelParams build(const Eigen::VectorXd& x) const {
    ModelParams p = template_;
    Eigen::Index i = 0;
    p.amplitude_scale = x[i++];
    p.b_gauss = x[i++];
    if (law_ != DecayLaw::None) p.envelope = DecayEnvelope::make(law_, x[i++]);
    switch (scheme_) {
      case Scheme::Unpolarized:
        break;
      case Scheme::TwoLevel:
        p.coherences = DiagonalCoherences::two_level(x[i++]);
        break;
      case Scheme::SigmaPlus: {
        DiagonalCoherences::Weights w{};
        w[DiagonalCoherences::index(reference_m_)] = 1.0;
        for (int m : support_) w[DiagonalCoherences::index(m)] = x[i++];
        p.coherences = DiagonalCoherences::normalized(w);
        break;
      }
    }
    return p;
  }

 private:
  static const DiagonalCoherences& diagonal(const ModelParams& p) {
    const auto* d = std::get_if<DiagonalCoherences>(&p.coherences);
    if (d == nullptr) throw ValidationError("diagonal scheme requires diagonal coherences");
    return *d;
  }

  Scheme scheme_;
  ModelParams template_;
  DecayLaw law_ = DecayLaw::None;
  int reference_m_ = DiagonalCoherences::kMaxM;
  std::vector<int> support_;
  std::vector<FreeParameter> params_;
};

struct Problem {
  std::vector<double> times;
  Eigen::VectorXd data;
  Eigen::VectorXd sigma;
  bool sigma_from_data = false;
};

Problem make_problem(const RetrievalCurve& curve, const FitOptions& options) {
  Problem pb;
  pb.times = curve.times();
  const auto n = static_cast<Eigen::Index>(curve.size());
  pb.data.resize(n);
  pb.sigma.resize(n);
  double max_a = 0.0;
  for (const auto& p : curve.points()) max_a = std::max(max_a, p.amplitude);
  const double floor = max_a > 0.0 ? options.fallback_floor_fraction * max_a : 1.0;
  pb.sigma_from_data = curve.has_sigma();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = curve.points()[static_cast<std::size_t>(i)];
    pb.data[i] = p.amplitude;
    pb.sigma[i] = p.sigma ? *p.sigma
                          : std::max(options.fallback_relative_sigma * p.amplitude, floor);
  }
  return pb;
}

class LeastSquares {
 public:
  LeastSquares(const Problem& problem, const ParameterMap& map)
      : problem_(problem), map_(map) {}

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    const auto model = retrieval_curve(problem_.times, map_.build(x));
    Eigen::VectorXd r(problem_.data.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      r[i] = (problem_.data[i] - model[static_cast<std::size_t>(i)]) / problem_.sigma[i];
    }
    return r;
  }

  // d(model / sigma) / dx by central differences, one-sided at a bound.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    const auto& params = map_.parameters();
    Eigen::MatrixXd jac(problem_.data.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const auto& fp = params[static_cast<std::size_t>(j)];
      const double h = kJacobianStep * std::max(std::abs(x[j]), fp.scale);
      Eigen::VectorXd up = x;
      Eigen::VectorXd down = x;
      up[j] = std::min(x[j] + h, fp.upper);
      down[j] = std::max(x[j] - h, fp.lower);
      const double width = up[j] - down[j];
      if (!(width > 0.0)) {
        jac.col(j).setZero();
        continue;
      }
      // residual = (data - model)/sigma, so d(model/sigma) = -(r_up - r_down)
      jac.col(j) = -(residuals(up) - residuals(down)) / width;
    }
    return jac;
  }

 private:
  const Problem& problem_;
  const ParameterMap& map_;
};

struct RunResult {
  Eigen::VectorXd x;
  double cost = kInf;
  bool converged = false;
  int iterations = 0;
};

RunResult levenberg_marquardt(const LeastSquares& ls, const ParameterMap& map,
                              Eigen::VectorXd x, const FitOptions& options) {
  map.clamp(x);
  Eigen::VectorXd r = ls.residuals(x);
  double cost = r.squaredNorm();
  const auto n = static_cast<double>(r.size());
  double lambda = 1e-3;
  RunResult out{x, cost, false, 0};
  if (!std::isfinite(cost)) return out;

  for (int it = 1; it <= options.max_iterations; ++it) {
    out.iterations = it;
    if (cost <= 1e-30 * n) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jac = ls.jacobian(x);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal();
    const double diag_floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    for (Eigen::Index j = 0; j < diag.size(); ++j) diag[j] = std::max(diag[j], diag_floor);

    bool accepted = false;
    double first_step = kInf;
    for (;;) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += lambda * diag;
      Eigen::VectorXd step = lhs.ldlt().solve(grad);
      Eigen::VectorXd x_new = x + step;
      map.clamp(x_new);
      const Eigen::VectorXd delta = x_new - x;
      double rel_step = 0.0;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double s = std::max(std::abs(x[j]), map.parameters()[static_cast<std::size_t>(j)].scale);
        rel_step = std::max(rel_step, std::abs(delta[j]) / s);
      }
      if (!std::isfinite(first_step)) first_step = rel_step;
      if (!delta.allFinite()) {
        lambda *= 4.0;
      } else {
        const Eigen::VectorXd r_new = ls.residuals(x_new);
        const double cost_new = r_new.squaredNorm();
        if (std::isfinite(cost_new) && cost_new < cost) {
          const double rel_cost = (cost - cost_new) / cost;
          x = x_new;
          r = r_new;
          cost = cost_new;
          lambda = std::max(lambda / 3.0, 1e-12);
          accepted = true;
          if (rel_step < options.tolerance && rel_cost < options.tolerance) {
            out.converged = true;
          }
          break;
        }
        lambda *= 4.0;
      }
      if (lambda > 1e16) break;
    }
    if (!accepted) {
      // No descent left at working precision: at a minimum if the least-damped
      // step was already negligible.
      out.converged = first_step < std::sqrt(options.tolerance);
      break;
    }
    if (out.converged) break;
  }
  out.x = x;
  out.cost = cost;
  return out;
}

void apply_bound_overrides(ParameterMap& map, const FitOptions& options) {
  for (const auto& [name, bounds] : options.bounds) {
    bool found = false;
    for (auto& fp : map.parameters()) {
      if (fp.name == name) {
        fp.lower = std::max(fp.lower, bounds.lower);
        fp.upper = std::min(fp.upper, bounds.upper);
        if (!(fp.lower <= fp.upper)) throw ValidationError("empty bounds for " + name);
        fp.value = std::clamp(fp.value, fp.lower, fp.upper);
        found = true;
      }
    }
    if (!found) throw ValidationError("unknown fit parameter '" + name + "'");
  }
}

std::vector<Eigen::VectorXd> starting_points(const ParameterMap& map, int starts) {
  std::vector<Eigen::VectorXd> out;
  const Eigen::VectorXd x0 = map.initial();
  out.push_back(x0);
  // Perturb amplitude, lifetime and mixing weights; the field is pinned by
  // the spectral guess far more tightly than any restart could improve.
  static constexpr double kTau[] = {2.0, 0.6};
  static constexpr double kAmp[] = {1.1, 0.9};
  static constexpr double kMix[] = {0.5, 1.5};
  for (int s = 1; s < starts; ++s) {
    Eigen::VectorXd x = x0;
    const int k = (s - 1) % 2;
    for (std::size_t i = 0; i < map.parameters().size(); ++i) {
      const auto& fp = map.parameters()[i];
      auto& v = x[static_cast<Eigen::Index>(i)];
      if (fp.name == "A0") v *= kAmp[k];
      if (fp.name == "tau_us") v *= kTau[k];
      if (fp.name == "p2" || fp.name.starts_with("u_")) {
        v = v > 0.0 ? v * kMix[k] : 0.02;
      }
    }
    map.clamp(x);
    out.push_back(x);
  }
  return out;
}

}  // namespace

std::optional<std::size_t> FitResult::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

double FitResult::estimate(std::string_view name) const {
  const auto i = index_of(name);
  if (!i) throw ValidationError("no fitted parameter named '" + std::string(name) + "'");
  return estimates[static_cast<Eigen::Index>(*i)];
}

double FitResult::sigma(std::string_view name) const {
  const auto i = index_of(name);
  if (!i) throw ValidationError("no fitted parameter named '" + std::string(name) + "'");
  const auto k = static_cast<Eigen::Index>(*i);
  return std::sqrt(std::max(0.0, covariance(k, k)));
}

FitResult fit_curve(const RetrievalCurve& curve, Scheme scheme,
                    const std::optional<ModelParams>& guess, const FitOptions& options) {
  const ModelParams start = guess ? *guess : initial_guess(curve, scheme);
  start.validate();
  double max_a = 0.0;
  for (const auto& p : curve.points()) max_a = std::max(max_a, p.amplitude);

  ParameterMap map(scheme, start, max_a > 0.0 ? max_a : 1.0, options.hold_envelope);
  apply_bound_overrides(map, options);
  const std::size_t n_free = map.parameters().size();
  if (curve.size() < n_free + 2) {
    throw DomainError("fit needs at least as many points as free parameters + 2");
  }

  const Problem problem = make_problem(curve, options);
  const LeastSquares ls(problem, map);

  RunResult best;
  for (const auto& x0 : starting_points(map, std::max(1, options.starts))) {
    RunResult run = levenberg_marquardt(ls, map, x0, options);
    if (run.cost < best.cost) best = std::move(run);
  }
  if (!std::isfinite(best.cost)) throw NumericalError("fit produced no finite residual");

  FitResult result;
  result.points = curve.size();
  result.residual_norm = best.cost;
  result.converged = best.converged;
  result.iterations = best.iterations;
  for (const auto& fp : map.parameters()) result.names.push_back(fp.name);

  // Covariance (J^T J)^-1, scaled by the reduced chi-square when the weights
  // were not supplied with the data. Columns are normalized first so the
  // degeneracy test sees correlations, not units.
  const Eigen::MatrixXd jac = ls.jacobian(best.x);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::VectorXd col_scale(jtj.rows());
  for (Eigen::Index i = 0; i < jtj.rows(); ++i) {
    const double d = jtj(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) result.covariance_degenerate = true;
    col_scale[i] = d > 0.0 && std::isfinite(d) ? 1.0 / std::sqrt(d) : 0.0;
  }
  const Eigen::MatrixXd scaled = col_scale.asDiagonal() * jtj * col_scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  const Eigen::VectorXd values = eig.eigenvalues();
  const double top = values.size() > 0 ? values.maxCoeff() : 0.0;
  Eigen::VectorXd inverse(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!(values[i] > 1e-12 * top) || !std::isfinite(values[i])) {
      result.covariance_degenerate = true;
      inverse[i] = 0.0;
    } else {
      inverse[i] = 1.0 / values[i];
    }
  }
  if (!(top > 0.0)) result.covariance_degenerate = true;
  result.covariance = col_scale.asDiagonal() *
                      (eig.eigenvectors() * inverse.asDiagonal() * eig.eigenvectors().transpose()) *
                      col_scale.asDiagonal();
  if (!problem.sigma_from_data) {
    const double dof = static_cast<double>(curve.size() - n_free);
    result.covariance *= best.cost / dof;
  }

  Eigen::VectorXd x = best.x;
  // p2 and 1 - p2 describe the same curve; report the minority root.
  if (const auto i = result.index_of("p2"); i && x[static_cast<Eigen::Index>(*i)] > 0.5) {
    const auto k = static_cast<Eigen::Index>(*i);
    x[k] = 1.0 - x[k];
    result.covariance.row(k) *= -1.0;
    result.covariance.col(k) *= -1.0;
  }
  result.estimates = x;
  result.params = map.build(x);
  return result;
}

// --- Stray field -------------------------------------------------------------

namespace {

// First Larmor phase at which the interference factor falls to one half.
double half_collapse_phase(const PhaseSpectrum& spectrum) {
  const double limit = 2.0 * std::numbers::pi;
  const double step = limit / 20000.0;
  double prev = 0.0;
  for (double phi = step; phi <= limit; phi += step) {
    if (interference_factor(spectrum, phi) <= 0.5 * interference_factor(spectrum, 0.0)) {
      double lo = prev;
      double hi = phi;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (interference_factor(spectrum, mid) <= 0.5 * interference_factor(spectrum, 0.0) ? hi
                                                                                          : lo) =
            mid;
      }
      return hi;
    }
    prev = phi;
  }
  return kInf;
}

[[noreturn]] void indistinguishable() {
  throw NumericalError("field indistinguishable from zero");
}

}  // namespace

StrayFieldEstimate estimate_stray_field(const RetrievalCurve& curve,
                                        const StrayFieldOptions& options) {
  options.constants.validate();
  if (curve.size() < 8) throw DomainError("stray-field estimate needs at least 8 points");
  const auto spectrum = PhaseSpectrum::of(options.coherences);
  const double phi_half = half_collapse_phase(spectrum);
  if (!std::isfinite(phi_half)) {
    throw ValidationError("coherence matrix never collapses; the field is unobservable");
  }

  // Width of the initial collapse: first time the (median-smoothed) signal
  // halves. The envelope shortens it, so this bounds the field from above.
  const auto t = curve.times();
  auto a = curve.amplitudes();
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    double w[3] = {curve.points()[i - 1].amplitude, curve.points()[i].amplitude,
                   curve.points()[i + 1].amplitude};
    std::sort(w, w + 3);
    a[i] = w[1];
  }
  const double a_start = *std::max_element(a.begin(), a.begin() + std::min<std::size_t>(3, a.size()));
  double t_half = kInf;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.5 * a_start) {
      t_half = t[i] - t.front();
      break;
    }
  }
  if (!std::isfinite(t_half) || !(t_half > 0.0)) indistinguishable();

  const double g = options.constants.g_factor_mhz_per_gauss;
  const double b_width = phi_half / (2.0 * std::numbers::pi * g * t_half);
  std::vector<double> field_starts = {b_width, 0.7 * b_width, 0.4 * b_width};
  try {
    const auto peak = dominant_peak(curve);
    if (peak.frequency_mhz * curve.span_us() >= 3.0) {
      field_starts.insert(field_starts.begin(), peak.frequency_mhz / g);
    }
  } catch (const std::exception&) {
    // no resolvable revivals; the collapse width alone seeds the fit
  }
  std::vector<DecayEnvelope> envelope_starts;
  if (options.known_envelope) {
    envelope_starts.push_back(*options.known_envelope);
  } else {
    for (double f : {1.2, 2.5, 10.0}) envelope_starts.push_back(DecayEnvelope::gaussian(f * t_half));
  }

  FitOptions fit_options;
  fit_options.starts = 1;
  fit_options.hold_envelope = options.known_envelope.has_value();
  std::optional<FitResult> best;
  for (double b0 : field_starts) {
    for (const auto& env : envelope_starts) {
      auto guess = ModelParams::unpolarized(options.coherences, b0, env, a_start);
      guess.constants = options.constants;
      FitResult fit = fit_curve(curve, Scheme::Unpolarized, guess, fit_options);
      if (!best || fit.residual_norm < best->residual_norm) best = std::move(fit);
    }
  }

  StrayFieldEstimate out;
  out.b_gauss = best->estimate("B_gauss");
  out.sigma_gauss = best->sigma("B_gauss");
  out.lower_gauss = out.b_gauss - out.sigma_gauss;
  out.upper_gauss = out.b_gauss + out.sigma_gauss;
  // No visible collapse: the fitted field either fails to resolve from zero or
  // predicts less than a 1% dip over the record.
  const double phase_at_end =
      2.0 * std::numbers::pi * larmor_frequency(out.b_gauss, options.constants) * curve.span_us();
  const double dip_at_end =
      1.0 - interference_factor(spectrum, phase_at_end) / interference_factor(spectrum, 0.0);
  if (best->covariance_degenerate || !(out.b_gauss > 2.0 * out.sigma_gauss) ||
      (phase_at_end < phi_half && dip_at_end < 0.01)) {
    indistinguishable();
  }
  out.fit = std::move(*best);
  return out;
}

}  // namespace qmem
