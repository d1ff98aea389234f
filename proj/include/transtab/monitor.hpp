#ifndef TRANSTAB_MONITOR_HPP
#define TRANSTAB_MONITOR_HPP

#include <string>
#include <vector>

#include "transtab/hyperbolic.hpp"

namespace transtab {

enum class Verdict { stable, unstable, undecided };

std::string to_string(Verdict v);

struct VerdictThresholds {
  double eps_v = 0.05;  // hysteresis band around rho = 1
  int n_hold = 5;       // consecutive samples required to latch unstable
};

struct CertificateSeries {
  std::vector<double> times;
  std::vector<double> rho;     // model-based, empty when not computed
  std::vector<double> le;      // model-free lambda, NaN before t > delta_t
  std::vector<double> gamma;   // trapezoidal accumulation of rho
  std::vector<double> margin;  // 1/gamma (inf while gamma == 0)
  std::vector<double> theta;   // integral of max(le, 0) + floor
  std::vector<double> margin_theta;
  std::vector<Verdict> verdict;
  bool truncated = false;  // blow-up cut the horizon short
};

enum class GradientMode {
  reintegrate,  // fresh variational integration per window end
  chained       // one pass, gradients recorded at sample boundaries
};

/// Model-based certificate from x_P: at each sample time t the max-stretch
/// rho over [0, t], gamma by trapezoidal quadrature, margin = 1/gamma and a
/// per-sample verdict. Blow-up truncates the series and latches unstable.
CertificateSeries certificate_rho(const VectorField& vf, const Vec& x_P,
                                  double horizon, double sample_every,
                                  const IntegratorConfig& cfg,
                                  const VerdictThresholds& th = {},
                                  GradientMode mode = GradientMode::reintegrate);

struct VRhoResult {
  double value = 0.0;
  bool converged = false;
};

/// gamma(x0, T_max) accumulated per integration step; converged when the
/// tail increment over the last 10% of the window is below 1e-6 * value.
/// Reported as the truncation, never as a claimed limit.
VRhoResult v_rho(const VectorField& vf, const Vec& x0, double T_max,
                 const IntegratorConfig& cfg);

struct TimeSeriesWindow {
  std::vector<double> times;  // uniform, period h_s
  std::vector<Vec> states;
  double h_s = 0.0;
  double delta_t = 0.0;  // integer multiple of h_s

  void validate() const;
  int delay_steps() const;
  std::size_t size() const { return times.size(); }
};

/// Builds a window from an in-memory trajectory (downsampled every
/// `stride` samples).
TimeSeriesWindow window_from_trajectory(const Trajectory& traj, int stride,
                                        double delta_t);

/// lambda(t) = (1/t) log( ||x(t+dt) - x(t)|| / ||x(dt) - x(0)|| ).
/// t must land on a sample time; no interpolation is performed.
double model_free_le(const TimeSeriesWindow& w, double t);

struct LeVerdict {
  Verdict verdict = Verdict::undecided;
  double theta = 0.0;
  double margin_theta = 0.0;
};

/// Stable (unstable) when the last n_hold lambda samples are all negative
/// (positive). theta integrates the positive part of lambda plus a small
/// floor so the margin stays finite for never-unstable runs.
LeVerdict le_verdict(const std::vector<double>& times,
                     const std::vector<double>& lambdas, int n_hold = 5,
                     double floor_eps = 1e-6);

/// CSV with header `t, x1..xn`; validates uniform sampling (1e-9 relative
/// jitter) and finiteness.
TimeSeriesWindow ingest_series(const std::string& path, double delta_t);

void write_series_csv(const Trajectory& traj, const std::string& path);

/// Certificate CSV: t, rho, lambda, gamma, margin_gamma, theta,
/// margin_theta, verdict.
void write_certificate_csv(const CertificateSeries& s, const std::string& path);

}  // namespace transtab

#endif
