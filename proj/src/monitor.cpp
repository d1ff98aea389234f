#include "transtab/monitor.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace transtab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void finish_certificate(CertificateSeries& s, const VerdictThresholds& th) {
  // gamma by trapezoidal quadrature of rho, margin, per-sample verdict.
  const std::size_t n = s.times.size();
  s.gamma.assign(n, 0.0);
  s.margin.assign(n, kInf);
  s.verdict.assign(n, Verdict::undecided);
  int hot = 0;  // consecutive samples above the instability band
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0)
      s.gamma[k] = s.gamma[k - 1] +
                   0.5 * (s.rho[k] + s.rho[k - 1]) * (s.times[k] - s.times[k - 1]);
    if (s.gamma[k] > 0) s.margin[k] = 1.0 / s.gamma[k];
    if (s.rho[k] > 1.0 + th.eps_v)
      ++hot;
    else
      hot = 0;
    if (hot >= th.n_hold)
      s.verdict[k] = Verdict::unstable;
    else if (s.rho[k] < 1.0 - th.eps_v)
      s.verdict[k] = Verdict::stable;
  }
  if (s.truncated && n > 0) s.verdict[n - 1] = Verdict::unstable;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::stable:
      return "stable";
    case Verdict::unstable:
      return "unstable";
    case Verdict::undecided:
      return "undecided";
  }
  return "?";
}

CertificateSeries certificate_rho(const VectorField& vf, const Vec& x_P,
                                  double horizon, double sample_every,
                                  const IntegratorConfig& cfg,
                                  const VerdictThresholds& th,
                                  GradientMode mode) {
  cfg.validate();
  vf.check_dim(x_P);
  if (!(horizon > 0)) throw ConfigError("certificate_rho: horizon must be > 0");
  if (!(sample_every > 0) || sample_every > horizon)
    throw ConfigError("certificate_rho: bad sample spacing");

  CertificateSeries s;

  if (mode == GradientMode::chained) {
    const double ratio = sample_every / cfg.h;
    const int k_sample = static_cast<int>(std::llround(ratio));
    if (k_sample < 1 || std::abs(ratio - k_sample) > 1e-9)
      throw ConfigError("chained mode needs sample_every to be a multiple of h");
    try {
      detail::integrate_variational(
          vf, x_P, horizon, cfg, k_sample,
          [&](double t, const Vec&, const Mat& m) {
            if (t == 0.0) {
              s.times.push_back(0.0);
              s.rho.push_back(1.0);
              return;
            }
            Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
            s.times.push_back(t);
            s.rho.push_back(std::sqrt(es.eigenvalues().maxCoeff()));
          });
    } catch (const NonFiniteState&) {
      s.truncated = true;
    }
  } else {
    const long n_samples = static_cast<long>(std::floor(horizon / sample_every + 1e-9));
    std::vector<double> ts{0.0};
    for (long k = 1; k <= n_samples; ++k) ts.push_back(sample_every * k);
    if (ts.back() < horizon - 1e-9 * horizon) ts.push_back(horizon);
    for (double t : ts) {
      if (t == 0.0) {
        s.times.push_back(0.0);
        s.rho.push_back(1.0);
        continue;
      }
      try {
        const CauchyGreenTensor cg = cauchy_green(vf, x_P, t, cfg);
        s.times.push_back(t);
        s.rho.push_back(std::sqrt(cg.lambda_max()));
      } catch (const NonFiniteState&) {
        s.truncated = true;
        break;
      }
    }
  }

  if (s.times.empty()) throw NonFiniteState("state blew up at the first certificate sample");
  finish_certificate(s, th);
  return s;
}

VRhoResult v_rho(const VectorField& vf, const Vec& x0, double T_max,
                 const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(T_max > 0) || !std::isfinite(T_max))
    throw ConfigError("v_rho: T_max must be positive and finite");

  double gamma = 0.0;
  double gamma_tail_start = -1.0;
  double prev_t = 0.0, prev_rho = 1.0;
  const double tail_t = 0.9 * T_max;

  detail::integrate_variational(
      vf, x0, T_max, cfg, 1, [&](double t, const Vec&, const Mat& m) {
        double rho = 1.0;
        if (t > 0.0) {
          Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
          rho = std::sqrt(es.eigenvalues().maxCoeff());
          gamma += 0.5 * (rho + prev_rho) * (t - prev_t);
        }
        if (gamma_tail_start < 0 && t >= tail_t) gamma_tail_start = gamma;
        prev_t = t;
        prev_rho = rho;
      });

  VRhoResult out;
  out.value = gamma;
  if (gamma_tail_start >= 0)
    out.converged = (gamma - gamma_tail_start) < 1e-6 * gamma;
  return out;
}

void TimeSeriesWindow::validate() const {
  if (!(h_s > 0)) throw ConfigError("TimeSeriesWindow: h_s must be > 0");
  if (delta_t < h_s) throw ConfigError("TimeSeriesWindow: delta_t must be >= h_s");
  const double ratio = delta_t / h_s;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9)
    throw ConfigError("TimeSeriesWindow: delta_t must be an integer multiple of h_s");
  if (size() < static_cast<std::size_t>(delay_steps()) + 2)
    throw ConfigError("TimeSeriesWindow: need at least delta_t/h_s + 2 samples");
}

int TimeSeriesWindow::delay_steps() const {
  return static_cast<int>(std::llround(delta_t / h_s));
}

TimeSeriesWindow window_from_trajectory(const Trajectory& traj, int stride,
                                        double delta_t) {
  if (stride < 1) throw ConfigError("window_from_trajectory: stride must be >= 1");
  TimeSeriesWindow w;
  w.h_s = traj.step * stride;
  w.delta_t = delta_t;
  for (std::size_t k = 0; k < traj.size(); k += stride) {
    // A shortened final step would break uniformity; drop it.
    if (k > 0 && std::abs(traj.times[k] - traj.times[k - stride] - w.h_s) >
                     1e-9 * std::max(1.0, std::abs(traj.times[k])))
      break;
    w.times.push_back(traj.times[k]);
    w.states.push_back(traj.states[k]);
  }
  w.validate();
  return w;
}

double model_free_le(const TimeSeriesWindow& w, double t) {
  w.validate();
  const long k = std::llround(t / w.h_s);
  if (std::abs(t - k * w.h_s) > 1e-9 * std::max(1.0, std::abs(t)))
    throw OutOfRange("t does not land on a sample time (no interpolation)");
  const int d = w.delay_steps();
  if (!(t > w.delta_t)) throw OutOfRange("t must exceed delta_t");
  if (k + d >= static_cast<long>(w.size()))
    throw OutOfRange("t + delta_t exceeds the window");

  const double denom = (w.states[d] - w.states[0]).norm();
  if (denom <= 1e-12)
    throw DegenerateBaseline("||x(delta_t) - x(0)|| vanished; series starts at an equilibrium");
  const double numer = (w.states[k + d] - w.states[k]).norm();
  return std::log(numer / denom) / t;
}

LeVerdict le_verdict(const std::vector<double>& times,
                     const std::vector<double>& lambdas, int n_hold,
                     double floor_eps) {
  if (times.size() != lambdas.size())
    throw DimensionMismatch("le_verdict: times/lambdas length mismatch");
  if (static_cast<int>(lambdas.size()) < n_hold)
    throw ConfigError("le_verdict: need at least n_hold samples");

  LeVerdict out;
  bool all_neg = true, all_pos = true;
  for (std::size_t k = lambdas.size() - n_hold; k < lambdas.size(); ++k) {
    if (!(lambdas[k] < 0)) all_neg = false;
    if (!(lambdas[k] > 0)) all_pos = false;
  }
  if (all_neg)
    out.verdict = Verdict::stable;
  else if (all_pos)
    out.verdict = Verdict::unstable;

  double theta = 0.0;
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    const double a = std::max(lambdas[k - 1], 0.0);
    const double b = std::max(lambdas[k], 0.0);
    theta += 0.5 * (a + b) * (times[k] - times[k - 1]);
  }
  out.theta = theta + floor_eps;
  out.margin_theta = 1.0 / out.theta;
  return out;
}

TimeSeriesWindow ingest_series(const std::string& path, double delta_t) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open time-series file: " + path);

  TimeSeriesWindow w;
  w.delta_t = delta_t;
  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  ++lineno;
  if (line.empty() || line[0] != 't')
    throw ParseError(path + ":1: expected header starting with 't'");

  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (row.size() < 2)
      throw ParseError(path + ":" + std::to_string(lineno) + ": need time plus a state");
    if (dim < 0) dim = static_cast<int>(row.size()) - 1;
    if (static_cast<int>(row.size()) - 1 != dim)
      throw ParseError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    for (double v : row)
      if (!std::isfinite(v))
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite value");
    w.times.push_back(row[0]);
    w.states.push_back(Eigen::Map<const Vec>(row.data() + 1, dim));
  }
  if (w.times.size() < 2) throw ParseError(path + ": fewer than two samples");

  w.h_s = w.times[1] - w.times[0];
  if (!(w.h_s > 0)) throw NonUniformSampling(path + ": times not increasing");
  for (std::size_t k = 1; k < w.times.size(); ++k) {
    const double gap = w.times[k] - w.times[k - 1];
    if (std::abs(gap - w.h_s) > 1e-9 * std::max(1.0, std::abs(w.times[k])))
      throw NonUniformSampling(path + ": non-uniform sampling near row " + std::to_string(k + 1));
  }
  w.validate();
  return w;
}

void write_series_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  const int n = traj.size() ? static_cast<int>(traj.states[0].size()) : 0;
  out << 't';
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << fmt_double(traj.times[k]);
    for (int i = 0; i < n; ++i) out << ',' << fmt_double(traj.states[k][i]);
    out << '\n';
  }
}

void write_certificate_csv(const CertificateSeries& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << "t,rho,lambda,gamma,margin_gamma,theta,margin_theta,verdict\n";
  const auto get = [](const std::vector<double>& v, std::size_t k) {
    return k < v.size() ? v[k] : kNaN;
  };
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    out << fmt_double(s.times[k]) << ',' << fmt_double(get(s.rho, k)) << ','
        << fmt_double(get(s.le, k)) << ',' << fmt_double(get(s.gamma, k)) << ','
        << fmt_double(get(s.margin, k)) << ',' << fmt_double(get(s.theta, k)) << ','
        << fmt_double(get(s.margin_theta, k)) << ','
        << (k < s.verdict.size() ? to_string(s.verdict[k]) : "undecided") << '\n';
  }
}

}  // namespace transtab
