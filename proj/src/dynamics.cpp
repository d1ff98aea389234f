#include "transtab/dynamics.hpp"

#include <cmath>

namespace transtab {

namespace {

void check_finite(const Vec& x, double bound) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (!std::isfinite(v) || std::abs(v) > bound)
      throw NonFiniteState("coordinate " + std::to_string(i) +
                           " left the finite range (|x| > " +
                           std::to_string(bound) + ")");
  }
}

// One RK4 step of dt on x in place. k1..k4, xt are caller-owned scratch.
struct Rk4Workspace {
  Vec k1, k2, k3, k4, xt;
  explicit Rk4Workspace(int n) : k1(n), k2(n), k3(n), k4(n), xt(n) {}
};

void rk4_step(const VectorField& vf, Vec& x, double dt, Rk4Workspace& w) {
  vf.eval(x, w.k1);
  w.xt.noalias() = x + (0.5 * dt) * w.k1;
  vf.eval(w.xt, w.k2);
  w.xt.noalias() = x + (0.5 * dt) * w.k2;
  vf.eval(w.xt, w.k3);
  w.xt.noalias() = x + dt * w.k3;
  vf.eval(w.xt, w.k4);
  x.noalias() += (dt / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
}

// Splits |t_end| into n_full steps of h plus an optional remainder.
struct StepPlan {
  long n_full;
  double rem;
};

StepPlan plan_steps(double t_end, double h) {
  const double span = std::abs(t_end);
  long n = static_cast<long>(std::floor(span / h + 1e-12));
  double rem = span - static_cast<double>(n) * h;
  if (rem < 1e-12 * std::max(1.0, span)) rem = 0.0;
  return {n, rem};
}

}  // namespace

Trajectory integrate(const VectorField& vf, const Vec& x0, double t_end,
                     const IntegratorConfig& cfg) {
  cfg.validate();
  vf.check_dim(x0);
  check_finite(x0, kStateBound);

  Trajectory traj;
  traj.step = cfg.h;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  if (t_end == 0.0) return traj;

  const double dir = t_end > 0 ? 1.0 : -1.0;
  const StepPlan plan = plan_steps(t_end, cfg.h);
  Rk4Workspace w(static_cast<int>(x0.size()));
  Vec x = x0;
  double t = 0.0;
  for (long i = 0; i < plan.n_full; ++i) {
    rk4_step(vf, x, dir * cfg.h, w);
    t = dir * cfg.h * static_cast<double>(i + 1);
    check_finite(x, kStateBound);
    traj.times.push_back(t);
    traj.states.push_back(x);
  }
  if (plan.rem > 0.0) {
    rk4_step(vf, x, dir * plan.rem, w);
    check_finite(x, kStateBound);
    traj.times.push_back(t_end);
    traj.states.push_back(x);
  } else {
    traj.times.back() = t_end;  // kill accumulated roundoff in the last stamp
  }
  return traj;
}

Vec flow(const VectorField& vf, const Vec& x0, double t_end,
         const IntegratorConfig& cfg) {
  cfg.validate();
  vf.check_dim(x0);
  check_finite(x0, kStateBound);
  if (t_end == 0.0) return x0;

  const double dir = t_end > 0 ? 1.0 : -1.0;
  const StepPlan plan = plan_steps(t_end, cfg.h);
  Rk4Workspace w(static_cast<int>(x0.size()));
  Vec x = x0;
  for (long i = 0; i < plan.n_full; ++i) {
    rk4_step(vf, x, dir * cfg.h, w);
    check_finite(x, kStateBound);
  }
  if (plan.rem > 0.0) {
    rk4_step(vf, x, dir * plan.rem, w);
    check_finite(x, kStateBound);
  }
  return x;
}

namespace {

// Augmented evaluator for (x, M): xdot = f(x), Mdot = Jf(x) M.
class AugmentedField {
 public:
  AugmentedField(const VectorField& vf, int n)
      : vf_(vf),
        n_(n),
        fx_(n),
        jf_(n, n),
        k1x_(n),
        k2x_(n),
        k3x_(n),
        k4x_(n),
        xt_(n),
        k1m_(n, n),
        k2m_(n, n),
        k3m_(n, n),
        k4m_(n, n),
        mt_(n, n) {}

  void step(Vec& x, Mat& m, double dt) {
    // RK4 on the pair, keeping matrix shape throughout.
    eval(x, m, k1x_, k1m_);
    xt_ = x + (0.5 * dt) * k1x_;
    mt_ = m + (0.5 * dt) * k1m_;
    eval(xt_, mt_, k2x_, k2m_);
    xt_ = x + (0.5 * dt) * k2x_;
    mt_ = m + (0.5 * dt) * k2m_;
    eval(xt_, mt_, k3x_, k3m_);
    xt_ = x + dt * k3x_;
    mt_ = m + dt * k3m_;
    eval(xt_, mt_, k4x_, k4m_);
    x.noalias() += (dt / 6.0) * (k1x_ + 2.0 * k2x_ + 2.0 * k3x_ + k4x_);
    m.noalias() += (dt / 6.0) * (k1m_ + 2.0 * k2m_ + 2.0 * k3m_ + k4m_);
  }

  void check(const Vec& x, const Mat& m) const {
    check_finite(x, kStateBound);
    const double mmax = m.cwiseAbs().maxCoeff();
    if (!std::isfinite(mmax) || mmax > kTangentBound)
      throw NonFiniteState("tangent matrix left the finite range");
  }

 private:
  void eval(const Vec& x, const Mat& m, Vec& dx, Mat& dm) {
    vf_.eval(x, dx);
    vf_.jacobian(x, jf_);
    dm.noalias() = jf_ * m;
  }

  const VectorField& vf_;
  int n_;
  Vec fx_;
  Mat jf_;
  Vec k1x_, k2x_, k3x_, k4x_, xt_;
  Mat k1m_, k2m_, k3m_, k4m_, mt_;
};

}  // namespace

namespace detail {

void integrate_variational(
    const VectorField& vf, const Vec& x0, double t_end,
    const IntegratorConfig& cfg, int k_sample,
    const std::function<void(double, const Vec&, const Mat&)>& on_sample) {
  cfg.validate();
  vf.check_dim(x0);
  if (!vf.has_jacobian())
    throw JacobianUnavailable(
        "variational integration requires an analytic Jacobian");
  check_finite(x0, kStateBound);
  const int n = static_cast<int>(x0.size());

  Vec x = x0;
  Mat m = Mat::Identity(n, n);
  on_sample(0.0, x, m);
  if (t_end == 0.0) return;

  const double dir = t_end > 0 ? 1.0 : -1.0;
  const StepPlan plan = plan_steps(t_end, cfg.h);
  AugmentedField aug(vf, n);
  for (long i = 0; i < plan.n_full; ++i) {
    aug.step(x, m, dir * cfg.h);
    aug.check(x, m);
    if (k_sample > 0 && (i + 1) % k_sample == 0 &&
        !(plan.rem == 0.0 && i + 1 == plan.n_full))
      on_sample(dir * cfg.h * static_cast<double>(i + 1), x, m);
  }
  if (plan.rem > 0.0) {
    aug.step(x, m, dir * plan.rem);
    aug.check(x, m);
  }
  on_sample(t_end, x, m);
}

}  // namespace detail

FlowSample flow_with_gradient(const VectorField& vf, const Vec& x0, double t,
                              const IntegratorConfig& cfg) {
  cfg.validate();
  vf.check_dim(x0);
  const int n = static_cast<int>(x0.size());

  FlowSample out;
  out.x0 = x0;
  out.t = t;
  if (t == 0.0) {
    out.phi = x0;
    out.grad_phi = Mat::Identity(n, n);
    return out;
  }

  if (cfg.jacobian_mode == JacobianMode::variational) {
    detail::integrate_variational(
        vf, x0, t, cfg, 0, [&](double, const Vec& x, const Mat& m) {
          out.phi = x;       // last callback lands on t_end
          out.grad_phi = m;
        });
    return out;
  }

  // Central differences of flow maps, one column per coordinate.
  out.phi = flow(vf, x0, t, cfg);
  out.grad_phi.resize(n, n);
  Vec xp(n), xm(n);
  for (int i = 0; i < n; ++i) {
    const double eps = cfg.fd_epsilon * std::max(1.0, std::abs(x0[i]));
    xp = x0;
    xp[i] += eps;
    xm = x0;
    xm[i] -= eps;
    out.grad_phi.col(i) = (flow(vf, xp, t, cfg) - flow(vf, xm, t, cfg)) / (2.0 * eps);
  }
  return out;
}

}  // namespace transtab
