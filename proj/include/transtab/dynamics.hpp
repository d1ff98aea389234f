#ifndef TRANSTAB_DYNAMICS_HPP
#define TRANSTAB_DYNAMICS_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "transtab/errors.hpp"

namespace transtab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Autonomous C^1 vector field on R^n. Stateless evaluator, safe to share
/// between concurrent workers.
class VectorField {
 public:
  virtual ~VectorField() = default;

  virtual int dim() const = 0;
  virtual void eval(const Vec& x, Vec& fx) const = 0;

  virtual bool has_jacobian() const { return false; }
  virtual void jacobian(const Vec& x, Mat& jf) const {
    (void)x;
    (void)jf;
    throw JacobianUnavailable("vector field provides no analytic Jacobian");
  }

  Vec eval(const Vec& x) const {
    check_dim(x);
    Vec fx(dim());
    eval(x, fx);
    return fx;
  }
  Mat jacobian(const Vec& x) const {
    check_dim(x);
    Mat jf(dim(), dim());
    jacobian(x, jf);
    return jf;
  }

  void check_dim(const Vec& x) const {
    if (x.size() != dim())
      throw DimensionMismatch("state dim " + std::to_string(x.size()) +
                              " != field dim " + std::to_string(dim()));
  }
};

/// f -> -f. Backward-time flows are forward flows of the negated field.
class NegatedField final : public VectorField {
 public:
  explicit NegatedField(const VectorField& base) : base_(base) {}
  using VectorField::eval;
  using VectorField::jacobian;
  int dim() const override { return base_.dim(); }
  void eval(const Vec& x, Vec& fx) const override {
    base_.eval(x, fx);
    fx = -fx;
  }
  bool has_jacobian() const override { return base_.has_jacobian(); }
  void jacobian(const Vec& x, Mat& jf) const override {
    base_.jacobian(x, jf);
    jf = -jf;
  }

 private:
  const VectorField& base_;
};

enum class JacobianMode { variational, finite_difference };

struct IntegratorConfig {
  double h = 1e-3;  // fixed RK4 step [s]
  JacobianMode jacobian_mode = JacobianMode::variational;
  double fd_epsilon = 1e-5;

  void validate() const {
    if (!(h > 0)) throw ConfigError("integrator step h must be > 0");
    if (!(fd_epsilon > 0 && fd_epsilon <= 1e-2))
      throw ConfigError("fd_epsilon must be in (0, 1e-2]");
  }
};

/// Abort thresholds. States beyond kStateBound signal physical blow-up;
/// tangent entries get a much larger budget because Cauchy-Green
/// eigenvalues near a repelling manifold legitimately reach ~e^{70}.
inline constexpr double kStateBound = 1e12;
inline constexpr double kTangentBound = 1e150;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;  // same dim throughout
  double step = 0.0;        // nominal h (last gap may be shorter)

  std::size_t size() const { return times.size(); }
  const Vec& back() const { return states.back(); }
};

struct FlowSample {
  Vec x0;
  double t = 0.0;
  Vec phi;
  Mat grad_phi;
};

/// Classical fixed-step RK4 from 0 to t_end (signed). The last partial step
/// is shortened to land exactly on t_end.
Trajectory integrate(const VectorField& vf, const Vec& x0, double t_end,
                     const IntegratorConfig& cfg);

/// Flow map only, no sample storage.
Vec flow(const VectorField& vf, const Vec& x0, double t_end,
         const IntegratorConfig& cfg);

/// Flow map together with its gradient. Variational mode integrates the
/// augmented system Mdot = Jf(x(t)) M, M(0) = I; finite-difference mode
/// builds grad_phi column-wise from central differences of flow maps.
FlowSample flow_with_gradient(const VectorField& vf, const Vec& x0, double t,
                              const IntegratorConfig& cfg);

namespace detail {

/// Streaming variational integrator: advances (x, M) with fixed-step RK4 and
/// invokes `on_sample(t, x, M)` at t = 0, every k_sample-th step, and at
/// t_end. Used by the monitor's chained-gradient mode.
void integrate_variational(const VectorField& vf, const Vec& x0, double t_end,
                           const IntegratorConfig& cfg, int k_sample,
                           const std::function<void(double, const Vec&, const Mat&)>& on_sample);

}  // namespace detail

}  // namespace transtab

#endif
