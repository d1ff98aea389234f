#ifndef TRANSTAB_MODELS_HPP
#define TRANSTAB_MODELS_HPP

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "transtab/dynamics.hpp"

namespace transtab {

/// Linear benchmark: xdot = x, ydot = -y. The y-axis is the stable manifold
/// of the saddle at the origin and the analytic LCS.
class SaddleField final : public VectorField {
 public:
  using VectorField::eval;
  using VectorField::jacobian;
  int dim() const override { return 2; }
  void eval(const Vec& x, Vec& fx) const override {
    fx[0] = x[0];
    fx[1] = -x[1];
  }
  bool has_jacobian() const override { return true; }
  void jacobian(const Vec&, Mat& jf) const override {
    jf.setZero();
    jf(0, 0) = 1.0;
    jf(1, 1) = -1.0;
  }
};

/// xdot = A x. Used by tests for analytic flow maps.
class LinearField final : public VectorField {
 public:
  explicit LinearField(Mat a) : a_(std::move(a)) {}
  using VectorField::eval;
  using VectorField::jacobian;
  int dim() const override { return static_cast<int>(a_.rows()); }
  void eval(const Vec& x, Vec& fx) const override { fx.noalias() = a_ * x; }
  bool has_jacobian() const override { return true; }
  void jacobian(const Vec&, Mat& jf) const override { jf = a_; }

 private:
  Mat a_;
};

/// Classical N-machine swing with machine N+1 as the reference
/// (delta_{N+1} = 0, E_{N+1} = 1; it contributes coupling but no state).
/// State: (delta_1..delta_N, omega_1..omega_N).
struct SwingParams {
  int n_gen = 0;
  Vec P;  // mechanical power per modeled generator [p.u.]
  Vec D;  // damping [p.u.]
  Vec E;  // internal voltages, size n_gen + 1 (reference last) [p.u.]
  Mat Y;  // (n_gen+1) x (n_gen+1) symmetric susceptance magnitudes [p.u.]

  void validate() const;
};

class ClassicalSwingField final : public VectorField {
 public:
  explicit ClassicalSwingField(SwingParams p);
  using VectorField::eval;
  using VectorField::jacobian;
  int dim() const override { return 2 * p_.n_gen; }
  void eval(const Vec& x, Vec& fx) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(const Vec& x, Mat& jf) const override;
  const SwingParams& params() const { return p_; }

 private:
  SwingParams p_;
};

/// Reduced-network multi-machine swing:
///   delta_i' = omega_i
///   omega_i' = (pi f_s / H_i) [ -D_i omega_i + P_mi - G_ii E_i^2
///              - sum_{j != i} E_i E_j (G_ij cos d_ij + B_ij sin d_ij) ]
struct NetworkSwingParams {
  int n_gen = 0;
  Vec H;    // inertia constants [s]
  double f_s = 60.0;
  Vec D;
  Vec P_m;
  Vec E;
  Mat G;
  Mat B;

  void validate() const;
};

class NetworkSwingField final : public VectorField {
 public:
  explicit NetworkSwingField(NetworkSwingParams p);
  using VectorField::eval;
  using VectorField::jacobian;
  int dim() const override { return 2 * p_.n_gen; }
  void eval(const Vec& x, Vec& fx) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(const Vec& x, Mat& jf) const override;
  const NetworkSwingParams& params() const { return p_; }

 private:
  NetworkSwingParams p_;
};

/// Same dynamics expressed in angles relative to one reference generator.
/// State: (delta_i - delta_r for i != r, omega_1..omega_n), dim 2n - 1.
/// Removes the uniform-angle-shift neutral mode so that the flow around a
/// stable operating point is fully contracting; this is the monitoring
/// frame used by the bundled certificate scenarios.
class RelativeNetworkSwingField final : public VectorField {
 public:
  RelativeNetworkSwingField(NetworkSwingParams p, int reference_gen);
  using VectorField::eval;
  using VectorField::jacobian;
  int dim() const override { return 2 * p_.n_gen - 1; }
  void eval(const Vec& x, Vec& fx) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(const Vec& x, Mat& jf) const override;
  int reference_gen() const { return ref_; }
  const NetworkSwingParams& params() const { return p_; }

  /// Map a full state (2n) to the relative state (2n-1) and back
  /// (reference angle taken as 0 on reconstruction).
  Vec to_relative(const Vec& full) const;
  Vec to_full(const Vec& rel) const;

 private:
  void absolute_accel(const Vec& delta, const Vec& omega, Vec& acc) const;

  NetworkSwingParams p_;
  int ref_;
};

struct FaultScenario {
  std::shared_ptr<const VectorField> pre;     // f_I
  std::shared_ptr<const VectorField> during;  // f_F
  std::shared_ptr<const VectorField> post;    // f
  double t_F = 0.0;
  double t_P = 0.0;
  Vec x_I;  // pre-fault stable equilibrium

  void validate() const;
};

struct FaultResult {
  Trajectory trajectory;  // stitched over [t_F, t_end]
  Vec x_P;                // state at fault clearing
};

/// Evolves x_I under `during` on [t_F, t_P], then under `post` to t_end.
FaultResult fault_trajectory(const FaultScenario& sc, double t_end,
                             const IntegratorConfig& cfg);

enum class EquilibriumKind { stable, unstable, saddle };

struct EquilibriumInfo {
  Vec x_star;
  std::vector<std::complex<double>> eigenvalues;
  EquilibriumKind kind = EquilibriumKind::stable;
  int unstable_count = 0;  // eigenvalues with positive real part
  bool hyperbolic = true;

  std::string kind_string() const;
};

/// Damped Newton on f(x) = 0, converged at ||f|| <= 1e-10, then eigenvalue
/// classification of Jf(x*). Step halving (up to 30) when ||f|| does not
/// decrease. Throws NoConvergence after 200 iterations.
EquilibriumInfo find_equilibrium(const VectorField& vf, const Vec& x_guess);

/// Factory from a parsed model description (JSON text). Accepted ids:
/// "saddle", "rotation", "contraction", "classical_swing", "network_swing"
/// (optional "reference_gen" selects the relative frame).
std::shared_ptr<VectorField> make_field_from_json(const std::string& json_text);
std::shared_ptr<VectorField> load_field(const std::string& path);

}  // namespace transtab

#endif
