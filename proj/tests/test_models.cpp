#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "transtab/models.hpp"

using namespace transtab;

namespace {

SwingParams twogen_params(double damping = 1.0) {
  SwingParams p;
  p.n_gen = 1;
  p.P = Vec::Constant(1, 0.5);
  p.D = Vec::Constant(1, damping);
  p.E = Vec::Constant(2, 1.0);
  p.Y = Mat::Zero(2, 2);
  p.Y(0, 1) = p.Y(1, 0) = 1.0;
  return p;
}

NetworkSwingParams small_network(double damping = 0.5) {
  NetworkSwingParams p;
  p.n_gen = 3;
  p.H = Vec(3);
  p.H << 30.0, 25.0, 40.0;
  p.f_s = 60.0;
  p.D = Vec::Constant(3, damping);
  p.E = Vec(3);
  p.E << 1.03, 1.05, 1.01;
  p.G = Mat(3, 3);
  p.G << 0.08, 0.02, 0.01, 0.02, 0.06, 0.015, 0.01, 0.015, 0.07;
  p.B = Mat(3, 3);
  p.B << 0.0, 0.6, 0.4, 0.6, 0.0, 0.5, 0.4, 0.5, 0.0;
  // P_m balancing the flat-angle operating point so delta = 0 is exact.
  p.P_m = Vec(3);
  for (int i = 0; i < 3; ++i) {
    double s = p.G(i, i) * p.E[i] * p.E[i];
    for (int j = 0; j < 3; ++j)
      if (j != i) s += p.E[i] * p.E[j] * p.G(i, j);
    p.P_m[i] = s;
  }
  return p;
}

// Central-difference Jacobian of an arbitrary field.
Mat fd_jacobian(const VectorField& f, const Vec& x, double eps = 1e-6) {
  const int n = f.dim();
  Mat jf(n, n);
  Vec xp, xm;
  for (int i = 0; i < n; ++i) {
    xp = x;
    xp[i] += eps;
    xm = x;
    xm[i] -= eps;
    jf.col(i) = (f.eval(xp) - f.eval(xm)) / (2.0 * eps);
  }
  return jf;
}

}  // namespace

TEST_CASE("classical swing acceleration matches the hand-written formula") {
  ClassicalSwingField f(twogen_params(0.3));
  Vec x(2);
  x << 0.8, 0.25;
  const Vec fx = f.eval(x);
  CHECK(fx[0] == 0.25);
  CHECK(fx[1] == doctest::Approx(0.5 - 0.3 * 0.25 - std::sin(0.8)).epsilon(1e-14));
}

TEST_CASE("analytic Jacobians agree with central differences") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.5, 1.5);

  ClassicalSwingField cs(twogen_params(0.7));
  NetworkSwingField ns(small_network());
  RelativeNetworkSwingField rs(small_network(), 1);
  const VectorField* fields[] = {&cs, &ns, &rs};
  for (const VectorField* f : fields) {
    for (int rep = 0; rep < 10; ++rep) {
      Vec x(f->dim());
      for (int i = 0; i < f->dim(); ++i) x[i] = u(rng);
      const Mat ja = f->jacobian(x);
      const Mat jn = fd_jacobian(*f, x);
      CHECK((ja - jn).norm() / std::max(1.0, ja.norm()) < 1e-7);
    }
  }
}

TEST_CASE("swing dynamics are 2-pi periodic in every angle") {
  NetworkSwingField f(small_network());
  Vec x(6);
  x << 0.3, -0.2, 0.5, 0.1, -0.4, 0.2;
  Vec shifted = x;
  for (int i = 0; i < 3; ++i) shifted[i] += 2.0 * M_PI;
  CHECK((f.eval(x) - f.eval(shifted)).norm() < 1e-12);
}

TEST_CASE("uniform angle shifts are a neutral direction of the full network model") {
  NetworkSwingField f(small_network());
  Vec x(6);
  x << 0.3, -0.2, 0.5, 0.1, -0.4, 0.2;
  Vec shift = Vec::Zero(6);
  shift.head(3).setConstant(0.37);
  CHECK((f.eval(x) - f.eval(x + shift)).norm() < 1e-12);
  // The shift direction is carried unchanged by the flow gradient, so the
  // top Cauchy-Green eigenvalue of the full model can never fall below 1.
  const FlowSample fs = flow_with_gradient(f, x, 2.0, {});
  Vec v = Vec::Zero(6);
  v.head(3).setConstant(1.0);
  CHECK((fs.grad_phi * v - v).norm() < 1e-9);
}

TEST_CASE("relative-frame trajectories shadow the full model") {
  const NetworkSwingParams p = small_network();
  NetworkSwingField full(p);
  RelativeNetworkSwingField rel(p, 0);
  Vec x_full(6);
  x_full << 0.0, 0.3, -0.2, 0.05, -0.1, 0.08;
  IntegratorConfig cfg;
  cfg.h = 0.002;
  const Vec end_full = flow(full, x_full, 3.0, cfg);
  const Vec end_rel = flow(rel, rel.to_relative(x_full), 3.0, cfg);
  CHECK((end_rel - rel.to_relative(end_full)).norm() < 1e-9);
}

TEST_CASE("relative state mapping round-trips") {
  RelativeNetworkSwingField rel(small_network(), 2);
  Vec r(5);
  r << 0.1, -0.2, 0.3, 0.4, 0.5;
  CHECK((rel.to_relative(rel.to_full(r)) - r).norm() == 0.0);
  CHECK_THROWS_AS(rel.to_relative(r), DimensionMismatch);
  CHECK_THROWS_AS((void)RelativeNetworkSwingField(small_network(), 5), ConfigError);
}

TEST_CASE("single-machine equilibria have the closed form") {
  ClassicalSwingField f(twogen_params(1.0));
  Vec guess(2);
  guess << 0.4, 0.0;
  const EquilibriumInfo stable = find_equilibrium(f, guess);
  CHECK(stable.x_star[0] == doctest::Approx(std::asin(0.5)).epsilon(1e-9));
  CHECK(stable.x_star[1] == doctest::Approx(0.0));
  CHECK(stable.kind == EquilibriumKind::stable);
  CHECK(stable.hyperbolic);
  CHECK(stable.kind_string() == "stable");

  guess << 2.6, 0.0;
  const EquilibriumInfo saddle = find_equilibrium(f, guess);
  CHECK(saddle.x_star[0] == doctest::Approx(M_PI - std::asin(0.5)).epsilon(1e-9));
  CHECK(saddle.kind == EquilibriumKind::saddle);
  CHECK(saddle.unstable_count == 1);
  CHECK(saddle.kind_string() == "saddle(1)");
}

TEST_CASE("the full network equilibrium is flagged non-hyperbolic") {
  NetworkSwingField f(small_network());
  const EquilibriumInfo eq = find_equilibrium(f, Vec::Zero(6));
  CHECK((eq.x_star.tail(3)).norm() < 1e-9);
  CHECK_FALSE(eq.hyperbolic);  // the uniform-shift neutral mode
}

TEST_CASE("the relative-frame equilibrium is stable and hyperbolic") {
  RelativeNetworkSwingField f(small_network(), 0);
  const EquilibriumInfo eq = find_equilibrium(f, Vec::Zero(5));
  CHECK(eq.kind == EquilibriumKind::stable);
  CHECK(eq.hyperbolic);
}

TEST_CASE("Newton reports NoConvergence when no equilibrium exists") {
  class Drift final : public VectorField {
   public:
    int dim() const override { return 1; }
    void eval(const Vec& x, Vec& fx) const override { fx[0] = 1.0 + x[0] * x[0]; }
    bool has_jacobian() const override { return true; }
    void jacobian(const Vec& x, Mat& jf) const override { jf(0, 0) = 2.0 * x[0]; }
  };
  Drift f;
  CHECK_THROWS_AS(find_equilibrium(f, Vec::Zero(1)), NoConvergence);
}

TEST_CASE("fault trajectories stitch the two stages exactly") {
  auto pre = std::make_shared<ClassicalSwingField>(twogen_params(1.0));
  // Faulted network: coupling withdrawn.
  SwingParams faulted = twogen_params(1.0);
  faulted.Y(0, 1) = faulted.Y(1, 0) = 0.2;
  auto during = std::make_shared<ClassicalSwingField>(faulted);

  FaultScenario sc;
  sc.pre = pre;
  sc.during = during;
  sc.post = pre;
  sc.t_F = 0.0;
  sc.t_P = 0.4;
  sc.x_I = Vec(2);
  sc.x_I << std::asin(0.5), 0.0;

  IntegratorConfig cfg;
  const FaultResult r = fault_trajectory(sc, 1.0, cfg);
  const Vec x_P = flow(*during, sc.x_I, 0.4, cfg);
  CHECK((r.x_P - x_P).norm() == 0.0);
  CHECK((r.trajectory.back() - flow(*pre, x_P, 0.6, cfg)).norm() == 0.0);
  CHECK(r.trajectory.times.front() == 0.0);
  CHECK(r.trajectory.times.back() == doctest::Approx(1.0));

  // Zero-length fault window degenerates to post-fault integration.
  sc.t_P = 0.0;
  const FaultResult r0 = fault_trajectory(sc, 1.0, cfg);
  CHECK((r0.x_P - sc.x_I).norm() == 0.0);

  sc.t_P = -0.1;
  CHECK_THROWS_AS(fault_trajectory(sc, 1.0, cfg), ConfigError);
  sc.t_P = 0.4;
  sc.x_I << 1.0, 1.0;  // not an equilibrium
  CHECK_THROWS_AS(fault_trajectory(sc, 1.0, cfg), ConfigError);
}

TEST_CASE("parameter validation rejects malformed models") {
  SwingParams p = twogen_params();
  p.Y(0, 1) = 2.0;  // asymmetric
  CHECK_THROWS_AS((void)ClassicalSwingField(p), ConfigError);
  NetworkSwingParams np = small_network();
  np.H[1] = -1.0;
  CHECK_THROWS_AS((void)NetworkSwingField(np), ConfigError);
}

TEST_CASE("model factory parses ids and rejects junk") {
  CHECK(make_field_from_json(R"({"id":"saddle"})")->dim() == 2);
  CHECK(make_field_from_json(R"({"id":"rotation"})")->dim() == 2);
  CHECK(make_field_from_json(R"({"id":"contraction"})")->dim() == 2);
  const auto lin = make_field_from_json(
      R"({"id":"linear","params":{"A":[[0,1],[-1,0]]}})");
  Vec x(2);
  x << 1.0, 0.0;
  CHECK(lin->eval(x)[1] == -1.0);

  CHECK_THROWS_AS(make_field_from_json(R"({"id":"frobnicator"})"), ConfigError);
  CHECK_THROWS_AS(make_field_from_json(R"({"id":"classical_swing"})"), ConfigError);
  CHECK_THROWS_AS(make_field_from_json("{not json"), ParseError);
  CHECK_THROWS_AS(load_field("/nonexistent/model.json"), ConfigError);
}

TEST_CASE("bundled model files load with the expected dimensions") {
  CHECK(load_field(std::string(TRANSTAB_DATA_DIR) + "/models/saddle.json")->dim() == 2);
  CHECK(load_field(std::string(TRANSTAB_DATA_DIR) + "/models/twogen.json")->dim() == 2);
  const auto ne39 =
      load_field(std::string(TRANSTAB_DATA_DIR) + "/models/new_england_39.json");
  CHECK(ne39->dim() == 19);  // ten machines in the relative frame
}
