#include "transtab/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace transtab {

using nlohmann::json;

void SwingParams::validate() const {
  if (n_gen <= 0) throw ConfigError("SwingParams: n_gen must be positive");
  if (P.size() != n_gen || D.size() != n_gen)
    throw ConfigError("SwingParams: P and D must have n_gen entries");
  if (E.size() != n_gen + 1)
    throw ConfigError("SwingParams: E must have n_gen+1 entries (reference last)");
  if (Y.rows() != n_gen + 1 || Y.cols() != n_gen + 1)
    throw ConfigError("SwingParams: Y must be (n_gen+1) x (n_gen+1)");
  if (!Y.isApprox(Y.transpose(), 1e-12))
    throw ConfigError("SwingParams: Y must be symmetric");
  if ((D.array() < 0).any()) throw ConfigError("SwingParams: D must be >= 0");
  if ((E.array() <= 0).any()) throw ConfigError("SwingParams: E must be > 0");
}

ClassicalSwingField::ClassicalSwingField(SwingParams p) : p_(std::move(p)) {
  p_.validate();
}

void ClassicalSwingField::eval(const Vec& x, Vec& fx) const {
  const int n = p_.n_gen;
  for (int i = 0; i < n; ++i) fx[i] = x[n + i];
  for (int i = 0; i < n; ++i) {
    const double di = x[i];
    double coupling = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      coupling += p_.E[i] * p_.E[j] * p_.Y(i, j) * std::sin(di - x[j]);
    }
    coupling += p_.E[i] * p_.E[n] * p_.Y(i, n) * std::sin(di);  // reference
    fx[n + i] = p_.P[i] - p_.D[i] * x[n + i] - coupling;
  }
}

void ClassicalSwingField::jacobian(const Vec& x, Mat& jf) const {
  const int n = p_.n_gen;
  jf.setZero();
  for (int i = 0; i < n; ++i) jf(i, n + i) = 1.0;
  for (int i = 0; i < n; ++i) {
    const double di = x[i];
    double diag = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = p_.E[i] * p_.E[j] * p_.Y(i, j) * std::cos(di - x[j]);
      jf(n + i, j) = c;
      diag -= c;
    }
    diag -= p_.E[i] * p_.E[n] * p_.Y(i, n) * std::cos(di);
    jf(n + i, i) = diag;
    jf(n + i, n + i) = -p_.D[i];
  }
}

void NetworkSwingParams::validate() const {
  if (n_gen <= 0) throw ConfigError("NetworkSwingParams: n_gen must be positive");
  if (H.size() != n_gen || D.size() != n_gen || P_m.size() != n_gen ||
      E.size() != n_gen)
    throw ConfigError("NetworkSwingParams: H, D, P_m, E must have n_gen entries");
  if (G.rows() != n_gen || G.cols() != n_gen || B.rows() != n_gen ||
      B.cols() != n_gen)
    throw ConfigError("NetworkSwingParams: G and B must be n_gen x n_gen");
  if ((H.array() <= 0).any()) throw ConfigError("NetworkSwingParams: H must be > 0");
  if (!(f_s > 0)) throw ConfigError("NetworkSwingParams: f_s must be > 0");
}

NetworkSwingField::NetworkSwingField(NetworkSwingParams p) : p_(std::move(p)) {
  p_.validate();
}

namespace {

// omega_i' for the network model given absolute angles.
void network_accel(const NetworkSwingParams& p, const double* delta,
                   const double* omega, double* acc) {
  const int n = p.n_gen;
  const double pfs = M_PI * p.f_s;
  for (int i = 0; i < n; ++i) {
    double s = -p.D[i] * omega[i] + p.P_m[i] - p.G(i, i) * p.E[i] * p.E[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = delta[i] - delta[j];
      s -= p.E[i] * p.E[j] * (p.G(i, j) * std::cos(d) + p.B(i, j) * std::sin(d));
    }
    acc[i] = (pfs / p.H[i]) * s;
  }
}

// d(acc_i)/d(delta_j) into a dense n x n block.
void network_accel_jac(const NetworkSwingParams& p, const double* delta,
                       Mat& ddelta) {
  const int n = p.n_gen;
  const double pfs = M_PI * p.f_s;
  ddelta.setZero(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = delta[i] - delta[j];
      const double g = p.E[i] * p.E[j] *
                       (p.G(i, j) * std::sin(d) - p.B(i, j) * std::cos(d));
      // -E_i E_j (G cos + B sin) differentiated in d gives +G sin - B cos.
      ddelta(i, j) = -(pfs / p.H[i]) * g;
      diag += g;
    }
    ddelta(i, i) = (pfs / p.H[i]) * diag;
  }
}

}  // namespace

void NetworkSwingField::eval(const Vec& x, Vec& fx) const {
  const int n = p_.n_gen;
  for (int i = 0; i < n; ++i) fx[i] = x[n + i];
  network_accel(p_, x.data(), x.data() + n, fx.data() + n);
}

void NetworkSwingField::jacobian(const Vec& x, Mat& jf) const {
  const int n = p_.n_gen;
  jf.setZero();
  for (int i = 0; i < n; ++i) jf(i, n + i) = 1.0;
  Mat dd;
  network_accel_jac(p_, x.data(), dd);
  jf.block(n, 0, n, n) = dd;
  const double pfs = M_PI * p_.f_s;
  for (int i = 0; i < n; ++i) jf(n + i, n + i) = -(pfs / p_.H[i]) * p_.D[i];
}

RelativeNetworkSwingField::RelativeNetworkSwingField(NetworkSwingParams p,
                                                     int reference_gen)
    : p_(std::move(p)), ref_(reference_gen) {
  p_.validate();
  if (ref_ < 0 || ref_ >= p_.n_gen)
    throw ConfigError("reference_gen out of range");
}

void RelativeNetworkSwingField::absolute_accel(const Vec& delta,
                                               const Vec& omega,
                                               Vec& acc) const {
  network_accel(p_, delta.data(), omega.data(), acc.data());
}

Vec RelativeNetworkSwingField::to_relative(const Vec& full) const {
  const int n = p_.n_gen;
  if (full.size() != 2 * n) throw DimensionMismatch("expected full state of dim 2n");
  Vec rel(2 * n - 1);
  int k = 0;
  for (int i = 0; i < n; ++i)
    if (i != ref_) rel[k++] = full[i] - full[ref_];
  rel.segment(n - 1, n) = full.segment(n, n);
  return rel;
}

Vec RelativeNetworkSwingField::to_full(const Vec& rel) const {
  const int n = p_.n_gen;
  if (rel.size() != 2 * n - 1) throw DimensionMismatch("expected relative state of dim 2n-1");
  Vec full(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) full[i] = (i == ref_) ? 0.0 : rel[k++];
  full.segment(n, n) = rel.segment(n - 1, n);
  return full;
}

void RelativeNetworkSwingField::eval(const Vec& x, Vec& fx) const {
  const int n = p_.n_gen;
  Vec delta(n), acc(n);
  int k = 0;
  for (int i = 0; i < n; ++i) delta[i] = (i == ref_) ? 0.0 : x[k++];
  const auto omega = x.segment(n - 1, n);
  network_accel(p_, delta.data(), omega.data(), acc.data());
  k = 0;
  for (int i = 0; i < n; ++i)
    if (i != ref_) fx[k++] = omega[i] - omega[ref_];
  fx.segment(n - 1, n) = acc;
}

void RelativeNetworkSwingField::jacobian(const Vec& x, Mat& jf) const {
  const int n = p_.n_gen;
  Vec delta(n);
  int k = 0;
  for (int i = 0; i < n; ++i) delta[i] = (i == ref_) ? 0.0 : x[k++];
  jf.setZero();
  // d(relative angles)/d(omega): e_i - e_ref.
  k = 0;
  for (int i = 0; i < n; ++i) {
    if (i == ref_) continue;
    jf(k, n - 1 + i) = 1.0;
    jf(k, n - 1 + ref_) = -1.0;
    ++k;
  }
  Mat dd;
  network_accel_jac(p_, delta.data(), dd);
  // Columns of dd for non-reference generators map onto relative-angle
  // coordinates directly (delta_ref held at 0).
  k = 0;
  for (int j = 0; j < n; ++j) {
    if (j == ref_) continue;
    jf.block(n - 1, k, n, 1) = dd.col(j);
    ++k;
  }
  const double pfs = M_PI * p_.f_s;
  for (int i = 0; i < n; ++i)
    jf(n - 1 + i, n - 1 + i) = -(pfs / p_.H[i]) * p_.D[i];
}

void FaultScenario::validate() const {
  if (!pre || !during || !post) throw ConfigError("FaultScenario: all three stages required");
  // t_F == t_P is a zero-length fault window and degenerates to plain
  // post-fault integration.
  if (!(t_F <= t_P)) throw ConfigError("FaultScenario: t_F must be <= t_P");
  Vec f = pre->eval(x_I);
  if (f.norm() > 1e-8)
    throw ConfigError("FaultScenario: x_I is not an equilibrium of the pre-fault field");
}

FaultResult fault_trajectory(const FaultScenario& sc, double t_end,
                             const IntegratorConfig& cfg) {
  sc.validate();
  if (t_end < sc.t_P) throw ConfigError("fault_trajectory: t_end must be >= t_P");

  FaultResult out;
  Trajectory on = integrate(*sc.during, sc.x_I, sc.t_P - sc.t_F, cfg);
  out.x_P = on.back();
  Trajectory after = integrate(*sc.post, out.x_P, t_end - sc.t_P, cfg);

  out.trajectory.step = cfg.h;
  for (std::size_t i = 0; i < on.size(); ++i) {
    out.trajectory.times.push_back(sc.t_F + on.times[i]);
    out.trajectory.states.push_back(on.states[i]);
  }
  for (std::size_t i = 1; i < after.size(); ++i) {
    out.trajectory.times.push_back(sc.t_P + after.times[i]);
    out.trajectory.states.push_back(after.states[i]);
  }
  return out;
}

std::string EquilibriumInfo::kind_string() const {
  switch (kind) {
    case EquilibriumKind::stable:
      return "stable";
    case EquilibriumKind::unstable:
      return "unstable";
    case EquilibriumKind::saddle:
      return "saddle(" + std::to_string(unstable_count) + ")";
  }
  return "?";
}

EquilibriumInfo find_equilibrium(const VectorField& vf, const Vec& x_guess) {
  vf.check_dim(x_guess);
  const int n = vf.dim();
  Vec x = x_guess;
  Vec fx(n), x_try(n), f_try(n);
  Mat jf(n, n);
  vf.eval(x, fx);
  double fnorm = fx.norm();

  const double tol = 1e-10;
  const int max_iter = 200;
  int iter = 0;
  while (fnorm > tol) {
    if (++iter > max_iter)
      throw NoConvergence("Newton did not reach ||f|| <= 1e-10 in 200 iterations (||f|| = " +
                          std::to_string(fnorm) + ")");
    vf.jacobian(x, jf);
    // Least-squares solve survives the rank deficiency of symmetric models.
    Vec step = jf.colPivHouseholderQr().solve(-fx);
    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving) {
      x_try = x + scale * step;
      vf.eval(x_try, f_try);
      if (f_try.norm() < fnorm) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted)
      throw NoConvergence("Newton stalled: step halving exhausted at ||f|| = " +
                          std::to_string(fnorm));
    x = x_try;
    fx = f_try;
    fnorm = fx.norm();
  }

  EquilibriumInfo info;
  info.x_star = x;
  vf.jacobian(x, jf);
  Eigen::EigenSolver<Mat> es(jf);
  int pos = 0, neg = 0;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> ev = es.eigenvalues()[i];
    info.eigenvalues.push_back(ev);
    if (std::abs(ev.real()) < 1e-9) info.hyperbolic = false;
    if (ev.real() > 0) ++pos;
    if (ev.real() < 0) ++neg;
  }
  info.unstable_count = pos;
  if (pos == 0)
    info.kind = EquilibriumKind::stable;
  else if (neg == 0)
    info.kind = EquilibriumKind::unstable;
  else
    info.kind = EquilibriumKind::saddle;
  return info;
}

namespace {

Vec json_vec(const json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Mat json_mat(const json& j) {
  const std::size_t r = j.size();
  const std::size_t c = r ? j[0].size() : 0;
  Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (j[i].size() != c) throw ParseError("matrix rows have unequal length");
    for (std::size_t k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

std::shared_ptr<VectorField> make_field_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
  const std::string id = j.value("id", "");
  try {
    if (id == "saddle") return std::make_shared<SaddleField>();
    if (id == "rotation") {
      Mat a(2, 2);
      a << 0, -1, 1, 0;
      return std::make_shared<LinearField>(a);
    }
    if (id == "contraction") {
      Mat a = -Mat::Identity(2, 2);
      return std::make_shared<LinearField>(a);
    }
    if (id == "linear") return std::make_shared<LinearField>(json_mat(j.at("params").at("A")));
    if (id == "classical_swing") {
      const json& p = j.at("params");
      SwingParams sp;
      sp.n_gen = p.at("n_gen").get<int>();
      sp.P = json_vec(p.at("P"));
      sp.D = json_vec(p.at("D"));
      sp.E = json_vec(p.at("E"));
      sp.Y = json_mat(p.at("Y"));
      return std::make_shared<ClassicalSwingField>(std::move(sp));
    }
    if (id == "network_swing") {
      const json& p = j.at("params");
      NetworkSwingParams np;
      np.n_gen = p.at("n_gen").get<int>();
      np.H = json_vec(p.at("H"));
      np.f_s = p.at("f_s").get<double>();
      np.D = json_vec(p.at("D"));
      np.P_m = json_vec(p.at("P_m"));
      np.E = json_vec(p.at("E"));
      np.G = json_mat(p.at("G"));
      np.B = json_mat(p.at("B"));
      if (j.contains("reference_gen"))
        return std::make_shared<RelativeNetworkSwingField>(
            std::move(np), j.at("reference_gen").get<int>());
      return std::make_shared<NetworkSwingField>(std::move(np));
    }
  } catch (const json::exception& e) {
    throw ConfigError("model '" + id + "': " + e.what());
  }
  throw ConfigError("unknown model id '" + id + "'");
}

std::shared_ptr<VectorField> load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return make_field_from_json(ss.str());
}

}  // namespace transtab
