#include "transtab/hyperbolic.hpp"

#include <cmath>

namespace transtab {

CauchyGreenTensor cauchy_green_from_gradient(const Vec& x0, double t,
                                             const Mat& grad_phi) {
  CauchyGreenTensor cg;
  cg.x0 = x0;
  cg.t = t;
  Mat c = grad_phi.transpose() * grad_phi;
  cg.C = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(cg.C);
  cg.lambda = es.eigenvalues();  // ascending
  cg.xi = es.eigenvectors();
  if (cg.lambda[0] < 1e-300)
    throw SingularTensor("smallest Cauchy-Green eigenvalue collapsed (" +
                         std::to_string(cg.lambda[0]) + ")");
  return cg;
}

CauchyGreenTensor cauchy_green(const VectorField& vf, const Vec& x0, double t,
                               const IntegratorConfig& cfg) {
  FlowSample fs = flow_with_gradient(vf, x0, t, cfg);
  return cauchy_green_from_gradient(x0, t, fs.grad_phi);
}

double repulsion_rate(const CauchyGreenTensor& cg, const Vec& n0) {
  if (n0.size() != cg.lambda.size())
    throw DimensionMismatch("normal vector dim mismatch");
  const double nn = n0.norm();
  if (std::abs(nn - 1.0) > 1e-9)
    throw DimensionMismatch("n0 must be unit within 1e-9 (|n0| = " +
                            std::to_string(nn) + ")");
  const Vec n = n0 / nn;
  double s = 0.0;
  for (int i = 0; i < cg.dim(); ++i) {
    const double proj = n.dot(cg.xi.col(i));
    s += proj * proj / cg.lambda[i];
  }
  return 1.0 / std::sqrt(s);
}

double repulsion_ratio(const CauchyGreenTensor& cg, const Vec& n0,
                       const Mat& tangent_basis) {
  const int n = cg.dim();
  if (tangent_basis.rows() != n || tangent_basis.cols() != n - 1)
    throw BasisNotOrthonormal("tangent basis must be n x (n-1)");
  const Mat gram = tangent_basis.transpose() * tangent_basis;
  if (!gram.isApprox(Mat::Identity(n - 1, n - 1), 1e-8))
    throw BasisNotOrthonormal("tangent basis columns are not orthonormal");
  if ((tangent_basis.transpose() * n0).cwiseAbs().maxCoeff() > 1e-8)
    throw BasisNotOrthonormal("tangent basis is not orthogonal to n0");

  // Largest tangential stretch: sqrt of the top eigenvalue of B^T C B.
  const Mat ct = tangent_basis.transpose() * cg.C * tangent_basis;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (ct + ct.transpose()));
  const double stretch = std::sqrt(es.eigenvalues()[n - 2]);
  return repulsion_rate(cg, n0) / stretch;
}

RepulsionResult max_stretch_certificate(const CauchyGreenTensor& cg) {
  RepulsionResult r;
  r.rho = std::sqrt(cg.lambda_max());
  r.normal_used = cg.xi_max();
  r.window = cg.t;
  return r;
}

double ftle(const CauchyGreenTensor& cg) {
  if (cg.t == 0.0) throw ZeroWindow("FTLE undefined at t = 0");
  return std::log(cg.lambda_max()) / (2.0 * cg.t);
}

double alignment_angle(const CauchyGreenTensor& cg, const Vec& n0) {
  const Vec n = n0 / n0.norm();
  const double c = std::abs(n.dot(cg.xi_max()));
  const double s2 = std::max(0.0, 1.0 - c * c);
  return std::sqrt(s2);
}

Mat orthonormal_complement(const Vec& n0) {
  const int n = static_cast<int>(n0.size());
  Eigen::HouseholderQR<Mat> qr(n0);
  Mat q = qr.householderQ();
  // First column of Q spans n0; the rest span its complement.
  return q.rightCols(n - 1);
}

SurfaceClass classify_surface_point(const VectorField& vf, const Vec& x0,
                                    const Vec& n0, double T, double alpha,
                                    double beta, const IntegratorConfig& cfg) {
  if (!(alpha > 0) || !(beta > 0))
    throw ConfigError("classify_surface_point: alpha, beta must be > 0");
  const Vec n = n0 / n0.norm();
  const Mat basis = orthonormal_complement(n);
  const double rho_min = std::exp(alpha * T);
  const double nu_min = std::exp(beta * T);

  const auto check = [&](const VectorField& field) {
    const CauchyGreenTensor cg = cauchy_green(field, x0, T, cfg);
    return repulsion_rate(cg, n) >= rho_min &&
           repulsion_ratio(cg, n, basis) >= nu_min;
  };

  if (check(vf)) return SurfaceClass::repelling;
  NegatedField backward(vf);
  if (check(backward)) return SurfaceClass::attracting;
  return SurfaceClass::neither;
}

std::string to_string(SurfaceClass c) {
  switch (c) {
    case SurfaceClass::repelling:
      return "repelling";
    case SurfaceClass::attracting:
      return "attracting";
    case SurfaceClass::neither:
      return "neither";
  }
  return "?";
}

}  // namespace transtab
