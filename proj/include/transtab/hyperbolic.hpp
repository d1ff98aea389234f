#ifndef TRANSTAB_HYPERBOLIC_HPP
#define TRANSTAB_HYPERBOLIC_HPP

#include <string>

#include "transtab/dynamics.hpp"

namespace transtab {

/// C_t(x0) = grad_phi^T grad_phi with its eigen decomposition.
/// Eigenvalues ascending, eigenvectors orthonormal (columns of xi).
struct CauchyGreenTensor {
  Vec x0;
  double t = 0.0;
  Mat C;
  Vec lambda;  // lambda_1 <= ... <= lambda_n, all > 0
  Mat xi;      // column i pairs with lambda[i]

  int dim() const { return static_cast<int>(lambda.size()); }
  double lambda_max() const { return lambda[lambda.size() - 1]; }
  Vec xi_max() const { return xi.col(xi.cols() - 1); }
};

/// Builds C from an already computed flow gradient.
CauchyGreenTensor cauchy_green_from_gradient(const Vec& x0, double t,
                                             const Mat& grad_phi);

CauchyGreenTensor cauchy_green(const VectorField& vf, const Vec& x0, double t,
                               const IntegratorConfig& cfg);

/// rho = 1 / sqrt(n0^T C^{-1} n0), evaluated through the eigen
/// decomposition as (sum_i (n0 . xi_i)^2 / lambda_i)^{-1/2}. n0 is
/// renormalized internally; it must be unit within 1e-9.
double repulsion_rate(const CauchyGreenTensor& cg, const Vec& n0);

/// nu = rho(n0) / max_{|e0|=1, e0 in span(tangent_basis)} |grad_phi e0|.
/// tangent_basis: n x (n-1), orthonormal columns orthogonal to n0.
double repulsion_ratio(const CauchyGreenTensor& cg, const Vec& n0,
                       const Mat& tangent_basis);

struct RepulsionResult {
  double rho = 1.0;
  double nu = 0.0;      // 0 when no tangent basis was involved
  Vec normal_used;
  double window = 0.0;  // T [s]
};

/// rho with n0 = xi_n (the dominant stretch direction): sqrt(lambda_n).
/// This is the supremum of rho over unit normals and the online-monitoring
/// surrogate when the material-surface normal is unknown.
RepulsionResult max_stretch_certificate(const CauchyGreenTensor& cg);

/// FTLE sigma = ln(lambda_n) / (2 t). Throws ZeroWindow at t = 0.
double ftle(const CauchyGreenTensor& cg);

/// sin of the angle between n0 and xi_n: sqrt(1 - (n0 . xi_n)^2).
double alignment_angle(const CauchyGreenTensor& cg, const Vec& n0);

enum class SurfaceClass { repelling, attracting, neither };

/// Normally repelling over [0,T] iff rho >= e^{alpha T} and nu >= e^{beta T}
/// with the tangent basis completed orthogonal to n0; attracting iff the
/// same holds in backward time.
SurfaceClass classify_surface_point(const VectorField& vf, const Vec& x0,
                                    const Vec& n0, double T, double alpha,
                                    double beta, const IntegratorConfig& cfg);

/// Orthonormal basis of the complement of n0 (n x (n-1) columns).
Mat orthonormal_complement(const Vec& n0);

std::string to_string(SurfaceClass c);

}  // namespace transtab

#endif
