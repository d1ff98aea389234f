#ifndef TRANSTAB_FIELD_SCAN_HPP
#define TRANSTAB_FIELD_SCAN_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "transtab/hyperbolic.hpp"

namespace transtab {

enum class FieldQuantity { rho, ftle };

enum class NormalMode { fixed, max_stretch };

/// Rectangular slice of phase space. axis_i varies along grid rows (index i),
/// axis_j along columns. base_point fixes off-slice coordinates. The sign of
/// window selects forward (> 0) or backward (< 0) time.
struct GridSpec {
  int axis_i = 0;
  int axis_j = 1;
  double lo_i = 0.0, hi_i = 1.0;
  double lo_j = 0.0, hi_j = 1.0;
  int ni = 2, nj = 2;
  Vec base_point;
  double window = 1.0;
  NormalMode normal_mode = NormalMode::max_stretch;
  Vec fixed_normal;  // required when normal_mode == fixed

  void validate() const;
  double coord_i(int i) const { return lo_i + (hi_i - lo_i) * i / (ni - 1); }
  double coord_j(int j) const { return lo_j + (hi_j - lo_j) * j / (nj - 1); }
  Vec point(int i, int j) const;
};

struct ScalarFieldGrid {
  GridSpec spec;
  FieldQuantity quantity = FieldQuantity::rho;
  std::vector<double> values;       // ni * nj, row-major (i major)
  std::vector<uint8_t> failed;      // integration blow-up cells
  std::vector<uint8_t> ridge;       // filled by extract_ridges

  double& at(int i, int j) { return values[static_cast<size_t>(i) * spec.nj + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * spec.nj + j]; }
  bool is_failed(int i, int j) const { return failed[static_cast<size_t>(i) * spec.nj + j] != 0; }
  bool is_ridge(int i, int j) const { return ridge[static_cast<size_t>(i) * spec.nj + j] != 0; }
};

/// Evaluates rho or FTLE at every node. Cells raising NonFiniteState are
/// recorded in the failed mask; throws AllCellsFailed only when nothing
/// survived. Deterministic for any worker count.
ScalarFieldGrid scan_field(const VectorField& vf, const GridSpec& spec,
                           FieldQuantity quantity, const IntegratorConfig& cfg,
                           int jobs = 1);

using RidgeCell = std::pair<int, int>;

struct RidgeSet {
  std::vector<uint8_t> mask;  // ni * nj
  std::vector<std::vector<RidgeCell>> components;  // 8-connected
};

/// Cells above `threshold` that are strict local maxima of the field along
/// at least one grid axis. Failed cells never qualify. Also stores the mask
/// into field.ridge.
RidgeSet extract_ridges(ScalarFieldGrid& field, double threshold);

struct RidgeValidity {
  bool valid = false;
  std::vector<std::string> reasons;  // empty when valid
  std::string condition3 = "unchecked";
};

/// FTLE-ridge validity at a ridge cell: (1) lambda_n > 1 with a relative
/// eigenvalue gap above 1e-6, (2) xi_n orthogonal to the discrete ridge
/// tangent within 10 degrees. Condition 3 of the underlying theorem is
/// reported as unchecked.
RidgeValidity ftle_ridge_validity(const VectorField& vf,
                                  const ScalarFieldGrid& field, RidgeCell cell,
                                  const IntegratorConfig& cfg);

/// In-slice tangent direction of the ridge through `cell`, estimated as the
/// principal axis of nearby ridge cells (physical coordinates). Returns
/// nullopt when fewer than two ridge cells are in reach.
std::optional<Eigen::Vector2d> ridge_tangent(const ScalarFieldGrid& field,
                                             RidgeCell cell, int radius = 2);

/// CSV (i, j, coord_i, coord_j, value, failed, ridge) with bit-exact
/// round-trip, plus a JSON metadata sidecar at path + ".meta.json".
void write_field_csv(const ScalarFieldGrid& field, const std::string& path,
                     const std::string& model_id);
ScalarFieldGrid read_field_csv(const std::string& path);

}  // namespace transtab

#endif
