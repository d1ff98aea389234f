#include "transtab/field_scan.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#ifndef TRANSTAB_VERSION
#define TRANSTAB_VERSION "0.1.0"
#endif

namespace transtab {

using nlohmann::json;

void GridSpec::validate() const {
  if (axis_i == axis_j) throw ConfigError("GridSpec: axis_i must differ from axis_j");
  if (!(lo_i < hi_i) || !(lo_j < hi_j))
    throw ConfigError("GridSpec: ranges must satisfy lo < hi");
  if (ni < 2 || nj < 2) throw ConfigError("GridSpec: resolution must be >= 2 per axis");
  if (base_point.size() == 0) throw ConfigError("GridSpec: base_point required");
  const int n = static_cast<int>(base_point.size());
  if (axis_i < 0 || axis_i >= n || axis_j < 0 || axis_j >= n)
    throw ConfigError("GridSpec: slice axes out of range");
  if (window == 0.0) throw ConfigError("GridSpec: window must be nonzero");
  if (normal_mode == NormalMode::fixed) {
    if (fixed_normal.size() != n)
      throw ConfigError("GridSpec: fixed normal must match state dim");
    if (std::abs(fixed_normal.norm() - 1.0) > 1e-9)
      throw ConfigError("GridSpec: fixed normal must be unit");
  }
}

Vec GridSpec::point(int i, int j) const {
  Vec x = base_point;
  x[axis_i] = coord_i(i);
  x[axis_j] = coord_j(j);
  return x;
}

ScalarFieldGrid scan_field(const VectorField& vf, const GridSpec& spec,
                           FieldQuantity quantity, const IntegratorConfig& cfg,
                           int jobs) {
  spec.validate();
  cfg.validate();
  vf.check_dim(spec.base_point);
  if (jobs < 1) jobs = 1;

  ScalarFieldGrid out;
  out.spec = spec;
  out.quantity = quantity;
  const std::size_t n_cells = static_cast<std::size_t>(spec.ni) * spec.nj;
  out.values.assign(n_cells, 0.0);
  out.failed.assign(n_cells, 0);
  out.ridge.assign(n_cells, 0);

  const NegatedField negated(vf);
  const VectorField& field = spec.window < 0 ? static_cast<const VectorField&>(negated) : vf;
  const double tau = std::abs(spec.window);

  std::atomic<std::size_t> next_block{0};
  const std::size_t block = static_cast<std::size_t>(spec.nj);  // one row
  std::atomic<std::size_t> n_failed{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next_block.fetch_add(1);
      const std::size_t begin = b * block;
      if (begin >= n_cells) return;
      const std::size_t end = std::min(begin + block, n_cells);
      for (std::size_t c = begin; c < end; ++c) {
        const int i = static_cast<int>(c) / spec.nj;
        const int j = static_cast<int>(c) % spec.nj;
        try {
          const CauchyGreenTensor cg = cauchy_green(field, spec.point(i, j), tau, cfg);
          double v;
          if (quantity == FieldQuantity::ftle) {
            v = ftle(cg);
          } else if (spec.normal_mode == NormalMode::max_stretch) {
            v = std::sqrt(cg.lambda_max());
          } else {
            v = repulsion_rate(cg, spec.fixed_normal);
          }
          out.values[c] = v;
        } catch (const NonFiniteState&) {
          out.failed[c] = 1;
          n_failed.fetch_add(1);
        } catch (const SingularTensor&) {
          out.failed[c] = 1;
          n_failed.fetch_add(1);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  if (n_failed.load() == n_cells)
    throw AllCellsFailed("every grid cell blew up; wrong window or region?");
  return out;
}

RidgeSet extract_ridges(ScalarFieldGrid& field, double threshold) {
  const int ni = field.spec.ni, nj = field.spec.nj;
  RidgeSet out;
  out.mask.assign(static_cast<std::size_t>(ni) * nj, 0);

  const auto ok = [&](int i, int j) { return !field.is_failed(i, j); };
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < nj; ++j) {
      if (!ok(i, j)) continue;
      const double v = field.at(i, j);
      if (!(v > threshold)) continue;
      // Strict transverse maximum along at least one grid axis; border
      // cells have no complete neighbor pair and never qualify.
      bool max_i = i > 0 && i < ni - 1 && ok(i - 1, j) && ok(i + 1, j) &&
                   v > field.at(i - 1, j) && v > field.at(i + 1, j);
      bool max_j = j > 0 && j < nj - 1 && ok(i, j - 1) && ok(i, j + 1) &&
                   v > field.at(i, j - 1) && v > field.at(i, j + 1);
      if (max_i || max_j) out.mask[static_cast<std::size_t>(i) * nj + j] = 1;
    }
  }
  field.ridge = out.mask;

  // 8-connected components.
  std::vector<uint8_t> seen(out.mask.size(), 0);
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < nj; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * nj + j;
      if (!out.mask[c] || seen[c]) continue;
      std::vector<RidgeCell> comp;
      std::vector<RidgeCell> stack{{i, j}};
      seen[c] = 1;
      while (!stack.empty()) {
        const RidgeCell cell = stack.back();
        stack.pop_back();
        comp.push_back(cell);
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            const int ii = cell.first + di, jj = cell.second + dj;
            if (ii < 0 || ii >= ni || jj < 0 || jj >= nj) continue;
            const std::size_t cc = static_cast<std::size_t>(ii) * nj + jj;
            if (out.mask[cc] && !seen[cc]) {
              seen[cc] = 1;
              stack.push_back({ii, jj});
            }
          }
        }
      }
      out.components.push_back(std::move(comp));
    }
  }
  return out;
}

std::optional<Eigen::Vector2d> ridge_tangent(const ScalarFieldGrid& field,
                                             RidgeCell cell, int radius) {
  const int ni = field.spec.ni, nj = field.spec.nj;
  std::vector<Eigen::Vector2d> pts;
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) {
      const int i = cell.first + di, j = cell.second + dj;
      if (i < 0 || i >= ni || j < 0 || j >= nj) continue;
      if (!field.is_ridge(i, j)) continue;
      pts.emplace_back(field.spec.coord_i(i), field.spec.coord_j(j));
    }
  }
  if (pts.size() < 2) return std::nullopt;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  return es.eigenvectors().col(1).normalized();  // principal axis
}

RidgeValidity ftle_ridge_validity(const VectorField& vf,
                                  const ScalarFieldGrid& field, RidgeCell cell,
                                  const IntegratorConfig& cfg) {
  const GridSpec& spec = field.spec;
  RidgeValidity out;

  const NegatedField negated(vf);
  const VectorField& f = spec.window < 0 ? static_cast<const VectorField&>(negated) : vf;
  const CauchyGreenTensor cg =
      cauchy_green(f, spec.point(cell.first, cell.second), std::abs(spec.window), cfg);

  const int n = cg.dim();
  if (!(cg.lambda_max() > 1.0)) out.reasons.push_back("lambda_n <= 1");
  const double gap = (cg.lambda_max() - cg.lambda[n - 2]) / cg.lambda_max();
  if (!(gap > 1e-6)) out.reasons.push_back("top eigenvalue pair degenerate");

  const auto tangent2 = ridge_tangent(field, cell);
  if (!tangent2) {
    out.reasons.push_back("ridge tangent unavailable (isolated cell)");
  } else {
    Vec tangent = Vec::Zero(n);
    tangent[spec.axis_i] = (*tangent2)[0];
    tangent[spec.axis_j] = (*tangent2)[1];
    tangent.normalize();
    const double c = std::abs(tangent.dot(cg.xi_max()));
    // Orthogonal within 10 degrees: |cos| <= cos(80 deg).
    if (c > std::cos(80.0 * M_PI / 180.0))
      out.reasons.push_back("xi_n not orthogonal to ridge tangent");
  }

  out.valid = out.reasons.empty();
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quantity_name(FieldQuantity q) {
  return q == FieldQuantity::rho ? "rho" : "ftle";
}

}  // namespace

void write_field_csv(const ScalarFieldGrid& field, const std::string& path,
                     const std::string& model_id) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << "i,j,coord_i,coord_j,value,failed,ridge\n";
  const GridSpec& s = field.spec;
  for (int i = 0; i < s.ni; ++i) {
    for (int j = 0; j < s.nj; ++j) {
      out << i << ',' << j << ',' << fmt_double(s.coord_i(i)) << ','
          << fmt_double(s.coord_j(j)) << ',' << fmt_double(field.at(i, j)) << ','
          << int(field.is_failed(i, j)) << ',' << int(field.is_ridge(i, j)) << '\n';
    }
  }

  json meta;
  meta["spec"] = {{"axis_i", s.axis_i},
                  {"axis_j", s.axis_j},
                  {"range_i", {s.lo_i, s.hi_i}},
                  {"range_j", {s.lo_j, s.hi_j}},
                  {"resolution", {s.ni, s.nj}},
                  {"base_point", std::vector<double>(s.base_point.data(),
                                                     s.base_point.data() + s.base_point.size())},
                  {"normal_mode", s.normal_mode == NormalMode::max_stretch
                                      ? "max_stretch"
                                      : "fixed"}};
  if (s.normal_mode == NormalMode::fixed)
    meta["spec"]["fixed_normal"] = std::vector<double>(
        s.fixed_normal.data(), s.fixed_normal.data() + s.fixed_normal.size());
  meta["window"] = s.window;
  meta["quantity"] = quantity_name(field.quantity);
  meta["model_id"] = model_id;
  meta["version"] = std::string("transtab ") + TRANSTAB_VERSION;
  meta["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));

  std::ofstream ms(path + ".meta.json");
  if (!ms) throw ConfigError("cannot open metadata sidecar for: " + path);
  ms << meta.dump(2) << '\n';
}

ScalarFieldGrid read_field_csv(const std::string& path) {
  std::ifstream meta_in(path + ".meta.json");
  if (!meta_in) throw ParseError("missing metadata sidecar for: " + path);
  json meta = json::parse(meta_in);

  ScalarFieldGrid field;
  GridSpec& s = field.spec;
  const json& js = meta.at("spec");
  s.axis_i = js.at("axis_i").get<int>();
  s.axis_j = js.at("axis_j").get<int>();
  s.lo_i = js.at("range_i")[0].get<double>();
  s.hi_i = js.at("range_i")[1].get<double>();
  s.lo_j = js.at("range_j")[0].get<double>();
  s.hi_j = js.at("range_j")[1].get<double>();
  s.ni = js.at("resolution")[0].get<int>();
  s.nj = js.at("resolution")[1].get<int>();
  const auto bp = js.at("base_point").get<std::vector<double>>();
  s.base_point = Eigen::Map<const Vec>(bp.data(), bp.size());
  s.window = meta.at("window").get<double>();
  if (js.at("normal_mode").get<std::string>() == "fixed") {
    s.normal_mode = NormalMode::fixed;
    const auto fn = js.at("fixed_normal").get<std::vector<double>>();
    s.fixed_normal = Eigen::Map<const Vec>(fn.data(), fn.size());
  } else {
    s.normal_mode = NormalMode::max_stretch;
  }
  field.quantity = meta.at("quantity").get<std::string>() == "ftle"
                       ? FieldQuantity::ftle
                       : FieldQuantity::rho;

  const std::size_t n_cells = static_cast<std::size_t>(s.ni) * s.nj;
  field.values.assign(n_cells, 0.0);
  field.failed.assign(n_cells, 0);
  field.ridge.assign(n_cells, 0);

  std::ifstream in(path);
  if (!in) throw ParseError("cannot open field CSV: " + path);
  std::string line;
  std::getline(in, line);  // header
  if (line != "i,j,coord_i,coord_j,value,failed,ridge")
    throw ParseError("unexpected field CSV header: " + line);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    int i, j, fl, rg;
    double ci, cj, v;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%d,%d", &i, &j, &ci, &cj,
                    &v, &fl, &rg) != 7)
      throw ParseError("field CSV line " + std::to_string(lineno) + ": bad row");
    if (i < 0 || i >= s.ni || j < 0 || j >= s.nj)
      throw ParseError("field CSV line " + std::to_string(lineno) + ": index out of range");
    const std::size_t c = static_cast<std::size_t>(i) * s.nj + j;
    field.values[c] = v;
    field.failed[c] = static_cast<uint8_t>(fl);
    field.ridge[c] = static_cast<uint8_t>(rg);
  }
  return field;
}

}  // namespace transtab
