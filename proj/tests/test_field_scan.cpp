#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "transtab/field_scan.hpp"
#include "transtab/models.hpp"

using namespace transtab;
namespace fs = std::filesystem;

namespace {

SwingParams twogen_params() {
  SwingParams p;
  p.n_gen = 1;
  p.P = Vec::Constant(1, 0.5);
  p.D = Vec::Constant(1, 1.0);
  p.E = Vec::Constant(2, 1.0);
  p.Y = Mat::Zero(2, 2);
  p.Y(0, 1) = p.Y(1, 0) = 1.0;
  return p;
}

GridSpec small_spec(double window = 1.0) {
  GridSpec s;
  s.axis_i = 0;
  s.axis_j = 1;
  s.lo_i = -0.5;
  s.hi_i = 0.5;
  s.lo_j = -0.4;
  s.hi_j = 0.4;
  s.ni = 7;
  s.nj = 5;
  s.base_point = Vec::Zero(2);
  s.window = window;
  return s;
}

ScalarFieldGrid synthetic_grid(int ni, int nj) {
  ScalarFieldGrid g;
  g.spec = small_spec();
  g.spec.ni = ni;
  g.spec.nj = nj;
  g.values.assign(static_cast<std::size_t>(ni) * nj, 0.0);
  g.failed.assign(g.values.size(), 0);
  g.ridge.assign(g.values.size(), 0);
  return g;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("transtab_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("grid spec validation") {
  GridSpec s = small_spec();
  CHECK_NOTHROW(s.validate());
  s.axis_j = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.ni = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.hi_i = s.lo_i;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.window = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.normal_mode = NormalMode::fixed;
  CHECK_THROWS_AS(s.validate(), ConfigError);  // missing normal
  s.fixed_normal = Vec(2);
  s.fixed_normal << 2.0, 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);  // not unit
  s.fixed_normal << 1.0, 0.0;
  CHECK_NOTHROW(s.validate());

  CHECK(s.point(0, 0)[0] == -0.5);
  CHECK(s.point(s.ni - 1, 0)[0] == 0.5);
}

TEST_CASE("scan values match pointwise Cauchy-Green evaluation") {
  ClassicalSwingField f(twogen_params());
  const GridSpec s = small_spec(2.0);
  IntegratorConfig cfg;
  cfg.h = 0.01;
  const ScalarFieldGrid grid = scan_field(f, s, FieldQuantity::rho, cfg);
  for (int i = 0; i < s.ni; ++i) {
    for (int j = 0; j < s.nj; ++j) {
      const CauchyGreenTensor cg = cauchy_green(f, s.point(i, j), 2.0, cfg);
      CHECK(grid.at(i, j) == std::sqrt(cg.lambda_max()));
      CHECK_FALSE(grid.is_failed(i, j));
    }
  }
  const ScalarFieldGrid ftle_grid = scan_field(f, s, FieldQuantity::ftle, cfg);
  const CauchyGreenTensor cg = cauchy_green(f, s.point(3, 2), 2.0, cfg);
  CHECK(ftle_grid.at(3, 2) == ftle(cg));
}

TEST_CASE("scan results are identical for any worker count") {
  ClassicalSwingField f(twogen_params());
  const GridSpec s = small_spec(2.0);
  IntegratorConfig cfg;
  cfg.h = 0.01;
  const ScalarFieldGrid one = scan_field(f, s, FieldQuantity::rho, cfg, 1);
  const ScalarFieldGrid four = scan_field(f, s, FieldQuantity::rho, cfg, 4);
  CHECK(one.values == four.values);
  CHECK(one.failed == four.failed);
}

TEST_CASE("fixed-normal scans evaluate rho against that normal") {
  ClassicalSwingField f(twogen_params());
  GridSpec s = small_spec(1.5);
  s.normal_mode = NormalMode::fixed;
  s.fixed_normal = Vec(2);
  s.fixed_normal << 1.0, 0.0;
  IntegratorConfig cfg;
  cfg.h = 0.01;
  const ScalarFieldGrid grid = scan_field(f, s, FieldQuantity::rho, cfg);
  const CauchyGreenTensor cg = cauchy_green(f, s.point(2, 1), 1.5, cfg);
  CHECK(grid.at(2, 1) == repulsion_rate(cg, s.fixed_normal));
}

TEST_CASE("negative windows scan the backward flow") {
  ClassicalSwingField f(twogen_params());
  NegatedField backward(f);
  GridSpec s = small_spec(-2.0);
  IntegratorConfig cfg;
  cfg.h = 0.01;
  const ScalarFieldGrid back_grid = scan_field(f, s, FieldQuantity::rho, cfg);
  s.window = 2.0;
  const ScalarFieldGrid neg_grid = scan_field(backward, s, FieldQuantity::rho, cfg);
  CHECK(back_grid.values == neg_grid.values);
}

TEST_CASE("blow-up cells land in the failed mask; a dead grid throws") {
  // xdot = x^2 + 1 escapes in finite time from everywhere.
  class Escape final : public VectorField {
   public:
    int dim() const override { return 2; }
    void eval(const Vec& x, Vec& fx) const override {
      fx[0] = x[0] * x[0] + 1.0;
      fx[1] = -x[1];
    }
    bool has_jacobian() const override { return true; }
    void jacobian(const Vec& x, Mat& jf) const override {
      jf.setZero();
      jf(0, 0) = 2.0 * x[0];
      jf(1, 1) = -1.0;
    }
  };
  Escape f;
  GridSpec s = small_spec(10.0);
  IntegratorConfig cfg;
  cfg.h = 0.01;
  CHECK_THROWS_AS(scan_field(f, s, FieldQuantity::rho, cfg), AllCellsFailed);

  // Mixed grid: blow-up for x0 > 0 only.
  class HalfEscape final : public VectorField {
   public:
    int dim() const override { return 2; }
    void eval(const Vec& x, Vec& fx) const override {
      fx[0] = x[0] > 0.2 ? x[0] * x[0] * 40.0 : -x[0];
      fx[1] = -x[1];
    }
    bool has_jacobian() const override { return true; }
    void jacobian(const Vec& x, Mat& jf) const override {
      jf.setZero();
      jf(0, 0) = x[0] > 0.2 ? 80.0 * x[0] : -1.0;
      jf(1, 1) = -1.0;
    }
  };
  HalfEscape h;
  const ScalarFieldGrid grid = scan_field(h, s, FieldQuantity::rho, cfg);
  CHECK(grid.is_failed(s.ni - 1, 0));   // x0 = 0.5
  CHECK_FALSE(grid.is_failed(0, 0));    // x0 = -0.5
}

TEST_CASE("ridge extraction keeps strict transverse maxima above threshold") {
  ScalarFieldGrid g = synthetic_grid(5, 7);
  // A ridge along column j = 3, rising with i; a plateau pair at (2, 0..1).
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) g.at(i, j) = 0.1;
    g.at(i, 3) = 2.0 + 0.1 * i;
  }
  g.at(2, 0) = g.at(2, 1) = 3.0;  // plateau: not strict in j, border in i? no: i=2 interior
  const RidgeSet r = extract_ridges(g, 1.0);
  for (int i = 0; i < 5; ++i) CHECK(g.is_ridge(i, 3));
  // Plateau cells are strict maxima along i (neighbors 0.1), so they stay.
  CHECK(g.is_ridge(2, 1));
  // Below-threshold cells never qualify.
  ScalarFieldGrid low = synthetic_grid(5, 7);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j) low.at(i, j) = 0.1;
  low.at(2, 3) = 0.5;
  CHECK(extract_ridges(low, 1.0).components.empty());
}

TEST_CASE("plateaus are not strict maxima") {
  ScalarFieldGrid g = synthetic_grid(3, 5);
  for (int j = 0; j < 5; ++j) g.at(1, j) = 5.0;  // flat interior row
  const RidgeSet r = extract_ridges(g, 1.0);
  // Along i each cell of the row is strict (neighbors are 0); along j the
  // row is flat. Only the i-transverse test fires, which is intended.
  for (int j = 0; j < 5; ++j) CHECK(g.is_ridge(1, j));
  ScalarFieldGrid flat = synthetic_grid(3, 3);
  for (auto& v : flat.values) v = 5.0;  // everything flat: no strict maxima
  CHECK(extract_ridges(flat, 1.0).components.empty());
}

TEST_CASE("failed cells cannot be ridge cells or ridge neighbors") {
  ScalarFieldGrid g = synthetic_grid(3, 3);
  g.at(1, 1) = 9.0;
  g.failed[4] = 1;  // the peak itself failed
  CHECK(extract_ridges(g, 1.0).components.empty());
}

TEST_CASE("ridge components are 8-connected") {
  ScalarFieldGrid g = synthetic_grid(7, 7);
  // Two diagonal neighbors plus one far-away cell.
  g.at(2, 2) = 5.0;
  g.at(3, 3) = 5.0;
  g.at(5, 1) = 5.0;
  const RidgeSet r = extract_ridges(g, 1.0);
  REQUIRE(r.components.size() == 2);
  std::size_t sizes[2] = {r.components[0].size(), r.components[1].size()};
  CHECK(sizes[0] + sizes[1] == 3);
  CHECK(std::max(sizes[0], sizes[1]) == 2);
}

TEST_CASE("ridge tangent follows a straight discrete ridge") {
  ScalarFieldGrid g = synthetic_grid(9, 9);
  for (int i = 0; i < 9; ++i) g.at(i, 4) = 5.0;  // ridge along the i axis
  extract_ridges(g, 1.0);
  const auto t = ridge_tangent(g, {4, 4});
  REQUIRE(t.has_value());
  CHECK(std::abs(std::abs((*t)[0]) - 1.0) < 1e-12);
  CHECK(std::abs((*t)[1]) < 1e-12);
  // An isolated ridge cell has no tangent.
  ScalarFieldGrid lone = synthetic_grid(9, 9);
  lone.at(4, 4) = 5.0;
  extract_ridges(lone, 1.0);
  CHECK_FALSE(ridge_tangent(lone, {4, 4}).has_value());
}

TEST_CASE("FTLE ridge validity holds on the swing separatrix") {
  ClassicalSwingField f(twogen_params());
  GridSpec s;
  s.axis_i = 0;
  s.axis_j = 1;
  s.lo_i = 2.0;
  s.hi_i = 3.2;
  s.lo_j = -0.6;
  s.hi_j = 0.6;
  s.ni = 41;
  s.nj = 41;
  s.base_point = Vec::Zero(2);
  s.window = 5.0;
  IntegratorConfig cfg;
  cfg.h = 0.01;
  ScalarFieldGrid grid = scan_field(f, s, FieldQuantity::ftle, cfg);
  const RidgeSet ridges = extract_ridges(grid, 0.3);
  REQUIRE_FALSE(ridges.components.empty());
  std::size_t biggest = 0;
  for (std::size_t c = 1; c < ridges.components.size(); ++c)
    if (ridges.components[c].size() > ridges.components[biggest].size()) biggest = c;
  const auto& comp = ridges.components[biggest];
  REQUIRE(comp.size() >= 5);
  const RidgeValidity v = ftle_ridge_validity(f, grid, comp[comp.size() / 2], cfg);
  CHECK(v.valid);
  CHECK(v.condition3 == "unchecked");
}

TEST_CASE("field CSV round-trips bit-exactly with its sidecar") {
  ClassicalSwingField f(twogen_params());
  GridSpec s = small_spec(2.0);
  s.normal_mode = NormalMode::fixed;
  s.fixed_normal = Vec(2);
  s.fixed_normal << 0.0, 1.0;
  IntegratorConfig cfg;
  cfg.h = 0.01;
  ScalarFieldGrid grid = scan_field(f, s, FieldQuantity::rho, cfg);
  extract_ridges(grid, 0.5);

  TempDir tmp;
  const std::string path = (tmp.path / "field.csv").string();
  write_field_csv(grid, path, "twogen");
  const ScalarFieldGrid back = read_field_csv(path);

  CHECK(back.values == grid.values);
  CHECK(back.failed == grid.failed);
  CHECK(back.ridge == grid.ridge);
  CHECK(back.spec.ni == grid.spec.ni);
  CHECK(back.spec.nj == grid.spec.nj);
  CHECK(back.spec.window == grid.spec.window);
  CHECK(back.spec.normal_mode == NormalMode::fixed);
  CHECK(back.spec.fixed_normal == grid.spec.fixed_normal);
  CHECK(back.quantity == FieldQuantity::rho);

  std::ifstream meta(path + ".meta.json");
  REQUIRE(meta.good());
  std::string text((std::istreambuf_iterator<char>(meta)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"model_id\": \"twogen\"") != std::string::npos);
  CHECK(text.find("timestamp") != std::string::npos);
  CHECK(text.find("version") != std::string::npos);
}

TEST_CASE("field CSV reader rejects damaged inputs") {
  TempDir tmp;
  const std::string path = (tmp.path / "field.csv").string();
  CHECK_THROWS_AS(read_field_csv(path), ParseError);  // no sidecar

  // Sidecar present but CSV header wrong.
  {
    std::ofstream meta(path + ".meta.json");
    meta << R"({"spec":{"axis_i":0,"axis_j":1,"range_i":[0,1],"range_j":[0,1],)"
         << R"("resolution":[2,2],"base_point":[0,0],"normal_mode":"max_stretch"},)"
         << R"("window":1.0,"quantity":"rho"})";
    std::ofstream csv(path);
    csv << "wrong,header\n";
  }
  CHECK_THROWS_AS(read_field_csv(path), ParseError);
  {
    std::ofstream csv(path);
    csv << "i,j,coord_i,coord_j,value,failed,ridge\n";
    csv << "0,0,0,0,not_a_number,0,0\n";
  }
  CHECK_THROWS_AS(read_field_csv(path), ParseError);
  {
    std::ofstream csv(path);
    csv << "i,j,coord_i,coord_j,value,failed,ridge\n";
    csv << "9,9,0,0,1.0,0,0\n";
  }
  CHECK_THROWS_AS(read_field_csv(path), ParseError);
}
