#include "transtab/run.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "transtab/field_scan.hpp"
#include "transtab/models.hpp"
#include "transtab/monitor.hpp"

#ifndef TRANSTAB_DATA_DEFAULT
#define TRANSTAB_DATA_DEFAULT ""
#endif

namespace transtab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vec json_vec(const json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

json vec_json(const Vec& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

void apply_override(json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string val = kv.substr(eq + 1);
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("--set: empty key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
  json parsed = json::parse(val, nullptr, false);
  (*node)[parts.back()] = parsed.is_discarded() ? json(val) : parsed;
}

std::string resolve_model_file(const std::string& name, const fs::path& config_dir) {
  std::vector<fs::path> candidates;
  const fs::path p(name);
  if (p.is_absolute()) {
    candidates.push_back(p);
  } else {
    candidates.push_back(config_dir / p);
    candidates.push_back(p);  // cwd
    if (const char* env = std::getenv("TRANSTAB_DATA_DIR")) candidates.push_back(fs::path(env) / p);
    if (std::string(TRANSTAB_DATA_DEFAULT).size()) candidates.push_back(fs::path(TRANSTAB_DATA_DEFAULT) / p);
  }
  for (const auto& c : candidates)
    if (fs::exists(c)) return c.string();
  throw ConfigError("model file not found: " + name);
}

IntegratorConfig parse_integrator(json& cfg) {
  json& j = cfg["integrator"];
  if (!j.is_object()) j = json::object();
  IntegratorConfig ic;
  ic.h = j.value("h", ic.h);
  const std::string mode = j.value("jacobian_mode", std::string("variational"));
  if (mode == "variational")
    ic.jacobian_mode = JacobianMode::variational;
  else if (mode == "finite-difference")
    ic.jacobian_mode = JacobianMode::finite_difference;
  else
    throw ConfigError("unknown jacobian_mode '" + mode + "'");
  ic.fd_epsilon = j.value("fd_epsilon", ic.fd_epsilon);
  ic.validate();
  // echo resolved defaults
  j["h"] = ic.h;
  j["jacobian_mode"] = mode;
  j["fd_epsilon"] = ic.fd_epsilon;
  return ic;
}

GridSpec parse_grid(const json& g, int state_dim) {
  GridSpec s;
  s.axis_i = g.at("axis_i").get<int>();
  s.axis_j = g.at("axis_j").get<int>();
  s.lo_i = g.at("range_i")[0].get<double>();
  s.hi_i = g.at("range_i")[1].get<double>();
  s.lo_j = g.at("range_j")[0].get<double>();
  s.hi_j = g.at("range_j")[1].get<double>();
  s.ni = g.at("resolution")[0].get<int>();
  s.nj = g.at("resolution")[1].get<int>();
  if (g.contains("base_point"))
    s.base_point = json_vec(g.at("base_point"));
  else
    s.base_point = Vec::Zero(state_dim);
  s.window = g.at("window").get<double>();
  if (g.contains("normal_mode")) {
    const json& nm = g.at("normal_mode");
    if (nm.is_string() && nm.get<std::string>() == "max_stretch") {
      s.normal_mode = NormalMode::max_stretch;
    } else if (nm.is_object() && nm.contains("fixed")) {
      s.normal_mode = NormalMode::fixed;
      s.fixed_normal = json_vec(nm.at("fixed"));
    } else {
      throw ConfigError("normal_mode must be \"max_stretch\" or {\"fixed\": [...]}");
    }
  }
  s.validate();
  return s;
}

struct RunContext {
  json cfg;
  fs::path config_dir;
  fs::path out_dir;
  std::string prefix;
  std::shared_ptr<VectorField> field;
  std::string model_id;
  IntegratorConfig ic;
  int jobs = 1;

  fs::path out(const std::string& suffix) const { return out_dir / (prefix + suffix); }
};

void cmd_simulate(RunContext& ctx) {
  json& blk = ctx.cfg.at("simulate");
  const Vec x0 = json_vec(blk.at("x0"));
  const double t_end = blk.at("t_end").get<double>();
  const int stride = blk.value("sample_stride", 1);
  blk["sample_stride"] = stride;

  Trajectory traj = integrate(*ctx.field, x0, t_end, ctx.ic);
  if (stride > 1) {
    Trajectory thin;
    thin.step = traj.step * stride;
    for (std::size_t k = 0; k < traj.size(); k += stride) {
      thin.times.push_back(traj.times[k]);
      thin.states.push_back(traj.states[k]);
    }
    traj = std::move(thin);
  }
  write_series_csv(traj, ctx.out("_trajectory.csv").string());
  std::cout << "simulate: " << traj.size() << " samples -> "
            << ctx.out("_trajectory.csv").string() << "\n";
}

ScalarFieldGrid compute_field(RunContext& ctx, const json& blk) {
  const GridSpec spec = parse_grid(blk.at("grid"), ctx.field->dim());
  const std::string qname = blk.value("quantity", std::string("rho"));
  const FieldQuantity q = qname == "ftle" ? FieldQuantity::ftle : FieldQuantity::rho;
  return scan_field(*ctx.field, spec, q, ctx.ic, ctx.jobs);
}

void cmd_field(RunContext& ctx) {
  json& blk = ctx.cfg.at("field");
  blk["quantity"] = blk.value("quantity", std::string("rho"));
  ScalarFieldGrid grid = compute_field(ctx, blk);
  if (blk.contains("threshold")) extract_ridges(grid, blk.at("threshold").get<double>());
  write_field_csv(grid, ctx.out("_field.csv").string(), ctx.model_id);
  std::cout << "field: " << grid.spec.ni << "x" << grid.spec.nj << " grid -> "
            << ctx.out("_field.csv").string() << "\n";
}

void cmd_ridge(RunContext& ctx) {
  json& blk = ctx.cfg.at("ridge");
  ScalarFieldGrid grid = blk.contains("field_csv")
                             ? read_field_csv(resolve_model_file(
                                   blk.at("field_csv").get<std::string>(), ctx.config_dir))
                             : compute_field(ctx, blk);
  const double threshold = blk.value("threshold", 1.0);
  blk["threshold"] = threshold;
  const RidgeSet ridges = extract_ridges(grid, threshold);

  json out;
  out["threshold"] = threshold;
  out["n_components"] = ridges.components.size();
  out["components"] = json::array();
  for (const auto& comp : ridges.components) {
    json cells = json::array();
    for (const auto& [i, j] : comp) cells.push_back({i, j});
    out["components"].push_back(std::move(cells));
  }
  std::ofstream os(ctx.out("_ridges.json"));
  os << out.dump(2) << '\n';
  write_field_csv(grid, ctx.out("_field.csv").string(), ctx.model_id);
  std::cout << "ridge: " << ridges.components.size() << " components -> "
            << ctx.out("_ridges.json").string() << "\n";
}

void cmd_monitor(RunContext& ctx) {
  json& blk = ctx.cfg.at("monitor");
  const double horizon = blk.at("horizon").get<double>();
  const double sample_every = blk.value("sample_every", 0.5);
  const double delta_t = blk.value("delta_t", 1.5);
  blk["sample_every"] = sample_every;
  blk["delta_t"] = delta_t;
  VerdictThresholds th;
  th.eps_v = blk.value("eps_v", th.eps_v);
  th.n_hold = blk.value("n_hold", th.n_hold);
  blk["eps_v"] = th.eps_v;
  blk["n_hold"] = th.n_hold;

  CertificateSeries series;

  if (blk.contains("series_csv")) {
    // Model-free path: lambda from an ingested time series only.
    const std::string path =
        resolve_model_file(blk.at("series_csv").get<std::string>(), ctx.config_dir);
    const TimeSeriesWindow w = ingest_series(path, delta_t);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double t = w.times[k] - w.times[0];
      series.times.push_back(t);
      double le = std::numeric_limits<double>::quiet_NaN();
      if (t > delta_t && k + w.delay_steps() < w.size()) {
        try {
          le = model_free_le(w, t);
        } catch (const OutOfRange&) {
        }
      }
      series.le.push_back(le);
    }
  } else {
    Vec x_P;
    if (blk.contains("x_P")) {
      x_P = json_vec(blk.at("x_P"));
    } else if (blk.contains("equilibrium_guess")) {
      const EquilibriumInfo eq =
          find_equilibrium(*ctx.field, json_vec(blk.at("equilibrium_guess")));
      x_P = eq.x_star;
      if (blk.contains("offset")) x_P += json_vec(blk.at("offset"));
    } else {
      throw ConfigError("monitor: need x_P, equilibrium_guess, or series_csv");
    }

    const std::string gm = blk.value("gradient_mode", std::string("reintegrate"));
    blk["gradient_mode"] = gm;
    series = certificate_rho(*ctx.field, x_P, horizon, sample_every, ctx.ic, th,
                             gm == "chained" ? GradientMode::chained
                                             : GradientMode::reintegrate);

    // Model-free lambda from the simulated trajectory, evaluated at the
    // certificate sample times.
    const int stride = blk.value("sample_stride", 10);
    blk["sample_stride"] = stride;
    try {
      Trajectory traj = integrate(*ctx.field, x_P, horizon + delta_t, ctx.ic);
      const TimeSeriesWindow w = window_from_trajectory(traj, stride, delta_t);
      for (double t : series.times) {
        double le = std::numeric_limits<double>::quiet_NaN();
        if (t > delta_t) {
          try {
            le = model_free_le(w, t);
          } catch (const OutOfRange&) {
          } catch (const DegenerateBaseline&) {
          }
        }
        series.le.push_back(le);
      }
    } catch (const NonFiniteState&) {
      // trajectory blew up before horizon + delta_t; lambda stays NaN
      series.le.assign(series.times.size(), std::numeric_limits<double>::quiet_NaN());
    }
  }

  // theta: integral of the positive part of lambda, with a floor so the
  // margin is finite for never-unstable runs.
  const double floor_eps = 1e-6;
  series.theta.assign(series.times.size(), floor_eps);
  series.margin_theta.assign(series.times.size(), 1.0 / floor_eps);
  double acc = 0.0;
  double prev_t = 0.0, prev_pos = 0.0;
  bool have_prev = false;
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const double le = k < series.le.size() ? series.le[k] : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(le)) {
      const double pos = std::max(le, 0.0);
      if (have_prev) acc += 0.5 * (pos + prev_pos) * (series.times[k] - prev_t);
      prev_t = series.times[k];
      prev_pos = pos;
      have_prev = true;
    }
    series.theta[k] = acc + floor_eps;
    series.margin_theta[k] = 1.0 / series.theta[k];
  }

  write_certificate_csv(series, ctx.out("_certificate.csv").string());

  // Overall verdicts to stdout.
  std::vector<double> ts, ls;
  for (std::size_t k = 0; k < series.le.size(); ++k)
    if (std::isfinite(series.le[k])) {
      ts.push_back(series.times[k]);
      ls.push_back(series.le[k]);
    }
  std::cout << "monitor: " << series.times.size() << " samples -> "
            << ctx.out("_certificate.csv").string() << "\n";
  if (!series.verdict.empty())
    std::cout << "  rho verdict: " << to_string(series.verdict.back())
              << (series.truncated ? " (trajectory blew up)" : "") << "\n";
  if (static_cast<int>(ls.size()) >= th.n_hold) {
    const LeVerdict lv = le_verdict(ts, ls, th.n_hold, floor_eps);
    std::cout << "  le verdict: " << to_string(lv.verdict)
              << " (margin 1/theta = " << lv.margin_theta << ")\n";
  }
}

void cmd_equilibria(RunContext& ctx) {
  const json& blk = ctx.cfg.at("equilibria");
  json out = json::array();
  for (const json& guess : blk.at("guesses")) {
    const EquilibriumInfo eq = find_equilibrium(*ctx.field, json_vec(guess));
    json e;
    e["x_star"] = vec_json(eq.x_star);
    e["kind"] = eq.kind_string();
    e["hyperbolic"] = eq.hyperbolic;
    e["eigenvalues"] = json::array();
    for (const auto& ev : eq.eigenvalues) e["eigenvalues"].push_back({ev.real(), ev.imag()});
    out.push_back(std::move(e));
  }
  std::ofstream os(ctx.out("_equilibria.json"));
  os << out.dump(2) << '\n';
  std::cout << "equilibria: " << out.size() << " found -> "
            << ctx.out("_equilibria.json").string() << "\n";
}

}  // namespace

int run_config(const std::string& config_path,
               const std::vector<std::string>& overrides, int jobs) {
  try {
    RunContext ctx;
    {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config: " + config_path);
      try {
        ctx.cfg = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
      }
    }
    ctx.config_dir = fs::absolute(fs::path(config_path)).parent_path();
    for (const auto& kv : overrides) apply_override(ctx.cfg, kv);

    const std::string command = ctx.cfg.at("command").get<std::string>();
    ctx.jobs = jobs > 0 ? jobs : ctx.cfg.value("jobs", 0);
    if (ctx.jobs <= 0) {
      const unsigned hw = std::thread::hardware_concurrency();
      ctx.jobs = hw ? static_cast<int>(hw) : 1;
    }
    ctx.cfg["jobs"] = ctx.jobs;
    ctx.cfg["seed"] = ctx.cfg.value("seed", 0);

    json& model = ctx.cfg.at("model");
    if (model.contains("file")) {
      const std::string path =
          resolve_model_file(model.at("file").get<std::string>(), ctx.config_dir);
      std::ifstream mf(path);
      json mj = json::parse(mf);
      if (model.contains("patch")) mj.merge_patch(model.at("patch"));
      ctx.field = make_field_from_json(mj.dump());
      ctx.model_id = mj.value("id", path);
    } else {
      ctx.field = make_field_from_json(model.dump());
      ctx.model_id = model.value("id", "inline");
    }
    ctx.ic = parse_integrator(ctx.cfg);

    const json& out_blk = ctx.cfg["output"];
    ctx.out_dir = out_blk.value("dir", std::string("."));
    ctx.prefix = out_blk.value("prefix", command);
    ctx.cfg["output"]["dir"] = ctx.out_dir.string();
    ctx.cfg["output"]["prefix"] = ctx.prefix;
    fs::create_directories(ctx.out_dir);

    if (command == "simulate")
      cmd_simulate(ctx);
    else if (command == "field")
      cmd_field(ctx);
    else if (command == "ridge")
      cmd_ridge(ctx);
    else if (command == "monitor")
      cmd_monitor(ctx);
    else if (command == "equilibria")
      cmd_equilibria(ctx);
    else
      throw ConfigError("unknown command '" + command + "'");

    // Resolved config echo for reproducibility.
    std::ofstream cfg_out(ctx.out("_config.json"));
    cfg_out << ctx.cfg.dump(2) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace transtab
