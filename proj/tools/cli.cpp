#include "eoc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eoc/errors.hpp"
#include "eoc/lowrank_sim.hpp"
#include "eoc/meanfield.hpp"
#include "eoc/rmt.hpp"

#ifndef EOC_LOWRANK_VERSION
#define EOC_LOWRANK_VERSION "0.0.0"
#endif

namespace eoc {
namespace {

using Json = nlohmann::ordered_json;
using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Flags {
  double gamma = 1.0;
  double sigma_alpha2 = 1.0;
  double sigma_b2 = 0.0;
  std::vector<double> gammas;
  std::vector<double> sigma_b2s;
  std::string activation = "tanh";
  std::string ensemble = "gaussian";
  int depth = 10;
  int width = 1000;
  int trials = 10;
  std::uint64_t seed = 0;
  int quad_order = kDefaultQuadOrder;
  std::string format = "csv";
  std::string out = "stdout";

  CLI::Option* sigma_alpha2_opt = nullptr;
  /// Networks actually simulated when the variances are derived, not given.
  mutable Json resolved;

  NetworkConfig config(double g) const {
    NetworkConfig cfg;
    cfg.gamma = g;
    cfg.sigma_alpha2 = sigma_alpha2;
    cfg.sigma_b2 = sigma_b2;
    cfg.depth = depth;
    cfg.width = width;
    cfg.activation = ActivationFamily::from_name(activation);
    cfg.ensemble = ensemble_from_name(ensemble);
    cfg.validate();
    return cfg;
  }
  NetworkConfig config() const { return config(gamma); }
  bool variances_given() const { return sigma_alpha2_opt && sigma_alpha2_opt->count() > 0; }
  const GaussHermiteRule& rule() const {
    if (quad_order < 2) throw DomainError("--quad-order must be >= 2");
    return GaussHermiteRule::cached(quad_order);
  }
};

enum class GammaFlag { scalar, list };
enum class SigmaB2Flag { scalar, list };

void add_common(CLI::App* cmd, Flags& f, GammaFlag g = GammaFlag::scalar, SigmaB2Flag b = SigmaB2Flag::scalar) {
  if (g == GammaFlag::scalar) {
    cmd->add_option("--gamma", f.gamma, "rank fraction r/N")->capture_default_str();
  } else {
    cmd->add_option("--gamma", f.gammas, "comma-separated rank fractions")->delimiter(',')->capture_default_str();
  }
  f.sigma_alpha2_opt = cmd->add_option("--sigma-alpha2", f.sigma_alpha2, "coefficient variance")->capture_default_str();
  if (b == SigmaB2Flag::scalar) {
    cmd->add_option("--sigma-b2", f.sigma_b2, "bias variance")->capture_default_str();
  } else {
    cmd->add_option("--sigma-b2", f.sigma_b2s, "comma-separated bias variances")->delimiter(',')->capture_default_str();
  }
  cmd->add_option("--activation", f.activation, "tanh | erf | identity")->capture_default_str();
  cmd->add_option("--ensemble", f.ensemble, "gaussian | orthogonal")->capture_default_str();
  cmd->add_option("--depth", f.depth, "number of layers")->capture_default_str();
  cmd->add_option("--width", f.width, "layer width N")->capture_default_str();
  cmd->add_option("--trials", f.trials, "independent networks")->capture_default_str();
  cmd->add_option("--seed", f.seed, "root seed")->capture_default_str();
  cmd->add_option("--quad-order", f.quad_order, "Gauss-Hermite order")->capture_default_str();
  cmd->add_option("--format", f.format, "csv | json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--out", f.out, "output path or stdout")->capture_default_str();
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

Json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return format_number(*d);
    return *d;
  }
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json manifest(const std::string& name, const Flags& f, const std::vector<std::string>& args) {
  Json config = {{"gamma", f.gammas.empty() ? Json(f.gamma) : Json(f.gammas)},
                 {"sigma_alpha2", f.sigma_alpha2},
                 {"sigma_b2", f.sigma_b2s.empty() ? Json(f.sigma_b2) : Json(f.sigma_b2s)},
                 {"depth", f.depth},
                 {"width", f.width},
                 {"activation", f.activation},
                 {"ensemble", f.ensemble}};
  return {{"subcommand", name}, {"config", config},     {"seed", f.seed},
          {"quad_order", f.quad_order}, {"trials", f.trials}, {"format", f.format},
          {"version", EOC_LOWRANK_VERSION}, {"started", timestamp()}, {"args", args},
          {"resolved", f.resolved}};
}

std::string render(const Table& t, const Json& man, const std::string& format) {
  std::ostringstream os;
  if (format == "json") {
    Json rows = Json::array();
    for (const auto& r : t.rows) {
      Json row = Json::array();
      for (const auto& c : r) row.push_back(cell_json(c));
      rows.push_back(std::move(row));
    }
    os << Json{{"manifest", man}, {"columns", t.columns}, {"rows", rows}}.dump(2) << '\n';
    return os.str();
  }
  os << "# " << man.dump() << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << cell_text(r[i]);
    os << '\n';
  }
  return os.str();
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path == "stdout" || path == "-") {
    out << text;
    return;
  }
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DomainError("cannot open '" + tmp.string() + "' for writing");
    f << text;
    if (!f.flush()) throw DomainError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, target);
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw DomainError("grid needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

// Network at gamma: the critical point with fixed point q_star unless the
// variances were set explicitly, in which case q* is solved for.
std::pair<NetworkConfig, double> critical_or_given(const Flags& f, double gamma, double q_star) {
  auto cfg = f.config(gamma);
  if (f.variances_given()) return {cfg, solve_q_star(cfg, 1.0, {}, f.rule()).q_star};
  const auto pt = eoc_point(cfg.activation, gamma, q_star, f.rule());
  if (!pt) throw DomainError("no critical point with nonnegative bias variance at q* = " + format_number(q_star));
  cfg.sigma_alpha2 = pt->sigma_alpha2;
  cfg.sigma_b2 = pt->sigma_b2;
  cfg.validate();
  f.resolved.push_back({{"gamma", gamma}, {"sigma_alpha2", cfg.sigma_alpha2}, {"sigma_b2", cfg.sigma_b2}, {"q_star", q_star}});
  return {cfg, q_star};
}

Table cmd_fixed_point(const Flags& f) {
  const auto cfg = f.config();
  const auto rep = solve_fixed_point(cfg, 1.0, {}, f.rule());
  const auto xi = depth_scales(cfg, rep.q_star, f.rule());
  Table t{{"q_star", "c_star", "chi", "phase", "xi_q", "xi_c", "xi_grad", "iterations", "residual"}, {}};
  t.rows.push_back({rep.q_star, rep.c_star, rep.chi, std::string(phase_name(rep.phase)), xi.xi_q, xi.xi_c,
                    xi.xi_grad, static_cast<long long>(rep.iterations), rep.residual});
  return t;
}

Table cmd_eoc_curve(const Flags& f, double q_min, double q_max, int steps) {
  validate_gamma(f.gamma);
  const auto grid = linspace(q_min, q_max, steps);
  Table t{{"q_star", "gamma_sigma_alpha2", "gamma_sigma_b2"}, {}};
  for (const auto& p : eoc_curve(ActivationFamily::from_name(f.activation), f.gamma, grid, f.rule())) {
    t.rows.push_back({p.q_star, p.gamma_sigma_alpha2, p.gamma_sigma_b2});
  }
  return t;
}

Table cmd_depth_scales(const Flags& f, double lo, double hi, int steps) {
  Table t{{"gamma_sigma_alpha2", "sigma_b2", "xi_q", "xi_c"}, {}};
  const auto base = f.config();
  for (double sb2 : f.sigma_b2s) {
    for (double wv : linspace(lo, hi, steps)) {
      auto cfg = base.with_effective_variances(wv, base.gamma * sb2);
      cfg.validate();
      const double q = solve_q_star(cfg, 1.0, {}, f.rule()).q_star;
      const auto xi = depth_scales(cfg, q, f.rule());
      t.rows.push_back({wv, sb2, xi.xi_q, xi.xi_c});
    }
  }
  return t;
}

Table cmd_jacobian_variance(const Flags& f, double q_star, bool analytic, bool empirical) {
  Table t{{"gamma", "L", "analytic_variance", "empirical_mean", "empirical_std", "trials"}, {}};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double g : f.gammas) {
    const auto [cfg, q] = critical_or_given(f, g, q_star);
    std::vector<std::vector<double>> per_depth(cfg.depth);
    if (empirical) {
      std::vector<int> depths(cfg.depth);
      for (int l = 0; l < cfg.depth; ++l) depths[l] = l + 1;
      const auto spectra = run_trials(f.trials, [&](int trial) {
        return jacobian_spectrum(cfg, q, f.seed, trial, depths).spectrum;
      });
      for (const auto& rec : spectra) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
          double m1 = 0.0;
          for (double s : rec.values[i]) m1 += s * s;
          m1 /= static_cast<double>(rec.values[i].size());
          double var = 0.0;
          for (double s : rec.values[i]) var += (s * s - m1) * (s * s - m1);
          per_depth[rec.layers[i] - 1].push_back(var / static_cast<double>(rec.values[i].size()));
        }
      }
    }
    for (int l = 1; l <= cfg.depth; ++l) {
      double a = nan;
      if (analytic) {
        auto at = cfg;
        at.depth = l;
        a = jacobian_moments_analytic(at, q, f.rule()).variance;
      }
      double mean = nan, sd = nan;
      if (empirical) {
        const auto ms = mean_std(per_depth[l - 1]);
        mean = ms.mean;
        sd = ms.std;
      }
      t.rows.push_back({g, static_cast<long long>(l), a, mean, sd, static_cast<long long>(empirical ? f.trials : 0)});
    }
  }
  return t;
}

Table cmd_correlation_dynamics(const Flags& f, const std::vector<double>& c0s, std::optional<double> q0_flag) {
  const auto cfg = f.config();
  const auto& rule = f.rule();
  const double q0 = q0_flag ? *q0_flag : solve_q_star(cfg, 1.0, {}, rule).q_star;
  Table t{{"layer", "c0", "theory_c", "empirical_mean", "empirical_std"}, {}};
  for (double c0 : c0s) {
    if (!(std::abs(c0) <= 1.0)) throw DomainError("--c0 values must lie in [-1, 1]");
    const auto runs = run_trials(f.trials, [&](int trial) {
      return forward_pair(cfg, q0, c0, f.seed, trial).correlation.scalars();
    });
    double q = q0, c = c0;
    for (int l = 0; l <= cfg.depth; ++l) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(r[l]);
      const auto ms = mean_std(v);
      t.rows.push_back({static_cast<long long>(l), c0, c, ms.mean, ms.std});
      c = c == 1.0 ? 1.0 : covariance_map(cfg, q, q, c * q, rule) / length_map(cfg, q, rule);
      q = length_map(cfg, q, rule);
    }
  }
  return t;
}

Table cmd_gradient_propagation(const Flags& f, std::optional<double> target_chi) {
  auto cfg = f.config();
  const auto& rule = f.rule();
  if (target_chi) {
    cfg = cfg.with_effective_variances(weight_variance_for_chi(cfg.activation, cfg.bias_variance(), *target_chi, rule),
                                       cfg.bias_variance());
    cfg.validate();
    f.resolved.push_back({{"gamma", cfg.gamma}, {"sigma_alpha2", cfg.sigma_alpha2}, {"sigma_b2", cfg.sigma_b2}});
  }
  const double q = solve_q_star(cfg, 1.0, {}, rule).q_star;
  const auto theory = gradient_norm_theory(cfg, q, 1, cfg.depth, rule);
  const auto runs = run_trials(f.trials, [&](int trial) {
    auto v = backprop_gradient_norms(cfg, q, f.seed, trial).scalars();
    const double last = v.back();
    for (double& x : v) x /= last;
    return v;
  });
  Table t{{"layer", "theory_ratio", "empirical_norm", "empirical_std"}, {}};
  for (int l = 1; l <= cfg.depth; ++l) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r[l - 1]);
    const auto ms = mean_std(v);
    t.rows.push_back({static_cast<long long>(l), theory.scalar(l - 1), ms.mean, ms.std});
  }
  return t;
}

Table cmd_spectrum_dump(const Flags& f, double q_star, std::vector<int> depths, int trial) {
  const auto [cfg, q] = critical_or_given(f, f.gamma, q_star);
  if (depths.empty()) {
    for (int l = 1; l <= cfg.depth; ++l) depths.push_back(l);
  }
  for (int d : depths) {
    if (d < 1 || d > cfg.depth) throw DomainError("--depths entries must lie in [1, depth]");
  }
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
  const auto res = jacobian_spectrum(cfg, q, f.seed, trial, depths);
  Table t{{"depth", "singular_value_index", "value"}, {}};
  for (std::size_t i = 0; i < res.spectrum.size(); ++i) {
    if (!std::binary_search(depths.begin(), depths.end(), res.spectrum.layers[i])) continue;
    const auto& sv = res.spectrum.values[i];
    for (std::size_t k = 0; k < sv.size(); ++k) {
      t.rows.push_back({static_cast<long long>(res.spectrum.layers[i]), static_cast<long long>(k), sv[k]});
    }
  }
  return t;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field theory and simulation of wide low-rank networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EOC_LOWRANK_VERSION);

  std::map<std::string, Flags> flags;
  std::map<std::string, std::function<Table()>> actions;

  {
    auto& f = flags["fixed-point"];
    auto* cmd = app.add_subcommand("fixed-point", "q*, c*, chi, phase and depth scales");
    add_common(cmd, f);
    actions["fixed-point"] = [&] { return cmd_fixed_point(f); };
  }
  double q_min = 0.01, q_max = 2.0;
  int q_steps = 100;
  {
    auto& f = flags["eoc-curve"];
    auto* cmd = app.add_subcommand("eoc-curve", "edge-of-chaos curve in effective variances");
    add_common(cmd, f);
    cmd->add_option("--q-min", q_min, "smallest q*")->capture_default_str();
    cmd->add_option("--q-max", q_max, "largest q*")->capture_default_str();
    cmd->add_option("--q-steps", q_steps, "grid points")->capture_default_str();
    actions["eoc-curve"] = [&] { return cmd_eoc_curve(f, q_min, q_max, q_steps); };
  }
  double w_min = 0.5, w_max = 3.0;
  int w_steps = 51;
  {
    auto& f = flags["depth-scales"];
    f.sigma_b2s = {0.05, 0.2, 0.5};
    auto* cmd = app.add_subcommand("depth-scales", "xi_q and xi_c over a weight-variance sweep");
    add_common(cmd, f, GammaFlag::scalar, SigmaB2Flag::list);
    cmd->add_option("--gsa2-min", w_min, "smallest gamma*sigma_alpha2")->capture_default_str();
    cmd->add_option("--gsa2-max", w_max, "largest gamma*sigma_alpha2")->capture_default_str();
    cmd->add_option("--gsa2-steps", w_steps, "grid points")->capture_default_str();
    actions["depth-scales"] = [&] { return cmd_depth_scales(f, w_min, w_max, w_steps); };
  }
  double jv_q_star = 0.5;
  bool jv_analytic = false, jv_empirical = false, jv_both = false;
  {
    auto& f = flags["jacobian-variance"];
    f.gammas = {0.25, 0.5, 1.0};
    f.trials = 5;
    auto* cmd = app.add_subcommand("jacobian-variance", "variance of the J J^T spectrum against depth");
    add_common(cmd, f, GammaFlag::list);
    cmd->add_option("--q-star", jv_q_star, "equilibrium length on the critical line")->capture_default_str();
    cmd->add_flag("--analytic", jv_analytic, "analytic column only");
    cmd->add_flag("--empirical", jv_empirical, "empirical columns only");
    cmd->add_flag("--both", jv_both, "analytic and empirical (default)");
    actions["jacobian-variance"] = [&] {
      const bool none = !jv_analytic && !jv_empirical;
      return cmd_jacobian_variance(f, jv_q_star, jv_both || none || jv_analytic, jv_both || none || jv_empirical);
    };
  }
  std::vector<double> c0s{0.2, 0.5, 0.8};
  std::optional<double> cd_q0;
  {
    auto& f = flags["correlation-dynamics"];
    f.gamma = 0.25;
    f.sigma_alpha2 = 8.0;
    f.sigma_b2 = 0.09;
    f.depth = 20;
    auto* cmd = app.add_subcommand("correlation-dynamics", "empirical and theoretical c^l");
    add_common(cmd, f);
    cmd->add_option("--c0", c0s, "comma-separated initial correlations")->delimiter(',')->capture_default_str();
    cmd->add_option("--q0", cd_q0, "initial length (default q*)");
    actions["correlation-dynamics"] = [&] { return cmd_correlation_dynamics(f, c0s, cd_q0); };
  }
  std::optional<double> gp_chi;
  {
    auto& f = flags["gradient-propagation"];
    f.gamma = 0.25;
    f.sigma_alpha2 = 4.0;
    f.sigma_b2 = 0.2;
    f.depth = 50;
    f.width = 500;
    auto* cmd = app.add_subcommand("gradient-propagation", "layerwise gradient norms against chi^(L-l)");
    add_common(cmd, f);
    cmd->add_option("--chi", gp_chi, "set the weight variance so that chi takes this value");
    actions["gradient-propagation"] = [&] { return cmd_gradient_propagation(f, gp_chi); };
  }
  double sd_q_star = 0.5;
  std::vector<int> sd_depths;
  int sd_trial = 0;
  {
    auto& f = flags["spectrum-dump"];
    f.gamma = 0.25;
    f.trials = 1;
    auto* cmd = app.add_subcommand("spectrum-dump", "singular values of J at each recorded depth");
    add_common(cmd, f);
    cmd->add_option("--q-star", sd_q_star, "equilibrium length on the critical line")->capture_default_str();
    cmd->add_option("--depths", sd_depths, "comma-separated depths (default all)")->delimiter(',');
    cmd->add_option("--trial", sd_trial, "trial index")->capture_default_str();
    actions["spectrum-dump"] = [&] { return cmd_spectrum_dump(f, sd_q_star, sd_depths, sd_trial); };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const Flags& f = flags.at(name);
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const Table table = actions.at(name)();
    emit(render(table, manifest(name, f, args), f.format), f.out, out);
  } catch (const NoConvergence& e) {
    err << "error: " << e.what() << " (iterations " << e.iterations() << ", last value "
        << format_number(e.last_value()) << ", residual " << format_number(e.residual()) << ")\n";
    return kExitNumerical;
  } catch (const NumericalOverflow& e) {
    err << "error: " << e.what() << " (layer " << e.layer() << ")\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

} // namespace eoc
