#include "mfk/harness.hpp"

#include "mfk/io.hpp"
#include "mfk/oracles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mfk {

Experiment parse_experiment(const std::string& name) {
  if (name == "solve-mild") return Experiment::solve_mild;
  if (name == "simulate-frozen") return Experiment::simulate_frozen;
  if (name == "simulate-mckean") return Experiment::simulate_mckean;
  if (name == "validate") return Experiment::validate;
  if (name == "sweep") return Experiment::sweep;
  throw ConfigError("unknown experiment '" + name +
                    "' (expected solve-mild, simulate-frozen, simulate-mckean, validate or sweep)");
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::solve_mild: return "solve-mild";
    case Experiment::simulate_frozen: return "simulate-frozen";
    case Experiment::simulate_mckean: return "simulate-mckean";
    case Experiment::validate: return "validate";
    case Experiment::sweep: return "sweep";
  }
  return "?";
}

void RunConfig::validate() const {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end())
    throw ConfigError("problem.preset: unknown preset '" + preset + "'");
  if (std::abs(grid.horizon - params.horizon) > 1e-12) throw ConfigError("grid horizon must equal problem.horizon");
  if (grid.space.dimension != params.dimension) throw ConfigError("grid dimension must equal problem.dimension");
  grid.validate();
  if (!(solver.tol > 0.0) || solver.max_iter < 1) throw ConfigError("solver.tol and solver.max_iter must be positive");
  if (particles < 1 || !(particle_dt > 0.0) || seeds < 1 || bandwidth < 0.0)
    throw ConfigError("particles.count, particles.dt and particles.seeds must be positive");
  for (int n : sweep_counts)
    if (n < 1) throw ConfigError("sweep.counts must be positive");
  if (!(tol_l1 > 0.0 && tol_residual > 0.0 && tol_mass > 0.0 && tol_z > 0.0 && tol_mckean_l1 > 0.0) ||
      !(tol_pass_fraction > 0.0 && tol_pass_fraction <= 1.0))
    throw ConfigError("tolerances must be positive (pass_fraction in (0, 1])");
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Parser {
  std::string where;

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(where + ": " + message); }

  double number(const std::string& v) const {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) fail("expected a number, got '" + v + "'");
    return out;
  }
  double positive(const std::string& v) const {
    const double x = number(v);
    if (!(x > 0.0)) fail("must be positive");
    return x;
  }
  long integer(const std::string& v) const {
    long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) fail("expected an integer, got '" + v + "'");
    return out;
  }
  int positive_int(const std::string& v) const {
    const long x = integer(v);
    if (x < 1 || x > 1'000'000'000) fail("must be a positive integer");
    return static_cast<int>(x);
  }
};

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig c;
  bool z_max_set = false;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  std::map<std::string, int> seen;
  using Setter = std::function<void(const Parser&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"experiment", [&](const Parser& p, const std::string& v) {
         try {
           c.experiment = parse_experiment(v);
         } catch (const ConfigError& e) {
           p.fail(e.what());
         }
       }},
      {"problem.preset", [&](const Parser&, const std::string& v) { c.preset = v; }},
      {"problem.nu", [&](const Parser& p, const std::string& v) { c.params.nu = p.positive(v); }},
      {"problem.lambda", [&](const Parser& p, const std::string& v) { c.params.lambda = p.number(v); }},
      {"problem.u0_mean", [&](const Parser& p, const std::string& v) { c.params.u0_mean = p.number(v); }},
      {"problem.u0_variance", [&](const Parser& p, const std::string& v) { c.params.u0_variance = p.positive(v); }},
      {"problem.z_max", [&](const Parser& p, const std::string& v) {
         c.params.z_max = p.positive(v);
         z_max_set = true;
       }},
      {"problem.dimension", [&](const Parser& p, const std::string& v) { c.params.dimension = p.positive_int(v); }},
      {"problem.horizon", [&](const Parser& p, const std::string& v) { c.params.horizon = p.positive(v); }},
      {"grid.radius", [&](const Parser& p, const std::string& v) { c.grid.space.radius = p.positive(v); }},
      {"grid.nodes", [&](const Parser& p, const std::string& v) { c.grid.space.nodes_per_axis = p.positive_int(v); }},
      {"grid.time_steps", [&](const Parser& p, const std::string& v) { c.grid.time_steps = p.positive_int(v); }},
      {"grid.slab_width", [&](const Parser& p, const std::string& v) {
         c.grid.slab_width = p.number(v);
         if (c.grid.slab_width < 0.0) p.fail("must be >= 0 (0 selects automatically)");
       }},
      {"solver.tol", [&](const Parser& p, const std::string& v) { c.solver.tol = p.positive(v); }},
      {"solver.max_iter", [&](const Parser& p, const std::string& v) { c.solver.max_iter = p.positive_int(v); }},
      {"solver.time_rule", [&](const Parser& p, const std::string& v) {
         if (v == "linear") c.solver.time_rule = TimeRule::linear;
         else if (v == "left_point") c.solver.time_rule = TimeRule::left_point;
         else p.fail("expected linear or left_point");
       }},
      {"particles.count", [&](const Parser& p, const std::string& v) { c.particles = p.positive_int(v); }},
      {"particles.dt", [&](const Parser& p, const std::string& v) { c.particle_dt = p.positive(v); }},
      {"particles.bandwidth", [&](const Parser& p, const std::string& v) {
         c.bandwidth = p.number(v);
         if (c.bandwidth < 0.0) p.fail("must be >= 0 (0 selects Silverman)");
       }},
      {"particles.seed", [&](const Parser& p, const std::string& v) {
         const long s = p.integer(v);
         if (s < 0) p.fail("must be >= 0");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"particles.seeds", [&](const Parser& p, const std::string& v) { c.seeds = p.positive_int(v); }},
      {"particles.kde", [&](const Parser& p, const std::string& v) {
         if (v == "binned") c.kde = KdeMethod::binned;
         else if (v == "direct") c.kde = KdeMethod::direct;
         else p.fail("expected binned or direct");
       }},
      {"particles.weight_rule", [&](const Parser& p, const std::string& v) {
         if (v == "left_point") c.weight_rule = WeightRule::left_point;
         else if (v == "trapezoid") c.weight_rule = WeightRule::trapezoid;
         else p.fail("expected left_point or trapezoid");
       }},
      {"sweep.counts", [&](const Parser& p, const std::string& v) {
         c.sweep_counts.clear();
         std::istringstream items(v);
         std::string item;
         while (std::getline(items, item, ',')) c.sweep_counts.push_back(p.positive_int(trim(item)));
         if (c.sweep_counts.empty()) p.fail("needs at least one count");
       }},
      {"tolerance.l1", [&](const Parser& p, const std::string& v) { c.tol_l1 = p.positive(v); }},
      {"tolerance.residual", [&](const Parser& p, const std::string& v) { c.tol_residual = p.positive(v); }},
      {"tolerance.mass", [&](const Parser& p, const std::string& v) { c.tol_mass = p.positive(v); }},
      {"tolerance.z", [&](const Parser& p, const std::string& v) { c.tol_z = p.positive(v); }},
      {"tolerance.pass_fraction", [&](const Parser& p, const std::string& v) { c.tol_pass_fraction = p.positive(v); }},
      {"tolerance.mckean_l1", [&](const Parser& p, const std::string& v) { c.tol_mckean_l1 = p.positive(v); }},
      {"output.dir", [&](const Parser&, const std::string& v) { c.output = v; }},
  };
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const Parser where{source + ":" + std::to_string(number)};
    const auto eq = line.find('=');
    if (eq == std::string::npos) where.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Parser parser{where.where + ": key '" + key + "'"};
    const auto it = setters.find(key);
    if (it == setters.end()) parser.fail("unknown key");
    if (value.empty()) parser.fail("missing value");
    if (auto [pos, fresh] = seen.emplace(key, number); !fresh)
      parser.fail("duplicate key (first set on line " + std::to_string(pos->second) + ")");
    it->second(parser, value);
  }
  (void)z_max_set;
  c.grid.horizon = c.params.horizon;
  c.grid.space.dimension = c.params.dimension;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

double ComparisonReport::max_l1() const { return l1.empty() ? 0.0 : *std::max_element(l1.begin(), l1.end()); }
double ComparisonReport::max_linf() const { return linf.empty() ? 0.0 : *std::max_element(linf.begin(), linf.end()); }

bool ComparisonReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

namespace {

std::string checks_text(const std::vector<Check>& checks) {
  std::ostringstream out;
  for (const auto& c : checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << format_number(c.value)
        << " tolerance=" << format_number(c.tolerance) << '\n';
  return out.str();
}

Check at_most(std::string name, double value, double tolerance) {
  return {std::move(name), value, tolerance, std::isfinite(value) && value <= tolerance};
}

}  // namespace

std::string ComparisonReport::to_text() const {
  std::ostringstream out;
  out << "max_l1 = " << format_number(max_l1()) << '\n';
  out << "max_linf = " << format_number(max_linf()) << '\n';
  out << checks_text(checks);
  return out.str();
}

ComparisonReport compare_fields(const Field& a, const Field& b) {
  if (a.space() != b.space() || a.times() != b.times())
    throw std::invalid_argument("compare_fields: the fields live on different grids");
  ComparisonReport r;
  Field diff(a.space(), a.times());
  diff.values() = a.values() - b.values();
  for (int k = 0; k < diff.levels(); ++k) {
    r.times.push_back(diff.times()[k]);
    r.l1.push_back(diff.l1_norm(k));
    r.linf.push_back(diff.sup_norm(k));
  }
  return r;
}

std::string RunOutcome::summary() const {
  return checks_text(checks) + (exit_status == 0 ? "result: PASS\n" : "result: FAIL\n");
}

void configure_threads(std::optional<int> flag) {
  int threads = 0;
  if (flag) {
    threads = *flag;
  } else if (const char* env = std::getenv("MFK_THREADS")) {
    threads = std::atoi(env);
  }
  if (flag && threads < 1) throw ConfigError("--threads must be >= 1");
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif
}

namespace {

struct Context {
  const RunConfig& config;
  RunOutcome& outcome;

  std::filesystem::path file(const std::string& name) {
    auto path = config.output / name;
    outcome.files.push_back(path);
    return path;
  }
  void check(Check c) { outcome.checks.push_back(std::move(c)); }
};

void write_comparison(Context& ctx, const std::string& name, const ComparisonReport& r) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < r.times.size(); ++k) rows.push_back({r.times[k], r.l1[k], r.linf[k]});
  write_table_csv(ctx.file(name), {"t", "l1", "linf"}, rows);
}

MildSolution solve_mild(Context& ctx, const ProblemSpec& problem) {
  const MildSolver solver(problem, ctx.config.grid, ctx.config.solver);
  MildSolution sol = solver.solve();
  write_field_csv(ctx.file("field.csv"), sol.u);
  write_text(ctx.file("report.txt"), sol.report.to_text());
  ctx.check({"mild_converged", sol.report.converged ? 1.0 : 0.0, 1.0, sol.report.converged});
  ctx.check({"ball_preserved", std::max(sol.report.max_iterate_l1, sol.report.max_iterate_sup), sol.report.ball,
             sol.report.ball_preserved()});
  return sol;
}

// Closed-form or reference field for presets that have one.
std::optional<Field> reference_field(const RunConfig& config, const ProblemSpec& problem) {
  const auto& p = config.params;
  if (config.preset == "heat" || config.preset == "exponential_growth") {
    const double lambda = config.preset == "heat" ? 0.0 : p.lambda;
    Field ref(config.grid.space, level_times(config.grid));
    Eigen::VectorXd x(p.dimension);
    for (int k = 0; k < ref.levels(); ++k) {
      const double t = ref.times()[k];
      for (Eigen::Index j = 0; j < config.grid.space.size(); ++j) {
        config.grid.space.node(j, x);
        double v = exp_mass_oracle(lambda, t);
        for (int a = 0; a < p.dimension; ++a) v *= heat_oracle(p.u0_mean, p.u0_variance, p.nu, t, x[a]);
        ref.values()(k, j) = v;
      }
    }
    return ref;
  }
  if (config.preset == "burgers") return burgers_fd_reference(problem.initial, p.nu, config.grid);
  return std::nullopt;
}

std::vector<double> quarter_times(double horizon) { return {0.25 * horizon, 0.5 * horizon, horizon}; }

void run_validate(Context& ctx, const ProblemSpec& problem) {
  const RunConfig& c = ctx.config;
  const MildSolution sol = solve_mild(ctx, problem);
  if (auto ref = reference_field(c, problem)) {
    write_field_csv(ctx.file("reference.csv"), *ref);
    ComparisonReport r = compare_fields(sol.u, *ref);
    write_comparison(ctx, "comparison.csv", r);
    ctx.check(at_most("reference_l1", r.max_l1(), c.tol_l1));
  }
  const double lambda = c.preset == "exponential_growth" ? c.params.lambda : 0.0;
  if (c.preset != "logistic_fkpp") {
    double worst = 0.0;
    for (int k = 0; k < sol.u.levels(); ++k)
      worst = std::max(worst, std::abs(sol.u.mass(k) - exp_mass_oracle(lambda, sol.u.times()[k])));
    ctx.check(at_most("mass_law", worst, c.tol_mass));
  }
  std::vector<std::vector<double>> rows;
  double worst = 0.0;
  const auto basket = test_basket(problem.dimension);
  for (double t : quarter_times(problem.horizon)) {
    if (sol.u.level_at(t) < 0) continue;
    for (std::size_t i = 0; i < basket.size(); ++i) {
      const double r = weak_residual(sol.u, basket[i], t, problem);
      worst = std::max(worst, r);
      rows.push_back({t, static_cast<double>(i), r});
    }
  }
  write_table_csv(ctx.file("weak_residuals.csv"), {"t", "phi", "residual"}, rows);
  ctx.check(at_most("weak_residual", worst, c.tol_residual));
}

void run_frozen(Context& ctx, const ProblemSpec& problem) {
  const RunConfig& c = ctx.config;
  const MildSolution sol = solve_mild(ctx, problem);
  const auto basket = test_basket(problem.dimension);
  const auto times = quarter_times(problem.horizon);
  std::vector<std::vector<double>> rows;
  int pass = 0, total = 0;
  for (int s = 0; s < c.seeds; ++s) {
    ParticleOptions po;
    po.particles = c.particles;
    po.dt = c.particle_dt;
    po.seed = c.seed + static_cast<std::uint64_t>(s);
    po.record_times = times;
    po.weight_rule = c.weight_rule;
    const ParticleEnsemble ens = simulate_frozen(sol.u, problem, po);
    for (double t : times) {
      const int k = sol.u.level_at(t);
      if (k < 0) throw ConfigError("simulate-frozen: T/4, T/2 and T must be grid levels");
      for (std::size_t i = 0; i < basket.size(); ++i) {
        Eigen::VectorXd phi(c.grid.space.size()), x(problem.dimension);
        for (Eigen::Index j = 0; j < phi.size(); ++j) {
          c.grid.space.node(j, x);
          phi[j] = basket[i].value(x);
        }
        const double reference = sol.u.weights().dot(phi.cwiseProduct(sol.u.level(k)));
        const Estimate e = weighted_functional(ens, basket[i].value, t);
        const double z = e.standard_error > 0.0 ? (e.value - reference) / e.standard_error
                                                : (e.value == reference ? 0.0 : INFINITY);
        ++total;
        if (std::abs(z) <= c.tol_z) ++pass;
        rows.push_back({static_cast<double>(po.seed), t, static_cast<double>(i), e.value, e.standard_error, reference, z});
      }
    }
  }
  write_table_csv(ctx.file("functionals.csv"), {"seed", "t", "phi", "estimate", "standard_error", "reference", "z"},
                  rows);
  const double fraction = static_cast<double>(pass) / total;
  ctx.check({"representation_pass_fraction", fraction, c.tol_pass_fraction, fraction >= c.tol_pass_fraction});
}

SelfConsistentResult mckean(const RunConfig& c, const ProblemSpec& problem, int particles, std::uint64_t seed) {
  SelfConsistentOptions o;
  o.particles.particles = particles;
  o.particles.dt = c.particle_dt;
  o.particles.seed = seed;
  o.particles.record_times = {problem.horizon};
  o.particles.weight_rule = c.weight_rule;
  o.bandwidth = c.bandwidth;
  o.kde = c.kde;
  return solve_selfconsistent(problem, c.grid, o);
}

void run_mckean(Context& ctx, const ProblemSpec& problem) {
  const RunConfig& c = ctx.config;
  const MildSolution sol = solve_mild(ctx, problem);
  const SelfConsistentResult r = mckean(c, problem, c.particles, c.seed);
  write_field_csv(ctx.file("mckean_field.csv"), r.u);
  const ComparisonReport cmp = compare_fields(r.u, sol.u);
  write_comparison(ctx, "comparison.csv", cmp);
  ctx.check(at_most("mckean_l1_at_T", cmp.l1.back(), c.tol_mckean_l1));
}

void run_sweep(Context& ctx, const ProblemSpec& problem) {
  const RunConfig& c = ctx.config;
  const MildSolution sol = solve_mild(ctx, problem);
  std::vector<std::vector<double>> rows, summary;
  std::vector<double> medians;
  for (int n : c.sweep_counts) {
    std::vector<double> errors;
    for (int s = 0; s < c.seeds; ++s) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(s);
      const SelfConsistentResult r = mckean(c, problem, n, seed);
      const double l1 = compare_fields(r.u, sol.u).l1.back();
      errors.push_back(l1);
      rows.push_back({static_cast<double>(n), static_cast<double>(seed), l1});
    }
    std::sort(errors.begin(), errors.end());
    const std::size_t m = errors.size();
    const double median = m % 2 ? errors[m / 2] : 0.5 * (errors[m / 2 - 1] + errors[m / 2]);
    medians.push_back(median);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < medians.size(); ++i) monotone = monotone && medians[i] <= medians[i - 1];
  for (std::size_t i = 0; i < medians.size(); ++i)
    summary.push_back({static_cast<double>(c.sweep_counts[i]), medians[i], monotone ? 1.0 : 0.0});
  write_table_csv(ctx.file("sweep.csv"), {"N", "seed", "l1"}, rows);
  write_table_csv(ctx.file("sweep_summary.csv"), {"N", "median_l1", "monotone"}, summary);
  ctx.check({"sweep_monotone_nonincreasing", monotone ? 1.0 : 0.0, 1.0, monotone});
}

}  // namespace

RunOutcome run(const RunConfig& config) {
  config.validate();
  if (!config.experiment) throw ConfigError("no experiment selected (set 'experiment' or use a subcommand)");
  RunOutcome outcome;
  Context ctx{config, outcome};
  const ProblemSpec problem = preset(config.preset, config.params);
  switch (*config.experiment) {
    case Experiment::solve_mild: solve_mild(ctx, problem); break;
    case Experiment::validate: run_validate(ctx, problem); break;
    case Experiment::simulate_frozen: run_frozen(ctx, problem); break;
    case Experiment::simulate_mckean: run_mckean(ctx, problem); break;
    case Experiment::sweep: run_sweep(ctx, problem); break;
  }
  const bool ok = std::all_of(outcome.checks.begin(), outcome.checks.end(), [](const Check& c) { return c.pass; });
  outcome.exit_status = ok ? 0 : 1;
  write_text(ctx.file("checks.txt"), outcome.summary());
  return outcome;
}

}  // namespace mfk
