#include "chw/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>

#include "CLI11.hpp"

#include "chw/errors.hpp"
#include "chw/intermittency_stats.hpp"
#include "chw/json_util.hpp"
#include "chw/poisson_solver.hpp"
#include "chw/rng.hpp"
#include "chw/skew_products.hpp"
#include "chw/stopping_lab.hpp"
#include "chw/symbolic_dynamics.hpp"

namespace chw {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed streams of the secondary experiments inside one command.
constexpr std::uint64_t kEpisodeStream = std::uint64_t{1} << 40;
constexpr std::uint64_t kCensusStream = std::uint64_t{2} << 40;

struct Context {
  const RunConfig& cfg;
  const json& p;
  fs::path dir;
  std::vector<std::string> outputs;
  std::ostream& log;

  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return dir / name;
  }
  double real(const std::string& key, double fallback) const {
    return p.contains(key) ? double_from_json(p[key]) : fallback;
  }
  double real(const std::string& key) const {
    return double_from_json(require_key(p, key, cfg.command));
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    return p.contains(key) ? counts_from_json(p[key]).at(0) : fallback;
  }
  std::uint64_t count(const std::string& key) const {
    return counts_from_json(require_key(p, key, cfg.command)).at(0);
  }
};

json estimate_to_json(const Estimate& e) {
  return {{"value", e.value}, {"lower", e.lower}, {"upper", e.upper}, {"std_error", e.std_error}};
}

ClassReport validate_system(Context& ctx, const SkewSystem& sys) {
  const double C = ctx.real("C", 1.0);
  const double r0 = ctx.real("r0", 0.25);
  const auto grid = static_cast<std::size_t>(ctx.count("grid", 256));
  return validate_class_membership(sys, C, r0, grid);
}

void log_failed_checks(Context& ctx, const ClassReport& report) {
  for (const auto& c : report.checks)
    if (!c.passed)
      ctx.log << "check " << c.name << " failed: worst " << format_double(c.worst) << " at y = "
              << format_double(c.at_y) << ", x = " << format_double(c.at_x) << " (" << c.detail
              << ")\n";
}

int cmd_simulate(Context& ctx) {
  const SkewSystem sys = SkewSystem::from_json(require_key(ctx.p, "system", "simulate"));
  const ClassReport report = validate_system(ctx, sys);
  write_json(ctx.file("validation.json"), report.to_json());
  if (!report.passed()) {
    log_failed_checks(ctx, report);
    return kExitFailure;
  }
  const std::uint64_t steps = ctx.count("steps");
  const double x0 = ctx.real("x0");
  const SymbolPath path =
      sample_path(build_subshift(sys.m, sys.N), derive_seed(ctx.cfg.seed, 0), steps + sys.window);
  const Trajectory traj = iterate_trajectory(sys, path, x0, steps);
  CsvWriter csv(ctx.file("timeseries.csv"), {"step", "x_interval", "x_line"});
  for (std::size_t k = 0; k < traj.x_interval.size(); ++k)
    csv.row(k, traj.x_interval[k], traj.x_line[k]);
  if (traj.truncated) {
    ctx.log << "trajectory truncated: " << traj.diagnostic << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_encode(Context& ctx) {
  const int m = require_key(ctx.p, "m", "encode").get<int>();
  const int N = require_key(ctx.p, "N", "encode").get<int>();
  const auto length = static_cast<std::size_t>(ctx.count("length"));
  const bool exact = ctx.cfg.mode == ArithmeticMode::Rational;
  std::vector<SymbolPath> paths;
  std::vector<std::string> labels;
  for (const auto& point : require_key(ctx.p, "points", "encode")) {
    if (exact) {
      const Rational y = rational_from_json(point);
      paths.push_back(encode_point(y, m, N, length));
      labels.push_back(y.get_str());
    } else {
      const double y = double_from_json(point);
      paths.push_back(encode_point(y, m, N, length));
      labels.push_back(format_double(y));
    }
  }
  {
    std::ofstream out(ctx.file("paths.txt"), std::ios::binary);
    out << format_paths(paths);
  }
  CsvWriter csv(ctx.file("decoded.csv"), {"index", "point", "lower", "upper", "midpoint", "width"});
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const DecodedInterval d = decode_sequence(paths[i].symbols, m, N);
    if (exact)
      csv.row(i, labels[i], d.lower, d.upper, d.midpoint, d.width());
    else
      csv.row(i, labels[i], to_double(d.lower), to_double(d.upper), d.midpoint, d.width());
  }
  return kExitOk;
}

int cmd_poisson(Context& ctx) {
  const PoissonData pd = poisson_from_json(ctx.p, ctx.cfg.mode);
  {
    CsvWriter csv(ctx.file("delta.csv"), {"index", "delta"});
    for (std::size_t i = 0; i < pd.delta.size(); ++i) csv.row(i + 1, pd.delta[i]);
  }
  if (pd.exact) {
    CsvWriter csv(ctx.file("delta_exact.csv"), {"index", "delta"});
    for (std::size_t i = 0; i < pd.exact->delta.size(); ++i) csv.row(i + 1, pd.exact->delta[i]);
  }
  json bounds = bounds_to_json(pd);
  if (pd.chain->is_canonical()) {
    bounds["m"] = pd.chain->m();
    bounds["N"] = pd.chain->N();
  }
  write_json(ctx.file("bounds.json"), bounds);

  if (ctx.p.contains("growth")) {
    const json& g = ctx.p["growth"];
    const DisplacementSource src = displacement_from_json(ctx.p);
    if (!src.spec) throw UsageError("growth diagnostics need an 'xi' displacement spec");
    const GrowthTable table = growth_diagnostics(*src.spec, src.chain->m(),
                                                 require_key(g, "N_first", "growth").get<int>(),
                                                 require_key(g, "N_last", "growth").get<int>());
    write_json(ctx.file("growth.json"), table.to_json());
  }
  if (ctx.p.contains("martingale")) {
    const json& mj = ctx.p["martingale"];
    const MartingaleCheck mc = martingale_check(
        pd, counts_from_json(require_key(mj, "trials", "martingale")).at(0),
        counts_from_json(require_key(mj, "horizon", "martingale")).at(0), ctx.cfg.seed,
        ctx.cfg.threads);
    write_json(ctx.file("martingale.json"), {{"worst_z", mc.worst_z},
                                             {"worst_state", mc.worst_state},
                                             {"increments", mc.increments},
                                             {"z", mc.z}});
  }
  return kExitOk;
}

json oracle_json(const OracleResult<Rational>& r) {
  return {{"p_left", r.p_left.get_str()},
          {"expected_time", r.expected_time.get_str()},
          {"expected_time_left", r.expected_time_left.get_str()},
          {"p_left_value", to_double(r.p_left)},
          {"expected_time_value", to_double(r.expected_time)},
          {"expected_time_left_value", to_double(r.expected_time_left)},
          {"states", r.states}};
}

json oracle_json(const OracleResult<double>& r) {
  return {{"p_left_value", r.p_left},
          {"expected_time_value", r.expected_time},
          {"expected_time_left_value", r.expected_time_left},
          {"states", r.states}};
}

int cmd_escape(Context& ctx) {
  const json& wj = require_key(ctx.p, "walk", "escape");
  const WalkSpec walk = walk_from_json(wj, ctx.cfg.mode);
  const std::string problem = ctx.p.value("problem", std::string("compact"));
  const unsigned threads = ctx.cfg.threads;
  if (problem == "compact") {
    const json& iv = ctx.p.contains("interval") ? ctx.p["interval"] : ctx.p;
    const json& jA = require_key(iv, "A", "escape.interval");
    const json& jB = require_key(iv, "B", "escape.interval");
    const double A = double_from_json(jA), B = double_from_json(jB);
    const auto trials = static_cast<std::size_t>(ctx.count("trials"));
    const auto horizon = static_cast<std::size_t>(ctx.count("horizon"));
    const bool sweep = ctx.p.contains("alpha_list");
    const json alphas = sweep ? ctx.p["alpha_list"] : json::array({wj.value("alpha", json(0))});
    const bool oracle = ctx.p.value("oracle", false);
    if (oracle && (walk.is_chaotic() || !walk.increments_exact))
      throw ValidationError("the oracle needs a Markov walk with exact increments");
    CsvWriter csv(ctx.file("escape.csv"),
                  {"alpha", "trials", "horizon", "exits_left", "exits_right", "censored", "p_left",
                   "p_left_lower", "p_left_upper", "mean_time", "mean_time_std_error",
                   "mean_time_left", "mean_time_left_std_error", "doob_residual",
                   "doob_residual_std_error", "censoring_flag"});
    json rows = json::array(), oracles = json::array();
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      WalkSpec w = walk;
      if (!walk.is_chaotic()) w.alpha = double_from_json(alphas[k]);
      const std::uint64_t seed = sweep ? derive_seed(ctx.cfg.seed, k) : ctx.cfg.seed;
      const EscapeStats s = estimate_escape_compact(w, A, B, trials, horizon, seed, threads);
      csv.row(w.alpha, s.trials, s.horizon, s.exits_left, s.exits_right, s.censored, s.p_left.value,
              s.p_left.lower, s.p_left.upper, s.mean_time.value, s.mean_time.std_error,
              s.mean_time_left.value, s.mean_time_left.std_error, s.doob_residual.value,
              s.doob_residual.std_error, s.censoring_flag ? 1 : 0);
      json row = s.to_json();
      row["alpha"] = w.alpha;
      rows.push_back(row);
      for (const auto& warning : s.warnings) ctx.log << "warning: " << warning << '\n';
      if (oracle) {
        const Rational qA = rational_from_json(jA), qB = rational_from_json(jB);
        const Rational qx0 = wj.contains("x0") ? rational_from_json(wj["x0"]) : Rational(0);
        const Rational qalpha = rational_from_json(alphas[k]);
        json result =
            ctx.cfg.mode == ArithmeticMode::Rational
                ? oracle_json(gambler_ruin_oracle(qA, qB, qx0, *w.chain, *w.increments_exact, qalpha,
                                                  w.previous))
                : oracle_json(gambler_ruin_oracle_float(qA, qB, qx0, *w.chain, *w.increments_exact,
                                                        qalpha, w.previous));
        result["alpha"] = w.alpha;
        oracles.push_back(result);
      }
    }
    write_json(ctx.file("escape.json"), {{"A", A}, {"B", B}, {"rows", rows}});
    if (oracle) write_json(ctx.file("oracle.json"), {{"rows", oracles}});
  } else if (problem == "halfline") {
    const HalflineStats s = estimate_escape_halfline(
        walk, ctx.real("B"), static_cast<std::size_t>(ctx.count("trials")),
        counts_from_json(require_key(ctx.p, "horizons", "escape")), ctx.cfg.seed, threads);
    write_json(ctx.file("halfline.json"), s.to_json());
    CsvWriter csv(ctx.file("halfline.csv"),
                  {"horizon", "escaped", "escaped_lower", "escaped_upper", "mean_escapees",
                   "restricted_mean", "restricted_mean_std_error"});
    for (const auto& r : s.rows)
      csv.row(r.horizon, r.escaped.value, r.escaped.lower, r.escaped.upper, r.mean_escapees.value,
              r.restricted_mean.value, r.restricted_mean.std_error);
  } else if (problem == "stay") {
    const StayEstimate s =
        estimate_stay_probability(walk, ctx.real("B"), static_cast<std::size_t>(ctx.count("trials")),
                                  static_cast<std::size_t>(ctx.count("horizon")), ctx.cfg.seed, threads);
    write_json(ctx.file("stay.json"), {{"p_stay", estimate_to_json(s.p_stay)},
                                       {"p_stay_doubled", estimate_to_json(s.p_stay_doubled)},
                                       {"stable", s.stable},
                                       {"warnings", s.warnings}});
    for (const auto& w : s.warnings) ctx.log << "warning: " << w << '\n';
  } else {
    throw UsageError("problem must be \"compact\", \"halfline\" or \"stay\"");
  }
  if (ctx.p.contains("witness")) {
    const json& w = ctx.p["witness"];
    const DisplacementSource src = displacement_from_json(wj);
    const Witness found = recurrence_witness_search(
        *src.chain, src.values, double_from_json(require_key(w, "L", "witness")),
        static_cast<std::size_t>(counts_from_json(require_key(w, "max_len", "witness")).at(0)));
    write_json(ctx.file("witness.json"), found.to_json());
  }
  return kExitOk;
}

json tilt_json(const TiltRates& t) {
  return {{"r_sub", t.r_sub},
          {"r_super", t.r_super},
          {"predicted_sub", t.predicted_sub},
          {"predicted_super", t.predicted_super},
          {"taylor_regime", t.taylor_regime}};
}

int cmd_scaling(Context& ctx) {
  const PoissonData pd = poisson_from_json(ctx.p, ctx.cfg.mode);
  ScalingOptions opts;
  if (ctx.p.contains("alphas")) opts.alphas = doubles_from_json(ctx.p["alphas"]);
  opts.A = ctx.real("A", opts.A);
  opts.B = ctx.real("B", opts.B);
  if (ctx.p.contains("zero_drift_A")) opts.zero_drift_A = doubles_from_json(ctx.p["zero_drift_A"]);
  opts.trials = static_cast<std::size_t>(ctx.count("trials", opts.trials));
  opts.horizon = static_cast<std::size_t>(ctx.count("horizon", opts.horizon));
  opts.seed = ctx.cfg.seed;
  opts.threads = ctx.cfg.threads;
  const ScalingTable table = drift_scaling_experiment(pd, opts);

  json summary = table.to_json();
  summary["bounds"] = bounds_to_json(pd);
  json tilts = json::array();
  for (const double alpha : opts.alphas) {
    json t = tilt_json(exponential_tilt_rates(pd, alpha));
    t["alpha"] = alpha;
    tilts.push_back(t);
  }
  summary["tilt_rates"] = tilts;

  CsvWriter csv(ctx.file("scaling.csv"),
                {"kind", "alpha", "A", "p_A", "mean_time", "mean_time_left", "mean_time_B",
                 "normalized_p_A", "alpha_mean_time_B", "p_A_times_A", "time_left_over_A2",
                 "censored"});
  auto emit = [&](const char* kind, const std::vector<ScalingRow>& rows) {
    for (const auto& r : rows)
      csv.row(kind, r.alpha, r.A, r.p_A, r.mean_time, r.mean_time_left, r.mean_time_B,
              r.normalized_p_A, r.alpha_mean_time_B, r.p_A_times_A, r.time_left_over_A2, r.censored);
  };
  emit("drift", table.drift_rows);
  emit("zero_drift", table.zero_drift_rows);

  if (ctx.p.contains("negative_alphas")) {
    const std::vector<double> alphas = doubles_from_json(ctx.p["negative_alphas"]);
    const auto stay_horizon = static_cast<std::size_t>(ctx.count("stay_horizon", opts.horizon));
    CsvWriter stay(ctx.file("stay.csv"), {"alpha", "p_stay", "p_stay_lower", "p_stay_upper",
                                          "p_stay_doubled", "p_stay_over_alpha", "stable"});
    json rows = json::array();
    std::uint64_t stream = 1000;
    for (const double alpha : alphas) {
      const WalkSpec walk = WalkSpec::zeta_walk(pd, alpha);
      const StayEstimate s = estimate_stay_probability(walk, opts.B, opts.trials, stay_horizon,
                                                       derive_seed(opts.seed, stream++), opts.threads);
      stay.row(alpha, s.p_stay.value, s.p_stay.lower, s.p_stay.upper, s.p_stay_doubled.value,
               s.p_stay.value / std::fabs(alpha), s.stable ? 1 : 0);
      rows.push_back({{"alpha", alpha},
                      {"p_stay", estimate_to_json(s.p_stay)},
                      {"p_stay_doubled", estimate_to_json(s.p_stay_doubled)},
                      {"stable", s.stable}});
    }
    summary["stay_rows"] = rows;
  }
  write_json(ctx.file("scaling.json"), summary);
  return kExitOk;
}

int cmd_birkhoff(Context& ctx) {
  const SkewSystem sys = SkewSystem::from_json(require_key(ctx.p, "system", "birkhoff"));
  const double x0 = ctx.real("x0");
  FiberInterval U;
  if (ctx.p.contains("U")) {
    const std::vector<double> u = doubles_from_json(ctx.p["U"]);
    if (u.size() != 2) throw UsageError("U must be [lower, upper]");
    U = {u[0], u[1]};
  }
  const std::uint64_t n = ctx.count("n");
  const auto samples = static_cast<std::size_t>(ctx.count("samples", 64));
  const OccupationCurve curve = birkhoff_occupation(sys, U, x0, n, samples, ctx.cfg.seed, ctx.cfg.threads);
  json summary;
  {
    CsvWriter csv(ctx.file("occupation.csv"), {"n", "fraction_median", "fraction_q25", "fraction_q75"});
    json points = json::array();
    for (const auto& pt : curve.points) {
      csv.row(pt.n, pt.median, pt.q25, pt.q75);
      points.push_back({{"n", pt.n},
                        {"median", pt.median},
                        {"q25", pt.q25},
                        {"q75", pt.q75},
                        {"laminar0_median", pt.laminar0_median},
                        {"laminar1_median", pt.laminar1_median},
                        {"transitions_median", pt.transitions_median}});
    }
    summary["occupation"] = points;
    std::size_t saturated = 0;
    for (const bool s : curve.saturated) saturated += s;
    summary["saturated_samples"] = saturated;
  }
  if (ctx.p.contains("episodes")) {
    const json& e = ctx.p["episodes"];
    const double eps = e.contains("epsilon") ? double_from_json(e["epsilon"]) : 0.01;
    const double L = e.contains("L") ? double_from_json(e["L"]) : conjugate_to_line(1.0 - eps).value;
    const std::uint64_t steps = e.contains("n") ? counts_from_json(e["n"]).at(0) : n;
    const EpisodeTrace trace =
        simulate_episodes(sys, x0, steps, L, derive_seed(ctx.cfg.seed, kEpisodeStream));
    CsvWriter csv(ctx.file("episodes.csv"), {"length", "count", "kind"});
    auto emit = [&](const std::map<std::size_t, std::uint64_t>& hist, EpisodeKind kind) {
      for (const auto& [length, count] : hist) csv.row(length, count, episode_kind_name(kind));
    };
    emit(trace.histogram_laminar0, EpisodeKind::Laminar0);
    emit(trace.histogram_laminar1, EpisodeKind::Laminar1);
    emit(trace.histogram_burst, EpisodeKind::Burst);
    summary["episodes"] = {{"L", L},
                           {"steps", steps},
                           {"count", trace.episodes.size()},
                           {"laminar_to_burst", trace.laminar_to_burst},
                           {"max_laminar_length", trace.max_laminar_length()},
                           {"median_laminar_length", trace.median_laminar_length()}};
  }
  if (ctx.p.contains("census")) {
    const json& c = ctx.p["census"];
    const HalflineStats s = escape_time_census(
        sys, double_from_json(require_key(c, "p", "census")),
        double_from_json(require_key(c, "x_start", "census")),
        static_cast<std::size_t>(counts_from_json(require_key(c, "trials", "census")).at(0)),
        counts_from_json(require_key(c, "horizons", "census")),
        derive_seed(ctx.cfg.seed, kCensusStream), ctx.cfg.threads);
    CsvWriter csv(ctx.file("census.csv"), {"horizon", "escaped", "escaped_lower", "escaped_upper",
                                           "restricted_mean", "restricted_mean_std_error"});
    for (const auto& r : s.rows)
      csv.row(r.horizon, r.escaped.value, r.escaped.lower, r.escaped.upper, r.restricted_mean.value,
              r.restricted_mean.std_error);
    summary["census"] = s.to_json();
  }
  write_json(ctx.file("birkhoff.json"), summary);
  return kExitOk;
}

int cmd_validate(Context& ctx) {
  const SkewSystem sys = SkewSystem::from_json(require_key(ctx.p, "system", "validate"));
  const ClassReport report = validate_system(ctx, sys);
  json out = report.to_json();
  const auto samples = static_cast<std::size_t>(ctx.count("lyapunov_samples", 10000));
  const LyapunovEstimate ly = lyapunov_exponents(sys, samples, ctx.cfg.seed);
  out["lyapunov"] = {{"L0", ly.L0},
                     {"L1", ly.L1},
                     {"L0_quadrature_error", ly.L0_quadrature_error},
                     {"L1_quadrature_error", ly.L1_quadrature_error},
                     {"L0_monte_carlo", ly.L0_monte_carlo},
                     {"L1_monte_carlo", ly.L1_monte_carlo},
                     {"L0_std_error", ly.L0_std_error},
                     {"L1_std_error", ly.L1_std_error}};
  write_json(ctx.file("validation.json"), out);
  if (!report.passed()) {
    log_failed_checks(ctx, report);
    return kExitFailure;
  }
  return kExitOk;
}

const std::map<std::string, std::function<int(Context&)>>& commands() {
  static const std::map<std::string, std::function<int(Context&)>> table = {
      {"simulate", cmd_simulate}, {"encode", cmd_encode},   {"poisson", cmd_poisson},
      {"escape", cmd_escape},     {"scaling", cmd_scaling}, {"birkhoff", cmd_birkhoff},
      {"validate", cmd_validate}};
  return table;
}

const std::map<std::string, std::string>& summaries() {
  static const std::map<std::string, std::string> table = {
      {"simulate", "iterate a skew product and write its fiber time series"},
      {"encode", "symbolic codes of points and the intervals they decode to"},
      {"poisson", "solve the Poisson equation; Delta, bounds, growth, martingale check"},
      {"escape", "escape times from compact intervals, half-lines, stay probabilities"},
      {"scaling", "drift scaling table and negative-drift stay probabilities"},
      {"birkhoff", "occupation fractions, laminar episodes, escape-time census"},
      {"validate", "class-membership report and fiber Lyapunov exponents"}};
  return table;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

int run_command(const RunConfig& cfg, std::ostream& log) {
  const auto it = commands().find(cfg.command);
  if (it == commands().end()) throw UsageError("unknown command '" + cfg.command + "'");
  fs::create_directories(cfg.out);
  Context ctx{cfg, cfg.params, cfg.out, {}, log};
  const int code = it->second(ctx);
  const json manifest = {{"command", cfg.command},
                         {"config", cfg.effective()},
                         {"config_hash", hex64(cfg.hash())},
                         {"seed", cfg.seed},
                         {"mode", mode_name(cfg.mode)},
                         {"version", kVersion},
                         {"exit_code", code},
                         {"outputs", ctx.outputs}};
  write_json(cfg.out / "manifest.json", manifest);
  return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"chaotic walks, Poisson solvers and escape-time experiments", "chwalk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string mode, out_dir;
  unsigned threads = 0;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : commands()) {
    CLI::App* sub = app.add_subcommand(name, summaries().at(name));
    sub->add_option("--config", config_path, "JSON config or a manifest.json from an earlier run")
        ->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--mode", mode, "arithmetic mode")->check(CLI::IsMember({"rational", "float"}));
    sub->add_option("--threads", threads, "worker cap; 0 = hardware concurrency");
    subs[name] = sub;
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  std::string command;
  Overrides ov;
  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    command = name;
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--mode")) ov.mode = parse_mode(mode);
    if (sub->count("--threads")) ov.threads = threads;
    if (sub->count("--out")) ov.out = out_dir;
  }

  try {
    const RunConfig cfg = load_run_config(command, config_path, ov);
    const int code = run_command(cfg, err);
    if (code == kExitOk) out << "wrote " << cfg.out.string() << "/manifest.json\n";
    return code;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "usage error: malformed config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace chw
