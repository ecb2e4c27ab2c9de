#ifndef SBD_TOOLS_COMMANDS_HPP
#define SBD_TOOLS_COMMANDS_HPP

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "sbd/discretized_chain.hpp"
#include "sbd/experiment_config.hpp"
#include "sbd/heuristics.hpp"
#include "sbd/io.hpp"
#include "sbd/queues.hpp"
#include "sbd/simulator.hpp"
#include "sbd/spatial_stats.hpp"
#include "sbd/statistics.hpp"

namespace sbd::cli {

namespace fs = std::filesystem;

struct Options {
  std::optional<std::string> config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
};

/// Loaded config with the command-line seed applied.
struct Context {
  ExperimentConfig config;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  fs::path out;

  std::string header() const {
    return "# config_hash=" + config.hash_hex() + " seed=" + std::to_string(seed);
  }

  std::ofstream open(const std::string& name) const {
    auto f = io::open_out((out / name).string());
    f << header() << '\n';
    return f;
  }
};

inline Context make_context(const Options& opt) {
  Context ctx;
  if (opt.config_path) ctx.config = ExperimentConfig::load(*opt.config_path);
  if (opt.seed) ctx.config.set("simulation", "seed", std::to_string(*opt.seed));
  ctx.seed = ctx.config.get_u64("simulation", "seed", 1);
  ctx.jobs = std::max(1u, opt.jobs);
  ctx.out = opt.out_dir;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + opt.out_dir);
  return ctx;
}

/// Runs fn(0..n-1) on up to `jobs` threads; results come back in index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned threads = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string fixed(double v) { return io::num(v); }

// --- simulate -------------------------------------------------------------------

inline void write_run(const Context& ctx, const RunMetrics& m, const std::string& suffix) {
  auto j = io::metrics_json(m);
  j["config_hash"] = ctx.config.hash_hex();
  auto out = io::open_out((ctx.out / ("metrics" + suffix + ".json")).string());
  out << j.dump(1) << '\n';
  if (!m.events.empty()) {
    auto ev = ctx.open("events" + suffix + ".csv");
    io::write_events(ev, m.events);
  }
  for (std::size_t k = 0; k < m.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot%s_%04zu.csv", suffix.c_str(), k);
    auto snap = ctx.open(name);
    snap << "# time=" << fixed(m.snapshot_times[k]) << '\n';
    io::write_snapshot(snap, m.snapshots[k]);
  }
}

inline int cmd_simulate(const Context& ctx) {
  SimulationConfig base = ctx.config.simulation();
  base.seed = ctx.seed;
  const auto reps = ctx.config.get_u64("simulation", "replications", 1);
  if (reps < 1) throw ConfigError("replications must be >= 1");
  const auto runs = parallel_map<RunMetrics>(reps, ctx.jobs, [&](std::size_t r) {
    SimulationConfig cfg = base;
    cfg.stream = base.stream + r;
    return run(cfg);
  });
  for (std::size_t r = 0; r < runs.size(); ++r) {
    write_run(ctx, runs[r], reps == 1 ? "" : "_rep" + std::to_string(r));
  }
  for (const auto& m : runs) {
    std::cerr << "beta_hat=" << m.beta_hat << " +- " << m.beta_hat_se << " W_hat=" << m.W_hat
              << " deaths=" << m.deaths << (m.capped ? " (capped)" : "") << '\n';
  }
  return 0;
}

// --- heuristics -----------------------------------------------------------------

struct SweepRow {
  double lambda = 0.0;
  HeuristicSolution f;
  HeuristicSolution s;
  double beta_l = 0.0;
};

inline std::vector<SweepRow> heuristic_sweep(const SimulationConfig& sim,
                                             const std::vector<double>& lambdas, double tol,
                                             unsigned jobs) {
  const PoissonHeuristic poisson(sim.channel, sim.link_length, sim.domain, tol);
  return parallel_map<SweepRow>(lambdas.size(), jobs, [&](std::size_t i) {
    SweepRow row;
    row.lambda = lambdas[i];
    row.beta_l = light_traffic_beta(row.lambda, sim.channel, sim.link_length);
    row.f = poisson.solve(row.lambda);
    if (row.lambda < poisson.lambda_c()) {
      row.s = second_order_beta(row.lambda, sim.channel, sim.link_length, sim.domain, tol);
    } else {
      row.s.status = SolverStatus::kDiverged;
      row.s.beta = std::numeric_limits<double>::infinity();
    }
    return row;
  });
}

inline int cmd_heuristics(const Context& ctx) {
  const auto& c = ctx.config;
  SimulationConfig sim = c.simulation();
  const auto a = pathloss_integral_a(sim.channel.pathloss, sim.domain, 1e-10);
  const auto crit = critical_lambda(sim.channel, sim.link_length, a);
  auto out = ctx.open("heuristics.csv");
  out << "lambda,beta_f,beta_s,beta_l,lambda_c,status_f,status_s,residual_f,residual_s\n";
  if (crit.always_unstable) {
    std::cerr << "path loss integral diverges: no arrival rate admits a stationary regime\n";
    return 0;
  }
  std::vector<double> lambdas = c.get_list("heuristics", "lambdas", {});
  for (double f : c.get_list("heuristics", "lambda_fractions",
                             lambdas.empty() ? std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.4, 0.5,
                                                                    0.6, 0.7, 0.8, 0.9, 0.95, 0.99,
                                                                    1.05}
                                             : std::vector<double>{})) {
    lambdas.push_back(f * crit.lambda_c);
  }
  const double tol = c.get_double("heuristics", "tol", 1e-8);
  for (const auto& row : heuristic_sweep(sim, lambdas, tol, ctx.jobs)) {
    out << fixed(row.lambda) << ',' << fixed(row.f.beta) << ',' << fixed(row.s.beta) << ','
        << fixed(row.beta_l) << ',' << fixed(crit.lambda_c) << ',' << to_string(row.f.status) << ','
        << to_string(row.s.status) << ',' << fixed(row.f.residual) << ',' << fixed(row.s.residual)
        << '\n';
  }
  return 0;
}

// --- stats ----------------------------------------------------------------------

inline std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<double> default_radii(double q) {
  std::vector<double> r;
  for (int i = 1; i <= 20; ++i) r.push_back(0.025 * i * std::min(q, 5.0));
  return r;
}

inline void write_ripley(std::ostream& out, const std::vector<LinkConfiguration>& snaps,
                         const std::vector<double>& radii) {
  out << "r,k_hat,k_ppp,ci_lo,ci_hi\n";
  for (const auto& k : ripley_k(snaps, radii)) {
    out << fixed(k.r) << ',' << fixed(k.k_hat) << ',' << fixed(k.k_csr()) << ',' << fixed(k.ci.lo)
        << ',' << fixed(k.ci.hi) << '\n';
  }
}

inline int cmd_stats(const Context& ctx, const std::string& pattern) {
  const auto& c = ctx.config;
  const SimulationConfig sim = c.simulation();
  const auto files = expand_glob(pattern);
  if (files.empty()) throw StateError("no snapshot files match " + pattern);
  std::vector<LinkConfiguration> snaps;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw ConfigError("cannot read " + f);
    snaps.push_back(io::read_snapshot(in, sim.domain, sim.link_length));
  }
  const double q = sim.domain.half_side();
  const auto radii = c.get_list("stats", "radii", default_radii(q));
  {
    auto out = ctx.open("ripley.csv");
    write_ripley(out, snaps, radii);
  }
  const auto s_grid = c.get_list("stats", "s_grid", {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0});
  const auto surrogate = binomial_surrogate(snaps, c.get_u64("stats", "surrogate_seed", ctx.seed));
  {
    const auto phi = palm_laplace_interference(snaps, s_grid, sim.channel);
    const auto psi = palm_laplace_interference(surrogate, s_grid, sim.channel);
    auto out = ctx.open("laplace.csv");
    out << "s,laplace_phi,laplace_ppp,ci_phi_lo,ci_phi_hi,ci_ppp_lo,ci_ppp_hi\n";
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const auto a = phi[i].estimate.ci95();
      const auto b = psi[i].estimate.ci95();
      out << fixed(phi[i].s) << ',' << fixed(phi[i].estimate.value) << ','
          << fixed(psi[i].estimate.value) << ',' << fixed(a.lo) << ',' << fixed(a.hi) << ','
          << fixed(b.lo) << ',' << fixed(b.hi) << '\n';
    }
  }
  {
    const double radius = c.get_double("stats", "kernel_radius", 0.5);
    const auto kernel = ShotNoiseKernel::indicator(radius, sim.domain.max_distance());
    const auto sn = palm_shot_noise(snaps, kernel, c.get_u64("stats", "probes", 200), ctx.seed);
    auto out = ctx.open("shot_noise.csv");
    out << "kernel_radius,palm,palm_se,volume,volume_se,clustered\n";
    const bool clustered = sn.palm.ci95().lo > sn.volume.ci95().hi;
    out << fixed(radius) << ',' << fixed(sn.palm.value) << ',' << fixed(sn.palm.std_error) << ','
        << fixed(sn.volume.value) << ',' << fixed(sn.volume.std_error) << ','
        << (clustered ? "true" : "false") << '\n';
  }
  if (c.has("stats", "lambda")) {
    const auto rc = rate_conservation_check(snaps, sim.channel, c.get_double("stats", "lambda", 0.0));
    auto out = ctx.open("rate_conservation.csv");
    out << "lhs,rhs,relative_gap,density,mean_rate,mean_rate_se\n";
    out << fixed(rc.lhs) << ',' << fixed(rc.rhs) << ',' << fixed(rc.relative_gap) << ','
        << fixed(rc.density) << ',' << fixed(rc.mean_rate.value) << ','
        << fixed(rc.mean_rate.std_error) << '\n';
  }
  return 0;
}

// --- chain ----------------------------------------------------------------------

inline void write_cells_header(std::ostream& out, std::size_t n) {
  out << "time";
  for (std::size_t i = 0; i < n; ++i) out << ",cell_" << i;
  out << '\n';
}

inline int cmd_chain(const Context& ctx) {
  const auto& c = ctx.config;
  const SimulationConfig sim = c.simulation();
  const double eps = c.get_double("chain", "epsilon", sim.domain.side() / 4.0);
  const Tessellation tess(sim.domain, sim.channel.pathloss, eps, sim.link_length);
  const double bound = chain_stability_bound(tess, sim.channel);
  const double lambda = c.get_double("chain", "lambda_fraction", 0.8) * bound;
  const double horizon = c.get_double("chain", "horizon", 100.0);
  const std::string mode = c.get_string("chain", "mode", "chain");
  const std::size_t n = tess.n_cells();
  if (mode == "chain") {
    CellCounts x0(n, 0);
    const auto init = c.get_list("chain", "x0", {});
    if (!init.empty()) {
      if (init.size() != n) throw ConfigError("chain.x0 needs one entry per cell");
      for (std::size_t i = 0; i < n; ++i) x0[i] = static_cast<std::uint32_t>(init[i]);
    }
    CellChainOptions opt;
    opt.record_every = c.get_u64("chain", "record_every", 1);
    const auto traj = simulate_cell_chain(tess, lambda, sim.channel, x0, horizon, ctx.seed, opt);
    auto out = ctx.open("chain.csv");
    write_cells_header(out, n);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      out << fixed(traj.times[k]);
      for (auto v : traj.states[k]) out << ',' << v;
      out << '\n';
    }
  } else if (mode == "fluid") {
    std::vector<double> x0 = c.get_list("chain", "x0", {});
    if (x0.empty()) {
      x0.assign(n, 0.0);
      x0[0] = 1.0;
    }
    FluidOptions opt;
    opt.step_tol = c.get_double("chain", "step_tol", 1e-9);
    const auto traj = fluid_ode(tess, lambda, sim.channel, x0, horizon, opt);
    auto out = ctx.open("fluid.csv");
    write_cells_header(out, n);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      out << fixed(traj.times[k]);
      for (auto v : traj.states[k]) out << ',' << fixed(v);
      out << '\n';
    }
    std::cerr << "drain_time_bound=" << fluid_drain_time(tess, lambda, sim.channel)
              << " hit_time=" << (traj.hit_time ? fixed(*traj.hit_time) : "none") << '\n';
  } else if (mode == "refine") {
    auto out = ctx.open("refinement.csv");
    out << "epsilon,tessellated_integral,a\n";
    const double a = pathloss_integral_a(sim.channel.pathloss, sim.domain, 1e-10).value();
    for (double e = eps; e >= sim.domain.side() / 8192.0; e /= 2.0) {
      out << fixed(e) << ',' << fixed(tessellated_integral(sim.domain, sim.channel.pathloss, e,
                                                           sim.link_length))
          << ',' << fixed(a) << '\n';
    }
  } else {
    throw ConfigError("chain.mode must be chain, fluid or refine");
  }
  return 0;
}

// --- figures --------------------------------------------------------------------

struct Scale {
  double horizon = 400.0;
  double warmup = 100.0;
  std::size_t snapshots = 40;
  std::size_t replications = 300;
  std::size_t ps_customers = 200000;
};

inline Scale figure_scale(const ExperimentConfig& c) {
  const std::string s = c.get_string("figures", "scale", "desk");
  if (s == "desk") return {};
  if (s == "quick") return {40.0, 10.0, 8, 100, 20000};
  throw ConfigError("figures.scale must be desk or quick");
}

inline std::vector<double> ccdf_grid(const std::vector<double>& samples, std::size_t points) {
  const double hi = stats::quantile(samples, 0.999);
  std::vector<double> grid;
  for (std::size_t i = 0; i < points; ++i) {
    grid.push_back(hi * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return grid;
}

inline void figure_fig2(const Context& ctx, const SimulationConfig& base, const Scale& sc,
                        double lambda_c) {
  const std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> lambdas;
  for (double f : fractions) lambdas.push_back(f * lambda_c);
  const auto sweep = heuristic_sweep(base, lambdas, 1e-8, ctx.jobs);
  const auto runs = parallel_map<RunMetrics>(lambdas.size(), ctx.jobs, [&](std::size_t i) {
    SimulationConfig cfg = base;
    cfg.lambda = lambdas[i];
    cfg.horizon = sc.horizon;
    cfg.warmup = sc.warmup;
    cfg.record_events = false;
    return run(cfg);
  });
  auto out = ctx.open("fig2.csv");
  out << "lambda,lambda_fraction,beta_hat,beta_hat_se,beta_f,beta_s,beta_l\n";
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    out << fixed(lambdas[i]) << ',' << fixed(fractions[i]) << ',' << fixed(runs[i].beta_hat) << ','
        << fixed(runs[i].beta_hat_se) << ',' << fixed(sweep[i].f.beta) << ','
        << fixed(sweep[i].s.beta) << ',' << fixed(sweep[i].beta_l) << '\n';
  }
}

inline void figure_fig3(const Context& ctx, const SimulationConfig& base, const Scale& sc,
                        double lambda_c) {
  const std::vector<double> fractions{0.985, 0.697, 0.141};
  const std::vector<std::string> names{"fig3_a.csv", "fig3_b.csv", "fig3_c.csv"};
  const auto radii = default_radii(base.domain.half_side());
  const auto runs = parallel_map<RunMetrics>(fractions.size(), ctx.jobs, [&](std::size_t i) {
    SimulationConfig cfg = base;
    cfg.lambda = fractions[i] * lambda_c;
    // Near lambda_c relaxation is slow: scale the horizon with the light-traffic sojourn ratio.
    const double stretch = fractions[i] > 0.9 ? 4.0 : 1.0;
    cfg.horizon = sc.horizon * stretch;
    cfg.warmup = sc.warmup * stretch;
    cfg.record_events = false;
    cfg.snapshot_times.clear();
    for (std::size_t k = 0; k < sc.snapshots; ++k) {
      cfg.snapshot_times.push_back(cfg.warmup + (cfg.horizon - cfg.warmup) *
                                                    static_cast<double>(k + 1) /
                                                    static_cast<double>(sc.snapshots));
    }
    return run(cfg);
  });
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    auto out = ctx.open(names[i]);
    out << "# lambda_fraction=" << fixed(fractions[i]) << '\n';
    write_ripley(out, runs[i].snapshots, radii);
  }
}

inline void figure_fig5_6(const Context& ctx, const SimulationConfig& base, const Scale& sc,
                          double lambda_c) {
  const std::vector<double> fractions{0.3, 0.5, 0.7, 0.9};
  const auto runs = parallel_map<RunMetrics>(fractions.size(), ctx.jobs, [&](std::size_t i) {
    SimulationConfig cfg = base;
    cfg.lambda = fractions[i] * lambda_c;
    cfg.horizon = sc.horizon;
    cfg.warmup = sc.warmup;
    cfg.record_events = false;
    return run(cfg);
  });
  auto out = ctx.open("fig5_6.csv");
  out << "lambda_fraction,t,ccdf_spatial,ccdf_ps,ccdf_mminf\n";
  const double solo = solo_rate(base.channel, base.link_length);
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const auto& delays = runs[i].delay_samples;
    if (delays.size() < 100) continue;
    const auto ps = ps_comparator(fractions[i] * lambda_c, lambda_c, base.file_dist,
                                  sc.ps_customers, ctx.seed);
    const auto mminf = infinite_server_delays(solo, base.file_dist, sc.ps_customers, ctx.seed);
    const auto grid = ccdf_grid(delays, 40);
    const auto a = stats::empirical_ccdf(delays, grid);
    const auto b = stats::empirical_ccdf(ps, grid);
    const auto m = stats::empirical_ccdf(mminf, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      out << fixed(fractions[i]) << ',' << fixed(grid[k]) << ',' << fixed(a[k].second) << ','
          << fixed(b[k].second) << ',' << fixed(m[k].second) << '\n';
    }
  }
}

inline void figure_fig8(const Context& ctx, const SimulationConfig& base, const Scale& sc,
                        double lambda_c) {
  SimulationConfig cfg = base;
  cfg.link_length = 0.0;
  cfg.lambda = 0.8 * lambda_c;
  cfg.warmup = sc.warmup;
  cfg.horizon = sc.warmup + 1.0;
  cfg.record_events = false;
  const double q = cfg.domain.half_side();
  std::vector<double> distances;
  for (int i = 0; i <= 10; ++i) distances.push_back(q * i / 10.0);
  DelayCorrelationOptions opt;
  opt.replications = sc.replications;
  auto out = ctx.open("fig8.csv");
  out << "d,rho,ci_lo,ci_hi,n\n";
  for (const auto& p : delay_correlation(cfg, distances, opt)) {
    out << fixed(p.distance) << ',' << fixed(p.correlation.rho) << ',' << fixed(p.correlation.ci.lo)
        << ',' << fixed(p.correlation.ci.hi) << ',' << p.correlation.n << '\n';
  }
}

inline void figure_fig9(const Context& ctx, const SimulationConfig& base, const Scale& sc,
                        double lambda_c) {
  SimulationConfig cfg = base;
  cfg.file_dist = FileSizeDistribution::pareto(2.5, base.channel.L);
  cfg.lambda = 0.5 * lambda_c;
  cfg.horizon = sc.horizon;
  cfg.warmup = sc.warmup;
  cfg.record_events = false;
  const RunMetrics m = run(cfg);
  const auto ps = ps_comparator(cfg.lambda, lambda_c, cfg.file_dist, sc.ps_customers, ctx.seed);
  const auto grid = ccdf_grid(m.delay_samples, 40);
  const auto a = stats::empirical_ccdf(m.delay_samples, grid);
  const auto b = stats::empirical_ccdf(ps, grid);
  auto out = ctx.open("fig9.csv");
  out << "t,ccdf_spatial,ccdf_ps\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << fixed(grid[k]) << ',' << fixed(a[k].second) << ',' << fixed(b[k].second) << '\n';
  }
  auto traj = ctx.open("fig9_trajectory.csv");
  traj << "time,n\n";
  for (const auto& [t, n] : m.n_trajectory) traj << fixed(t) << ',' << n << '\n';
}

inline int cmd_figures(const Context& ctx, const std::string& id) {
  SimulationConfig base = ctx.config.simulation();
  base.seed = ctx.seed;
  const Scale sc = figure_scale(ctx.config);
  const double lambda_c = critical_lambda_for(base);
  const std::vector<std::pair<std::string, void (*)(const Context&, const SimulationConfig&,
                                                   const Scale&, double)>>
      recipes{{"fig2", figure_fig2},
              {"fig3", figure_fig3},
              {"fig5-6", figure_fig5_6},
              {"fig8", figure_fig8},
              {"fig9", figure_fig9}};
  bool any = false;
  for (const auto& [name, fn] : recipes) {
    if (id == name || id == "all") {
      fn(ctx, base, sc, lambda_c);
      any = true;
    }
  }
  if (!any) throw ConfigError("unknown figure '" + id + "' (fig2, fig3, fig5-6, fig8, fig9, all)");
  return 0;
}

}  // namespace sbd::cli

#endif  // SBD_TOOLS_COMMANDS_HPP
