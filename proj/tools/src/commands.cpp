#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rank1/amp.hpp"
#include "rank1/channels.hpp"
#include "rank1/oracle.hpp"
#include "rank1/potential.hpp"
#include "rank1/state_evolution.hpp"
#include "rank1/util.hpp"

#include "output.hpp"

namespace rank1::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

void stamp(CsvWriter& w, const Context& ctx) {
  w.meta("tool", std::string("rank1-phase ") + kVersion);
  w.meta("command", ctx.command);
  w.meta("config", ctx.config.hash());
  w.meta("seed", fmt(ctx.seed));
  w.meta("workers", fmt(ctx.workers));
}

nlohmann::json meta_json(const Context& ctx) {
  return {{"tool", std::string("rank1-phase ") + kVersion},
          {"command", ctx.command},
          {"config", ctx.config.hash()},
          {"seed", ctx.seed},
          {"workers", ctx.workers}};
}

std::string kind_label(StationaryKind k) {
  switch (k) {
    case StationaryKind::minimum: return "minimum";
    case StationaryKind::maximum: return "maximum";
    case StationaryKind::inflexion: return "inflexion";
  }
  return "?";
}

std::string order_label(TransitionOrder o) {
  switch (o) {
    case TransitionOrder::none: return "none";
    case TransitionOrder::first_order: return "first_order";
    case TransitionOrder::higher_order: return "higher_order";
  }
  return "?";
}

double overlap_of(const Eigen::VectorXd& x, const Eigen::VectorXd& s) {
  double nx = x.norm();
  double ns = s.norm();
  if (nx == 0.0 || ns == 0.0) return 0.0;
  return std::abs(x.dot(s)) / (nx * ns);
}

// Either an explicit list under list_key or the single scalar under one_key.
std::vector<double> grid_or_scalar(const ExperimentConfig& cfg,
                                   const std::string& list_key,
                                   const std::string& one_key) {
  if (cfg.has(list_key)) return cfg.get_list(list_key);
  return {cfg.get_double(one_key)};
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace

std::string Context::out_path(const std::string& name) const {
  return out_dir + "/" + name;
}

double Context::tolerance(const std::string& key, double fallback) const {
  if (tol) return *tol;
  return config.get_double(key, fallback);
}

int cmd_potential(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  std::vector<double> deltas = grid_or_scalar(ctx.config, "grid.deltas", "grid.delta");
  int points = ctx.config.get_int("grid.points", 513);
  if (points < 2) throw ConfigError("grid.points must be at least 2");

  CsvWriter w(ctx.out_path("potential.csv"));
  stamp(w, ctx);
  w.meta("prior", ctx.config.prior_label());
  w.meta("points", fmt(points));
  w.header({"delta", "e", "i_rs", "kind"});
  for (double delta : deltas) {
    PotentialCurve curve = potential_curve(prior, delta, points, ctx.quad);
    for (const PotentialPoint& p : curve.grid) {
      w.row({fmt(delta), fmt(p.e), fmt(p.i_rs), "grid"});
    }
    StationaryPoints sp = stationary_points(prior, delta, ctx.quad);
    for (const StationaryPoint& p : sp.points) {
      w.row({fmt(delta), fmt(p.e), fmt(p.potential), kind_label(p.kind)});
    }
    MutualInfo mi = mutual_information(prior, delta, ctx.quad);
    w.row({fmt(delta), fmt(mi.argmin_e), fmt(mi.value), "global_minimum"});
  }
  return 0;
}

int cmd_thresholds(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  Thresholds th = compute_thresholds(prior, ctx.quad);
  nlohmann::json doc = {
      {"meta", meta_json(ctx)},
      {"prior", ctx.config.prior_label()},
      {"v", prior.second_moment()},
      {"delta_amp", json_number(th.delta_amp)},
      {"delta_rs", json_number(th.delta_rs)},
      {"delta_opt", json_number(th.delta_opt)},
      {"delta_spectral", json_number(th.delta_spectral)},
      {"transition", order_label(th.order)},
  };
  write_json(ctx.out_path("thresholds.json"), doc);
  return 0;
}

int cmd_phase_diagram(const Context& ctx) {
  std::string family = ctx.config.get_string("sweep.family", "bernoulli");
  if (family != "bernoulli" && family != "community") {
    throw ConfigError("sweep.family must be bernoulli or community");
  }
  std::vector<double> rhos;
  if (ctx.config.has("sweep.rhos")) {
    rhos = ctx.config.get_list("sweep.rhos");
  } else {
    double lo = ctx.config.get_double("sweep.rho_min");
    double hi = ctx.config.get_double("sweep.rho_max");
    int points = ctx.config.get_int("sweep.points");
    std::string scale = ctx.config.get_string("sweep.scale", "log");
    if (lo <= 0.0 || hi <= lo || points < 2) {
      throw ConfigError("sweep grid needs 0 < rho_min < rho_max and points >= 2");
    }
    for (int i = 0; i < points; ++i) {
      double t = static_cast<double>(i) / (points - 1);
      rhos.push_back(scale == "log" ? lo * std::pow(hi / lo, t)
                                    : lo + (hi - lo) * t);
    }
  }
  bool asymptotics = ctx.config.get_bool("sweep.asymptotics", false);

  struct Row {
    Thresholds th;
    std::string status = "ok";
  };
  std::vector<Row> rows(rhos.size());
  parallel_for(
      rhos.size(),
      [&](std::size_t i) {
        double rho = rhos[i];
        try {
          if (rho <= 0.0 || rho >= 1.0) throw std::domain_error("rho outside (0, 1)");
          DiscretePrior prior = family == "bernoulli"
                                    ? make_prior({0.0, 1.0}, {1.0 - rho, rho})
                                    : community_detection_prior(rho);
          rows[i].th = compute_thresholds(prior, ctx.quad);
        } catch (const std::exception& err) {
          std::string msg = err.what();
          std::replace(msg.begin(), msg.end(), ',', ';');
          std::replace(msg.begin(), msg.end(), '\n', ' ');
          rows[i].status = "error: " + msg;
        }
      },
      ctx.workers);

  CsvWriter w(ctx.out_path("phase_diagram.csv"));
  stamp(w, ctx);
  w.meta("family", family);
  std::vector<std::string> cols = {"rho",      "delta_amp",      "delta_rs",
                                   "delta_opt", "delta_spectral", "status"};
  if (asymptotics) cols.insert(cols.end() - 1, "product");
  w.header(cols);
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    const Row& r = rows[i];
    bool ok = r.status == "ok";
    std::vector<std::string> cells = {
        fmt(rhos[i]),
        ok ? fmt(r.th.delta_amp) : "nan",
        ok ? fmt(r.th.delta_rs) : "nan",
        ok ? fmt(r.th.delta_opt) : "nan",
        ok ? fmt(r.th.delta_spectral) : "nan",
    };
    if (asymptotics) {
      double product = r.th.delta_opt * 4.0 * rhos[i] * std::abs(std::log(rhos[i]));
      cells.push_back(ok ? fmt(product) : "nan");
    }
    cells.push_back(r.status);
    w.row(cells);
  }
  return 0;
}

int cmd_se(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  double delta = ctx.config.get_double("run.delta");
  double tol = ctx.tolerance("run.tol", 1e-9);
  int max_iter = ctx.config.get_int("run.max_iter", 10000);

  SETrajectory traj = se_run(prior, delta, tol, max_iter, ctx.quad);

  CsvWriter w(ctx.out_path("se.csv"));
  stamp(w, ctx);
  w.meta("prior", ctx.config.prior_label());
  w.meta("delta", delta);
  w.meta("converged", traj.converged ? "1" : "0");
  w.meta("fixed_point", traj.fixed_point);
  w.header({"t", "e"});
  for (std::size_t t = 0; t < traj.iterates.size(); ++t) {
    w.row({fmt(static_cast<int>(t)), fmt(traj.iterates[t])});
  }
  return 0;
}

int cmd_coupled_se(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  double delta = ctx.config.get_double("run.delta");
  int length = ctx.config.get_int("geometry.length");
  int window = ctx.config.get_int("geometry.window");
  double tol = ctx.tolerance("run.tol", 1e-9);
  int max_iter = ctx.config.get_int("run.max_iter", 10000);

  CoupledSEResult res = coupled_se_run(prior, length, window, delta, tol, max_iter, ctx.quad);

  std::vector<char> is_seed(res.profile.values.size(), 0);
  for (int b : res.profile.seed_set) is_seed[b] = 1;
  double max_interior = 0.0;
  for (std::size_t b = 0; b < res.profile.values.size(); ++b) {
    if (!is_seed[b]) max_interior = std::max(max_interior, res.profile.values[b]);
  }
  double e_good = std::numeric_limits<double>::quiet_NaN();
  try {
    e_good = good_branch_e(prior, delta, ctx.quad);
  } catch (const std::domain_error&) {
    // no informative branch at this delta; the nan says so in the metadata
  }

  CsvWriter w(ctx.out_path("coupled_se.csv"));
  stamp(w, ctx);
  w.meta("prior", ctx.config.prior_label());
  w.meta("delta", delta);
  w.meta("length", fmt(length));
  w.meta("window", fmt(window));
  w.meta("iterations", fmt(res.iterations));
  w.meta("converged", res.converged ? "1" : "0");
  w.meta("max_interior", max_interior);
  w.meta("e_good", e_good);
  w.header({"block", "e", "seed"});
  for (std::size_t b = 0; b < res.profile.values.size(); ++b) {
    w.row({fmt(static_cast<int>(b)), fmt(res.profile.values[b]), is_seed[b] ? "1" : "0"});
  }
  return 0;
}

int cmd_amp(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  double delta = ctx.config.get_double("run.delta");
  int max_iter = ctx.config.get_int("run.max_iter", 200);
  double tol = ctx.tolerance("run.tol", 1e-7);
  double damping = ctx.config.get_double("run.damping", 0.0);
  std::string schedule_name = ctx.config.get_string("run.schedule", "adaptive");
  NoiseSchedule schedule;
  if (schedule_name == "adaptive") {
    schedule = NoiseSchedule::kAdaptive;
  } else if (schedule_name == "se") {
    schedule = NoiseSchedule::kSeCalibrated;
  } else {
    throw ConfigError("run.schedule must be adaptive or se");
  }

  bool coupled = ctx.config.has("geometry.block_size");
  Instance inst;
  if (coupled) {
    int block_size = ctx.config.get_int("geometry.block_size");
    int length = ctx.config.get_int("geometry.length");
    int window = ctx.config.get_int("geometry.window");
    inst = generate_coupled_instance(prior, block_size, length, window, delta, ctx.seed);
  } else {
    inst = generate_instance(prior, ctx.config.get_int("geometry.n"), delta, ctx.seed);
  }

  AmpState state = amp_run(inst, prior, max_iter, tol, damping, schedule, &ctx.quad);

  CsvWriter w(ctx.out_path("amp.csv"));
  stamp(w, ctx);
  w.meta("prior", ctx.config.prior_label());
  w.meta("delta", delta);
  w.meta("n", fmt(inst.n));
  w.meta("coupled", coupled ? "1" : "0");
  if (coupled) {
    w.meta("block_size", fmt(inst.coupling->block_size));
    w.meta("length", fmt(inst.coupling->lambda.length()));
    w.meta("window", fmt(inst.coupling->lambda.window()));
  }
  w.meta("schedule", schedule_name);
  w.meta("iterations", fmt(state.iterations));
  w.meta("converged", state.converged ? "1" : "0");
  w.meta("diverged", state.diverged ? "1" : "0");
  w.meta("final_mse", state.mse_trace.back());
  w.meta("overlap", overlap_of(state.x, inst.signal));
  w.meta("matrix_mse", matrix_mse(state.x, inst.signal));
  w.header({"t", "mse", "effective_noise"});
  for (std::size_t t = 0; t < state.mse_trace.size(); ++t) {
    // effective_noise[k] calibrated the step that produced iterate k+1
    std::string noise = (t >= 1 && t - 1 < state.effective_noise.size())
                            ? fmt(state.effective_noise[t - 1])
                            : "nan";
    w.row({fmt(static_cast<int>(t)), fmt(state.mse_trace[t]), noise});
  }

  if (coupled) {
    const CoupledLayout& layout = *inst.coupling;
    std::vector<char> is_seed(layout.lambda.size(), 0);
    for (int b : layout.seed_blocks) is_seed[b] = 1;
    CsvWriter bw(ctx.out_path("amp_blocks.csv"));
    stamp(bw, ctx);
    bw.meta("delta", delta);
    bw.header({"block", "mse", "seed"});
    for (int b = 0; b < layout.lambda.size(); ++b) {
      double acc = 0.0;
      for (int i = 0; i < layout.block_size; ++i) {
        int idx = b * layout.block_size + i;
        double d = state.x[idx] - inst.signal[idx];
        acc += d * d;
      }
      bw.row({fmt(b), fmt(acc / layout.block_size), is_seed[b] ? "1" : "0"});
    }
  }
  return 0;
}

int cmd_spectral(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  double delta = ctx.config.get_double("run.delta");
  int n = ctx.config.get_int("geometry.n");
  int num_seeds = ctx.config.get_int("run.num_seeds", 1);
  if (num_seeds < 1) throw ConfigError("run.num_seeds must be positive");

  struct Run {
    double overlap = 0.0;
    double eigenvalue = 0.0;
    int iterations = 0;
    bool converged = false;
  };
  std::vector<Run> runs(num_seeds);
  parallel_for(
      static_cast<std::size_t>(num_seeds),
      [&](std::size_t k) {
        Instance inst = generate_instance(prior, n, delta, ctx.seed + k);
        SpectralResult r = spectral_estimate(inst);
        runs[k] = {r.overlap, r.eigenvalue, r.iterations, r.converged};
      },
      ctx.workers);

  std::vector<double> overlaps;
  nlohmann::json per_seed = nlohmann::json::array();
  for (int k = 0; k < num_seeds; ++k) {
    overlaps.push_back(runs[k].overlap);
    per_seed.push_back({{"seed", ctx.seed + k},
                        {"overlap", runs[k].overlap},
                        {"eigenvalue", runs[k].eigenvalue},
                        {"iterations", runs[k].iterations},
                        {"converged", runs[k].converged}});
  }
  nlohmann::json doc = {
      {"meta", meta_json(ctx)},
      {"prior", ctx.config.prior_label()},
      {"delta", delta},
      {"n", n},
      {"runs", per_seed},
      {"median_overlap", median(overlaps)},
  };
  write_json(ctx.out_path("spectral.json"), doc);
  return 0;
}

int cmd_community(const Context& ctx) {
  double rho = ctx.config.get_double("graph.rho");
  double p = ctx.config.get_double("graph.p");
  double mu = ctx.config.get_double("graph.mu");
  int n = ctx.config.get_int("graph.n");

  CommunityGraph graph = generate_community_graph(rho, p, mu, n, ctx.seed);
  save_edge_list(graph, ctx.out_path("community_edges.txt"));

  nlohmann::json doc = {
      {"meta", meta_json(ctx)},
      {"n", n},
      {"rho", rho},
      {"p", p},
      {"mu", mu},
      {"num_edges", graph.edges.size()},
      {"mean_degree", 2.0 * graph.edges.size() / n},
      {"effective_noise", json_number(graph.effective_noise)},
  };

  auto matvec = community_score_matvec(graph);
  if (ctx.config.get_bool("run.spectral", true)) {
    SpectralResult sp = spectral_estimate_operator(n, matvec, graph.signal);
    doc["spectral"] = {{"overlap", sp.overlap},
                       {"eigenvalue", sp.eigenvalue},
                       {"iterations", sp.iterations},
                       {"converged", sp.converged}};
  }
  if (ctx.config.get_bool("run.amp", false)) {
    AmpProblem prob;
    prob.n = n;
    prob.delta = graph.effective_noise;
    prob.score_matvec = matvec;
    prob.signal = graph.signal;
    prob.block_size = n;
    AmpState st = amp_run_operator(prob, community_detection_prior(rho),
                                   ctx.config.get_int("run.max_iter", 200),
                                   ctx.tolerance("run.tol", 1e-7),
                                   ctx.config.get_double("run.damping", 0.0));
    doc["amp"] = {{"overlap", overlap_of(st.x, graph.signal)},
                  {"final_mse", st.mse_trace.back()},
                  {"matrix_mse", matrix_mse(st.x, graph.signal)},
                  {"iterations", st.iterations},
                  {"converged", st.converged},
                  {"diverged", st.diverged}};
  }
  write_json(ctx.out_path("community.json"), doc);
  return 0;
}

int cmd_oracle(const Context& ctx) {
  DiscretePrior prior = ctx.config.prior();
  std::string mode = ctx.config.get_string("oracle.mode");

  if (mode == "nishimori") {
    int n = ctx.config.get_int("oracle.n");
    double delta = ctx.config.get_double("run.delta");
    int instances = ctx.config.get_int("oracle.instances", 200);
    NishimoriCheck nc = nishimori_check(prior, n, delta, instances, ctx.seed, ctx.workers);
    bool within = std::abs(nc.lhs - nc.rhs) <= 3.0 * nc.std_error;
    CsvWriter w(ctx.out_path("oracle_nishimori.csv"));
    stamp(w, ctx);
    w.meta("prior", ctx.config.prior_label());
    w.meta("n", fmt(n));
    w.meta("delta", delta);
    w.meta("instances", fmt(instances));
    w.header({"lhs", "rhs", "diff", "std_error", "within_3se"});
    w.row({fmt(nc.lhs), fmt(nc.rhs), fmt(nc.lhs - nc.rhs), fmt(nc.std_error),
           within ? "1" : "0"});
    return 0;
  }

  if (mode == "mmse_curve") {
    int n = ctx.config.get_int("oracle.n");
    std::vector<double> deltas = grid_or_scalar(ctx.config, "grid.deltas", "run.delta");
    int instances = ctx.config.get_int("oracle.instances", 200);
    std::vector<MmseCurvePoint> pts =
        finite_size_mmse_curve(prior, n, deltas, instances, ctx.seed, ctx.workers);
    CsvWriter w(ctx.out_path("oracle_mmse.csv"));
    stamp(w, ctx);
    w.meta("prior", ctx.config.prior_label());
    w.meta("n", fmt(n));
    w.meta("instances", fmt(instances));
    w.header({"delta", "matrix_mmse", "matrix_std_error", "vector_mmse",
              "vector_std_error", "replica_matrix_mmse"});
    for (const MmseCurvePoint& pt : pts) {
      double replica = matrix_mmse(prior, pt.delta, ctx.quad).value;
      w.row({fmt(pt.delta), fmt(pt.matrix_mmse), fmt(pt.matrix_std_error),
             fmt(pt.vector_mmse), fmt(pt.vector_std_error), fmt(replica)});
    }
    return 0;
  }

  if (mode == "mc") {
    std::vector<double> snrs = grid_or_scalar(ctx.config, "grid.snrs", "run.snr");
    long samples = static_cast<long>(ctx.config.get_double("oracle.samples", 1e6));
    if (samples < 1) throw ConfigError("oracle.samples must be positive");
    CsvWriter w(ctx.out_path("oracle_mc.csv"));
    stamp(w, ctx);
    w.meta("prior", ctx.config.prior_label());
    w.meta("samples", fmt(static_cast<std::uint64_t>(samples)));
    w.header({"snr", "mmse", "std_error", "quadrature_mmse"});
    for (std::size_t k = 0; k < snrs.size(); ++k) {
      MonteCarloEstimate est =
          mc_mmse(prior, snrs[k], static_cast<std::size_t>(samples), ctx.seed + k);
      w.row({fmt(snrs[k]), fmt(est.value), fmt(est.std_error),
             fmt(mmse(prior, snrs[k], ctx.quad))});
    }
    return 0;
  }

  if (mode == "exact") {
    int n = ctx.config.get_int("oracle.n");
    double delta = ctx.config.get_double("run.delta");
    Instance inst = generate_instance(prior, n, delta, ctx.seed);
    EnumerationResult res = exact_posterior(inst, prior, ctx.workers);
    nlohmann::json doc = {
        {"meta", meta_json(ctx)},
        {"prior", ctx.config.prior_label()},
        {"n", n},
        {"delta", delta},
        {"log_partition", res.log_partition},
        {"posterior_mass", res.posterior_mass},
        {"matrix_se", res.matrix_se},
        {"vector_se", res.vector_se},
    };
    write_json(ctx.out_path("oracle_exact.json"), doc);
    return 0;
  }

  throw ConfigError("oracle.mode must be nishimori, mmse_curve, mc, or exact");
}

}  // namespace rank1::cli
