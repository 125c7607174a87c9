#include "zcbf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace zcbf::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Bad invocation; maps to the validation exit code like ConfigError.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

constexpr const char* kCases[] = {"pendulum", "unicycle", "quadrotor"};
constexpr int kRegionSamples = 1000;

struct Context {
  RunConfig cfg;
  fs::path out;
};

Context load_context(const Options& opts) {
  fs::path path = opts.config;
  if (path.empty()) {
    const char* env = std::getenv(kConfigEnvVar);
    if (env == nullptr || *env == '\0') {
      throw UsageError(std::string("no config given: pass --config or set ") + kConfigEnvVar);
    }
    path = env;
  }
  Context ctx{load_config(path), {}};
  ctx.out = opts.out ? *opts.out : fs::path(ctx.cfg.paths.output_dir);
  fs::create_directories(ctx.out);
  return ctx;
}

fs::path checkpoint_path(const Context& ctx, const Options& opts) {
  return opts.checkpoint ? *opts.checkpoint : ctx.out / kCheckpointFile;
}

BarrierNet load_net(const Context& ctx, const fs::path& path, const ControlAffineSystem& sys) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  Checkpoint ck = load_checkpoint(path);
  if (ck.alpha != ctx.cfg.train.alpha) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "checkpoint alpha " << ck.alpha << " does not match train.alpha " << ctx.cfg.train.alpha;
    throw UsageError(msg.str());
  }
  if (ck.net.input_dim() != sys.n) throw UsageError("checkpoint input dimension does not match the environment");
  return std::move(ck.net);
}

json report_json(const LossReport& r) {
  return {{"epoch", r.epoch}, {"l_r", r.l_r},           {"l_b", r.l_b},
          {"l_safe", r.l_safe}, {"l_unsafe", r.l_unsafe}, {"total", r.total}};
}

void print_report(std::ostream& log, const LossReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch %d  total %.6e  l_r %.3e  l_b %.3e  l_safe %.3e  l_unsafe %.3e", r.epoch,
                r.total, r.l_r, r.l_b, r.l_safe, r.l_unsafe);
  log << buf << '\n';
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << j.dump(2) << '\n';
}

TrainResult stage_train(const Context& ctx, const ControlAffineSystem& sys, std::ostream& log) {
  const auto ref = make_reference(ctx.cfg);
  std::ofstream jl(ctx.out / kTrainLogFile, std::ios::trunc);
  if (!jl) throw std::runtime_error("cannot open " + (ctx.out / kTrainLogFile).string());
  auto on_epoch = [&](const LossReport& r) {
    jl << report_json(r).dump() << '\n';
    if (r.epoch == 1 || r.epoch % 100 == 0) print_report(log, r);
  };
  TrainResult res = train(sys, *ref, ctx.cfg.train, on_epoch);
  save_checkpoint(ctx.out / kCheckpointFile, res.net, ctx.cfg.train.alpha);
  export_text(ctx.out / kTextExportFile, res.net, ctx.cfg.train.alpha);
  if (res.history.empty()) {
    log << "no epochs run; checkpoint holds the initialized network\n";
  } else {
    log << (res.early_stopped ? "stopped at loss threshold\n" : "epoch budget reached\n");
    print_report(log, res.history.back());
  }
  return res;
}

std::vector<LevelSetReport> stage_eval_grid(const Context& ctx, const ControlAffineSystem& sys,
                                            const BarrierNet& net, const std::vector<double>& gammas,
                                            std::ostream& log) {
  const GridSlice slice = make_slice(ctx.cfg, sys);
  const Eigen::MatrixXd grid = evaluate_grid(net, slice);
  const auto levels = sublevel_report(grid, slice, gammas);
  write_grid(ctx.out / kGridFile, slice, grid);
  std::ofstream os(ctx.out / kLevelSetFile, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + (ctx.out / kLevelSetFile).string());
  for (const auto& l : levels) {
    os << json{{"gamma", l.gamma}, {"cells", l.cell_count_below}, {"area", l.area_estimate}}.dump() << '\n';
    log << "gamma " << l.gamma << "  area " << l.area_estimate << '\n';
  }
  write_contour_svg(ctx.out / kContourFile, slice, grid, gammas);
  return levels;
}

Trajectory stage_simulate(const Context& ctx, const ControlAffineSystem& sys, const BarrierNet* net, SimMode mode,
                          std::ostream& log) {
  SimConfig sc = ctx.cfg.sim;
  sc.mode = mode;
  const auto ref = make_reference(ctx.cfg);
  Trajectory traj = rollout(sys, net, *ref, &ctx.cfg.filter, sc);
  write_trajectory_csv(ctx.out / trajectory_file(mode), sys, traj);
  log << (mode == SimMode::ReferenceOnly ? "ref" : "filtered") << " violation: ";
  if (traj.violation) {
    log << "t=" << traj.violation->time << '\n';
  } else {
    log << "none\n";
  }
  if (traj.left_domain) log << "left domain at t=" << *traj.left_domain << '\n';
  return traj;
}

json audit_json(const AuditReport& a, const AuditConfig& cfg) {
  return {{"gamma", cfg.gamma},
          {"tol", cfg.tol},
          {"samples", a.samples},
          {"draws", a.draws},
          {"active", a.active},
          {"zero_lgb", a.zero_lgb},
          {"zero_lgb_fraction", a.zero_lgb_fraction},
          {"violations", a.violations},
          {"violations_zero_lgb", a.violations_zero_lgb},
          {"violations_nonzero_lgb", a.violations_nonzero_lgb},
          {"violation_fraction", a.violation_fraction},
          {"worst_margin", a.worst_margin}};
}

AuditReport stage_audit(const Context& ctx, const ControlAffineSystem& sys, const BarrierNet& net,
                        std::ostream& log) {
  const auto ref = make_reference(ctx.cfg);
  const AuditReport a = audit_safety_condition(net, sys, *ref, ctx.cfg.filter, ctx.cfg.audit);
  write_json(ctx.out / kAuditFile, audit_json(a, ctx.cfg.audit));
  log << "audit: " << a.violations << " violations in " << a.samples << " samples (" << a.violations_nonzero_lgb
      << " with nonzero L_gB); zero L_gB fraction " << a.zero_lgb_fraction << '\n';
  return a;
}

double goal_distance(const RunConfig& cfg, const StateVector& x) {
  switch (cfg.environment) {
    case Environment::Unicycle:
      return (x.head<2>() - cfg.unicycle.goal).norm();
    case Environment::Quadrotor:
      return (x.head<2>() - cfg.quadrotor.target.head<2>()).norm();
    case Environment::Pendulum:
      break;
  }
  return x.norm();
}

int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

std::string trajectory_file(SimMode mode) {
  return mode == SimMode::ReferenceOnly ? "trajectory_ref.csv" : "trajectory_filtered.csv";
}

fs::path shipped_config(const std::string& case_name) {
  return fs::path(ZCBF_CONFIG_DIR) / (case_name + ".yaml");
}

int cmd_train(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.checkpoint) throw UsageError("train writes its checkpoint into the output directory; drop --checkpoint");
    const Context ctx = load_context(opts);
    const auto sys = make_system(ctx.cfg);
    stage_train(ctx, sys, log);
  });
}

int cmd_eval_grid(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const Context ctx = load_context(opts);
    const auto sys = make_system(ctx.cfg);
    const BarrierNet net = load_net(ctx, checkpoint_path(ctx, opts), sys);
    stage_eval_grid(ctx, sys, net, opts.gammas ? *opts.gammas : ctx.cfg.grid.gammas, log);
  });
}

int cmd_simulate(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const Context ctx = load_context(opts);
    const auto sys = make_system(ctx.cfg);
    const SimMode mode = opts.mode ? *opts.mode : ctx.cfg.sim.mode;
    std::optional<BarrierNet> net;
    if (mode == SimMode::BarrierFiltered) {
      const fs::path ck = checkpoint_path(ctx, opts);
      if (!fs::exists(ck)) throw UsageError("filtered mode needs a checkpoint; not found: " + ck.string());
      net = load_net(ctx, ck, sys);
    }
    stage_simulate(ctx, sys, net ? &*net : nullptr, mode, log);
  });
}

int cmd_audit(const Options& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const Context ctx = load_context(opts);
    const auto sys = make_system(ctx.cfg);
    const BarrierNet net = load_net(ctx, checkpoint_path(ctx, opts), sys);
    stage_audit(ctx, sys, net, log);
  });
}

int cmd_reproduce(const std::string& case_name, const Options& opts, std::ostream& log, std::ostream& err) {
  const auto env = parse_environment(case_name);
  if (!env) {
    err << "error: unknown case '" << case_name << "'; valid cases:";
    for (const char* c : kCases) err << ' ' << c;
    err << '\n';
    return kExitValidation;
  }
  return guarded(err, [&] {
    if (opts.checkpoint) throw UsageError("reproduce trains its own network; drop --checkpoint");
    Options o = opts;
    if (o.config.empty()) o.config = shipped_config(case_name);
    const Context ctx = load_context(o);
    if (ctx.cfg.environment != *env) throw UsageError("config environment does not match case " + case_name);
    const auto sys = make_system(ctx.cfg);

    const TrainResult tr = stage_train(ctx, sys, log);
    const auto& gammas = o.gammas ? *o.gammas : ctx.cfg.grid.gammas;
    const auto levels = stage_eval_grid(ctx, sys, tr.net, gammas, log);
    const Trajectory ref_traj = stage_simulate(ctx, sys, nullptr, SimMode::ReferenceOnly, log);
    const Trajectory fil_traj = stage_simulate(ctx, sys, &tr.net, SimMode::BarrierFiltered, log);
    const AuditReport audit = stage_audit(ctx, sys, tr.net, log);

    const std::uint64_t region_seed = ctx.cfg.seed + 2;
    const double w_safe = mean_over_region(tr.net, sys.domain, sys.safe, kRegionSamples, region_seed);
    const double w_unsafe = mean_over_region(tr.net, sys.domain, sys.unsafe, kRegionSamples, region_seed + 1);

    json s;
    s["case"] = case_name;
    s["seed"] = ctx.cfg.seed;
    s["epochs_run"] = tr.history.size();
    s["early_stopped"] = tr.early_stopped;
    if (!tr.history.empty()) {
      s["loss_first"] = tr.history.front().total;
      s["loss_final"] = tr.history.back().total;
    }
    s["mean_w_safe"] = w_safe;
    s["mean_w_unsafe"] = w_unsafe;
    json areas = json::array();
    for (const auto& l : levels) areas.push_back({{"gamma", l.gamma}, {"area", l.area_estimate}});
    s["levelset_areas"] = areas;
    s["strict_area_increases"] = strict_increases(levels);
    auto sim_json = [&](const Trajectory& t) {
      json j{{"violation", t.violation.has_value()}};
      if (t.violation) j["violation_time"] = t.violation->time;
      j["left_domain"] = t.left_domain.has_value();
      j["final_goal_distance"] = goal_distance(ctx.cfg, t.states.back());
      if (!t.diagnostics.empty()) {
        long corrected = 0;
        for (const auto& d : t.diagnostics) corrected += d.corrected ? 1 : 0;
        j["corrected_steps"] = corrected;
      }
      return j;
    };
    s["simulate"] = {{"ref", sim_json(ref_traj)}, {"filtered", sim_json(fil_traj)}};
    s["audit"] = audit_json(audit, ctx.cfg.audit);

    json targets;
    auto target = [&](const char* name, bool ok) {
      targets[name] = ok;
      log << (ok ? "PASS " : "FAIL ") << name << '\n';
    };
    if (*env == Environment::Pendulum) {
      target("mean_w_safe_below_0.15", w_safe < 0.15);
      target("mean_w_unsafe_above_0.85", w_unsafe > 0.85);
      target("loss_drop_10x", !tr.history.empty() && tr.history.back().total * 10.0 <= tr.history.front().total);
    }
    target("levelset_areas_increase_3x", strict_increases(levels) >= 3);
    if (*env != Environment::Pendulum) {
      target("ref_enters_unsafe", ref_traj.violation.has_value());
      target("filtered_avoids_unsafe", !fil_traj.violation.has_value());
    }
    if (*env == Environment::Unicycle) {
      target("filtered_reaches_goal_0.2", goal_distance(ctx.cfg, fil_traj.states.back()) <= 0.2);
    }
    target("audit_violations_only_at_zero_lgb", audit.violations_nonzero_lgb == 0);
    s["targets"] = targets;
    write_json(ctx.out / kSummaryFile, s);
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zubov-trained neural barrier functions and safety filters"};
  app.require_subcommand(1);

  Options opts;
  std::string config, checkpoint, out_dir, mode, case_name;
  std::vector<double> gammas;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Run configuration (YAML)");
    sub->add_option("--out", out_dir, "Output directory, overrides paths.output_dir");
  };
  auto* train_cmd = app.add_subcommand("train", "Train the barrier network");
  add_common(train_cmd);
  train_cmd->add_option("--checkpoint", checkpoint, "Not accepted; present for a clear error");
  auto* grid_cmd = app.add_subcommand("eval-grid", "Evaluate W on a 2-D slice and report sub-level sets");
  add_common(grid_cmd);
  grid_cmd->add_option("--checkpoint", checkpoint, "Network checkpoint");
  grid_cmd->add_option("--gammas", gammas, "Level values, comma separated")->delimiter(',');
  auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop rollout");
  add_common(sim_cmd);
  sim_cmd->add_option("--checkpoint", checkpoint, "Network checkpoint");
  sim_cmd->add_option("--mode", mode, "ref or filtered")->check(CLI::IsMember({"ref", "filtered"}));
  auto* audit_cmd = app.add_subcommand("audit", "Check the barrier condition on random states");
  add_common(audit_cmd);
  audit_cmd->add_option("--checkpoint", checkpoint, "Network checkpoint");
  auto* repro_cmd = app.add_subcommand("reproduce", "Full pipeline for a shipped case");
  repro_cmd->add_option("case", case_name, "pendulum, unicycle or quadrotor")->required();
  add_common(repro_cmd);
  repro_cmd->add_option("--checkpoint", checkpoint, "Not accepted; present for a clear error");
  repro_cmd->add_option("--gammas", gammas, "Level values, comma separated")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  opts.config = config;
  if (!checkpoint.empty()) opts.checkpoint = checkpoint;
  if (!out_dir.empty()) opts.out = out_dir;
  if (!gammas.empty()) opts.gammas = gammas;
  if (!mode.empty()) opts.mode = mode == "ref" ? SimMode::ReferenceOnly : SimMode::BarrierFiltered;

  if (train_cmd->parsed()) return cmd_train(opts, out, err);
  if (grid_cmd->parsed()) return cmd_eval_grid(opts, out, err);
  if (sim_cmd->parsed()) return cmd_simulate(opts, out, err);
  if (audit_cmd->parsed()) return cmd_audit(opts, out, err);
  return cmd_reproduce(case_name, opts, out, err);
}

}  // namespace zcbf::cli
