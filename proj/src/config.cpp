#include "zcbf/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace zcbf {

const char* environment_name(Environment e) {
  switch (e) {
    case Environment::Pendulum:
      return "pendulum";
    case Environment::Unicycle:
      return "unicycle";
    case Environment::Quadrotor:
      return "quadrotor";
  }
  return "unknown";
}

std::optional<Environment> parse_environment(const std::string& name) {
  if (name == "pendulum") return Environment::Pendulum;
  if (name == "unicycle") return Environment::Unicycle;
  if (name == "quadrotor") return Environment::Quadrotor;
  return std::nullopt;
}

namespace {

/// Typed access to one YAML mapping with dotted-key error messages.
class Section {
 public:
  Section(YAML::Node node, std::string prefix) : node_(std::move(node)), prefix_(std::move(prefix)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(where() + " must be a mapping");
  }

  bool present() const { return node_ && node_.IsMap(); }
  std::string key(const std::string& k) const { return prefix_.empty() ? k : prefix_ + "." + k; }

  void allow(std::initializer_list<const char*> keys) const {
    if (!present()) return;
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!ok.count(k)) throw ConfigError(key(k) + " is not a recognised key");
    }
  }

  Section sub(const std::string& k) const { return {present() ? node_[k] : YAML::Node(), key(k)}; }
  YAML::Node raw(const std::string& k) const { return present() ? node_[k] : YAML::Node(); }

  template <typename T>
  bool get(const std::string& k, T& out) const {
    if (!present() || !node_[k]) return false;
    try {
      out = node_[k].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key(k) + " has the wrong type");
    }
    return true;
  }

  bool get_vector(const std::string& k, Eigen::VectorXd& out) const {
    std::vector<double> v;
    if (!get(k, v)) return false;
    out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return true;
  }

 private:
  std::string where() const { return prefix_.empty() ? "config" : prefix_; }
  YAML::Node node_;
  std::string prefix_;
};

RegionSpec read_region(const Section& s, RegionSpec fallback) {
  if (!s.present()) return fallback;
  s.allow({"join", "bounds"});
  RegionSpec r = fallback;
  std::string join;
  if (s.get("join", join)) {
    if (join == "all") {
      r.join = RegionSpec::Join::All;
    } else if (join == "any") {
      r.join = RegionSpec::Join::Any;
    } else {
      throw ConfigError(s.key("join") + " must be 'all' or 'any'");
    }
  }
  const YAML::Node bounds = s.raw("bounds");
  if (bounds) {
    if (!bounds.IsSequence()) throw ConfigError(s.key("bounds") + " must be a list");
    r.bounds.clear();
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const Section b(bounds[i], s.key("bounds") + "[" + std::to_string(i) + "]");
      b.allow({"coord", "side", "threshold"});
      AbsBound ab;
      std::string side;
      if (!b.get("coord", ab.coord) || !b.get("side", side) || !b.get("threshold", ab.threshold)) {
        throw ConfigError(b.key("coord") + "/side/threshold are all required");
      }
      if (side == "within") {
        ab.side = AbsBound::Side::Within;
      } else if (side == "beyond") {
        ab.side = AbsBound::Side::Beyond;
      } else {
        throw ConfigError(b.key("side") + " must be 'within' or 'beyond'");
      }
      r.bounds.push_back(ab);
    }
  }
  return r;
}

void read_pid(const Section& s, PidGains& k) {
  s.allow({"kp_y", "kd_y", "ki_y", "kp_z", "kd_z", "ki_z", "kp_phi", "kd_phi", "max_tilt", "integral_limit"});
  s.get("kp_y", k.kp_y);
  s.get("kd_y", k.kd_y);
  s.get("ki_y", k.ki_y);
  s.get("kp_z", k.kp_z);
  s.get("kd_z", k.kd_z);
  s.get("ki_z", k.ki_z);
  s.get("kp_phi", k.kp_phi);
  s.get("kd_phi", k.kd_phi);
  s.get("max_tilt", k.max_tilt);
  s.get("integral_limit", k.integral_limit);
}

void emit_vector(YAML::Emitter& out, const Eigen::VectorXd& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i];
  out << YAML::EndSeq;
}

void emit_region(YAML::Emitter& out, const RegionSpec& r) {
  out << YAML::BeginMap;
  out << YAML::Key << "join" << YAML::Value << (r.join == RegionSpec::Join::All ? "all" : "any");
  out << YAML::Key << "bounds" << YAML::Value << YAML::BeginSeq;
  for (const auto& b : r.bounds) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "coord" << YAML::Value << b.coord;
    out << YAML::Key << "side" << YAML::Value << (b.side == AbsBound::Side::Within ? "within" : "beyond");
    out << YAML::Key << "threshold" << YAML::Value << b.threshold;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
}

}  // namespace

void validate(const RunConfig& cfg) {
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.filter.alpha != cfg.train.alpha) throw ConfigError("filter.alpha must equal train.alpha");
  try {
    cfg.filter.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.unicycle.speed <= 0.0) throw ConfigError("unicycle.speed must be positive");
  if (cfg.unicycle.gain <= 0.0) throw ConfigError("unicycle.gain must be positive");
  if (cfg.quadrotor.target.size() != 6) throw ConfigError("quadrotor.target must have 6 entries");

  ControlAffineSystem sys;
  try {
    sys = make_system(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(environment_name(cfg.environment)) + ": " + e.what());
  }
  if (cfg.filter.u_bounds && cfg.filter.u_bounds->lower.size() != sys.m) {
    throw ConfigError("filter.u_bounds must have one entry per control input");
  }
  try {
    cfg.sim.validate(sys.domain);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.grid.fixed && cfg.grid.fixed->size() != sys.n) throw ConfigError("grid.fixed has the wrong dimension");
  try {
    make_slice(cfg, sys).validate(sys.domain);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  for (std::size_t k = 0; k < cfg.grid.gammas.size(); ++k) {
    const double g = cfg.grid.gammas[k];
    if (!(g > 0.0 && g < 1.0) || (k > 0 && !(g > cfg.grid.gammas[k - 1]))) {
      throw ConfigError("grid.gammas must be strictly increasing values in (0, 1)");
    }
  }
  if (cfg.audit.samples <= 0) throw ConfigError("audit.samples must be positive");
  if (!(cfg.audit.gamma > 0.0 && cfg.audit.gamma < 1.0)) throw ConfigError("audit.gamma must lie in (0, 1)");
  if (!(cfg.audit.tol >= 0.0)) throw ConfigError("audit.tol must be non-negative");
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  const Section top(root, "");
  top.allow({"environment", "seed", "train", "filter", "sim", "grid", "audit", "unicycle", "quadrotor", "paths"});

  RunConfig cfg;
  std::string env;
  if (!top.get("environment", env)) throw ConfigError("environment is required");
  const auto parsed_env = parse_environment(env);
  if (!parsed_env) throw ConfigError("environment must be one of pendulum, unicycle, quadrotor");
  cfg.environment = *parsed_env;
  top.get("seed", cfg.seed);

  const Section train = top.sub("train");
  train.allow({"alpha", "weights", "n_interior", "n_boundary", "n_safe", "n_unsafe", "batch_size",
               "learning_rate", "max_epochs", "loss_threshold", "hidden"});
  train.get("alpha", cfg.train.alpha);
  const Section weights = train.sub("weights");
  weights.allow({"residual", "boundary", "safe", "unsafe"});
  weights.get("residual", cfg.train.weights.residual);
  weights.get("boundary", cfg.train.weights.boundary);
  weights.get("safe", cfg.train.weights.safe);
  weights.get("unsafe", cfg.train.weights.unsafe);
  train.get("n_interior", cfg.train.n_interior);
  train.get("n_boundary", cfg.train.n_boundary);
  train.get("n_safe", cfg.train.n_safe);
  train.get("n_unsafe", cfg.train.n_unsafe);
  train.get("batch_size", cfg.train.batch_size);
  train.get("learning_rate", cfg.train.learning_rate);
  train.get("max_epochs", cfg.train.max_epochs);
  train.get("loss_threshold", cfg.train.loss_threshold);
  train.get("hidden", cfg.train.hidden);
  cfg.train.seed = cfg.seed;
  cfg.audit.seed = cfg.seed + 1;

  const Section filter = top.sub("filter");
  filter.allow({"alpha", "kappa", "epsilon", "w_clamp", "u_bounds"});
  cfg.filter.alpha = cfg.train.alpha;
  if (filter.get("alpha", cfg.filter.alpha) && cfg.filter.alpha != cfg.train.alpha) {
    throw ConfigError("filter.alpha must equal train.alpha");
  }
  filter.get("kappa", cfg.filter.kappa);
  filter.get("epsilon", cfg.filter.epsilon);
  filter.get("w_clamp", cfg.filter.w_clamp);
  const Section ub = filter.sub("u_bounds");
  if (ub.present()) {
    ub.allow({"lower", "upper"});
    ControlBounds b;
    if (!ub.get_vector("lower", b.lower) || !ub.get_vector("upper", b.upper)) {
      throw ConfigError("filter.u_bounds needs both lower and upper");
    }
    cfg.filter.u_bounds = b;
  }

  const Section sim = top.sub("sim");
  sim.allow({"x0", "t_final", "dt", "mode", "solver"});
  if (!sim.get_vector("x0", cfg.sim.x0)) throw ConfigError("sim.x0 is required");
  sim.get("t_final", cfg.sim.t_final);
  sim.get("dt", cfg.sim.dt);
  std::string mode;
  if (sim.get("mode", mode)) {
    if (mode == "ref") {
      cfg.sim.mode = SimMode::ReferenceOnly;
    } else if (mode == "filtered") {
      cfg.sim.mode = SimMode::BarrierFiltered;
    } else {
      throw ConfigError("sim.mode must be 'ref' or 'filtered'");
    }
  }
  std::string solver;
  if (sim.get("solver", solver)) {
    if (solver == "closed_form") {
      cfg.sim.solver = FilterSolver::ClosedForm;
    } else if (solver == "qp") {
      cfg.sim.solver = FilterSolver::Qp;
    } else {
      throw ConfigError("sim.solver must be 'closed_form' or 'qp'");
    }
  }

  const Section grid = top.sub("grid");
  grid.allow({"axis_i", "axis_j", "resolution", "fixed", "gammas"});
  grid.get("axis_i", cfg.grid.axis_i);
  grid.get("axis_j", cfg.grid.axis_j);
  grid.get("resolution", cfg.grid.resolution);
  Eigen::VectorXd fixed;
  if (grid.get_vector("fixed", fixed)) cfg.grid.fixed = fixed;
  grid.get("gammas", cfg.grid.gammas);

  const Section audit = top.sub("audit");
  audit.allow({"samples", "gamma", "tol"});
  audit.get("samples", cfg.audit.samples);
  audit.get("gamma", cfg.audit.gamma);
  audit.get("tol", cfg.audit.tol);

  const Section uni = top.sub("unicycle");
  uni.allow({"speed", "gain", "goal"});
  uni.get("speed", cfg.unicycle.speed);
  uni.get("gain", cfg.unicycle.gain);
  Eigen::VectorXd goal;
  if (uni.get_vector("goal", goal)) {
    if (goal.size() != 2) throw ConfigError("unicycle.goal must have 2 entries");
    cfg.unicycle.goal = goal;
  }

  const Section quad = top.sub("quadrotor");
  quad.allow({"target", "pid", "domain", "safe", "unsafe"});
  quad.get_vector("target", cfg.quadrotor.target);
  read_pid(quad.sub("pid"), cfg.quadrotor.pid);
  const Section dom = quad.sub("domain");
  if (dom.present()) {
    dom.allow({"lower", "upper"});
    if (!dom.get_vector("lower", cfg.quadrotor.regions.domain.lower) ||
        !dom.get_vector("upper", cfg.quadrotor.regions.domain.upper)) {
      throw ConfigError("quadrotor.domain needs both lower and upper");
    }
  }
  cfg.quadrotor.regions.safe = read_region(quad.sub("safe"), cfg.quadrotor.regions.safe);
  cfg.quadrotor.regions.unsafe = read_region(quad.sub("unsafe"), cfg.quadrotor.regions.unsafe);

  const Section paths = top.sub("paths");
  paths.allow({"output_dir"});
  paths.get("output_dir", cfg.paths.output_dir);

  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_yaml(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "environment" << YAML::Value << environment_name(cfg.environment);
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;

  const auto& t = cfg.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "alpha" << YAML::Value << t.alpha;
  out << YAML::Key << "weights" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "residual" << YAML::Value << t.weights.residual;
  out << YAML::Key << "boundary" << YAML::Value << t.weights.boundary;
  out << YAML::Key << "safe" << YAML::Value << t.weights.safe;
  out << YAML::Key << "unsafe" << YAML::Value << t.weights.unsafe;
  out << YAML::EndMap;
  out << YAML::Key << "n_interior" << YAML::Value << t.n_interior;
  out << YAML::Key << "n_boundary" << YAML::Value << t.n_boundary;
  out << YAML::Key << "n_safe" << YAML::Value << t.n_safe;
  out << YAML::Key << "n_unsafe" << YAML::Value << t.n_unsafe;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "max_epochs" << YAML::Value << t.max_epochs;
  out << YAML::Key << "loss_threshold" << YAML::Value << t.loss_threshold;
  out << YAML::Key << "hidden" << YAML::Value << YAML::Flow << t.hidden;
  out << YAML::EndMap;

  const auto& f = cfg.filter;
  out << YAML::Key << "filter" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "alpha" << YAML::Value << f.alpha;
  out << YAML::Key << "kappa" << YAML::Value << f.kappa;
  out << YAML::Key << "epsilon" << YAML::Value << f.epsilon;
  out << YAML::Key << "w_clamp" << YAML::Value << f.w_clamp;
  if (f.u_bounds) {
    out << YAML::Key << "u_bounds" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "lower" << YAML::Value;
    emit_vector(out, f.u_bounds->lower);
    out << YAML::Key << "upper" << YAML::Value;
    emit_vector(out, f.u_bounds->upper);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "x0" << YAML::Value;
  emit_vector(out, cfg.sim.x0);
  out << YAML::Key << "t_final" << YAML::Value << cfg.sim.t_final;
  out << YAML::Key << "dt" << YAML::Value << cfg.sim.dt;
  out << YAML::Key << "mode" << YAML::Value << (cfg.sim.mode == SimMode::ReferenceOnly ? "ref" : "filtered");
  out << YAML::Key << "solver" << YAML::Value << (cfg.sim.solver == FilterSolver::Qp ? "qp" : "closed_form");
  out << YAML::EndMap;

  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "axis_i" << YAML::Value << cfg.grid.axis_i;
  out << YAML::Key << "axis_j" << YAML::Value << cfg.grid.axis_j;
  out << YAML::Key << "resolution" << YAML::Value << cfg.grid.resolution;
  if (cfg.grid.fixed) {
    out << YAML::Key << "fixed" << YAML::Value;
    emit_vector(out, *cfg.grid.fixed);
  }
  out << YAML::Key << "gammas" << YAML::Value << YAML::Flow << cfg.grid.gammas;
  out << YAML::EndMap;

  out << YAML::Key << "audit" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "samples" << YAML::Value << cfg.audit.samples;
  out << YAML::Key << "gamma" << YAML::Value << cfg.audit.gamma;
  out << YAML::Key << "tol" << YAML::Value << cfg.audit.tol;
  out << YAML::EndMap;

  out << YAML::Key << "unicycle" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "speed" << YAML::Value << cfg.unicycle.speed;
  out << YAML::Key << "gain" << YAML::Value << cfg.unicycle.gain;
  out << YAML::Key << "goal" << YAML::Value;
  emit_vector(out, cfg.unicycle.goal);
  out << YAML::EndMap;

  const auto& q = cfg.quadrotor;
  out << YAML::Key << "quadrotor" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "target" << YAML::Value;
  emit_vector(out, q.target);
  out << YAML::Key << "pid" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "kp_y" << YAML::Value << q.pid.kp_y;
  out << YAML::Key << "kd_y" << YAML::Value << q.pid.kd_y;
  out << YAML::Key << "ki_y" << YAML::Value << q.pid.ki_y;
  out << YAML::Key << "kp_z" << YAML::Value << q.pid.kp_z;
  out << YAML::Key << "kd_z" << YAML::Value << q.pid.kd_z;
  out << YAML::Key << "ki_z" << YAML::Value << q.pid.ki_z;
  out << YAML::Key << "kp_phi" << YAML::Value << q.pid.kp_phi;
  out << YAML::Key << "kd_phi" << YAML::Value << q.pid.kd_phi;
  out << YAML::Key << "max_tilt" << YAML::Value << q.pid.max_tilt;
  out << YAML::Key << "integral_limit" << YAML::Value << q.pid.integral_limit;
  out << YAML::EndMap;
  out << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lower" << YAML::Value;
  emit_vector(out, q.regions.domain.lower);
  out << YAML::Key << "upper" << YAML::Value;
  emit_vector(out, q.regions.domain.upper);
  out << YAML::EndMap;
  out << YAML::Key << "safe" << YAML::Value;
  emit_region(out, q.regions.safe);
  out << YAML::Key << "unsafe" << YAML::Value;
  emit_region(out, q.regions.unsafe);
  out << YAML::EndMap;

  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "output_dir" << YAML::Value << cfg.paths.output_dir;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ControlAffineSystem make_system(const RunConfig& cfg) {
  switch (cfg.environment) {
    case Environment::Pendulum:
      return pendulum_system();
    case Environment::Unicycle:
      return unicycle_system(cfg.unicycle.speed);
    case Environment::Quadrotor:
      return quadrotor_system(cfg.quadrotor.regions);
  }
  throw ConfigError("environment: unknown");
}

std::unique_ptr<ReferenceController> make_reference(const RunConfig& cfg) {
  switch (cfg.environment) {
    case Environment::Pendulum:
      return std::make_unique<ZeroReference>(1);
    case Environment::Unicycle:
      return std::make_unique<UnicycleReference>(cfg.unicycle.goal, cfg.unicycle.gain);
    case Environment::Quadrotor:
      return std::make_unique<QuadrotorPid>(cfg.quadrotor.target, cfg.quadrotor.pid);
  }
  throw ConfigError("environment: unknown");
}

GridSlice make_slice(const RunConfig& cfg, const ControlAffineSystem& sys) {
  GridSlice s = GridSlice::over_domain(sys.domain, cfg.grid.axis_i, cfg.grid.axis_j, cfg.grid.resolution);
  if (cfg.grid.fixed) s.fixed = *cfg.grid.fixed;
  return s;
}

}  // namespace zcbf
