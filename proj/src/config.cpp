#include "rtmpc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rtmpc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

Vec parse_vec(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> entries;
  double v = 0.0;
  while (in >> v) {
    entries.push_back(v);
  }
  Vec result(static_cast<long>(entries.size()));
  for (size_t i = 0; i < entries.size(); ++i) {
    result(static_cast<long>(i)) = entries[i];
  }
  return result;
}

Mat parse_mat(const std::string& text) {
  std::vector<Vec> rows;
  std::string row;
  std::istringstream in(text);
  while (std::getline(in, row, ';')) {
    const std::string trimmed = trim(row);
    if (!trimmed.empty()) {
      rows.push_back(parse_vec(trimmed));
    }
  }
  if (rows.empty()) {
    return Mat(0, 0);
  }
  Mat result(static_cast<long>(rows.size()), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != result.cols()) {
      throw std::invalid_argument("matrix rows have inconsistent lengths");
    }
    result.row(static_cast<long>(i)) = rows[i].transpose();
  }
  return result;
}

}  // namespace

ConfigMap ConfigMap::parse(const std::string& text) {
  ConfigMap config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    const auto comment = line.find('#');
    if (comment != std::string::npos) {
      line = line.substr(0, comment);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line without '=': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    config.values_[section.empty() ? key : section + "." + key] = value;
  }
  return config;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string ConfigMap::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("missing config key: " + key);
  }
  return it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stod(it->second);
}

long ConfigMap::get_long(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stol(it->second);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    return false;
  }
  throw std::invalid_argument("config key " + key + " is not a boolean: " + v);
}

Vec ConfigMap::get_vec(const std::string& key, const Vec& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_vec(it->second);
}

Vec ConfigMap::require_vec(const std::string& key) const { return parse_vec(require_string(key)); }

Mat ConfigMap::require_mat(const std::string& key) const { return parse_mat(require_string(key)); }

Mat ConfigMap::get_mat(const std::string& key, const Mat& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_mat(it->second);
}

void ConfigMap::merge(const ConfigMap& other) {
  for (const auto& [key, value] : other.entries()) {
    values_[key] = value;
  }
}

std::vector<std::string> preset_names() { return {"double-integrator", "unicycle", "servo"}; }

std::string preset_config_text(const std::string& name) {
  if (name == "double-integrator") {
    return R"(# Constrained double integrator, regulation to the origin.
name = double-integrator
plant = double-integrator
Ts = 0.1
horizon = 10
sim_steps = 3000
x0 = 0.9 -0.9

[cost]
Q = 1 0; 0 1
R = 1
epsilon = 0.01
delta = 0.1

[constraints]
state_C = 1 0; -1 0; 0 1; 0 -1
state_d = 3 2 1 1
input_C = 1; -1
input_d = 1 1

[optimizer]
rho = 0.5
c1 = 0.001
c2 = 0.999
iterations = 2

[disturbance]
kind = quasiperiodic
amplitude = 0.09
frequency = 1.0

[learning]
learner = hull
threshold = 0.01
)";
  }
  if (name == "unicycle") {
    return R"(# Unicycle parking task, repeated from a fixed start.
name = unicycle
plant = unicycle
Ts = 0.1
horizon = 10
sim_steps = 2401
x0 = 1 1 2.5707963267948966

[optimizer]
rho = 0.5
c1 = 0.001
c2 = 0.999
iterations = 2

[disturbance]
kind = reset-schedule
reset_period = 120

[learning]
learner = lipschitz
threshold = 0.01
)";
  }
  if (name == "servo") {
    return R"(# DC servomechanism tracking a periodic step reference.
# Physical parameters follow the classic benchmark model; they are
# configuration, not asserted ground truth.
name = servo
plant = servo
Ts = 0.1
horizon = 10
sim_steps = 6000
x0 = 0 0 0 0

[servo]
k_theta = 1280.2
J_L = 25.0
J_M = 0.5
beta_L = 25.0
beta_M = 0.1
gear_ratio = 20.0
K_T = 10.0
R_armature = 20.0
T_max = 78.53981633974483
V_max = 220.0
load_angle_max = 2.0
load_speed_max = 2.0
speed_sum_max = 40.0

[cost]
Q = 10 0 0 0; 0 0.1 0 0; 0 0 10 0; 0 0 0 0.1
R = 0.01
epsilon = 0.001
delta = 0.1

[optimizer]
rho = 0.5
c1 = 0.001
c2 = 0.999
iterations = 2

[reference]
kind = periodic-step
period = 200
amplitude = 0.5

[learning]
learner = hull
threshold = 0.01
seed_vertices = true
)";
  }
  throw std::invalid_argument("unknown scenario preset: " + name);
}

namespace {

LearnerKind parse_learner(const std::string& name) {
  if (name == "off" || name == "none") {
    return LearnerKind::off;
  }
  if (name == "hull") {
    return LearnerKind::hull;
  }
  if (name == "lipschitz") {
    return LearnerKind::lipschitz;
  }
  throw std::invalid_argument("unknown learner: " + name);
}

DisturbanceSignal parse_disturbance(const ConfigMap& config, double Ts, const Vec& x0) {
  DisturbanceSignal signal;
  const std::string kind = config.get_string("disturbance.kind", "none");
  if (kind == "none") {
    signal.kind = DisturbanceSignal::Kind::none;
  } else if (kind == "quasiperiodic") {
    signal.kind = DisturbanceSignal::Kind::quasiperiodic;
    signal.amplitude = config.get_double("disturbance.amplitude", 0.0);
    signal.frequency = config.get_double("disturbance.frequency", 1.0);
    signal.sample_time = Ts;
  } else if (kind == "reset-schedule") {
    signal.kind = DisturbanceSignal::Kind::reset_schedule;
    signal.reset_period = config.get_long("disturbance.reset_period", 0);
    signal.reset_state = config.get_vec("disturbance.reset_state", x0);
    if (signal.reset_period < 1) {
      throw std::invalid_argument("reset-schedule disturbance needs reset_period >= 1");
    }
  } else {
    throw std::invalid_argument("unknown disturbance kind: " + kind);
  }
  return signal;
}

}  // namespace

Scenario build_scenario(const ConfigMap& config) {
  Scenario scenario;
  scenario.name = config.get_string("name", "scenario");
  scenario.Ts = config.get_double("Ts", 0.1);
  const int horizon = static_cast<int>(config.get_long("horizon", 10));
  scenario.sim_steps = config.get_long("sim_steps", 1000);
  scenario.x0 = config.require_vec("x0");

  scenario.optimizer.rho = config.get_double("optimizer.rho", 0.5);
  scenario.optimizer.c1 = config.get_double("optimizer.c1", 1e-3);
  scenario.optimizer.c2 = config.get_double("optimizer.c2", 0.999);
  scenario.optimizer.max_backtracks =
      static_cast<int>(config.get_long("optimizer.max_backtracks", 48));
  scenario.optimizer.oracle_grad_tol = config.get_double("optimizer.oracle_grad_tol", 1e-8);
  scenario.optimizer.oracle_max_iterations =
      config.get_long("optimizer.oracle_max_iterations", 100000);
  scenario.budget.count = static_cast<int>(config.get_long("optimizer.iterations", 2));
  scenario.budget.wall_clock_seconds = config.get_double("optimizer.wall_clock_seconds", 0.0);

  scenario.reference.kind = ReferenceSignal::Kind::none;
  const std::string ref_kind = config.get_string("reference.kind", "none");
  if (ref_kind == "periodic-step") {
    scenario.reference.kind = ReferenceSignal::Kind::periodic_step;
    scenario.reference.period = config.get_long("reference.period", 200);
    scenario.reference.amplitude = config.get_double("reference.amplitude", 0.5);
  } else if (ref_kind != "none") {
    throw std::invalid_argument("unknown reference kind: " + ref_kind);
  }

  const std::string plant_name = config.require_string("plant");
  if (plant_name == "double-integrator" || plant_name == "servo") {
    Mat A, B;
    Mat state_C, input_C;
    Vec state_d, input_d;
    Vec reference_direction;
    if (plant_name == "double-integrator") {
      scenario.plant = make_double_integrator_plant(scenario.Ts);
      A = scenario.plant.jacobian_x(Vec::Zero(2), Vec::Zero(1));
      B = scenario.plant.jacobian_u(Vec::Zero(2), Vec::Zero(1));
      state_C = config.get_mat("constraints.state_C", Mat(0, 0));
      state_d = config.get_vec("constraints.state_d", Vec(0));
      input_C = config.get_mat("constraints.input_C", Mat(0, 0));
      input_d = config.get_vec("constraints.input_d", Vec(0));
    } else {
      const double k_theta = config.get_double("servo.k_theta", 1280.2);
      const double JL = config.get_double("servo.J_L", 25.0);
      const double JM = config.get_double("servo.J_M", 0.5);
      const double bL = config.get_double("servo.beta_L", 25.0);
      const double bM = config.get_double("servo.beta_M", 0.1);
      const double rho = config.get_double("servo.gear_ratio", 20.0);
      const double KT = config.get_double("servo.K_T", 10.0);
      const double Ra = config.get_double("servo.R_armature", 20.0);
      const double T_max = config.get_double("servo.T_max", 78.53981633974483);
      const double V_max = config.get_double("servo.V_max", 220.0);
      Mat Ac = Mat::Zero(4, 4);
      Ac(0, 1) = 1.0;
      Ac(1, 0) = -k_theta / JL;
      Ac(1, 1) = -bL / JL;
      Ac(1, 2) = k_theta / (rho * JL);
      Ac(2, 3) = 1.0;
      Ac(3, 0) = k_theta / (rho * JM);
      Ac(3, 2) = -k_theta / (rho * rho * JM);
      Ac(3, 3) = -(bM * Ra + KT * KT) / (JM * Ra);
      Mat Bc = Mat::Zero(4, 1);
      Bc(3, 0) = KT / (Ra * JM);
      std::tie(A, B) = discretize_zoh(Ac, Bc, scenario.Ts);
      scenario.plant = make_linear_plant(A, B);

      const double x1_max = config.get_double("servo.load_angle_max", 2.0);
      const double x2_max = config.get_double("servo.load_speed_max", 2.0);
      const double sum_max = config.get_double("servo.speed_sum_max", 40.0);
      state_C = Mat::Zero(8, 4);
      state_d = Vec::Zero(8);
      state_C.row(0) << k_theta, 0.0, -k_theta / rho, 0.0;
      state_C.row(1) << -k_theta, 0.0, k_theta / rho, 0.0;
      state_d(0) = state_d(1) = T_max;
      state_C.row(2) << 1.0, 0.0, 0.0, 0.0;
      state_C.row(3) << -1.0, 0.0, 0.0, 0.0;
      state_d(2) = state_d(3) = x1_max;
      state_C.row(4) << 0.0, 1.0, 0.0, 0.0;
      state_C.row(5) << 0.0, -1.0, 0.0, 0.0;
      state_d(4) = state_d(5) = x2_max;
      state_C.row(6) << 0.0, 1.0, 0.0, 1.0;
      state_C.row(7) << 0.0, -1.0, 0.0, -1.0;
      state_d(6) = state_d(7) = sum_max;
      input_C = Mat(2, 1);
      input_C << 1.0, -1.0;
      input_d = Vec(2);
      input_d << V_max, V_max;
      reference_direction = Vec(4);
      reference_direction << 1.0, 0.0, rho, 0.0;
    }

    QuadraticBarrierCost::Params params;
    params.Q = config.require_mat("cost.Q");
    params.R = config.require_mat("cost.R");
    params.epsilon = config.get_double("cost.epsilon", 0.0);
    params.delta = config.get_double("cost.delta", 0.1);
    params.state_C = state_C;
    params.state_d = state_d;
    params.input_C = input_C;
    params.input_d = input_d;
    params.reference_direction = reference_direction;
    auto cost = std::make_shared<QuadraticBarrierCost>(scenario.plant, horizon, params);
    scenario.warm_start.tail = TemporalWarmStartPolicy::Tail::local_gain;
    scenario.warm_start.gain = cost->local_gain();
    scenario.cost = std::move(cost);
    scenario.state_C = state_C;
    scenario.state_d = state_d;
  } else if (plant_name == "unicycle") {
    scenario.plant = make_unicycle_plant(scenario.Ts);
    scenario.cost = std::make_shared<UnicycleCost>(scenario.plant, horizon, scenario.Ts);
    scenario.warm_start.tail = TemporalWarmStartPolicy::Tail::zero;
  } else {
    throw std::invalid_argument("unknown plant: " + plant_name);
  }

  scenario.disturbance = parse_disturbance(config, scenario.Ts, scenario.x0);

  scenario.learning.kind = parse_learner(config.get_string("learning.learner", "off"));
  scenario.learning.significance_threshold = config.get_double("learning.threshold", 1e-2);
  scenario.learning.seed_polytope_vertices = config.get_bool("learning.seed_vertices", false);
  scenario.learning.seed_origin = config.get_bool("learning.seed_origin", false);
  scenario.learning.lipschitz_scale = config.get_double("learning.lipschitz_scale", 1.0);
  scenario.learning.async.enabled = config.get_bool("learning.async", false);
  scenario.learning.async.min_delay =
      static_cast<int>(config.get_long("learning.async_min_delay", 0));
  scenario.learning.async.max_delay =
      static_cast<int>(config.get_long("learning.async_max_delay", 0));
  scenario.learning.async.seed =
      static_cast<std::uint64_t>(config.get_long("learning.async_seed", 0));
  return scenario;
}

}  // namespace rtmpc
