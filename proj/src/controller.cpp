#include "rtmpc/controller.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace rtmpc {

LearnerFacade::LearnerFacade(const Scenario& scenario)
    : kind_(scenario.learning.kind),
      threshold_(scenario.learning.significance_threshold),
      lipschitz_scale_(scenario.learning.lipschitz_scale),
      cost_(scenario.cost.get()),
      state_dim_(scenario.plant.state_dim),
      async_(scenario.learning.async),
      rng_(scenario.learning.async.seed) {
  if (threshold_ < 0.0) {
    throw std::invalid_argument("LearnerFacade: significance threshold must be >= 0");
  }
}

bool LearnerFacade::ready() const {
  switch (kind_) {
    case LearnerKind::off:
      return false;
    case LearnerKind::hull:
      return hull_.has_value();
    case LearnerKind::lipschitz:
      return !lipschitz_.empty();
  }
  return false;
}

LearnerFacade::QueryResult LearnerFacade::query(const Vec& x) {
  QueryResult result;
  if (kind_ == LearnerKind::off) {
    return result;
  }
  if (kind_ == LearnerKind::hull) {
    if (!hull_.has_value()) {
      return result;
    }
    const auto sw = hull_->generate(x, guess_hint_);
    if (!sw.has_value()) {
      ++stats_.walk_aborts;
      result.aborted = true;
      return result;
    }
    guess_hint_ = sw->next_guess;
    result.available = true;
    result.input = sw->input;
    result.facet = sw->facet;
    result.bound = sw->facet > 0 ? sw->value : kInfinity;
    return result;
  }
  const auto q = lipschitz_.query(x);
  if (!q.has_value()) {
    return result;
  }
  result.available = true;
  result.input = lipschitz_.record(q->index).U;
  result.bound = q->value;
  return result;
}

void LearnerFacade::offer(const Vec& x, const Vec& U, double J, const QueryResult& at_query,
                          long k) {
  if (kind_ == LearnerKind::off) {
    return;
  }
  if (!std::isfinite(J) || !U.allFinite() || !x.allFinite()) {
    ++stats_.skipped_error;
    return;
  }
  if (at_query.aborted) {
    ++stats_.skipped_error;  // location unknown this step; skip the update
    return;
  }
  PendingPoint point{x, U, J, 0.0, at_query.facet};
  if (kind_ == LearnerKind::lipschitz) {
    point.L = lipschitz_scale_ * cost_->lipschitz_bound(U);
    if (!(point.L > 0.0) || !std::isfinite(point.L)) {
      ++stats_.skipped_error;
      return;
    }
  }
  const bool outside_hull = kind_ == LearnerKind::hull && hull_.has_value() && at_query.facet < 0;
  if (!outside_hull && at_query.bound - J <= threshold_) {
    ++stats_.skipped_small;
    return;
  }
  enqueue(std::move(point), k);
}

void LearnerFacade::enqueue(PendingPoint point, long k) {
  if (!async_.enabled) {
    commit(point, /*trust_hint=*/true);
    return;
  }
  if (in_flight_.has_value()) {
    if (queued_.has_value()) {
      ++stats_.skipped_busy;  // displaced: update still running
    }
    queued_ = std::move(point);
    return;
  }
  start(std::move(point), k);
}

void LearnerFacade::start(PendingPoint point, long k) {
  in_flight_ = std::move(point);
  in_flight_done_ = k + draw_delay();
}

int LearnerFacade::draw_delay() {
  if (async_.max_delay <= async_.min_delay) {
    return async_.min_delay;
  }
  std::uniform_int_distribution<int> dist(async_.min_delay, async_.max_delay);
  return dist(rng_);
}

void LearnerFacade::tick(long k) {
  while (in_flight_.has_value() && k > in_flight_done_) {
    const PendingPoint done = std::move(*in_flight_);
    in_flight_.reset();
    commit(done, /*trust_hint=*/false);
    if (queued_.has_value()) {
      PendingPoint next = std::move(*queued_);
      queued_.reset();
      start(std::move(next), k);
    }
  }
}

void LearnerFacade::seed(const Vec& x, const Vec& U, double J) {
  PendingPoint point{x, U, J, 0.0, 0};
  if (kind_ == LearnerKind::lipschitz) {
    point.L = lipschitz_scale_ * cost_->lipschitz_bound(U);
  }
  commit(point, /*trust_hint=*/false);
}

void LearnerFacade::commit(const PendingPoint& point, bool trust_hint) {
  if (kind_ == LearnerKind::lipschitz) {
    if (lipschitz_.insert(point.U, point.x, point.J, point.L)) {
      ++stats_.added;
    } else {
      ++stats_.skipped_error;
    }
    return;
  }
  commit_hull(point, trust_hint);
}

void LearnerFacade::commit_hull(const PendingPoint& point, bool trust_hint) {
  if (!hull_.has_value()) {
    buffer_.push_back({point.x, point.U, point.J});
    try_initialize_hull();
    ++stats_.added;
    return;
  }
  int facet = point.facet_hint;
  if (!trust_hint || facet == 0) {
    const auto located = hull_->generate(point.x, guess_hint_);
    if (!located.has_value()) {
      ++stats_.skipped_error;
      return;
    }
    facet = located->facet;
  }
  auto outcome = hull_->insert(point.x, point.U, point.J, facet);
  if (outcome == ConvexHullMemory::InsertOutcome::stale_location) {
    const auto located = hull_->generate(point.x, guess_hint_);
    if (!located.has_value()) {
      ++stats_.skipped_error;
      return;
    }
    outcome = hull_->insert(point.x, point.U, point.J, located->facet);
  }
  switch (outcome) {
    case ConvexHullMemory::InsertOutcome::extended:
      ++stats_.added;
      break;
    case ConvexHullMemory::InsertOutcome::interior_only:
      ++stats_.interior_only;
      break;
    case ConvexHullMemory::InsertOutcome::stale_location:
      ++stats_.skipped_error;
      break;
  }
}

void LearnerFacade::try_initialize_hull() {
  if (static_cast<int>(buffer_.size()) < state_dim_ + 1) {
    return;
  }
  // Greedy affinely independent subset, earliest points first.
  std::vector<int> chosen{0};
  Mat span(state_dim_, state_dim_);
  int rank = 0;
  for (size_t i = 1; i < buffer_.size() && rank < state_dim_; ++i) {
    span.col(rank) = buffer_[i].x - buffer_[chosen.front()].x;
    const Eigen::JacobiSVD<Mat> svd(span.leftCols(rank + 1));
    const double largest = svd.singularValues()(0);
    if (svd.singularValues()(rank) > 1e-9 * std::max(1.0, largest)) {
      chosen.push_back(static_cast<int>(i));
      ++rank;
    }
  }
  if (rank < state_dim_) {
    return;  // still affinely dependent; keep buffering
  }
  std::vector<HullPoint> base;
  for (int idx : chosen) {
    base.push_back(buffer_[static_cast<size_t>(idx)]);
  }
  auto hull = ConvexHullMemory::initialize(std::move(base));
  if (!hull.has_value()) {
    return;
  }
  hull_ = std::move(*hull);
  guess_hint_ = 0;
  for (size_t i = 0; i < buffer_.size(); ++i) {
    if (std::find(chosen.begin(), chosen.end(), static_cast<int>(i)) != chosen.end()) {
      continue;
    }
    const auto located = hull_->generate(buffer_[i].x, guess_hint_);
    if (!located.has_value()) {
      ++stats_.skipped_error;
      continue;
    }
    hull_->insert(buffer_[i].x, buffer_[i].U, buffer_[i].J, located->facet);
  }
  buffer_.clear();
}

double LearnerFacade::value_bound(const Vec& x) const {
  if (kind_ == LearnerKind::hull) {
    if (!hull_.has_value()) {
      return kInfinity;
    }
    const auto sw = hull_->generate(x, 0);
    return sw.has_value() && sw->facet > 0 ? sw->value : kInfinity;
  }
  if (kind_ == LearnerKind::lipschitz) {
    const auto q = lipschitz_.query(x);
    return q.has_value() ? q->value : kInfinity;
  }
  return kInfinity;
}

ControllerState make_controller_state(const Scenario& scenario) {
  if (scenario.x0.size() != scenario.plant.state_dim) {
    throw std::invalid_argument("make_controller_state: x0 dimension mismatch");
  }
  scenario.optimizer.validate();
  const CostModel& cost = *scenario.cost;

  ControllerState state{Vec::Zero(cost.input_sequence_dim()), scenario.x0, 0,
                        LearnerFacade(scenario)};
  if (scenario.learning.kind != LearnerKind::off && scenario.learning.seed_polytope_vertices &&
      scenario.state_C.rows() > 0) {
    const Vec zero_input = Vec::Zero(cost.input_sequence_dim());
    const double r0 = scenario.reference.at(0);
    // Polytope vertices are heavily degenerate (box faces share affine
    // subspaces); a tiny deterministic jitter puts the seeds in general
    // position so the facet walk and interpolation stay well-conditioned.
    std::mt19937_64 jitter_rng(0x5eedu);
    std::uniform_real_distribution<double> jitter(-1e-6, 1e-6);
    std::vector<double> levels{r0};
    if (scenario.reference.kind == ReferenceSignal::Kind::periodic_step) {
      levels = {scenario.reference.amplitude, -scenario.reference.amplitude};
    }
    for (Vec vertex : polytope_vertices(scenario.state_C, scenario.state_d)) {
      for (long j = 0; j < vertex.size(); ++j) {
        vertex(j) += jitter(jitter_rng) * std::max(1.0, std::abs(vertex(j)));
      }
      for (double level : levels) {
        state.learner.seed(cost.memory_key(vertex, level), zero_input,
                           cost.total(zero_input, vertex, level));
      }
    }
    if (scenario.learning.seed_origin) {
      state.learner.seed(cost.memory_key(Vec::Zero(cost.state_dim()), r0), zero_input, 0.0);
    }
  }
  return state;
}

StepRecord control_step(ControllerState& state, const Scenario& scenario) {
  const CostModel& cost = *scenario.cost;
  const long k = state.k;
  state.learner.tick(k);
  const double r_now = scenario.reference.at(k);
  const double r_next = scenario.reference.at(k + 1);
  const Vec u = state.U.head(cost.input_dim());

  StepRecord step;
  step.k = k;
  step.x = state.x;
  step.u = u;
  step.r = r_now;
  step.stage_cost = cost.stage(state.x, u, r_now);
  step.cost_current = cost.total(state.U, state.x, r_now);

  const Vec successor = cost.plant().step(state.x, u);

  const Vec shift = temporal_warm_start(scenario.warm_start, cost, state.U, state.x, r_next);
  step.cost_temporal = cost.total(shift, successor, r_next);
  step.shift_decrease_ok = step.cost_temporal <= step.cost_current - step.stage_cost + 1e-8;

  const Vec memory_key = cost.memory_key(successor, r_next);
  auto memory = state.learner.query(memory_key);
  step.spatial_available = memory.available;
  step.value_bound = memory.bound;
  step.cost_spatial =
      memory.available ? cost.total(memory.input, successor, r_next) : kInfinity;

  const bool take_shift = !memory.available || step.cost_temporal < step.cost_spatial;
  step.selected = take_shift ? 't' : 's';
  const Vec& warm = take_shift ? shift : memory.input;
  if (!std::isfinite(take_shift ? step.cost_temporal : step.cost_spatial)) {
    throw std::runtime_error("controller fault at step " + std::to_string(k) +
                             ": no finite warm start");
  }

  const IterateResult it =
      iterate(scenario.optimizer, cost, state.U, state.x, warm, scenario.budget, r_next);
  step.iterations = it.iterations;
  step.cost_final = it.cost_after;
  step.optimizer_increase = it.worst_increase;

  const LearnerStats before = state.learner.stats();
  state.learner.offer(memory_key, it.U, step.cost_final, memory, k);
  const LearnerStats& after = state.learner.stats();
  if (after.added > before.added || after.interior_only > before.interior_only) {
    step.learner_event = 'a';
  } else if (after.skipped_small > before.skipped_small) {
    step.learner_event = 's';
  } else if (after.skipped_busy > before.skipped_busy) {
    step.learner_event = 'b';
  } else if (after.skipped_error > before.skipped_error) {
    step.learner_event = 'e';
  } else if (scenario.learning.kind != LearnerKind::off && scenario.learning.async.enabled) {
    step.learner_event = 'q';
  }

  const Vec w = scenario.disturbance.at(k, state.x, u, scenario.plant);
  state.x = successor + w;
  state.U = it.U;
  ++state.k;
  return step;
}

RunRecord run_closed_loop(const Scenario& scenario, const RunOptions& options) {
  if (scenario.sim_steps < 1) {
    throw std::invalid_argument("run_closed_loop: sim_steps must be >= 1");
  }
  ControllerState state = make_controller_state(scenario);

  RunRecord record;
  record.steps.reserve(static_cast<size_t>(scenario.sim_steps));
  const auto t_start = std::chrono::steady_clock::now();
  for (long k = 0; k < scenario.sim_steps; ++k) {
    StepRecord step = control_step(state, scenario);
    if (!step.shift_decrease_ok) {
      ++record.shift_decrease_violations;
    }
    record.max_optimizer_increase =
        std::max(record.max_optimizer_increase, step.optimizer_increase);
    record.accumulated_cost += step.stage_cost;
    record.steps.push_back(std::move(step));
    if (options.record_input_sequences) {
      record.input_sequences.push_back(state.U);
    }
    if (options.observer) {
      options.observer(k, state.learner);
    }
  }
  record.final_state = state.x;
  record.learner = state.learner.stats();
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return record;
}

std::uint64_t run_fingerprint(const RunRecord& record) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&hash](const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  auto mix_double = [&mix](double v) { mix(&v, sizeof(v)); };
  for (const StepRecord& s : record.steps) {
    mix(&s.k, sizeof(s.k));
    for (long j = 0; j < s.x.size(); ++j) {
      mix_double(s.x(j));
    }
    for (long j = 0; j < s.u.size(); ++j) {
      mix_double(s.u(j));
    }
    mix_double(s.stage_cost);
    mix_double(s.cost_temporal);
    mix_double(s.cost_spatial);
    mix_double(s.cost_final);
    mix(&s.selected, sizeof(s.selected));
    mix(&s.learner_event, sizeof(s.learner_event));
  }
  return hash;
}

}  // namespace rtmpc
