#include "rtmpc/hull.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace rtmpc {

namespace {

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Ridges of a facet: all subsets obtained by dropping one vertex.
std::vector<std::vector<int>> facet_ridges(const std::vector<int>& verts) {
  std::vector<std::vector<int>> ridges;
  if (verts.size() <= 1) {
    return ridges;
  }
  for (size_t skip = 0; skip < verts.size(); ++skip) {
    std::vector<int> ridge;
    ridge.reserve(verts.size() - 1);
    for (size_t j = 0; j < verts.size(); ++j) {
      if (j != skip) {
        ridge.push_back(verts[j]);
      }
    }
    ridges.push_back(std::move(ridge));
  }
  return ridges;
}

}  // namespace

Vec ConvexHullMemory::lifted(int i) const {
  Vec z(dim_ + 1);
  z.head(dim_) = points_[static_cast<size_t>(i)];
  z(dim_) = costs_[static_cast<size_t>(i)] / value_scale_;
  return z;
}

std::optional<Vec> ConvexHullMemory::plane_normal_away_from(const Mat& points, const Vec& away,
                                                            double tol) {
  const long p = points.rows();
  if (points.cols() != p || away.size() != p) {
    return std::nullopt;
  }
  Mat M(p, p);
  for (long j = 0; j + 1 < p; ++j) {
    M.col(j) = points.col(j) - points.col(p - 1);
  }
  M.col(p - 1) = away - points.col(p - 1);
  const Eigen::HouseholderQR<Mat> qr(M);
  const Mat Q = qr.householderQ();
  const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  const double scale = M.colwise().norm().maxCoeff();
  for (long j = 0; j < p; ++j) {
    if (std::abs(R(j, j)) <= tol * std::max(1.0, scale)) {
      return std::nullopt;  // degenerate plane, or `away` lies on it
    }
  }
  Vec d = Q.col(p - 1);
  // Orient with positive R diagonal so that d points toward `away`, then negate.
  if (R(p - 1, p - 1) < 0.0) {
    d = -d;
  }
  return Vec(-d);
}

std::optional<Vec> ConvexHullMemory::lower_plane(int facet) const {
  const std::vector<int>& verts = lower_[static_cast<size_t>(facet)];
  Mat pts(dim_ + 1, dim_ + 1);
  for (size_t j = 0; j < verts.size(); ++j) {
    pts.col(static_cast<long>(j)) = lifted(verts[j]);
  }
  // Reference point off the plane: nudge the first vertex straight up in J.
  Vec above = pts.col(0);
  above(dim_) += 1.0;
  auto normal = plane_normal_away_from(pts, above);
  if (!normal.has_value()) {
    return std::nullopt;
  }
  // plane_normal_away_from points away from `above`, i.e. downward already;
  // enforce it in case of a near-vertical plane.
  if ((*normal)(dim_) > 0.0) {
    *normal = -*normal;
  }
  return normal;
}

std::optional<Vec> ConvexHullMemory::outer_plane(int facet) const {
  const std::vector<int>& verts = outer_[static_cast<size_t>(facet)];
  if (dim_ == 1) {
    // Facet is a single point; oriented away from the center.
    Vec d(1);
    d(0) = points_[static_cast<size_t>(verts[0])](0) >= center_x_(0) ? 1.0 : -1.0;
    return d;
  }
  Mat pts(dim_, dim_);
  for (size_t j = 0; j < verts.size(); ++j) {
    pts.col(static_cast<long>(j)) = points_[static_cast<size_t>(verts[j])];
  }
  return plane_normal_away_from(pts, center_x_);
}

std::optional<ConvexHullMemory> ConvexHullMemory::initialize(std::vector<HullPoint> points) {
  return initialize(std::move(points), Tolerances());
}

std::optional<ConvexHullMemory> ConvexHullMemory::initialize(std::vector<HullPoint> points,
                                                             Tolerances tol) {
  if (points.empty()) {
    return std::nullopt;
  }
  const int n = static_cast<int>(points.front().x.size());
  if (static_cast<int>(points.size()) != n + 1) {
    return std::nullopt;
  }
  Mat diffs(n, n);
  for (int j = 0; j < n; ++j) {
    diffs.col(j) = points[static_cast<size_t>(j + 1)].x - points[0].x;
  }
  const Eigen::JacobiSVD<Mat> svd(diffs);
  if (n > 0 && svd.singularValues()(n - 1) <= 1e-9 * std::max(1.0, svd.singularValues()(0))) {
    return std::nullopt;  // affinely dependent states; caller keeps buffering
  }

  ConvexHullMemory hull;
  hull.dim_ = n;
  hull.tol_ = tol;
  for (auto& p : points) {
    hull.points_.push_back(std::move(p.x));
    hull.inputs_.push_back(std::move(p.U));
    hull.costs_.push_back(p.J);
    hull.value_scale_ = std::max(hull.value_scale_, std::abs(p.J));
  }
  hull.vertex_lower_.assign(points.size(), {});
  hull.vertex_outer_.assign(points.size(), {});
  hull.redirect_.assign(points.size(), -1);

  std::vector<int> all(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    all[i] = static_cast<int>(i);
  }
  hull.add_facet(all, true);
  for (const auto& ridge : facet_ridges(all)) {
    hull.add_facet(ridge, false);
  }
  hull.refresh_centers();
  return hull;
}

void ConvexHullMemory::refresh_centers() {
  center_x_ = Vec::Zero(dim_);
  center_xj_ = Vec::Zero(dim_ + 1);
  for (size_t i = 0; i < points_.size(); ++i) {
    center_x_ += points_[i];
    center_xj_ += lifted(static_cast<int>(i));
  }
  center_x_ /= static_cast<double>(points_.size());
  center_xj_ /= static_cast<double>(points_.size());
}

int ConvexHullMemory::append_point(const Vec& x, const Vec& U, double J) {
  points_.push_back(x);
  inputs_.push_back(U);
  costs_.push_back(J);
  vertex_lower_.emplace_back();
  vertex_outer_.emplace_back();
  redirect_.push_back(-1);
  return static_cast<int>(points_.size()) - 1;
}

int ConvexHullMemory::add_facet(std::vector<int> vertices, bool lifted_hull) {
  std::sort(vertices.begin(), vertices.end());
  auto& facets = lifted_hull ? lower_ : outer_;
  auto& free_slots = lifted_hull ? free_lower_ : free_outer_;
  auto& graph = lifted_hull ? vertex_lower_ : vertex_outer_;
  int slot;
  if (!free_slots.empty()) {
    slot = free_slots.back();
    free_slots.pop_back();
    facets[static_cast<size_t>(slot)] = vertices;
  } else {
    slot = static_cast<int>(facets.size());
    facets.push_back(vertices);
  }
  for (int p : vertices) {
    graph[static_cast<size_t>(p)].push_back(slot);
    if (lifted_hull) {
      redirect_[static_cast<size_t>(p)] = -1;
    }
  }
  return slot;
}

void ConvexHullMemory::remove_facet(int facet, int absorbing_point, bool lifted_hull) {
  auto& facets = lifted_hull ? lower_ : outer_;
  auto& free_slots = lifted_hull ? free_lower_ : free_outer_;
  auto& graph = lifted_hull ? vertex_lower_ : vertex_outer_;
  for (int p : facets[static_cast<size_t>(facet)]) {
    auto& list = graph[static_cast<size_t>(p)];
    list.erase(std::remove(list.begin(), list.end(), facet), list.end());
    if (lifted_hull && list.empty()) {
      // Vertex absorbed into the hull interior while adding absorbing_point;
      // walks starting here restart from that point.
      redirect_[static_cast<size_t>(p)] = absorbing_point;
    }
  }
  facets[static_cast<size_t>(facet)].clear();
  free_slots.push_back(facet);
}

int ConvexHullMemory::live_vertex(int guess) const {
  int i = std::clamp(guess, 0, point_count() - 1);
  int hops = 0;
  while (vertex_lower_[static_cast<size_t>(i)].empty() && hops++ <= point_count()) {
    const int next = redirect_[static_cast<size_t>(i)];
    if (next < 0 || next >= point_count()) {
      break;
    }
    i = next;
  }
  if (vertex_lower_[static_cast<size_t>(i)].empty()) {
    // Defensive: restart from any vertex of a live lower facet.
    for (const auto& f : lower_) {
      if (!f.empty()) {
        return f.front();
      }
    }
  }
  return i;
}

bool ConvexHullMemory::direction_enters_facet(const Vec& x, int facet, int vertex) const {
  const std::vector<int>& verts = lower_[static_cast<size_t>(facet)];
  const Vec& a = points_[static_cast<size_t>(vertex)];
  if ((x - a).norm() <= tol_.strict) {
    return true;  // query at the vertex itself
  }
  for (size_t j = 0; j < verts.size(); ++j) {
    if (verts[j] == vertex) {
      continue;
    }
    Mat ridge(dim_, dim_);
    int col = 0;
    for (size_t l = 0; l < verts.size(); ++l) {
      if (l != j) {
        ridge.col(col++) = points_[static_cast<size_t>(verts[l])];
      }
    }
    const auto d = plane_normal_away_from(ridge, points_[static_cast<size_t>(verts[j])]);
    if (!d.has_value()) {
      return false;  // degenerate sub-facet geometry: conservative reject
    }
    if (d->dot(x - a) > tol_.strict) {
      return false;
    }
  }
  return true;
}

std::vector<int> ConvexHullMemory::facets_containing(const std::vector<int>& vertices,
                                                     bool lifted_hull) const {
  const auto& graph = lifted_hull ? vertex_lower_ : vertex_outer_;
  std::vector<int> result;
  if (vertices.empty()) {
    return result;
  }
  result = graph[static_cast<size_t>(vertices.front())];
  std::sort(result.begin(), result.end());
  for (size_t i = 1; i < vertices.size() && !result.empty(); ++i) {
    std::vector<int> other = graph[static_cast<size_t>(vertices[i])];
    std::sort(other.begin(), other.end());
    std::vector<int> merged;
    std::set_intersection(result.begin(), result.end(), other.begin(), other.end(),
                          std::back_inserter(merged));
    result = std::move(merged);
  }
  return result;
}

std::optional<Vec> ConvexHullMemory::convex_combination(const std::vector<int>& vertices,
                                                        const Vec& x) const {
  const long count = static_cast<long>(vertices.size());
  Mat A(dim_ + 1, count);
  for (long j = 0; j < count; ++j) {
    A.col(j).head(dim_) = points_[static_cast<size_t>(vertices[static_cast<size_t>(j)])];
    A(dim_, j) = 1.0;
  }
  Vec b(dim_ + 1);
  b.head(dim_) = x;
  b(dim_) = 1.0;
  const Eigen::ColPivHouseholderQR<Mat> qr(A);
  if (qr.rank() < count) {
    return std::nullopt;
  }
  const Vec c = qr.solve(b);
  if ((A * c - b).norm() > 1e-10 * (1.0 + b.norm())) {
    return std::nullopt;  // x outside the affine hull of the vertices
  }
  return c;
}

std::optional<ConvexHullMemory::RayExit> ConvexHullMemory::ray_exit(
    const Vec& a, const Vec& v, double s_entry, int facet,
    const std::vector<int>& entry_ridge) const {
  const std::vector<int>& verts = lower_[static_cast<size_t>(facet)];
  int apex = -1;
  for (int p : verts) {
    if (std::find(entry_ridge.begin(), entry_ridge.end(), p) == entry_ridge.end()) {
      apex = p;
      break;
    }
  }
  if (apex < 0) {
    return std::nullopt;
  }
  RayExit best;
  best.s = kInfinity;
  for (size_t j = 0; j < entry_ridge.size(); ++j) {
    std::vector<int> candidate;
    candidate.reserve(entry_ridge.size());
    for (size_t l = 0; l < entry_ridge.size(); ++l) {
      if (l != j) {
        candidate.push_back(entry_ridge[l]);
      }
    }
    candidate.push_back(apex);
    Mat pts(dim_, dim_);
    for (size_t l = 0; l < candidate.size(); ++l) {
      pts.col(static_cast<long>(l)) = points_[static_cast<size_t>(candidate[l])];
    }
    const auto d =
        plane_normal_away_from(pts, points_[static_cast<size_t>(entry_ridge[j])]);
    if (!d.has_value()) {
      continue;
    }
    const double denom = d->dot(v);
    if (std::abs(denom) <= tol_.strict) {
      continue;  // ray parallel to this boundary plane
    }
    const double s = d->dot(points_[static_cast<size_t>(apex)] - a) / denom;
    if (s <= s_entry + tol_.strict) {
      continue;
    }
    if (s < best.s) {
      best.s = s;
      best.ridge = sorted(candidate);
    }
  }
  if (!std::isfinite(best.s)) {
    return std::nullopt;  // ray exits through the entry ridge within tolerance
  }
  return best;
}

int ConvexHullMemory::nearest_vertex(const std::vector<int>& candidates, const Vec& x) const {
  int best = candidates.front();
  double best_dist = (x - points_[static_cast<size_t>(best)]).norm();
  for (int cand : candidates) {
    const double dist = (x - points_[static_cast<size_t>(cand)]).norm();
    if (dist < best_dist) {
      best = cand;
      best_dist = dist;
    }
  }
  return best;
}

std::optional<SpatialWarmStart> ConvexHullMemory::finish_inside(int facet, const Vec& x) const {
  const std::vector<int>& verts = lower_[static_cast<size_t>(facet)];
  const auto weights = convex_combination(verts, x);
  if (!weights.has_value()) {
    return std::nullopt;
  }
  SpatialWarmStart result;
  result.facet = facet + 1;
  result.support = verts;
  result.weights = *weights;
  result.input = Vec::Zero(inputs_.front().size());
  result.value = 0.0;
  for (size_t j = 0; j < verts.size(); ++j) {
    result.input += (*weights)(static_cast<long>(j)) * inputs_[static_cast<size_t>(verts[j])];
    result.value += (*weights)(static_cast<long>(j)) * costs_[static_cast<size_t>(verts[j])];
  }
  result.next_guess = nearest_vertex(verts, x);
  return result;
}

std::optional<SpatialWarmStart> ConvexHullMemory::exhaustive_locate(const Vec& x) const {
  // Robust fallback for degenerate walks: scan every live lower facet for
  // containment, then every outer facet for exclusion.
  for (size_t f = 0; f < lower_.size(); ++f) {
    if (lower_[f].empty()) {
      continue;
    }
    const auto weights = convex_combination(lower_[f], x);
    if (!weights.has_value() || weights->minCoeff() < -tol_.slack) {
      continue;
    }
    auto inside = finish_inside(static_cast<int>(f), x);
    if (inside.has_value()) {
      return inside;
    }
  }
  int best_facet = -1;
  double best_violation = tol_.strict;
  for (size_t f = 0; f < outer_.size(); ++f) {
    if (outer_[f].empty()) {
      continue;
    }
    const auto d = outer_plane(static_cast<int>(f));
    if (!d.has_value()) {
      continue;
    }
    const double violation =
        d->dot(x - points_[static_cast<size_t>(outer_[f].front())]);
    if (violation > best_violation) {
      best_violation = violation;
      best_facet = static_cast<int>(f);
    }
  }
  if (best_facet < 0) {
    return std::nullopt;
  }
  const std::vector<int>& verts = outer_[static_cast<size_t>(best_facet)];
  SpatialWarmStart result;
  result.facet = -(best_facet + 1);
  result.next_guess = nearest_vertex(verts, x);
  result.input = inputs_[static_cast<size_t>(result.next_guess)];
  result.support = {result.next_guess};
  result.weights = Vec::Ones(1);
  return result;
}

std::optional<SpatialWarmStart> ConvexHullMemory::generate(const Vec& x, int guess) const {
  if (x.size() != dim_) {
    return std::nullopt;
  }
  const int i = live_vertex(guess);
  const auto& attached = vertex_lower_[static_cast<size_t>(i)];
  if (attached.empty()) {
    return exhaustive_locate(x);
  }
  const Vec& a = points_[static_cast<size_t>(i)];
  const Vec v = x - a;
  if (v.norm() <= tol_.strict) {
    auto at_vertex = finish_inside(attached.front(), x);
    return at_vertex.has_value() ? at_vertex : exhaustive_locate(x);
  }

  // Find the facet the direction enters and the exit through its far ridge.
  int facet = -1;
  double s = 0.0;
  std::vector<int> ridge;
  for (int f : attached) {
    if (!direction_enters_facet(x, f, i)) {
      continue;
    }
    std::vector<int> opposite;
    for (int p : lower_[static_cast<size_t>(f)]) {
      if (p != i) {
        opposite.push_back(p);
      }
    }
    Mat pts(dim_, dim_);
    for (size_t l = 0; l < opposite.size(); ++l) {
      pts.col(static_cast<long>(l)) = points_[static_cast<size_t>(opposite[l])];
    }
    const auto d = plane_normal_away_from(pts, a);
    if (!d.has_value()) {
      continue;
    }
    const double denom = d->dot(v);
    if (denom <= tol_.strict) {
      continue;
    }
    s = d->dot(points_[static_cast<size_t>(opposite.front())] - a) / denom;
    facet = f;
    ridge = sorted(opposite);
    break;
  }

  if (facet < 0) {
    // The direction leaves the hull at vertex i: return the nearest input of
    // an outer facet that excludes x.
    for (int f : vertex_outer_[static_cast<size_t>(i)]) {
      const auto d = outer_plane(f);
      if (!d.has_value()) {
        continue;
      }
      const std::vector<int>& verts = outer_[static_cast<size_t>(f)];
      if (d->dot(x - points_[static_cast<size_t>(verts.front())]) > tol_.strict) {
        SpatialWarmStart result;
        result.facet = -(f + 1);
        result.next_guess = nearest_vertex(verts, x);
        result.input = inputs_[static_cast<size_t>(result.next_guess)];
        result.support = {result.next_guess};
        result.weights = Vec::Ones(1);
        return result;
      }
    }
    return exhaustive_locate(x);
  }

  long steps = 0;
  const long step_cap = 16 + 4 * static_cast<long>(lower_.size());
  while (true) {
    if (s >= 1.0 - tol_.strict) {
      auto inside = finish_inside(facet, x);
      return inside.has_value() ? inside : exhaustive_locate(x);
    }
    std::vector<int> next;
    for (int f : facets_containing(ridge, true)) {
      if (f != facet) {
        next.push_back(f);
      }
    }
    if (next.empty()) {
      // Stepped out of the state hull at a boundary ridge: warm start with
      // the interpolated input at the exit point.
      const auto outer_fs = facets_containing(ridge, false);
      if (outer_fs.empty()) {
        return exhaustive_locate(x);
      }
      const Vec exit_point = a + s * v;
      const auto weights = convex_combination(ridge, exit_point);
      if (!weights.has_value()) {
        return exhaustive_locate(x);
      }
      SpatialWarmStart result;
      result.facet = -(outer_fs.front() + 1);
      result.support = ridge;
      result.weights = *weights;
      result.input = Vec::Zero(inputs_.front().size());
      for (size_t j = 0; j < ridge.size(); ++j) {
        result.input += (*weights)(static_cast<long>(j)) * inputs_[static_cast<size_t>(ridge[j])];
      }
      result.next_guess = nearest_vertex(ridge, x);
      return result;
    }
    facet = next.front();
    const auto exit = ray_exit(a, v, s, facet, ridge);
    if (!exit.has_value() || ++steps > step_cap) {
      return exhaustive_locate(x);
    }
    s = exit->s;
    ridge = exit->ridge;
  }
}

bool ConvexHullMemory::lower_facet_sees(int facet, const Vec& z) const {
  const auto normal = lower_plane(facet);
  if (!normal.has_value()) {
    return false;  // degenerate plane: leave the facet alone, audit reports it
  }
  const Vec v0 = lifted(lower_[static_cast<size_t>(facet)].front());
  return normal->dot(z - v0) >= -tol_.strict;  // on-plane points split the facet
}

void ConvexHullMemory::flood_lower(std::optional<int> seed_facet,
                                   std::vector<std::vector<int>> ridges, const Vec& z, int k) {
  std::set<std::vector<int>> pending;
  std::set<std::vector<int>> processed;
  auto enqueue = [&](std::vector<int> ridge) {
    std::sort(ridge.begin(), ridge.end());
    if (processed.find(ridge) == processed.end()) {
      pending.insert(std::move(ridge));
    }
  };
  if (seed_facet.has_value()) {
    for (auto& ridge : facet_ridges(lower_[static_cast<size_t>(*seed_facet)])) {
      enqueue(std::move(ridge));
    }
    remove_facet(*seed_facet, k, true);
  }
  for (auto& ridge : ridges) {
    enqueue(std::move(ridge));
  }
  while (!pending.empty()) {
    const std::vector<int> ridge = *pending.begin();
    pending.erase(pending.begin());
    processed.insert(ridge);
    int attached = -1;
    for (int f : facets_containing(ridge, true)) {
      const auto& verts = lower_[static_cast<size_t>(f)];
      if (std::find(verts.begin(), verts.end(), k) == verts.end()) {
        attached = f;
        break;
      }
    }
    if (attached < 0) {
      // No neighboring facet left. If the ridge lies on the state-hull
      // boundary the cavity is still open there and the cone facet closes
      // it; ridges interior to the removed region are done.
      if (!facets_containing(ridge, false).empty()) {
        std::vector<int> fresh = ridge;
        fresh.push_back(k);
        add_facet(std::move(fresh), true);
      }
      continue;
    }
    if (lower_facet_sees(attached, z)) {
      const std::vector<int> verts = lower_[static_cast<size_t>(attached)];
      remove_facet(attached, k, true);
      for (auto& next_ridge : facet_ridges(verts)) {
        std::sort(next_ridge.begin(), next_ridge.end());
        if (next_ridge != ridge) {
          enqueue(std::move(next_ridge));
        }
      }
    } else {
      std::vector<int> fresh = ridge;
      fresh.push_back(k);
      add_facet(std::move(fresh), true);
    }
  }
}

std::vector<std::vector<int>> ConvexHullMemory::flood_outer(int seed_facet, const Vec& x, int k) {
  std::vector<std::vector<int>> removed;
  removed.push_back(outer_[static_cast<size_t>(seed_facet)]);

  if (dim_ == 1) {
    remove_facet(seed_facet, k, false);
    add_facet({k}, false);
    return removed;
  }

  std::set<std::vector<int>> pending;
  std::set<std::vector<int>> processed;
  auto enqueue = [&](std::vector<int> ridge) {
    std::sort(ridge.begin(), ridge.end());
    if (processed.find(ridge) == processed.end()) {
      pending.insert(std::move(ridge));
    }
  };
  for (auto& ridge : facet_ridges(outer_[static_cast<size_t>(seed_facet)])) {
    enqueue(std::move(ridge));
  }
  remove_facet(seed_facet, k, false);

  while (!pending.empty()) {
    const std::vector<int> ridge = *pending.begin();
    pending.erase(pending.begin());
    processed.insert(ridge);
    int attached = -1;
    for (int f : facets_containing(ridge, false)) {
      const auto& verts = outer_[static_cast<size_t>(f)];
      if (std::find(verts.begin(), verts.end(), k) == verts.end()) {
        attached = f;
        break;
      }
    }
    if (attached < 0) {
      continue;
    }
    const auto d = outer_plane(attached);
    const std::vector<int> verts = outer_[static_cast<size_t>(attached)];
    const bool visible =
        d.has_value() && d->dot(x - points_[static_cast<size_t>(verts.front())]) > tol_.strict;
    if (visible) {
      removed.push_back(verts);
      remove_facet(attached, k, false);
      for (auto& next_ridge : facet_ridges(verts)) {
        std::sort(next_ridge.begin(), next_ridge.end());
        if (next_ridge != ridge) {
          enqueue(std::move(next_ridge));
        }
      }
    } else {
      std::vector<int> fresh = ridge;
      fresh.push_back(k);
      add_facet(std::move(fresh), false);
    }
  }
  return removed;
}

ConvexHullMemory::InsertOutcome ConvexHullMemory::insert(const Vec& x, const Vec& U, double J,
                                                         int signed_facet) {
  if (signed_facet == 0) {
    return InsertOutcome::stale_location;
  }
  if (signed_facet > 0) {
    const int f = signed_facet - 1;
    if (f >= static_cast<int>(lower_.size()) || lower_[static_cast<size_t>(f)].empty()) {
      return InsertOutcome::stale_location;
    }
    const auto weights = convex_combination(lower_[static_cast<size_t>(f)], x);
    if (!weights.has_value() || weights->minCoeff() < -tol_.slack) {
      return InsertOutcome::stale_location;
    }
    const int k = append_point(x, U, J);
    Vec z = lifted(k);
    if (!lower_facet_sees(f, z)) {
      // Above the lower hull: keep the data, leave the facets untouched.
      redirect_[static_cast<size_t>(k)] =
          nearest_vertex(lower_[static_cast<size_t>(f)], x);
      refresh_centers();
      return InsertOutcome::interior_only;
    }
    flood_lower(f, {}, z, k);
    refresh_centers();
    return InsertOutcome::extended;
  }

  const int f = -signed_facet - 1;
  if (f >= static_cast<int>(outer_.size()) || outer_[static_cast<size_t>(f)].empty()) {
    return InsertOutcome::stale_location;
  }
  const auto d = outer_plane(f);
  if (!d.has_value() ||
      d->dot(x - points_[static_cast<size_t>(outer_[static_cast<size_t>(f)].front())]) <=
          tol_.strict) {
    return InsertOutcome::stale_location;
  }
  const int k = append_point(x, U, J);
  const Vec z = lifted(k);
  const auto removed = flood_outer(f, x, k);
  flood_lower(std::nullopt, removed, z, k);
  refresh_centers();
  return InsertOutcome::extended;
}

std::vector<std::vector<int>> ConvexHullMemory::lower_facets() const {
  std::vector<std::vector<int>> result;
  for (const auto& f : lower_) {
    if (!f.empty()) {
      result.push_back(sorted(f));
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<std::vector<int>> ConvexHullMemory::outer_facets() const {
  std::vector<std::vector<int>> result;
  for (const auto& f : outer_) {
    if (!f.empty()) {
      result.push_back(sorted(f));
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

int ConvexHullMemory::live_lower_count() const {
  int count = 0;
  for (const auto& f : lower_) {
    count += f.empty() ? 0 : 1;
  }
  return count;
}

int ConvexHullMemory::live_outer_count() const {
  int count = 0;
  for (const auto& f : outer_) {
    count += f.empty() ? 0 : 1;
  }
  return count;
}

std::vector<std::string> ConvexHullMemory::audit() const {
  std::vector<std::string> issues;
  auto complain = [&issues](const std::string& what) { issues.push_back(what); };

  auto check_graph = [&](const std::vector<std::vector<int>>& facets,
                         const std::vector<std::vector<int>>& graph, const char* label) {
    for (size_t p = 0; p < graph.size(); ++p) {
      for (int f : graph[p]) {
        if (f < 0 || f >= static_cast<int>(facets.size()) || facets[static_cast<size_t>(f)].empty()) {
          complain(std::string(label) + ": vertex " + std::to_string(p) +
                   " lists dead facet " + std::to_string(f));
        } else {
          const auto& verts = facets[static_cast<size_t>(f)];
          if (std::find(verts.begin(), verts.end(), static_cast<int>(p)) == verts.end()) {
            complain(std::string(label) + ": vertex " + std::to_string(p) +
                     " lists facet " + std::to_string(f) + " that does not contain it");
          }
        }
      }
    }
    for (size_t f = 0; f < facets.size(); ++f) {
      for (int p : facets[f]) {
        const auto& list = graph[static_cast<size_t>(p)];
        if (std::find(list.begin(), list.end(), static_cast<int>(f)) == list.end()) {
          complain(std::string(label) + ": facet " + std::to_string(f) +
                   " missing from graph of vertex " + std::to_string(p));
        }
      }
    }
  };
  check_graph(lower_, vertex_lower_, "lower graph");
  check_graph(outer_, vertex_outer_, "outer graph");

  for (size_t f = 0; f < lower_.size(); ++f) {
    if (lower_[f].empty()) {
      continue;
    }
    const auto normal = lower_plane(static_cast<int>(f));
    if (!normal.has_value()) {
      complain("lower facet " + std::to_string(f) + ": degenerate supporting plane");
      continue;
    }
    const Vec v0 = lifted(lower_[f].front());
    for (int p = 0; p < point_count(); ++p) {
      if (normal->dot(lifted(p) - v0) > tol_.slack) {
        complain("lower facet " + std::to_string(f) + ": point " + std::to_string(p) +
                 " lies below its supporting plane");
        break;
      }
    }
  }
  for (size_t f = 0; f < outer_.size(); ++f) {
    if (outer_[f].empty()) {
      continue;
    }
    const auto normal = outer_plane(static_cast<int>(f));
    if (!normal.has_value()) {
      complain("outer facet " + std::to_string(f) + ": degenerate supporting plane");
      continue;
    }
    const Vec v0 = points_[static_cast<size_t>(outer_[f].front())];
    for (int p = 0; p < point_count(); ++p) {
      if (normal->dot(points_[static_cast<size_t>(p)] - v0) > tol_.slack) {
        complain("outer facet " + std::to_string(f) + ": point " + std::to_string(p) +
                 " lies outside its supporting halfspace");
        break;
      }
    }
  }

  // Ridge closure: interior lower ridges border two facets, boundary ridges
  // coincide with outer facets; outer ridges always border two facets.
  std::map<std::vector<int>, int> lower_ridge_count;
  for (const auto& f : lower_) {
    if (f.empty()) {
      continue;
    }
    for (auto& ridge : facet_ridges(f)) {
      ++lower_ridge_count[sorted(ridge)];
    }
  }
  std::set<std::vector<int>> outer_sets;
  for (const auto& f : outer_) {
    if (!f.empty()) {
      outer_sets.insert(sorted(f));
    }
  }
  for (const auto& [ridge, count] : lower_ridge_count) {
    if (count == 1) {
      if (outer_sets.find(ridge) == outer_sets.end()) {
        complain("lower hull boundary ridge not covered by an outer facet");
      }
    } else if (count != 2) {
      complain("lower ridge shared by " + std::to_string(count) + " facets");
    }
  }
  if (dim_ >= 2) {
    std::map<std::vector<int>, int> outer_ridge_count;
    for (const auto& f : outer_) {
      if (f.empty()) {
        continue;
      }
      for (auto& ridge : facet_ridges(f)) {
        ++outer_ridge_count[sorted(ridge)];
      }
    }
    for (const auto& [ridge, count] : outer_ridge_count) {
      if (count != 2) {
        complain("outer ridge shared by " + std::to_string(count) + " facets");
      }
    }
  } else if (live_outer_count() != 2) {
    complain("1-d state hull must have exactly two endpoint facets");
  }

  Vec cx = Vec::Zero(dim_);
  Vec cz = Vec::Zero(dim_ + 1);
  for (int p = 0; p < point_count(); ++p) {
    cx += points_[static_cast<size_t>(p)];
    cz += lifted(p);
  }
  cx /= static_cast<double>(point_count());
  cz /= static_cast<double>(point_count());
  if ((cx - center_x_).norm() > 1e-12 * (1.0 + cx.norm())) {
    complain("state center drifted from the exact mean");
  }
  if ((cz - center_xj_).norm() > 1e-12 * (1.0 + cz.norm())) {
    complain("lifted center drifted from the exact mean");
  }

  for (int p = 0; p < point_count(); ++p) {
    if (vertex_lower_[static_cast<size_t>(p)].empty()) {
      const int target = redirect_[static_cast<size_t>(p)];
      if (target < 0 || target >= point_count()) {
        complain("vertex " + std::to_string(p) + " has no facets and no redirect");
      } else if (live_vertex(p) == p ||
                 vertex_lower_[static_cast<size_t>(live_vertex(p))].empty()) {
        complain("redirect chain from vertex " + std::to_string(p) +
                 " does not reach a live vertex");
      }
    }
  }
  return issues;
}

void ConvexHullMemory::dump(std::ostream& out) const {
  out << std::setprecision(17);
  out << "hull 1\n";
  out << "dim " << dim_ << "\n";
  out << "tol " << tol_.strict << " " << tol_.slack << "\n";
  out << "value_scale " << value_scale_ << "\n";
  out << "points " << point_count() << " input_dim " << inputs_.front().size() << "\n";
  for (int i = 0; i < point_count(); ++i) {
    out << "p";
    for (int j = 0; j < dim_; ++j) {
      out << " " << points_[static_cast<size_t>(i)](j);
    }
    out << " " << costs_[static_cast<size_t>(i)];
    for (long j = 0; j < inputs_[static_cast<size_t>(i)].size(); ++j) {
      out << " " << inputs_[static_cast<size_t>(i)](j);
    }
    out << "\n";
  }
  auto write_facets = [&out](const char* label, const std::vector<std::vector<int>>& facets) {
    out << label << " " << facets.size() << "\n";
    for (size_t f = 0; f < facets.size(); ++f) {
      out << "f " << f << " " << facets[f].size();
      for (int p : facets[f]) {
        out << " " << p;
      }
      out << "\n";
    }
  };
  write_facets("lower", lower_);
  write_facets("outer", outer_);
  auto write_graph = [&out](const char* label, const std::vector<std::vector<int>>& graph) {
    out << label << " " << graph.size() << "\n";
    for (size_t p = 0; p < graph.size(); ++p) {
      out << "g " << p << " " << graph[p].size();
      for (int f : graph[p]) {
        out << " " << f;
      }
      out << "\n";
    }
  };
  write_graph("graph_lower", vertex_lower_);
  write_graph("graph_outer", vertex_outer_);
  out << "redirects";
  for (int r : redirect_) {
    out << " " << r;
  }
  out << "\nfree_lower " << free_lower_.size();
  for (int f : free_lower_) {
    out << " " << f;
  }
  out << "\nfree_outer " << free_outer_.size();
  for (int f : free_outer_) {
    out << " " << f;
  }
  out << "\ncenter_x";
  for (int j = 0; j < dim_; ++j) {
    out << " " << center_x_(j);
  }
  out << "\ncenter_xj";
  for (int j = 0; j <= dim_; ++j) {
    out << " " << center_xj_(j);
  }
  out << "\nend\n";
}

std::optional<ConvexHullMemory> ConvexHullMemory::read_dump(std::istream& in) {
  std::string token;
  int version = 0;
  if (!(in >> token >> version) || token != "hull" || version != 1) {
    return std::nullopt;
  }
  ConvexHullMemory hull;
  long point_count = 0;
  long input_dim = 0;
  if (!(in >> token >> hull.dim_) || token != "dim") {
    return std::nullopt;
  }
  if (!(in >> token >> hull.tol_.strict >> hull.tol_.slack) || token != "tol") {
    return std::nullopt;
  }
  if (!(in >> token >> hull.value_scale_) || token != "value_scale") {
    return std::nullopt;
  }
  if (!(in >> token >> point_count >> std::ws) || token != "points") {
    return std::nullopt;
  }
  std::string dim_label;
  if (!(in >> dim_label >> input_dim) || dim_label != "input_dim") {
    return std::nullopt;
  }
  if (hull.dim_ < 1 || point_count < 1 || input_dim < 0 || point_count > (1L << 24)) {
    return std::nullopt;
  }
  for (long i = 0; i < point_count; ++i) {
    if (!(in >> token) || token != "p") {
      return std::nullopt;
    }
    Vec x(hull.dim_);
    for (int j = 0; j < hull.dim_; ++j) {
      in >> x(j);
    }
    double J = 0.0;
    in >> J;
    Vec U(input_dim);
    for (long j = 0; j < input_dim; ++j) {
      in >> U(j);
    }
    if (!in) {
      return std::nullopt;
    }
    hull.points_.push_back(std::move(x));
    hull.inputs_.push_back(std::move(U));
    hull.costs_.push_back(J);
  }
  auto read_facets = [&](const char* label, std::vector<std::vector<int>>& facets) -> bool {
    long count = 0;
    if (!(in >> token >> count) || token != label || count < 0 || count > (1L << 26)) {
      return false;
    }
    facets.assign(static_cast<size_t>(count), {});
    for (long f = 0; f < count; ++f) {
      long id = 0;
      long size = 0;
      if (!(in >> token >> id >> size) || token != "f" || id < 0 || id >= count || size < 0 ||
          size > hull.dim_ + 1) {
        return false;
      }
      std::vector<int> verts(static_cast<size_t>(size));
      for (long j = 0; j < size; ++j) {
        in >> verts[static_cast<size_t>(j)];
      }
      facets[static_cast<size_t>(id)] = std::move(verts);
    }
    return static_cast<bool>(in);
  };
  if (!read_facets("lower", hull.lower_) || !read_facets("outer", hull.outer_)) {
    return std::nullopt;
  }
  auto read_graph = [&](const char* label, std::vector<std::vector<int>>& graph) -> bool {
    long count = 0;
    if (!(in >> token >> count) || token != label || count != point_count) {
      return false;
    }
    graph.assign(static_cast<size_t>(count), {});
    for (long p = 0; p < count; ++p) {
      long id = 0;
      long size = 0;
      if (!(in >> token >> id >> size) || token != "g" || id < 0 || id >= count || size < 0 ||
          size > (1L << 26)) {
        return false;
      }
      std::vector<int> list(static_cast<size_t>(size));
      for (long j = 0; j < size; ++j) {
        in >> list[static_cast<size_t>(j)];
      }
      graph[static_cast<size_t>(id)] = std::move(list);
    }
    return static_cast<bool>(in);
  };
  if (!read_graph("graph_lower", hull.vertex_lower_) ||
      !read_graph("graph_outer", hull.vertex_outer_)) {
    return std::nullopt;
  }
  if (!(in >> token) || token != "redirects") {
    return std::nullopt;
  }
  hull.redirect_.resize(static_cast<size_t>(point_count));
  for (long p = 0; p < point_count; ++p) {
    in >> hull.redirect_[static_cast<size_t>(p)];
  }
  auto read_free = [&](const char* label, std::vector<int>& list) -> bool {
    long count = 0;
    if (!(in >> token >> count) || token != label || count < 0 || count > (1L << 26)) {
      return false;
    }
    list.resize(static_cast<size_t>(count));
    for (long j = 0; j < count; ++j) {
      in >> list[static_cast<size_t>(j)];
    }
    return static_cast<bool>(in);
  };
  if (!read_free("free_lower", hull.free_lower_) || !read_free("free_outer", hull.free_outer_)) {
    return std::nullopt;
  }
  if (!(in >> token) || token != "center_x") {
    return std::nullopt;
  }
  hull.center_x_.resize(hull.dim_);
  for (int j = 0; j < hull.dim_; ++j) {
    in >> hull.center_x_(j);
  }
  if (!(in >> token) || token != "center_xj") {
    return std::nullopt;
  }
  hull.center_xj_.resize(hull.dim_ + 1);
  for (int j = 0; j <= hull.dim_; ++j) {
    in >> hull.center_xj_(j);
  }
  if (!(in >> token) || token != "end" || !in) {
    return std::nullopt;
  }
  return hull;
}

}  // namespace rtmpc
