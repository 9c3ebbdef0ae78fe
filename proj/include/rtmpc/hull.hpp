#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rtmpc/types.hpp"

namespace rtmpc {

/// One stored optimization record: the state where an input sequence was
/// computed, the sequence itself, and its cost there.
struct HullPoint {
  Vec x;
  Vec U;
  double J = 0.0;
};

/// Result of a spatial warm start query.
struct SpatialWarmStart {
  Vec input;            // interpolated input sequence
  int facet = 0;        // signed, 1-based: +f lower-hull facet containing x,
                        // -f outer facet excluding x
  int next_guess = 0;   // vertex index to start the next walk from
  double value = kInfinity;  // interpolated cost bound; +inf outside the hull
  Vec weights;               // convex weights over `support`
  std::vector<int> support;  // vertex indices backing the interpolation
};

/// Memory of visited (x, U, J) triples organized as the lower convex hull of
/// the lifted (x, J) cloud plus the hull of the states alone. Supports
/// directed-walk point location, interpolation-based warm starts, and
/// incremental insertion with facet-graph bookkeeping.
///
/// Single-writer: insert() mutates, everything else is const. Readers in a
/// concurrent deployment take value snapshots (the object is copyable).
class ConvexHullMemory {
 public:
  struct Tolerances {
    double strict = 1e-12;  // branching decisions (on-plane tests)
    double slack = 1e-9;    // validity audits
  };

  /// Builds the initial hull from exactly n+1 points with affinely
  /// independent states. Returns nullopt when they are dependent, in which
  /// case the caller keeps buffering points.
  static std::optional<ConvexHullMemory> initialize(std::vector<HullPoint> points,
                                                    Tolerances tol);
  static std::optional<ConvexHullMemory> initialize(std::vector<HullPoint> points);

  int dimension() const { return dim_; }
  int point_count() const { return static_cast<int>(points_.size()); }
  const Vec& point(int i) const { return points_[static_cast<size_t>(i)]; }
  const Vec& input(int i) const { return inputs_[static_cast<size_t>(i)]; }
  double cost(int i) const { return costs_[static_cast<size_t>(i)]; }
  const Vec& state_center() const { return center_x_; }
  const Vec& lifted_center() const { return center_xj_; }

  /// Warm start at x, walking the facet graph from the given vertex guess.
  /// nullopt signals a degenerate walk; the caller falls back to the
  /// temporal warm start for that step.
  std::optional<SpatialWarmStart> generate(const Vec& x, int guess) const;

  enum class InsertOutcome {
    extended,        // hull facets updated
    interior_only,   // point stored but lies above the lower hull
    stale_location,  // facet hint no longer matches x; re-locate and retry
  };

  /// Adds (x, U, J). `signed_facet` must be the facet field of a
  /// generate() result for this exact x against the current hull state.
  InsertOutcome insert(const Vec& x, const Vec& U, double J, int signed_facet);

  /// Full consistency audit; returns human-readable violations (empty when
  /// consistent). Covers graph/slot hygiene, supporting-plane validity,
  /// ridge closure, centroids, and redirects.
  std::vector<std::string> audit() const;

  void dump(std::ostream& out) const;
  static std::optional<ConvexHullMemory> read_dump(std::istream& in);

  /// Canonical (sorted) live facet vertex sets, for differential tests.
  std::vector<std::vector<int>> lower_facets() const;
  std::vector<std::vector<int>> outer_facets() const;
  int live_lower_count() const;
  int live_outer_count() const;

  // --- geometric subroutines (exposed for targeted tests) ---

  /// Unit normal of the hyperplane through the columns of `points` (p points
  /// in R^p), oriented away from `away`. nullopt when the plane is
  /// degenerate or `away` lies on it.
  static std::optional<Vec> plane_normal_away_from(const Mat& points, const Vec& away,
                                                   double tol = 1e-12);

  /// Whether the direction x - point(vertex) enters the state-space
  /// projection of the given lower-hull facet. A zero direction counts as
  /// entering (query at the vertex itself).
  bool direction_enters_facet(const Vec& x, int facet, int vertex) const;

  /// Live facets attached to every vertex in the list (lifted hull when
  /// `lifted`, state hull otherwise). Empty when some vertex was absorbed.
  std::vector<int> facets_containing(const std::vector<int>& vertices, bool lifted) const;

  /// Weights c with sum c = 1 and sum c_j point(v_j) = x. nullopt when the
  /// points are degenerate or x is outside their affine hull.
  std::optional<Vec> convex_combination(const std::vector<int>& vertices, const Vec& x) const;

  struct RayExit {
    double s = 0.0;
    std::vector<int> ridge;
  };

  /// Exit parameter and ridge of the ray a + s v through lower-hull facet
  /// `facet`, entered at parameter s_entry on `entry_ridge`.
  std::optional<RayExit> ray_exit(const Vec& a, const Vec& v, double s_entry, int facet,
                                  const std::vector<int>& entry_ridge) const;

  /// Follows absorption redirects from a (possibly stale) vertex index to a
  /// vertex that still carries lower-hull facets.
  int live_vertex(int guess) const;

  /// Downward-oriented supporting plane normal of a live lower facet.
  std::optional<Vec> lower_plane(int facet) const;
  /// Outward-oriented supporting plane normal of a live outer facet.
  std::optional<Vec> outer_plane(int facet) const;

  const std::vector<int>& lower_facet_vertices(int facet) const {
    return lower_[static_cast<size_t>(facet)];
  }
  const std::vector<int>& outer_facet_vertices(int facet) const {
    return outer_[static_cast<size_t>(facet)];
  }

 private:
  ConvexHullMemory() = default;

  Vec lifted(int i) const;
  int append_point(const Vec& x, const Vec& U, double J);
  void refresh_centers();
  int add_facet(std::vector<int> vertices, bool lifted_hull);
  void remove_facet(int facet, int absorbing_point, bool lifted_hull);
  bool lower_facet_sees(int facet, const Vec& z) const;  // z on or below the plane
  void flood_lower(std::optional<int> seed_facet, std::vector<std::vector<int>> ridges,
                   const Vec& z, int k);
  std::vector<std::vector<int>> flood_outer(int seed_facet, const Vec& x, int k);
  std::optional<SpatialWarmStart> finish_inside(int facet, const Vec& x) const;
  std::optional<SpatialWarmStart> exhaustive_locate(const Vec& x) const;
  int nearest_vertex(const std::vector<int>& candidates, const Vec& x) const;

  int dim_ = 0;
  Tolerances tol_;
  // Fixed scale applied to the cost axis for all plane geometry; the lower
  // hull is invariant under it, conditioning is not.
  double value_scale_ = 1.0;
  std::vector<Vec> points_;
  std::vector<Vec> inputs_;
  std::vector<double> costs_;
  std::vector<std::vector<int>> lower_;  // empty entry = free slot
  std::vector<std::vector<int>> outer_;
  std::vector<int> free_lower_;
  std::vector<int> free_outer_;
  std::vector<std::vector<int>> vertex_lower_;  // per-vertex incident facets
  std::vector<std::vector<int>> vertex_outer_;
  std::vector<int> redirect_;  // -1, or the point that absorbed this vertex
  Vec center_x_;
  Vec center_xj_;
};

}  // namespace rtmpc
