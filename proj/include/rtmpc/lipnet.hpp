#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "rtmpc/types.hpp"

namespace rtmpc {

/// Stored record for the Lipschitz-cone warm start: the input sequence, the
/// state where it was computed, its cost there, and a Lipschitz constant of
/// the cost in the state argument.
struct LipschitzRecord {
  Vec U;
  Vec x;
  double J = 0.0;
  double L = 0.0;
};

/// Memory for nonconvex costs: the value bound at a query point is the
/// lower envelope of the cones J_i + L_i * |x - x_i|. Single-writer /
/// snapshot-reader, same contract as the hull memory.
class LipschitzDataset {
 public:
  struct Query {
    int index = -1;        // winning record
    double distance = 0.0;
    double value = kInfinity;  // cone envelope value at the query point
  };

  bool empty() const { return records_.empty(); }
  int size() const { return static_cast<int>(records_.size()); }
  const LipschitzRecord& record(int i) const { return records_[static_cast<size_t>(i)]; }
  double max_lipschitz() const { return max_lipschitz_; }

  /// Appends a record; rejects non-finite fields or L <= 0.
  bool insert(Vec U, Vec x, double J, double L);

  /// Record minimizing J + L * |x - query|; ties go to the lowest insertion
  /// index. nullopt on an empty dataset (caller warm-starts temporally).
  std::optional<Query> query(const Vec& x) const;

  void dump(std::ostream& out) const;

 private:
  std::vector<LipschitzRecord> records_;
  double max_lipschitz_ = 0.0;
};

}  // namespace rtmpc
