#include "rtmpc/lipnet.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace rtmpc {

bool LipschitzDataset::insert(Vec U, Vec x, double J, double L) {
  if (!U.allFinite() || !x.allFinite() || !std::isfinite(J) || !(L > 0.0) || !std::isfinite(L)) {
    return false;
  }
  records_.push_back({std::move(U), std::move(x), J, L});
  max_lipschitz_ = std::max(max_lipschitz_, L);
  return true;
}

std::optional<LipschitzDataset::Query> LipschitzDataset::query(const Vec& x) const {
  if (records_.empty()) {
    return std::nullopt;
  }
  Query best;
  for (size_t i = 0; i < records_.size(); ++i) {
    const double distance = (records_[i].x - x).norm();
    const double value = records_[i].J + records_[i].L * distance;
    if (value < best.value) {
      best.index = static_cast<int>(i);
      best.distance = distance;
      best.value = value;
    }
  }
  return best;
}

void LipschitzDataset::dump(std::ostream& out) const {
  out << std::setprecision(17);
  out << "lipschitz_dataset " << records_.size() << "\n";
  for (const auto& rec : records_) {
    out << "r";
    for (long j = 0; j < rec.x.size(); ++j) {
      out << " " << rec.x(j);
    }
    out << " " << rec.J << " " << rec.L;
    for (long j = 0; j < rec.U.size(); ++j) {
      out << " " << rec.U(j);
    }
    out << "\n";
  }
}

}  // namespace rtmpc
