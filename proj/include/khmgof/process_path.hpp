#pragma once

// Cadlag step-path value type shared by the raw and transformed residual
// processes.  A path holds its evaluation points (jump locations plus any
// extra sample points), the right-continuous value at each, and the left
// limit there; between points it is constant.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "khmgof/errors.hpp"

namespace khmgof {

struct ProcessPath {
  // Governs which values the sup statistic scans: transformed paths are read
  // at their jump points only, while paths with drift between jumps (the raw
  // estimated empirical process) also expose their left limits.
  enum class Kind { kJumpsOnly, kWithDrift };

  std::string name;  // "v_hat" | "w" | "w_tilde"
  Kind kind = Kind::kJumpsOnly;
  std::size_t n = 0;  // residual count behind the sqrt(n) scaling
  std::vector<double> points;
  std::vector<double> values;
  std::vector<double> left_limits;

  std::size_t size() const { return points.size(); }

  // Step evaluation: value at the last point <= x, zero before the first.
  double value_at(double x) const {
    auto it = std::upper_bound(points.begin(), points.end(), x);
    if (it == points.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - points.begin()) - 1];
  }

  void check() const {
    if (points.size() != values.size() || points.size() != left_limits.size())
      throw DomainError("process path arrays must share one length");
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i - 1] < points[i]))
        throw DomainError("process path points must be strictly increasing");
  }
};

}  // namespace khmgof
