#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace flowam {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Label < 0 means unconditional.
using CondLabel = int;
inline constexpr CondLabel kNoCond = -1;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline bool all_finite(const std::vector<Vec>& vs) {
    for (const auto& v : vs)
        if (!v.allFinite()) return false;
    return true;
}

}  // namespace flowam
