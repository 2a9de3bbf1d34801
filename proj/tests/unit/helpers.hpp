#pragma once

#include "flowam/types.hpp"

#include <cmath>
#include <functional>

namespace testing_helpers {

using flowam::Vec;

// Central differences of a scalar function, step h per coordinate.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
    Vec g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

inline double max_rel_err(const Vec& a, const Vec& b, double floor = 1e-12) {
    const double scale = std::max({a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>(), floor});
    return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline Vec vec1(double a) { return Vec::Constant(1, a); }

}  // namespace testing_helpers
