#pragma once

#include "cpaem/linalg.hpp"

namespace cpaem {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Vec x;
    double value = 0.0;
};

/// maximize c^T x subject to A x <= b with x free.
///
/// Dense two-phase tableau simplex with Bland's rule, meant for the small
/// systems of the partition code (tens of rows, a handful of columns).
LpResult lp_maximize(const Vec& c, const Mat& a, const Vec& b);

}  // namespace cpaem
