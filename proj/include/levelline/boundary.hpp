#pragma once

#include <vector>

namespace levelline {

/// Index sets I_k (same parity as k, including k) and J_k = {1..n} \ I_k.
/// Indices are 1-based throughout, matching the marked-point labels b_1..b_n.
struct ParitySplit {
    std::vector<int> same;
    std::vector<int> other;
};

ParitySplit parity_split(int n, int k);

/// Marked boundary points a < b_1 < ... < b_n with the level line started
/// at b_k. Single source of truth for every formula and simulation.
struct BoundaryConfig {
    double a = 0.0;
    std::vector<double> b;
    int k = 1;                                   // 1-based index into b
    double lambda = 0.6266570686577501;          // sqrt(pi/8)
    int first_sign = +1;                         // sign of phi/lambda on (a, b_1)

    int n() const { return static_cast<int>(b.size()); }
    double bk() const { return b[k - 1]; }
    double span() const { return b.back() - a; }

    /// Smallest consecutive gap in (a, b_1, ..., b_n).
    double min_gap() const;

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

}  // namespace levelline
