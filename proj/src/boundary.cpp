#include "levelline/boundary.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace levelline {

ParitySplit parity_split(int n, int k) {
    if (n < 1 || k < 1 || k > n) {
        throw std::invalid_argument("parity_split: need 1 <= k <= n, got n=" +
                                    std::to_string(n) + " k=" + std::to_string(k));
    }
    ParitySplit split;
    for (int i = 1; i <= n; ++i) {
        if ((i - k) % 2 == 0) {
            split.same.push_back(i);
        } else {
            split.other.push_back(i);
        }
    }
    return split;
}

double BoundaryConfig::min_gap() const {
    double g = b[0] - a;
    for (std::size_t i = 1; i < b.size(); ++i) {
        g = std::min(g, b[i] - b[i - 1]);
    }
    return g;
}

void BoundaryConfig::validate() const {
    if (b.empty()) {
        throw std::invalid_argument("BoundaryConfig: need at least one marked point b_1");
    }
    if (!std::isfinite(a)) {
        throw std::invalid_argument("BoundaryConfig: a must be finite");
    }
    double prev = a;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!std::isfinite(b[i]) || b[i] <= prev) {
            throw std::invalid_argument("BoundaryConfig: require a < b_1 < ... < b_n (strict), "
                                        "violated at b_" + std::to_string(i + 1));
        }
        prev = b[i];
    }
    if (k < 1 || k > n()) {
        throw std::invalid_argument("BoundaryConfig: k out of range 1.." + std::to_string(n()));
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("BoundaryConfig: lambda must be positive");
    }
    if (first_sign != 1 && first_sign != -1) {
        throw std::invalid_argument("BoundaryConfig: first_sign must be +1 or -1");
    }
}

}  // namespace levelline
