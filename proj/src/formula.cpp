#include "levelline/formula.hpp"

#include <cmath>
#include <stdexcept>

namespace levelline {

namespace {
constexpr double kPi = 3.141592653589793238462643;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

std::complex<double> sqrt_uhp(std::complex<double> z) {
    std::complex<double> s = std::sqrt(z);
    if (s.imag() < 0.0) s = -s;
    return s;
}

double force_term(double x, double y, double z) {
    if (!(z < x) || !(z < y) || x == y) {
        throw std::invalid_argument("force_term: require z < x, z < y, x != y");
    }
    return (2.0 / (x - y)) * std::sqrt((y - z) / (x - z));
}

double hit_free_arc_probability(double a, const std::vector<double>& b, int k) {
    const int n = static_cast<int>(b.size());
    const double bk = b[k - 1];
    const double vk = std::sqrt(std::max(bk - a, 0.0));
    double p = 1.0;
    for (int i = 1; i <= n; ++i) {
        if (i == k) continue;
        // Cancellation-free form of (1 -+ sqrt(r)) / (1 +- sqrt(r)):
        // with u = sqrt(b_i - a), v = sqrt(b_k - a),
        //   i < k: (v - u)/(v + u) = (b_k - b_i)/(u + v)^2
        //   i > k: (u - v)/(u + v) = (b_i - b_k)/(u + v)^2
        const double u = std::sqrt(std::max(b[i - 1] - a, 0.0));
        const double s = u + vk;
        const double f = (i < k) ? (bk - b[i - 1]) / (s * s) : (b[i - 1] - bk) / (s * s);
        const bool same = ((i - k) % 2) == 0;
        p *= same ? 1.0 / f : f;
    }
    return p;
}

double hit_free_arc_probability(const BoundaryConfig& config) {
    config.validate();
    return hit_free_arc_probability(config.a, config.b, config.k);
}

std::vector<ProbFactor> hit_probability_factors(const BoundaryConfig& config) {
    config.validate();
    const double a = config.a;
    const double vk = std::sqrt(config.bk() - a);
    std::vector<ProbFactor> factors;
    for (int i = 1; i <= config.n(); ++i) {
        if (i == config.k) continue;
        const double u = std::sqrt(config.b[i - 1] - a);
        const double s = u + vk;
        const double f = (i < config.k) ? (config.bk() - config.b[i - 1]) / (s * s)
                                        : (config.b[i - 1] - config.bk()) / (s * s);
        const bool same = ((i - config.k) % 2) == 0;
        factors.push_back({i, same, same ? 1.0 / f : f});
    }
    return factors;
}

bool dirichlet_limit_has_closed_form(int n, int k) {
    return k == 1 && n % 2 == 1;
}

double dirichlet_limit_probability(const std::vector<double>& b, int k) {
    const int n = static_cast<int>(b.size());
    if (n < 1 || k < 1 || k > n) {
        throw std::invalid_argument("dirichlet_limit_probability: k out of range");
    }
    for (int i = 1; i < n; ++i) {
        if (!(b[i] > b[i - 1])) {
            throw std::invalid_argument("dirichlet_limit_probability: b must be strictly increasing");
        }
    }
    if (dirichlet_limit_has_closed_form(n, k)) {
        // (b_2-b_1)/(b_3-b_1) * (b_4-b_1)/(b_5-b_1) * ...
        double p = 1.0;
        for (int j = 1; j + 2 <= n; j += 2) {
            p *= (b[j] - b[0]) / (b[j + 1] - b[0]);
        }
        return p;
    }
    const double scale = b[n - 1] - b[0] + std::abs(b[0]) + 1.0;
    return hit_free_arc_probability(-1e8 * scale, b, k);
}

double greens_mix(std::complex<double> z, std::complex<double> w, double a) {
    if (z == w) {
        throw std::invalid_argument("greens_mix: logarithmic singularity at z = w");
    }
    const std::complex<double> u = sqrt_uhp(z - a);
    const std::complex<double> v = sqrt_uhp(w - a);
    const std::complex<double> q = ((u + v) * (u - std::conj(v))) / ((u - v) * (u + std::conj(v)));
    return std::log(q).real() / kTwoPi;
}

double harmonic_phi(std::complex<double> z, const BoundaryConfig& config) {
    config.validate();
    if (!(z.imag() > 0.0)) {
        throw std::invalid_argument("harmonic_phi: z must lie in the open upper half plane");
    }
    const std::complex<double> u = sqrt_uhp(z - config.a);
    const int n = config.n();

    // Unfolded endpoints on the real u-line: -beta_n < ... < -beta_1 < beta_1
    // < ... < beta_n, with value c_i = first_sign*(-1)^i*lambda on
    // (beta_i, beta_{i+1}) and its even mirror image for u < 0. The interval
    // (-beta_1, beta_1) carries c_0.
    auto value_on_arc = [&](int i) {
        return config.first_sign * config.lambda * ((i % 2 == 0) ? 1.0 : -1.0);
    };
    auto angle = [&](double endpoint) { return std::arg(u - endpoint); };  // in (0, pi)

    // Sum over intervals of c * (arg(u - right) - arg(u - left)) / pi, with
    // arg := 0 at left = -inf and arg := pi at right = +inf.
    double phi = 0.0;
    double left_angle = 0.0;  // left endpoint of (-inf, -beta_n)
    for (int i = n; i >= 1; --i) {  // mirrored intervals, values c_n .. c_1
        const double beta = std::sqrt(config.b[i - 1] - config.a);
        const double right_angle = angle(-beta);
        phi += value_on_arc(i) * (right_angle - left_angle);
        left_angle = right_angle;
    }
    {  // central interval (-beta_1, beta_1), value c_0
        const double beta1 = std::sqrt(config.b[0] - config.a);
        const double right_angle = angle(beta1);
        phi += value_on_arc(0) * (right_angle - left_angle);
        left_angle = right_angle;
    }
    for (int i = 1; i <= n; ++i) {  // (beta_i, beta_{i+1}), value c_i
        const double right_angle = (i == n) ? kPi : angle(std::sqrt(config.b[i] - config.a));
        phi += value_on_arc(i) * (right_angle - left_angle);
        left_angle = right_angle;
    }
    return phi / kPi;
}

}  // namespace levelline
