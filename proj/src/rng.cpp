#include "crossalign/rng.hpp"

#include <cmath>
#include <sstream>

#include "crossalign/errors.hpp"

namespace crossalign {

int Rng::uniform_int(int n) {
    if (n <= 0) throw ParameterError("uniform_int: n must be positive");
    // rejection sampling, no modulo bias
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
        x = eng_();
    } while (x >= limit);
    return static_cast<int>(x % un);
}

double Rng::normal() {
    // Box-Muller, cosine branch only; spare discarded so the engine is the
    // whole state.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
}

double Rng::gamma(double alpha) {
    if (alpha <= 0.0) throw ParameterError("gamma: alpha must be positive");
    if (alpha < 1.0) {
        // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
        const double g = gamma(alpha + 1.0);
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return g * std::pow(u, 1.0 / alpha);
    }
    // Marsaglia-Tsang squeeze
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> Rng::dirichlet(double concentration, int k) {
    if (k <= 0) throw ParameterError("dirichlet: k must be positive");
    std::vector<double> out(static_cast<size_t>(k));
    double total = 0.0;
    for (auto& v : out) {
        v = gamma(concentration);
        total += v;
    }
    if (total <= 0.0) {
        // all-underflow corner: fall back to uniform
        for (auto& v : out) v = 1.0 / k;
        return out;
    }
    for (auto& v : out) v /= total;
    return out;
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    is >> eng_;
    if (is.fail()) throw IoError("Rng::restore: malformed engine state");
}

}  // namespace crossalign
