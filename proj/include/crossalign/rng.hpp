#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace crossalign {

// Deterministic random source. Wraps mt19937_64 but implements every
// distribution by hand so draws are bit-reproducible across standard
// libraries (std::normal_distribution et al. are implementation-defined).
// No hidden state beyond the engine: serialize/restore round-trips exactly.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n);

    // Standard normal via Box-Muller. The spare value is discarded so the
    // engine is the only state.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Gamma(alpha, 1) by Marsaglia-Tsang; alpha < 1 handled by boosting.
    double gamma(double alpha);

    // Dirichlet with symmetric concentration over k categories.
    std::vector<double> dirichlet(double concentration, int k);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[i], v[static_cast<size_t>(j)]);
        }
    }

    // Engine state as text, restorable with restore(). Used by checkpoints.
    std::string serialize() const;
    void restore(const std::string& state);

  private:
    std::mt19937_64 eng_;
};

}  // namespace crossalign
