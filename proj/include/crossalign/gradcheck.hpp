#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crossalign::diag {

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
};

// Central finite-difference checks for every differentiable op and each
// composite loss (reconstruction, KL, latent-adversarial, sequence-
// adversarial, VAE objective), on small random instances drawn from `seed`.
std::vector<GradCheckCase> grad_check_suite(std::uint64_t seed);

// Worst relative error per case across n_seeds consecutive seeds.
std::vector<GradCheckCase> grad_check_sweep(int n_seeds, std::uint64_t base_seed = 1);

}  // namespace crossalign::diag
