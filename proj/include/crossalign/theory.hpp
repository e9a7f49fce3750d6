#pragma once

#include <vector>

#include "crossalign/rng.hpp"

namespace crossalign::theory {

// Small dense row-major matrix; the numeric experiments stay below ~10x10.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

    static Matrix identity(int n);
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double frobenius_distance(const Matrix& a, const Matrix& b);

// Cholesky factor of a symmetric positive-definite matrix; false when the
// matrix is not PD (within a tiny pivot floor).
bool cholesky(const Matrix& a, Matrix* factor = nullptr);

double determinant(const Matrix& a);
Matrix random_orthogonal(int n, Rng& rng);    // Gram-Schmidt on a Gaussian draw
Matrix random_invertible(int n, Rng& rng);    // Gaussian entries, redrawn if near-singular

// Mixture of Gaussians over R^dim with full covariances.
struct GaussianMixture {
    int dim = 0;
    std::vector<double> weights;            // K, positive, sums to 1
    std::vector<std::vector<double>> means; // K x dim
    std::vector<Matrix> covs;               // K of dim x dim, symmetric PD

    int components() const { return static_cast<int>(weights.size()); }
    void validate() const;
    std::vector<double> sample(Rng& rng) const;
};

// Affine observation map x = A z + b + eps, eps ~ N(0, noise_std^2 I).
struct AffineStyle {
    Matrix a;
    std::vector<double> b;
    double noise_std = 0.0;

    void validate(int dim) const;
};

// Distribution of A z + b + eps when z follows the mixture:
// weights unchanged, means A mu + b, covariances A Sigma A^T + noise^2 I.
GaussianMixture pushforward(const GaussianMixture& mix, const AffineStyle& style);

// True iff the two pushforward distributions differ in some component's mean
// (Euclidean) or covariance (Frobenius) by more than tol.
bool distinguishable(const GaussianMixture& mix, const AffineStyle& s1, const AffineStyle& s2,
                     double tol = 1e-6);

// -- bigram permutation experiments -----------------------------------------

using BigramMatrix = Matrix;   // n x n, nonnegative

// perm[i] is the row/column of m1 matched to index i of m2.
struct Permutation {
    std::vector<int> perm;

    int size() const { return static_cast<int>(perm.size()); }
    void validate() const;
    static Permutation identity(int n);
};

// out[i][j] = m[perm[i]][perm[j]]  (the relabelled matrix P^T M P)
BigramMatrix permute(const BigramMatrix& m, const Permutation& p);

// || relabelled(m1) - m2 ||_F^2
double permutation_objective(const BigramMatrix& m1, const BigramMatrix& m2,
                             const Permutation& p);

// Exact minimizer by exhaustive search; n <= 9. Ties resolve to the
// lexicographically smallest permutation.
Permutation brute_force_permutation(const BigramMatrix& m1, const BigramMatrix& m2);

// Matches vertices by their sorted incident-weight profile (row and column
// weights pooled, sorted ascending); profiles are compared lexicographically.
// Exact on instances whose profiles are all distinct.
Permutation degree_set_match(const BigramMatrix& m1, const BigramMatrix& m2);

// -- experiment suite ---------------------------------------------------------

struct TheoryReport {
    int rotation_trials = 0, rotation_indistinguishable = 0;  // K=1 isotropic, orthogonal A
    int mixture_trials = 0, mixture_distinguishable = 0;      // K=2, distinct covariances
    int planted_trials = 0, planted_recovered = 0;            // brute force, n=6 plants
    int degree_trials = 0, degree_agree = 0;                  // heuristic vs brute force

    bool all_clean() const {
        return rotation_indistinguishable == rotation_trials &&
               mixture_distinguishable == mixture_trials &&
               planted_recovered == planted_trials && degree_agree == degree_trials;
    }
};

// Runs the four numeric identifiability experiments:
//   1. centered isotropic single Gaussian vs a random rotation of it — never
//      distinguishable;
//   2. two-component mixtures with distinct covariances under two random
//      invertible affine maps — always distinguishable;
//   3. planted permutations of random tie-free n=6 bigram matrices — brute
//      force recovers the plant with objective exactly 0;
//   4. the degree-profile heuristic agrees with brute force on the same
//      instances.
TheoryReport run_theory_suite(std::uint64_t seed, int n_rotation = 100, int n_mixture = 100,
                              int n_planted = 50, int n_degree = 50);

}  // namespace crossalign::theory
