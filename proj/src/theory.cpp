#include "crossalign/theory.hpp"

#include <algorithm>
#include <cmath>

#include "crossalign/errors.hpp"

namespace crossalign::theory {

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw DimensionError("matmul: inner extents differ");
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const double av = a.at(i, k);
            if (av == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) out.at(i, j) += av * b.at(k, j);
        }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw DimensionError("frobenius_distance: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

bool cholesky(const Matrix& a, Matrix* factor) {
    if (a.rows != a.cols) throw DimensionError("cholesky: matrix must be square");
    const int n = a.rows;
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 1e-12) return false;
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    if (factor) *factor = std::move(l);
    return true;
}

double determinant(const Matrix& a) {
    if (a.rows != a.cols) throw DimensionError("determinant: matrix must be square");
    Matrix m = a;
    const int n = m.rows;
    double det = 1.0;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::fabs(m.at(r, c)) > std::fabs(m.at(piv, c))) piv = r;
        if (std::fabs(m.at(piv, c)) < 1e-14) return 0.0;
        if (piv != c) {
            for (int j = 0; j < n; ++j) std::swap(m.at(piv, j), m.at(c, j));
            det = -det;
        }
        det *= m.at(c, c);
        for (int r = c + 1; r < n; ++r) {
            const double f = m.at(r, c) / m.at(c, c);
            for (int j = c; j < n; ++j) m.at(r, j) -= f * m.at(c, j);
        }
    }
    return det;
}

Matrix random_orthogonal(int n, Rng& rng) {
    for (;;) {
        Matrix g(n, n);
        for (auto& v : g.v) v = rng.normal();
        // Gram-Schmidt on columns
        Matrix q(n, n);
        bool ok = true;
        for (int j = 0; j < n && ok; ++j) {
            std::vector<double> col(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] = g.at(i, j);
            for (int k = 0; k < j; ++k) {
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += q.at(i, k) * g.at(i, j);
                for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] -= dot * q.at(i, k);
            }
            double norm = 0.0;
            for (double v : col) norm += v * v;
            norm = std::sqrt(norm);
            if (norm < 1e-8) {
                ok = false;
                break;
            }
            for (int i = 0; i < n; ++i) q.at(i, j) = col[static_cast<size_t>(i)] / norm;
        }
        if (ok) return q;
    }
}

Matrix random_invertible(int n, Rng& rng) {
    for (;;) {
        Matrix m(n, n);
        for (auto& v : m.v) v = rng.normal();
        if (std::fabs(determinant(m)) > 1e-3) return m;
    }
}

void GaussianMixture::validate() const {
    if (dim <= 0) throw ParameterError("GaussianMixture: dim must be positive");
    if (weights.empty()) throw ParameterError("GaussianMixture: need at least one component");
    if (means.size() != weights.size() || covs.size() != weights.size())
        throw DimensionError("GaussianMixture: component counts disagree");
    double total = 0.0;
    for (double w : weights) {
        if (w <= 0.0) throw ParameterError("GaussianMixture: weights must be positive");
        total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw ParameterError("GaussianMixture: weights must sum to 1");
    for (const auto& mu : means)
        if (static_cast<int>(mu.size()) != dim)
            throw DimensionError("GaussianMixture: mean dimension mismatch");
    for (const auto& c : covs) {
        if (c.rows != dim || c.cols != dim)
            throw DimensionError("GaussianMixture: covariance shape mismatch");
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < i; ++j)
                if (std::fabs(c.at(i, j) - c.at(j, i)) > 1e-9)
                    throw ParameterError("GaussianMixture: covariance not symmetric");
        if (!cholesky(c)) throw ParameterError("GaussianMixture: covariance not PD");
    }
}

std::vector<double> GaussianMixture::sample(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    int k = components() - 1;
    for (int i = 0; i < components(); ++i) {
        acc += weights[static_cast<size_t>(i)];
        if (u < acc) {
            k = i;
            break;
        }
    }
    Matrix l;
    if (!cholesky(covs[static_cast<size_t>(k)], &l))
        throw ContractError("GaussianMixture::sample: covariance not PD");
    std::vector<double> eps(static_cast<size_t>(dim));
    for (auto& e : eps) e = rng.normal();
    std::vector<double> x = means[static_cast<size_t>(k)];
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j <= i; ++j) x[static_cast<size_t>(i)] += l.at(i, j) * eps[static_cast<size_t>(j)];
    return x;
}

void AffineStyle::validate(int dim) const {
    if (a.rows != dim || a.cols != dim) throw DimensionError("AffineStyle: A must be dim x dim");
    if (static_cast<int>(b.size()) != dim) throw DimensionError("AffineStyle: b must have length dim");
    if (noise_std < 0.0) throw ParameterError("AffineStyle: noise_std must be >= 0");
}

GaussianMixture pushforward(const GaussianMixture& mix, const AffineStyle& style) {
    mix.validate();
    style.validate(mix.dim);
    GaussianMixture out;
    out.dim = mix.dim;
    out.weights = mix.weights;
    const Matrix at = transpose(style.a);
    for (int k = 0; k < mix.components(); ++k) {
        std::vector<double> mu(static_cast<size_t>(mix.dim), 0.0);
        for (int i = 0; i < mix.dim; ++i) {
            double s = style.b[static_cast<size_t>(i)];
            for (int j = 0; j < mix.dim; ++j)
                s += style.a.at(i, j) * mix.means[static_cast<size_t>(k)][static_cast<size_t>(j)];
            mu[static_cast<size_t>(i)] = s;
        }
        Matrix cov = matmul(matmul(style.a, mix.covs[static_cast<size_t>(k)]), at);
        // exact symmetry can be lost to rounding; restore it before validation
        for (int i = 0; i < mix.dim; ++i)
            for (int j = 0; j < i; ++j) {
                const double s = 0.5 * (cov.at(i, j) + cov.at(j, i));
                cov.at(i, j) = s;
                cov.at(j, i) = s;
            }
        for (int i = 0; i < mix.dim; ++i) cov.at(i, i) += style.noise_std * style.noise_std;
        out.means.push_back(std::move(mu));
        out.covs.push_back(std::move(cov));
    }
    if (style.noise_std > 0.0) out.validate();   // PD is guaranteed with noise
    return out;
}

bool distinguishable(const GaussianMixture& mix, const AffineStyle& s1, const AffineStyle& s2,
                     double tol) {
    if (tol <= 0.0) throw ParameterError("distinguishable: tol must be positive");
    const auto p1 = pushforward(mix, s1);
    const auto p2 = pushforward(mix, s2);
    for (int k = 0; k < mix.components(); ++k) {
        double mean_gap = 0.0;
        for (int i = 0; i < mix.dim; ++i) {
            const double d = p1.means[static_cast<size_t>(k)][static_cast<size_t>(i)] -
                             p2.means[static_cast<size_t>(k)][static_cast<size_t>(i)];
            mean_gap += d * d;
        }
        if (std::sqrt(mean_gap) > tol) return true;
        if (frobenius_distance(p1.covs[static_cast<size_t>(k)], p2.covs[static_cast<size_t>(k)]) >
            tol)
            return true;
    }
    return false;
}

void Permutation::validate() const {
    std::vector<char> seen(perm.size(), 0);
    for (int v : perm) {
        if (v < 0 || v >= size() || seen[static_cast<size_t>(v)])
            throw ContractError("Permutation: not a bijection on [0, n)");
        seen[static_cast<size_t>(v)] = 1;
    }
}

Permutation Permutation::identity(int n) {
    Permutation p;
    p.perm.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p.perm[static_cast<size_t>(i)] = i;
    return p;
}

BigramMatrix permute(const BigramMatrix& m, const Permutation& p) {
    if (m.rows != m.cols || m.rows != p.size())
        throw DimensionError("permute: matrix and permutation sizes differ");
    p.validate();
    BigramMatrix out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j)
            out.at(i, j) = m.at(p.perm[static_cast<size_t>(i)], p.perm[static_cast<size_t>(j)]);
    return out;
}

double permutation_objective(const BigramMatrix& m1, const BigramMatrix& m2,
                             const Permutation& p) {
    if (m1.rows != m1.cols || m2.rows != m2.cols || m1.rows != m2.rows)
        throw DimensionError("permutation_objective: matrices must be square and equal size");
    if (p.size() != m1.rows)
        throw DimensionError("permutation_objective: permutation size mismatch");
    double s = 0.0;
    for (int i = 0; i < m1.rows; ++i)
        for (int j = 0; j < m1.cols; ++j) {
            const double d =
                m1.at(p.perm[static_cast<size_t>(i)], p.perm[static_cast<size_t>(j)]) - m2.at(i, j);
            s += d * d;
        }
    return s;
}

Permutation brute_force_permutation(const BigramMatrix& m1, const BigramMatrix& m2) {
    if (m1.rows != m2.rows) throw DimensionError("brute_force_permutation: size mismatch");
    const int n = m1.rows;
    if (n > 9) throw ParameterError("brute_force_permutation: n must be <= 9");
    Permutation cur = Permutation::identity(n);
    Permutation best = cur;
    double best_obj = permutation_objective(m1, m2, cur);
    while (std::next_permutation(cur.perm.begin(), cur.perm.end())) {
        const double obj = permutation_objective(m1, m2, cur);
        if (obj < best_obj) {   // strict: first (lexicographically smallest) minimizer wins
            best_obj = obj;
            best = cur;
        }
    }
    return best;
}

Permutation degree_set_match(const BigramMatrix& m1, const BigramMatrix& m2) {
    if (m1.rows != m1.cols || m2.rows != m2.cols || m1.rows != m2.rows)
        throw DimensionError("degree_set_match: matrices must be square and equal size");
    const int n = m1.rows;
    auto profiles = [n](const BigramMatrix& m) {
        std::vector<std::vector<double>> out(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto& p = out[static_cast<size_t>(i)];
            p.reserve(static_cast<size_t>(2 * n));
            for (int j = 0; j < n; ++j) p.push_back(m.at(i, j));
            for (int j = 0; j < n; ++j) p.push_back(m.at(j, i));
            std::sort(p.begin(), p.end());
        }
        return out;
    };
    auto rank = [n](const std::vector<std::vector<double>>& prof) {
        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&prof](int a, int b) {
            const auto& pa = prof[static_cast<size_t>(a)];
            const auto& pb = prof[static_cast<size_t>(b)];
            if (pa != pb) return pa < pb;
            return a < b;
        });
        return order;
    };
    const auto o1 = rank(profiles(m1));
    const auto o2 = rank(profiles(m2));
    Permutation p;
    p.perm.resize(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r)
        p.perm[static_cast<size_t>(o2[static_cast<size_t>(r)])] = o1[static_cast<size_t>(r)];
    return p;
}

namespace {

Matrix random_spd(int n, Rng& rng) {
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) l.at(i, j) = rng.normal();
        l.at(i, i) = 0.5 + rng.uniform();   // positive diagonal keeps L L^T PD
    }
    return matmul(l, transpose(l));
}

BigramMatrix random_tie_free(int n, Rng& rng) {
    BigramMatrix m(n, n);
    for (auto& v : m.v) v = rng.uniform();
    return m;   // continuous iid entries: ties have probability zero
}

Permutation random_permutation(int n, Rng& rng) {
    Permutation p = Permutation::identity(n);
    rng.shuffle(p.perm);
    return p;
}

}  // namespace

TheoryReport run_theory_suite(std::uint64_t seed, int n_rotation, int n_mixture, int n_planted,
                              int n_degree) {
    Rng rng(seed);
    TheoryReport rep;
    const int dim = 3;

    // 1. rotating a centered isotropic Gaussian leaves its law unchanged
    for (int t = 0; t < n_rotation; ++t) {
        GaussianMixture mix;
        mix.dim = dim;
        mix.weights = {1.0};
        mix.means = {std::vector<double>(dim, 0.0)};
        mix.covs = {Matrix::identity(dim)};
        AffineStyle s1{random_orthogonal(dim, rng), std::vector<double>(dim, 0.0), 0.0};
        AffineStyle s2{Matrix::identity(dim), std::vector<double>(dim, 0.0), 0.0};
        ++rep.rotation_trials;
        if (!distinguishable(mix, s1, s2)) ++rep.rotation_indistinguishable;
    }

    // 2. two components with distinct covariances expose any affine mismatch
    for (int t = 0; t < n_mixture; ++t) {
        GaussianMixture mix;
        mix.dim = dim;
        mix.weights = {0.5, 0.5};
        for (int k = 0; k < 2; ++k) {
            std::vector<double> mu(dim);
            for (auto& x : mu) x = rng.normal();
            mix.means.push_back(std::move(mu));
            mix.covs.push_back(random_spd(dim, rng));
        }
        auto draw_style = [&]() {
            AffineStyle s;
            s.a = random_invertible(dim, rng);
            s.b.resize(dim);
            for (auto& x : s.b) x = rng.normal();
            return s;
        };
        ++rep.mixture_trials;
        if (distinguishable(mix, draw_style(), draw_style())) ++rep.mixture_distinguishable;
    }

    // 3 + 4. planted permutations at n=6: brute force must recover the plant
    // (objective exactly 0) and the degree heuristic must agree with it
    const int n_perm_trials = std::max(n_planted, n_degree);
    for (int t = 0; t < n_perm_trials; ++t) {
        const int n = 6;
        const BigramMatrix m1 = random_tie_free(n, rng);
        const Permutation plant = random_permutation(n, rng);
        const BigramMatrix m2 = permute(m1, plant);
        Permutation brute;
        bool brute_ok = false;
        if (t < n_planted) {
            brute = brute_force_permutation(m1, m2);
            brute_ok = brute.perm == plant.perm && permutation_objective(m1, m2, brute) == 0.0;
            ++rep.planted_trials;
            if (brute_ok) ++rep.planted_recovered;
        }
        if (t < n_degree) {
            const Permutation heur = degree_set_match(m1, m2);
            ++rep.degree_trials;
            if (t < n_planted) {
                if (brute_ok && heur.perm == brute.perm) ++rep.degree_agree;
            } else if (heur.perm == plant.perm) {
                ++rep.degree_agree;
            }
        }
    }
    return rep;
}

}  // namespace crossalign::theory
