#include "crossalign/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace crossalign::ad {

namespace {

int shape_product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor extents must be positive");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

// true when b is a length-cols(a) vector to broadcast across a's rows
bool row_broadcast(const Tensor& mat, const Tensor& vec) {
    return mat.rank() == 2 && vec.rank() == 1 && vec.shape[0] == mat.shape[1];
}

}  // namespace

void Tensor::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    const int n = shape_product(shape);
    t->shape = std::move(shape);
    t->values.assign(static_cast<size_t>(n), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    std::fill(t->values.begin(), t->values.end(), v);
    return t;
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    const int n = shape_product(shape);
    if (static_cast<size_t>(n) != values.size())
        throw DimensionError("Tensor::from: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape));
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

TensorPtr Tensor::uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                          bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    for (auto& v : t->values) v = rng.uniform(lo, hi);
    return t;
}

TensorPtr Graph::make_out(std::vector<int> shape, bool requires_grad) {
    // outputs of non-recording graphs never need grad buffers
    return Tensor::zeros(std::move(shape), requires_grad && recording_);
}

void Graph::screen(const TensorPtr& t, const char* op) const {
    if (!check_finite_) return;
    for (double v : t->values)
        if (!std::isfinite(v))
            throw ContractError(std::string(op) + ": non-finite value in output");
}

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->rank() != 2 || b->rank() != 2)
        throw DimensionError("matmul: expects rank-2 operands, got " + shape_str(a->shape) +
                             " and " + shape_str(b->shape));
    const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    if (b->shape[0] != k)
        throw DimensionError("matmul: inner extents differ, " + shape_str(a->shape) + " vs " +
                             shape_str(b->shape));
    auto out = make_out({m, n}, a->requires_grad || b->requires_grad);
    const double* pa = a->values.data();
    const double* pb = b->values.data();
    double* po = out->values.data();
    // rows blocked by 4 so each streamed row of B feeds four accumulators
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = pa + static_cast<size_t>(i) * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        double* o0 = po + static_cast<size_t>(i) * n;
        double* o1 = o0 + n;
        double* o2 = o1 + n;
        double* o3 = o2 + n;
        for (int p = 0; p < k; ++p) {
            const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
            if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
            const double* brow = pb + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                const double bv = brow[j];
                o0[j] += v0 * bv;
                o1[j] += v1 * bv;
                o2[j] += v2 * bv;
                o3[j] += v3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        double* orow = po + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = pa[static_cast<size_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    screen(out, "matmul");
    if (out->requires_grad) {
        record([a, b, out, m, k, n] {
            const double* go = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                double* ga = a->grad.data();
                const double* pb2 = b->values.data();
                // dA = G B^T as an accumulation GEMM over B^T, which keeps the
                // inner loop a unit-stride multiply-add instead of a serial
                // dot-product reduction
                std::vector<double> bt(static_cast<size_t>(n) * k);
                for (int p = 0; p < k; ++p)
                    for (int j = 0; j < n; ++j)
                        bt[static_cast<size_t>(j) * k + p] = pb2[static_cast<size_t>(p) * n + j];
                int i = 0;
                for (; i + 4 <= m; i += 4) {
                    const double* g0 = go + static_cast<size_t>(i) * n;
                    const double* g1 = g0 + n;
                    const double* g2 = g1 + n;
                    const double* g3 = g2 + n;
                    double* r0 = ga + static_cast<size_t>(i) * k;
                    double* r1 = r0 + k;
                    double* r2 = r1 + k;
                    double* r3 = r2 + k;
                    for (int j = 0; j < n; ++j) {
                        const double v0 = g0[j], v1 = g1[j], v2 = g2[j], v3 = g3[j];
                        if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
                        const double* btrow = bt.data() + static_cast<size_t>(j) * k;
                        for (int p = 0; p < k; ++p) {
                            const double bv = btrow[p];
                            r0[p] += v0 * bv;
                            r1[p] += v1 * bv;
                            r2[p] += v2 * bv;
                            r3[p] += v3 * bv;
                        }
                    }
                }
                for (; i < m; ++i) {
                    const double* grow = go + static_cast<size_t>(i) * n;
                    double* garow = ga + static_cast<size_t>(i) * k;
                    for (int j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        if (gv == 0.0) continue;
                        const double* btrow = bt.data() + static_cast<size_t>(j) * k;
                        for (int p = 0; p < k; ++p) garow[p] += gv * btrow[p];
                    }
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                double* gb = b->grad.data();
                const double* pa2 = a->values.data();
                int i = 0;
                for (; i + 4 <= m; i += 4) {
                    const double* a0 = pa2 + static_cast<size_t>(i) * k;
                    const double* a1 = a0 + k;
                    const double* a2 = a1 + k;
                    const double* a3 = a2 + k;
                    const double* g0 = go + static_cast<size_t>(i) * n;
                    const double* g1 = g0 + n;
                    const double* g2 = g1 + n;
                    const double* g3 = g2 + n;
                    for (int p = 0; p < k; ++p) {
                        const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
                        if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
                        double* brow = gb + static_cast<size_t>(p) * n;
                        for (int j = 0; j < n; ++j)
                            brow[j] += v0 * g0[j] + v1 * g1[j] + v2 * g2[j] + v3 * g3[j];
                    }
                }
                for (; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        const double av = pa2[static_cast<size_t>(i) * k + p];
                        if (av == 0.0) continue;
                        const double* grow = go + static_cast<size_t>(i) * n;
                        double* brow = gb + static_cast<size_t>(p) * n;
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
            }
        });
    }
    return out;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
    const bool rg = a->requires_grad || b->requires_grad;
    if (same_shape(*a, *b)) {
        auto out = make_out(a->shape, rg);
        for (int i = 0; i < a->size(); ++i) out->values[static_cast<size_t>(i)] =
            a->values[static_cast<size_t>(i)] + b->values[static_cast<size_t>(i)];
        screen(out, "add");
        if (out->requires_grad) record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < a->size(); ++i)
                    a->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < b->size(); ++i)
                    b->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
            }
        });
        return out;
    }
    // vector broadcast across rows, either order
    const TensorPtr& mat = row_broadcast(*a, *b) ? a : b;
    const TensorPtr& vec = row_broadcast(*a, *b) ? b : a;
    if (!row_broadcast(*mat, *vec))
        throw DimensionError("add: incompatible shapes " + shape_str(a->shape) + " and " +
                             shape_str(b->shape));
    const int m = mat->shape[0], n = mat->shape[1];
    auto out = make_out(mat->shape, rg);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->values[static_cast<size_t>(i) * n + j] =
                mat->values[static_cast<size_t>(i) * n + j] + vec->values[static_cast<size_t>(j)];
    screen(out, "add");
    if (out->requires_grad) record([mat, vec, out, m, n] {
        if (mat->requires_grad) {
            mat->ensure_grad();
            for (int i = 0; i < m * n; ++i)
                mat->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
        }
        if (vec->requires_grad) {
            vec->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    vec->grad[static_cast<size_t>(j)] += out->grad[static_cast<size_t>(i) * n + j];
        }
    });
    return out;
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
    if (!same_shape(*a, *b))
        throw DimensionError("sub: shapes differ, " + shape_str(a->shape) + " vs " +
                             shape_str(b->shape));
    auto out = make_out(a->shape, a->requires_grad || b->requires_grad);
    for (int i = 0; i < a->size(); ++i)
        out->values[static_cast<size_t>(i)] =
            a->values[static_cast<size_t>(i)] - b->values[static_cast<size_t>(i)];
    screen(out, "sub");
    if (out->requires_grad) record([a, b, out] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < a->size(); ++i)
                a->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < b->size(); ++i)
                b->grad[static_cast<size_t>(i)] -= out->grad[static_cast<size_t>(i)];
        }
    });
    return out;
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
    const bool rg = a->requires_grad || b->requires_grad;
    if (same_shape(*a, *b)) {
        auto out = make_out(a->shape, rg);
        for (int i = 0; i < a->size(); ++i)
            out->values[static_cast<size_t>(i)] =
                a->values[static_cast<size_t>(i)] * b->values[static_cast<size_t>(i)];
        screen(out, "mul");
        if (out->requires_grad) record([a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < a->size(); ++i)
                    a->grad[static_cast<size_t>(i)] +=
                        out->grad[static_cast<size_t>(i)] * b->values[static_cast<size_t>(i)];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < b->size(); ++i)
                    b->grad[static_cast<size_t>(i)] +=
                        out->grad[static_cast<size_t>(i)] * a->values[static_cast<size_t>(i)];
            }
        });
        return out;
    }
    const TensorPtr& mat = row_broadcast(*a, *b) ? a : b;
    const TensorPtr& vec = row_broadcast(*a, *b) ? b : a;
    if (!row_broadcast(*mat, *vec))
        throw DimensionError("mul: incompatible shapes " + shape_str(a->shape) + " and " +
                             shape_str(b->shape));
    const int m = mat->shape[0], n = mat->shape[1];
    auto out = make_out(mat->shape, rg);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->values[static_cast<size_t>(i) * n + j] =
                mat->values[static_cast<size_t>(i) * n + j] * vec->values[static_cast<size_t>(j)];
    screen(out, "mul");
    if (out->requires_grad) record([mat, vec, out, m, n] {
        if (mat->requires_grad) {
            mat->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    mat->grad[static_cast<size_t>(i) * n + j] +=
                        out->grad[static_cast<size_t>(i) * n + j] * vec->values[static_cast<size_t>(j)];
        }
        if (vec->requires_grad) {
            vec->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    vec->grad[static_cast<size_t>(j)] +=
                        out->grad[static_cast<size_t>(i) * n + j] *
                        mat->values[static_cast<size_t>(i) * n + j];
        }
    });
    return out;
}

namespace {

template <typename F, typename DF>
TensorPtr unary_op(Graph& g, const TensorPtr& x, F f, DF df, const char* name,
                   std::function<TensorPtr(std::vector<int>, bool)> make,
                   std::function<void(std::function<void()>)> rec,
                   std::function<void(const TensorPtr&, const char*)> scr) {
    auto out = make(x->shape, x->requires_grad);
    for (int i = 0; i < x->size(); ++i)
        out->values[static_cast<size_t>(i)] = f(x->values[static_cast<size_t>(i)]);
    scr(out, name);
    if (out->requires_grad) rec([x, out, df] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i)
            x->grad[static_cast<size_t>(i)] +=
                out->grad[static_cast<size_t>(i)] *
                df(x->values[static_cast<size_t>(i)], out->values[static_cast<size_t>(i)]);
    });
    (void)g;
    return out;
}

}  // namespace

#define CROSSALIGN_UNARY(fn, fwd, bwd)                                                   \
    TensorPtr Graph::fn(const TensorPtr& x) {                                            \
        return unary_op(                                                                 \
            *this, x, [](double v) { return fwd; },                                      \
            [](double v, double y) { (void)v; (void)y; return bwd; }, #fn,               \
            [this](std::vector<int> s, bool rg) { return make_out(std::move(s), rg); },  \
            [this](std::function<void()> f) { record(std::move(f)); },                   \
            [this](const TensorPtr& t, const char* n) { screen(t, n); });                \
    }

CROSSALIGN_UNARY(tanh, std::tanh(v), 1.0 - y * y)
CROSSALIGN_UNARY(sigmoid, 1.0 / (1.0 + std::exp(-v)), y * (1.0 - y))
CROSSALIGN_UNARY(relu, v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0)
CROSSALIGN_UNARY(exp, std::exp(v), y)
CROSSALIGN_UNARY(log, std::log(v), 1.0 / v)

#undef CROSSALIGN_UNARY

TensorPtr Graph::clamp(const TensorPtr& x, double lo, double hi) {
    if (lo > hi) throw ParameterError("clamp: lo > hi");
    auto out = make_out(x->shape, x->requires_grad);
    for (int i = 0; i < x->size(); ++i)
        out->values[static_cast<size_t>(i)] =
            std::min(hi, std::max(lo, x->values[static_cast<size_t>(i)]));
    screen(out, "clamp");
    if (out->requires_grad) record([x, out, lo, hi] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i) {
            const double v = x->values[static_cast<size_t>(i)];
            if (v > lo && v < hi) x->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
        }
    });
    return out;
}

TensorPtr Graph::scale(const TensorPtr& x, double c) {
    auto out = make_out(x->shape, x->requires_grad);
    for (int i = 0; i < x->size(); ++i)
        out->values[static_cast<size_t>(i)] = c * x->values[static_cast<size_t>(i)];
    screen(out, "scale");
    if (out->requires_grad) record([x, out, c] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i)
            x->grad[static_cast<size_t>(i)] += c * out->grad[static_cast<size_t>(i)];
    });
    return out;
}

TensorPtr Graph::add_const(const TensorPtr& x, double c) {
    auto out = make_out(x->shape, x->requires_grad);
    for (int i = 0; i < x->size(); ++i)
        out->values[static_cast<size_t>(i)] = x->values[static_cast<size_t>(i)] + c;
    screen(out, "add_const");
    if (out->requires_grad) record([x, out] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i)
            x->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
    });
    return out;
}

TensorPtr Graph::rsub_const(double c, const TensorPtr& x) {
    auto out = make_out(x->shape, x->requires_grad);
    for (int i = 0; i < x->size(); ++i)
        out->values[static_cast<size_t>(i)] = c - x->values[static_cast<size_t>(i)];
    screen(out, "rsub_const");
    if (out->requires_grad) record([x, out] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i)
            x->grad[static_cast<size_t>(i)] -= out->grad[static_cast<size_t>(i)];
    });
    return out;
}

TensorPtr Graph::sum(const TensorPtr& x) {
    auto out = make_out({1}, x->requires_grad);
    out->values[0] = std::accumulate(x->values.begin(), x->values.end(), 0.0);
    screen(out, "sum");
    if (out->requires_grad) record([x, out] {
        x->ensure_grad();
        const double g = out->grad[0];
        for (int i = 0; i < x->size(); ++i) x->grad[static_cast<size_t>(i)] += g;
    });
    return out;
}

TensorPtr Graph::mean(const TensorPtr& x) {
    const int n = x->size();
    auto out = make_out({1}, x->requires_grad);
    out->values[0] = std::accumulate(x->values.begin(), x->values.end(), 0.0) / n;
    screen(out, "mean");
    if (out->requires_grad) record([x, out, n] {
        x->ensure_grad();
        const double g = out->grad[0] / n;
        for (int i = 0; i < n; ++i) x->grad[static_cast<size_t>(i)] += g;
    });
    return out;
}

TensorPtr Graph::softmax_temperature(const TensorPtr& v, double gamma) {
    if (gamma <= 0.0) throw ParameterError("softmax_temperature: gamma must be positive");
    if (v->rank() != 1 && v->rank() != 2)
        throw DimensionError("softmax_temperature: expects rank-1 or rank-2 input");
    const int rows = v->rank() == 2 ? v->shape[0] : 1;
    const int n = v->cols();
    auto out = make_out(v->shape, v->requires_grad);
    for (int r = 0; r < rows; ++r) {
        const double* in = v->values.data() + static_cast<size_t>(r) * n;
        double* po = out->values.data() + static_cast<size_t>(r) * n;
        double mx = in[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
            po[j] = std::exp((in[j] - mx) / gamma);
            total += po[j];
        }
        for (int j = 0; j < n; ++j) po[j] /= total;
    }
    screen(out, "softmax_temperature");
    if (out->requires_grad) record([v, out, rows, n, gamma] {
        v->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* p = out->values.data() + static_cast<size_t>(r) * n;
            const double* go = out->grad.data() + static_cast<size_t>(r) * n;
            double* gv = v->grad.data() + static_cast<size_t>(r) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += go[j] * p[j];
            for (int j = 0; j < n; ++j) gv[j] += p[j] * (go[j] - dot) / gamma;
        }
    });
    return out;
}

TensorPtr Graph::cross_entropy_logits(const TensorPtr& logits, const std::vector<int>& targets,
                                      const std::vector<char>& mask) {
    if (logits->rank() != 2)
        throw DimensionError("cross_entropy_logits: logits must be rank-2");
    const int n = logits->shape[0], vsz = logits->shape[1];
    if (static_cast<int>(targets.size()) != n || static_cast<int>(mask.size()) != n)
        throw DimensionError("cross_entropy_logits: targets/mask length must match rows");
    int live = 0;
    for (int i = 0; i < n; ++i) {
        if (!mask[static_cast<size_t>(i)]) continue;
        ++live;
        if (targets[static_cast<size_t>(i)] < 0 || targets[static_cast<size_t>(i)] >= vsz)
            throw IndexError("cross_entropy_logits: target id out of range");
    }
    if (live == 0) throw ContractError("cross_entropy_logits: all rows masked out");

    // cache row softmaxes for the backward rule
    auto probs = std::make_shared<std::vector<double>>(logits->values.size());
    auto out = make_out({1}, logits->requires_grad);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* in = logits->values.data() + static_cast<size_t>(i) * vsz;
        double* pr = probs->data() + static_cast<size_t>(i) * vsz;
        double mx = in[0];
        for (int j = 1; j < vsz; ++j) mx = std::max(mx, in[j]);
        double z = 0.0;
        for (int j = 0; j < vsz; ++j) {
            pr[j] = std::exp(in[j] - mx);
            z += pr[j];
        }
        for (int j = 0; j < vsz; ++j) pr[j] /= z;
        if (mask[static_cast<size_t>(i)]) {
            const double logz = std::log(z);
            total += logz + mx - in[targets[static_cast<size_t>(i)]];
        }
    }
    out->values[0] = total / live;
    screen(out, "cross_entropy_logits");
    if (out->requires_grad) record([logits, out, probs, targets, mask, n, vsz, live] {
        logits->ensure_grad();
        const double g = out->grad[0] / live;
        for (int i = 0; i < n; ++i) {
            if (!mask[static_cast<size_t>(i)]) continue;
            const double* pr = probs->data() + static_cast<size_t>(i) * vsz;
            double* gl = logits->grad.data() + static_cast<size_t>(i) * vsz;
            for (int j = 0; j < vsz; ++j) gl[j] += g * pr[j];
            gl[targets[static_cast<size_t>(i)]] -= g;
        }
    });
    return out;
}

TensorPtr Graph::reshape(const TensorPtr& x, std::vector<int> shape) {
    if (shape_product(shape) != x->size())
        throw DimensionError("reshape: size mismatch, " + shape_str(x->shape) + " -> " +
                             shape_str(shape));
    auto out = make_out(std::move(shape), x->requires_grad);
    out->values = x->values;
    if (out->requires_grad) record([x, out] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i)
            x->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
    });
    return out;
}

TensorPtr Graph::concat_cols(const TensorPtr& a, const TensorPtr& b) {
    if (a->rank() != 2 || b->rank() != 2 || a->shape[0] != b->shape[0])
        throw DimensionError("concat_cols: expects rank-2 with matching rows, got " +
                             shape_str(a->shape) + " and " + shape_str(b->shape));
    const int m = a->shape[0], p = a->shape[1], q = b->shape[1];
    auto out = make_out({m, p + q}, a->requires_grad || b->requires_grad);
    for (int i = 0; i < m; ++i) {
        std::copy_n(a->values.data() + static_cast<size_t>(i) * p, p,
                    out->values.data() + static_cast<size_t>(i) * (p + q));
        std::copy_n(b->values.data() + static_cast<size_t>(i) * q, q,
                    out->values.data() + static_cast<size_t>(i) * (p + q) + p);
    }
    if (out->requires_grad) record([a, b, out, m, p, q] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < p; ++j)
                    a->grad[static_cast<size_t>(i) * p + j] +=
                        out->grad[static_cast<size_t>(i) * (p + q) + j];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < q; ++j)
                    b->grad[static_cast<size_t>(i) * q + j] +=
                        out->grad[static_cast<size_t>(i) * (p + q) + p + j];
        }
    });
    return out;
}

TensorPtr Graph::repeat_rows(const TensorPtr& v, int m) {
    if (v->rank() != 1) throw DimensionError("repeat_rows: expects a rank-1 tensor");
    if (m <= 0) throw ParameterError("repeat_rows: m must be positive");
    const int n = v->shape[0];
    auto out = make_out({m, n}, v->requires_grad);
    for (int i = 0; i < m; ++i)
        std::copy_n(v->values.data(), n, out->values.data() + static_cast<size_t>(i) * n);
    if (out->requires_grad) record([v, out, m, n] {
        v->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                v->grad[static_cast<size_t>(j)] += out->grad[static_cast<size_t>(i) * n + j];
    });
    return out;
}

TensorPtr Graph::mask_rows(const TensorPtr& x, const std::vector<double>& row_scale) {
    if (x->rank() != 2) throw DimensionError("mask_rows: expects a rank-2 tensor");
    const int m = x->shape[0], n = x->shape[1];
    if (static_cast<int>(row_scale.size()) != m)
        throw DimensionError("mask_rows: scale length must equal rows");
    auto out = make_out(x->shape, x->requires_grad);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->values[static_cast<size_t>(i) * n + j] =
                x->values[static_cast<size_t>(i) * n + j] * row_scale[static_cast<size_t>(i)];
    if (out->requires_grad) record([x, out, row_scale, m, n] {
        x->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                x->grad[static_cast<size_t>(i) * n + j] +=
                    out->grad[static_cast<size_t>(i) * n + j] * row_scale[static_cast<size_t>(i)];
    });
    return out;
}

TensorPtr Graph::stack_time(const std::vector<TensorPtr>& steps) {
    if (steps.empty()) throw ContractError("stack_time: no steps");
    const int b = steps[0]->shape[0], d = steps[0]->shape[1];
    bool rg = false;
    for (const auto& s : steps) {
        if (s->rank() != 2 || s->shape[0] != b || s->shape[1] != d)
            throw DimensionError("stack_time: step shapes differ");
        rg = rg || s->requires_grad;
    }
    const int T = static_cast<int>(steps.size());
    auto out = make_out({b, T, d}, rg);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < b; ++i)
            std::copy_n(steps[static_cast<size_t>(t)]->values.data() + static_cast<size_t>(i) * d,
                        d,
                        out->values.data() + (static_cast<size_t>(i) * T + t) * d);
    if (out->requires_grad) record([steps, out, b, T, d] {
        for (int t = 0; t < T; ++t) {
            const auto& s = steps[static_cast<size_t>(t)];
            if (!s->requires_grad) continue;
            s->ensure_grad();
            for (int i = 0; i < b; ++i)
                for (int j = 0; j < d; ++j)
                    s->grad[static_cast<size_t>(i) * d + j] +=
                        out->grad[(static_cast<size_t>(i) * T + t) * d + j];
        }
    });
    return out;
}

TensorPtr Graph::embed_rows(const TensorPtr& table, const std::vector<int>& ids) {
    if (table->rank() != 2) throw DimensionError("embed_rows: table must be rank-2");
    const int vsz = table->shape[0], d = table->shape[1];
    const int n = static_cast<int>(ids.size());
    if (n == 0) throw ContractError("embed_rows: empty id list");
    for (int id : ids)
        if (id < 0 || id >= vsz) throw IndexError("embed_rows: id out of range");
    auto out = make_out({n, d}, table->requires_grad);
    for (int i = 0; i < n; ++i)
        std::copy_n(table->values.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d, d,
                    out->values.data() + static_cast<size_t>(i) * d);
    if (out->requires_grad) record([table, out, ids, n, d] {
        table->ensure_grad();
        for (int i = 0; i < n; ++i) {
            double* dst = table->grad.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d;
            const double* src = out->grad.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
    return out;
}

TensorPtr Graph::conv1d_time(const TensorPtr& seq, const TensorPtr& w, const TensorPtr& bias) {
    if (seq->rank() != 3 || w->rank() != 3 || bias->rank() != 1)
        throw DimensionError("conv1d_time: expects seq [b,T,d], w [k,d,F], bias [F]");
    const int b = seq->shape[0], T = seq->shape[1], d = seq->shape[2];
    const int k = w->shape[0], F = w->shape[2];
    if (w->shape[1] != d) throw DimensionError("conv1d_time: filter depth must match seq depth");
    if (bias->shape[0] != F) throw DimensionError("conv1d_time: bias length must match filters");
    if (T < k) throw ContractError("conv1d_time: sequence shorter than filter width");
    const int To = T - k + 1;
    auto out = make_out({b, To, F},
                        seq->requires_grad || w->requires_grad || bias->requires_grad);
    const double* ps = seq->values.data();
    const double* pw = w->values.data();
    const double* pbias = bias->values.data();
    double* po = out->values.data();
    // time positions blocked by 4 so each streamed filter row feeds four
    // output windows
    for (int i = 0; i < b; ++i) {
        int t = 0;
        for (; t + 4 <= To; t += 4) {
            double* o0 = po + (static_cast<size_t>(i) * To + t) * F;
            double* o1 = o0 + F;
            double* o2 = o1 + F;
            double* o3 = o2 + F;
            for (int f = 0; f < F; ++f) {
                o0[f] = pbias[f];
                o1[f] = pbias[f];
                o2[f] = pbias[f];
                o3[f] = pbias[f];
            }
            for (int kk = 0; kk < k; ++kk) {
                const double* s0 = ps + (static_cast<size_t>(i) * T + t + kk) * d;
                const double* s1 = s0 + d;
                const double* s2 = s1 + d;
                const double* s3 = s2 + d;
                const double* wrow = pw + static_cast<size_t>(kk) * d * F;
                for (int c = 0; c < d; ++c) {
                    const double v0 = s0[c], v1 = s1[c], v2 = s2[c], v3 = s3[c];
                    if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
                    const double* wf = wrow + static_cast<size_t>(c) * F;
                    for (int f = 0; f < F; ++f) {
                        const double wv = wf[f];
                        o0[f] += v0 * wv;
                        o1[f] += v1 * wv;
                        o2[f] += v2 * wv;
                        o3[f] += v3 * wv;
                    }
                }
            }
        }
        for (; t < To; ++t) {
            double* orow = po + (static_cast<size_t>(i) * To + t) * F;
            for (int f = 0; f < F; ++f) orow[f] = pbias[f];
            for (int kk = 0; kk < k; ++kk) {
                const double* srow = ps + (static_cast<size_t>(i) * T + t + kk) * d;
                const double* wrow = pw + static_cast<size_t>(kk) * d * F;
                for (int c = 0; c < d; ++c) {
                    const double sv = srow[c];
                    if (sv == 0.0) continue;
                    const double* wf = wrow + static_cast<size_t>(c) * F;
                    for (int f = 0; f < F; ++f) orow[f] += sv * wf[f];
                }
            }
        }
    }
    screen(out, "conv1d_time");
    if (out->requires_grad) record([seq, w, bias, out, b, T, d, k, F, To] {
        const double* go = out->grad.data();
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (int i = 0; i < b * To; ++i)
                for (int f = 0; f < F; ++f)
                    bias->grad[static_cast<size_t>(f)] += go[static_cast<size_t>(i) * F + f];
        }
        if (w->requires_grad) {
            w->ensure_grad();
            for (int i = 0; i < b; ++i) {
                int t = 0;
                for (; t + 4 <= To; t += 4) {
                    const double* g0 = go + (static_cast<size_t>(i) * To + t) * F;
                    const double* g1 = g0 + F;
                    const double* g2 = g1 + F;
                    const double* g3 = g2 + F;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* s0 =
                            seq->values.data() + (static_cast<size_t>(i) * T + t + kk) * d;
                        const double* s1 = s0 + d;
                        const double* s2 = s1 + d;
                        const double* s3 = s2 + d;
                        double* wrow = w->grad.data() + static_cast<size_t>(kk) * d * F;
                        for (int c = 0; c < d; ++c) {
                            const double v0 = s0[c], v1 = s1[c], v2 = s2[c], v3 = s3[c];
                            if (v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0) continue;
                            double* wf = wrow + static_cast<size_t>(c) * F;
                            for (int f = 0; f < F; ++f)
                                wf[f] += v0 * g0[f] + v1 * g1[f] + v2 * g2[f] + v3 * g3[f];
                        }
                    }
                }
                for (; t < To; ++t) {
                    const double* grow = go + (static_cast<size_t>(i) * To + t) * F;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* srow =
                            seq->values.data() + (static_cast<size_t>(i) * T + t + kk) * d;
                        double* wrow = w->grad.data() + static_cast<size_t>(kk) * d * F;
                        for (int c = 0; c < d; ++c) {
                            const double sv = srow[c];
                            if (sv == 0.0) continue;
                            double* wf = wrow + static_cast<size_t>(c) * F;
                            for (int f = 0; f < F; ++f) wf[f] += sv * grow[f];
                        }
                    }
                }
            }
        }
        if (seq->requires_grad) {
            seq->ensure_grad();
            // filters transposed to [k x F x d]: the channel loop becomes a
            // unit-stride multiply-add rather than a dot-product reduction
            std::vector<double> wt(static_cast<size_t>(k) * F * d);
            for (int kk = 0; kk < k; ++kk)
                for (int c = 0; c < d; ++c)
                    for (int f = 0; f < F; ++f)
                        wt[(static_cast<size_t>(kk) * F + f) * d + c] =
                            w->values[(static_cast<size_t>(kk) * d + c) * F + f];
            for (int i = 0; i < b; ++i)
                for (int t = 0; t < To; ++t) {
                    const double* grow = go + (static_cast<size_t>(i) * To + t) * F;
                    for (int kk = 0; kk < k; ++kk) {
                        double* srow =
                            seq->grad.data() + (static_cast<size_t>(i) * T + t + kk) * d;
                        const double* wk = wt.data() + static_cast<size_t>(kk) * F * d;
                        for (int f = 0; f < F; ++f) {
                            const double gv = grow[f];
                            if (gv == 0.0) continue;
                            const double* wfrow = wk + static_cast<size_t>(f) * d;
                            for (int c = 0; c < d; ++c) srow[c] += gv * wfrow[c];
                        }
                    }
                }
        }
    });
    return out;
}

TensorPtr Graph::max_over_time(const TensorPtr& x, const std::vector<int>& valid_counts) {
    if (x->rank() != 3) throw DimensionError("max_over_time: expects a rank-3 tensor");
    const int b = x->shape[0], T = x->shape[1], F = x->shape[2];
    if (!valid_counts.empty() && static_cast<int>(valid_counts.size()) != b)
        throw DimensionError("max_over_time: valid_counts length must equal batch");
    for (int v : valid_counts)
        if (v < 1 || v > T) throw ContractError("max_over_time: valid count out of [1, T]");
    auto out = make_out({b, F}, x->requires_grad);
    auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(b) * F);
    for (int i = 0; i < b; ++i) {
        const int tv = valid_counts.empty() ? T : valid_counts[static_cast<size_t>(i)];
        for (int f = 0; f < F; ++f) {
            double best = x->values[(static_cast<size_t>(i) * T) * F + f];
            int bt = 0;
            for (int t = 1; t < tv; ++t) {
                const double v = x->values[(static_cast<size_t>(i) * T + t) * F + f];
                if (v > best) {   // strict: ties keep the earliest position
                    best = v;
                    bt = t;
                }
            }
            out->values[static_cast<size_t>(i) * F + f] = best;
            (*arg)[static_cast<size_t>(i) * F + f] = bt;
        }
    }
    if (out->requires_grad) record([x, out, arg, b, T, F] {
        x->ensure_grad();
        for (int i = 0; i < b; ++i)
            for (int f = 0; f < F; ++f) {
                const int t = (*arg)[static_cast<size_t>(i) * F + f];
                x->grad[(static_cast<size_t>(i) * T + t) * F + f] +=
                    out->grad[static_cast<size_t>(i) * F + f];
            }
    });
    return out;
}

TensorPtr Graph::dropout(const TensorPtr& x, double rate, Rng& rng, bool train_mode) {
    if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout: rate must be in [0, 1)");
    if (!train_mode || rate == 0.0) {
        // identity pass-through; still recorded so grads flow
        auto out = make_out(x->shape, x->requires_grad);
        out->values = x->values;
        if (out->requires_grad) record([x, out] {
            x->ensure_grad();
            for (int i = 0; i < x->size(); ++i)
                x->grad[static_cast<size_t>(i)] += out->grad[static_cast<size_t>(i)];
        });
        return out;
    }
    auto keep = std::make_shared<std::vector<double>>(x->values.size());
    const double inv = 1.0 / (1.0 - rate);
    for (auto& k : *keep) k = rng.uniform() < rate ? 0.0 : inv;
    auto out = make_out(x->shape, x->requires_grad);
    for (int i = 0; i < x->size(); ++i)
        out->values[static_cast<size_t>(i)] =
            x->values[static_cast<size_t>(i)] * (*keep)[static_cast<size_t>(i)];
    if (out->requires_grad) record([x, out, keep] {
        x->ensure_grad();
        for (int i = 0; i < x->size(); ++i)
            x->grad[static_cast<size_t>(i)] +=
                out->grad[static_cast<size_t>(i)] * (*keep)[static_cast<size_t>(i)];
    });
    return out;
}

void Graph::backward(const TensorPtr& loss) {
    if (!recording_) throw ContractError("backward: graph is not recording");
    if (loss->size() != 1) throw ContractError("backward: loss must be a scalar");
    if (!loss->requires_grad)
        throw ContractError("backward: loss does not depend on any tracked tensor");
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    clear();
}

void Graph::clear() { tape_.clear(); }

double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    if (analytic.size() != numeric.size())
        throw DimensionError("max_rel_error: length mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max(1.0, std::fabs(analytic[i]));
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

double grad_check(const std::function<TensorPtr(Graph&)>& f, const TensorPtr& wrt, double h) {
    if (h <= 0.0) throw ParameterError("grad_check: step must be positive");
    Graph g;
    auto loss = f(g);
    if (loss->size() != 1) throw ContractError("grad_check: f must return a scalar loss");
    wrt->zero_grad();
    g.backward(loss);
    wrt->ensure_grad();
    std::vector<double> analytic = wrt->grad;

    std::vector<double> numeric(analytic.size(), 0.0);
    for (size_t i = 0; i < wrt->values.size(); ++i) {
        const double saved = wrt->values[i];
        Graph gp(false);
        wrt->values[i] = saved + h;
        const double fp = f(gp)->values[0];
        Graph gm(false);
        wrt->values[i] = saved - h;
        const double fm = f(gm)->values[0];
        wrt->values[i] = saved;
        numeric[i] = (fp - fm) / (2.0 * h);
    }
    return max_rel_error(analytic, numeric);
}

}  // namespace crossalign::ad
