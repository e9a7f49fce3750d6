#include "crossalign/nn.hpp"

#include <algorithm>
#include <cmath>

namespace crossalign::nn {

namespace {
constexpr double kInitLo = -0.1;
constexpr double kInitHi = 0.1;
}  // namespace

Embedding::Embedding(int vocab, int dim, int pad, Rng& rng) : pad_id(pad) {
    if (vocab <= 0 || dim <= 0) throw ParameterError("Embedding: sizes must be positive");
    if (pad < 0 || pad >= vocab) throw IndexError("Embedding: pad id out of range");
    table = Tensor::uniform({vocab, dim}, rng, kInitLo, kInitHi);
    pin_pad();
}

void Embedding::pin_pad() {
    std::fill_n(table->values.begin() + static_cast<size_t>(pad_id) * dim(), dim(), 0.0);
}

TensorPtr Embedding::lookup(Graph& g, const std::vector<int>& ids) const {
    return g.embed_rows(table, ids);
}

TensorPtr Embedding::lookup_soft(Graph& g, const TensorPtr& dist) const {
    if (dist->rank() != 2 || dist->shape[1] != vocab())
        throw DimensionError("lookup_soft: dist must be [b x V]");
    const int b = dist->shape[0], vsz = vocab();
    for (int i = 0; i < b; ++i) {
        double s = 0.0;
        for (int j = 0; j < vsz; ++j) s += dist->values[static_cast<size_t>(i) * vsz + j];
        if (std::fabs(s - 1.0) > 1e-6)
            throw ContractError("lookup_soft: distribution row does not sum to 1");
    }
    return g.matmul(dist, table);
}

GruCell::GruCell(int d_in, int d_hidden, Rng& rng) {
    if (d_in <= 0 || d_hidden <= 0) throw ParameterError("GruCell: sizes must be positive");
    wxz = Tensor::uniform({d_in, d_hidden}, rng, kInitLo, kInitHi);
    whz = Tensor::uniform({d_hidden, d_hidden}, rng, kInitLo, kInitHi);
    bz = Tensor::zeros({d_hidden}, true);
    wxr = Tensor::uniform({d_in, d_hidden}, rng, kInitLo, kInitHi);
    whr = Tensor::uniform({d_hidden, d_hidden}, rng, kInitLo, kInitHi);
    br = Tensor::zeros({d_hidden}, true);
    wxh = Tensor::uniform({d_in, d_hidden}, rng, kInitLo, kInitHi);
    whh = Tensor::uniform({d_hidden, d_hidden}, rng, kInitLo, kInitHi);
    bh = Tensor::zeros({d_hidden}, true);
}

TensorPtr GruCell::step(Graph& g, const TensorPtr& x, const TensorPtr& h) const {
    if (x->rank() != 2 || x->shape[1] != input_dim())
        throw DimensionError("GruCell::step: x must be [b x d_in]");
    if (h->rank() != 2 || h->shape[1] != hidden_dim() || h->shape[0] != x->shape[0])
        throw DimensionError("GruCell::step: h must be [b x d_hidden] with matching batch");
    auto z = g.sigmoid(g.add(g.add(g.matmul(x, wxz), g.matmul(h, whz)), bz));
    auto r = g.sigmoid(g.add(g.add(g.matmul(x, wxr), g.matmul(h, whr)), br));
    auto hc = g.tanh(g.add(g.add(g.matmul(x, wxh), g.matmul(g.mul(r, h), whh)), bh));
    return g.add(g.mul(g.rsub_const(1.0, z), h), g.mul(z, hc));
}

std::vector<TensorPtr> GruCell::params() const {
    return {wxz, whz, bz, wxr, whr, br, wxh, whh, bh};
}

Dense::Dense(int d_in, int d_out, Activation a, Rng& rng) : act(a) {
    if (d_in <= 0 || d_out <= 0) throw ParameterError("Dense: sizes must be positive");
    w = Tensor::uniform({d_in, d_out}, rng, kInitLo, kInitHi);
    b = Tensor::zeros({d_out}, true);
}

TensorPtr Dense::forward(Graph& g, const TensorPtr& x) const {
    auto y = g.add(g.matmul(x, w), b);
    switch (act) {
        case Activation::none: return y;
        case Activation::sigmoid: return g.sigmoid(y);
        case Activation::tanh: return g.tanh(y);
        case Activation::relu: return g.relu(y);
    }
    throw ParameterError("Dense::forward: unknown activation");
}

std::vector<TensorPtr> Dense::params() const { return {w, b}; }

TextCnn::TextCnn(int d_in, Rng& rng, std::vector<int> ws, int nf, double dr)
    : widths(std::move(ws)), dropout_rate(dr), n_filters(nf) {
    if (widths.empty()) throw ParameterError("TextCnn: need at least one filter width");
    if (nf <= 0) throw ParameterError("TextCnn: n_filters must be positive");
    for (int w : widths) {
        if (w <= 0) throw ParameterError("TextCnn: filter widths must be positive");
        filters[w] = Tensor::uniform({w, d_in, nf}, rng, kInitLo, kInitHi);
        biases[w] = Tensor::zeros({nf}, true);
    }
    out = Dense(static_cast<int>(widths.size()) * nf, 1, Activation::none, rng);
}

TensorPtr TextCnn::forward(Graph& g, const TensorPtr& seq, bool train_mode, Rng& rng,
                           const std::vector<int>& lengths) const {
    if (seq->rank() != 3 || seq->shape[2] != input_dim())
        throw DimensionError("textcnn_forward: seq must be [b x T x d_in]");
    const int b = seq->shape[0], T = seq->shape[1];
    const int wmax = *std::max_element(widths.begin(), widths.end());
    if (T < wmax)
        throw ContractError("textcnn_forward: sequence length below max filter width; pad first");
    if (!lengths.empty() && static_cast<int>(lengths.size()) != b)
        throw DimensionError("textcnn_forward: lengths must match batch");

    TensorPtr pooled;
    for (int w : widths) {
        auto conv = g.relu(g.conv1d_time(seq, filters.at(w), biases.at(w)));
        std::vector<int> valid;
        if (!lengths.empty()) {
            valid.resize(static_cast<size_t>(b));
            for (int i = 0; i < b; ++i) {
                // windows fully inside max(length, w); at least one window
                const int eff = std::max(lengths[static_cast<size_t>(i)], w);
                valid[static_cast<size_t>(i)] = std::min(eff, T) - w + 1;
            }
        }
        auto p = g.max_over_time(conv, valid);
        pooled = pooled ? g.concat_cols(pooled, p) : p;
    }
    pooled = g.dropout(pooled, dropout_rate, rng, train_mode);
    return out.forward(g, pooled);
}

std::vector<TensorPtr> TextCnn::params() const {
    std::vector<TensorPtr> ps;
    for (int w : widths) {
        ps.push_back(filters.at(w));
        ps.push_back(biases.at(w));
    }
    auto op = out.params();
    ps.insert(ps.end(), op.begin(), op.end());
    return ps;
}

}  // namespace crossalign::nn
