#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossalign/autodiff.hpp"

namespace crossalign::nn {

using ad::Graph;
using ad::Tensor;
using ad::TensorPtr;

// Token embedding table. Row `pad_id` is pinned to the zero vector: it is
// zeroed at init and re-zeroed after every optimizer step (see pin_pad()).
struct Embedding {
    TensorPtr table;   // [V x d]
    int pad_id = 0;

    Embedding() = default;
    Embedding(int vocab, int dim, int pad, Rng& rng);

    int vocab() const { return table->shape[0]; }
    int dim() const { return table->shape[1]; }
    void pin_pad();

    // Hard lookup of rows; ids must be in range.
    TensorPtr lookup(Graph& g, const std::vector<int>& ids) const;
    // Soft lookup: dist [b x V] of row distributions (each summing to 1
    // within 1e-6) times the table. Linear in dist.
    TensorPtr lookup_soft(Graph& g, const TensorPtr& dist) const;
};

// Gated recurrent cell:
//   z = sigmoid(x Wxz + h Whz + bz)
//   r = sigmoid(x Wxr + h Whr + br)
//   hc = tanh(x Wxh + (r . h) Whh + bh)
//   h' = (1 - z) . h + z . hc
struct GruCell {
    TensorPtr wxz, whz, bz;
    TensorPtr wxr, whr, br;
    TensorPtr wxh, whh, bh;

    GruCell() = default;
    GruCell(int d_in, int d_hidden, Rng& rng);

    int input_dim() const { return wxz->shape[0]; }
    int hidden_dim() const { return wxz->shape[1]; }

    // x [b x d_in], h [b x d_hidden] -> [b x d_hidden]
    TensorPtr step(Graph& g, const TensorPtr& x, const TensorPtr& h) const;

    std::vector<TensorPtr> params() const;
};

enum class Activation { none, sigmoid, tanh, relu };

// Fully connected layer with optional activation.
struct Dense {
    TensorPtr w;   // [d_in x d_out]
    TensorPtr b;   // [d_out]
    Activation act = Activation::none;

    Dense() = default;
    Dense(int d_in, int d_out, Activation a, Rng& rng);

    TensorPtr forward(Graph& g, const TensorPtr& x) const;
    std::vector<TensorPtr> params() const;
};

// Sentence-level convolutional scorer: parallel filter banks over time,
// relu, max-over-time pooling, dropout on the pooled vector, one dense
// output. Defaults follow the standard sentence-CNN recipe (widths 3/4/5,
// 100 filters each, dropout 0.5).
struct TextCnn {
    std::vector<int> widths;
    std::map<int, TensorPtr> filters;   // width -> [w x d_in x F]
    std::map<int, TensorPtr> biases;    // width -> [F]
    Dense out;                          // [widths.size()*F -> 1], no activation
    double dropout_rate = 0.5;
    int n_filters = 100;

    TextCnn() = default;
    TextCnn(int d_in, Rng& rng, std::vector<int> widths = {3, 4, 5}, int n_filters = 100,
            double dropout_rate = 0.5);

    int input_dim() const { return filters.begin()->second->shape[1]; }

    // seq [b x T x d_in] -> logits [b x 1]. T must be >= max width; the
    // caller pads shorter sequences. `lengths` limits pooling to windows
    // that start inside each row's true extent (all windows when empty),
    // which makes the output invariant to trailing all-zero padding.
    TensorPtr forward(Graph& g, const TensorPtr& seq, bool train_mode, Rng& rng,
                      const std::vector<int>& lengths = {}) const;

    std::vector<TensorPtr> params() const;
};

}  // namespace crossalign::nn
