#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crossalign/data.hpp"
#include "crossalign/nn.hpp"

namespace crossalign::model {

using ad::Graph;
using ad::TensorPtr;
using data::SentenceBatch;

// Width configuration. The generator hidden size is always d_y + d_z; the
// encoder hidden size is d_z and its initial state is the style vector
// zero-padded to that width, so d_z >= d_y is required.
struct Dims {
    int d_emb = 64;
    int d_y = 32;
    int d_z = 96;
    int n_filters = 32;

    int d_h() const { return d_y + d_z; }

    static Dims desk() { return {64, 32, 96, 32}; }
    static Dims paper() { return {100, 200, 500, 100}; }
    void validate() const;
};

// All learnable state for one model: shared embedding, encoder, generator,
// output projection, the two style vectors, a latent discriminator over z,
// two sequence discriminators over generator hidden states, and the Gaussian
// posterior heads. Components not used by a given training variant simply
// stay at their initialization.
struct ModelParams {
    Dims dims;
    int vocab = 0;

    nn::Embedding emb;       // [V x d_emb]
    nn::GruCell enc;         // d_emb -> d_z
    nn::GruCell gen;         // d_emb -> d_h
    nn::Dense proj;          // d_h -> V
    TensorPtr y1, y2;        // [d_y]
    nn::Dense dz_hidden;     // d_z -> d_z, relu
    nn::Dense dz_out;        // d_z -> 1
    nn::TextCnn d1, d2;      // over hidden sequences [.. x d_h]
    nn::Dense vae_mu;        // d_z -> d_z
    nn::Dense vae_logvar;    // d_z -> d_z

    ModelParams() = default;
    ModelParams(Dims dims, int vocab, Rng& rng);

    // deep copy: fresh tensors, same values
    ModelParams clone() const;

    TensorPtr style(int s) const;

    // parameter groups; updates must never cross groups
    std::vector<TensorPtr> enc_gen_params() const;          // theta_E + theta_G
    std::vector<TensorPtr> latent_disc_params() const;      // theta_D
    std::vector<TensorPtr> seq_disc_params(int which) const;  // theta_D1 / theta_D2
    std::vector<TensorPtr> all_params() const;

    // stable names for checkpointing
    std::vector<std::pair<std::string, TensorPtr>> named_params() const;

    void pin_pad() { emb.pin_pad(); }
};

// z = encoder hidden state at each sentence's true length (content + <eos>).
// Appending pads never changes z. [b x d_z]
TensorPtr encode(Graph& g, const ModelParams& p, const SentenceBatch& batch, int style);

struct DecodeResult {
    TensorPtr logits;                 // [b x T x V]
    std::vector<TensorPtr> hidden;    // h0..hT, each [b x d_h]
    std::vector<TensorPtr> soft;      // self-fed only: p_t, each [b x V]
};

// Teacher forcing: inputs are <go> then the gold prefix; h0 = [style; z].
DecodeResult decode_teacher_forced(Graph& g, const ModelParams& p, const TensorPtr& z, int style,
                                   const SentenceBatch& batch);

// Self-feeding: each step consumes the temperature-softmax of the previous
// logits times the embedding table, unrolled for exactly `unroll_len` steps.
DecodeResult decode_self_fed(Graph& g, const ModelParams& p, const TensorPtr& z, int style,
                             int unroll_len, double gamma);

// encode with src style, greedy-decode (hard argmax, ties to the lowest id)
// with tgt style until <eos> or max_len. Returned ids carry no specials.
// src == tgt is allowed but logged as unusual.
std::vector<std::vector<int>> transfer(const ModelParams& p, const SentenceBatch& batch,
                                       int src_style, int tgt_style, int max_len = 20);

}  // namespace crossalign::model
