#include "crossalign/model.hpp"

#include <algorithm>
#include <cstdio>

#include "crossalign/errors.hpp"

namespace crossalign::model {

using ad::Tensor;

void Dims::validate() const {
    if (d_emb <= 0 || d_y <= 0 || d_z <= 0 || n_filters <= 0)
        throw ParameterError("Dims: all widths must be positive");
    if (d_z < d_y)
        throw ParameterError("Dims: d_z must be >= d_y (style vector is zero-padded to d_z)");
}

ModelParams::ModelParams(Dims d, int v, Rng& rng) : dims(d), vocab(v) {
    dims.validate();
    if (vocab < 5) throw ParameterError("ModelParams: vocabulary too small");
    emb = nn::Embedding(vocab, dims.d_emb, data::kPad, rng);
    enc = nn::GruCell(dims.d_emb, dims.d_z, rng);
    gen = nn::GruCell(dims.d_emb, dims.d_h(), rng);
    proj = nn::Dense(dims.d_h(), vocab, nn::Activation::none, rng);
    y1 = Tensor::uniform({dims.d_y}, rng, -0.1, 0.1);
    y2 = Tensor::uniform({dims.d_y}, rng, -0.1, 0.1);
    dz_hidden = nn::Dense(dims.d_z, dims.d_z, nn::Activation::relu, rng);
    dz_out = nn::Dense(dims.d_z, 1, nn::Activation::none, rng);
    d1 = nn::TextCnn(dims.d_h(), rng, {3, 4, 5}, dims.n_filters, 0.5);
    d2 = nn::TextCnn(dims.d_h(), rng, {3, 4, 5}, dims.n_filters, 0.5);
    vae_mu = nn::Dense(dims.d_z, dims.d_z, nn::Activation::none, rng);
    vae_logvar = nn::Dense(dims.d_z, dims.d_z, nn::Activation::none, rng);
}

ModelParams ModelParams::clone() const {
    ModelParams c = *this;   // copies structure, but tensors still alias
    auto dup = [](TensorPtr& t) { t = std::make_shared<ad::Tensor>(*t); };
    dup(c.emb.table);
    for (auto cell : {&c.enc, &c.gen}) {
        dup(cell->wxz); dup(cell->whz); dup(cell->bz);
        dup(cell->wxr); dup(cell->whr); dup(cell->br);
        dup(cell->wxh); dup(cell->whh); dup(cell->bh);
    }
    dup(c.proj.w); dup(c.proj.b);
    dup(c.y1); dup(c.y2);
    dup(c.dz_hidden.w); dup(c.dz_hidden.b);
    dup(c.dz_out.w); dup(c.dz_out.b);
    for (auto cnn : {&c.d1, &c.d2}) {
        for (auto& kv : cnn->filters) dup(kv.second);
        for (auto& kv : cnn->biases) dup(kv.second);
        dup(cnn->out.w); dup(cnn->out.b);
    }
    dup(c.vae_mu.w); dup(c.vae_mu.b);
    dup(c.vae_logvar.w); dup(c.vae_logvar.b);
    return c;
}

TensorPtr ModelParams::style(int s) const {
    if (s == 1) return y1;
    if (s == 2) return y2;
    throw ParameterError("style must be 1 or 2");
}

std::vector<TensorPtr> ModelParams::enc_gen_params() const {
    std::vector<TensorPtr> ps{emb.table};
    for (const auto& t : enc.params()) ps.push_back(t);
    for (const auto& t : gen.params()) ps.push_back(t);
    for (const auto& t : proj.params()) ps.push_back(t);
    ps.push_back(y1);
    ps.push_back(y2);
    for (const auto& t : vae_mu.params()) ps.push_back(t);
    for (const auto& t : vae_logvar.params()) ps.push_back(t);
    return ps;
}

std::vector<TensorPtr> ModelParams::latent_disc_params() const {
    std::vector<TensorPtr> ps;
    for (const auto& t : dz_hidden.params()) ps.push_back(t);
    for (const auto& t : dz_out.params()) ps.push_back(t);
    return ps;
}

std::vector<TensorPtr> ModelParams::seq_disc_params(int which) const {
    if (which != 1 && which != 2) throw ParameterError("seq_disc_params: which must be 1 or 2");
    return (which == 1 ? d1 : d2).params();
}

std::vector<TensorPtr> ModelParams::all_params() const {
    auto ps = enc_gen_params();
    for (const auto& t : latent_disc_params()) ps.push_back(t);
    for (const auto& t : seq_disc_params(1)) ps.push_back(t);
    for (const auto& t : seq_disc_params(2)) ps.push_back(t);
    return ps;
}

std::vector<std::pair<std::string, TensorPtr>> ModelParams::named_params() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    auto add_gru = [&out](const std::string& prefix, const nn::GruCell& c) {
        out.emplace_back(prefix + ".wxz", c.wxz);
        out.emplace_back(prefix + ".whz", c.whz);
        out.emplace_back(prefix + ".bz", c.bz);
        out.emplace_back(prefix + ".wxr", c.wxr);
        out.emplace_back(prefix + ".whr", c.whr);
        out.emplace_back(prefix + ".br", c.br);
        out.emplace_back(prefix + ".wxh", c.wxh);
        out.emplace_back(prefix + ".whh", c.whh);
        out.emplace_back(prefix + ".bh", c.bh);
    };
    auto add_dense = [&out](const std::string& prefix, const nn::Dense& d) {
        out.emplace_back(prefix + ".w", d.w);
        out.emplace_back(prefix + ".b", d.b);
    };
    auto add_cnn = [&](const std::string& prefix, const nn::TextCnn& c) {
        for (int w : c.widths) {
            out.emplace_back(prefix + ".filt" + std::to_string(w), c.filters.at(w));
            out.emplace_back(prefix + ".bias" + std::to_string(w), c.biases.at(w));
        }
        add_dense(prefix + ".out", c.out);
    };
    out.emplace_back("emb.table", emb.table);
    add_gru("enc", enc);
    add_gru("gen", gen);
    add_dense("proj", proj);
    out.emplace_back("style.y1", y1);
    out.emplace_back("style.y2", y2);
    add_dense("dz.hidden", dz_hidden);
    add_dense("dz.out", dz_out);
    add_cnn("d1", d1);
    add_cnn("d2", d2);
    add_dense("vae.mu", vae_mu);
    add_dense("vae.logvar", vae_logvar);
    return out;
}

namespace {

// [style; zeros] for the encoder, [style; z] for the generator
TensorPtr encoder_init(Graph& g, const ModelParams& p, int style, int b) {
    auto y = g.repeat_rows(p.style(style), b);
    const int padw = p.dims.d_z - p.dims.d_y;
    if (padw == 0) return y;
    return g.concat_cols(y, Tensor::zeros({b, padw}));
}

TensorPtr generator_init(Graph& g, const ModelParams& p, int style, const TensorPtr& z) {
    auto y = g.repeat_rows(p.style(style), z->shape[0]);
    return g.concat_cols(y, z);
}

std::vector<int> column_ids(const SentenceBatch& batch, int t) {
    std::vector<int> ids(static_cast<size_t>(batch.batch));
    for (int i = 0; i < batch.batch; ++i) ids[static_cast<size_t>(i)] = batch.at(i, t);
    return ids;
}

}  // namespace

TensorPtr encode(Graph& g, const ModelParams& p, const SentenceBatch& batch, int style) {
    if (batch.batch <= 0) throw ContractError("encode: empty batch");
    auto h = encoder_init(g, p, style, batch.batch);
    for (int t = 0; t < batch.max_len; ++t) {
        bool any_live = false;
        std::vector<double> live(static_cast<size_t>(batch.batch)), dead(static_cast<size_t>(batch.batch));
        for (int i = 0; i < batch.batch; ++i) {
            const bool on = t < batch.lengths[static_cast<size_t>(i)];
            live[static_cast<size_t>(i)] = on ? 1.0 : 0.0;
            dead[static_cast<size_t>(i)] = on ? 0.0 : 1.0;
            any_live = any_live || on;
        }
        if (!any_live) break;   // whole batch exhausted; pads cannot change z
        auto x = p.emb.lookup(g, column_ids(batch, t));
        auto hn = p.enc.step(g, x, h);
        h = g.add(g.mask_rows(hn, live), g.mask_rows(h, dead));
    }
    return h;
}

DecodeResult decode_teacher_forced(Graph& g, const ModelParams& p, const TensorPtr& z, int style,
                                   const SentenceBatch& batch) {
    if (z->rank() != 2 || z->shape[0] != batch.batch || z->shape[1] != p.dims.d_z)
        throw DimensionError("decode_teacher_forced: z must be [batch x d_z]");
    DecodeResult res;
    auto h = generator_init(g, p, style, z);
    res.hidden.push_back(h);
    std::vector<TensorPtr> logit_steps;
    std::vector<int> input(static_cast<size_t>(batch.batch), data::kGo);
    for (int t = 0; t < batch.max_len; ++t) {
        auto x = p.emb.lookup(g, input);
        h = p.gen.step(g, x, h);
        res.hidden.push_back(h);
        logit_steps.push_back(p.proj.forward(g, h));
        if (t + 1 < batch.max_len) input = column_ids(batch, t);
    }
    res.logits = g.stack_time(logit_steps);
    return res;
}

DecodeResult decode_self_fed(Graph& g, const ModelParams& p, const TensorPtr& z, int style,
                             int unroll_len, double gamma) {
    if (unroll_len < 1) throw ParameterError("decode_self_fed: unroll_len must be positive");
    if (gamma <= 0.0) throw ParameterError("decode_self_fed: gamma must be positive");
    if (z->rank() != 2 || z->shape[1] != p.dims.d_z)
        throw DimensionError("decode_self_fed: z must be [batch x d_z]");
    DecodeResult res;
    auto h = generator_init(g, p, style, z);
    res.hidden.push_back(h);
    std::vector<TensorPtr> logit_steps;
    auto x = p.emb.lookup(g, std::vector<int>(static_cast<size_t>(z->shape[0]), data::kGo));
    for (int t = 0; t < unroll_len; ++t) {
        h = p.gen.step(g, x, h);
        res.hidden.push_back(h);
        auto v = p.proj.forward(g, h);
        logit_steps.push_back(v);
        auto soft = g.softmax_temperature(v, gamma);
        res.soft.push_back(soft);
        x = p.emb.lookup_soft(g, soft);
    }
    res.logits = g.stack_time(logit_steps);
    return res;
}

std::vector<std::vector<int>> transfer(const ModelParams& p, const SentenceBatch& batch,
                                       int src_style, int tgt_style, int max_len) {
    if (max_len < 1) throw ParameterError("transfer: max_len must be positive");
    p.style(src_style);   // validates
    p.style(tgt_style);
    if (src_style == tgt_style)
        std::fprintf(stderr, "transfer: src and tgt style are both %d (identity transfer)\n",
                     src_style);
    Graph g(false);
    auto z = encode(g, p, batch, src_style);
    auto h = generator_init(g, p, tgt_style, z);
    const int b = batch.batch;
    std::vector<std::vector<int>> out(static_cast<size_t>(b));
    std::vector<char> done(static_cast<size_t>(b), 0);
    std::vector<int> input(static_cast<size_t>(b), data::kGo);
    for (int t = 0; t < max_len; ++t) {
        auto x = p.emb.lookup(g, input);
        h = p.gen.step(g, x, h);
        auto logits = p.proj.forward(g, h);
        bool all_done = true;
        for (int i = 0; i < b; ++i) {
            if (done[static_cast<size_t>(i)]) continue;
            const double* row = logits->values.data() + static_cast<size_t>(i) * p.vocab;
            int best = 0;
            for (int j = 1; j < p.vocab; ++j)
                if (row[j] > row[best]) best = j;   // ties keep the lowest id
            if (best == data::kEos) {
                done[static_cast<size_t>(i)] = 1;
            } else {
                out[static_cast<size_t>(i)].push_back(best);
                input[static_cast<size_t>(i)] = best;
                all_done = false;
            }
        }
        if (all_done) break;
        for (int i = 0; i < b; ++i)
            if (done[static_cast<size_t>(i)]) input[static_cast<size_t>(i)] = data::kPad;
    }
    // no specials in the result
    for (auto& s : out) {
        s.erase(std::remove_if(s.begin(), s.end(),
                               [](int id) {
                                   return id == data::kPad || id == data::kGo || id == data::kEos;
                               }),
                s.end());
    }
    return out;
}

}  // namespace crossalign::model
