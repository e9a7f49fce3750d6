#include "crossalign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crossalign/autodiff.hpp"
#include "crossalign/data.hpp"
#include "crossalign/model.hpp"
#include "crossalign/nn.hpp"
#include "crossalign/training.hpp"

namespace crossalign::diag {

using ad::Graph;
using ad::Tensor;
using ad::TensorPtr;

namespace {

// Uniform in [-1, 1] but kept `margin` away from 0, so relu/max kinks cannot
// sit within a finite-difference step of the evaluation point.
TensorPtr nudged_uniform(std::vector<int> shape, Rng& rng, double margin = 0.02) {
    auto t = Tensor::uniform(std::move(shape), rng, -1.0, 1.0, true);
    for (auto& v : t->values)
        if (std::fabs(v) < margin) v += (v >= 0.0 ? margin : -margin);
    return t;
}

// Distinct values with gaps >= 0.05: argmax positions are stable under the
// +-h probes of the finite-difference check.
TensorPtr spaced_values(std::vector<int> shape, Rng& rng) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    std::vector<int> slots(n);
    for (size_t i = 0; i < n; ++i) slots[i] = static_cast<int>(i);
    rng.shuffle(slots);
    std::vector<double> vals(n);
    for (size_t i = 0; i < n; ++i) vals[i] = -1.0 + 0.05 * slots[i];
    return Tensor::from(std::move(shape), std::move(vals), true);
}

struct Suite {
    std::vector<GradCheckCase> cases;

    void check(const std::string& name, const std::function<TensorPtr(Graph&)>& f,
               const TensorPtr& wrt) {
        cases.push_back({name, ad::grad_check(f, wrt)});
    }
};

}  // namespace

std::vector<GradCheckCase> grad_check_suite(std::uint64_t seed) {
    Rng rng(seed);
    Suite s;

    // --- elementwise and reduction ops ---
    auto a = Tensor::uniform({3, 4}, rng, -1.0, 1.0, true);
    auto b = Tensor::uniform({4, 2}, rng, -1.0, 1.0, true);
    s.check("matmul.lhs", [&](Graph& g) { return g.sum(g.matmul(a, b)); }, a);
    s.check("matmul.rhs", [&](Graph& g) { return g.sum(g.matmul(a, b)); }, b);

    auto c = Tensor::uniform({3, 4}, rng, -1.0, 1.0, true);
    auto v = Tensor::uniform({4}, rng, -1.0, 1.0, true);
    s.check("add", [&](Graph& g) { return g.sum(g.mul(g.add(a, c), c)); }, a);
    s.check("add.broadcast.vec", [&](Graph& g) { return g.sum(g.mul(g.add(a, v), a)); }, v);
    s.check("add.broadcast.mat", [&](Graph& g) { return g.sum(g.mul(g.add(v, a), a)); }, a);
    s.check("sub", [&](Graph& g) { return g.sum(g.mul(g.sub(a, c), a)); }, c);
    s.check("mul", [&](Graph& g) { return g.sum(g.mul(a, c)); }, a);
    s.check("mul.broadcast.vec", [&](Graph& g) { return g.sum(g.mul(a, v)); }, v);

    s.check("tanh", [&](Graph& g) { return g.sum(g.tanh(a)); }, a);
    s.check("sigmoid", [&](Graph& g) { return g.sum(g.sigmoid(a)); }, a);
    s.check("exp", [&](Graph& g) { return g.sum(g.exp(a)); }, a);

    auto pos = Tensor::uniform({3, 4}, rng, 0.5, 2.0, true);
    s.check("log", [&](Graph& g) { return g.sum(g.log(pos)); }, pos);

    auto nk = nudged_uniform({3, 4}, rng);
    s.check("relu", [&](Graph& g) { return g.sum(g.relu(nk)); }, nk);
    // clamp bounds sit on the 0-kink exclusion band, so no input is within a
    // probe step of a clamp boundary either
    s.check("clamp", [&](Graph& g) { return g.sum(g.mul(g.clamp(nk, -0.9, 0.9), nk)); }, nk);

    s.check("scale", [&](Graph& g) { return g.sum(g.scale(a, -2.5)); }, a);
    s.check("add_const", [&](Graph& g) { return g.sum(g.mul(g.add_const(a, 1.5), a)); }, a);
    s.check("rsub_const", [&](Graph& g) { return g.sum(g.mul(g.rsub_const(1.0, a), a)); }, a);
    s.check("sum", [&](Graph& g) { return g.mul(g.sum(a), g.sum(c)); }, a);
    s.check("mean", [&](Graph& g) { return g.mul(g.mean(a), g.mean(a)); }, a);

    s.check("softmax_temperature",
            [&](Graph& g) { return g.sum(g.mul(g.softmax_temperature(a, 0.5), c)); }, a);

    const std::vector<int> targets{1, 3, 0};
    const std::vector<char> ce_mask{1, 1, 0};
    s.check("cross_entropy_logits",
            [&](Graph& g) { return g.cross_entropy_logits(a, targets, ce_mask); }, a);

    // --- structure ops ---
    s.check("reshape", [&](Graph& g) { return g.sum(g.mul(g.reshape(a, {2, 6}), g.reshape(c, {2, 6}))); }, a);
    s.check("concat_cols", [&](Graph& g) { return g.sum(g.mul(g.concat_cols(a, c), g.concat_cols(c, a))); }, a);
    s.check("repeat_rows", [&](Graph& g) { return g.sum(g.mul(g.repeat_rows(v, 3), a)); }, v);
    const std::vector<double> row_scale{1.0, 0.0, 0.5};
    s.check("mask_rows", [&](Graph& g) { return g.sum(g.mul(g.mask_rows(a, row_scale), a)); }, a);
    s.check("stack_time", [&](Graph& g) { return g.sum(g.mul(g.stack_time({a, c}), g.stack_time({c, a}))); }, a);

    auto table = Tensor::uniform({5, 3}, rng, -1.0, 1.0, true);
    const std::vector<int> ids{1, 4, 1, 2};   // repeated id exercises grad accumulation
    s.check("embed_rows", [&](Graph& g) {
        auto e = g.embed_rows(table, ids);
        return g.sum(g.mul(e, e));
    }, table);

    // --- convolution path ---
    auto seq = Tensor::uniform({2, 5, 3}, rng, -1.0, 1.0, true);
    auto w = Tensor::uniform({2, 3, 4}, rng, -1.0, 1.0, true);
    auto wb = Tensor::uniform({4}, rng, -1.0, 1.0, true);
    auto conv_loss = [&](Graph& g) {
        auto y = g.conv1d_time(seq, w, wb);
        return g.sum(g.mul(y, y));
    };
    s.check("conv1d_time.seq", conv_loss, seq);
    s.check("conv1d_time.w", conv_loss, w);
    s.check("conv1d_time.bias", conv_loss, wb);

    auto mx = spaced_values({2, 6, 3}, rng);
    const std::vector<int> valid{4, 6};
    s.check("max_over_time", [&](Graph& g) {
        auto y = g.max_over_time(mx, valid);
        return g.sum(g.mul(y, y));
    }, mx);

    s.check("dropout", [&](Graph& g) {
        Rng mask_rng(seed + 99);   // fixed stream: same mask on every probe
        return g.sum(g.mul(g.dropout(a, 0.5, mask_rng, true), c));
    }, a);

    // --- layer composites ---
    nn::GruCell gru(3, 4, rng);
    auto gx = Tensor::uniform({2, 3}, rng, -1.0, 1.0, true);
    auto gh = Tensor::uniform({2, 4}, rng, -1.0, 1.0, true);
    auto gru_loss = [&](Graph& g) {
        auto h1 = gru.step(g, gx, gh);
        auto h2 = gru.step(g, gx, h1);
        return g.sum(g.mul(h2, h2));
    };
    s.check("gru.x", gru_loss, gx);
    s.check("gru.h", gru_loss, gh);
    s.check("gru.wxh", gru_loss, gru.wxh);
    s.check("gru.whz", gru_loss, gru.whz);
    s.check("gru.br", gru_loss, gru.br);

    nn::Dense dense(4, 3, nn::Activation::tanh, rng);
    auto dense_loss = [&](Graph& g) {
        auto y = dense.forward(g, gh);
        return g.sum(g.mul(y, y));
    };
    s.check("dense.w", dense_loss, dense.w);
    s.check("dense.b", dense_loss, dense.b);

    nn::Embedding emb(5, 3, 0, rng);
    auto dist_logits = Tensor::uniform({2, 5}, rng, -1.0, 1.0, true);
    s.check("embedding.lookup_soft", [&](Graph& g) {
        auto soft = g.softmax_temperature(dist_logits, 1.0);
        auto e = emb.lookup_soft(g, soft);
        return g.sum(g.mul(e, e));
    }, dist_logits);

    nn::TextCnn cnn(3, rng, {2, 3}, 2, 0.5);
    auto cseq = Tensor::uniform({2, 5, 3}, rng, -1.0, 1.0, true);
    const std::vector<int> clens{3, 5};
    s.check("textcnn", [&](Graph& g) {
        Rng drop_rng(seed + 7);
        auto y = cnn.forward(g, cseq, true, drop_rng, clens);
        return g.sum(g.mul(y, y));
    }, cnn.filters.at(2));

    // --- composite losses on a tiny model ---
    model::Dims dims{5, 3, 4, 3};
    model::ModelParams p(dims, 8, rng);
    const auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
    const auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});

    auto rec_loss = [&](Graph& g) { return training::loss_rec(g, p, b1, b2); };
    s.check("loss_rec.emb", rec_loss, p.emb.table);
    s.check("loss_rec.enc.wxh", rec_loss, p.enc.wxh);
    s.check("loss_rec.gen.whh", rec_loss, p.gen.whh);
    s.check("loss_rec.proj.w", rec_loss, p.proj.w);
    s.check("loss_rec.y1", rec_loss, p.y1);

    auto mu = Tensor::uniform({2, 4}, rng, -1.0, 1.0, true);
    auto logvar = Tensor::uniform({2, 4}, rng, -1.0, 1.0, true);
    auto kl_loss = [&](Graph& g) { return training::loss_kl(g, mu, logvar); };
    s.check("loss_kl.mu", kl_loss, mu);
    s.check("loss_kl.logvar", kl_loss, logvar);

    auto z1 = Tensor::uniform({2, 4}, rng, -1.0, 1.0, true);
    auto z2 = Tensor::uniform({3, 4}, rng, -1.0, 1.0, true);
    auto aligned_loss = [&](Graph& g) { return training::loss_adv_aligned(g, p, z1, z2); };
    s.check("loss_adv_aligned.z1", aligned_loss, z1);
    s.check("loss_adv_aligned.z2", aligned_loss, z2);
    s.check("loss_adv_aligned.d.w", aligned_loss, p.dz_hidden.w);

    // sequence discriminator fed through the full encode/teacher/self-fed path
    auto cross_path = [&](Graph& g) {
        auto zz1 = model::encode(g, p, b1, 1);
        auto zz2 = model::encode(g, p, b2, 2);
        auto dec1 = model::decode_teacher_forced(g, p, zz1, 1, b1);
        auto fake2 = model::decode_self_fed(g, p, zz2, 1, b1.max_len + 1, 0.5);
        std::vector<int> real_len(b1.lengths.begin(), b1.lengths.end());
        for (auto& l : real_len) ++l;   // h0 prepended
        std::vector<int> fake_len(static_cast<size_t>(b2.batch), b1.max_len + 2);
        Rng drop_rng(seed + 13);
        return training::loss_adv_cross(g, p, 1, g.stack_time(dec1.hidden),
                                        g.stack_time(fake2.hidden), real_len, fake_len, true,
                                        drop_rng);
    };
    s.check("loss_adv_cross.d1.filt", cross_path, p.d1.filters.at(3));
    s.check("loss_adv_cross.gen.wxh", cross_path, p.gen.wxh);
    s.check("loss_adv_cross.emb", cross_path, p.emb.table);

    auto vae_loss = [&](Graph& g) {
        auto z = model::encode(g, p, b1, 1);
        auto zmu = p.vae_mu.forward(g, z);
        auto zlv = p.vae_logvar.forward(g, z);
        Rng eps_rng(seed + 21);
        auto eps = Tensor::zeros(zmu->shape);
        for (auto& e : eps->values) e = eps_rng.normal();
        auto zs = g.add(zmu, g.mul(g.exp(g.scale(zlv, 0.5)), eps));
        auto dec = model::decode_teacher_forced(g, p, zs, 1, b1);
        std::vector<int> tgt;
        std::vector<char> msk;
        for (int r = 0; r < b1.batch; ++r)
            for (int t = 0; t < b1.max_len; ++t) {
                tgt.push_back(b1.at(r, t));
                msk.push_back(t < b1.lengths[static_cast<size_t>(r)] ? 1 : 0);
            }
        auto flat = g.reshape(dec.logits, {b1.batch * b1.max_len, p.vocab});
        return g.add(g.cross_entropy_logits(flat, tgt, msk), training::loss_kl(g, zmu, zlv));
    };
    s.check("loss_vae.enc.whh", vae_loss, p.enc.whh);
    s.check("loss_vae.mu.w", vae_loss, p.vae_mu.w);
    s.check("loss_vae.logvar.w", vae_loss, p.vae_logvar.w);

    return s.cases;
}

std::vector<GradCheckCase> grad_check_sweep(int n_seeds, std::uint64_t base_seed) {
    std::vector<GradCheckCase> worst;
    for (int i = 0; i < n_seeds; ++i) {
        auto cases = grad_check_suite(base_seed + static_cast<std::uint64_t>(i));
        if (worst.empty()) {
            worst = std::move(cases);
            continue;
        }
        for (size_t j = 0; j < cases.size(); ++j)
            worst[j].max_rel_err = std::max(worst[j].max_rel_err, cases[j].max_rel_err);
    }
    return worst;
}

}  // namespace crossalign::diag
