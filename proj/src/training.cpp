#include "crossalign/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "crossalign/errors.hpp"

namespace crossalign::training {

using ad::Tensor;

Variant variant_from_string(const std::string& s) {
    if (s == "cross") return Variant::cross;
    if (s == "vae") return Variant::vae;
    if (s == "aligned") return Variant::aligned;
    throw ConfigError("unknown variant: " + s + " (expected cross, vae or aligned)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::cross: return "cross";
        case Variant::vae: return "vae";
        case Variant::aligned: return "aligned";
    }
    return "?";
}

void TrainingConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (gamma <= 0.0) throw ConfigError("gamma must be > 0");
    if (lr <= 0.0) throw ConfigError("lr must be > 0");
    if (batch_size < 1) throw ConfigError("batch-size must be >= 1");
    if (max_epochs < 0) throw ConfigError("max-epochs must be >= 0");
    if (clip_norm <= 0.0) throw ConfigError("clip norm must be > 0");
    dims.validate();
}

void Adam::step(const std::vector<TensorPtr>& group, double lr, double clip_norm) {
    double sq = 0.0;
    for (const auto& t : group) {
        if (!t->requires_grad) throw ContractError("Adam::step: tensor without grad in group");
        t->ensure_grad();
        for (double gv : t->grad) sq += gv * gv;
    }
    const double norm = std::sqrt(sq);
    const double rescale = norm > clip_norm ? clip_norm / norm : 1.0;
    for (const auto& t : group) {
        auto& st = state_[t.get()];
        if (st.m.empty()) {
            st.m.assign(t->values.size(), 0.0);
            st.v.assign(t->values.size(), 0.0);
        }
        st.t += 1;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
        for (size_t i = 0; i < t->values.size(); ++i) {
            const double gv = t->grad[i] * rescale;
            st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * gv;
            st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * gv * gv;
            const double mh = st.m[i] / bc1;
            const double vh = st.v[i] / bc2;
            t->values[i] -= lr * mh / (std::sqrt(vh) + eps_);
        }
    }
}

std::vector<std::pair<std::string, std::vector<double>>> Adam::serialize(
    const std::vector<std::pair<std::string, TensorPtr>>& named) const {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (const auto& [name, t] : named) {
        auto it = state_.find(t.get());
        if (it == state_.end()) continue;
        out.emplace_back("adam.m." + name, it->second.m);
        out.emplace_back("adam.v." + name, it->second.v);
        out.emplace_back("adam.t." + name,
                         std::vector<double>{static_cast<double>(it->second.t)});
    }
    return out;
}

void Adam::restore(const std::vector<std::pair<std::string, TensorPtr>>& named,
                   const std::map<std::string, std::vector<double>>& blobs) {
    for (const auto& [name, t] : named) {
        auto m = blobs.find("adam.m." + name);
        auto v = blobs.find("adam.v." + name);
        auto tc = blobs.find("adam.t." + name);
        if (m == blobs.end() || v == blobs.end() || tc == blobs.end()) continue;
        Moments st;
        st.m = m->second;
        st.v = v->second;
        st.t = static_cast<long>(tc->second.at(0));
        if (st.m.size() != t->values.size() || st.v.size() != t->values.size())
            throw IoError("Adam::restore: moment size mismatch for " + name);
        state_[t.get()] = std::move(st);
    }
}

namespace {

// targets + mask for teacher-forced decoding over a padded batch
void targets_and_mask(const SentenceBatch& b, std::vector<int>& targets,
                      std::vector<char>& mask) {
    targets.resize(static_cast<size_t>(b.batch) * b.max_len);
    mask.resize(targets.size());
    for (int i = 0; i < b.batch; ++i)
        for (int t = 0; t < b.max_len; ++t) {
            targets[static_cast<size_t>(i) * b.max_len + t] = b.at(i, t);
            mask[static_cast<size_t>(i) * b.max_len + t] =
                t < b.lengths[static_cast<size_t>(i)] ? 1 : 0;
        }
}

struct RecResult {
    TensorPtr loss;
    TensorPtr z1, z2;
    model::DecodeResult dec1, dec2;
};

TensorPtr rec_term(Graph& g, const ModelParams& p, const SentenceBatch& b,
                   const model::DecodeResult& dec) {
    std::vector<int> targets;
    std::vector<char> mask;
    targets_and_mask(b, targets, mask);
    auto flat = g.reshape(dec.logits, {b.batch * b.max_len, p.vocab});
    return g.cross_entropy_logits(flat, targets, mask);
}

RecResult reconstruction(Graph& g, const ModelParams& p, const SentenceBatch& b1,
                         const SentenceBatch& b2) {
    RecResult r;
    r.z1 = model::encode(g, p, b1, 1);
    r.z2 = model::encode(g, p, b2, 2);
    r.dec1 = model::decode_teacher_forced(g, p, r.z1, 1, b1);
    r.dec2 = model::decode_teacher_forced(g, p, r.z2, 2, b2);
    r.loss = g.add(rec_term(g, p, b1, r.dec1), rec_term(g, p, b2, r.dec2));
    return r;
}

std::vector<int> plus_one(const std::vector<int>& lengths) {
    std::vector<int> out = lengths;
    for (auto& v : out) ++v;
    return out;
}

void zero_grads(const ModelParams& p) {
    for (const auto& t : p.all_params()) t->zero_grad();
}

void check_finite_loss(double v, const char* what) {
    if (!std::isfinite(v))
        throw DivergenceError(std::string(what) + " became non-finite; aborting");
}

}  // namespace

TensorPtr loss_rec(Graph& g, const ModelParams& p, const SentenceBatch& b1,
                   const SentenceBatch& b2) {
    return reconstruction(g, p, b1, b2).loss;
}

TensorPtr loss_kl(Graph& g, const TensorPtr& mu, const TensorPtr& log_var) {
    if (mu->shape != log_var->shape || mu->rank() != 2)
        throw DimensionError("loss_kl: mu and log_var must be matching rank-2 tensors");
    const int b = mu->shape[0];
    auto term = g.sub(g.add_const(g.add(g.exp(log_var), g.mul(mu, mu)), -1.0), log_var);
    return g.scale(g.sum(term), 0.5 / b);
}

namespace {

TensorPtr bernoulli_real_fake(Graph& g, const TensorPtr& p_real, const TensorPtr& p_fake) {
    auto lr = g.log(g.clamp(p_real, 1e-7, 1.0 - 1e-7));
    auto lf = g.log(g.clamp(g.rsub_const(1.0, p_fake), 1e-7, 1.0 - 1e-7));
    return g.sub(g.scale(g.mean(lr), -1.0), g.mean(lf));
}

}  // namespace

TensorPtr loss_adv_aligned(Graph& g, const ModelParams& p, const TensorPtr& z1,
                           const TensorPtr& z2) {
    auto score = [&](const TensorPtr& z) {
        return g.sigmoid(p.dz_out.forward(g, p.dz_hidden.forward(g, z)));
    };
    return bernoulli_real_fake(g, score(z1), score(z2));
}

TensorPtr loss_adv_cross(Graph& g, const ModelParams& p, int which, const TensorPtr& teacher_seq,
                         const TensorPtr& selffed_seq, const std::vector<int>& teacher_lengths,
                         const std::vector<int>& selffed_lengths, bool train_mode, Rng& rng) {
    const nn::TextCnn& d = which == 1 ? p.d1 : p.d2;
    if (which != 1 && which != 2) throw ParameterError("loss_adv_cross: which must be 1 or 2");
    auto p_real = g.sigmoid(d.forward(g, teacher_seq, train_mode, rng, teacher_lengths));
    auto p_fake = g.sigmoid(d.forward(g, selffed_seq, train_mode, rng, selffed_lengths));
    return bernoulli_real_fake(g, p_real, p_fake);
}

std::string format_metrics(const StepMetrics& m) {
    char buf[320];
    switch (m.variant) {
        case Variant::cross:
            std::snprintf(buf, sizeof buf,
                          "step=%ld variant=cross L_rec=%.6f L_adv1=%.6f L_adv2=%.6f "
                          "d1_loss=%.6f d2_loss=%.6f",
                          m.step, m.rec, m.adv1, m.adv2, m.d1_loss, m.d2_loss);
            break;
        case Variant::vae:
            std::snprintf(buf, sizeof buf, "step=%ld variant=vae L_rec=%.6f L_kl=%.6f", m.step,
                          m.rec, m.kl);
            break;
        case Variant::aligned:
            std::snprintf(buf, sizeof buf,
                          "step=%ld variant=aligned L_rec=%.6f L_adv=%.6f d_loss=%.6f", m.step,
                          m.rec, m.adv, m.d_loss);
            break;
    }
    return buf;
}

namespace {

// The sequence discriminators refuse inputs shorter than their widest filter,
// so a batch of very short sentences gets its hidden stack extended with
// constant zero rows; pooling windows stay limited by the true lengths.
TensorPtr stack_for_disc(Graph& g, const ModelParams& p, std::vector<TensorPtr> hidden,
                         int batch) {
    const int wmax = std::max(*std::max_element(p.d1.widths.begin(), p.d1.widths.end()),
                              *std::max_element(p.d2.widths.begin(), p.d2.widths.end()));
    while (static_cast<int>(hidden.size()) < wmax)
        hidden.push_back(ad::Tensor::zeros({batch, p.dims.d_h()}));
    return g.stack_time(hidden);
}

}  // namespace

StepMetrics train_step_plain(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                             const SentenceBatch& b1, const SentenceBatch& b2) {
    StepMetrics m;
    m.variant = Variant::cross;
    zero_grads(p);
    Graph g;
    auto rec = loss_rec(g, p, b1, b2);
    m.rec = rec->values[0];
    check_finite_loss(m.rec, "L_rec");
    g.backward(rec);
    opt.step(p.enc_gen_params(), cfg.lr, cfg.clip_norm);
    p.pin_pad();
    return m;
}

StepMetrics train_step_cross(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                             const SentenceBatch& b1, const SentenceBatch& b2, Rng& rng) {
    // lambda = 0 removes every adversarial term from the objective, so the
    // update degenerates to the plain reconstruction step, bit for bit.
    if (cfg.lambda == 0.0) return train_step_plain(p, opt, cfg, b1, b2);

    StepMetrics m;
    m.variant = Variant::cross;

    // phase 1: theta_E, theta_G on L_rec - lambda (L_adv1 + L_adv2)
    zero_grads(p);
    Graph g;
    auto rr = reconstruction(g, p, b1, b2);
    m.rec = rr.loss->values[0];
    check_finite_loss(m.rec, "L_rec");

    auto real1 = stack_for_disc(g, p, rr.dec1.hidden, b1.batch);
    auto real2 = stack_for_disc(g, p, rr.dec2.hidden, b2.batch);
    auto fake21 = decode_self_fed(g, p, rr.z2, 1, b2.max_len, cfg.gamma);   // x2 in style 1
    auto fake12 = decode_self_fed(g, p, rr.z1, 2, b1.max_len, cfg.gamma);   // x1 in style 2
    auto fake21_seq = stack_for_disc(g, p, fake21.hidden, b2.batch);
    auto fake12_seq = stack_for_disc(g, p, fake12.hidden, b1.batch);
    auto adv1 = loss_adv_cross(g, p, 1, real1, fake21_seq, plus_one(b1.lengths),
                               plus_one(b2.lengths), true, rng);
    auto adv2 = loss_adv_cross(g, p, 2, real2, fake12_seq, plus_one(b2.lengths),
                               plus_one(b1.lengths), true, rng);
    m.adv1 = adv1->values[0];
    m.adv2 = adv2->values[0];
    auto total = g.add(rr.loss, g.scale(g.add(adv1, adv2), -cfg.lambda));
    g.backward(total);
    opt.step(p.enc_gen_params(), cfg.lr, cfg.clip_norm);
    p.pin_pad();

    // phase 2: each discriminator on a fresh forward pass of the updated
    // encoder/generator; those activations are computed without a tape, so
    // the update cannot reach theta_E/theta_G.
    Graph fwd(false);
    auto z1 = model::encode(fwd, p, b1, 1);
    auto z2 = model::encode(fwd, p, b2, 2);
    auto t1 = model::decode_teacher_forced(fwd, p, z1, 1, b1);
    auto t2 = model::decode_teacher_forced(fwd, p, z2, 2, b2);
    auto f21 = model::decode_self_fed(fwd, p, z2, 1, b2.max_len, cfg.gamma);
    auto f12 = model::decode_self_fed(fwd, p, z1, 2, b1.max_len, cfg.gamma);
    auto real1d = stack_for_disc(fwd, p, t1.hidden, b1.batch);
    auto real2d = stack_for_disc(fwd, p, t2.hidden, b2.batch);
    auto fake21d = stack_for_disc(fwd, p, f21.hidden, b2.batch);
    auto fake12d = stack_for_disc(fwd, p, f12.hidden, b1.batch);

    {
        zero_grads(p);
        Graph gd;
        auto d1 = loss_adv_cross(gd, p, 1, real1d, fake21d, plus_one(b1.lengths),
                                 plus_one(b2.lengths), true, rng);
        m.d1_loss = d1->values[0];
        gd.backward(d1);
        opt.step(p.seq_disc_params(1), cfg.lr, cfg.clip_norm);
    }
    {
        zero_grads(p);
        Graph gd;
        auto d2 = loss_adv_cross(gd, p, 2, real2d, fake12d, plus_one(b2.lengths),
                                 plus_one(b1.lengths), true, rng);
        m.d2_loss = d2->values[0];
        gd.backward(d2);
        opt.step(p.seq_disc_params(2), cfg.lr, cfg.clip_norm);
    }
    return m;
}

StepMetrics train_step_vae(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                           const SentenceBatch& b1, const SentenceBatch& b2, Rng& rng) {
    StepMetrics m;
    m.variant = Variant::vae;
    zero_grads(p);
    Graph g;

    auto side = [&](const SentenceBatch& b, int style, TensorPtr& kl) {
        auto e = model::encode(g, p, b, style);
        auto mu = p.vae_mu.forward(g, e);
        auto lv = p.vae_logvar.forward(g, e);
        auto eps = Tensor::zeros({b.batch, p.dims.d_z});
        for (auto& v : eps->values) v = rng.normal();
        auto z = g.add(mu, g.mul(g.exp(g.scale(lv, 0.5)), eps));
        auto dec = model::decode_teacher_forced(g, p, z, style, b);
        kl = loss_kl(g, mu, lv);
        return rec_term(g, p, b, dec);
    };

    TensorPtr kl1, kl2;
    auto ce1 = side(b1, 1, kl1);
    auto ce2 = side(b2, 2, kl2);
    auto rec = g.add(ce1, ce2);
    auto kl = g.add(kl1, kl2);
    m.rec = rec->values[0];
    m.kl = kl->values[0];
    check_finite_loss(m.rec, "L_rec");
    auto total = g.add(rec, kl);
    g.backward(total);
    opt.step(p.enc_gen_params(), cfg.lr, cfg.clip_norm);
    p.pin_pad();
    return m;
}

StepMetrics train_step_aligned(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                               const SentenceBatch& b1, const SentenceBatch& b2, Rng& rng) {
    (void)rng;
    StepMetrics m;
    m.variant = Variant::aligned;

    zero_grads(p);
    Graph g;
    auto rr = reconstruction(g, p, b1, b2);
    m.rec = rr.loss->values[0];
    check_finite_loss(m.rec, "L_rec");
    auto adv = loss_adv_aligned(g, p, rr.z1, rr.z2);
    m.adv = adv->values[0];
    auto total = g.add(rr.loss, g.scale(adv, -cfg.lambda));
    g.backward(total);
    opt.step(p.enc_gen_params(), cfg.lr, cfg.clip_norm);
    p.pin_pad();

    Graph fwd(false);
    auto z1 = model::encode(fwd, p, b1, 1);
    auto z2 = model::encode(fwd, p, b2, 2);
    {
        zero_grads(p);
        Graph gd;
        auto d = loss_adv_aligned(gd, p, z1, z2);
        m.d_loss = d->values[0];
        gd.backward(d);
        opt.step(p.latent_disc_params(), cfg.lr, cfg.clip_norm);
    }
    return m;
}

TrainState init_state(const TrainingConfig& cfg, int vocab_size) {
    cfg.validate();
    TrainState st;
    st.rng = Rng(cfg.seed);
    st.params = ModelParams(cfg.dims, vocab_size, st.rng);
    return st;
}

void train_loop(TrainState& st, Variant variant, const data::Corpus& c1, const data::Corpus& c2,
                const TrainingConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (c1.sentences.empty() || c2.sentences.empty())
        throw ContractError("train_loop: both corpora must be non-empty");
    const long n = static_cast<long>(std::max(c1.sentences.size(), c2.sentences.size()));
    const long steps_per_epoch = std::max<long>(1, (n + cfg.batch_size - 1) / cfg.batch_size);
    for (int epoch = st.next_epoch; epoch < cfg.max_epochs; ++epoch) {
        for (long s = 0; s < steps_per_epoch; ++s) {
            auto b1 = data::sample_batch(c1, cfg.batch_size, st.rng);
            auto b2 = data::sample_batch(c2, cfg.batch_size, st.rng);
            StepMetrics m;
            switch (variant) {
                case Variant::cross: m = train_step_cross(st.params, st.opt, cfg, b1, b2, st.rng); break;
                case Variant::vae: m = train_step_vae(st.params, st.opt, cfg, b1, b2, st.rng); break;
                case Variant::aligned:
                    m = train_step_aligned(st.params, st.opt, cfg, b1, b2, st.rng);
                    break;
            }
            m.step = ++st.global_step;
            if (hooks.on_step) hooks.on_step(m);
        }
        st.next_epoch = epoch + 1;
        if (hooks.on_epoch) hooks.on_epoch(epoch, st);
    }
}

TrainState train(Variant variant, const data::Corpus& c1, const data::Corpus& c2, int vocab_size,
                 const TrainingConfig& cfg, const TrainHooks& hooks) {
    TrainState st = init_state(cfg, vocab_size);
    train_loop(st, variant, c1, c2, cfg, hooks);
    return st;
}

}  // namespace crossalign::training
