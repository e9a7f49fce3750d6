#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "crossalign/training.hpp"

using namespace crossalign;
using ad::Graph;
using ad::Tensor;
using ad::TensorPtr;
using training::TrainingConfig;
using training::Variant;

namespace {

model::ModelParams tiny_model(unsigned seed = 1, int vocab = 9) {
  Rng rng(seed);
  model::Dims dims{6, 3, 4, 3};
  return model::ModelParams(dims, vocab, rng);
}

TrainingConfig tiny_config() {
  TrainingConfig cfg;
  cfg.dims = {6, 3, 4, 3};
  cfg.batch_size = 2;
  cfg.lr = 0.01;
  return cfg;
}

bool same_values(const model::ModelParams& a, const model::ModelParams& b) {
  auto an = a.named_params(), bn = b.named_params();
  if (an.size() != bn.size()) return false;
  for (size_t i = 0; i < an.size(); ++i) {
    const auto& av = an[i].second->values;
    const auto& bv = bn[i].second->values;
    if (av.size() != bv.size()) return false;
    // bitwise, not tolerance-based
    if (std::memcmp(av.data(), bv.data(), av.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  CHECK(training::variant_from_string("cross") == Variant::cross);
  CHECK(training::variant_from_string("vae") == Variant::vae);
  CHECK(training::variant_from_string("aligned") == Variant::aligned);
  CHECK(training::to_string(Variant::vae) == "vae");
  CHECK_THROWS_AS(training::variant_from_string("styletransformer"), ConfigError);
}

TEST_CASE("config validation rejects out-of-range settings") {
  TrainingConfig cfg;
  cfg.validate();
  TrainingConfig bad = cfg;
  bad.lambda = -0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.max_epochs = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.clip_norm = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("a chance-level discriminator scores two times log two") {
  // zeroed discriminator weights emit probability one half everywhere, the
  // fixed point where real and fake losses are both -log(1/2)
  auto p = tiny_model(2);
  for (auto& t : {p.dz_hidden.w, p.dz_hidden.b, p.dz_out.w, p.dz_out.b})
    for (auto& v : t->values) v = 0.0;

  Graph g;
  Rng rng(3);
  auto z1 = Tensor::uniform({4, 4}, rng, -1.0, 1.0, false);
  auto z2 = Tensor::uniform({4, 4}, rng, -1.0, 1.0, false);
  auto adv = training::loss_adv_aligned(g, p, z1, z2);
  CHECK(std::abs(adv->values[0] - 2.0 * std::log(2.0)) < 1e-6);
}

TEST_CASE("a chance-level sequence discriminator also scores two log two") {
  auto p = tiny_model(4);
  for (auto& v : p.d1.out.w->values) v = 0.0;
  for (auto& v : p.d1.out.b->values) v = 0.0;

  Graph g;
  Rng content(5), noise(6);
  const int d_h = p.dims.d_h();
  auto real = Tensor::uniform({2, 6, d_h}, content, -1.0, 1.0, false);
  auto fake = Tensor::uniform({2, 6, d_h}, content, -1.0, 1.0, false);
  auto adv = training::loss_adv_cross(g, p, 1, real, fake, {6, 6}, {6, 6}, false, noise);
  CHECK(std::abs(adv->values[0] - 2.0 * std::log(2.0)) < 1e-6);
}

TEST_CASE("kl divergence of the standard normal against itself is zero") {
  Graph g;
  auto mu = Tensor::zeros({3, 4});
  auto lv = Tensor::zeros({3, 4});
  auto kl = training::loss_kl(g, mu, lv);
  CHECK(kl->values[0] == 0.0);
}

TEST_CASE("kl divergence matches the closed form and is positive off-center") {
  Graph g;
  auto mu = Tensor::from({1, 2}, {1.0, -2.0});
  auto lv = Tensor::from({1, 2}, {0.5, -0.25});
  // 0.5 * sum(exp(lv) + mu^2 - 1 - lv) for a single-row batch
  double expect = 0.5 * ((std::exp(0.5) + 1.0 - 1.0 - 0.5) + (std::exp(-0.25) + 4.0 - 1.0 + 0.25));
  auto kl = training::loss_kl(g, mu, lv);
  CHECK(kl->values[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(kl->values[0] > 0.0);
}

TEST_CASE("uniform reconstruction loss is twice the log vocabulary size") {
  // zero projection weights produce uniform logits in both domains
  auto p = tiny_model(7);
  for (auto& v : p.proj.w->values) v = 0.0;
  for (auto& v : p.proj.b->values) v = 0.0;
  auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
  auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});
  Graph g;
  auto rec = training::loss_rec(g, p, b1, b2);
  CHECK(std::abs(rec->values[0] - 2.0 * std::log(9.0)) < 1e-6);
}

TEST_CASE("metrics line carries every field of its variant") {
  training::StepMetrics m;
  m.step = 12;
  m.variant = Variant::cross;
  m.rec = 1.5;
  m.adv1 = 0.25;
  m.adv2 = 0.75;
  m.d1_loss = 1.25;
  m.d2_loss = 1.0;
  auto line = training::format_metrics(m);
  CHECK(line.find("step=12") != std::string::npos);
  CHECK(line.find("variant=cross") != std::string::npos);
  CHECK(line.find("L_rec=1.5") != std::string::npos);
  CHECK(line.find("L_adv1=0.25") != std::string::npos);
  CHECK(line.find("d2_loss=1") != std::string::npos);

  m.variant = Variant::vae;
  m.kl = 0.125;
  auto vline = training::format_metrics(m);
  CHECK(vline.find("variant=vae") != std::string::npos);
  CHECK(vline.find("L_kl=0.125") != std::string::npos);
  CHECK(vline.find("L_adv1") == std::string::npos);
}

TEST_CASE("optimizer updates only the tensors in the stepped group") {
  auto p = tiny_model(8);
  auto before = p.clone();
  auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
  auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});

  // the generator-side loss also depends on discriminator weights, but a
  // step over the encoder-generator group must leave those weights alone
  Graph g;
  Rng rng(9);
  auto z1 = model::encode(g, p, b1, 1);
  auto z2 = model::encode(g, p, b2, 2);
  auto rec = training::loss_rec(g, p, b1, b2);
  auto adv = training::loss_adv_aligned(g, p, z1, z2);
  auto total = g.sub(rec, g.scale(adv, 0.5));
  g.backward(total);
  training::Adam opt;
  opt.step(p.enc_gen_params(), 0.01, 30.0);
  p.pin_pad();

  auto changed = [&](const TensorPtr& a, const TensorPtr& b) { return a->values != b->values; };
  CHECK(changed(p.emb.table, before.emb.table));
  CHECK(changed(p.enc.wxz, before.enc.wxz));
  CHECK(changed(p.gen.whh, before.gen.whh));
  CHECK(changed(p.y1, before.y1));
  CHECK_FALSE(changed(p.dz_hidden.w, before.dz_hidden.w));  // gradient exists, no update
  CHECK_FALSE(changed(p.dz_out.w, before.dz_out.w));
  CHECK_FALSE(changed(p.d1.out.w, before.d1.out.w));

  // and the mirror image: a discriminator step leaves the generator alone
  auto snap = p.clone();
  for (auto& t : p.latent_disc_params()) t->zero_grad();
  Graph g2;
  auto z1b = model::encode(g2, p, b1, 1);
  auto z2b = model::encode(g2, p, b2, 2);
  auto d_loss = training::loss_adv_aligned(g2, p, z1b, z2b);
  g2.backward(d_loss);
  opt.step(p.latent_disc_params(), 0.01, 30.0);
  CHECK(changed(p.dz_hidden.w, snap.dz_hidden.w));
  CHECK_FALSE(changed(p.emb.table, snap.emb.table));
  CHECK_FALSE(changed(p.gen.whh, snap.gen.whh));
}

TEST_CASE("gradient clipping rescales the group to the cap") {
  auto w = Tensor::from({2}, {1.0, 1.0}, true);
  w->ensure_grad();
  w->grad = {30.0, 40.0};  // norm 50
  training::Adam opt(0.5, 0.999, 1e-8);
  opt.step({w}, 1.0, 5.0);
  // after rescaling to norm 5, grads are {3, 4}; first Adam step moves each
  // coordinate by lr * m_hat / (sqrt(v_hat) + eps) ~= lr * sign(grad)
  CHECK(w->values[0] == doctest::Approx(1.0 - 1.0).epsilon(1e-6));
  CHECK(w->values[1] == doctest::Approx(1.0 - 1.0).epsilon(1e-6));

  // below the cap the gradient passes through unscaled: identical single
  // step from identical moments with and without slack in the cap
  auto a = Tensor::from({1}, {0.0}, true);
  auto b = Tensor::from({1}, {0.0}, true);
  a->ensure_grad();
  b->ensure_grad();
  a->grad = {2.0};
  b->grad = {2.0};
  training::Adam oa, ob;
  oa.step({a}, 0.1, 30.0);
  ob.step({b}, 0.1, 1000.0);
  CHECK(a->values == b->values);
}

TEST_CASE("adam moments serialize through stable names") {
  auto w = Tensor::from({2}, {0.5, -0.5}, true);
  w->ensure_grad();
  w->grad = {0.1, -0.2};
  training::Adam opt;
  opt.step({w}, 0.01, 30.0);
  std::vector<std::pair<std::string, TensorPtr>> named{{"w", w}};
  auto blobs = opt.serialize(named);
  REQUIRE(blobs.size() == 3);  // m, v, t
  CHECK(blobs[0].first == "adam.m.w");
  CHECK(blobs[1].first == "adam.v.w");
  CHECK(blobs[2].first == "adam.t.w");

  // a restored optimizer continues the original trajectory exactly
  auto w2 = Tensor::from({2}, w->values, true);
  training::Adam opt2;
  std::map<std::string, std::vector<double>> by_name;
  for (auto& [k, v] : blobs) by_name[k] = v;
  opt2.restore({{"w", w2}}, by_name);

  w->zero_grad();
  w->grad = {0.3, 0.1};
  w2->ensure_grad();
  w2->grad = {0.3, 0.1};
  opt.step({w}, 0.01, 30.0);
  opt2.step({w2}, 0.01, 30.0);
  CHECK(w->values == w2->values);
}

TEST_CASE("lambda zero routes the cross step through the plain path bitwise") {
  auto seed_model = tiny_model(10);
  auto pa = seed_model.clone();
  auto pb = seed_model.clone();
  auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
  auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});

  TrainingConfig cfg = tiny_config();
  cfg.lambda = 0.0;
  training::Adam oa, ob;
  Rng rng(11);
  for (int i = 0; i < 5; ++i) {
    auto ma = training::train_step_cross(pa, oa, cfg, b1, b2, rng);
    auto mb = training::train_step_plain(pb, ob, cfg, b1, b2);
    CHECK(ma.rec == mb.rec);  // bitwise equal loss
  }
  CHECK(same_values(pa, pb));

  // a positive lambda must leave this trajectory
  auto pc = seed_model.clone();
  TrainingConfig on = cfg;
  on.lambda = 1.0;
  training::Adam oc;
  Rng rng2(11);
  for (int i = 0; i < 5; ++i) training::train_step_cross(pc, oc, on, b1, b2, rng2);
  CHECK_FALSE(same_values(pa, pc));
}

TEST_CASE("each variant populates its own metric fields") {
  auto p = tiny_model(12);
  auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
  auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});
  TrainingConfig cfg = tiny_config();
  training::Adam opt;
  Rng rng(13);

  auto mc = training::train_step_cross(p, opt, cfg, b1, b2, rng);
  CHECK(mc.variant == Variant::cross);
  CHECK(mc.rec > 0.0);
  CHECK(mc.adv1 > 0.0);
  CHECK(mc.adv2 > 0.0);
  CHECK(mc.d1_loss > 0.0);
  CHECK(mc.d2_loss > 0.0);

  // moments are keyed by tensor identity, so every model needs its own Adam
  auto pv = tiny_model(12);
  training::Adam opt_v;
  auto mv = training::train_step_vae(pv, opt_v, cfg, b1, b2, rng);
  CHECK(mv.variant == Variant::vae);
  CHECK(mv.rec > 0.0);
  CHECK(mv.kl >= 0.0);

  auto pa = tiny_model(12);
  training::Adam opt_a;
  auto ma = training::train_step_aligned(pa, opt_a, cfg, b1, b2, rng);
  CHECK(ma.variant == Variant::aligned);
  CHECK(ma.rec > 0.0);
  CHECK(ma.adv > 0.0);
  CHECK(ma.d_loss > 0.0);
}

TEST_CASE("the pad embedding row survives every step type pinned to zero") {
  auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
  auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});
  TrainingConfig cfg = tiny_config();
  Rng rng(14);
  for (auto variant : {Variant::cross, Variant::vae, Variant::aligned}) {
    auto p = tiny_model(15);
    training::Adam opt;
    for (int i = 0; i < 3; ++i) {
      switch (variant) {
        case Variant::cross: training::train_step_cross(p, opt, cfg, b1, b2, rng); break;
        case Variant::vae: training::train_step_vae(p, opt, cfg, b1, b2, rng); break;
        case Variant::aligned: training::train_step_aligned(p, opt, cfg, b1, b2, rng); break;
      }
    }
    for (int c = 0; c < p.dims.d_emb; ++c) CHECK(p.emb.table->values[static_cast<size_t>(c)] == 0.0);
  }
}

TEST_CASE("reconstruction collapses on a memorizable corpus") {
  // two sentences per side, two hundred plain steps: loss must at least halve
  data::Corpus c1, c2;
  c1.sentences = {{4, 5, 6, 7}, {5, 4}};
  c1.style = 1;
  c2.sentences = {{7, 6, 5}, {6, 4}};
  c2.style = 2;

  TrainingConfig cfg = tiny_config();
  cfg.lambda = 0.0;
  cfg.lr = 0.01;
  cfg.batch_size = 2;
  cfg.max_epochs = 200;
  cfg.seed = 3;

  std::vector<double> recs;
  training::TrainHooks hooks;
  hooks.on_step = [&](const training::StepMetrics& m) { recs.push_back(m.rec); };
  training::train(Variant::cross, c1, c2, 9, cfg, hooks);
  REQUIRE(recs.size() == 200);
  CHECK(recs.back() < 0.5 * recs.front());
}

TEST_CASE("a discriminator facing identical populations stays at chance") {
  // train D1 alone on real == fake; no signal exists, so its loss cannot
  // drop below the coin-flip floor
  auto p = tiny_model(16);
  training::Adam opt;
  Rng rng(17);
  const int d_h = p.dims.d_h();
  Rng content(18);

  double tail_sum = 0.0;
  int tail_n = 0;
  for (int i = 0; i < 60; ++i) {
    auto seq = Tensor::uniform({4, 6, d_h}, content, -1.0, 1.0, false);
    Graph g;
    auto d = training::loss_adv_cross(g, p, 1, seq, seq, {6, 6, 6, 6}, {6, 6, 6, 6}, true, rng);
    g.backward(d);
    opt.step(p.seq_disc_params(1), 0.001, 30.0);
    if (i >= 40) {
      tail_sum += d->values[0];
      ++tail_n;
    }
  }
  // averaged over the tail of training, no better than coin flipping
  CHECK(tail_sum / tail_n >= 2.0 * std::log(2.0) - 0.05);

  // and pointwise: with the dropout noise off, scoring a sequence against
  // itself can never beat chance, whatever the trained weights are
  auto seq = Tensor::uniform({4, 6, d_h}, content, -1.0, 1.0, false);
  Graph g(false);
  auto d = training::loss_adv_cross(g, p, 1, seq, seq, {6, 6, 6, 6}, {6, 6, 6, 6}, false, rng);
  CHECK(d->values[0] >= 2.0 * std::log(2.0) - 1e-12);
}

TEST_CASE("vae posterior noise is actually consumed") {
  // two identical vae steps from identical states but different rng streams
  // diverge through the reparameterized sample
  auto seed_model = tiny_model(19);
  auto pa = seed_model.clone();
  auto pb = seed_model.clone();
  auto b1 = data::make_batch({{4, 5, 6}, {7, 4}});
  auto b2 = data::make_batch({{6, 6}, {5, 7, 4}});
  TrainingConfig cfg = tiny_config();
  training::Adam oa, ob;
  Rng ra(20), rb(21);
  training::train_step_vae(pa, oa, cfg, b1, b2, ra);
  training::train_step_vae(pb, ob, cfg, b1, b2, rb);
  CHECK_FALSE(same_values(pa, pb));
}

TEST_CASE("train_loop walks the epoch grid and fires hooks in order") {
  data::Corpus c1, c2;
  c1.sentences = {{4, 5}, {5, 6}, {6, 7}};
  c1.style = 1;
  c2.sentences = {{7, 6}, {6, 5}};
  c2.style = 2;

  TrainingConfig cfg = tiny_config();
  cfg.lambda = 0.0;
  cfg.batch_size = 2;
  cfg.max_epochs = 3;

  auto st = training::init_state(cfg, 9);
  std::vector<int> epochs;
  long steps_seen = 0;
  training::TrainHooks hooks;
  hooks.on_step = [&](const training::StepMetrics& m) {
    ++steps_seen;
    CHECK(m.step == steps_seen);
  };
  hooks.on_epoch = [&](int e, training::TrainState& s) {
    epochs.push_back(e);
    CHECK(s.next_epoch == e + 1);
  };
  training::train_loop(st, Variant::cross, c1, c2, cfg, hooks);
  // ceil(3 / 2) = 2 steps per epoch
  CHECK(steps_seen == 6);
  CHECK(epochs == std::vector<int>{0, 1, 2});
  CHECK(st.global_step == 6);
  CHECK(st.next_epoch == 3);
}

TEST_CASE("fixed seeds reproduce the whole training trajectory bitwise") {
  data::Corpus c1, c2;
  c1.sentences = {{4, 5, 6}, {6, 5}};
  c1.style = 1;
  c2.sentences = {{7, 4}, {5, 5, 6}};
  c2.style = 2;
  TrainingConfig cfg = tiny_config();
  cfg.max_epochs = 4;
  cfg.seed = 99;

  auto s1 = training::train(Variant::cross, c1, c2, 9, cfg);
  auto s2 = training::train(Variant::cross, c1, c2, 9, cfg);
  CHECK(same_values(s1.params, s2.params));

  cfg.seed = 100;
  auto s3 = training::train(Variant::cross, c1, c2, 9, cfg);
  CHECK_FALSE(same_values(s1.params, s3.params));
}

TEST_CASE("non-finite reconstruction raises the divergence guard") {
  data::Corpus c1, c2;
  c1.sentences = {{4, 5}};
  c1.style = 1;
  c2.sentences = {{5, 4}};
  c2.style = 2;
  TrainingConfig cfg = tiny_config();
  cfg.max_epochs = 1;

  auto st = training::init_state(cfg, 9);
  st.params.proj.w->values[0] = std::nan("");
  CHECK_THROWS_AS(training::train_loop(st, Variant::cross, c1, c2, cfg), DivergenceError);
}
