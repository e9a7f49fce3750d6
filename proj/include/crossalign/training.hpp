#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crossalign/model.hpp"

namespace crossalign::training {

using ad::Graph;
using ad::TensorPtr;
using data::SentenceBatch;
using model::ModelParams;

enum class Variant { cross, vae, aligned };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct TrainingConfig {
    double lambda = 1.0;     // adversarial weight
    double gamma = 0.001;    // soft-feeding temperature
    double lr = 0.0001;
    int batch_size = 64;
    int max_epochs = 20;
    std::uint64_t seed = 0;
    double clip_norm = 30.0;
    model::Dims dims = model::Dims::desk();

    void validate() const;
};

// Adam with bias correction; beta1 = 0.5 as usual for adversarial training.
// step() first rescales the group's gradients so their global norm is at
// most clip_norm, then updates every tensor in the group. Moments are keyed
// by tensor identity; serialize()/restore() map them through stable names.
class Adam {
  public:
    explicit Adam(double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<TensorPtr>& group, double lr, double clip_norm);

    // moments for checkpointing, keyed through the given name map
    std::vector<std::pair<std::string, std::vector<double>>> serialize(
        const std::vector<std::pair<std::string, TensorPtr>>& named) const;
    void restore(const std::vector<std::pair<std::string, TensorPtr>>& named,
                 const std::map<std::string, std::vector<double>>& blobs);

  private:
    struct Moments {
        std::vector<double> m, v;
        long t = 0;
    };
    std::map<const ad::Tensor*, Moments> state_;
    double beta1_, beta2_, eps_;
};

// -- losses ---------------------------------------------------------------

// Sum of the two domains' teacher-forced reconstruction cross-entropies
// (mean over unmasked positions within each domain).
TensorPtr loss_rec(Graph& g, const ModelParams& p, const SentenceBatch& b1,
                   const SentenceBatch& b2);

// KL(N(mu, diag(exp(log_var))) || N(0, I)), mean over the batch:
//   0.5 / b * sum(exp(log_var) + mu^2 - 1 - log_var)
TensorPtr loss_kl(Graph& g, const TensorPtr& mu, const TensorPtr& log_var);

// Latent discriminator loss on the two posterior populations:
//   -mean log D(z1) - mean log(1 - D(z2)),
// probabilities clamped to [1e-7, 1 - 1e-7] before the log.
TensorPtr loss_adv_aligned(Graph& g, const ModelParams& p, const TensorPtr& z1,
                           const TensorPtr& z2);

// Sequence discriminator `which` scored on a real (teacher-forced) hidden
// sequence against a fake (self-fed, transferred) one. Inputs are stacked
// [b x T x d_h]; lengths limit pooling to each row's true extent.
TensorPtr loss_adv_cross(Graph& g, const ModelParams& p, int which, const TensorPtr& teacher_seq,
                         const TensorPtr& selffed_seq, const std::vector<int>& teacher_lengths,
                         const std::vector<int>& selffed_lengths, bool train_mode, Rng& rng);

// -- training steps ---------------------------------------------------------

struct StepMetrics {
    long step = 0;
    Variant variant = Variant::cross;
    double rec = 0;
    double kl = 0;        // vae
    double adv = 0;       // aligned: discriminator loss seen by the E/G phase
    double d_loss = 0;    // aligned: discriminator loss on its own update
    double adv1 = 0, adv2 = 0;       // cross, E/G phase
    double d1_loss = 0, d2_loss = 0; // cross, discriminator phase
};

std::string format_metrics(const StepMetrics& m);

// Reconstruction-only update of theta_E/theta_G. The lambda = 0 degeneration
// of the cross step is routed through this exact code path.
StepMetrics train_step_plain(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                             const SentenceBatch& b1, const SentenceBatch& b2);

// One step of Algorithm-style adversarial training: update theta_E/theta_G on
// L_rec - lambda * (L_adv1 + L_adv2), then each discriminator on a fresh
// forward pass. Discriminator updates never touch theta_E/theta_G and vice
// versa.
StepMetrics train_step_cross(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                             const SentenceBatch& b1, const SentenceBatch& b2, Rng& rng);

StepMetrics train_step_vae(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                           const SentenceBatch& b1, const SentenceBatch& b2, Rng& rng);

StepMetrics train_step_aligned(ModelParams& p, Adam& opt, const TrainingConfig& cfg,
                               const SentenceBatch& b1, const SentenceBatch& b2, Rng& rng);

// -- full loop ----------------------------------------------------------------

struct TrainState {
    ModelParams params;
    Adam opt;
    Rng rng;
    int next_epoch = 0;
    long global_step = 0;
};

struct TrainHooks {
    std::function<void(const StepMetrics&)> on_step;
    std::function<void(int epoch, TrainState&)> on_epoch;   // after each epoch
};

// Initialize a fresh state (parameter init consumes the seed stream first).
TrainState init_state(const TrainingConfig& cfg, int vocab_size);

// Run max_epochs over the corpora; an epoch is ceil(max(|c1|,|c2|) / batch)
// uniform-with-replacement mini-batch steps. Throws DivergenceError when the
// reconstruction loss goes non-finite.
void train_loop(TrainState& st, Variant variant, const data::Corpus& c1, const data::Corpus& c2,
                const TrainingConfig& cfg, const TrainHooks& hooks = {});

// Convenience: init + loop.
TrainState train(Variant variant, const data::Corpus& c1, const data::Corpus& c2, int vocab_size,
                 const TrainingConfig& cfg, const TrainHooks& hooks = {});

}  // namespace crossalign::training
