#pragma once

#include "rtplan/belief/encoder.hpp"
#include "rtplan/model/ensemble.hpp"

namespace rtplan::belief {

// Single-sample ELBO at (trajectory, t): reconstruction of the observed
// prefix h = 0..t under one reparameterized latent draw, minus kl_weight *
// KL(q_t || prior), where the prior is standard normal at t = 0 and the
// previous-step posterior afterwards. The decoder member defaults to 0.
double elbo(const Encoder& encoder, const model::EnsembleModel& decoder, const Trajectory& traj,
            std::size_t t, double kl_weight, Rng& rng, std::size_t member = 0);

struct VaeConfig {
  int max_epochs = 30;
  int batches_per_epoch = 30;
  int batch = 12;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double kl_weight = 0.1;
  double val_frac = 0.1;
  int patience = 5;
  std::uint64_t seed = 0;
};

struct VaeReport {
  std::vector<double> val_elbo_curve;  // per-epoch validation ELBO
  double best_val_elbo = 0.0;
};

// Stage 1: joint encoder/decoder training on sampled (trajectory, t) pairs,
// maximizing the mean ELBO with AdamW; keeps the best-validation snapshot.
VaeReport train_vae(Encoder& encoder, model::EnsembleModel& decoder, const Dataset& data,
                    const VaeConfig& cfg);

// Stage 2: freezes the encoder and fine-tunes the decoder via MLE.
model::TrainReport freeze_then_finetune(const Encoder& encoder, model::EnsembleModel& decoder,
                                        const Dataset& data, const model::TrainConfig& cfg);

}  // namespace rtplan::belief
