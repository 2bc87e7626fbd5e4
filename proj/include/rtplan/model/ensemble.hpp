#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rtplan/belief/encoder.hpp"
#include "rtplan/core/types.hpp"
#include "rtplan/net/layers.hpp"
#include "rtplan/rng.hpp"

namespace rtplan::model {

using net::Vec;

// Per-dimension mean/std over the (state, action) input coordinates,
// fitted on the offline dataset. Latent coordinates pass through.
struct Normalizer {
  Vec mean;
  Vec std;

  void fit(const Dataset& data);
  void apply(std::span<const double> s, std::span<const double> a, Vec& out) const;
  Vec normalize(std::span<const double> x) const;
  Vec denormalize(std::span<const double> x) const;
};

// Diagonal Gaussian over the concatenated (next_state_delta, reward) vector.
struct GaussianPrediction {
  Vec mean;
  Vec logvar;

  Vec next_state_mean(std::span<const double> s) const;
  double reward_mean() const { return mean.back(); }
};

struct EnsembleConfig {
  int state_dim = 0;
  int action_dim = 0;
  int latent_dim = 0;
  std::size_t members = 7;  // paper-scale 20
  std::size_t elites = 5;   // paper-scale 14
  std::vector<std::size_t> hidden = {64, 64};
  bool input_skip = true;
};

// Probabilistic ensemble decoder p(s', r | s, a, m) predicting state deltas.
class EnsembleModel {
 public:
  EnsembleModel() = default;
  EnsembleModel(EnsembleConfig cfg, std::uint64_t seed);

  const EnsembleConfig& config() const { return cfg_; }
  std::size_t member_count() const { return members_.size(); }
  net::Mlp& member(std::size_t k) { return members_[k]; }
  const net::Mlp& member(std::size_t k) const { return members_[k]; }

  const std::vector<std::size_t>& elite_indices() const { return elites_; }
  void set_elites(std::vector<std::size_t> elites);

  const Normalizer& normalizer() const { return norm_; }
  void set_normalizer(Normalizer n) { norm_ = std::move(n); }

  // Raw (delta, reward) Gaussian from any member; used by training.
  void predict_raw(std::size_t member, std::span<const double> s, std::span<const double> a,
                   std::span<const double> m, Vec& mean, Vec& logvar) const;

  // Elite-only prediction. Throws if `member` is not an elite index.
  GaussianPrediction predict(std::span<const double> s, std::span<const double> a,
                             std::span<const double> m, std::size_t member) const;

  struct Sample {
    Vec next_state;
    double reward = 0.0;
    std::size_t member = 0;
  };
  // Uniform elite member, then a draw from its Gaussian.
  Sample sample_transition(std::span<const double> s, std::span<const double> a,
                           std::span<const double> m, Rng& rng) const;

  // Deterministic mean step of one member (absolute next state).
  void member_mean_step(std::size_t member, std::span<const double> s,
                        std::span<const double> a, std::span<const double> m, Vec& next_state,
                        double& reward) const;

  void save(const std::string& path) const;
  static EnsembleModel load(const std::string& path);

 private:
  EnsembleConfig cfg_;
  std::vector<net::Mlp> members_;
  std::vector<std::size_t> elites_;
  Normalizer norm_;
};

// Draw from a diagonal Gaussian prediction (mean + exp(logvar/2) * z).
Vec sample_from_prediction(const GaussianPrediction& pred, Rng& rng);

// Indices of the k smallest losses; ties broken toward the lower index.
std::vector<std::size_t> select_elites(const std::vector<double>& val_losses, std::size_t k);

struct TrainConfig {
  int max_epochs = 60;
  int batch = 64;        // segments per member batch
  int segment_len = 4;   // H
  double val_frac = 0.1;
  int patience = 5;
  double lr = 1e-3;
  double weight_decay = 0.01;
  int batches_per_epoch = 0;  // 0: derived from train size
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> val_nll;          // best validation NLL per member
  std::vector<double> epoch_train_nll;  // mean training NLL per epoch
  std::vector<double> initial_val_nll;  // before any update
};

// MLE fine-tuning of all members on latent-conditioned segments, with the
// encoder frozen. Members train on independent trajectory bootstraps and
// early-stop individually on a shared validation split.
TrainReport train_mle(EnsembleModel& model, const Dataset& data, const belief::Encoder& encoder,
                      const TrainConfig& cfg);

}  // namespace rtplan::model
