#pragma once

#include <string>
#include <vector>

#include "rtplan/belief/vae.hpp"
#include "rtplan/core/dataset.hpp"
#include "rtplan/plan/planner.hpp"
#include "rtplan/prior/policy.hpp"

namespace rtplan::harness {

struct EnvSpec {
  double drag = 0.1;
  double wind_x = 0.0;
  double wind_y = 0.0;
  double init_half_width = 0.2;
  int horizon = 100;
  double gamma = 0.99;

  PointMass2D make() const;
  PointMass2D make_ood(double init_scale) const;
  PointMass2D make_shifted(double drag_factor, double wind_dx) const;
};

struct DataSpec {
  int episodes = 150;
  std::uint64_t seed = 1;
  std::vector<double> mode_drags;   // empty: single mode at env drag
  std::vector<double> mode_wind_x;  // optional per-mode wind, defaults to env wind
  double behavior_kp = 0.6;
  double behavior_kd = 0.8;
  double behavior_noise = 0.35;
  std::size_t subsample_transitions = 0;  // 0: keep everything
};

struct TrainSpec {
  int latent_dim = 8;
  int gru_hidden = 32;
  int state_emb = 8;
  int action_emb = 8;
  int reward_emb = 4;
  std::size_t members = 7;
  std::size_t elites = 5;
  std::vector<std::size_t> model_hidden = {64, 64};
  std::vector<std::size_t> policy_hidden = {64, 64};
  std::vector<std::size_t> value_hidden = {64, 64};
  belief::VaeConfig vae;
  model::TrainConfig finetune;
  prior::BcConfig bc;
  prior::ValueConfig value;
  std::uint64_t seed = 7;
};

struct GridSpec {
  std::vector<int> horizons = {4};
  std::vector<double> kappas = {5.0};
  std::vector<int> n_latents = {8};
  std::vector<double> noise_sigmas = {0.05};
  std::vector<double> penalties = {0.5};
  int n_candidates = 128;

  std::size_t size() const {
    return horizons.size() * kappas.size() * n_latents.size() * noise_sigmas.size() *
           penalties.size();
  }
  // Cartesian product in (H, kappa, n_latents, noise, penalty) order; index
  // order is the lexicographic tie-break order for sweeps.
  plan::PlannerConfig at(std::size_t index, double gamma) const;
};

struct ExperimentConfig {
  std::string experiment_id = "exp";
  EnvSpec env;
  DataSpec data;
  TrainSpec train;
  GridSpec grid;
  std::vector<std::string> planners = {"prior_only", "flat", "refplan"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int episodes_per_seed = 1;
  std::string outdir = "out";
  std::string eval_mode = "standard";  // standard | ood_init | dyn_shift
  double ood_scale = 3.0;
  double shift_drag_factor = 2.0;
  double shift_wind_dx = 0.3;
  std::vector<std::size_t> dataset_sizes;  // dataset-size eval mode when non-empty
  int workers = 2;
  int variance_reps = 20;
  std::vector<int> variance_n_latents = {1, 4, 8, 16};

  void validate() const;
};

struct Artifacts {
  Dataset dataset;
  prior::PriorPolicy policy;
  prior::ValueFn value;
  belief::Encoder encoder;
  model::EnsembleModel model;
};

// BC -> value -> VAE -> decoder fine-tune (with elite selection) on `data`.
Artifacts run_training(const ExperimentConfig& cfg, const Dataset& data);

// Full pipeline: dataset generation + training + checkpoints + manifest.
// The manifest lists the five stages in order with content hashes.
Artifacts cmd_pipeline(const ExperimentConfig& cfg, const std::string& run_dir);

// Loads checkpoints written by cmd_pipeline; throws naming any missing path.
Artifacts load_artifacts(const std::string& run_dir);

struct MetricsRecord {
  std::string experiment_id;
  std::string planner;
  std::uint64_t seed = 0;
  int episode = 0;
  std::size_t dataset_size = 0;  // 0: full dataset
  plan::PlannerConfig cfg;
  double episode_return = 0.0;
  double normalized = 0.0;
  double ms_per_step = 0.0;
};

std::string metrics_csv_header();
std::string to_csv_row(const MetricsRecord& r);
MetricsRecord metrics_from_csv_row(const std::string& row);
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

struct ScoreRefs {
  double random_ret = 0.0;
  double expert_ret = 0.0;
};
// Deterministic anchors: uniform-random policy vs a clean tuned controller.
ScoreRefs compute_score_refs(const Environment& env);

// Evaluates planners x grid x seeds x episodes on the configured test mode
// and writes metrics.csv into run_dir (empty run_dir: no file output).
std::vector<MetricsRecord> cmd_eval(const ExperimentConfig& cfg, const Artifacts& artifacts,
                                    const std::string& run_dir);

struct VarianceRow {
  int n_latents = 0;
  double mean_sample_variance = 0.0;
  double mean_return = 0.0;
};
// Appendix-style latent-sample study: at every step the planner output is
// recomputed `variance_reps` times with independent rng; reports the
// action-dimension-averaged variance, averaged over steps and seeds.
std::vector<VarianceRow> cmd_variance_study(const ExperimentConfig& cfg,
                                            const Artifacts& artifacts,
                                            const std::string& run_dir);

struct SweepBest {
  std::string planner;
  plan::PlannerConfig cfg;
  double mean_score = 0.0;
};
// Full grid evaluation; best mean normalized score per planner kind, ties
// broken by the smallest hyperparameter tuple.
std::vector<SweepBest> cmd_sweep(const ExperimentConfig& cfg, const Artifacts& artifacts,
                                 const std::string& run_dir);

// Non-overwrite policy: returns `outdir` if empty/new, otherwise a fresh
// run-<N> subdirectory.
std::string prepare_run_dir(const std::string& outdir);

std::uint64_t fnv1a_file(const std::string& path);

}  // namespace rtplan::harness
