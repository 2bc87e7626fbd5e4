// Command-line driver: dataset generation, the two-stage training pipeline,
// grid evaluation, hyperparameter sweeps, and the latent-sample variance
// study. All options can come from a config file (--config) with CLI flags
// taking precedence.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "rtplan/core/dataset_io.hpp"
#include "rtplan/harness/experiments.hpp"

namespace fs = std::filesystem;
using rtplan::harness::ExperimentConfig;

namespace {

void bind_common(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--experiment-id", cfg.experiment_id, "Experiment identifier");
  cmd->add_option("--outdir", cfg.outdir, "Output directory (never overwritten)");
  cmd->add_option("--workers", cfg.workers, "Parallel evaluation workers");

  cmd->add_option("--drag", cfg.env.drag, "Environment drag coefficient");
  cmd->add_option("--wind-x", cfg.env.wind_x, "Wind x component");
  cmd->add_option("--wind-y", cfg.env.wind_y, "Wind y component");
  cmd->add_option("--init-half-width", cfg.env.init_half_width, "Initial position box half-width");
  cmd->add_option("--env-horizon", cfg.env.horizon, "Episode length");
  cmd->add_option("--gamma", cfg.env.gamma, "Discount factor");

  cmd->add_option("--episodes", cfg.data.episodes, "Dataset episodes");
  cmd->add_option("--data-seed", cfg.data.seed, "Dataset generation seed");
  cmd->add_option("--mode-drags", cfg.data.mode_drags,
                  "Latent drag modes for multi-mode data generation");
  cmd->add_option("--behavior-kp", cfg.data.behavior_kp, "Behavior controller kp");
  cmd->add_option("--behavior-kd", cfg.data.behavior_kd, "Behavior controller kd");
  cmd->add_option("--behavior-noise", cfg.data.behavior_noise, "Behavior action noise");
  cmd->add_option("--subsample", cfg.data.subsample_transitions,
                  "Subsample the dataset to this many transitions (0 keeps all)");

  cmd->add_option("--latent-dim", cfg.train.latent_dim, "Task embedding dimension");
  cmd->add_option("--gru-hidden", cfg.train.gru_hidden, "Encoder GRU hidden dimension");
  cmd->add_option("--members", cfg.train.members, "Ensemble size");
  cmd->add_option("--elites", cfg.train.elites, "Elite model count");
  cmd->add_option("--model-hidden", cfg.train.model_hidden, "Decoder hidden widths");
  cmd->add_option("--policy-hidden", cfg.train.policy_hidden, "BC policy hidden widths");
  cmd->add_option("--value-hidden", cfg.train.value_hidden, "Value net hidden widths");
  cmd->add_option("--train-seed", cfg.train.seed, "Training seed");
  cmd->add_option("--vae-epochs", cfg.train.vae.max_epochs, "VAE max epochs");
  cmd->add_option("--vae-batches", cfg.train.vae.batches_per_epoch, "VAE batches per epoch");
  cmd->add_option("--vae-batch", cfg.train.vae.batch, "VAE batch size");
  cmd->add_option("--vae-lr", cfg.train.vae.lr, "VAE learning rate");
  cmd->add_option("--kl-weight", cfg.train.vae.kl_weight, "KL weight coefficient");
  cmd->add_option("--finetune-epochs", cfg.train.finetune.max_epochs, "Fine-tune max epochs");
  cmd->add_option("--finetune-batches", cfg.train.finetune.batches_per_epoch,
                  "Fine-tune batches per epoch");
  cmd->add_option("--finetune-batch", cfg.train.finetune.batch, "Fine-tune batch size");
  cmd->add_option("--finetune-segment", cfg.train.finetune.segment_len,
                  "Fine-tune segment length");
  cmd->add_option("--bc-steps", cfg.train.bc.steps, "BC training steps");
  cmd->add_option("--value-steps", cfg.train.value.steps, "Value training steps");

  cmd->add_option("--planners", cfg.planners, "Planner kinds: prior_only, flat, refplan");
  cmd->add_option("--seeds", cfg.seeds, "Evaluation seeds");
  cmd->add_option("--episodes-per-seed", cfg.episodes_per_seed, "Episodes per seed");
  cmd->add_option("--eval-mode", cfg.eval_mode, "standard | ood_init | dyn_shift");
  cmd->add_option("--ood-scale", cfg.ood_scale, "OOD initial-state box widening factor");
  cmd->add_option("--shift-drag-factor", cfg.shift_drag_factor, "Test-time drag multiplier");
  cmd->add_option("--shift-wind-dx", cfg.shift_wind_dx, "Test-time wind x shift");
  cmd->add_option("--dataset-sizes", cfg.dataset_sizes,
                  "Retrain/evaluate at these subsampled dataset sizes");

  cmd->add_option("--H", cfg.grid.horizons, "Planning horizons");
  cmd->add_option("--kappa", cfg.grid.kappas, "Inverse temperatures");
  cmd->add_option("--nbar", cfg.grid.n_latents, "Latent sample counts");
  cmd->add_option("--noise-sigma", cfg.grid.noise_sigmas, "Prior action noise levels");
  cmd->add_option("--penalty", cfg.grid.penalties, "Return-spread penalties");
  cmd->add_option("--candidates", cfg.grid.n_candidates, "Candidate plans per step");

  cmd->add_option("--variance-reps", cfg.variance_reps, "Repetitions per step (variance study)");
  cmd->add_option("--variance-nbars", cfg.variance_n_latents,
                  "Latent sample counts for the variance study");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian offline model-based planning toolkit"};
  app.set_config("--config", "", "Config file (INI/TOML key=value with [sections])");
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string artifacts_dir;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  bind_common(gen, cfg);
  CLI::App* train = app.add_subcommand("train", "Run the full training pipeline");
  bind_common(train, cfg);
  CLI::App* eval = app.add_subcommand("eval", "Evaluate planners from checkpoints");
  bind_common(eval, cfg);
  eval->add_option("--artifacts", artifacts_dir, "Directory holding pipeline checkpoints")
      ->required();
  CLI::App* sweep = app.add_subcommand("sweep", "Grid-search planner hyperparameters");
  bind_common(sweep, cfg);
  sweep->add_option("--artifacts", artifacts_dir, "Directory holding pipeline checkpoints")
      ->required();
  CLI::App* variance =
      app.add_subcommand("variance-study", "Posterior-mean variance vs latent sample count");
  bind_common(variance, cfg);
  variance->add_option("--artifacts", artifacts_dir, "Directory holding pipeline checkpoints")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.validate();
    std::string run_dir = rtplan::harness::prepare_run_dir(cfg.outdir);
    std::printf("run dir: %s\n", run_dir.c_str());

    if (gen->parsed()) {
      rtplan::PdPolicy behavior(cfg.data.behavior_kp, cfg.data.behavior_kd,
                                cfg.data.behavior_noise);
      rtplan::Dataset data = rtplan::generate_dataset(cfg.env.make(), behavior,
                                                      cfg.data.episodes, cfg.data.seed);
      if (cfg.data.subsample_transitions > 0)
        data = rtplan::subsample(data, cfg.data.subsample_transitions, cfg.data.seed);
      rtplan::save_dataset(data, (fs::path(run_dir) / "dataset.bin").string());
      rtplan::export_dataset_csv(data, (fs::path(run_dir) / "dataset.csv").string());
      std::printf("wrote %zu transitions\n", data.transition_count());
    } else if (train->parsed()) {
      rtplan::harness::cmd_pipeline(cfg, run_dir);
      std::printf("pipeline complete; manifest at %s/manifest.json\n", run_dir.c_str());
    } else if (eval->parsed()) {
      auto artifacts = rtplan::harness::load_artifacts(artifacts_dir);
      auto records = rtplan::harness::cmd_eval(cfg, artifacts, run_dir);
      std::printf("wrote %zu metric records to %s/metrics.csv\n", records.size(),
                  run_dir.c_str());
    } else if (sweep->parsed()) {
      auto artifacts = rtplan::harness::load_artifacts(artifacts_dir);
      auto best = rtplan::harness::cmd_sweep(cfg, artifacts, run_dir);
      for (const auto& b : best)
        std::printf("%s: best mean score %.3f (H=%d kappa=%.2f nbar=%d sigma=%.3f p=%.2f)\n",
                    b.planner.c_str(), b.mean_score, b.cfg.horizon, b.cfg.kappa,
                    b.cfg.n_latents, b.cfg.noise_sigma, b.cfg.penalty);
    } else if (variance->parsed()) {
      auto artifacts = rtplan::harness::load_artifacts(artifacts_dir);
      auto rows = rtplan::harness::cmd_variance_study(cfg, artifacts, run_dir);
      for (const auto& row : rows)
        std::printf("n_bar=%d  mean_variance=%.6g  mean_return=%.3f\n", row.n_latents,
                    row.mean_sample_variance, row.mean_return);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
