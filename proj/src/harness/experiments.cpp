#include "rtplan/harness/experiments.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "rtplan/core/dataset_io.hpp"
#include "rtplan/stats.hpp"

namespace rtplan::harness {

namespace fs = std::filesystem;
using nlohmann::json;

PointMass2D EnvSpec::make() const {
  PointMass2D::Params p;
  p.drag = drag;
  p.wind_x = wind_x;
  p.wind_y = wind_y;
  p.init_half_width = init_half_width;
  p.horizon = horizon;
  p.gamma = gamma;
  return PointMass2D(p);
}

PointMass2D EnvSpec::make_ood(double init_scale) const {
  PointMass2D::Params p = make().params();
  p.init_half_width *= init_scale;
  return PointMass2D(p);
}

PointMass2D EnvSpec::make_shifted(double drag_factor, double wind_dx) const {
  PointMass2D::Params p = make().params();
  p.drag *= drag_factor;
  p.wind_x += wind_dx;
  return PointMass2D(p);
}

plan::PlannerConfig GridSpec::at(std::size_t index, double gamma) const {
  if (index >= size()) throw std::out_of_range("GridSpec::at: index out of range");
  std::size_t rest = index;
  const std::size_t np = penalties.size();
  const std::size_t ns = noise_sigmas.size();
  const std::size_t nl = n_latents.size();
  const std::size_t nk = kappas.size();
  std::size_t pi = rest % np;
  rest /= np;
  std::size_t si = rest % ns;
  rest /= ns;
  std::size_t li = rest % nl;
  rest /= nl;
  std::size_t ki = rest % nk;
  rest /= nk;
  std::size_t hi = rest;

  plan::PlannerConfig cfg;
  cfg.horizon = horizons[hi];
  cfg.n_candidates = n_candidates;
  cfg.n_latents = n_latents[li];
  cfg.kappa = kappas[ki];
  cfg.noise_sigma = noise_sigmas[si];
  cfg.penalty = penalties[pi];
  cfg.gamma = gamma;
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: seeds must be non-empty");
  if (grid.size() == 0) throw std::invalid_argument("ExperimentConfig: grid must be non-empty");
  if (planners.empty()) throw std::invalid_argument("ExperimentConfig: planners must be non-empty");
  for (const auto& p : planners) plan::planner_kind_from_string(p);
  if (eval_mode != "standard" && eval_mode != "ood_init" && eval_mode != "dyn_shift")
    throw std::invalid_argument("ExperimentConfig: unknown eval_mode " + eval_mode);
  if (episodes_per_seed < 1)
    throw std::invalid_argument("ExperimentConfig: episodes_per_seed must be >= 1");
  if (workers < 1) throw std::invalid_argument("ExperimentConfig: workers must be >= 1");
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
  };
  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  PdPolicy behavior(cfg.data.behavior_kp, cfg.data.behavior_kd, cfg.data.behavior_noise);
  Dataset data;
  if (cfg.data.mode_drags.empty()) {
    data = generate_dataset(cfg.env.make(), behavior, cfg.data.episodes, cfg.data.seed);
  } else {
    // Episodes split evenly across the latent dynamics modes.
    const int per_mode =
        std::max<int>(1, cfg.data.episodes / static_cast<int>(cfg.data.mode_drags.size()));
    bool first = true;
    for (std::size_t m = 0; m < cfg.data.mode_drags.size(); ++m) {
      EnvSpec mode_env = cfg.env;
      mode_env.drag = cfg.data.mode_drags[m];
      if (m < cfg.data.mode_wind_x.size()) mode_env.wind_x = cfg.data.mode_wind_x[m];
      Dataset part = generate_dataset(mode_env.make(), behavior, per_mode, cfg.data.seed + m);
      if (first) {
        data = std::move(part);
        first = false;
      } else {
        for (auto& t : part.trajectories) data.trajectories.push_back(std::move(t));
      }
    }
    data.meta.env_id = "pointmass2d_multimode";
    data.meta.transition_count = data.transition_count();
  }
  if (cfg.data.subsample_transitions > 0)
    data = subsample(data, cfg.data.subsample_transitions, cfg.data.seed);
  return data;
}

}  // namespace

Artifacts run_training(const ExperimentConfig& cfg, const Dataset& data) {
  Artifacts art;
  art.dataset = data;

  prior::BcConfig bc = cfg.train.bc;
  bc.hidden = cfg.train.policy_hidden;
  bc.seed = Rng(cfg.train.seed).derive(1).seed();
  art.policy = train_bc(data, bc).policy;

  prior::ValueConfig vc = cfg.train.value;
  vc.hidden = cfg.train.value_hidden;
  vc.seed = Rng(cfg.train.seed).derive(2).seed();
  art.value = train_value_mc(data, cfg.env.gamma, vc).value;

  belief::EncoderConfig ec;
  ec.state_dim = data.meta.state_dim;
  ec.action_dim = data.meta.action_dim;
  ec.latent_dim = cfg.train.latent_dim;
  ec.hidden_dim = cfg.train.gru_hidden;
  ec.state_emb = cfg.train.state_emb;
  ec.action_emb = cfg.train.action_emb;
  ec.reward_emb = cfg.train.reward_emb;
  art.encoder = belief::Encoder(ec, Rng(cfg.train.seed).derive(3).seed());

  model::EnsembleConfig mc;
  mc.state_dim = data.meta.state_dim;
  mc.action_dim = data.meta.action_dim;
  mc.latent_dim = cfg.train.latent_dim;
  mc.members = cfg.train.members;
  mc.elites = cfg.train.elites;
  mc.hidden = cfg.train.model_hidden;
  art.model = model::EnsembleModel(mc, Rng(cfg.train.seed).derive(4).seed());

  belief::VaeConfig vae = cfg.train.vae;
  vae.seed = Rng(cfg.train.seed).derive(5).seed();
  belief::train_vae(art.encoder, art.model, data, vae);

  model::TrainConfig ft = cfg.train.finetune;
  ft.seed = Rng(cfg.train.seed).derive(6).seed();
  model::TrainReport report = belief::freeze_then_finetune(art.encoder, art.model, data, ft);
  art.model.set_elites(model::select_elites(report.val_nll, cfg.train.elites));
  return art;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("fnv1a_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 15];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!is) break;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

Artifacts cmd_pipeline(const ExperimentConfig& cfg, const std::string& run_dir) {
  cfg.validate();
  fs::create_directories(run_dir);

  json manifest;
  manifest["experiment_id"] = cfg.experiment_id;
  json stages = json::array();
  auto record_stage = [&](const std::string& name, const std::vector<std::string>& files) {
    json outputs = json::array();
    for (const auto& f : files)
      outputs.push_back({{"path", f}, {"fnv1a", hex64(fnv1a_file((fs::path(run_dir) / f).string()))}});
    stages.push_back({{"name", name}, {"outputs", outputs}});
  };
  auto run_stage = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("pipeline stage '" + name + "' failed: " + e.what());
    }
  };

  Artifacts art;
  run_stage("dataset", [&] {
    art.dataset = build_dataset(cfg);
    save_dataset(art.dataset, (fs::path(run_dir) / "dataset.bin").string());
    record_stage("dataset", {"dataset.bin"});
  });
  run_stage("bc", [&] {
    prior::BcConfig bc = cfg.train.bc;
    bc.hidden = cfg.train.policy_hidden;
    bc.seed = Rng(cfg.train.seed).derive(1).seed();
    art.policy = train_bc(art.dataset, bc).policy;
    art.policy.save((fs::path(run_dir) / "bc.ckpt").string());
    record_stage("bc", {"bc.ckpt"});
  });
  run_stage("value", [&] {
    prior::ValueConfig vc = cfg.train.value;
    vc.hidden = cfg.train.value_hidden;
    vc.seed = Rng(cfg.train.seed).derive(2).seed();
    art.value = train_value_mc(art.dataset, cfg.env.gamma, vc).value;
    art.value.save((fs::path(run_dir) / "value.ckpt").string());
    record_stage("value", {"value.ckpt"});
  });
  run_stage("vae", [&] {
    belief::EncoderConfig ec;
    ec.state_dim = art.dataset.meta.state_dim;
    ec.action_dim = art.dataset.meta.action_dim;
    ec.latent_dim = cfg.train.latent_dim;
    ec.hidden_dim = cfg.train.gru_hidden;
    ec.state_emb = cfg.train.state_emb;
    ec.action_emb = cfg.train.action_emb;
    ec.reward_emb = cfg.train.reward_emb;
    art.encoder = belief::Encoder(ec, Rng(cfg.train.seed).derive(3).seed());

    model::EnsembleConfig mc;
    mc.state_dim = art.dataset.meta.state_dim;
    mc.action_dim = art.dataset.meta.action_dim;
    mc.latent_dim = cfg.train.latent_dim;
    mc.members = cfg.train.members;
    mc.elites = cfg.train.elites;
    mc.hidden = cfg.train.model_hidden;
    art.model = model::EnsembleModel(mc, Rng(cfg.train.seed).derive(4).seed());

    belief::VaeConfig vae = cfg.train.vae;
    vae.seed = Rng(cfg.train.seed).derive(5).seed();
    belief::train_vae(art.encoder, art.model, art.dataset, vae);
    art.encoder.save((fs::path(run_dir) / "encoder.ckpt").string(), vae.kl_weight);
    record_stage("vae", {"encoder.ckpt"});
  });
  run_stage("finetune", [&] {
    model::TrainConfig ft = cfg.train.finetune;
    ft.seed = Rng(cfg.train.seed).derive(6).seed();
    model::TrainReport report =
        belief::freeze_then_finetune(art.encoder, art.model, art.dataset, ft);
    art.model.set_elites(model::select_elites(report.val_nll, cfg.train.elites));
    art.model.save((fs::path(run_dir) / "model.ckpt").string());
    record_stage("finetune", {"model.ckpt"});
  });

  manifest["stages"] = stages;
  std::ofstream os(fs::path(run_dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
  return art;
}

Artifacts load_artifacts(const std::string& run_dir) {
  auto need = [&](const char* name) {
    fs::path p = fs::path(run_dir) / name;
    if (!fs::exists(p)) throw std::runtime_error("missing checkpoint or dataset: " + p.string());
    return p.string();
  };
  Artifacts art;
  art.dataset = load_dataset(need("dataset.bin"));
  art.policy = prior::PriorPolicy::load(need("bc.ckpt"));
  art.value = prior::ValueFn::load(need("value.ckpt"));
  art.encoder = belief::Encoder::load(need("encoder.ckpt"));
  art.model = model::EnsembleModel::load(need("model.ckpt"));
  return art;
}

std::string metrics_csv_header() {
  return "experiment_id,planner,seed,episode,dataset_size,horizon,n_candidates,n_latents,"
         "kappa,noise_sigma,penalty,gamma,episode_return,normalized_score,ms_per_step";
}

std::string to_csv_row(const MetricsRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.experiment_id << ',' << r.planner << ',' << r.seed << ',' << r.episode << ','
     << r.dataset_size << ',' << r.cfg.horizon << ',' << r.cfg.n_candidates << ','
     << r.cfg.n_latents << ',' << r.cfg.kappa << ',' << r.cfg.noise_sigma << ','
     << r.cfg.penalty << ',' << r.cfg.gamma << ',' << r.episode_return << ',' << r.normalized
     << ',' << r.ms_per_step;
  return os.str();
}

MetricsRecord metrics_from_csv_row(const std::string& row) {
  std::vector<std::string> parts;
  std::stringstream ss(row);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 15) throw std::invalid_argument("metrics_from_csv_row: bad field count");
  MetricsRecord r;
  std::size_t i = 0;
  r.experiment_id = parts[i++];
  r.planner = parts[i++];
  r.seed = std::stoull(parts[i++]);
  r.episode = std::stoi(parts[i++]);
  r.dataset_size = std::stoull(parts[i++]);
  r.cfg.horizon = std::stoi(parts[i++]);
  r.cfg.n_candidates = std::stoi(parts[i++]);
  r.cfg.n_latents = std::stoi(parts[i++]);
  r.cfg.kappa = std::stod(parts[i++]);
  r.cfg.noise_sigma = std::stod(parts[i++]);
  r.cfg.penalty = std::stod(parts[i++]);
  r.cfg.gamma = std::stod(parts[i++]);
  r.episode_return = std::stod(parts[i++]);
  r.normalized = std::stod(parts[i++]);
  r.ms_per_step = std::stod(parts[i++]);
  return r;
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  os << metrics_csv_header() << "\n";
  for (const auto& r : records) os << to_csv_row(r) << "\n";
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_metrics_csv: cannot open " + path);
  std::string line;
  std::getline(is, line);
  if (line != metrics_csv_header()) throw std::runtime_error("read_metrics_csv: bad header");
  std::vector<MetricsRecord> out;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(metrics_from_csv_row(line));
  return out;
}

ScoreRefs compute_score_refs(const Environment& env) {
  const int episodes = 16;
  UniformRandomPolicy random_policy(env.action_dim());
  PdPolicy expert(2.0, 1.4, 0.0);
  ScoreRefs refs;
  for (int e = 0; e < episodes; ++e) {
    Rng r1(Rng(4242421ULL).derive(e).seed());
    Trajectory t1 = roll_episode(env, random_policy, r1);
    for (const auto& tr : t1.transitions) refs.random_ret += tr.reward;
    Rng r2(Rng(4242422ULL).derive(e).seed());
    Trajectory t2 = roll_episode(env, expert, r2);
    for (const auto& tr : t2.transitions) refs.expert_ret += tr.reward;
  }
  refs.random_ret /= episodes;
  refs.expert_ret /= episodes;
  return refs;
}

namespace {

PointMass2D test_env_for(const ExperimentConfig& cfg) {
  if (cfg.eval_mode == "ood_init") return cfg.env.make_ood(cfg.ood_scale);
  if (cfg.eval_mode == "dyn_shift")
    return cfg.env.make_shifted(cfg.shift_drag_factor, cfg.shift_wind_dx);
  return cfg.env.make();
}

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return Rng(seed).derive(77000 + static_cast<std::uint64_t>(episode)).seed();
}

std::vector<MetricsRecord> eval_artifacts(const ExperimentConfig& cfg, const Artifacts& art,
                                          std::size_t dataset_size_tag) {
  PointMass2D env = test_env_for(cfg);
  ScoreRefs refs = compute_score_refs(env);

  plan::EnsemblePlannerModel model(art.model);
  plan::PriorPolicyAdapter policy(art.policy);
  plan::ValueFnAdapter value(art.value);
  plan::PlannerComponents comps;
  comps.encoder = &art.encoder;
  comps.model = &model;
  comps.policy = &policy;
  comps.value = &value;

  struct Job {
    std::size_t planner, grid, seed;
    int episode;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < cfg.planners.size(); ++p)
    for (std::size_t g = 0; g < cfg.grid.size(); ++g)
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
        for (int e = 0; e < cfg.episodes_per_seed; ++e) jobs.push_back({p, g, s, e});

  std::vector<MetricsRecord> records(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    plan::PlannerKind kind = plan::planner_kind_from_string(cfg.planners[job.planner]);
    plan::PlannerConfig pc = cfg.grid.at(job.grid, cfg.env.gamma);
    plan::EpisodeLog log =
        plan::mpc_episode(env, kind, comps, pc, episode_seed(cfg.seeds[job.seed], job.episode));
    MetricsRecord r;
    r.experiment_id = cfg.experiment_id;
    r.planner = cfg.planners[job.planner];
    r.seed = cfg.seeds[job.seed];
    r.episode = job.episode;
    r.dataset_size = dataset_size_tag;
    r.cfg = pc;
    r.episode_return = log.episode_return;
    r.normalized = normalized_score(log.episode_return, refs.random_ret, refs.expert_ret);
    double ms = 0.0;
    for (const auto& st : log.steps) ms += st.plan_ms;
    r.ms_per_step = log.steps.empty() ? 0.0 : ms / log.steps.size();
    records[i] = std::move(r);
  });
  return records;
}

}  // namespace

std::vector<MetricsRecord> cmd_eval(const ExperimentConfig& cfg, const Artifacts& artifacts,
                                    const std::string& run_dir) {
  cfg.validate();
  std::vector<MetricsRecord> records;
  if (cfg.dataset_sizes.empty()) {
    records = eval_artifacts(cfg, artifacts, 0);
  } else {
    for (std::size_t size : cfg.dataset_sizes) {
      Dataset sub = subsample(artifacts.dataset, size, cfg.data.seed);
      Artifacts art = run_training(cfg, sub);
      auto part = eval_artifacts(cfg, art, size);
      records.insert(records.end(), part.begin(), part.end());
    }
  }
  if (!run_dir.empty())
    write_metrics_csv(records, (fs::path(run_dir) / "metrics.csv").string());
  return records;
}

std::vector<VarianceRow> cmd_variance_study(const ExperimentConfig& cfg,
                                            const Artifacts& artifacts,
                                            const std::string& run_dir) {
  cfg.validate();
  if (cfg.variance_reps < 2)
    throw std::invalid_argument("cmd_variance_study: variance_reps must be >= 2");

  PointMass2D env = test_env_for(cfg);
  plan::EnsemblePlannerModel model(artifacts.model);
  plan::PriorPolicyAdapter policy(artifacts.policy);
  plan::ValueFnAdapter value(artifacts.value);

  struct Cell {
    double var_sum = 0.0;
    std::size_t var_count = 0;
    double ret_sum = 0.0;
  };
  std::vector<Cell> cells(cfg.variance_n_latents.size() * cfg.seeds.size());

  struct Job {
    std::size_t nb, seed;
  };
  std::vector<Job> jobs;
  for (std::size_t n = 0; n < cfg.variance_n_latents.size(); ++n)
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({n, s});

  parallel_for(jobs.size(), cfg.workers, [&](std::size_t ji) {
    const Job& job = jobs[ji];
    plan::PlannerConfig pc = cfg.grid.at(0, cfg.env.gamma);
    pc.n_latents = cfg.variance_n_latents[job.nb];
    Cell& cell = cells[job.nb * cfg.seeds.size() + job.seed];

    Rng root(cfg.seeds[job.seed]);
    Rng init = root.derive(0);
    net::Vec s = env.sample_initial(init);
    belief::BeliefParams bp = artifacts.encoder.begin(s);
    double ep_ret = 0.0;
    const int K = cfg.variance_reps;
    for (int t = 0; t < env.horizon(); ++t) {
      Rng base = root.derive(1000 + static_cast<std::uint64_t>(t));
      net::Vec first_action;
      std::vector<net::Vec> firsts(K);
      for (int rep = 0; rep < K; ++rep) {
        Rng rng = base.derive(3000 + static_cast<std::uint64_t>(rep));
        plan::PlanResult pr = plan::refplan_from_belief(s, bp.mu, bp.stddev(), model, policy,
                                                        &value, pc, rng);
        firsts[rep] = pr.actions[0];
        if (rep == 0) first_action = pr.actions[0];
      }
      // Sample variance across repetitions, averaged over action dims.
      double var = 0.0;
      for (std::size_t d = 0; d < first_action.size(); ++d) {
        std::vector<double> xs(K);
        for (int rep = 0; rep < K; ++rep) xs[rep] = firsts[rep][d];
        double sd = stats::sample_std(xs);
        var += sd * sd;
      }
      cell.var_sum += var / static_cast<double>(first_action.size());
      cell.var_count += 1;

      Rng env_rng = root.derive(500000 + static_cast<std::uint64_t>(t));
      StepResult res = env.step(s, first_action, env_rng);
      ep_ret += res.reward;
      bp = artifacts.encoder.update(bp, first_action, res.reward, res.next_state);
      s = std::move(res.next_state);
    }
    cell.ret_sum = ep_ret;
  });

  std::vector<VarianceRow> rows;
  for (std::size_t n = 0; n < cfg.variance_n_latents.size(); ++n) {
    VarianceRow row;
    row.n_latents = cfg.variance_n_latents[n];
    double vs = 0.0, rs = 0.0;
    std::size_t vc = 0;
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
      const Cell& cell = cells[n * cfg.seeds.size() + s];
      vs += cell.var_sum;
      vc += cell.var_count;
      rs += cell.ret_sum;
    }
    row.mean_sample_variance = vs / static_cast<double>(vc);
    row.mean_return = rs / static_cast<double>(cfg.seeds.size());
    rows.push_back(row);
  }

  if (!run_dir.empty()) {
    std::ofstream os(fs::path(run_dir) / "variance.csv");
    os.precision(17);
    os << "n_bar,mean_sample_variance,mean_return\n";
    for (const auto& row : rows)
      os << row.n_latents << ',' << row.mean_sample_variance << ',' << row.mean_return << "\n";
  }
  return rows;
}

std::vector<SweepBest> cmd_sweep(const ExperimentConfig& cfg, const Artifacts& artifacts,
                                 const std::string& run_dir) {
  cfg.validate();
  std::vector<MetricsRecord> records = eval_artifacts(cfg, artifacts, 0);
  if (!run_dir.empty())
    write_metrics_csv(records, (fs::path(run_dir) / "metrics.csv").string());

  auto tuple_of = [](const plan::PlannerConfig& c) {
    return std::make_tuple(c.horizon, c.n_candidates, c.n_latents, c.kappa, c.noise_sigma,
                           c.penalty);
  };

  std::vector<SweepBest> best;
  for (const auto& planner : cfg.planners) {
    SweepBest b;
    b.planner = planner;
    bool have = false;
    for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
      plan::PlannerConfig pc = cfg.grid.at(g, cfg.env.gamma);
      double acc = 0.0;
      std::size_t count = 0;
      for (const auto& r : records) {
        if (r.planner != planner) continue;
        if (tuple_of(r.cfg) != tuple_of(pc)) continue;
        acc += r.normalized;
        ++count;
      }
      if (count == 0) continue;
      double score = acc / static_cast<double>(count);
      if (!have || score > b.mean_score ||
          (score == b.mean_score && tuple_of(pc) < tuple_of(b.cfg))) {
        b.cfg = pc;
        b.mean_score = score;
        have = true;
      }
    }
    best.push_back(b);
  }

  if (!run_dir.empty()) {
    json out = json::array();
    for (const auto& b : best)
      out.push_back({{"planner", b.planner},
                     {"mean_normalized_score", b.mean_score},
                     {"horizon", b.cfg.horizon},
                     {"n_candidates", b.cfg.n_candidates},
                     {"n_latents", b.cfg.n_latents},
                     {"kappa", b.cfg.kappa},
                     {"noise_sigma", b.cfg.noise_sigma},
                     {"penalty", b.cfg.penalty}});
    std::ofstream os(fs::path(run_dir) / "sweep.json");
    os << out.dump(2) << "\n";
  }
  return best;
}

std::string prepare_run_dir(const std::string& outdir) {
  fs::path base(outdir);
  if (!fs::exists(base)) {
    fs::create_directories(base);
    return base.string();
  }
  if (fs::is_directory(base) && fs::is_empty(base)) return base.string();
  for (int i = 1;; ++i) {
    fs::path candidate = base / ("run-" + std::to_string(i));
    if (!fs::exists(candidate)) {
      fs::create_directories(candidate);
      return candidate.string();
    }
  }
}

}  // namespace rtplan::harness
