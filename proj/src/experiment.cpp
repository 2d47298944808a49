#include "vcd/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vcd {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

ToyTarget make_toy_target(const std::string& name) {
  if (name == "gaussian") return ToyTarget::correlated_gaussian();
  if (name == "mixture2") return ToyTarget::mixture2();
  if (name == "banana") return ToyTarget::banana();
  throw std::invalid_argument("unknown toy target '" + name + "'");
}

Dataset make_synthetic_dataset(int n, int dim, int latent, std::uint64_t gen_seed) {
  Rng rng(gen_seed);
  Mat W(dim, latent);
  for (int d = 0; d < dim; ++d)
    for (int k = 0; k < latent; ++k) W(d, k) = rng.normal();
  Vec b(dim);
  for (int d = 0; d < dim; ++d) b[d] = 0.5 * rng.normal();
  LvmModel truth = LvmModel::logistic_mf(W, b);
  Dataset data;
  data.rows = Mat(n, dim);
  for (int i = 0; i < n; ++i) data.rows.row(i) = truth.simulate(rng).first.transpose();
  return data;
}

fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  fs::path dir = cfg.output_dir;
  if (const char* root = std::getenv("VCD_OUTPUT_ROOT"); root && *root)
    dir = fs::path(root) / dir;
  return dir;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace, bool zero_wall_clock) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,mode,objective,acceptance,lr_mean,lr_scale,lr_weights,lr_phi,wall_ms\n";
  for (const auto& r : trace) {
    os << r.iteration << ',' << r.mode << ',' << r.objective << ',' << r.acceptance
       << ',' << r.lr_mean << ',' << r.lr_scale << ',' << r.lr_weights << ','
       << r.lr_phi << ',' << (zero_wall_clock ? 0.0 : r.wall_ms) << '\n';
  }
  return os.str();
}

void emit_contours(const LogDensityFn& density, const Grid2D& grid,
                   const fs::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "x\ty\tdensity\n";
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j) {
      Vec z(2);
      z << grid.x(i), grid.y(j);
      os << grid.x(i) << '\t' << grid.y(j) << '\t' << std::exp(density(z)) << '\n';
    }
  atomic_write(path, os.str());
}

namespace {

std::unique_ptr<Program> make_toy_program(const ExperimentConfig& cfg) {
  Rng rng(cfg.seed, 0, 0, 0x1417);
  auto umean = [&] {
    Vec m(2);
    m << 0.2 * rng.uniform() - 0.1, 0.2 * rng.uniform() - 0.1;
    return m;
  };
  if (cfg.family == "diag_gaussian")
    return std::make_unique<DiagGaussian>(umean(), Vec::Ones(2));
  if (cfg.family == "chol_gaussian")
    return std::make_unique<CholGaussian>(umean(), Mat::Identity(2, 2));
  if (cfg.family.rfind("mixture", 0) == 0) {
    int K = cfg.family == "mixture" ? 2 : std::stoi(cfg.family.substr(7));
    std::vector<DiagGaussian> comps;
    for (int k = 0; k < K; ++k) comps.emplace_back(umean(), Vec::Ones(2));
    return std::make_unique<MixtureGaussian>(std::move(comps), Vec::Zero(K));
  }
  throw std::invalid_argument("unsupported toy family '" + cfg.family + "'");
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg) {
  json m;
  m["format"] = "vcd-manifest-v1";
  m["seed"] = cfg.seed;
  m["config"] = serialize_config(cfg);
  atomic_write(dir / "manifest.json", m.dump(2) + "\n");
}

ExperimentConfig read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
  json m = json::parse(in);
  return parse_config_text(m.at("config").get<std::string>());
}

ExperimentOutput run_toy(const ExperimentConfig& cfg, const fs::path& dir) {
  ToyTarget target = make_toy_target(cfg.target);
  LogDensity density = target.as_log_density();
  auto program = make_toy_program(cfg);
  TrainProblem problem(density, *program);
  TrainConfig tc = cfg.train_config();
  TrainResult result = problem.train(tc);

  atomic_write(dir / "trace.csv", trace_to_csv(result.trace, cfg.deterministic));

  json params;
  params["family"] = cfg.family;
  params["theta"] = vec_to_json(result.theta);
  atomic_write(dir / "params.json", params.dump(2) + "\n");

  // contour grids for the target and the fitted q
  Grid2D grid{-8.0, 8.0, cfg.target == "banana" ? -30.0 : -8.0, 8.0, 120, 120};
  if (cfg.target == "banana") grid.ny = 240;
  emit_contours([&](const Vec& z) { return target.log_density(z); }, grid,
                dir / "target_grid.tsv");
  program->set_params(result.theta);
  auto fitted = program->bind(Vec());
  emit_contours([&](const Vec& z) { return fitted->log_q(z); }, grid,
                dir / "fitted_q_grid.tsv");

  json summary;
  summary["experiment"] = "toy";
  summary["target"] = cfg.target;
  summary["mode"] = cfg.mode;
  summary["final_objective"] = result.trace.empty() ? 0.0 : result.trace.back().objective;
  summary["clipped_updates"] = result.clipped_updates;
  summary["skipped_updates"] = result.skipped_updates;
  atomic_write(dir / "summary.json", summary.dump(2) + "\n");

  ExperimentOutput out;
  out.dir = dir;
  out.final_objective = result.trace.empty() ? 0.0 : result.trace.back().objective;
  return out;
}

struct LvmSetup {
  LvmModel model;
  AmortizedGaussian encoder;
  Dataset train, test;
};

LvmSetup build_lvm(const ExperimentConfig& cfg) {
  Dataset all;
  if (!cfg.dataset_path.empty()) {
    all = load_idx(cfg.dataset_path, cfg.binarize_threshold);
  } else {
    all = make_synthetic_dataset(cfg.synth_n_train + cfg.synth_n_test, cfg.synth_dim,
                                 cfg.synth_latent);
  }
  int n_test = cfg.dataset_path.empty()
                   ? cfg.synth_n_test
                   : std::min(cfg.test_count, all.n() / 5);
  int n_train = all.n() - n_test;
  Rng rng(cfg.seed, 0, 0, 0x10de1);
  int D = all.dim();
  int K = cfg.latent_dim;
  LvmModel model = [&] {
    if (cfg.target == "logistic_mf") {
      Mat W(D, K);
      for (int d = 0; d < D; ++d)
        for (int k = 0; k < K; ++k) W(d, k) = 0.01 * rng.normal();
      return LvmModel::logistic_mf(W, Vec::Zero(D));
    }
    if (cfg.target == "vae") {
      auto hidden = cfg.hidden_layout(cfg.decoder_hidden);
      DenseNet dec = DenseNet::make(K, hidden, D, Act::identity, rng);
      return LvmModel::vae(std::move(dec), K);
    }
    throw std::invalid_argument("unknown lvm model '" + cfg.target + "'");
  }();
  AmortizedGaussian enc =
      AmortizedGaussian::make(D, K, cfg.hidden_layout(cfg.encoder_hidden), rng);
  return {std::move(model), std::move(enc), all.head(n_train),
          all.slice(n_train, n_test)};
}

json encoder_to_json(const AmortizedGaussian& enc) {
  json e;
  e["mean_params"] = vec_to_json(enc.mean_net().params());
  e["std_params"] = vec_to_json(enc.std_net().params());
  return e;
}

ExperimentOutput run_lvm(const ExperimentConfig& cfg, const fs::path& dir) {
  LvmSetup setup = build_lvm(cfg);
  TrainProblem problem(setup.model, setup.encoder, setup.train);
  TrainConfig tc = cfg.train_config();
  TrainResult result = problem.train(tc);

  atomic_write(dir / "trace.csv", trace_to_csv(result.trace, cfg.deterministic));

  json modelj;
  modelj["kind"] = cfg.target;
  modelj["latent_dim"] = setup.model.latent_dim();
  modelj["data_dim"] = setup.model.data_dim();
  modelj["phi"] = vec_to_json(result.phi);
  modelj["encoder"] = encoder_to_json(setup.encoder);
  atomic_write(dir / "model.json", modelj.dump(2) + "\n");

  KernelConfig kernel{cfg.kernel_t, cfg.leapfrog_steps, cfg.step_size};
  ProposalSpec pspec{cfg.proposal_inflation, cfg.eval_hmc_total, cfg.eval_hmc_keep};
  double llh = mean_test_llh(setup.model, setup.encoder, setup.test, kernel, pspec,
                             cfg.eval_samples, cfg.seed + 0x77,
                             cfg.deterministic ? 1 : cfg.threads);

  json summary;
  summary["experiment"] = "lvm";
  summary["model"] = cfg.target;
  summary["mode"] = cfg.mode;
  summary["test_marginal_llh"] = llh;
  summary["n_train"] = setup.train.n();
  summary["n_test"] = setup.test.n();
  summary["final_objective"] = result.trace.empty() ? 0.0 : result.trace.back().objective;
  atomic_write(dir / "summary.json", summary.dump(2) + "\n");

  ExperimentOutput out;
  out.dir = dir;
  out.final_objective = result.trace.empty() ? 0.0 : result.trace.back().objective;
  out.test_llh = llh;
  return out;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  fs::path dir = resolve_output_dir(cfg);
  fs::create_directories(dir);
  write_manifest(dir, cfg);
  if (cfg.experiment == "toy") return run_toy(cfg, dir);
  if (cfg.experiment == "lvm") return run_lvm(cfg, dir);
  throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
}

double eval_experiment(const fs::path& model_dir, const std::string& dataset_path,
                       int eval_samples, std::uint64_t seed, int threads) {
  ExperimentConfig cfg = read_manifest(model_dir);
  if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
  LvmSetup setup = build_lvm(cfg);

  std::ifstream in(model_dir / "model.json");
  if (!in) throw std::runtime_error("missing model.json in " + model_dir.string());
  json modelj = json::parse(in);
  setup.model.set_phi(vec_from_json(modelj.at("phi")));
  Vec enc_params(setup.encoder.param_count());
  Vec mp = vec_from_json(modelj.at("encoder").at("mean_params"));
  Vec sp = vec_from_json(modelj.at("encoder").at("std_params"));
  enc_params << mp, sp;
  setup.encoder.set_params(enc_params);

  KernelConfig kernel{cfg.kernel_t, cfg.leapfrog_steps, cfg.step_size};
  ProposalSpec pspec{cfg.proposal_inflation, cfg.eval_hmc_total, cfg.eval_hmc_keep};
  return mean_test_llh(setup.model, setup.encoder, setup.test, kernel, pspec,
                       eval_samples > 0 ? eval_samples : cfg.eval_samples,
                       seed, threads);
}

void contours_experiment(const fs::path& model_dir) {
  ExperimentConfig cfg = read_manifest(model_dir);
  require(cfg.experiment == "toy", "contours: run directory is not a toy experiment");
  ToyTarget target = make_toy_target(cfg.target);
  std::ifstream in(model_dir / "params.json");
  if (!in) throw std::runtime_error("missing params.json in " + model_dir.string());
  json params = json::parse(in);
  auto program = make_toy_program(cfg);
  program->set_params(vec_from_json(params.at("theta")));
  Grid2D grid{-8.0, 8.0, cfg.target == "banana" ? -30.0 : -8.0, 8.0, 120, 120};
  if (cfg.target == "banana") grid.ny = 240;
  emit_contours([&](const Vec& z) { return target.log_density(z); }, grid,
                model_dir / "target_grid.tsv");
  auto fitted = program->bind(Vec());
  emit_contours([&](const Vec& z) { return fitted->log_q(z); }, grid,
                model_dir / "fitted_q_grid.tsv");
}

}  // namespace vcd
