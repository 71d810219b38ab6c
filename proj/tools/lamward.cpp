#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lamward/binio.hpp"
#include "lamward/checkpoint.hpp"
#include "lamward/config.hpp"
#include "lamward/controller.hpp"
#include "lamward/error.hpp"
#include "lamward/evalsuite.hpp"
#include "lamward/kernels.hpp"
#include "lamward/lam.hpp"
#include "lamward/planner.hpp"
#include "lamward/sampler.hpp"
#include "lamward/worldgen.hpp"

namespace fs = std::filesystem;
using namespace lamward;
using ojson = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the command's seed");
  cmd->add_option("--out", c.out, "Output directory (default: the config's out)");
}

RunConfig load_run_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path d = cfg.out;
  fs::create_directories(d);
  return d;
}

std::string csv_comment(const std::string& provenance) { return "# " + provenance + "\n"; }

struct Data {
  std::vector<Episode> train;
  std::vector<Episode> test;
};

Data load_data(const fs::path& dir, const RunConfig& cfg) {
  Data d{load_episodes(dir / "train.lweps"), load_episodes(dir / "test.lweps")};
  for (const auto* set : {&d.train, &d.test})
    for (const auto& ep : *set)
      if (!(ep.cfg == cfg.world))
        throw std::invalid_argument("dataset in " + dir.string() + " was generated with a different world config");
  return d;
}

std::vector<Tensor> encode_all(const Encoder& enc, const std::vector<Episode>& eps) {
  std::vector<Tensor> out(eps.size());
  kernels::parallel_for(eps.size(), [&](std::size_t i) { out[i] = enc.encode_episode(eps[i]); });
  return out;
}

int cmd_init_config(const Common& c) {
  RunConfig cfg = load_run_config(c);
  fs::path path = c.out.empty() ? fs::path("config.json") : fs::path(c.out) / "config.json";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, config_to_text(cfg));
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_gen_data(const Common& c) {
  RunConfig cfg = load_run_config(c);
  if (c.seed) cfg.data.seed = *c.seed;
  cfg.validate();
  const fs::path dir = out_dir(cfg);
  const auto train = make_dataset(cfg.world, cfg.data.seed, cfg.data.train_episodes);
  const auto test = make_dataset(cfg.world, cfg.data.seed + 1'000'003ULL, cfg.data.test_episodes);
  const std::string train_bytes = encode_episodes(train), test_bytes = encode_episodes(test);
  write_file_atomic(dir / "train.lweps", train_bytes);
  write_file_atomic(dir / "test.lweps", test_bytes);

  ojson m;
  m["provenance"] = ojson::parse(provenance_json(config_digest(cfg), cfg.data.seed));
  m["format"] = {{"magic", std::string(kEpisodeMagic, sizeof kEpisodeMagic)}, {"version", kEpisodeVersion}};
  m["files"] = ojson::array({{{"name", "train.lweps"}, {"episodes", train.size()}, {"fnv1a64", digest_hex(fnv1a64(train_bytes))}},
                             {{"name", "test.lweps"}, {"episodes", test.size()}, {"fnv1a64", digest_hex(fnv1a64(test_bytes))}}});
  m["episodes"] = train.size() + test.size();
  m["frames"] = cfg.world.frames;
  m["grid"] = cfg.world.grid;
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
  write_file_atomic(dir / "config.json", config_to_text(cfg));
  std::cout << "wrote " << train.size() << " train and " << test.size() << " test episodes to " << dir.string()
            << "\n";
  return 0;
}

// Keeps only the CSV rows for steps before `step` so a resumed run appends cleanly.
std::string truncate_loss_csv(const fs::path& path, std::uint64_t step) {
  if (!fs::exists(path)) return {};
  std::istringstream in(read_file(path));
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
    if (std::stoull(line.substr(0, line.find(','))) < step) kept += line + "\n";
  }
  return kept;
}

int cmd_train(const Common& c, const std::string& data_dir, const std::string& resume, std::optional<std::uint64_t> until) {
  RunConfig cfg = load_run_config(c);
  if (c.seed) cfg.train.seed = *c.seed;
  cfg.validate();
  const fs::path dir = out_dir(cfg);
  const Data data = load_data(data_dir.empty() ? dir : fs::path(data_dir), cfg);
  const std::uint64_t digest = training_digest(cfg);

  const fs::path csv = dir / "loss.csv";
  ModelBundle b = resume.empty() ? make_bundle(cfg.model, cfg.train, Encoder(cfg.encoder), cfg.init_seed)
                                 : resume_bundle(resume, digest);
  b.config_digest = digest;
  const std::string rows = resume.empty() ? std::string() : truncate_loss_csv(csv, b.step);
  const std::uint64_t target = until ? std::min<std::uint64_t>(*until, cfg.train.steps) : cfg.train.steps;
  const auto reprs = encode_all(b.encoder, data.train);
  std::ostringstream log;
  train(b, reprs, target, [&](const LossReport& r) {
    log << loss_csv_row(r) << "\n";
    if ((r.step + 1) % 100 == 0)
      std::cerr << "step " << r.step + 1 << "/" << target << " loss " << r.total << " pred " << r.pred << "\n";
  });
  const std::string prov = provenance_json(digest, cfg.train.seed);
  write_file_atomic(csv, csv_comment(prov) + loss_csv_header() + "\n" + rows + log.str());
  Checkpoint ck;
  ck.digest = digest;
  ck.provenance = prov;
  ck.bundle = std::move(b);
  save_checkpoint(dir / "bundle.ckpt", ck);
  std::cout << "trained to step " << ck.bundle->step << "; checkpoint " << (dir / "bundle.ckpt").string() << "\n";
  return 0;
}

int cmd_train_controller(const Common& c, const std::string& data_dir, const std::string& bundle_path,
                         bool no_context) {
  RunConfig cfg = load_run_config(c);
  if (c.seed) cfg.controller.seed = *c.seed;
  if (no_context) cfg.controller.use_context = false;
  cfg.validate();
  const fs::path dir = out_dir(cfg);
  const Data data = load_data(data_dir.empty() ? dir : fs::path(data_dir), cfg);
  const ModelBundle b = load_bundle(bundle_path);
  ControllerCfg ccfg = cfg.controller;
  ccfg.repr_dim = b.repr_dim();
  ccfg.latent_dim = b.latent_dim();
  ccfg.action_dim = cfg.world.action_dim();
  Controller ctrl = make_controller(ccfg, cfg.init_seed);
  const auto ds = build_controller_dataset(b, data.train, encode_all(b.encoder, data.train));
  const auto log = train_controller(ctrl, ds);

  const std::string prov = provenance_json(b.config_digest, ccfg.seed);
  std::ostringstream csv;
  csv << csv_comment(prov) << "step,mse\n";
  for (std::size_t i = 0; i < log.loss.size(); ++i) csv << i << ',' << format_double(log.loss[i]) << "\n";
  write_file_atomic(dir / "controller_loss.csv", csv.str());
  Checkpoint ck;
  ck.digest = b.config_digest;
  ck.provenance = prov;
  ck.controller = std::move(ctrl);
  save_checkpoint(dir / "controller.ckpt", ck);
  std::cout << "controller final mse " << log.final_mse << "; checkpoint " << (dir / "controller.ckpt").string()
            << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& data_dir, const std::vector<std::string>& checkpoints,
             const std::string& protocol) {
  RunConfig cfg = load_run_config(c);
  if (c.seed) cfg.eval.seed = *c.seed;
  cfg.validate();
  if (checkpoints.empty()) throw std::invalid_argument("eval: at least one --checkpoint is required");
  const fs::path dir = out_dir(cfg);
  const Data data = load_data(data_dir.empty() ? dir : fs::path(data_dir), cfg);

  std::vector<ModelBundle> bundles;
  for (const auto& p : checkpoints) bundles.push_back(load_bundle(p));
  for (const auto& b : bundles)
    if (!(b.encoder == bundles.front().encoder))
      throw std::invalid_argument("eval: checkpoints were trained with different encoders");
  const auto reprs = encode_all(bundles.front().encoder, data.test);

  EvalReport rep;
  if (protocol == "capacity") {
    std::vector<const ModelBundle*> ptrs;
    for (const auto& b : bundles) ptrs.push_back(&b);
    rep = eval_capacity(ptrs, reprs, cfg.eval);
  } else if (protocol == "leakage" || protocol == "cycle") {
    for (const auto& b : bundles) {
      EvalReport one = protocol == "leakage" ? eval_leakage(b, reprs, cfg.eval) : eval_cycle(b, reprs, cfg.eval);
      rep.protocol = one.protocol;
      rep.seeds = one.seeds;
      rep.rows.insert(rep.rows.end(), one.rows.begin(), one.rows.end());
      for (auto& p : one.plots) {
        p.label = one.rows.front().label + "/" + p.label;
        rep.plots.push_back(std::move(p));
      }
    }
  } else {
    throw std::invalid_argument("eval: unknown protocol " + protocol);
  }

  const std::string prov = provenance_json(config_digest(cfg), cfg.eval.seed);
  const std::string stem = "eval_" + protocol;
  write_file_atomic(dir / (stem + ".json"), report_json(rep, prov));
  write_file_atomic(dir / (stem + ".csv"), csv_comment(prov) + report_csv(rep));
  write_file_atomic(dir / (stem + "_plot.csv"), csv_comment(prov) + plot_data_csv(rep));
  for (const auto& row : rep.rows) {
    std::cout << row.label << " [" << digest_hex(row.config_digest) << "]";
    for (const auto& [k, v] : row.metrics) std::cout << " " << k << "=" << v;
    std::cout << "\n";
  }
  return 0;
}

int cmd_plan(const Common& c, const std::string& data_dir, const std::string& bundle_path,
             const std::string& controller_path, const std::string& preset, std::optional<std::size_t> runs) {
  RunConfig cfg = load_run_config(c);
  if (c.seed) cfg.eval.seed = *c.seed;
  if (!preset.empty()) cfg.cem = CemCfg::preset(preset);
  if (runs) cfg.plan_runs = *runs;
  cfg.validate();
  if (controller_path.empty()) throw std::invalid_argument("plan: --controller is required");
  const fs::path dir = out_dir(cfg);
  const Data data = load_data(data_dir.empty() ? dir : fs::path(data_dir), cfg);
  const ModelBundle b = load_bundle(bundle_path);
  const Controller ctrl = load_controller(controller_path);
  const auto reprs = encode_all(b.encoder, data.test);
  const auto results = run_planning(b, ctrl, data.test, reprs, cfg.cem, cfg.plan_runs, cfg.eval.seed);
  const PlanSummary s = summarize(results);

  const std::string prov = provenance_json(config_digest(cfg), cfg.eval.seed);
  const fs::path pdir = dir / "plan";
  fs::create_directories(pdir);
  for (std::size_t i = 0; i < results.size(); ++i) {
    ojson j;
    j["provenance"] = ojson::parse(prov);
    j["run"] = i;
    j.update(ojson::parse(plan_episode_json(results[i])));
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu.json", i);
    write_file_atomic(pdir / name, j.dump(2) + "\n");
  }
  ojson j;
  j["provenance"] = ojson::parse(prov);
  j["preset"] = preset.empty() ? "config" : preset;
  j["episodes"] = s.episodes;
  j["mean_delta_xyz"] = s.mean_delta_xyz;
  j["mean_ate"] = s.mean_ate;
  j["mean_rpe"] = s.mean_rpe;
  j["mean_random_delta_xyz"] = s.mean_random_delta_xyz;
  write_file_atomic(dir / "plan_summary.json", j.dump(2) + "\n");
  std::ostringstream csv;
  csv << csv_comment(prov) << "episodes,mean_delta_xyz,mean_ate,mean_rpe,mean_random_delta_xyz\n"
      << s.episodes << ',' << format_double(s.mean_delta_xyz) << ',' << format_double(s.mean_ate) << ','
      << format_double(s.mean_rpe) << ',' << format_double(s.mean_random_delta_xyz) << "\n";
  write_file_atomic(dir / "plan_summary.csv", csv.str());
  std::cout << "planned " << s.episodes << " runs: mean delta_xyz " << s.mean_delta_xyz << " (random "
            << s.mean_random_delta_xyz << "), ATE " << s.mean_ate << ", RPE " << s.mean_rpe << "\n";
  return 0;
}

SgldCfg sgld_for_count(SgldCfg cfg, std::size_t count) {
  cfg.steps = std::max<std::size_t>(cfg.thin, 1);
  while ((cfg.steps - cfg.burn_in()) / cfg.thin < count) cfg.steps += cfg.thin;
  return cfg;
}

int cmd_sample(const Common& c, const std::string& data_dir, const std::string& bundle_path,
               const std::string& family, std::size_t count, bool used_only) {
  RunConfig cfg = load_run_config(c);
  const std::uint64_t seed = c.seed.value_or(cfg.eval.seed);
  cfg.validate();
  const fs::path dir = out_dir(cfg);
  const ModelBundle b = load_bundle(bundle_path);
  const std::size_t D = b.latent_dim();
  Rng rng(seed, "sample/" + family);
  std::vector<Tensor> rows;
  if (family == "sparse") {
    const auto& reg = b.model.reg;
    Tensor s = sgld_sample(sparse_energy_fn(reg.l1, reg.l2), sgld_for_count(cfg.sgld, count), D, rng);
    rows.push_back(s.rows_slice(0, count));
  } else if (family == "noisy") {
    for (std::size_t i = 0; i < count; ++i) rows.push_back(prior_sample(D, rng));
  } else if (family == "discrete") {
    if (b.model.reg.kind != RegKind::discrete) throw std::invalid_argument("sample: bundle has no codebook");
    std::vector<bool> used;
    if (used_only) {
      const Data data = load_data(data_dir.empty() ? dir : fs::path(data_dir), cfg);
      used.assign(b.model.reg.codebook_size, false);
      for (const auto& r : encode_all(b.encoder, data.train)) {
        const std::size_t n = r.rows() - 1;
        for (auto code : idm_infer(r.rows_slice(0, n), r.rows_slice(1, n), b).codes) used[code] = true;
      }
    }
    for (std::size_t i = 0; i < count; ++i)
      rows.push_back(codebook_sample(b.params.value("codebook"), rng, used_only, &used));
  } else {
    throw std::invalid_argument("sample: unknown family " + family + " (sparse, noisy, discrete)");
  }
  SampleDump dump{provenance_json(b.config_digest, seed), family, vstack(rows)};
  require_finite(dump.samples, "samples");
  write_file_atomic(dir / ("samples_" + family + ".bin"), encode_samples(dump));
  std::ostringstream csv;
  csv << csv_comment(dump.provenance);
  for (std::size_t d = 0; d < D; ++d) csv << (d ? "," : "") << "z" << d;
  csv << "\n";
  for (std::size_t i = 0; i < dump.samples.rows(); ++i) {
    for (std::size_t d = 0; d < D; ++d) csv << (d ? "," : "") << format_double(dump.samples(i, d));
    csv << "\n";
  }
  write_file_atomic(dir / ("samples_" + family + ".csv"), csv.str());
  std::cout << "wrote " << dump.samples.rows() << " " << family << " samples to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lamward: latent action world models on synthetic sprite videos"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Common common;
  std::string data_dir, checkpoint, controller, protocol = "capacity", preset, family = "sparse";
  std::vector<std::string> checkpoints;
  std::optional<std::uint64_t> until;
  std::optional<std::size_t> runs;
  std::size_t count = 1000;
  bool no_context = false, used_only = false;

  auto* init = app.add_subcommand("init-config", "Write the default (or given) configuration as canonical JSON");
  add_common(init, common);

  auto* gen = app.add_subcommand("gen-data", "Generate train/test episode containers and a manifest");
  add_common(gen, common);

  auto* tr = app.add_subcommand("train", "Train a latent action model; resumable from a checkpoint");
  add_common(tr, common);
  tr->add_option("--data", data_dir, "Directory holding train.lweps/test.lweps (default: --out)");
  tr->add_option("--checkpoint", checkpoint, "Resume from this bundle checkpoint");
  tr->add_option("--until", until, "Stop at this step instead of train.steps");

  auto* tc = app.add_subcommand("train-controller", "Train an action-to-latent controller on a frozen bundle");
  add_common(tc, common);
  tc->add_option("--data", data_dir, "Dataset directory (default: --out)");
  tc->add_option("--checkpoint", checkpoint, "Bundle checkpoint")->required();
  tc->add_flag("--no-context", no_context, "Ignore the representation context");

  auto* ev = app.add_subcommand("eval", "Run an evaluation protocol over one or more bundles");
  add_common(ev, common);
  ev->add_option("--data", data_dir, "Dataset directory (default: --out)");
  ev->add_option("--checkpoint", checkpoints, "Bundle checkpoint (repeatable)")->required();
  ev->add_option("--protocol", protocol, "capacity | leakage | cycle")
      ->check(CLI::IsMember({"capacity", "leakage", "cycle"}));

  auto* pl = app.add_subcommand("plan", "Goal-reaching CEM planning with a trained bundle and controller");
  add_common(pl, common);
  pl->add_option("--data", data_dir, "Dataset directory (default: --out)");
  pl->add_option("--checkpoint", checkpoint, "Bundle checkpoint")->required();
  pl->add_option("--controller", controller, "Controller checkpoint");
  pl->add_option("--preset", preset, "manip | nav")->check(CLI::IsMember({"manip", "nav"}));
  pl->add_option("--runs", runs, "Number of planning runs");

  auto* sa = app.add_subcommand("sample", "Draw latents without the IDM and dump them");
  add_common(sa, common);
  sa->add_option("--data", data_dir, "Dataset directory, needed for --used-only");
  sa->add_option("--checkpoint", checkpoint, "Bundle checkpoint")->required();
  sa->add_option("--family", family, "sparse | noisy | discrete")
      ->check(CLI::IsMember({"sparse", "noisy", "discrete"}));
  sa->add_option("--count", count, "Number of samples")->check(CLI::PositiveNumber);
  sa->add_flag("--used-only", used_only, "Discrete: only sample codes the IDM uses on the training set");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) return cmd_init_config(common);
    if (gen->parsed()) return cmd_gen_data(common);
    if (tr->parsed()) return cmd_train(common, data_dir, checkpoint, until);
    if (tc->parsed()) return cmd_train_controller(common, data_dir, checkpoint, no_context);
    if (ev->parsed()) return cmd_eval(common, data_dir, checkpoints, protocol);
    if (pl->parsed()) return cmd_plan(common, data_dir, checkpoint, controller, preset, runs);
    if (sa->parsed()) return cmd_sample(common, data_dir, checkpoint, family, count, used_only);
  } catch (const std::exception& e) {
    std::cerr << "lamward: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
