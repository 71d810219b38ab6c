#include "lamward/config.hpp"

#include <cstdio>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "lamward/binio.hpp"
#include "lamward/error.hpp"

namespace lamward {

using nlohmann::json;

namespace {

// Reads object keys into fields, rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw FormatError("config: " + where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw FormatError("config: unknown key " + where_ + "." + k);
  }
  template <class T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw FormatError("config: bad value for " + where_ + "." + key + ": " + e.what());
    }
  }
  const json* section(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json world_json(const WorldCfg& w) {
  return {{"grid", w.grid},
          {"frames", w.frames},
          {"n_sprites", w.n_sprites},
          {"action_mode", to_string(w.action_mode)},
          {"action_range", w.action_range},
          {"distractor_rate", w.distractor_rate},
          {"sprite_min", w.sprite_min},
          {"sprite_max", w.sprite_max},
          {"camera_range", w.camera_range},
          {"momentum", w.momentum}};
}

void read_world(const json& j, WorldCfg& w) {
  Reader r(j, "world");
  std::string mode = to_string(w.action_mode);
  r.get("grid", w.grid);
  r.get("frames", w.frames);
  r.get("n_sprites", w.n_sprites);
  r.get("action_mode", mode);
  r.get("action_range", w.action_range);
  r.get("distractor_rate", w.distractor_rate);
  r.get("sprite_min", w.sprite_min);
  r.get("sprite_max", w.sprite_max);
  r.get("camera_range", w.camera_range);
  r.get("momentum", w.momentum);
  w.action_mode = parse_action_mode(mode);
}

json reg_json(const RegularizerCfg& g) {
  return {{"kind", to_string(g.kind)},       {"l1", g.l1},
          {"l2", g.l2},                      {"var", g.var},
          {"cov", g.cov},                    {"mean", g.mean},
          {"beta", g.beta},                  {"codebook_size", g.codebook_size},
          {"commitment", g.commitment},      {"reset_period", g.reset_period},
          {"reset_enabled", g.reset_enabled}, {"reset_noise", g.reset_noise}};
}

void read_reg(const json& j, RegularizerCfg& g) {
  Reader r(j, "model.reg");
  std::string kind = to_string(g.kind);
  r.get("kind", kind);
  r.get("l1", g.l1);
  r.get("l2", g.l2);
  r.get("var", g.var);
  r.get("cov", g.cov);
  r.get("mean", g.mean);
  r.get("beta", g.beta);
  r.get("codebook_size", g.codebook_size);
  r.get("commitment", g.commitment);
  r.get("reset_period", g.reset_period);
  r.get("reset_enabled", g.reset_enabled);
  r.get("reset_noise", g.reset_noise);
  g.kind = parse_reg_kind(kind);
}

json train_json(const TrainCfg& t) {
  return {{"steps", t.steps}, {"batch", t.batch},   {"lr", t.lr},       {"weight_decay", t.weight_decay},
          {"warmup_frac", t.warmup_frac}, {"beta1", t.beta1}, {"beta2", t.beta2}, {"eps", t.eps},
          {"pred_weight", t.pred_weight}, {"seed", t.seed}};
}

void read_train(const json& j, TrainCfg& t) {
  Reader r(j, "train");
  r.get("steps", t.steps);
  r.get("batch", t.batch);
  r.get("lr", t.lr);
  r.get("weight_decay", t.weight_decay);
  r.get("warmup_frac", t.warmup_frac);
  r.get("beta1", t.beta1);
  r.get("beta2", t.beta2);
  r.get("eps", t.eps);
  r.get("pred_weight", t.pred_weight);
  r.get("seed", t.seed);
}

json to_json_tree(const RunConfig& c) {
  json j;
  j["world"] = world_json(c.world);
  j["encoder"] = {{"repr_dim", c.encoder.repr_dim}, {"grid", c.encoder.grid}, {"seed", c.encoder.seed}};
  j["data"] = {{"train_episodes", c.data.train_episodes}, {"test_episodes", c.data.test_episodes},
               {"seed", c.data.seed}};
  j["model"] = {{"latent_dim", c.model.latent_dim}, {"hidden", c.model.hidden}, {"window", c.model.window},
                {"blocks", c.model.blocks},         {"reg", reg_json(c.model.reg)}};
  j["train"] = train_json(c.train);
  j["init_seed"] = c.init_seed;
  const ControllerCfg& k = c.controller;
  j["controller"] = {{"embed", k.embed}, {"hidden", k.hidden}, {"use_context", k.use_context},
                     {"steps", k.steps}, {"batch", k.batch},   {"lr", k.lr},
                     {"weight_decay", k.weight_decay}, {"warmup_frac", k.warmup_frac}, {"seed", k.seed}};
  const CemCfg& p = c.cem;
  j["plan"] = {{"samples", p.samples},       {"elites", p.elites},
               {"iterations", p.iterations}, {"horizon", p.horizon},
               {"init_mean", p.init_mean},   {"init_std", p.init_std},
               {"action_low", p.action_low}, {"action_high", p.action_high},
               {"std_floor", p.std_floor},   {"straight_line", p.straight_line},
               {"keep_elites", p.keep_elites}, {"runs", c.plan_runs}};
  j["eval"] = {{"ctx", c.eval.ctx}, {"cut", c.eval.cut}, {"pairs", c.eval.pairs}, {"horizon", c.eval.horizon},
               {"seed", c.eval.seed}};
  const SgldCfg& s = c.sgld;
  j["sample"] = {{"step_size", s.step_size},   {"steps", s.steps},
                 {"burn_in_frac", s.burn_in_frac}, {"thin", s.thin},
                 {"init", s.init == SgldInit::normal ? "normal" : "uniform"},
                 {"init_box", s.init_box},     {"divergence_bound", s.divergence_bound},
                 {"inject_noise", s.inject_noise}};
  j["out"] = c.out;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  world.validate();
  model.reg.validate();
  if (encoder.grid != world.grid) throw std::invalid_argument("config: encoder.grid must equal world.grid");
  if (model.window < 1 || model.latent_dim < 1 || model.hidden < 1)
    throw std::invalid_argument("config: model sizes must be positive");
  if (train.batch < 1) throw std::invalid_argument("config: train.batch must be positive");
  if (data.train_episodes < 1) throw std::invalid_argument("config: need at least one training episode");
  if (eval.ctx < 1 || eval.ctx >= world.frames) throw std::invalid_argument("config: eval.ctx must lie in [1, frames)");
  if (eval.cut >= world.frames) throw std::invalid_argument("config: eval.cut must be below frames");
  cem.validate();
  sgld.validate();
}

bool RunConfig::operator==(const RunConfig& o) const { return config_to_text(*this) == config_to_text(o); }

std::string config_to_text(const RunConfig& cfg) { return to_json_tree(cfg).dump(2) + "\n"; }

RunConfig config_from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  RunConfig c;
  {
    Reader top(j, "config");
    if (const json* s = top.section("world")) read_world(*s, c.world);
    if (const json* s = top.section("encoder")) {
      Reader r(*s, "encoder");
      r.get("repr_dim", c.encoder.repr_dim);
      r.get("grid", c.encoder.grid);
      r.get("seed", c.encoder.seed);
    }
    if (const json* s = top.section("data")) {
      Reader r(*s, "data");
      r.get("train_episodes", c.data.train_episodes);
      r.get("test_episodes", c.data.test_episodes);
      r.get("seed", c.data.seed);
    }
    if (const json* s = top.section("model")) {
      Reader r(*s, "model");
      r.get("latent_dim", c.model.latent_dim);
      r.get("hidden", c.model.hidden);
      r.get("window", c.model.window);
      r.get("blocks", c.model.blocks);
      if (const json* g = r.section("reg")) read_reg(*g, c.model.reg);
    }
    if (const json* s = top.section("train")) read_train(*s, c.train);
    top.get("init_seed", c.init_seed);
    if (const json* s = top.section("controller")) {
      Reader r(*s, "controller");
      ControllerCfg& k = c.controller;
      r.get("embed", k.embed);
      r.get("hidden", k.hidden);
      r.get("use_context", k.use_context);
      r.get("steps", k.steps);
      r.get("batch", k.batch);
      r.get("lr", k.lr);
      r.get("weight_decay", k.weight_decay);
      r.get("warmup_frac", k.warmup_frac);
      r.get("seed", k.seed);
    }
    if (const json* s = top.section("plan")) {
      Reader r(*s, "plan");
      CemCfg& p = c.cem;
      r.get("samples", p.samples);
      r.get("elites", p.elites);
      r.get("iterations", p.iterations);
      r.get("horizon", p.horizon);
      r.get("init_mean", p.init_mean);
      r.get("init_std", p.init_std);
      r.get("action_low", p.action_low);
      r.get("action_high", p.action_high);
      r.get("std_floor", p.std_floor);
      r.get("straight_line", p.straight_line);
      r.get("keep_elites", p.keep_elites);
      r.get("runs", c.plan_runs);
    }
    if (const json* s = top.section("eval")) {
      Reader r(*s, "eval");
      r.get("ctx", c.eval.ctx);
      r.get("cut", c.eval.cut);
      r.get("pairs", c.eval.pairs);
      r.get("horizon", c.eval.horizon);
      r.get("seed", c.eval.seed);
    }
    if (const json* s = top.section("sample")) {
      Reader r(*s, "sample");
      SgldCfg& g = c.sgld;
      std::string init = g.init == SgldInit::normal ? "normal" : "uniform";
      r.get("step_size", g.step_size);
      r.get("steps", g.steps);
      r.get("burn_in_frac", g.burn_in_frac);
      r.get("thin", g.thin);
      r.get("init", init);
      r.get("init_box", g.init_box);
      r.get("divergence_bound", g.divergence_bound);
      r.get("inject_noise", g.inject_noise);
      if (init == "normal")
        g.init = SgldInit::normal;
      else if (init == "uniform")
        g.init = SgldInit::uniform;
      else
        throw FormatError("config: sample.init must be normal or uniform");
    }
    top.get("out", c.out);
  }
  c.controller.action_dim = c.world.action_dim();
  c.controller.latent_dim = c.model.latent_dim;
  c.controller.repr_dim = c.encoder.repr_dim;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_text(read_file(path)); }

std::uint64_t config_digest(const RunConfig& cfg) { return fnv1a64(config_to_text(cfg)); }

std::uint64_t training_digest(const RunConfig& cfg) {
  json full = to_json_tree(cfg);
  json j;
  for (const char* k : {"world", "encoder", "data", "model", "train", "init_seed"}) j[k] = full[k];
  return fnv1a64(j.dump());
}

std::string digest_hex(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

std::string provenance_json(std::uint64_t digest, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["config_digest"] = digest_hex(digest);
  j["seed"] = seed;
  return j.dump();
}

}  // namespace lamward
