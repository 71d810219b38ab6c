#include "lamward/checkpoint.hpp"

#include <sstream>

#include "lamward/binio.hpp"
#include "lamward/error.hpp"

namespace lamward {

namespace {

void write_params(BinaryWriter& w, const ParamSet& p) {
  w.u32(static_cast<std::uint32_t>(p.size()));
  for (const auto& e : p) {
    w.str(e.name);
    w.u8(e.decay ? 1 : 0);
    w.tensor(e.value);
  }
}

ParamSet read_params(BinaryReader& r) {
  ParamSet p;
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const bool decay = r.u8() != 0;
    p.add(std::move(name), r.tensor(), decay);
  }
  return p;
}

void write_tensors(BinaryWriter& w, const std::vector<Tensor>& ts) {
  w.u32(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) w.tensor(t);
}

std::vector<Tensor> read_tensors(BinaryReader& r) {
  std::vector<Tensor> ts(r.u32());
  for (auto& t : ts) t = r.tensor();
  return ts;
}

std::string encode_bundle(const ModelBundle& b) {
  BinaryWriter w;
  const ModelCfg& m = b.model;
  w.u64(m.latent_dim);
  w.u64(m.hidden);
  w.u64(m.window);
  w.u64(m.blocks);
  const RegularizerCfg& g = m.reg;
  w.str(to_string(g.kind));
  for (double v : {g.l1, g.l2, g.var, g.cov, g.mean, g.beta}) w.f64(v);
  w.u64(g.codebook_size);
  w.f64(g.commitment);
  w.u64(g.reset_period);
  w.u8(g.reset_enabled ? 1 : 0);
  w.f64(g.reset_noise);

  const TrainCfg& t = b.train;
  w.u64(t.steps);
  w.u64(t.batch);
  for (double v : {t.lr, t.weight_decay, t.warmup_frac, t.beta1, t.beta2, t.eps, t.pred_weight}) w.f64(v);
  w.u64(t.seed);

  const EncoderCfg& e = b.encoder.cfg();
  w.u64(e.repr_dim);
  w.u64(e.grid);
  w.u64(e.seed);
  w.tensor(b.encoder.weights());
  w.tensor(b.encoder.bias());

  write_params(w, b.params);

  const AdamWHyper& h = b.opt.hyper;
  w.u64(b.opt.step);
  for (double v : {h.lr, h.beta1, h.beta2, h.eps, h.weight_decay}) w.f64(v);
  write_tensors(w, b.opt.m);
  write_tensors(w, b.opt.v);

  w.u32(static_cast<std::uint32_t>(b.code_usage.size()));
  for (auto u : b.code_usage) w.u64(u);
  w.u64(b.step);
  w.u64(b.config_digest);
  return w.buffer();
}

ModelBundle decode_bundle(std::string data) {
  BinaryReader r(std::move(data));
  ModelCfg m;
  m.latent_dim = r.u64();
  m.hidden = r.u64();
  m.window = r.u64();
  m.blocks = r.u64();
  RegularizerCfg& g = m.reg;
  g.kind = parse_reg_kind(r.str());
  for (double* v : {&g.l1, &g.l2, &g.var, &g.cov, &g.mean, &g.beta}) *v = r.f64();
  g.codebook_size = r.u64();
  g.commitment = r.f64();
  g.reset_period = r.u64();
  g.reset_enabled = r.u8() != 0;
  g.reset_noise = r.f64();

  TrainCfg t;
  t.steps = r.u64();
  t.batch = r.u64();
  for (double* v : {&t.lr, &t.weight_decay, &t.warmup_frac, &t.beta1, &t.beta2, &t.eps, &t.pred_weight}) *v = r.f64();
  t.seed = r.u64();

  EncoderCfg e;
  e.repr_dim = r.u64();
  e.grid = r.u64();
  e.seed = r.u64();
  Tensor W = r.tensor();
  Tensor bias = r.tensor();

  ModelBundle b{m, t, Encoder(e, std::move(W), std::move(bias)), read_params(r), {}, {}, 0, 0};
  AdamWHyper& h = b.opt.hyper;
  b.opt.step = r.u64();
  for (double* v : {&h.lr, &h.beta1, &h.beta2, &h.eps, &h.weight_decay}) *v = r.f64();
  b.opt.m = read_tensors(r);
  b.opt.v = read_tensors(r);
  if (b.opt.m.size() != b.params.size() || b.opt.v.size() != b.params.size())
    throw FormatError("checkpoint: optimizer state does not match the parameter list");
  b.code_usage.resize(r.u32());
  for (auto& u : b.code_usage) u = r.u64();
  b.step = r.u64();
  b.config_digest = r.u64();
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes in bundle section");
  return b;
}

std::string encode_controller(const Controller& c) {
  BinaryWriter w;
  const ControllerCfg& k = c.cfg;
  for (auto v : {k.action_dim, k.latent_dim, k.repr_dim, k.embed, k.hidden}) w.u64(v);
  w.u8(k.use_context ? 1 : 0);
  w.u64(k.steps);
  w.u64(k.batch);
  for (double v : {k.lr, k.weight_decay, k.warmup_frac}) w.f64(v);
  w.u64(k.seed);
  write_params(w, c.params);
  return w.buffer();
}

Controller decode_controller(std::string data) {
  BinaryReader r(std::move(data));
  Controller c;
  ControllerCfg& k = c.cfg;
  for (std::size_t* v : {&k.action_dim, &k.latent_dim, &k.repr_dim, &k.embed, &k.hidden}) *v = r.u64();
  k.use_context = r.u8() != 0;
  k.steps = r.u64();
  k.batch = r.u64();
  for (double* v : {&k.lr, &k.weight_decay, &k.warmup_frac}) *v = r.f64();
  k.seed = r.u64();
  c.params = read_params(r);
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes in controller section");
  return c;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  BinaryWriter w;
  w.bytes({kCheckpointMagic, sizeof kCheckpointMagic});
  w.u32(kCheckpointVersion);
  w.u64(ck.digest);
  w.u32(static_cast<std::uint32_t>(ck.bundle.has_value()) + static_cast<std::uint32_t>(ck.controller.has_value()) +
        static_cast<std::uint32_t>(!ck.provenance.empty()));
  if (!ck.provenance.empty()) {
    w.str("provenance");
    w.str(ck.provenance);
  }
  if (ck.bundle) {
    w.str("bundle");
    w.str(encode_bundle(*ck.bundle));
  }
  if (ck.controller) {
    w.str("controller");
    w.str(encode_controller(*ck.controller));
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::string data) {
  BinaryReader r(std::move(data));
  if (r.bytes(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
    throw FormatError("checkpoint: bad magic (not a checkpoint file)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.digest = r.u64();
  const std::uint32_t sections = r.u32();
  for (std::uint32_t i = 0; i < sections; ++i) {
    const std::string tag = r.str();
    std::string payload = r.str();
    if (tag == "bundle")
      ck.bundle = decode_bundle(std::move(payload));
    else if (tag == "controller")
      ck.controller = decode_controller(std::move(payload));
    else if (tag == "provenance")
      ck.provenance = std::move(payload);
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

ModelBundle load_bundle(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.bundle) throw FormatError(path.string() + ": no bundle section");
  return std::move(*ck.bundle);
}

Controller load_controller(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.controller) throw FormatError(path.string() + ": no controller section");
  return std::move(*ck.controller);
}

ModelBundle resume_bundle(const std::filesystem::path& path, std::uint64_t expected) {
  ModelBundle b = load_bundle(path);
  if (b.config_digest != expected) {
    std::ostringstream os;
    os << path.string() << ": config digest mismatch (checkpoint " << std::hex << b.config_digest << ", config "
       << expected << ")";
    throw FormatError(os.str());
  }
  return b;
}

std::string loss_csv_header() { return "step,total,pred,reg,vq,dead_codes"; }

std::string loss_csv_row(const LossReport& r) {
  std::ostringstream os;
  os << r.step << ',' << format_double(r.total) << ',' << format_double(r.pred) << ',' << format_double(r.reg) << ','
     << format_double(r.vq) << ',' << r.dead_codes;
  return os.str();
}

}  // namespace lamward
