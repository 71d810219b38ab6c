#include "lamward/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lamward/binio.hpp"
#include "lamward/error.hpp"
#include "lamward/kernels.hpp"

namespace lamward {

double EvalRow::metric(std::string_view name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw std::out_of_range("no metric named " + std::string(name));
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Tensor idm_latents(const Tensor& reprs, const ModelBundle& b) {
  const std::size_t T = reprs.rows();
  return idm_infer(reprs.rows_slice(0, T - 1), reprs.rows_slice(1, T - 1), b).z;
}

RolloutOptions given_opts(const Tensor& z, std::size_t horizon) {
  RolloutOptions o;
  o.given = &z;
  if (horizon > 0) o.horizon = horizon;
  return o;
}

void require_sequences(const std::vector<Tensor>& reprs, std::size_t min_len, const char* what) {
  if (reprs.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
  for (const auto& r : reprs)
    if (r.rows() < min_len) throw ShapeError(std::string(what) + ": sequences too short");
}

}  // namespace

double one_step_error(const Tensor& reprs, const ModelBundle& b) {
  const std::size_t T = reprs.rows();
  if (T < 2) throw ShapeError("one_step_error: need at least two frames");
  const Tensor pred = forward_predict(reprs.rows_slice(0, T - 1), idm_latents(reprs, b), b);
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < T; ++t) s += l1_mean_distance(pred.row(t), reprs.row(t + 1));
  return s / static_cast<double>(T - 1);
}

EvalReport eval_capacity(const std::vector<const ModelBundle*>& bundles, const std::vector<Tensor>& reprs,
                         const EvalOptions& opts) {
  if (bundles.empty()) throw std::invalid_argument("eval_capacity: no bundles");
  require_sequences(reprs, opts.ctx + 1, "eval_capacity");
  for (const auto* b : bundles)
    if (!(b->encoder == bundles.front()->encoder))
      throw std::invalid_argument("eval_capacity: bundles were trained on different encoders");

  std::vector<std::size_t> order(bundles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return regularization_rank(bundles[x]->model.reg) < regularization_rank(bundles[y]->model.reg);
  });

  EvalReport rep;
  rep.protocol = "capacity";
  rep.seeds = {opts.seed};
  PlotSeries summary{"rollout_error_by_rank", "rank", "rollout_error", {}, {}};
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ModelBundle& b = *bundles[order[rank]];
    const std::size_t n = reprs.size();
    std::vector<double> one(n), roll(n);
    std::vector<std::vector<double>> steps(n);
    kernels::parallel_for(n, [&](std::size_t i) {
      one[i] = one_step_error(reprs[i], b);
      RolloutOptions o;
      if (opts.horizon > 0) o.horizon = opts.horizon;
      RolloutResult r = rollout(reprs[i], b, opts.ctx, LatentSource::idm, o);
      roll[i] = r.mean_error();
      steps[i] = std::move(r.errors);
    });
    EvalRow row;
    row.config_digest = b.config_digest;
    row.label = b.model.reg.label();
    row.metrics = {{"one_step_error", mean_of(one)}, {"rollout_error", mean_of(roll)},
                   {"episodes", static_cast<double>(n)}};
    rep.rows.push_back(row);
    summary.x.push_back(static_cast<double>(rank));
    summary.y.push_back(mean_of(roll));

    PlotSeries curve{row.label, "step", "rollout_error", {}, {}};
    for (std::size_t k = 0;; ++k) {
      std::vector<double> at;
      for (const auto& s : steps)
        if (k < s.size()) at.push_back(s[k]);
      if (at.empty()) break;
      curve.x.push_back(static_cast<double>(opts.ctx + k));
      curve.y.push_back(mean_of(at));
    }
    rep.plots.push_back(std::move(curve));
  }
  rep.plots.insert(rep.plots.begin(), std::move(summary));
  return rep;
}

LeakagePair leakage_pair(const Tensor& a, const Tensor& b, const ModelBundle& bundle, std::size_t cut) {
  const std::size_t T = a.rows();
  if (b.rows() != T || b.cols() != a.cols()) throw ShapeError("leakage_pair: sequences differ in shape");
  if (cut < 1 || cut >= T) throw std::invalid_argument("leakage_pair: cut must lie in [1, T)");
  auto err_at_cut = [&](const Tensor& seq) {
    const Tensor prefix = seq.rows_slice(0, cut + 1);
    const Tensor pred = forward_predict(prefix.rows_slice(0, cut), idm_latents(prefix, bundle), bundle);
    return l1_mean_distance(pred.row(cut - 1), seq.row(cut));
  };
  Tensor stitched = a;
  for (std::size_t t = cut; t < T; ++t) std::copy(b.row(t).begin(), b.row(t).end(), stitched.row(t).begin());
  LeakagePair p;
  p.original = err_at_cut(a);
  p.stitched = err_at_cut(stitched);
  return p;
}

std::vector<std::pair<std::size_t, std::size_t>> eval_pairs(std::size_t n_items, std::size_t n_pairs,
                                                             std::uint64_t seed) {
  if (n_items == 0) throw std::invalid_argument("eval_pairs: empty dataset");
  Rng rng(seed, "eval-pairs");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t a = rng.below(n_items);
    std::size_t b = a;
    if (n_items > 1) b = (a + 1 + rng.below(n_items - 1)) % n_items;
    out.emplace_back(a, b);
  }
  return out;
}

EvalReport eval_leakage(const ModelBundle& b, const std::vector<Tensor>& reprs, const EvalOptions& opts) {
  require_sequences(reprs, 2, "eval_leakage");
  const std::size_t T = reprs.front().rows();
  const std::size_t cut = opts.cut == 0 ? T / 2 : opts.cut;
  const auto pairs = eval_pairs(reprs.size(), opts.pairs, opts.seed);
  std::vector<LeakagePair> res(pairs.size());
  kernels::parallel_for(pairs.size(), [&](std::size_t i) {
    res[i] = leakage_pair(reprs[pairs[i].first], reprs[pairs[i].second], b, cut);
    res[i].a = pairs[i].first;
    res[i].b = pairs[i].second;
  });
  std::vector<double> orig, st;
  PlotSeries scatter{"pairs", "original_error", "stitched_error", {}, {}};
  for (const auto& p : res) {
    orig.push_back(p.original);
    st.push_back(p.stitched);
    scatter.x.push_back(p.original);
    scatter.y.push_back(p.stitched);
  }
  EvalReport rep;
  rep.protocol = "leakage";
  rep.seeds = {opts.seed};
  EvalRow row;
  row.config_digest = b.config_digest;
  row.label = b.model.reg.label();
  const double mo = mean_of(orig), ms = mean_of(st);
  row.metrics = {{"original_error", mo},
                 {"stitched_error", ms},
                 {"ratio", mo > 0.0 ? ms / mo : std::numeric_limits<double>::infinity()},
                 {"pairs", static_cast<double>(res.size())},
                 {"cut", static_cast<double>(cut)}};
  rep.rows.push_back(row);
  rep.plots.push_back(std::move(scatter));
  return rep;
}

CyclePair cycle_pair(const Tensor& a, const Tensor& b, const ModelBundle& bundle, std::size_t ctx,
                     std::size_t horizon) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("cycle_pair: sequences differ in shape");
  const Tensor z1 = idm_latents(a, bundle);
  CyclePair p;
  p.original = rollout(a, bundle, ctx, LatentSource::given, given_opts(z1, horizon)).mean_error();
  const Tensor b_hat = rollout(b, bundle, ctx, LatentSource::given, given_opts(z1, horizon)).predicted;
  const Tensor z2 = idm_latents(b_hat, bundle);
  p.cycle = rollout(a, bundle, ctx, LatentSource::given, given_opts(z2, horizon)).mean_error();
  return p;
}

EvalReport eval_cycle(const ModelBundle& b, const std::vector<Tensor>& reprs, const EvalOptions& opts) {
  require_sequences(reprs, opts.ctx + 1, "eval_cycle");
  const auto pairs = eval_pairs(reprs.size(), opts.pairs, opts.seed);
  std::vector<CyclePair> res(pairs.size());
  kernels::parallel_for(pairs.size(), [&](std::size_t i) {
    res[i] = cycle_pair(reprs[pairs[i].first], reprs[pairs[i].second], b, opts.ctx, opts.horizon);
    res[i].a = pairs[i].first;
    res[i].b = pairs[i].second;
  });
  std::vector<double> orig, cyc;
  PlotSeries scatter{"pairs", "original_error", "cycle_error", {}, {}};
  for (const auto& p : res) {
    orig.push_back(p.original);
    cyc.push_back(p.cycle);
    scatter.x.push_back(p.original);
    scatter.y.push_back(p.cycle);
  }
  EvalReport rep;
  rep.protocol = "cycle";
  rep.seeds = {opts.seed};
  EvalRow row;
  row.config_digest = b.config_digest;
  row.label = b.model.reg.label();
  const double mo = mean_of(orig), mc = mean_of(cyc);
  row.metrics = {{"original_error", mo},
                 {"cycle_error", mc},
                 {"ratio", mo > 0.0 ? mc / mo : std::numeric_limits<double>::infinity()},
                 {"pairs", static_cast<double>(res.size())}};
  rep.rows.push_back(row);
  rep.plots.push_back(std::move(scatter));
  return rep;
}

double z_sensitivity(const ModelBundle& b, const std::vector<Tensor>& reprs) {
  require_sequences(reprs, 2, "z_sensitivity");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : reprs) {
    const Tensor inputs = r.rows_slice(0, r.rows() - 1);
    const Tensor z = idm_latents(r, b);
    const Tensor with = forward_predict(inputs, z, b);
    const Tensor without = forward_predict(inputs, Tensor(z.rows(), z.cols()), b);
    for (std::size_t i = 0; i < with.size(); ++i) total += std::abs(with[i] - without[i]);
    count += with.size();
  }
  return total / static_cast<double>(count);
}

std::string report_json(const EvalReport& r, const std::string& provenance_json) {
  nlohmann::ordered_json j;
  j["provenance"] = nlohmann::ordered_json::parse(provenance_json);
  j["protocol"] = r.protocol;
  j["seeds"] = r.seeds;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json m;
    for (const auto& [k, v] : row.metrics) m[k] = v;
    rows.push_back({{"config_digest", row.config_digest}, {"label", row.label}, {"metrics", m}});
  }
  auto& plots = j["plots"] = nlohmann::ordered_json::array();
  for (const auto& p : r.plots)
    plots.push_back({{"label", p.label}, {"x_name", p.x_name}, {"y_name", p.y_name}, {"x", p.x}, {"y", p.y}});
  return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "protocol,config_digest,label";
  std::vector<std::string> names;
  for (const auto& row : r.rows)
    for (const auto& m : row.metrics)
      if (std::find(names.begin(), names.end(), m.first) == names.end()) names.push_back(m.first);
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (const auto& row : r.rows) {
    os << r.protocol << ',' << row.config_digest << ",\"" << row.label << '"';
    for (const auto& n : names) {
      os << ',';
      for (const auto& [k, v] : row.metrics)
        if (k == n) os << format_double(v);
    }
    os << '\n';
  }
  return os.str();
}

std::string plot_data_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "label,x_name,y_name,x,y\n";
  for (const auto& p : r.plots)
    for (std::size_t i = 0; i < p.x.size(); ++i)
      os << '"' << p.label << "\"," << p.x_name << ',' << p.y_name << ',' << format_double(p.x[i]) << ','
         << format_double(p.y[i]) << '\n';
  return os.str();
}

}  // namespace lamward
