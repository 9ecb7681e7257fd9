#include "cda/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace cda {

Variant variant_from_name(const std::string& name) {
  if (name == "linear-full-update") return Variant::LinearFullUpdate;
  if (name == "linear") return Variant::Linear;
  if (name == "cos") return Variant::Cos;
  if (name == "cos+der") return Variant::CosDer;
  if (name == "cos+ns") return Variant::CosNs;
  if (name == "cos+der+ns") return Variant::CosDerNs;
  if (name == "retrain-upperbound") return Variant::RetrainUpperbound;
  throw std::invalid_argument("unknown variant: " + name);
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::LinearFullUpdate: return "linear-full-update";
    case Variant::Linear: return "linear";
    case Variant::Cos: return "cos";
    case Variant::CosDer: return "cos+der";
    case Variant::CosNs: return "cos+ns";
    case Variant::CosDerNs: return "cos+der+ns";
    case Variant::RetrainUpperbound: return "retrain-upperbound";
  }
  return "?";
}

ScoreMode variant_mode(Variant v) {
  return (v == Variant::LinearFullUpdate || v == Variant::Linear) ? ScoreMode::LinearDot
                                                                  : ScoreMode::Cosine;
}

bool variant_uses_store(Variant v) {
  return v == Variant::CosNs || v == Variant::CosDerNs;
}

AdaptationConfig variant_config(const AdaptationConfig& base, Variant v) {
  AdaptationConfig c = base;
  c.full_update = v == Variant::LinearFullUpdate;
  c.use_der = v == Variant::CosDer || v == Variant::CosDerNs;
  c.use_exemplars = variant_uses_store(v);
  return c;
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> k = {
      Variant::LinearFullUpdate, Variant::Linear,   Variant::Cos,
      Variant::CosDer,           Variant::CosNs,    Variant::CosDerNs,
      Variant::RetrainUpperbound};
  return k;
}

void RunResult::append(RunResult other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  timings.insert(timings.end(), other.timings.begin(), other.timings.end());
}

namespace {

std::string fmt_acc(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string fmt_value(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

std::string metrics_csv(const std::vector<ReportRow>& rows) {
  std::string out =
      "variant,study,param,value,step,domain,new_domain_acc,accumulated_new_acc,all_domain_acc\n";
  for (const auto& r : rows) {
    out += r.variant + "," + r.study + "," + r.param + "," + r.value + "," +
           std::to_string(r.step) + "," + r.domain + "," + fmt_acc(r.new_domain_acc) + "," +
           fmt_acc(r.accumulated_new_acc) + "," + fmt_acc(r.all_domain_acc) + "\n";
  }
  return out;
}

std::string timings_csv(const std::vector<TimingRow>& rows) {
  std::string out = "variant,study,param,value,step,seconds\n";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", r.seconds);
    out += r.variant + "," + r.study + "," + r.param + "," + r.value + "," +
           std::to_string(r.step) + "," + buf + "\n";
  }
  return out;
}

std::vector<int> order_incremental(const Corpus& corpus, std::vector<int> ids,
                                   const std::string& order, std::uint64_t seed) {
  if (order == "random") {
    Rng rng = make_rng(seed, 0x0DD);
    std::shuffle(ids.begin(), ids.end(), rng);
    return ids;
  }
  auto size_of = [&](int d) { return corpus.domains[static_cast<std::size_t>(d)].total(); };
  if (order == "decreasing") {
    std::stable_sort(ids.begin(), ids.end(),
                     [&](int a, int b) { return size_of(a) > size_of(b); });
    return ids;
  }
  if (order == "increasing") {
    std::stable_sort(ids.begin(), ids.end(),
                     [&](int a, int b) { return size_of(a) < size_of(b); });
    return ids;
  }
  throw std::invalid_argument("unknown order: " + order);
}

ExperimentContext make_context(const ExperimentPlan& plan) {
  plan.validate();
  ExperimentContext ctx;
  ctx.plan = plan;
  ctx.corpus = generate_corpus(plan.gen);
  for (std::size_t i = 0; i < plan.initial_domains; ++i)
    ctx.initial_ids.push_back(static_cast<int>(i));
  std::vector<int> inc;
  for (std::size_t i = 0; i < plan.incremental_domains; ++i)
    inc.push_back(static_cast<int>(plan.initial_domains + i));
  ctx.incremental_ids = order_incremental(ctx.corpus, std::move(inc), plan.order, plan.seed);
  return ctx;
}

const Model& ExperimentContext::base(ScoreMode mode) {
  auto& slot = mode == ScoreMode::Cosine ? base_cos_ : base_linear_;
  if (!slot) slot = train_initial(corpus, initial_ids, plan.dims, mode, plan.train);
  return *slot;
}

RunResult run_adaptive(ExperimentContext& ctx, Variant v, const AdaptationConfig& cfg,
                       const std::string& study, const std::string& param,
                       const std::string& value) {
  RunResult out;
  Model model = ctx.base(variant_mode(v));
  model.config_hash = ctx.plan.hash();
  EncodingCache cache(ctx.corpus);
  std::optional<ExemplarStore> store;
  if (cfg.use_exemplars) store.emplace();

  for (std::size_t m = 0; m < ctx.incremental_ids.size(); ++m) {
    MetricsRecord rec =
        adapt_domain(model, ctx.corpus, ctx.incremental_ids[m], store ? &*store : nullptr, cfg,
                     cache, m + 1, ctx.plan.initial_domains);
    out.rows.push_back({variant_name(v), study, param, value, rec.step, rec.domain,
                        rec.new_domain_acc, rec.accumulated_new_acc, rec.all_domain_acc});
    out.timings.push_back(
        {variant_name(v), study, param, value, rec.step, rec.train_seconds});
  }
  return out;
}

RunResult run_retrain_upperbound(ExperimentContext& ctx, const std::string& study) {
  RunResult out;
  std::vector<int> so_far = ctx.initial_ids;
  for (std::size_t m = 0; m < ctx.incremental_ids.size(); ++m) {
    const int new_domain = ctx.incremental_ids[m];
    so_far.push_back(new_domain);

    const auto t0 = std::chrono::steady_clock::now();
    Model rm = retrain_full(ctx.corpus, so_far, ctx.plan.dims, ScoreMode::Cosine, ctx.plan.train,
                            m + 1);
    const auto t1 = std::chrono::steady_clock::now();

    EncodingCache cache(ctx.corpus);
    std::vector<int> added(ctx.incremental_ids.begin(),
                           ctx.incremental_ids.begin() + static_cast<std::ptrdiff_t>(m + 1));
    ReportRow row{variant_name(Variant::RetrainUpperbound),
                  study,
                  "",
                  "",
                  m + 1,
                  ctx.corpus.domains[static_cast<std::size_t>(new_domain)].name,
                  evaluate(rm, ctx.corpus, {new_domain}, Split::Test, cache),
                  evaluate(rm, ctx.corpus, added, Split::Test, cache),
                  evaluate(rm, ctx.corpus, so_far, Split::Test, cache)};
    out.rows.push_back(row);
    out.timings.push_back({variant_name(Variant::RetrainUpperbound), study, "", "", m + 1,
                           std::chrono::duration<double>(t1 - t0).count()});
  }
  return out;
}

RunResult run_benchmark(const ExperimentPlan& plan) {
  ExperimentContext ctx = make_context(plan);
  std::vector<Variant> variants;
  if (plan.variant == "all")
    variants = all_variants();
  else
    variants.push_back(variant_from_name(plan.variant));

  RunResult out;
  for (Variant v : variants) {
    if (v == Variant::RetrainUpperbound)
      out.append(run_retrain_upperbound(ctx));
    else
      out.append(run_adaptive(ctx, v, variant_config(plan.train, v)));
  }
  return out;
}

RunResult sweep_hinge(const ExperimentPlan& plan, const std::vector<double>& delta_pos,
                      const std::vector<double>& delta_neg) {
  ExperimentContext ctx = make_context(plan);
  RunResult out;
  const Variant v = Variant::CosDerNs;
  for (double dp : delta_pos) {
    AdaptationConfig cfg = variant_config(plan.train, v);
    cfg.hinge.delta_pos = dp;
    try {
      cfg.hinge.validate();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "sweep-hinge: skipping delta_pos=%g (%s)\n", dp, e.what());
      continue;
    }
    out.append(run_adaptive(ctx, v, cfg, "hinge_sweep", "delta_pos", fmt_value(dp)));
  }
  for (double dn : delta_neg) {
    AdaptationConfig cfg = variant_config(plan.train, v);
    cfg.hinge.delta_neg = dn;
    try {
      cfg.hinge.validate();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "sweep-hinge: skipping delta_neg=%g (%s)\n", dn, e.what());
      continue;
    }
    out.append(run_adaptive(ctx, v, cfg, "hinge_sweep", "delta_neg", fmt_value(dn)));
  }
  return out;
}

RunResult sweep_der(const ExperimentPlan& plan, const std::vector<double>& delta_der) {
  ExperimentContext ctx = make_context(plan);
  RunResult out;
  for (double dd : delta_der) {
    AdaptationConfig cfg = variant_config(plan.train, Variant::CosDerNs);
    cfg.delta_der = dd;
    out.append(run_adaptive(ctx, Variant::CosDerNs, cfg, "der_sweep", "delta_der", fmt_value(dd)));
  }
  return out;
}

const std::vector<std::string>& study_names() {
  static const std::vector<std::string> k = {"order",         "plain-lambda", "downsample",
                                             "initial-count", "long-run",     "cos-vs-linear"};
  return k;
}

namespace {

RunResult study_order(const ExperimentPlan& plan) {
  ExperimentContext ctx = make_context(plan);
  RunResult out;
  std::vector<int> window = ctx.incremental_ids;
  std::sort(window.begin(), window.end());
  for (const char* order : {"random", "decreasing", "increasing"}) {
    ctx.incremental_ids = order_incremental(ctx.corpus, window, order, plan.seed);
    AdaptationConfig cfg = variant_config(plan.train, Variant::CosDerNs);
    out.append(run_adaptive(ctx, Variant::CosDerNs, cfg, "order", "order", order));
  }
  return out;
}

RunResult study_plain_lambda(const ExperimentPlan& plan) {
  ExperimentContext ctx = make_context(plan);
  RunResult out;
  for (bool plain : {false, true}) {
    AdaptationConfig cfg = variant_config(plan.train, Variant::CosDerNs);
    cfg.plain_lambda = plain;
    out.append(run_adaptive(ctx, Variant::CosDerNs, cfg, "plain_lambda", "lambda",
                            plain ? "plain" : "weighted"));
  }
  return out;
}

RunResult study_downsample(const ExperimentPlan& plan) {
  ExperimentContext ctx = make_context(plan);
  RunResult out;
  for (bool down : {true, false}) {
    AdaptationConfig cfg = variant_config(plan.train, Variant::CosDerNs);
    cfg.downsample_exemplars = down;
    out.append(run_adaptive(ctx, Variant::CosDerNs, cfg, "downsample", "downsample",
                            down ? "on" : "off"));
  }
  return out;
}

RunResult study_initial_count(const ExperimentPlan& plan) {
  RunResult out;
  for (std::size_t n : {std::size_t{10}, std::size_t{20}, plan.initial_domains}) {
    if (n > plan.initial_domains) continue;
    ExperimentPlan p = plan;
    p.initial_domains = n;
    ExperimentContext ctx = make_context(p);
    // Keep the adaptation window fixed so runs differ only in initial count.
    ctx.incremental_ids.clear();
    for (std::size_t i = 0; i < plan.incremental_domains; ++i)
      ctx.incremental_ids.push_back(static_cast<int>(plan.initial_domains + i));
    ctx.incremental_ids =
        order_incremental(ctx.corpus, ctx.incremental_ids, plan.order, plan.seed);
    AdaptationConfig cfg = variant_config(plan.train, Variant::CosDerNs);
    out.append(run_adaptive(ctx, Variant::CosDerNs, cfg, "initial_count", "initial_count",
                            std::to_string(n)));
  }
  return out;
}

RunResult study_long_run(const ExperimentPlan& plan) {
  // Many more additions than initial domains: the forgetting-over-time probe.
  ExperimentPlan p = plan;
  p.initial_domains = 10;
  p.incremental_domains = std::min<std::size_t>(30, p.gen.domain_count - p.initial_domains);
  ExperimentContext ctx = make_context(p);
  AdaptationConfig cfg = variant_config(p.train, Variant::CosDerNs);
  return run_adaptive(ctx, Variant::CosDerNs, cfg, "long_run", "", "");
}

RunResult study_cos_vs_linear(const ExperimentPlan& plan) {
  RunResult out;
  for (std::size_t n : {std::size_t{10}, std::size_t{20}, plan.initial_domains}) {
    if (n > plan.initial_domains) continue;
    ExperimentPlan p = plan;
    p.initial_domains = n;
    ExperimentContext ctx = make_context(p);
    for (ScoreMode mode : {ScoreMode::Cosine, ScoreMode::LinearDot}) {
      const auto t0 = std::chrono::steady_clock::now();
      const Model& m = ctx.base(mode);
      const auto t1 = std::chrono::steady_clock::now();
      EncodingCache cache(ctx.corpus);
      double acc = evaluate(m, ctx.corpus, ctx.initial_ids, Split::Test, cache);
      out.rows.push_back({score_mode_name(mode), "initial_mode", "initial_count",
                          std::to_string(n), 0, "", 0.0, 0.0, acc});
      out.timings.push_back({score_mode_name(mode), "initial_mode", "initial_count",
                             std::to_string(n), 0,
                             std::chrono::duration<double>(t1 - t0).count()});
    }
  }
  return out;
}

}  // namespace

RunResult run_study(const std::string& name, const ExperimentPlan& plan) {
  if (name == "order") return study_order(plan);
  if (name == "plain-lambda") return study_plain_lambda(plan);
  if (name == "downsample") return study_downsample(plan);
  if (name == "initial-count") return study_initial_count(plan);
  if (name == "long-run") return study_long_run(plan);
  if (name == "cos-vs-linear") return study_cos_vs_linear(plan);
  throw std::invalid_argument("unknown study: " + name);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> rx = ranks(x), ry = ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace cda
