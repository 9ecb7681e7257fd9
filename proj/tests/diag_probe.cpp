// Ad-hoc diagnostics: row norms and error attribution after an adaptation run.
#include <cstdio>
#include <cstring>
#include <vector>

#include "cda/experiment.hpp"

using namespace cda;

int main(int argc, char** argv) {
  ExperimentPlan plan;
  plan.initial_domains = 20;
  plan.incremental_domains = 10;
  plan.gen.domain_count = 45;
  plan.gen.utterances_per_domain = 150;
  for (int i = 1; i + 1 < argc; i += 2) {
    std::string k = argv[i];
    double v = std::atof(argv[i + 1]);
    if (k == "distractors") plan.gen.distractor_rate = v;
    else if (k == "similar") plan.gen.similar_pair_fraction = v;
    else if (k == "lambda_dsl") plan.train.lambda_dsl = v;
    else if (k == "lambda_norm") plan.train.lambda_norm = v;
    else if (k == "adapt_lr") plan.train.adapt_lr = v;
    else if (k == "adapt_epochs") plan.train.adapt_epochs = static_cast<std::size_t>(v);
    else if (k == "initial") plan.initial_domains = static_cast<std::size_t>(v);
    else if (k == "inc") plan.incremental_domains = static_cast<std::size_t>(v);
    else { std::fprintf(stderr, "unknown knob %s\n", k.c_str()); return 1; }
  }
  plan.gen.seed = plan.seed;
  plan.train.seed = plan.seed;

  ExperimentContext ctx = make_context(plan);

  for (Variant v : {Variant::Cos, Variant::CosNs, Variant::CosDer, Variant::CosDerNs}) {
    AdaptationConfig cfg = variant_config(plan.train, v);
    Model model = ctx.base(ScoreMode::Cosine);
    EncodingCache cache(ctx.corpus);
    std::optional<ExemplarStore> store;
    if (cfg.use_exemplars) store.emplace();
    double mean_new = 0;
    MetricsRecord last;
    for (std::size_t m = 0; m < ctx.incremental_ids.size(); ++m) {
      last = adapt_domain(model, ctx.corpus, ctx.incremental_ids[m], store ? &*store : nullptr,
                          cfg, cache, m + 1, plan.initial_domains);
      mean_new += last.new_domain_acc / ctx.incremental_ids.size();
    }

    // row norms: old vs new
    double t_old = 0, t_new = 0, w_old = 0, w_new = 0;
    const std::size_t K = model.domain_count(), K0 = plan.initial_domains;
    for (std::size_t i = 0; i < K; ++i) {
      double tn = l2norm(model.params[model.table.rows[i]].value.v);
      double wn = l2norm(model.params[model.pred.rows[i]].value.v);
      if (i < K0) { t_old += tn / K0; w_old += wn / K0; }
      else { t_new += tn / (K - K0); w_new += wn / (K - K0); }
    }

    // error attribution on initial-domain test samples
    auto id_map = corpus_to_model_ids(model, ctx.corpus);
    Forward fwd(model);
    std::size_t err_with_new_enabled = 0, err_other = 0, total = 0, with_new = 0;
    std::size_t pred_is_new = 0;
    for (std::size_t d = 0; d < plan.initial_domains; ++d) {
      const auto& dd = ctx.corpus.domains[d];
      for (std::size_t i = 0; i < dd.test.size(); ++i) {
        ModelInput in = to_model_input(model, dd.test[i], id_map);
        bool has_new = false;
        for (int e : in.enabled) if (e >= static_cast<int>(K0)) has_new = true;
        with_new += has_new;
        const auto& u = cache.get(fwd, model, static_cast<int>(d), Split::Test, i);
        std::size_t pred = fwd.predict(u, in.enabled);
        ++total;
        if (pred != static_cast<std::size_t>(in.truth)) {
          (has_new ? err_with_new_enabled : err_other) += 1;
          if (pred >= K0) ++pred_is_new;
        }
      }
    }
    std::printf(
        "%-12s mean_new=%.3f final_all=%.3f | t_norm old/new %.2f/%.2f w %.2f/%.2f | "
        "init-errors: %zu/%zu with-new-enabled (of %zu such), %zu other, pred->new %zu\n",
        variant_name(v), mean_new, last.all_domain_acc, t_old, t_new, w_old, w_new,
        err_with_new_enabled, total, with_new, err_other, pred_is_new);
  }
  return 0;
}
