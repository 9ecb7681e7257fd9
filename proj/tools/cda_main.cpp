// cda: continual domain adaptation for personalized utterance classification.
//
// Verbs: gen-data, train-initial, adapt, benchmark, sweep-hinge, sweep-der,
// study, default-config. Every run is reproducible from (config, seed).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cda/experiment.hpp"
#include "cda/serialize.hpp"

namespace fs = std::filesystem;
using namespace cda;

namespace {

ExperimentPlan load_plan(const std::string& config_path, std::optional<std::uint64_t> seed) {
  ExperimentPlan plan = config_path.empty() ? ExperimentPlan{} : plan_from_file(config_path);
  if (seed) {
    plan.seed = *seed;
    plan.gen.seed = *seed;
    plan.train.seed = *seed;
  }
  plan.validate();
  return plan;
}

void write_reports(const RunResult& result, const std::string& out_dir, const std::string& name) {
  fs::create_directories(out_dir);
  const std::string metrics_path = out_dir + "/" + name + ".csv";
  const std::string timing_path = out_dir + "/" + name + "_timings.csv";
  io::write_file(metrics_path, metrics_csv(result.rows));
  io::write_file(timing_path, timings_csv(result.timings));
  std::printf("wrote %s (%zu rows) and %s\n", metrics_path.c_str(), result.rows.size(),
              timing_path.c_str());
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    out.push_back(std::stod(csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

std::vector<double> steps(double lo, double hi, double step) {
  std::vector<double> out;
  for (double x = lo; x <= hi + 1e-9; x += step) out.push_back(x);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual domain adaptation benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, corpus_path, model_path, out_path, out_dir = "reports";
  std::string store_in, store_out, mode_name = "cosine", domain = "next", variant, study_name;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file");
    cmd->add_option("--seed", seed, "override every seed in the config");
  };

  // --- gen-data ---
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus file");
  add_common(gen);
  gen->add_option("--out", out_path, "corpus output path (jsonl)")->required();
  gen->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    Corpus corpus = generate_corpus(plan.gen);
    write_corpus(corpus, out_path);
    std::printf("wrote %s: %zu domains\n", out_path.c_str(), corpus.domains.size());
  });

  // --- train-initial ---
  auto* ti = app.add_subcommand("train-initial", "joint training on the initial domains");
  add_common(ti);
  ti->add_option("--corpus", corpus_path, "corpus file")->required();
  ti->add_option("--out", out_path, "model checkpoint output")->required();
  ti->add_option("--mode", mode_name, "cosine | linear");
  ti->add_option("--store-out", store_out, "also build and write the exemplar store");
  ti->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    Corpus corpus = read_corpus(corpus_path);
    std::vector<int> initial;
    for (std::size_t i = 0; i < plan.initial_domains && i < corpus.domains.size(); ++i)
      initial.push_back(static_cast<int>(i));
    Model m = train_initial(corpus, initial, plan.dims, score_mode_from_name(mode_name),
                            plan.train);
    m.config_hash = plan.hash();
    m.save(out_path);
    EncodingCache cache(corpus);
    double acc = evaluate(m, corpus, initial, Split::Test, cache);
    std::printf("trained %zu domains, test accuracy %.4f, saved %s\n", initial.size(), acc,
                out_path.c_str());
    if (!store_out.empty()) {
      ExemplarStore store;
      init_exemplar_store(store, m, corpus, cache, plan.train);
      store.save(store_out);
      std::printf("wrote exemplar store %s (%zu exemplars)\n", store_out.c_str(), store.total());
    }
  });

  // --- adapt ---
  auto* ad = app.add_subcommand("adapt", "adapt one new domain onto a trained model");
  add_common(ad);
  ad->add_option("--corpus", corpus_path, "corpus file")->required();
  ad->add_option("--model", model_path, "input model checkpoint")->required();
  ad->add_option("--out", out_path, "output model checkpoint")->required();
  ad->add_option("--domain", domain, "domain name, or 'next' for the first unseen one");
  ad->add_option("--store-in", store_in, "exemplar store to rehearse from");
  ad->add_option("--store-out", store_out, "where to write the updated store");
  ad->add_option("--variant", variant, "apply a benchmark variant's flags");
  ad->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    Corpus corpus = read_corpus(corpus_path);
    Model m = Model::load(model_path);
    AdaptationConfig cfg = plan.train;
    if (!variant.empty()) cfg = variant_config(plan.train, variant_from_name(variant));

    int target = -1;
    if (domain == "next") {
      for (std::size_t d = 0; d < corpus.domains.size(); ++d)
        if (m.domain_id(corpus.domains[d].name) < 0) {
          target = static_cast<int>(d);
          break;
        }
      if (target < 0) throw std::runtime_error("no unseen domain left in the corpus");
    } else {
      target = corpus.domain_id(domain);
      if (target < 0) throw std::runtime_error("domain not in corpus: " + domain);
    }

    ExemplarStore store;
    if (!store_in.empty()) store = ExemplarStore::load(store_in);
    const bool want_store = !store_in.empty() || !store_out.empty() || cfg.use_exemplars;

    EncodingCache cache(corpus);
    const std::size_t initial_count = m.table.frozen_prefix == 0
                                          ? m.domain_count()
                                          : std::min(m.domain_count(), m.table.frozen_prefix);
    MetricsRecord rec = adapt_domain(m, corpus, target, want_store ? &store : nullptr, cfg, cache,
                                     m.domain_count() - initial_count + 1, initial_count);
    m.save(out_path);
    if (!store_out.empty()) store.save(store_out);
    std::printf("adapted %s: new %.4f accumulated %.4f all %.4f, saved %s\n", rec.domain.c_str(),
                rec.new_domain_acc, rec.accumulated_new_acc, rec.all_domain_acc, out_path.c_str());
  });

  // --- benchmark ---
  auto* bm = app.add_subcommand("benchmark", "initial training plus sequential adaptation");
  add_common(bm);
  bm->add_option("--out-dir", out_dir, "report directory");
  bm->add_option("--variant", variant, "variant id or 'all'");
  bm->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    if (!variant.empty()) plan.variant = variant;
    write_reports(run_benchmark(plan), out_dir, "benchmark");
  });

  // --- sweep-hinge ---
  std::string dpos_list, dneg_list;
  auto* sh = app.add_subcommand("sweep-hinge", "sweep the hinge thresholds");
  add_common(sh);
  sh->add_option("--out-dir", out_dir, "report directory");
  sh->add_option("--delta-pos", dpos_list, "comma list (default 0.5..1.0 step 0.1)");
  sh->add_option("--delta-neg", dneg_list, "comma list (default 0..0.4 step 0.1)");
  sh->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    auto dpos = dpos_list.empty() ? steps(0.5, 1.0, 0.1) : parse_list(dpos_list);
    auto dneg = dneg_list.empty() ? steps(0.0, 0.4, 0.1) : parse_list(dneg_list);
    write_reports(sweep_hinge(plan, dpos, dneg), out_dir, "hinge_sweep");
  });

  // --- sweep-der ---
  std::string der_list;
  auto* sd = app.add_subcommand("sweep-der", "sweep the embedding-regularizer margin");
  add_common(sd);
  sd->add_option("--out-dir", out_dir, "report directory");
  sd->add_option("--values", der_list, "comma list (default 0..0.5 step 0.1)");
  sd->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    auto values = der_list.empty() ? steps(0.0, 0.5, 0.1) : parse_list(der_list);
    write_reports(sweep_der(plan, values), out_dir, "der_sweep");
  });

  // --- study ---
  auto* st = app.add_subcommand("study", "run a named micro-benchmark");
  add_common(st);
  st->add_option("name", study_name, "order | plain-lambda | downsample | initial-count | long-run | cos-vs-linear")
      ->required();
  st->add_option("--out-dir", out_dir, "report directory");
  st->callback([&] {
    ExperimentPlan plan = load_plan(config_path, seed);
    std::string file = "study_" + study_name;
    for (auto& c : file)
      if (c == '-') c = '_';
    write_reports(run_study(study_name, plan), out_dir, file);
  });

  // --- default-config ---
  auto* dc = app.add_subcommand("default-config", "print every config key with its default");
  dc->callback([&] { std::fputs(ExperimentPlan{}.to_text().c_str(), stdout); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
