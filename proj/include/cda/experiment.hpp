#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cda/config.hpp"

namespace cda {

// The benchmark matrix: two linear baselines, the cosine ablations, the full
// model, and the retraining ceiling.
enum class Variant {
  LinearFullUpdate,
  Linear,
  Cos,
  CosDer,
  CosNs,
  CosDerNs,
  RetrainUpperbound,
};

Variant variant_from_name(const std::string& name);
const char* variant_name(Variant v);
ScoreMode variant_mode(Variant v);
bool variant_uses_store(Variant v);
// Base config with the variant's freezing/regularizer/rehearsal flags applied.
AdaptationConfig variant_config(const AdaptationConfig& base, Variant v);
const std::vector<Variant>& all_variants();

struct ReportRow {
  std::string variant;
  std::string study;  // empty for plain benchmark rows
  std::string param;  // swept parameter, empty otherwise
  std::string value;  // swept value, empty otherwise
  std::size_t step = 0;
  std::string domain;
  double new_domain_acc = 0.0;
  double accumulated_new_acc = 0.0;
  double all_domain_acc = 0.0;
};

struct TimingRow {
  std::string variant;
  std::string study;
  std::string param;
  std::string value;
  std::size_t step = 0;
  double seconds = 0.0;
};

struct RunResult {
  std::vector<ReportRow> rows;
  std::vector<TimingRow> timings;

  void append(RunResult other);
};

// Deterministic for a fixed (plan, seed): accuracy columns are ratios of
// integer counts, never wall-clock. Timings go to their own file.
std::string metrics_csv(const std::vector<ReportRow>& rows);
std::string timings_csv(const std::vector<TimingRow>& rows);

// Shared state for one experiment: the corpus, the domain arrival order and
// lazily trained initial checkpoints (one per score mode) reused by every
// variant and sweep point.
struct ExperimentContext {
  ExperimentPlan plan;
  Corpus corpus;
  std::vector<int> initial_ids;
  std::vector<int> incremental_ids;

  const Model& base(ScoreMode mode);

 private:
  std::optional<Model> base_cos_;
  std::optional<Model> base_linear_;
};

ExperimentContext make_context(const ExperimentPlan& plan);

std::vector<int> order_incremental(const Corpus& corpus, std::vector<int> ids,
                                   const std::string& order, std::uint64_t seed);

// Sequential one-domain-at-a-time adaptation of one variant.
RunResult run_adaptive(ExperimentContext& ctx, Variant v, const AdaptationConfig& cfg,
                       const std::string& study = "", const std::string& param = "",
                       const std::string& value = "");

// Per-step full retrain on everything seen so far.
RunResult run_retrain_upperbound(ExperimentContext& ctx, const std::string& study = "");

// plan.variant == "all" runs the whole matrix.
RunResult run_benchmark(const ExperimentPlan& plan);

// Threshold sweeps; invalid pairs are skipped with a warning. Values apply
// to the adaptation episodes; the shared initial checkpoint stays at the
// plan's thresholds.
RunResult sweep_hinge(const ExperimentPlan& plan, const std::vector<double>& delta_pos,
                      const std::vector<double>& delta_neg);
RunResult sweep_der(const ExperimentPlan& plan, const std::vector<double>& delta_der);

const std::vector<std::string>& study_names();
RunResult run_study(const std::string& name, const ExperimentPlan& plan);

// Rank correlation with average ranks on ties; 0 when either side is
// constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cda
