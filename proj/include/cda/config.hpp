#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "cda/corpus.hpp"
#include "cda/encoder.hpp"
#include "cda/engine.hpp"

namespace cda {

// Flat `key = value` text file; '#' starts a comment, blank lines are
// ignored. Unknown or duplicate keys are errors so typos surface early.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::string& path);

  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  double get_f64(const std::string& key, double def);
  bool get_bool(const std::string& key, bool def);
  std::string get_str(const std::string& key, const std::string& def);

  // Throws if any key was never consumed by a getter.
  void check_all_used() const;

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

// Everything one experiment needs: corpus recipe, model dims, training
// knobs, variant and domain-arrival order.
struct ExperimentPlan {
  GeneratorConfig gen;
  EncoderDims dims;
  AdaptationConfig train;
  std::string variant = "all";
  std::size_t initial_domains = 30;
  std::size_t incremental_domains = 15;
  std::string order = "random";  // random | decreasing | increasing
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_text() const;
  std::uint64_t hash() const;
};

ExperimentPlan plan_from_text(const std::string& text);
ExperimentPlan plan_from_file(const std::string& path);

}  // namespace cda
