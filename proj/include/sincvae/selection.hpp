#pragma once

#include "sincvae/stats.hpp"
#include "sincvae/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sincvae {

struct SearchAxis {
  std::string name;
  std::vector<std::string> values;
};

struct SearchSpace {
  std::vector<SearchAxis> axes;

  void validate() const;
  Index size() const;
};

// Axis names are run-config keys so a configuration can be applied as overrides.
SearchSpace bonn_search_space();
SearchSpace chbmit_search_space();

struct Configuration {
  Index id = 0;
  std::vector<std::pair<std::string, std::string>> values;  // axis order

  const std::string* find(const std::string& axis) const;
  const std::string& at(const std::string& axis) const;
  // "axis=value,axis=value"
  std::string label() const;
};

// Cartesian product, first axis varying slowest; ids are positions.
std::vector<Configuration> grid_expand(const SearchSpace& space);

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};

// Shuffles 0..n-1 with `seed` and deals k contiguous folds whose sizes differ by at most one.
std::vector<Split> kfold(Index n, Index k, std::uint64_t seed);
// One split per distinct track (in order of first appearance); items are indices into `tracks`.
std::vector<Split> leave_one_track_out(const std::vector<std::string>& tracks);

struct TrialResult {
  Index config_id = 0;
  std::vector<double> fold_mse;
  Index parameter_count = 0;

  double mean() const;
  double std() const;  // sample standard deviation
};

// Index into `results` of the lowest mean (ties: lower config id).
std::size_t best_index(const std::vector<TrialResult>& results);
// Keeps c iff mean(c) <= mean(best) + std(best). Returns config ids.
std::vector<Index> one_sigma_filter(const std::vector<TrialResult>& results);

// One tie-break key: either ascending numeric value of an axis, or a
// preferred value of a categorical axis ("axis=value").
struct ComplexityKey {
  std::string axis;
  std::optional<std::string> preferred;
};
using ComplexityOrder = std::vector<ComplexityKey>;

ComplexityOrder default_complexity_order();
// Comma-separated keys, e.g. "model.latent_dim,model.filter_count,model.activation=identity".
ComplexityOrder parse_complexity_order(const std::string& text);

struct NormalityRecord {
  Index config_id = 0;
  bool tested = false;
  stats::TestResult result;
};

struct SelectionReport {
  double alpha = 0.05;
  std::vector<Index> all_ids;
  std::vector<Index> one_sigma;  // after the one-sigma filter
  std::vector<NormalityRecord> normality;
  std::string omnibus_test;  // "kruskal-wallis", "anova" or "none"
  std::optional<stats::TestResult> omnibus;
  bool omnibus_significant = false;
  Index best_id = 0;  // lowest mean
  std::vector<std::pair<Index, double>> best_vs_other;  // Mann-Whitney p against the best
  std::vector<Index> pairwise;  // after the pairwise stage
  std::vector<Index> pvalue_ids;  // row/column order of pvalues (ascending mean)
  std::vector<std::vector<double>> pvalues;
  std::vector<std::pair<std::string, std::vector<Index>>> tie_break;  // survivors after each key
  Index chosen_id = 0;
};

// one-sigma filter -> Shapiro-Wilk per config -> Kruskal-Wallis if any config is
// non-normal at alpha, else ANOVA -> if significant, drop configs whose
// Mann-Whitney p against the best is below alpha -> complexity tie-break.
SelectionReport select_configuration(const std::vector<TrialResult>& results,
                                     const std::vector<Configuration>& configs, double alpha = 0.05,
                                     const ComplexityOrder& order = default_complexity_order());

// Runs `evaluate(config, derived_seed)` for every configuration on `workers`
// threads; seeds are derive_seed(base_seed, config.id), so the result does
// not depend on the worker count.
using TrialFn = std::function<TrialResult(const Configuration&, std::uint64_t seed)>;
std::vector<TrialResult> run_grid(const std::vector<Configuration>& configs, const TrialFn& evaluate,
                                  std::uint64_t base_seed, unsigned workers = 1);

// `config_id,<axis>...,fold,mse`
void write_results_csv(std::ostream& out, const std::vector<Configuration>& configs,
                       const std::vector<TrialResult>& results);
struct ResultsTable {
  std::vector<Configuration> configs;
  std::vector<TrialResult> results;
};
ResultsTable read_results_csv(std::istream& in);

// Square matrix with a `config_id` header column.
void write_pvalue_csv(std::ostream& out, const SelectionReport& report);
void to_json(nlohmann::json& j, const SelectionReport& report);

}  // namespace sincvae
