#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "culturekit/assignment.hpp"
#include "culturekit/roster.hpp"

namespace culturekit::metrics {

// Tie-corrected Kendall tau-b: (C - D) / sqrt((C+D+Tx)(C+D+Ty)), computed via
// merge-sort inversion counting (exact pair counts, O(n log n)). Throws
// UndefinedCorrelationError when either vector is fully tied.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

// Average ranks for ties, then Pearson on the ranks. Throws
// UndefinedCorrelationError for constant vectors.
double spearman_rho(std::span<const double> x, std::span<const double> y);

std::vector<double> average_ranks(std::span<const double> v);

// One symbol-to-culture attribution, independent of whether it came from
// assignment or from the candidate fallback for logprob-less backends.
struct SymbolRef {
  std::string model_id;
  std::string topic;
  std::string culture;
  std::string norm;
};

struct DiversityTable {
  // (model, topic, culture) -> distinct symbol count; zero-filled over the
  // requested culture/topic universe.
  std::map<std::tuple<std::string, std::string, std::string>, long> entries;
  // (model, topic, region) -> mean count over the universe's member cultures.
  std::map<std::tuple<std::string, std::string, std::string>, double> region_rollups;
};

DiversityTable diversity(std::span<const SymbolRef> symbols, const roster::Roster& roster,
                         const std::vector<std::string>& cultures,
                         const std::vector<std::string>& topics,
                         const std::vector<std::string>& models);

// |culture_symbols ∩ agnostic_symbols| / |culture_symbols|; absent when the
// culture has no symbols.
std::optional<double> overlap_rate(const std::set<std::string>& culture_symbols,
                                   const std::set<std::string>& agnostic_symbols);

struct AblationRates {
  std::optional<double> hit_rate;  // share of neutral symbols regenerated
  std::optional<double> new_rate;  // share of condition symbols never seen before
};

AblationRates ablation_rates(const std::set<std::string>& condition_symbols,
                             const std::set<std::string>& neutral_symbols,
                             const std::set<std::string>& all_known_symbols);

struct CorrelationResult {
  std::string model_id;
  std::string topic;
  double tau = 0.0;
  int n = 0;
  std::string strength_label;
};

std::string strength_label(double tau);

// Kendall tau-b between per-culture diversity and per-culture co-occurrence
// counts, one result per (model, topic). Cultures missing from `counts` are
// an error listing the ids.
std::vector<CorrelationResult> correlate_diversity_frequency(
    const DiversityTable& div,
    const std::map<std::pair<std::string, std::string>, long>& counts,
    const std::vector<std::string>& cultures, const std::vector<std::string>& topics,
    const std::vector<std::string>& models);

}  // namespace culturekit::metrics
